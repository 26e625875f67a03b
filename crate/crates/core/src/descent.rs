//! Shared gradient-descent stepper used by the trajectory tracers.
//!
//! Node gradients are central differences where both neighbors carry finite
//! values and one-sided otherwise; interpolation renormalizes the bilinear
//! weights over the finite corners of the cell. Steps refuse to enter cells
//! with `+inf` corners (obstacle-adjacent cells), sliding along the blocked
//! axis instead, so traced paths keep a one-cell standoff from obstacles.

use crate::eikonal::Trajectory;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, Point, ScalarField};

const GRAD_EPS: f64 = 1e-12;

/// Signed gradient at a node from finite neighbors only; `None` when the node
/// value itself is not finite.
fn node_gradient(u: &ScalarField, i: usize, j: usize) -> Option<(f64, f64)> {
    let spec = u.spec();
    let c = u.get(i, j);
    if !c.is_finite() {
        return None;
    }
    let h = spec.h;
    let val = |ii: isize, jj: isize| -> Option<f64> {
        if ii < 0 || jj < 0 || ii as usize >= spec.nx || jj as usize >= spec.ny {
            return None;
        }
        let v = u.get(ii as usize, jj as usize);
        v.is_finite().then_some(v)
    };
    let one_axis = |lo: Option<f64>, hi: Option<f64>| -> f64 {
        match (lo, hi) {
            (Some(a), Some(b)) => (b - a) / (2.0 * h),
            (Some(a), None) => (c - a) / h,
            (None, Some(b)) => (b - c) / h,
            (None, None) => 0.0,
        }
    };
    let gx = one_axis(val(i as isize - 1, j as isize), val(i as isize + 1, j as isize));
    let gy = one_axis(val(i as isize, j as isize - 1), val(i as isize, j as isize + 1));
    Some((gx, gy))
}

/// Bilinear interpolation over the finite corners of the containing cell with
/// renormalized weights. Returns `(value, grad)`; `None` if every corner is
/// excluded.
pub(crate) fn sample_finite(u: &ScalarField, p: Point) -> Option<(f64, (f64, f64))> {
    let (i0, j0, fx, fy) = u.locate(p).ok()?;
    let corners = [
        (i0, j0, (1.0 - fx) * (1.0 - fy)),
        (i0 + 1, j0, fx * (1.0 - fy)),
        (i0, j0 + 1, (1.0 - fx) * fy),
        (i0 + 1, j0 + 1, fx * fy),
    ];
    let mut wsum = 0.0;
    let mut value = 0.0;
    let mut gx = 0.0;
    let mut gy = 0.0;
    for &(i, j, w) in &corners {
        if w == 0.0 {
            continue;
        }
        if let Some((cgx, cgy)) = node_gradient(u, i, j) {
            wsum += w;
            value += w * u.get(i, j);
            gx += w * cgx;
            gy += w * cgy;
        }
    }
    if wsum <= 0.0 {
        return None;
    }
    Some((value / wsum, (gx / wsum, gy / wsum)))
}

/// Whether every corner of the cell containing `p` carries a finite value.
fn clean_cell(u: &ScalarField, p: Point) -> bool {
    match u.locate(p) {
        Ok((i0, j0, _, _)) => {
            u.get(i0, j0).is_finite()
                && u.get(i0 + 1, j0).is_finite()
                && u.get(i0, j0 + 1).is_finite()
                && u.get(i0 + 1, j0 + 1).is_finite()
        }
        Err(_) => false,
    }
}

/// March downhill from `start` with midpoint steps of length `step`,
/// accumulating the `K/f` path integral. `stop(p, u_p, stalled)` decides
/// termination and provides the snap target plus the cost of the final leg;
/// it is consulted once more with `stalled = true` before a stagnation error
/// is raised.
pub(crate) fn trace_descent(
    u: &ScalarField,
    speed: &ScalarField,
    cost: &ScalarField,
    start: Point,
    step: f64,
    stop: &dyn Fn(Point, f64, bool) -> Option<(Point, f64)>,
) -> Result<Trajectory> {
    let spec = u.spec();
    let stagnated = |p: Point| Error::Stagnation { x: p.x, y: p.y };
    let domain_span = (spec.nx + spec.ny) as f64 * spec.h;
    let max_steps = (40.0 * domain_span / step).ceil() as usize;

    let mut points = vec![start];
    let mut costs = vec![0.0];
    let mut p = start;
    let finish = |points: &mut Vec<Point>, costs: &mut Vec<f64>, snap: Point, leg: f64| {
        if snap.dist(*points.last().unwrap()) > 0.0 {
            points.push(snap);
            costs.push(costs.last().unwrap() + leg);
        }
        Trajectory {
            points: std::mem::take(points),
            cumulative_cost: std::mem::take(costs),
        }
    };
    for _ in 0..max_steps {
        let (u_p, grad) = sample_finite(u, p).ok_or_else(|| stagnated(p))?;
        if let Some((snap, leg)) = stop(p, u_p, false) {
            return Ok(finish(&mut points, &mut costs, snap, leg));
        }
        let stalled = |points: &mut Vec<Point>, costs: &mut Vec<f64>| -> Result<Trajectory> {
            match stop(p, u_p, true) {
                Some((snap, leg)) => Ok(finish(points, costs, snap, leg)),
                None => Err(stagnated(p)),
            }
        };
        let dir = match descent_dir(grad) {
            Some(d) => d,
            None => return stalled(&mut points, &mut costs),
        };
        // midpoint rule: re-evaluate the direction halfway along the step
        let mid = clamp_to_grid(
            Point::new(p.x + 0.5 * step * dir.0, p.y + 0.5 * step * dir.1),
            &spec,
        );
        let dir = sample_finite(u, mid)
            .and_then(|(_, g)| descent_dir(g))
            .unwrap_or(dir);
        let next = match try_step(u, &spec, p, dir, step) {
            Some(n) => n,
            None => return stalled(&mut points, &mut costs),
        };
        let rate = cost_rate(speed, cost, mid)
            .or_else(|| cost_rate(speed, cost, p))
            .ok_or_else(|| stagnated(p))?;
        let moved = p.dist(next);
        if moved < 1e-3 * step {
            return stalled(&mut points, &mut costs);
        }
        costs.push(costs.last().unwrap() + moved * rate);
        points.push(next);
        p = next;
    }
    Err(stagnated(p))
}

/// Step to `p + step*dir` when the destination cell is clean; otherwise slide
/// along the axis that stays clean (larger component first). Starting inside
/// a dirty cell only requires the destination to be sampleable.
fn try_step(u: &ScalarField, spec: &GridSpec, p: Point, dir: (f64, f64), step: f64) -> Option<Point> {
    let from_clean = clean_cell(u, p);
    let admit = |cand: Point| -> Option<Point> {
        if clean_cell(u, cand) || (!from_clean && sample_finite(u, cand).is_some()) {
            Some(cand)
        } else {
            None
        }
    };
    let full = clamp_to_grid(Point::new(p.x + step * dir.0, p.y + step * dir.1), spec);
    if let Some(n) = admit(full) {
        return Some(n);
    }
    let mut axes = [
        (dir.0.abs(), Point::new(p.x + step * dir.0.signum(), p.y)),
        (dir.1.abs(), Point::new(p.x, p.y + step * dir.1.signum())),
    ];
    if axes[1].0 > axes[0].0 {
        axes.swap(0, 1);
    }
    for (weight, cand) in axes {
        if weight < 1e-12 {
            continue;
        }
        if let Some(n) = admit(clamp_to_grid(cand, spec)) {
            return Some(n);
        }
    }
    None
}

fn descent_dir(grad: (f64, f64)) -> Option<(f64, f64)> {
    let norm = grad.0.hypot(grad.1);
    if norm < GRAD_EPS {
        return None;
    }
    Some((-grad.0 / norm, -grad.1 / norm))
}

fn cost_rate(speed: &ScalarField, cost: &ScalarField, p: Point) -> Option<f64> {
    let f = sample_finite(speed, p)?.0;
    let k = sample_finite(cost, p)?.0;
    (f > 0.0).then(|| k / f)
}

fn clamp_to_grid(p: Point, spec: &GridSpec) -> Point {
    let max_x = spec.origin.x + (spec.nx - 1) as f64 * spec.h;
    let max_y = spec.origin.y + (spec.ny - 1) as f64 * spec.h;
    Point::new(p.x.clamp(spec.origin.x, max_x), p.y.clamp(spec.origin.y, max_y))
}
