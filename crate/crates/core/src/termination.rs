//! Free-boundary solver for an exponentially distributed certainty time.
//!
//! With rate `lambda`, the minimized expected cost `u` solves
//! `lambda (u - q) + |grad u| f = K` capped at `q` from above: staying put
//! until the target is revealed is always an option, so `u <= q`, with
//! equality on the motionless set. A modified Fast Marching sweep handles the
//! cap by seeding every node with its `q` value and accepting the capped
//! local update in nondecreasing order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::descent;
use crate::eikonal::Trajectory;
use crate::error::{Error, Result};
use crate::grid::{DomainMask, Point, ScalarField};
use crate::robust::{ParetoEntry, ParetoFront};

/// Motionless detection threshold on `|u - q|` (both quantities are O(1) on
/// the unit square).
const MOTIONLESS_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct RandomTerminationSolution {
    pub u_lambda: ScalarField,
    /// Nodes where waiting in place is optimal (`u = q`).
    pub motionless: DomainMask,
    pub lambda: f64,
    /// Max residual of the discrete equation over non-motionless inside nodes.
    pub max_residual: f64,
}

/// Capped local update: the root of
/// `lambda (v - q) + f/h * sqrt(max(v-a,0)^2 + max(v-b,0)^2) = K`
/// clipped at `q` from above. `a`, `b` are the per-axis neighbor minima.
pub fn capped_local_update(a: f64, b: f64, q: f64, f: f64, k: f64, lambda: f64, h: f64) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let rate = f / h;
    let mu = k + lambda * q;
    // zero-gradient root, valid while it does not exceed the smaller neighbor
    let v0 = q + k / lambda;
    let root = if !lo.is_finite() || v0 <= lo {
        v0
    } else {
        let v1 = (mu + rate * lo) / (rate + lambda);
        if !hi.is_finite() || v1 <= hi {
            v1
        } else {
            // two-sided quadratic from squaring the gradient norm
            let aa = 2.0 * rate * rate - lambda * lambda;
            let bb = -2.0 * rate * rate * (a + b) + 2.0 * lambda * mu;
            let cc = rate * rate * (a * a + b * b) - mu * mu;
            let disc = (bb * bb - 4.0 * aa * cc).max(0.0);
            let sq = disc.sqrt();
            let r1 = (-bb - sq) / (2.0 * aa);
            let r2 = (-bb + sq) / (2.0 * aa);
            // the increasing-side root keeps a nonnegative gradient magnitude
            let valid = |v: f64| v >= hi - 1e-12 && lambda * v <= mu + 1e-9 * mu.abs().max(1.0);
            let picked = match (valid(r1), valid(r2)) {
                (true, true) => r1.min(r2),
                (true, false) => r1,
                (false, true) => r2,
                (false, false) => v1.max(hi),
            };
            // the quadratic coefficients are O((f/h)^2) and lose digits to
            // cancellation; polish on the unsquared equation
            polish_root(picked, a, b, rate, lambda, mu, hi)
        }
    };
    root.min(q)
}

fn polish_root(mut v: f64, a: f64, b: f64, rate: f64, lambda: f64, mu: f64, hi: f64) -> f64 {
    for _ in 0..2 {
        let da = (v - a).max(0.0);
        let db = (v - b).max(0.0);
        let norm = da.hypot(db);
        if norm == 0.0 {
            break;
        }
        let g = rate * norm + lambda * v - mu;
        let dg = rate * (da + db) / norm + lambda;
        v -= g / dg;
    }
    v.max(hi)
}

#[derive(Debug, Clone, Copy)]
struct HeapEntry {
    value: f64,
    idx: u32,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .value
            .total_cmp(&self.value)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

/// Solve the randomly-terminated planning equation by capped marching.
///
/// `q` is the expected remaining cost once the target is identified; `cost`
/// is the pre-identification running cost (`0` for time-after-identification,
/// `1` for total time).
pub fn solve_random_termination(
    q: &ScalarField,
    speed: &ScalarField,
    lambda: f64,
    mask: &DomainMask,
    cost: &ScalarField,
) -> Result<RandomTerminationSolution> {
    let spec = mask.spec();
    assert_eq!(q.spec(), spec, "q on a different grid");
    assert_eq!(speed.spec(), spec, "speed on a different grid");
    assert_eq!(cost.spec(), spec, "cost on a different grid");
    if !(lambda > 0.0) {
        return Err(Error::invalid("lambda", format!("rate {lambda} must be positive")));
    }
    for idx in 0..spec.len() {
        if !mask.inside_idx(idx) {
            continue;
        }
        let (i, j) = spec.coords(idx);
        if !(speed.at(idx) > 0.0) {
            return Err(Error::NonPositiveField {
                what: "speed",
                value: speed.at(idx),
                i,
                j,
            });
        }
        if cost.at(idx) < 0.0 {
            return Err(Error::NonPositiveField {
                what: "cost",
                value: cost.at(idx),
                i,
                j,
            });
        }
        if !q.at(idx).is_finite() {
            return Err(Error::invalid(
                "q",
                format!("expected-cost field must be finite inside, +inf at ({i}, {j})"),
            ));
        }
    }

    let n = spec.len();
    let nx = spec.nx;
    let ny = spec.ny;
    let mut u = vec![f64::INFINITY; n];
    let mut accepted = vec![false; n];
    let mut heap = BinaryHeap::with_capacity(n);
    // staying put is always admissible: seed every node with its cap value
    for idx in 0..n {
        if mask.inside_idx(idx) {
            u[idx] = q.at(idx);
            heap.push(HeapEntry {
                value: u[idx],
                idx: idx as u32,
            });
        }
    }

    let mut last_accepted = f64::NEG_INFINITY;
    while let Some(entry) = heap.pop() {
        let idx = entry.idx as usize;
        if accepted[idx] || entry.value > u[idx] {
            continue;
        }
        accepted[idx] = true;
        assert!(
            entry.value >= last_accepted - 1e-12,
            "causality violated: accepted {} after {}",
            entry.value,
            last_accepted
        );
        last_accepted = entry.value;

        let (i, j) = spec.coords(idx);
        let mut relax = |ii: usize, jj: usize| {
            let nb = spec.idx(ii, jj);
            if accepted[nb] || !mask.inside_idx(nb) {
                return;
            }
            let read = |c: Option<usize>| -> f64 {
                match c {
                    Some(p) if accepted[p] => u[p],
                    _ => f64::INFINITY,
                }
            };
            let wv = if ii > 0 { Some(spec.idx(ii - 1, jj)) } else { None };
            let ev = if ii + 1 < nx { Some(spec.idx(ii + 1, jj)) } else { None };
            let sv = if jj > 0 { Some(spec.idx(ii, jj - 1)) } else { None };
            let nv = if jj + 1 < ny { Some(spec.idx(ii, jj + 1)) } else { None };
            let cand = capped_local_update(
                read(wv).min(read(ev)),
                read(sv).min(read(nv)),
                q.at(nb),
                speed.at(nb),
                cost.at(nb),
                lambda,
                spec.h,
            );
            if cand < u[nb] {
                u[nb] = cand;
                heap.push(HeapEntry {
                    value: cand,
                    idx: nb as u32,
                });
            }
        };
        if i > 0 {
            relax(i - 1, j);
        }
        if i + 1 < nx {
            relax(i + 1, j);
        }
        if j > 0 {
            relax(i, j - 1);
        }
        if j + 1 < ny {
            relax(i, j + 1);
        }
    }

    let u = ScalarField::from_values(spec, u)?;
    let motionless_inside: Vec<bool> = (0..n)
        .map(|idx| mask.inside_idx(idx) && (u.at(idx) - q.at(idx)).abs() <= MOTIONLESS_TOL)
        .collect();
    let motionless = DomainMask::from_inside(spec, motionless_inside)?;
    let max_residual = termination_residual(&u, q, speed, cost, lambda, mask, &motionless);
    Ok(RandomTerminationSolution {
        u_lambda: u,
        motionless,
        lambda,
        max_residual,
    })
}

/// Max residual of `lambda (u - q) + f |grad u| - K` over non-motionless
/// inside nodes.
pub fn termination_residual(
    u: &ScalarField,
    q: &ScalarField,
    speed: &ScalarField,
    cost: &ScalarField,
    lambda: f64,
    mask: &DomainMask,
    motionless: &DomainMask,
) -> f64 {
    let spec = u.spec();
    let mut worst = 0.0f64;
    for idx in 0..spec.len() {
        if !mask.inside_idx(idx) || motionless.inside_idx(idx) || !u.at(idx).is_finite() {
            continue;
        }
        let (i, j) = spec.coords(idx);
        let g = u.upwind_gradient_magnitude(i, j).expect("node in range");
        let r = (lambda * (u.at(idx) - q.at(idx)) + speed.at(idx) * g - cost.at(idx)).abs();
        worst = worst.max(r / cost.at(idx).max(1.0));
    }
    worst
}

/// Same solve on the domain restricted to `{qbar <= c}`.
pub fn solve_random_termination_constrained(
    q: &ScalarField,
    qbar: &ScalarField,
    speed: &ScalarField,
    lambda: f64,
    c: f64,
    mask: &DomainMask,
    cost: &ScalarField,
) -> Result<RandomTerminationSolution> {
    if !c.is_finite() && c < 0.0 {
        return Err(Error::invalid("C", "constraint level must not be -inf"));
    }
    let spec = mask.spec();
    let allowed: Vec<bool> = (0..spec.len())
        .map(|idx| mask.inside_idx(idx) && qbar.at(idx) <= c)
        .collect();
    let restricted = DomainMask::from_inside(spec, allowed)
        .map_err(|_| Error::Infeasible(format!("no nodes satisfy the worst-case bound {c}")))?;
    solve_random_termination(q, speed, lambda, &restricted, cost)
}

/// Descend `u_lambda` from `start` until a motionless node is reached.
pub fn trace_to_motionless(
    sol: &RandomTerminationSolution,
    speed: &ScalarField,
    cost: &ScalarField,
    start: Point,
    step: f64,
) -> Result<Trajectory> {
    let spec = sol.u_lambda.spec();
    if !(step > 0.0) || step > spec.h + 1e-12 {
        return Err(Error::invalid(
            "step",
            format!("step {step} must lie in (0, h = {}]", spec.h),
        ));
    }
    let motionless = &sol.motionless;
    let stop = |p: Point, _u_p: f64, stalled: bool| -> Option<(Point, f64)> {
        // reaching the cell of a motionless node ends the trace; a stalled
        // descent may snap from up to two cells out
        let radius = if stalled { 2.0 * spec.h } else { spec.h };
        let mut best: Option<(Point, f64)> = None;
        let (ci, cj) = spec.nearest_node(p);
        for dj in -2i64..=2 {
            for di in -2i64..=2 {
                let (i, j) = (ci as i64 + di, cj as i64 + dj);
                if i < 0 || j < 0 || i as usize >= spec.nx || j as usize >= spec.ny {
                    continue;
                }
                let (i, j) = (i as usize, j as usize);
                if !motionless.is_inside(i, j) {
                    continue;
                }
                let node = spec.node(i, j);
                let d = node.dist(p);
                if d <= radius && best.map_or(true, |(_, bd)| d < bd) {
                    best = Some((node, d));
                }
            }
        }
        best.map(|(node, _)| (node, 0.0))
    };
    descent::trace_descent(&sol.u_lambda, speed, cost, start, step, &stop)
}

/// Sweep the worst-case bound `C` over `c_list` and collect the
/// (worst-along-path, expected) pairs reachable from `start`; dominated pairs
/// are removed. Infeasible or disconnected `C` values are skipped.
pub fn exponential_pareto(
    q: &ScalarField,
    qbar: &ScalarField,
    speed: &ScalarField,
    lambda: f64,
    c_list: &[f64],
    start: Point,
    mask: &DomainMask,
    cost: &ScalarField,
) -> Result<ParetoFront> {
    let spec = mask.spec();
    let mut entries = Vec::new();
    for &c in c_list {
        let sol = match solve_random_termination_constrained(q, qbar, speed, lambda, c, mask, cost)
        {
            Ok(sol) => sol,
            Err(Error::Infeasible(_)) => continue,
            Err(e) => return Err(e),
        };
        let (si, sj) = spec.nearest_node(start);
        if !sol.u_lambda.get(si, sj).is_finite() {
            continue; // start cut off from the restricted domain
        }
        let avg = sol.u_lambda.get(si, sj);
        let traj = match trace_to_motionless(&sol, speed, cost, start, spec.h / 2.0) {
            Ok(t) => t,
            Err(Error::Stagnation { .. }) => continue,
            Err(e) => return Err(e),
        };
        let mut worst = f64::NEG_INFINITY;
        for p in &traj.points {
            if let Some((v, _)) = descent::sample_finite(qbar, *p) {
                worst = worst.max(v);
            }
        }
        let end = traj.end();
        let (ei, ej) = spec.nearest_node(end);
        entries.push(ParetoEntry {
            worst,
            avg,
            node_idx: spec.idx(ei, ej),
        });
    }
    Ok(ParetoFront::from_entries(entries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::sweep::solve_random_termination_sweeping;

    fn dip_field(n: usize) -> (ScalarField, ScalarField, ScalarField, DomainMask) {
        let spec = GridSpec::unit_square(n).unwrap();
        // two unequal dips: shallow local at (0.2, 0.5), global at (0.8, 0.5),
        // watershed between them at x = 0.35
        let q = ScalarField::from_fn(spec, |p| {
            (0.3 + p.dist(Point::new(0.2, 0.5))).min(p.dist(Point::new(0.8, 0.5)))
        })
        .unwrap();
        let f = ScalarField::constant(spec, 1.0);
        let k = ScalarField::constant(spec, 0.0);
        (q, f, k, DomainMask::all(spec))
    }

    #[test]
    fn rejects_nonpositive_rate() {
        let (q, f, k, mask) = dip_field(11);
        assert!(solve_random_termination(&q, &f, 0.0, &mask, &k).is_err());
        assert!(solve_random_termination(&q, &f, -1.0, &mask, &k).is_err());
    }

    #[test]
    fn constant_q_is_entirely_motionless() {
        let spec = GridSpec::unit_square(15).unwrap();
        let q = ScalarField::constant(spec, 2.5);
        let f = ScalarField::constant(spec, 1.0);
        let k = ScalarField::constant(spec, 0.0);
        let mask = DomainMask::all(spec);
        let sol = solve_random_termination(&q, &f, 3.0, &mask, &k).unwrap();
        assert_eq!(sol.motionless.count_inside(), spec.len());
        assert!(sol.u_lambda.values().iter().all(|&v| (v - 2.5).abs() <= 1e-12));
    }

    #[test]
    fn huge_rate_pins_u_to_q() {
        let (q, f, k, mask) = dip_field(41);
        let sol = solve_random_termination(&q, &f, 1e6, &mask, &k).unwrap();
        for idx in 0..q.spec().len() {
            assert!((sol.u_lambda.at(idx) - q.at(idx)).abs() < 1e-3);
        }
    }

    #[test]
    fn solution_is_capped_and_floored() {
        let (q, f, k, mask) = dip_field(41);
        let sol = solve_random_termination(&q, &f, 4.0, &mask, &k).unwrap();
        let qmin = q.min_over(&mask);
        for idx in 0..q.spec().len() {
            assert!(sol.u_lambda.at(idx) <= q.at(idx) + 1e-9);
            assert!(sol.u_lambda.at(idx) >= qmin - 1e-9);
        }
        assert!(sol.max_residual <= 1e-9, "residual {}", sol.max_residual);
    }

    #[test]
    fn motionless_nodes_are_local_minima_of_q() {
        let (q, f, k, mask) = dip_field(41);
        let spec = q.spec();
        let sol = solve_random_termination(&q, &f, 6.0, &mask, &k).unwrap();
        for j in 0..spec.ny {
            for i in 0..spec.nx {
                if !sol.motionless.is_inside(i, j) {
                    continue;
                }
                let c = q.get(i, j);
                let mut ok = true;
                if i > 0 {
                    ok &= c <= q.get(i - 1, j) + 1e-9;
                }
                if i + 1 < spec.nx {
                    ok &= c <= q.get(i + 1, j) + 1e-9;
                }
                if j > 0 {
                    ok &= c <= q.get(i, j - 1) + 1e-9;
                }
                if j + 1 < spec.ny {
                    ok &= c <= q.get(i, j + 1) + 1e-9;
                }
                assert!(ok, "motionless node ({i}, {j}) is not a local minimum of q");
            }
        }
        // the global minimum is always motionless
        let gm = q.argmin_over(&mask).unwrap();
        assert!(sol.motionless.inside_idx(gm));
    }

    #[test]
    fn rate_controls_which_dip_wins() {
        let (q, f, k, mask) = dip_field(81);
        let spec = q.spec();
        // start inside the shallow local basin
        let start = Point::new(0.3, 0.5);
        // patient: cross the ridge to the global dip at (0.8, 0.5)
        let sol = solve_random_termination(&q, &f, 1.0, &mask, &k).unwrap();
        let traj = trace_to_motionless(&sol, &f, &k, start, spec.h / 2.0).unwrap();
        assert!(traj.end().dist(Point::new(0.8, 0.5)) < 0.05, "end {:?}", traj.end());
        // impatient: settle for the nearby dip at (0.2, 0.5)
        let sol = solve_random_termination(&q, &f, 80.0, &mask, &k).unwrap();
        let traj = trace_to_motionless(&sol, &f, &k, start, spec.h / 2.0).unwrap();
        assert!(traj.end().dist(Point::new(0.2, 0.5)) < 0.05, "end {:?}", traj.end());
    }

    #[test]
    fn matches_capped_sweeping_fixed_point() {
        let (q, f, k, mask) = dip_field(41);
        let sol = solve_random_termination(&q, &f, 5.0, &mask, &k).unwrap();
        let swept = solve_random_termination_sweeping(&q, &f, 5.0, &mask, &k, 1e-12).unwrap();
        for idx in 0..q.spec().len() {
            assert!(
                (sol.u_lambda.at(idx) - swept.at(idx)).abs() <= 1e-9,
                "node {idx}: marched {} vs swept {}",
                sol.u_lambda.at(idx),
                swept.at(idx)
            );
        }
    }

    #[test]
    fn vacuous_constraint_reproduces_unconstrained_solve() {
        let (q, f, k, mask) = dip_field(31);
        let qbar = q.map(|v| v + 0.2);
        let unconstrained = solve_random_termination(&q, &f, 4.0, &mask, &k).unwrap();
        let constrained =
            solve_random_termination_constrained(&q, &qbar, &f, 4.0, f64::INFINITY, &mask, &k)
                .unwrap();
        assert_eq!(unconstrained.u_lambda.values(), constrained.u_lambda.values());
    }

    #[test]
    fn binding_constraint_is_infeasible_when_everything_excluded() {
        let (q, f, k, mask) = dip_field(21);
        let qbar = q.map(|v| v + 0.2);
        assert!(matches!(
            solve_random_termination_constrained(&q, &qbar, &f, 4.0, -1.0, &mask, &k),
            Err(Error::Infeasible(_))
        ));
    }
}
