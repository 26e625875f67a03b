//! Gauss-Seidel fast-sweeping reference solvers.
//!
//! These iterate the same upwind local updates as the marching solvers until
//! a fixed point, alternating the four sweep orderings. They exist to
//! cross-validate the marching results (both must land on the same discrete
//! fixed point) and are not used by the planners.

use crate::error::{Error, Result};
use crate::grid::{DomainMask, Point, ScalarField};
use crate::eikonal::{seed_ball, snap_sources, stationary_residual, ValueSolution};

const MAX_CYCLES: usize = 10_000;

fn sweep_orders(nx: usize, ny: usize) -> [(Vec<usize>, Vec<usize>); 4] {
    let fwd_x: Vec<usize> = (0..nx).collect();
    let rev_x: Vec<usize> = (0..nx).rev().collect();
    let fwd_y: Vec<usize> = (0..ny).collect();
    let rev_y: Vec<usize> = (0..ny).rev().collect();
    [
        (fwd_x.clone(), fwd_y.clone()),
        (rev_x.clone(), fwd_y),
        (fwd_x, rev_y.clone()),
        (rev_x, rev_y),
    ]
}

/// Sweeping counterpart of [`crate::eikonal::solve_stationary`]; iterates to a
/// `tol` fixed point (max update per cycle).
pub fn solve_stationary_sweeping(
    speed: &ScalarField,
    cost: &ScalarField,
    sources: &[Point],
    mask: &DomainMask,
    tol: f64,
) -> Result<ValueSolution> {
    let spec = mask.spec();
    let source_nodes = snap_sources(sources, mask)?;
    let seeds = seed_ball(&source_nodes, speed, cost, mask);
    let mut u = vec![f64::INFINITY; spec.len()];
    for &s in &source_nodes {
        u[s] = 0.0;
    }
    for &(idx, value) in &seeds {
        u[idx] = u[idx].min(value);
    }
    let orders = sweep_orders(spec.nx, spec.ny);
    let mut converged = false;
    for _ in 0..MAX_CYCLES {
        let mut delta = 0.0f64;
        for (xs, ys) in &orders {
            for &j in ys {
                for &i in xs {
                    let idx = spec.idx(i, j);
                    if !mask.inside_idx(idx) || source_nodes.contains(&idx) {
                        continue;
                    }
                    let read = |ii: isize, jj: isize| -> f64 {
                        if ii < 0 || jj < 0 || ii as usize >= spec.nx || jj as usize >= spec.ny {
                            return f64::INFINITY;
                        }
                        let q = spec.idx(ii as usize, jj as usize);
                        if mask.inside_idx(q) {
                            u[q]
                        } else {
                            f64::INFINITY
                        }
                    };
                    let cand = crate::eikonal::local_update(
                        read(i as isize - 1, j as isize),
                        read(i as isize + 1, j as isize),
                        read(i as isize, j as isize - 1),
                        read(i as isize, j as isize + 1),
                        speed.at(idx),
                        cost.at(idx),
                        spec.h,
                    );
                    if cand < u[idx] {
                        let change = if u[idx].is_finite() { u[idx] - cand } else { f64::INFINITY };
                        delta = delta.max(change);
                        u[idx] = cand;
                    }
                }
            }
        }
        if delta <= tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Config(format!(
            "sweeping failed to reach a {tol} fixed point in {MAX_CYCLES} cycles"
        )));
    }
    let u = ScalarField::from_values(spec, u)?;
    let seeded: Vec<usize> = seeds.iter().map(|&(idx, _)| idx).collect();
    let max_residual = stationary_residual(&u, speed, cost, mask, &source_nodes, &seeded);
    Ok(ValueSolution {
        u,
        sources: source_nodes,
        seeded,
        max_residual,
    })
}

/// Sweeping counterpart of the randomly-terminated solve in
/// [`crate::termination`]: same capped local update, iterated to a fixed point.
pub fn solve_random_termination_sweeping(
    q: &ScalarField,
    speed: &ScalarField,
    lambda: f64,
    mask: &DomainMask,
    cost: &ScalarField,
    tol: f64,
) -> Result<ScalarField> {
    if !(lambda > 0.0) {
        return Err(Error::invalid("lambda", format!("rate {lambda} must be positive")));
    }
    let spec = mask.spec();
    let mut u: Vec<f64> = (0..spec.len())
        .map(|idx| if mask.inside_idx(idx) { q.at(idx) } else { f64::INFINITY })
        .collect();
    let orders = sweep_orders(spec.nx, spec.ny);
    let mut converged = false;
    for _ in 0..MAX_CYCLES {
        let mut delta = 0.0f64;
        for (xs, ys) in &orders {
            for &j in ys {
                for &i in xs {
                    let idx = spec.idx(i, j);
                    if !mask.inside_idx(idx) {
                        continue;
                    }
                    let read = |ii: isize, jj: isize| -> f64 {
                        if ii < 0 || jj < 0 || ii as usize >= spec.nx || jj as usize >= spec.ny {
                            return f64::INFINITY;
                        }
                        let p = spec.idx(ii as usize, jj as usize);
                        if mask.inside_idx(p) {
                            u[p]
                        } else {
                            f64::INFINITY
                        }
                    };
                    let a = read(i as isize - 1, j as isize).min(read(i as isize + 1, j as isize));
                    let b = read(i as isize, j as isize - 1).min(read(i as isize, j as isize + 1));
                    let cand = crate::termination::capped_local_update(
                        a,
                        b,
                        q.at(idx),
                        speed.at(idx),
                        cost.at(idx),
                        lambda,
                        spec.h,
                    );
                    if cand < u[idx] {
                        delta = delta.max(u[idx] - cand);
                        u[idx] = cand;
                    }
                }
            }
        }
        if delta <= tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Config(format!(
            "capped sweeping failed to reach a {tol} fixed point in {MAX_CYCLES} cycles"
        )));
    }
    ScalarField::from_values(spec, u)
}
