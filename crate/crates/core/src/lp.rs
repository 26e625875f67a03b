//! Brute-force linear-programming references for the chance-constrained
//! waypoint problem.
//!
//! `single_constraint_optimum` enumerates every vertex of the feasible set of
//! the one-constraint LP (each single waypoint with risk below the bound, and
//! each pair straddling the bound with the interpolation that makes it
//! active). It is the independent check for the geometric hull construction.
//!
//! `multi_constraint_optimum` generalizes to several simultaneous risk
//! constraints by exhaustive support/basis enumeration. It is exponential in
//! the support size and intended for small candidate sets only; multi
//! constraint planning is experimental and is served exclusively by this
//! routine.

use crate::error::{Error, Result};

/// An optimal mixed strategy over candidate indices.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub objective: f64,
    /// `(candidate index, probability)` pairs, probabilities summing to 1.
    pub support: Vec<(usize, f64)>,
}

/// Exhaustive optimum of
/// `min sum theta_j q_j  s.t.  sum theta_j r_j <= eps, theta in simplex`.
///
/// Returns `None` when the instance is infeasible.
pub fn single_constraint_optimum(qs: &[f64], rs: &[f64], eps: f64) -> Option<LpSolution> {
    assert_eq!(qs.len(), rs.len());
    let mut best: Option<LpSolution> = None;
    let mut consider = |objective: f64, support: Vec<(usize, f64)>| match &best {
        Some(b) if b.objective <= objective => {}
        _ => {
            best = Some(LpSolution { objective, support });
        }
    };
    // single-waypoint vertices
    for j in 0..qs.len() {
        if rs[j] <= eps && qs[j].is_finite() {
            consider(qs[j], vec![(j, 1.0)]);
        }
    }
    // two-waypoint vertices straddling the bound with the constraint active
    let lo: Vec<usize> = (0..qs.len())
        .filter(|&j| rs[j] <= eps && qs[j].is_finite())
        .collect();
    let hi: Vec<usize> = (0..qs.len())
        .filter(|&j| rs[j] > eps && qs[j].is_finite())
        .collect();
    for &a in &lo {
        for &b in &hi {
            let t_hi = (eps - rs[a]) / (rs[b] - rs[a]);
            let t_lo = 1.0 - t_hi;
            consider(t_lo * qs[a] + t_hi * qs[b], vec![(a, t_lo), (b, t_hi)]);
        }
    }
    best
}

/// Exhaustive optimum with `kappa` risk constraints `R theta <= eps`
/// (`risks[k][j]` is constraint `k` at candidate `j`). Enumerates supports of
/// size at most `kappa + 1` with every subset of active constraints.
pub fn multi_constraint_optimum(
    qs: &[f64],
    risks: &[Vec<f64>],
    eps: &[f64],
) -> Result<Option<LpSolution>> {
    let kappa = risks.len();
    if kappa != eps.len() {
        return Err(Error::invalid("eps", "one bound per risk constraint required"));
    }
    for row in risks {
        if row.len() != qs.len() {
            return Err(Error::invalid("risks", "risk rows must match the candidate count"));
        }
    }
    if kappa == 0 {
        // plain minimum
        let best = (0..qs.len())
            .filter(|&j| qs[j].is_finite())
            .min_by(|&a, &b| qs[a].total_cmp(&qs[b]));
        return Ok(best.map(|j| LpSolution {
            objective: qs[j],
            support: vec![(j, 1.0)],
        }));
    }

    let n = qs.len();
    let max_support = kappa + 1;
    let mut best: Option<LpSolution> = None;

    let mut support = Vec::with_capacity(max_support);
    enumerate_supports(n, max_support, 0, &mut support, &mut |support| {
        try_support(qs, risks, eps, support, &mut best);
    });
    Ok(best)
}

fn enumerate_supports(
    n: usize,
    max_len: usize,
    start: usize,
    current: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]),
) {
    if !current.is_empty() {
        visit(current);
    }
    if current.len() == max_len {
        return;
    }
    for j in start..n {
        current.push(j);
        enumerate_supports(n, max_len, j + 1, current, visit);
        current.pop();
    }
}

fn try_support(
    qs: &[f64],
    risks: &[Vec<f64>],
    eps: &[f64],
    support: &[usize],
    best: &mut Option<LpSolution>,
) {
    if support.iter().any(|&j| !qs[j].is_finite()) {
        return;
    }
    let s = support.len();
    let kappa = risks.len();
    // a vertex with full support s binds s-1 of the risk constraints
    let mut binding = Vec::with_capacity(s.saturating_sub(1));
    enumerate_supports(kappa, s - 1, 0, &mut binding, &mut |active| {
        if active.len() != s - 1 {
            return;
        }
        let theta = match solve_vertex(risks, eps, support, active) {
            Some(t) => t,
            None => return,
        };
        if theta.iter().any(|&t| t < -1e-9) {
            return;
        }
        // feasibility of the non-binding constraints
        for k in 0..kappa {
            let val: f64 = support
                .iter()
                .zip(&theta)
                .map(|(&j, &t)| risks[k][j] * t)
                .sum();
            if val > eps[k] + 1e-9 {
                return;
            }
        }
        let objective: f64 = support.iter().zip(&theta).map(|(&j, &t)| qs[j] * t).sum();
        match best {
            Some(b) if b.objective <= objective => {}
            _ => {
                *best = Some(LpSolution {
                    objective,
                    support: support.iter().copied().zip(theta).collect(),
                });
            }
        }
    });
    // also the degenerate case: support of size 1 with no binding constraint
    if s == 1 {
        let j = support[0];
        if (0..kappa).all(|k| risks[k][j] <= eps[k] + 1e-12) {
            match best {
                Some(b) if b.objective <= qs[j] => {}
                _ => {
                    *best = Some(LpSolution {
                        objective: qs[j],
                        support: vec![(j, 1.0)],
                    });
                }
            }
        }
    }
}

/// Solve `sum theta = 1` plus the binding rows `sum theta_j risks[k][j] = eps[k]`
/// for `theta` over the support (square system via Gaussian elimination).
fn solve_vertex(
    risks: &[Vec<f64>],
    eps: &[f64],
    support: &[usize],
    active: &[usize],
) -> Option<Vec<f64>> {
    let s = support.len();
    let mut a = vec![vec![0.0f64; s + 1]; s];
    for (col, _) in support.iter().enumerate() {
        a[0][col] = 1.0;
    }
    a[0][s] = 1.0;
    for (row, &k) in active.iter().enumerate() {
        for (col, &j) in support.iter().enumerate() {
            a[row + 1][col] = risks[k][j];
        }
        a[row + 1][s] = eps[k];
    }
    gauss_solve(&mut a)
}

fn gauss_solve(a: &mut [Vec<f64>]) -> Option<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&r1, &r2| a[r1][col].abs().total_cmp(&a[r2][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        let p = a[col][col];
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = a[r][col] / p;
            for c in col..=n {
                a[r][c] -= factor * a[col][c];
            }
        }
    }
    Some((0..n).map(|r| a[r][n] / a[r][r]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_constraint_prefers_feasible_minimum() {
        let qs = [3.0, 1.0, 2.0];
        let rs = [0.1, 0.9, 0.2];
        // eps large enough for the global minimum
        let sol = single_constraint_optimum(&qs, &rs, 0.95).unwrap();
        assert_eq!(sol.support, vec![(1, 1.0)]);
        // eps forcing a mix of candidates 1 (cheap, risky) and 2
        let sol = single_constraint_optimum(&qs, &rs, 0.55).unwrap();
        assert_eq!(sol.support.len(), 2);
        let risk: f64 = sol
            .support
            .iter()
            .map(|&(j, t)| rs[j] * t)
            .sum();
        assert!((risk - 0.55).abs() < 1e-12);
        // infeasible
        assert!(single_constraint_optimum(&qs, &rs, 0.05).is_none());
    }

    #[test]
    fn multi_with_one_constraint_matches_single() {
        let qs = [3.0, 1.0, 2.0, 1.5];
        let rs = [0.1, 0.9, 0.2, 0.6];
        for eps in [0.15, 0.3, 0.55, 0.95] {
            let a = single_constraint_optimum(&qs, &rs, eps).unwrap();
            let b = multi_constraint_optimum(&qs, &[rs.to_vec()], &[eps])
                .unwrap()
                .unwrap();
            assert!((a.objective - b.objective).abs() < 1e-9, "eps {eps}");
        }
    }

    #[test]
    fn two_constraints_can_force_three_atoms() {
        // the free candidate 2 violates both constraints alone and every pair
        // containing it is infeasible, so the optimum mixes all three with
        // both constraints active: theta = (11/30, 11/30, 4/15)
        let qs = [1.0, 1.0, 0.0];
        let risks = vec![vec![1.0, 0.0, 2.0], vec![0.0, 1.0, 2.0]];
        let eps = [0.9, 0.9];
        let sol = multi_constraint_optimum(&qs, &risks, &eps).unwrap().unwrap();
        for k in 0..2 {
            let val: f64 = sol.support.iter().map(|&(j, t)| risks[k][j] * t).sum();
            assert!(val <= eps[k] + 1e-9);
        }
        assert_eq!(sol.support.len(), 3);
        assert!((sol.objective - 11.0 / 15.0).abs() < 1e-9);
    }
}
