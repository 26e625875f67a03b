//! Robustness criteria over a solved target ensemble: expected / worst /
//! risk-sensitive cost fields, hard-constrained waypoints, Pareto fronts,
//! chance-constrained mixed strategies via the lower-left convex hull,
//! distributionally robust planning over a total-variation ball, and the
//! target-coarsening error report.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::eikonal::{solve_stationary, ValueSolution};
use crate::error::{Error, Result};
use crate::grid::{DomainMask, Point, ScalarField};

/// Potential targets with their probabilities and solved min-cost fields.
#[derive(Debug, Clone)]
pub struct TargetEnsemble {
    pub targets: Vec<Point>,
    pub probs: Vec<f64>,
    pub value_fields: Vec<ScalarField>,
}

impl TargetEnsemble {
    pub fn new(targets: Vec<Point>, probs: Vec<f64>, value_fields: Vec<ScalarField>) -> Result<Self> {
        if targets.is_empty() || targets.len() != probs.len() || targets.len() != value_fields.len() {
            return Err(Error::invalid(
                "ensemble",
                "targets, probabilities and value fields must have equal, nonzero length",
            ));
        }
        validate_distribution(&probs)?;
        Ok(TargetEnsemble {
            targets,
            probs,
            value_fields,
        })
    }

    /// Solve the per-target fields (one stationary solve each, in parallel).
    pub fn solve(
        speed: &ScalarField,
        cost: &ScalarField,
        targets: &[Point],
        probs: &[f64],
        mask: &DomainMask,
    ) -> Result<Self> {
        let value_fields: Vec<ScalarField> = targets
            .par_iter()
            .map(|&t| solve_stationary(speed, cost, &[t], mask).map(|s| s.u))
            .collect::<Result<_>>()?;
        TargetEnsemble::new(targets.to_vec(), probs.to_vec(), value_fields)
    }

    /// Per-target solutions including residual bookkeeping.
    pub fn solve_with_residuals(
        speed: &ScalarField,
        cost: &ScalarField,
        targets: &[Point],
        probs: &[f64],
        mask: &DomainMask,
    ) -> Result<(Self, Vec<ValueSolution>)> {
        let sols: Vec<ValueSolution> = targets
            .par_iter()
            .map(|&t| solve_stationary(speed, cost, &[t], mask))
            .collect::<Result<_>>()?;
        let fields = sols.iter().map(|s| s.u.clone()).collect();
        let ens = TargetEnsemble::new(targets.to_vec(), probs.to_vec(), fields)?;
        Ok((ens, sols))
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    fn spec(&self) -> crate::grid::GridSpec {
        self.value_fields[0].spec()
    }
}

pub(crate) fn validate_distribution(probs: &[f64]) -> Result<()> {
    if probs.iter().any(|&p| !(p > 0.0)) {
        return Err(Error::invalid("probs", "probabilities must be strictly positive"));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(
            "probs",
            format!("probabilities sum to {total}, expected 1"),
        ));
    }
    Ok(())
}

/// Probability-weighted expected cost field; `+inf` wherever any target is
/// unreachable.
pub fn expected_field(ensemble: &TargetEnsemble) -> ScalarField {
    weighted_field(ensemble, &ensemble.probs)
}

fn weighted_field(ensemble: &TargetEnsemble, weights: &[f64]) -> ScalarField {
    let spec = ensemble.spec();
    let n = spec.len();
    let mut values = vec![0.0f64; n];
    for (w, field) in weights.iter().zip(&ensemble.value_fields) {
        for (acc, &v) in values.iter_mut().zip(field.values()) {
            *acc += w * v;
        }
    }
    ScalarField::from_values(spec, values).expect("weighted sum of finite/inf fields")
}

/// Pointwise worst case over the ensemble.
pub fn worst_field(ensemble: &TargetEnsemble) -> ScalarField {
    let spec = ensemble.spec();
    let mut values = vec![f64::NEG_INFINITY; spec.len()];
    for field in &ensemble.value_fields {
        for (acc, &v) in values.iter_mut().zip(field.values()) {
            *acc = acc.max(v);
        }
    }
    ScalarField::from_values(spec, values).expect("max of finite/inf fields")
}

/// Certainty-equivalent of the exponential-moment criterion:
/// `log(sum p_i exp(beta u_i)) / beta`, evaluated in shifted log-sum-exp form
/// so large `beta` cannot overflow.
pub fn risk_sensitive_field(ensemble: &TargetEnsemble, beta: f64) -> Result<ScalarField> {
    if !(beta > 0.0) {
        return Err(Error::invalid("beta", format!("risk sensitivity {beta} must be positive")));
    }
    let spec = ensemble.spec();
    let m = ensemble.len();
    let mut values = Vec::with_capacity(spec.len());
    for idx in 0..spec.len() {
        let mut umax = f64::NEG_INFINITY;
        for field in &ensemble.value_fields {
            umax = umax.max(field.at(idx));
        }
        if umax.is_infinite() {
            values.push(f64::INFINITY);
            continue;
        }
        let mut acc = 0.0;
        for i in 0..m {
            acc += ensemble.probs[i] * (beta * (ensemble.value_fields[i].at(idx) - umax)).exp();
        }
        values.push(umax + acc.ln() / beta);
    }
    ScalarField::from_values(spec, values)
}

/// Minimizing node of `field` over `mask`; ties break toward the lowest
/// linear index. Errors when the masked field is entirely `+inf`.
pub fn waypoint_argmin(field: &ScalarField, mask: &DomainMask) -> Result<(usize, Point)> {
    let idx = field
        .argmin_over(mask)
        .ok_or_else(|| Error::Infeasible("no finite field value on the mask".into()))?;
    Ok((idx, field.spec().node_at(idx)))
}

/// Minimize `q` subject to `qbar <= c` on the reachable set.
pub fn hard_constrained_waypoint(
    q: &ScalarField,
    qbar: &ScalarField,
    reachable: &DomainMask,
    c: f64,
) -> Result<(usize, Point)> {
    let spec = reachable.spec();
    let allowed: Vec<bool> = (0..spec.len())
        .map(|idx| reachable.inside_idx(idx) && qbar.at(idx) <= c)
        .collect();
    let restricted = DomainMask::from_inside(spec, allowed)
        .map_err(|_| Error::Infeasible(format!("no reachable node satisfies the bound {c}")))?;
    waypoint_argmin(q, &restricted)
        .map_err(|_| Error::Infeasible(format!("no finite expected cost under the bound {c}")))
}

/// A `(worst, avg)` trade-off point and the node that generates it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParetoEntry {
    pub worst: f64,
    pub avg: f64,
    pub node_idx: usize,
}

/// Non-dominated `(worst, avg)` pairs, sorted by worst ascending with
/// strictly decreasing avg.
#[derive(Debug, Clone)]
pub struct ParetoFront {
    pub entries: Vec<ParetoEntry>,
}

impl ParetoFront {
    /// Filter dominated pairs out of an arbitrary collection.
    pub fn from_entries(mut entries: Vec<ParetoEntry>) -> Self {
        entries.retain(|e| e.worst.is_finite() && e.avg.is_finite());
        entries.sort_by(|a, b| {
            a.worst
                .total_cmp(&b.worst)
                .then(a.avg.total_cmp(&b.avg))
                .then(a.node_idx.cmp(&b.node_idx))
        });
        let mut kept: Vec<ParetoEntry> = Vec::new();
        for e in entries {
            match kept.last() {
                Some(last) if e.avg >= last.avg => {} // dominated (worst is >=, avg no better)
                Some(last) if e.worst == last.worst => {
                    // same worst, strictly better avg: replace
                    let n = kept.len();
                    kept[n - 1] = e;
                }
                _ => kept.push(e),
            }
        }
        ParetoFront { entries: kept }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// True when `(worst, avg)` is weakly dominated by some front entry.
    pub fn dominates(&self, worst: f64, avg: f64) -> bool {
        self.entries
            .iter()
            .any(|e| e.worst <= worst + 1e-12 && e.avg <= avg + 1e-12)
    }

    /// CSV rows `worst,avg,i,j`.
    pub fn write_csv(&self, mut w: impl Write, spec: &crate::grid::GridSpec) -> Result<()> {
        writeln!(w, "worst,avg,i,j")?;
        for e in &self.entries {
            let (i, j) = spec.coords(e.node_idx);
            writeln!(w, "{},{},{},{}", e.worst, e.avg, i, j)?;
        }
        Ok(())
    }
}

/// `(qbar, q)` front over the reachable nodes.
pub fn pareto_front(q: &ScalarField, qbar: &ScalarField, reachable: &DomainMask) -> ParetoFront {
    let mut entries = Vec::new();
    for idx in 0..q.spec().len() {
        if !reachable.inside_idx(idx) {
            continue;
        }
        let (avg, worst) = (q.at(idx), qbar.at(idx));
        if avg.is_finite() && worst.is_finite() {
            entries.push(ParetoEntry {
                worst,
                avg,
                node_idx: idx,
            });
        }
    }
    ParetoFront::from_entries(entries)
}

/// Probability of missing the post-certainty bound `C` at each reachable
/// node: `r(x) = sum p_i [u_i(x) > C]`. Nodes outside the mask are `+inf`.
pub fn risk_field(ensemble: &TargetEnsemble, c: f64, reachable: &DomainMask) -> ScalarField {
    let spec = ensemble.spec();
    let mut values = vec![f64::INFINITY; spec.len()];
    for idx in 0..spec.len() {
        if !reachable.inside_idx(idx) {
            continue;
        }
        let mut r = 0.0;
        for i in 0..ensemble.len() {
            if ensemble.value_fields[i].at(idx) > c {
                r += ensemble.probs[i];
            }
        }
        values[idx] = r;
    }
    ScalarField::from_values(spec, values).expect("risk values are finite on the mask")
}

/// One waypoint of a mixed strategy.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PolicyAtom {
    pub x: f64,
    pub y: f64,
    #[serde(skip)]
    pub node_idx: usize,
    pub probability: f64,
}

/// A mixed waypoint strategy (at most two atoms for a single chance
/// constraint, by the LP vertex argument).
#[derive(Debug, Clone, Serialize)]
pub struct WaypointPolicy {
    pub atoms: Vec<PolicyAtom>,
    /// Expected post-certainty cost of the strategy.
    pub objective: f64,
    /// Expected risk of the strategy.
    pub risk: f64,
}

impl WaypointPolicy {
    pub fn write_json(&self, w: impl Write) -> Result<()> {
        serde_json::to_writer_pretty(w, self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// One vertex of the lower-left hull of the `(r, q)` cloud.
#[derive(Debug, Clone, Copy)]
pub struct HullVertex {
    pub r: f64,
    pub q: f64,
    pub node_idx: usize,
}

/// The "southwestern" boundary of the convex hull of `(r, q)` pairs:
/// vertices with increasing `r`, decreasing `q`, and strictly increasing
/// slopes, ending at the global `q` minimum.
#[derive(Debug, Clone)]
pub struct HullChain {
    pub vertices: Vec<HullVertex>,
}

impl HullChain {
    /// Build from per-node `(r, q)` values over the reachable set. Nodes are
    /// first reduced to per-risk-group `q` minima.
    pub fn build(ensemble: &TargetEnsemble, q: &ScalarField, c: f64, reachable: &DomainMask) -> Self {
        let spec = ensemble.spec();
        let m = ensemble.len();
        assert!(m <= 64, "group bitmask supports at most 64 targets");
        // group nodes by which targets violate the bound; keep min q per group
        let mut groups: HashMap<u64, (f64, usize)> = HashMap::new();
        for idx in 0..spec.len() {
            if !reachable.inside_idx(idx) || !q.at(idx).is_finite() {
                continue;
            }
            let mut mask_bits = 0u64;
            for i in 0..m {
                if ensemble.value_fields[i].at(idx) > c {
                    mask_bits |= 1 << i;
                }
            }
            let qv = q.at(idx);
            groups
                .entry(mask_bits)
                .and_modify(|(bq, bi)| {
                    if qv < *bq || (qv == *bq && idx < *bi) {
                        *bq = qv;
                        *bi = idx;
                    }
                })
                .or_insert((qv, idx));
        }
        // subset-sum risk per group, accumulated in ascending target order so
        // equal-probability groups produce identical floats
        let mut points: Vec<HullVertex> = groups
            .into_iter()
            .map(|(bits, (qv, idx))| {
                let mut r = 0.0;
                for i in 0..m {
                    if bits & (1 << i) != 0 {
                        r += ensemble.probs[i];
                    }
                }
                HullVertex {
                    r,
                    q: qv,
                    node_idx: idx,
                }
            })
            .collect();
        points.sort_by(|a, b| {
            a.r.total_cmp(&b.r)
                .then(a.q.total_cmp(&b.q))
                .then(a.node_idx.cmp(&b.node_idx))
        });
        // merge risk ties, keep the strictly-decreasing-q staircase
        let mut staircase: Vec<HullVertex> = Vec::new();
        for p in points {
            match staircase.last() {
                Some(last) if (p.r - last.r).abs() <= 1e-12 => {} // same group risk, worse or equal q
                Some(last) if p.q >= last.q => {}                 // dominated
                _ => staircase.push(p),
            }
        }
        // monotone-chain pass: drop vertices that break convexity
        let mut chain: Vec<HullVertex> = Vec::new();
        for p in staircase {
            while chain.len() >= 2 {
                let a = chain[chain.len() - 2];
                let b = chain[chain.len() - 1];
                let cross = (b.r - a.r) * (p.q - b.q) - (b.q - a.q) * (p.r - b.r);
                if cross <= 0.0 {
                    chain.pop();
                } else {
                    break;
                }
            }
            chain.push(p);
        }
        HullChain { vertices: chain }
    }

    /// Every `(r, q)` point in `cloud` must lie on or above the chain.
    pub fn covers(&self, r: f64, q: f64) -> bool {
        if self.vertices.is_empty() {
            return false;
        }
        let first = self.vertices[0];
        let last = *self.vertices.last().unwrap();
        if r < first.r - 1e-12 {
            return true; // left of the chain: no coverage claim
        }
        if r >= last.r {
            return q >= last.q - 1e-9;
        }
        let k = self.segment_left_of(r);
        let (a, b) = (self.vertices[k], self.vertices[k + 1]);
        let t = (r - a.r) / (b.r - a.r);
        q >= a.q + t * (b.q - a.q) - 1e-9
    }

    fn segment_left_of(&self, eps: f64) -> usize {
        // binary search: largest k with vertices[k].r <= eps
        let mut lo = 0usize;
        let mut hi = self.vertices.len() - 1;
        while lo + 1 < hi {
            let mid = (lo + hi) / 2;
            if self.vertices[mid].r <= eps {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }
}

/// Optimal mixed waypoint strategy under the chance constraint
/// `E[risk] <= epsilon`, via the hull chain.
pub fn chance_constrained_policy(
    ensemble: &TargetEnsemble,
    q: &ScalarField,
    c: f64,
    epsilon: f64,
    reachable: &DomainMask,
) -> Result<WaypointPolicy> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::invalid("epsilon", format!("risk bound {epsilon} must lie in [0, 1]")));
    }
    let chain = HullChain::build(ensemble, q, c, reachable);
    let spec = ensemble.spec();
    let verts = &chain.vertices;
    if verts.is_empty() {
        return Err(Error::Infeasible("no reachable waypoint candidates".into()));
    }
    let first = verts[0];
    let last = *verts.last().unwrap();
    if epsilon < first.r - 1e-12 {
        return Err(Error::Infeasible(format!(
            "risk bound {epsilon} below the attainable minimum {}",
            first.r
        )));
    }
    let single = |v: HullVertex| -> WaypointPolicy {
        let p = spec.node_at(v.node_idx);
        WaypointPolicy {
            atoms: vec![PolicyAtom {
                x: p.x,
                y: p.y,
                node_idx: v.node_idx,
                probability: 1.0,
            }],
            objective: v.q,
            risk: v.r,
        }
    };
    if epsilon >= last.r {
        // constraint does not bind: deterministic unconstrained optimum
        return Ok(single(last));
    }
    let k = chain.segment_left_of(epsilon);
    let (a, b) = (verts[k], verts[k + 1]);
    if (epsilon - a.r).abs() <= 1e-12 {
        return Ok(single(a)); // exactly at a vertex
    }
    let theta_hi = (epsilon - a.r) / (b.r - a.r);
    let theta_lo = 1.0 - theta_hi;
    let pa = spec.node_at(a.node_idx);
    let pb = spec.node_at(b.node_idx);
    Ok(WaypointPolicy {
        atoms: vec![
            PolicyAtom {
                x: pa.x,
                y: pa.y,
                node_idx: a.node_idx,
                probability: theta_lo,
            },
            PolicyAtom {
                x: pb.x,
                y: pb.y,
                node_idx: b.node_idx,
                probability: theta_hi,
            },
        ],
        objective: theta_lo * a.q + theta_hi * b.q,
        risk: epsilon,
    })
}

/// Total variation distance between two distributions of equal length:
/// `1 - sum min(p_i, p'_i) = 0.5 * |p - p'|_1`.
pub fn tv_distance(p: &[f64], p2: &[f64]) -> Result<f64> {
    if p.len() != p2.len() {
        return Err(Error::invalid("distributions", "length mismatch"));
    }
    Ok(0.5 * p.iter().zip(p2).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Worst distribution in the total-variation ball of radius `delta` for
/// costs sorted ascending: shift as much mass as allowed onto the hardest
/// target, removing it from the easiest ones first. `ascending` lists the
/// target indices from easiest to hardest.
pub fn dr_worst_distribution(probs: &[f64], ascending: &[usize], delta: f64) -> Vec<f64> {
    debug_assert_eq!(probs.len(), ascending.len());
    debug_assert!(delta >= 0.0);
    let mut out = probs.to_vec();
    if probs.len() <= 1 {
        return out;
    }
    let hardest = *ascending.last().unwrap();
    let add = delta.min(1.0 - probs[hardest]).max(0.0);
    out[hardest] += add;
    let mut remaining = add;
    for &i in &ascending[..ascending.len() - 1] {
        if remaining <= 0.0 {
            break;
        }
        let take = out[i].min(remaining);
        out[i] -= take;
        remaining -= take;
    }
    out
}

fn ascending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order
}

/// Distributionally robust cost field: at each node, the worst expected cost
/// over the total-variation ball of radius `delta` around the nominal
/// probabilities.
pub fn dr_field(ensemble: &TargetEnsemble, delta: f64) -> Result<ScalarField> {
    if !(delta >= 0.0) {
        return Err(Error::invalid("delta", format!("ball radius {delta} must be nonnegative")));
    }
    let spec = ensemble.spec();
    let m = ensemble.len();
    let mut values = Vec::with_capacity(spec.len());
    let mut u = vec![0.0f64; m];
    for idx in 0..spec.len() {
        let mut any_inf = false;
        for i in 0..m {
            u[i] = ensemble.value_fields[i].at(idx);
            any_inf |= u[i].is_infinite();
        }
        if any_inf {
            values.push(f64::INFINITY);
            continue;
        }
        let order = ascending_order(&u);
        let shifted = dr_worst_distribution(&ensemble.probs, &order, delta);
        values.push(shifted.iter().zip(&u).map(|(p, v)| p * v).sum());
    }
    ScalarField::from_values(spec, values)
}

/// A fine target with its probability mass and assigned coarse cell.
#[derive(Debug, Clone, Copy)]
pub struct FineTarget {
    pub point: Point,
    pub weight: f64,
    pub cell: usize,
}

/// Result of comparing the coarsened plan against the fine target cloud.
#[derive(Debug, Clone, Serialize)]
pub struct CoarseningReport {
    /// `max |xi - q|` over the window.
    pub max_field_gap: f64,
    pub field_gap_bound: f64,
    /// `xi(coarse waypoint) - xi(fine waypoint)`.
    pub suboptimality: f64,
    pub suboptimality_bound: f64,
    pub field_within_bound: bool,
    pub suboptimality_within_bound: bool,
}

/// Compare planning against the coarse ensemble with planning against the
/// full weighted target cloud it approximates.
///
/// Each fine target must be assigned to a coarse cell whose representative is
/// reachable within path length `h_coarse` inside the cell; `f_l` is a lower
/// bound on the speed. The fine expected field is
/// `xi(x) = sum_k w_k u(x; y_k)`.
#[allow(clippy::too_many_arguments)]
pub fn coarsening_check(
    speed: &ScalarField,
    cost: &ScalarField,
    mask: &DomainMask,
    fine: &[FineTarget],
    coarse: &TargetEnsemble,
    f_l: f64,
    h_coarse: f64,
    window: &DomainMask,
) -> Result<CoarseningReport> {
    if !(f_l > 0.0) {
        return Err(Error::invalid("f_l", "speed lower bound must be positive"));
    }
    if fine.is_empty() {
        return Err(Error::invalid("fine", "empty fine target cloud"));
    }
    let m = coarse.len();
    let mut cell_mass = vec![0.0f64; m];
    for (k, t) in fine.iter().enumerate() {
        if t.cell >= m {
            return Err(Error::invalid(
                "fine",
                format!("fine target {k} assigned to nonexistent cell {}", t.cell),
            ));
        }
        cell_mass[t.cell] += t.weight;
    }
    for (i, (&mass, &p)) in cell_mass.iter().zip(&coarse.probs).enumerate() {
        if (mass - p).abs() > 1e-9 {
            return Err(Error::invalid(
                "fine",
                format!("cell {i} carries mass {mass} but the coarse probability is {p}"),
            ));
        }
    }

    let spec = mask.spec();
    let fine_fields: Vec<ScalarField> = fine
        .par_iter()
        .map(|t| solve_stationary(speed, cost, &[t.point], mask).map(|s| s.u))
        .collect::<Result<_>>()?;
    let mut xi_vals = vec![0.0f64; spec.len()];
    for (t, field) in fine.iter().zip(&fine_fields) {
        for (acc, &v) in xi_vals.iter_mut().zip(field.values()) {
            *acc += t.weight * v;
        }
    }
    let xi = ScalarField::from_values(spec, xi_vals)?;
    let q = expected_field(coarse);

    let mut max_field_gap = 0.0f64;
    for idx in 0..spec.len() {
        if !window.inside_idx(idx) {
            continue;
        }
        let (a, b) = (xi.at(idx), q.at(idx));
        if a.is_finite() && b.is_finite() {
            max_field_gap = max_field_gap.max((a - b).abs());
        }
    }

    let (coarse_idx, _) = waypoint_argmin(&q, window)?;
    let (fine_idx, _) = waypoint_argmin(&xi, window)?;
    let suboptimality = xi.at(coarse_idx) - xi.at(fine_idx);

    let slack = 4.0 * spec.h;
    let field_gap_bound = h_coarse / f_l + slack;
    let suboptimality_bound = 2.0 * h_coarse / f_l + slack;
    Ok(CoarseningReport {
        max_field_gap,
        field_gap_bound,
        suboptimality,
        suboptimality_bound,
        field_within_bound: max_field_gap <= field_gap_bound,
        suboptimality_within_bound: suboptimality <= suboptimality_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use proptest::prelude::*;

    fn tiny_ensemble() -> TargetEnsemble {
        let spec = GridSpec::unit_square(41).unwrap();
        let f = ScalarField::constant(spec, 1.0);
        let k = ScalarField::constant(spec, 1.0);
        let mask = DomainMask::all(spec);
        let targets = [
            Point::new(0.1, 0.1),
            Point::new(0.9, 0.2),
            Point::new(0.5, 0.9),
        ];
        TargetEnsemble::solve(&f, &k, &targets, &[0.5, 0.3, 0.2], &mask).unwrap()
    }

    #[test]
    fn ensemble_rejects_bad_probabilities() {
        let spec = GridSpec::unit_square(5).unwrap();
        let field = ScalarField::constant(spec, 1.0);
        assert!(TargetEnsemble::new(vec![Point::new(0.0, 0.0)], vec![0.9], vec![field.clone()]).is_err());
        assert!(TargetEnsemble::new(
            vec![Point::new(0.0, 0.0), Point::new(1.0, 1.0)],
            vec![1.0, 0.0],
            vec![field.clone(), field.clone()]
        )
        .is_err());
        assert!(TargetEnsemble::new(vec![], vec![], vec![]).is_err());
    }

    #[test]
    fn single_target_collapses_everything() {
        let spec = GridSpec::unit_square(21).unwrap();
        let f = ScalarField::constant(spec, 1.0);
        let k = ScalarField::constant(spec, 1.0);
        let mask = DomainMask::all(spec);
        let ens = TargetEnsemble::solve(&f, &k, &[Point::new(0.3, 0.7)], &[1.0], &mask).unwrap();
        let q = expected_field(&ens);
        let qbar = worst_field(&ens);
        assert_eq!(q.values(), ens.value_fields[0].values());
        assert_eq!(qbar.values(), q.values());
        let front = pareto_front(&q, &qbar, &mask);
        assert_eq!(front.entries.len(), 1);
        let (idx, _) = waypoint_argmin(&q, &mask).unwrap();
        assert_eq!(front.entries[0].node_idx, idx);
    }

    #[test]
    fn identical_fields_make_probabilities_irrelevant() {
        let spec = GridSpec::unit_square(9).unwrap();
        let u = ScalarField::from_fn(spec, |p| p.x + 2.0 * p.y).unwrap();
        let ens = TargetEnsemble::new(
            vec![Point::new(0.0, 0.0), Point::new(0.0, 0.0)],
            vec![0.3, 0.7],
            vec![u.clone(), u.clone()],
        )
        .unwrap();
        let q = expected_field(&ens);
        for idx in 0..spec.len() {
            assert!((q.at(idx) - u.at(idx)).abs() < 1e-12);
        }
    }

    #[test]
    fn worst_dominates_expected() {
        let ens = tiny_ensemble();
        let q = expected_field(&ens);
        let qbar = worst_field(&ens);
        for idx in 0..q.spec().len() {
            assert!(qbar.at(idx) >= q.at(idx) - 1e-12);
        }
    }

    #[test]
    fn certainty_equivalent_sits_between_mean_and_worst() {
        let ens = tiny_ensemble();
        let q = expected_field(&ens);
        let qbar = worst_field(&ens);
        for beta in [0.1, 1.0, 10.0, 100.0] {
            let ce = risk_sensitive_field(&ens, beta).unwrap();
            for idx in 0..q.spec().len() {
                assert!(ce.at(idx) >= q.at(idx) - 1e-9, "beta {beta} below mean");
                assert!(ce.at(idx) <= qbar.at(idx) + 1e-9, "beta {beta} above worst");
            }
        }
    }

    #[test]
    fn tiny_beta_recovers_the_mean() {
        let ens = tiny_ensemble();
        let q = expected_field(&ens);
        let ce = risk_sensitive_field(&ens, 1e-6).unwrap();
        for idx in 0..q.spec().len() {
            assert!((ce.at(idx) - q.at(idx)).abs() < 1e-4);
        }
    }

    #[test]
    fn risk_sensitive_argmin_is_shift_equivariant() {
        let ens = tiny_ensemble();
        let mask = DomainMask::all(ens.spec());
        let shifted = TargetEnsemble::new(
            ens.targets.clone(),
            ens.probs.clone(),
            ens.value_fields.iter().map(|f| f.map(|v| v + 1.7)).collect(),
        )
        .unwrap();
        for beta in [0.5, 5.0] {
            let a = waypoint_argmin(&risk_sensitive_field(&ens, beta).unwrap(), &mask).unwrap();
            let b = waypoint_argmin(&risk_sensitive_field(&shifted, beta).unwrap(), &mask).unwrap();
            assert_eq!(a.0, b.0);
        }
    }

    #[test]
    fn waypoint_argmin_tie_breaks_low_index_and_rejects_all_inf() {
        let spec = GridSpec::unit_square(5).unwrap();
        let mask = DomainMask::all(spec);
        let flat = ScalarField::constant(spec, 3.0);
        assert_eq!(waypoint_argmin(&flat, &mask).unwrap().0, 0);
        let inf = ScalarField::constant(spec, f64::INFINITY);
        assert!(waypoint_argmin(&inf, &mask).is_err());
        let mut vals = vec![f64::INFINITY; spec.len()];
        vals[7] = 1.0;
        let single = ScalarField::from_values(spec, vals).unwrap();
        assert_eq!(waypoint_argmin(&single, &mask).unwrap().0, 7);
    }

    #[test]
    fn hard_constraint_vacuous_and_infeasible_cases() {
        let ens = tiny_ensemble();
        let q = expected_field(&ens);
        let qbar = worst_field(&ens);
        let mask = DomainMask::all(ens.spec());
        let unconstrained = waypoint_argmin(&q, &mask).unwrap();
        let vacuous = hard_constrained_waypoint(&q, &qbar, &mask, f64::INFINITY).unwrap();
        assert_eq!(unconstrained.0, vacuous.0);
        let too_tight = qbar.min_over(&mask) - 0.1;
        assert!(hard_constrained_waypoint(&q, &qbar, &mask, too_tight).is_err());
    }

    #[test]
    fn front_entries_are_mutually_non_dominating() {
        let ens = tiny_ensemble();
        let q = expected_field(&ens);
        let qbar = worst_field(&ens);
        let mask = DomainMask::all(ens.spec());
        let front = pareto_front(&q, &qbar, &mask);
        assert!(!front.is_empty());
        for w in front.entries.windows(2) {
            assert!(w[1].worst > w[0].worst);
            assert!(w[1].avg < w[0].avg);
        }
        // every reachable pair is weakly dominated by the front
        for idx in 0..q.spec().len() {
            if q.at(idx).is_finite() {
                assert!(front.dominates(qbar.at(idx), q.at(idx)));
            }
        }
    }

    #[test]
    fn decreasing_hard_constraints_walk_the_front() {
        let ens = tiny_ensemble();
        let q = expected_field(&ens);
        let qbar = worst_field(&ens);
        let mask = DomainMask::all(ens.spec());
        let front = pareto_front(&q, &qbar, &mask);
        for e in &front.entries {
            let (idx, _) = hard_constrained_waypoint(&q, &qbar, &mask, e.worst).unwrap();
            assert_eq!(idx, e.node_idx, "C = {} picks a different node", e.worst);
        }
    }

    #[test]
    fn risk_field_extremes() {
        let ens = tiny_ensemble();
        let mask = DomainMask::all(ens.spec());
        let huge = risk_field(&ens, 1e9, &mask);
        let none = risk_field(&ens, -1.0, &mask);
        for idx in 0..ens.spec().len() {
            assert_eq!(huge.at(idx), 0.0);
            assert_eq!(none.at(idx), 1.0);
        }
    }

    #[test]
    fn risk_field_values_are_subset_sums() {
        let ens = tiny_ensemble();
        let mask = DomainMask::all(ens.spec());
        let r = risk_field(&ens, 0.45, &mask);
        let mut sums = Vec::new();
        for bits in 0u32..(1 << ens.len()) {
            let mut s = 0.0;
            for i in 0..ens.len() {
                if bits & (1 << i) != 0 {
                    s += ens.probs[i];
                }
            }
            sums.push(s);
        }
        let mut distinct: Vec<f64> = Vec::new();
        for &v in r.values() {
            if v.is_finite() && !distinct.iter().any(|&d| d == v) {
                distinct.push(v);
            }
        }
        assert!(distinct.len() <= 1 << ens.len());
        for v in distinct {
            assert!(
                sums.iter().any(|&s| (s - v).abs() < 1e-12),
                "risk value {v} is not a subset sum"
            );
        }
    }

    #[test]
    fn tv_distance_examples() {
        assert_eq!(tv_distance(&[0.2, 0.8], &[0.2, 0.8]).unwrap(), 0.0);
        assert_eq!(tv_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert!((tv_distance(&[0.2, 0.8], &[0.5, 0.5]).unwrap() - 0.3).abs() < 1e-15);
        assert!(tv_distance(&[0.5, 0.5], &[1.0]).is_err());
    }

    #[test]
    fn dr_distribution_limits() {
        let probs = [0.2, 0.3, 0.2, 0.3];
        let order = [0usize, 1, 2, 3];
        assert_eq!(dr_worst_distribution(&probs, &order, 0.0), probs.to_vec());
        // enough budget for a point mass on the hardest target
        let extreme = dr_worst_distribution(&probs, &order, 0.8);
        for (got, want) in extreme.iter().zip([0.0, 0.0, 0.0, 1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        let partial = dr_worst_distribution(&probs, &order, 0.25);
        assert!((tv_distance(&probs, &partial).unwrap() - 0.25).abs() < 1e-12);
        let total: f64 = partial.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dr_field_is_bracketed_and_bounded() {
        let ens = tiny_ensemble();
        let q = expected_field(&ens);
        let qbar = worst_field(&ens);
        for delta in [0.05, 0.3] {
            let dr = dr_field(&ens, delta).unwrap();
            for idx in 0..q.spec().len() {
                assert!(dr.at(idx) >= q.at(idx) - 1e-12);
                assert!(dr.at(idx) <= qbar.at(idx) + 1e-12);
                // loss bound via the value spread at the node
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for f in &ens.value_fields {
                    lo = lo.min(f.at(idx));
                    hi = hi.max(f.at(idx));
                }
                assert!(dr.at(idx) <= q.at(idx) + delta * (hi - lo) + 1e-12);
            }
        }
    }

    #[test]
    fn chance_policy_unconstrained_when_epsilon_is_one() {
        let ens = tiny_ensemble();
        let q = expected_field(&ens);
        let mask = DomainMask::all(ens.spec());
        let policy = chance_constrained_policy(&ens, &q, 0.2, 1.0, &mask).unwrap();
        assert_eq!(policy.atoms.len(), 1);
        let (idx, _) = waypoint_argmin(&q, &mask).unwrap();
        assert_eq!(policy.atoms[0].node_idx, idx);
        assert!(chance_constrained_policy(&ens, &q, 0.2, 1.5, &mask).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn dr_distribution_stays_in_the_ball(
            raw in proptest::collection::vec(0.05f64..1.0, 2..5),
            delta in 0.0f64..1.2,
        ) {
            let total: f64 = raw.iter().sum();
            let probs: Vec<f64> = raw.iter().map(|p| p / total).collect();
            let u: Vec<f64> = (0..probs.len()).map(|i| (i as f64 * 1.3).sin() + 2.0).collect();
            let order = ascending_order(&u);
            let shifted = dr_worst_distribution(&probs, &order, delta);
            let sum: f64 = shifted.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            prop_assert!(shifted.iter().all(|&p| p >= -1e-12));
            prop_assert!(tv_distance(&probs, &shifted).unwrap() <= delta + 1e-9);
        }

        #[test]
        fn hull_chain_is_convex_and_covers_the_cloud(
            qs in proptest::collection::vec(0.0f64..2.0, 8..40),
            seed in 0u64..500,
        ) {
            // synthetic 1-target-free instance: craft r values from a fake
            // 3-probability split and arbitrary q values
            let spec = GridSpec::new(qs.len(), 2, Point::new(0.0, 0.0), 1.0).unwrap();
            let mask = DomainMask::all(spec);
            let probs = [0.5, 0.3, 0.2];
            let mut fields = Vec::new();
            for t in 0..3 {
                let vals: Vec<f64> = (0..spec.len())
                    .map(|idx| {
                        let z = ((idx as u64).wrapping_mul(6364136223846793005).wrapping_add(seed + t as u64)
                            >> 33) as f64 / (u32::MAX as f64 / 2.0);
                        z
                    })
                    .collect();
                fields.push(ScalarField::from_values(spec, vals).unwrap());
            }
            let targets = vec![Point::new(0.0, 0.0); 3];
            let ens = TargetEnsemble::new(targets, probs.to_vec(), fields).unwrap();
            let mut qvals = qs.clone();
            qvals.extend(qs.iter().rev());
            qvals.truncate(spec.len());
            while qvals.len() < spec.len() { qvals.push(1.0); }
            let q = ScalarField::from_values(spec, qvals).unwrap();
            let c = 0.5;
            let chain = HullChain::build(&ens, &q, c, &mask);
            prop_assert!(!chain.vertices.is_empty());
            // r ascending, q descending, slopes increasing
            for w in chain.vertices.windows(2) {
                prop_assert!(w[1].r > w[0].r);
                prop_assert!(w[1].q < w[0].q);
            }
            for w in chain.vertices.windows(3) {
                let s1 = (w[1].q - w[0].q) / (w[1].r - w[0].r);
                let s2 = (w[2].q - w[1].q) / (w[2].r - w[1].r);
                prop_assert!(s2 > s1 - 1e-12);
            }
            // chain covers every node's (r, q) pair
            let r = risk_field(&ens, c, &mask);
            for idx in 0..spec.len() {
                prop_assert!(chain.covers(r.at(idx), q.at(idx)));
            }
        }
    }
}
