//! Explicit backward time marching for the time-dependent planning equation,
//! plus the fixed-horizon and staged (discretely distributed certainty time)
//! planners built on top of it.
//!
//! The marcher steps `U^{n-1} = U^n - dt * (f |grad U^n| - K)` with the upwind
//! gradient, holding excluded nodes at `+inf`. The step size obeys
//! `dt = 0.4 h / max f`, which keeps the update monotone in the stencil
//! values (worst case is the diagonal, hence the margin).

use serde::{Deserialize, Serialize};

use crate::eikonal::{reachable_set, solve_stationary, trace_trajectory, Trajectory, ValueSolution};
use crate::error::{Error, Result};
use crate::grid::{DomainMask, GridSpec, Point, ScalarField};

const CFL_FACTOR: f64 = 0.4;

/// How the certainty time is distributed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CertaintyTimeModel {
    Fixed { t: f64 },
    Discrete { times: Vec<f64>, probs: Vec<f64> },
    Exponential { rate: f64 },
}

impl CertaintyTimeModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            CertaintyTimeModel::Fixed { t } => {
                if !(*t > 0.0) {
                    return Err(Error::invalid("T", format!("horizon {t} must be positive")));
                }
            }
            CertaintyTimeModel::Discrete { times, probs } => {
                validate_discrete(times, probs)?;
            }
            CertaintyTimeModel::Exponential { rate } => {
                if !(*rate > 0.0) {
                    return Err(Error::invalid("lambda", format!("rate {rate} must be positive")));
                }
            }
        }
        Ok(())
    }
}

pub fn validate_discrete(times: &[f64], probs: &[f64]) -> Result<()> {
    if times.is_empty() || times.len() != probs.len() {
        return Err(Error::invalid(
            "times/probs",
            "need matching, non-empty time and probability lists",
        ));
    }
    let mut prev = 0.0;
    for &t in times {
        if !(t > prev) {
            return Err(Error::invalid(
                "times",
                "times must be strictly increasing and positive",
            ));
        }
        prev = t;
    }
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

/// Value slices at descending time levels; the first slice is the terminal
/// condition, bit for bit.
#[derive(Debug, Clone)]
pub struct TimeSlicedValue {
    pub spec: GridSpec,
    pub times: Vec<f64>,
    pub slices: Vec<ScalarField>,
}

impl TimeSlicedValue {
    /// Slice at the earliest time level (the marched end state).
    pub fn final_slice(&self) -> &ScalarField {
        self.slices.last().expect("at least the terminal slice")
    }

    pub fn terminal_slice(&self) -> &ScalarField {
        &self.slices[0]
    }
}

/// March the terminal condition backward from `t_end` to `t_start`.
///
/// Nodes outside the mask or with a `+inf` terminal value are held at `+inf`.
pub fn march_backward(
    terminal: &ScalarField,
    speed: &ScalarField,
    cost: &ScalarField,
    t_end: f64,
    t_start: f64,
    mask: &DomainMask,
) -> Result<TimeSlicedValue> {
    let spec = terminal.spec();
    assert_eq!(speed.spec(), spec, "speed field on a different grid");
    assert_eq!(cost.spec(), spec, "cost field on a different grid");
    assert_eq!(mask.spec(), spec, "mask on a different grid");
    if !(t_start < t_end) {
        return Err(Error::invalid(
            "t_start",
            format!("need t_start < t_end, got [{t_start}, {t_end}]"),
        ));
    }

    let active: Vec<bool> = (0..spec.len())
        .map(|idx| mask.inside_idx(idx) && terminal.at(idx).is_finite())
        .collect();
    let max_f = (0..spec.len())
        .filter(|&idx| active[idx])
        .map(|idx| speed.at(idx))
        .fold(0.0f64, f64::max);
    if !(max_f > 0.0) {
        return Err(Error::invalid("terminal", "no active nodes to march"));
    }
    let span = t_end - t_start;
    let dt_max = CFL_FACTOR * spec.h / max_f;
    let n_steps = (span / dt_max).ceil().max(1.0) as usize;
    let dt = span / n_steps as f64;
    debug_assert!(dt <= dt_max * (1.0 + 1e-12), "stability bound violated");

    let mut times = Vec::with_capacity(n_steps + 1);
    let mut slices = Vec::with_capacity(n_steps + 1);
    times.push(t_end);
    let held = terminal.masked(mask);
    slices.push(held.clone());
    let mut current = held;
    for step in 1..=n_steps {
        let mut next = current.clone();
        {
            let out = next.values_mut();
            for j in 0..spec.ny {
                for i in 0..spec.nx {
                    let idx = spec.idx(i, j);
                    if !active[idx] {
                        continue;
                    }
                    let g = current
                        .upwind_gradient_magnitude(i, j)
                        .expect("node in range");
                    out[idx] = current.at(idx) - dt * (speed.at(idx) * g - cost.at(idx));
                }
            }
        }
        times.push(t_end - dt * step as f64);
        slices.push(next.clone());
        current = next;
    }
    // land exactly on t_start
    *times.last_mut().unwrap() = t_start;
    Ok(TimeSlicedValue { spec, times, slices })
}

/// Result of a fixed-certainty-time plan.
#[derive(Debug, Clone)]
pub struct FixedPlan {
    pub waypoint: Point,
    pub waypoint_idx: usize,
    /// `T + q(waypoint)`: time spent until certainty plus expected remaining cost.
    pub expected_total: f64,
}

/// Waypoint for a fixed certainty time `t`: the minimizer of `q` over the
/// reachable set of `u_from_start` (which must be a unit-cost solve from the
/// starting position).
pub fn plan_fixed_horizon(
    q: &ScalarField,
    u_from_start: &ValueSolution,
    t: f64,
) -> Result<FixedPlan> {
    let reachable = reachable_set(u_from_start, t)?;
    let idx = q
        .argmin_over(&reachable)
        .ok_or_else(|| Error::Infeasible("no finite expected cost on the reachable set".into()))?;
    Ok(FixedPlan {
        waypoint: q.spec().node_at(idx),
        waypoint_idx: idx,
        expected_total: t + q.at(idx),
    })
}

/// One stage of a staged certainty-time chain: at `end_time` the target is
/// revealed with probability `reveal_weight` (conditioned on reaching this
/// stage), in which case the remaining cost is `reveal_field`; otherwise the
/// chain continues into the next stage.
#[derive(Debug, Clone)]
pub struct Stage {
    pub end_time: f64,
    pub reveal_weight: f64,
    pub reveal_field: ScalarField,
}

/// A solved staged plan.
#[derive(Debug, Clone)]
pub struct StagedPlan {
    /// Marched value functions, stage `j` covering `[t_{j-1}, t_j]`.
    pub stages: Vec<TimeSlicedValue>,
    /// Blended terminal conditions at each stage end.
    pub terminals: Vec<ScalarField>,
    /// Waypoint to occupy at each stage end if the target is still unknown.
    pub waypoints: Vec<Point>,
    pub waypoint_idxs: Vec<usize>,
    /// Time-optimal legs between consecutive waypoints.
    pub trajectories: Vec<Trajectory>,
    /// Expected total cost from the starting position.
    pub value_at_start: f64,
}

/// Plan against a discretely distributed certainty time with remaining cost
/// `q` at revelation; unit running cost.
pub fn plan_discrete_horizons(
    q: &ScalarField,
    speed: &ScalarField,
    mask: &DomainMask,
    start: Point,
    times: &[f64],
    probs: &[f64],
) -> Result<StagedPlan> {
    validate_discrete(times, probs)?;
    let mut stages = Vec::with_capacity(times.len());
    for (j, &t) in times.iter().enumerate() {
        let tail: f64 = probs[j..].iter().sum();
        stages.push(Stage {
            end_time: t,
            reveal_weight: probs[j] / tail,
            reveal_field: q.clone(),
        });
    }
    plan_stage_chain(&stages, speed, mask, start)
}

fn blend(a: &ScalarField, wa: f64, b: &ScalarField, wb: f64) -> ScalarField {
    a.zip_with(b, |x, y| {
        if x.is_infinite() || y.is_infinite() {
            f64::INFINITY
        } else {
            wa * x + wb * y
        }
    })
}

/// Plan a general stage chain (per-stage reveal fields and weights), unit
/// running cost. The final stage must have `reveal_weight = 1`.
pub fn plan_stage_chain(
    chain: &[Stage],
    speed: &ScalarField,
    mask: &DomainMask,
    start: Point,
) -> Result<StagedPlan> {
    if chain.is_empty() {
        return Err(Error::invalid("stages", "empty stage chain"));
    }
    let r = chain.len();
    let mut prev = 0.0;
    for stage in chain {
        if !(stage.end_time > prev) {
            return Err(Error::invalid("stages", "stage end times must increase"));
        }
        if !(stage.reveal_weight > 0.0 && stage.reveal_weight <= 1.0) {
            return Err(Error::invalid("stages", "reveal weights must lie in (0, 1]"));
        }
        prev = stage.end_time;
    }
    if (chain[r - 1].reveal_weight - 1.0).abs() > 1e-12 {
        return Err(Error::invalid("stages", "final stage must reveal with certainty"));
    }

    let spec = speed.spec();
    let unit_cost = ScalarField::constant(spec, 1.0);

    // Build blended terminal conditions from the last stage backward. Each
    // stage's marched start slice feeds the previous stage's terminal.
    let mut terminals: Vec<Option<ScalarField>> = vec![None; r];
    let mut marched: Vec<Option<TimeSlicedValue>> = vec![None; r];
    terminals[r - 1] = Some(chain[r - 1].reveal_field.clone());
    for j in (0..r - 1).rev() {
        let t_hi = chain[j + 1].end_time;
        let t_lo = chain[j].end_time;
        let sliced = march_backward(
            terminals[j + 1].as_ref().unwrap(),
            speed,
            &unit_cost,
            t_hi,
            t_lo,
            mask,
        )?;
        let w = chain[j].reveal_weight;
        terminals[j] = Some(blend(&chain[j].reveal_field, w, sliced.final_slice(), 1.0 - w));
        marched[j + 1] = Some(sliced);
    }
    let first = march_backward(
        terminals[0].as_ref().unwrap(),
        speed,
        &unit_cost,
        chain[0].end_time,
        0.0,
        mask,
    )?;
    marched[0] = Some(first);

    // Waypoints by successive constrained minimization: because the running
    // cost is 1, the cost of a stage is its duration and only the position at
    // the stage end matters, valued by the blended terminal.
    let mut waypoints = Vec::with_capacity(r);
    let mut waypoint_idxs = Vec::with_capacity(r);
    let mut trajectories = Vec::with_capacity(r);
    let mut value_at_start = None;
    let mut here = start;
    let mut prev_end = 0.0;
    for j in 0..r {
        let horizon = chain[j].end_time - prev_end;
        let u_here = solve_stationary(speed, &unit_cost, &[here], mask)?;
        let terminal = terminals[j].as_ref().unwrap();
        let reachable = reachable_set(&u_here, horizon)?;
        let idx = terminal.argmin_over(&reachable).ok_or_else(|| {
            Error::Infeasible(format!("stage {j} has no finite terminal on its reachable set"))
        })?;
        let waypoint = spec.node_at(idx);
        if j == 0 {
            value_at_start = Some(horizon + terminal.at(idx));
        }
        // leg traced target->here on the solve rooted at `here`, then reversed
        let leg = trace_trajectory(&u_here, speed, &unit_cost, waypoint, spec.h / 2.0)?;
        trajectories.push(reverse_trajectory(&leg));
        waypoints.push(waypoint);
        waypoint_idxs.push(idx);
        here = waypoint;
        prev_end = chain[j].end_time;
    }

    Ok(StagedPlan {
        stages: marched.into_iter().map(|m| m.unwrap()).collect(),
        terminals: terminals.into_iter().map(|t| t.unwrap()).collect(),
        waypoints,
        waypoint_idxs,
        trajectories,
        value_at_start: value_at_start.unwrap(),
    })
}

fn reverse_trajectory(traj: &Trajectory) -> Trajectory {
    let total = traj.total_cost();
    let points: Vec<Point> = traj.points.iter().rev().copied().collect();
    let cumulative_cost = traj
        .cumulative_cost
        .iter()
        .rev()
        .map(|&c| total - c)
        .collect();
    Trajectory {
        points,
        cumulative_cost,
    }
}
