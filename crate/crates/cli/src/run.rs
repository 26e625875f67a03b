//! Command implementations: build the scenario, solve, emit files.

use std::path::Path;

use serde_json::{json, Value};

use waypath_core::contour::{extract_contours, write_contours_csv};
use waypath_core::eikonal::{reachable_set, trace_trajectory, Trajectory, ValueSolution};
use waypath_core::grid::{DomainMask, Point, ScalarField};
use waypath_core::marching::{plan_fixed_horizon, plan_stage_chain, Stage};
use waypath_core::robust::{
    chance_constrained_policy, coarsening_check, dr_field, expected_field, hard_constrained_waypoint,
    pareto_front, risk_sensitive_field, waypoint_argmin, worst_field, FineTarget, TargetEnsemble,
};
use waypath_core::scenario::{self, BuiltScenario, Uncertainty};
use waypath_core::termination::{
    exponential_pareto, solve_random_termination, trace_to_motionless,
};
use waypath_core::{Error, Result};

use crate::output::{write_atomic, write_field, write_json};
use crate::RunArgs;

struct Context {
    built: BuiltScenario,
    ensemble: TargetEnsemble,
    residuals: Vec<f64>,
    q: ScalarField,
    qbar: ScalarField,
}

impl Context {
    fn load(args: &RunArgs) -> Result<Context> {
        let mut def = scenario::resolve(&args.scenario)?;
        if let Some(probs) = &args.probs {
            match &mut def.uncertainty {
                Uncertainty::Targets { probs: p, .. } | Uncertainty::CostHypotheses { probs: p, .. } => {
                    if p.len() != probs.len() {
                        return Err(Error::Config(format!(
                            "scenario has {} hypotheses but --probs lists {}",
                            p.len(),
                            probs.len()
                        )));
                    }
                    *p = probs.clone();
                }
            }
        }
        let built = def.build(args.grid)?;
        let (ensemble, sols) = built.solve_ensemble()?;
        let residuals = sols.iter().map(|s| s.max_residual).collect();
        let q = expected_field(&ensemble);
        let qbar = worst_field(&ensemble);
        Ok(Context {
            built,
            ensemble,
            residuals,
            q,
            qbar,
        })
    }

    fn horizon(&self, args: &RunArgs) -> Result<f64> {
        args.t
            .or(self.built.def.extras.t)
            .ok_or_else(|| Error::Config("this command needs --T (or a scenario default)".into()))
    }

    fn start_solution(&self) -> Result<ValueSolution> {
        self.built.solve_from_start()
    }

    fn reachable(&self, u0: &ValueSolution, t: f64) -> Result<DomainMask> {
        reachable_set(u0, t)
    }

    fn summary_base(&self, command: &str) -> Value {
        json!({
            "command": command,
            "scenario": self.built.def.name,
            "grid_n": self.built.spec.nx,
            "max_residuals": self.residuals,
        })
    }

    /// Trace the time-optimal leg from the start to `target` and write it.
    fn write_leg(&self, u0: &ValueSolution, target: Point, dir: &Path, name: &str) -> Result<f64> {
        let traj = trace_trajectory(u0, &self.built.speed, &self.built.cost, target, self.built.spec.h / 2.0)?;
        let rev = reverse(&traj);
        write_trajectory(dir, name, &rev)?;
        Ok(rev.total_cost())
    }
}

fn reverse(traj: &Trajectory) -> Trajectory {
    let total = traj.total_cost();
    Trajectory {
        points: traj.points.iter().rev().copied().collect(),
        cumulative_cost: traj.cumulative_cost.iter().rev().map(|&c| total - c).collect(),
    }
}

fn write_trajectory(dir: &Path, name: &str, traj: &Trajectory) -> Result<()> {
    let mut buf = Vec::new();
    traj.write_csv(&mut buf)?;
    write_atomic(dir, name, &buf)
}

fn point_json(p: Point) -> Value {
    json!({"x": p.x, "y": p.y})
}

fn merge(mut base: Value, extra: Value) -> Value {
    if let (Some(b), Some(e)) = (base.as_object_mut(), extra.as_object()) {
        for (k, v) in e {
            b.insert(k.clone(), v.clone());
        }
    }
    base
}

pub fn solve(args: &RunArgs) -> Result<()> {
    let ctx = Context::load(args)?;
    let dir = &args.out;
    for (i, field) in ctx.ensemble.value_fields.iter().enumerate() {
        write_field(dir, &format!("u_target_{i}.csv"), field)?;
    }
    write_field(dir, "q.csv", &ctx.q)?;
    write_field(dir, "qbar.csv", &ctx.qbar)?;
    let u0 = ctx.start_solution()?;
    write_field(dir, "u_start.csv", &u0.u)?;
    // contour polylines of the expected field for plotting
    let finite: Vec<f64> = ctx.q.values().iter().copied().filter(|v| v.is_finite()).collect();
    let (lo, hi) = finite
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let levels = scenario::linspace(lo + 0.05 * (hi - lo), hi - 0.05 * (hi - lo), 12);
    let contours = extract_contours(&ctx.q, &levels)?;
    let mut buf = Vec::new();
    write_contours_csv(&contours, &mut buf)?;
    write_atomic(dir, "q_contours.csv", &buf)?;
    let summary = merge(
        ctx.summary_base("solve"),
        json!({"start_residual": u0.max_residual}),
    );
    write_json(dir, "summary.json", &summary)
}

pub fn plan_fixed(args: &RunArgs) -> Result<()> {
    let ctx = Context::load(args)?;
    let t = ctx.horizon(args)?;
    let dir = &args.out;
    let u0 = ctx.start_solution()?;
    let plan = plan_fixed_horizon(&ctx.q, &u0, t)?;
    let traced_cost = ctx.write_leg(&u0, plan.waypoint, dir, "trajectory.csv")?;
    write_field(dir, "q.csv", &ctx.q)?;
    let boundary = extract_contours(&u0.u, &[t])?;
    let mut buf = Vec::new();
    write_contours_csv(&boundary, &mut buf)?;
    write_atomic(dir, "reachable_boundary.csv", &buf)?;
    let summary = merge(
        ctx.summary_base("plan-fixed"),
        json!({
            "T": t,
            "waypoint": point_json(plan.waypoint),
            "expected_total": plan.expected_total,
            "traced_leg_cost": traced_cost,
            "start_residual": u0.max_residual,
        }),
    );
    write_json(dir, "summary.json", &summary)
}

pub fn plan_discrete(args: &RunArgs) -> Result<()> {
    let ctx = Context::load(args)?;
    let dir = &args.out;
    // explicit flags override the scenario's time model (and drop any
    // stage-reveal structure, since the flags describe target-independent
    // revelation)
    let chain: Vec<Stage> = match (&args.times, &args.time_probs) {
        (Some(times), Some(probs)) => {
            waypath_core::marching::validate_discrete(times, probs)?;
            times
                .iter()
                .zip(probs.iter().enumerate())
                .map(|(&t, (j, &p))| {
                    let tail: f64 = probs[j..].iter().sum();
                    Stage {
                        end_time: t,
                        reveal_weight: p / tail,
                        reveal_field: ctx.q.clone(),
                    }
                })
                .collect()
        }
        (None, None) => ctx.built.stage_chain(&ctx.ensemble)?,
        _ => {
            return Err(Error::Config(
                "--times and --time-probs must be given together".into(),
            ))
        }
    };
    let plan = plan_stage_chain(&chain, &ctx.built.speed, &ctx.built.mask, ctx.built.start)?;
    for (j, (terminal, traj)) in plan.terminals.iter().zip(&plan.trajectories).enumerate() {
        write_field(dir, &format!("terminal_{j}.csv"), terminal)?;
        write_trajectory(dir, &format!("trajectory_{j}.csv"), traj)?;
    }
    let summary = merge(
        ctx.summary_base("plan-discrete"),
        json!({
            "times": chain.iter().map(|s| s.end_time).collect::<Vec<_>>(),
            "waypoints": plan.waypoints.iter().map(|&w| point_json(w)).collect::<Vec<_>>(),
            "value_at_start": plan.value_at_start,
        }),
    );
    write_json(dir, "summary.json", &summary)
}

pub fn plan_exponential(args: &RunArgs) -> Result<()> {
    let ctx = Context::load(args)?;
    let lambda = args
        .lambda
        .or(ctx.built.def.extras.lambda)
        .ok_or_else(|| Error::Config("this command needs --lambda (or a scenario default)".into()))?;
    let dir = &args.out;
    let k0 = ScalarField::constant(ctx.built.spec, 0.0);
    let sol = solve_random_termination(&ctx.q, &ctx.built.speed, lambda, &ctx.built.mask, &k0)?;
    let traj = trace_to_motionless(&sol, &ctx.built.speed, &k0, ctx.built.start, ctx.built.spec.h / 2.0)?;
    write_field(dir, "u_lambda.csv", &sol.u_lambda)?;
    let motionless_field = ScalarField::from_values(
        ctx.built.spec,
        sol.motionless.inside().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
    )?;
    write_field(dir, "motionless.csv", &motionless_field)?;
    write_trajectory(dir, "trajectory.csv", &traj)?;
    let (si, sj) = ctx.built.spec.nearest_node(ctx.built.start);
    let summary = merge(
        ctx.summary_base("plan-exponential"),
        json!({
            "lambda": lambda,
            "waypoint": point_json(traj.end()),
            "value_at_start": sol.u_lambda.get(si, sj),
            "motionless_count": sol.motionless.count_inside(),
            "solve_residual": sol.max_residual,
        }),
    );
    write_json(dir, "summary.json", &summary)
}

pub fn robust_worst(args: &RunArgs) -> Result<()> {
    let ctx = Context::load(args)?;
    let t = ctx.horizon(args)?;
    let dir = &args.out;
    let u0 = ctx.start_solution()?;
    let reach = ctx.reachable(&u0, t)?;
    let (idx, waypoint) = waypoint_argmin(&ctx.qbar, &reach)?;
    ctx.write_leg(&u0, waypoint, dir, "trajectory.csv")?;
    write_field(dir, "qbar.csv", &ctx.qbar)?;
    let summary = merge(
        ctx.summary_base("robust-worst"),
        json!({
            "T": t,
            "waypoint": point_json(waypoint),
            "worst_value": ctx.qbar.at(idx),
            "expected_value": ctx.q.at(idx),
        }),
    );
    write_json(dir, "summary.json", &summary)
}

pub fn robust_risk(args: &RunArgs) -> Result<()> {
    let ctx = Context::load(args)?;
    let t = ctx.horizon(args)?;
    let beta = args
        .beta
        .or(ctx.built.def.extras.beta)
        .ok_or_else(|| Error::Config("this command needs --beta (or a scenario default)".into()))?;
    let dir = &args.out;
    let u0 = ctx.start_solution()?;
    let reach = ctx.reachable(&u0, t)?;
    let ce = risk_sensitive_field(&ctx.ensemble, beta)?;
    let (idx, waypoint) = waypoint_argmin(&ce, &reach)?;
    ctx.write_leg(&u0, waypoint, dir, "trajectory.csv")?;
    write_field(dir, "certainty_equivalent.csv", &ce)?;
    let summary = merge(
        ctx.summary_base("robust-risk"),
        json!({
            "T": t,
            "beta": beta,
            "waypoint": point_json(waypoint),
            "certainty_equivalent": ce.at(idx),
            "expected_value": ctx.q.at(idx),
            "worst_value": ctx.qbar.at(idx),
        }),
    );
    write_json(dir, "summary.json", &summary)
}

pub fn robust_hard(args: &RunArgs) -> Result<()> {
    let ctx = Context::load(args)?;
    let t = ctx.horizon(args)?;
    let c = args
        .c
        .or(ctx.built.def.extras.c)
        .ok_or_else(|| Error::Config("this command needs --C (or a scenario default)".into()))?;
    let dir = &args.out;
    let u0 = ctx.start_solution()?;
    let reach = ctx.reachable(&u0, t)?;
    let (idx, waypoint) = hard_constrained_waypoint(&ctx.q, &ctx.qbar, &reach, c)?;
    ctx.write_leg(&u0, waypoint, dir, "trajectory.csv")?;
    let summary = merge(
        ctx.summary_base("robust-hard"),
        json!({
            "T": t,
            "C": c,
            "waypoint": point_json(waypoint),
            "expected_value": ctx.q.at(idx),
            "worst_value": ctx.qbar.at(idx),
        }),
    );
    write_json(dir, "summary.json", &summary)
}

pub fn robust_chance(args: &RunArgs) -> Result<()> {
    let ctx = Context::load(args)?;
    let t = ctx.horizon(args)?;
    let c = args
        .c
        .or(ctx.built.def.extras.c)
        .ok_or_else(|| Error::Config("this command needs --C (or a scenario default)".into()))?;
    let epsilon = args
        .epsilon
        .or(ctx.built.def.extras.epsilon)
        .ok_or_else(|| Error::Config("this command needs --epsilon (or a scenario default)".into()))?;
    let dir = &args.out;
    let u0 = ctx.start_solution()?;
    let reach = ctx.reachable(&u0, t)?;
    let policy = chance_constrained_policy(&ctx.ensemble, &ctx.q, c, epsilon, &reach)?;
    let mut buf = Vec::new();
    policy.write_json(&mut buf)?;
    buf.push(b'\n');
    write_atomic(dir, "policy.json", &buf)?;
    for (k, atom) in policy.atoms.iter().enumerate() {
        ctx.write_leg(&u0, Point::new(atom.x, atom.y), dir, &format!("trajectory_{k}.csv"))?;
    }
    let summary = merge(
        ctx.summary_base("robust-chance"),
        json!({
            "T": t,
            "C": c,
            "epsilon": epsilon,
            "atoms": policy.atoms.iter().map(|a| json!({
                "x": a.x, "y": a.y, "probability": a.probability,
            })).collect::<Vec<_>>(),
            "objective": policy.objective,
            "risk": policy.risk,
        }),
    );
    write_json(dir, "summary.json", &summary)
}

pub fn robust_dr(args: &RunArgs) -> Result<()> {
    let ctx = Context::load(args)?;
    let t = ctx.horizon(args)?;
    let delta = args
        .delta
        .or(ctx.built.def.extras.delta)
        .ok_or_else(|| Error::Config("this command needs --delta (or a scenario default)".into()))?;
    let dir = &args.out;
    let u0 = ctx.start_solution()?;
    let reach = ctx.reachable(&u0, t)?;
    let dr = dr_field(&ctx.ensemble, delta)?;
    let (idx, waypoint) = waypoint_argmin(&dr, &reach)?;
    ctx.write_leg(&u0, waypoint, dir, "trajectory.csv")?;
    write_field(dir, "dr_field.csv", &dr)?;
    let summary = merge(
        ctx.summary_base("robust-dr"),
        json!({
            "T": t,
            "delta": delta,
            "waypoint": point_json(waypoint),
            "dr_value": dr.at(idx),
            "expected_value": ctx.q.at(idx),
            "worst_value": ctx.qbar.at(idx),
        }),
    );
    write_json(dir, "summary.json", &summary)
}

pub fn pareto(args: &RunArgs) -> Result<()> {
    let ctx = Context::load(args)?;
    let dir = &args.out;
    let front = match args.lambda.or(ctx.built.def.extras.lambda).filter(|_| args.lambda.is_some()) {
        Some(lambda) => {
            let c_values = ctx
                .built
                .def
                .extras
                .c_values
                .clone()
                .ok_or_else(|| Error::Config("exponential pareto needs c_values in the scenario".into()))?;
            let k0 = ScalarField::constant(ctx.built.spec, 0.0);
            exponential_pareto(
                &ctx.q,
                &ctx.qbar,
                &ctx.built.speed,
                lambda,
                &c_values,
                ctx.built.start,
                &ctx.built.mask,
                &k0,
            )?
        }
        None => {
            let t = ctx.horizon(args)?;
            let u0 = ctx.start_solution()?;
            let reach = ctx.reachable(&u0, t)?;
            pareto_front(&ctx.q, &ctx.qbar, &reach)
        }
    };
    let mut buf = Vec::new();
    front.write_csv(&mut buf, &ctx.built.spec)?;
    write_atomic(dir, "pareto.csv", &buf)?;
    let summary = merge(
        ctx.summary_base("pareto"),
        json!({"entries": front.entries.len()}),
    );
    write_json(dir, "summary.json", &summary)
}

pub fn coarsen_check(args: &RunArgs) -> Result<()> {
    let ctx = Context::load(args)?;
    let t = ctx.horizon(args)?;
    let w = args.cell_width.unwrap_or(0.05);
    if !(w > 0.0) {
        return Err(Error::Config("cell width must be positive".into()));
    }
    let dir = &args.out;
    let u0 = ctx.start_solution()?;
    let reach = ctx.reachable(&u0, t)?;
    let mut fine = Vec::new();
    for (i, target) in ctx.built.targets.iter().enumerate() {
        for dj in -1i64..=1 {
            for di in -1i64..=1 {
                fine.push(FineTarget {
                    point: Point::new(target.x + w * di as f64, target.y + w * dj as f64),
                    weight: ctx.built.probs[i] / 9.0,
                    cell: i,
                });
            }
        }
    }
    let f_l = ctx
        .built
        .speed
        .values()
        .iter()
        .zip(ctx.built.mask.inside())
        .filter(|&(_, &ins)| ins)
        .map(|(&v, _)| v)
        .fold(f64::INFINITY, f64::min);
    let h_coarse = w * std::f64::consts::SQRT_2;
    let report = coarsening_check(
        &ctx.built.speed,
        &ctx.built.cost,
        &ctx.built.mask,
        &fine,
        &ctx.ensemble,
        f_l,
        h_coarse,
        &reach,
    )?;
    let report_json = serde_json::to_value(&report).map_err(|e| Error::Config(e.to_string()))?;
    write_json(dir, "report.json", &report_json)?;
    let summary = merge(
        ctx.summary_base("coarsen-check"),
        merge(json!({"T": t, "cell_width": w, "h_coarse": h_coarse, "f_l": f_l}), report_json),
    );
    write_json(dir, "summary.json", &summary)
}
