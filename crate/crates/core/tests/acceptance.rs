//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! (visible with `cargo test --test acceptance -- --nocapture`).

use std::sync::OnceLock;
use std::time::Instant;

use waypath_core::eikonal::{reachable_set, solve_stationary, ValueSolution};
use waypath_core::grid::{DomainMask, GridSpec, Point, ScalarField};
use waypath_core::lp::single_constraint_optimum;
use waypath_core::marching::{march_backward, plan_discrete_horizons, plan_fixed_horizon};
use waypath_core::robust::{
    chance_constrained_policy, coarsening_check, dr_field, dr_worst_distribution, expected_field,
    risk_sensitive_field, waypoint_argmin, worst_field, FineTarget, TargetEnsemble,
};
use waypath_core::scenario;
use waypath_core::sweep::solve_stationary_sweeping;
use waypath_core::termination::{solve_random_termination, trace_to_motionless};

struct Ctx {
    built: scenario::BuiltScenario,
    ensemble: TargetEnsemble,
    q: ScalarField,
    qbar: ScalarField,
    u0: ValueSolution,
}

fn ctx() -> &'static Ctx {
    static CTX: OnceLock<Ctx> = OnceLock::new();
    CTX.get_or_init(|| {
        let built = scenario::four_targets().build(None).expect("default scenario builds");
        let (ensemble, _) = built.solve_ensemble().expect("ensemble solves");
        let q = expected_field(&ensemble);
        let qbar = worst_field(&ensemble);
        let u0 = built.solve_from_start().expect("start solve");
        Ctx {
            built,
            ensemble,
            q,
            qbar,
            u0,
        }
    })
}

fn report(n: usize, label: &str, ok: bool, detail: &str) {
    println!(
        "acceptance {n} ({label}): {} [{detail}]",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {n} ({label}) failed: {detail}");
}

#[test]
fn criterion_01_eikonal_correctness() {
    let mut errors = Vec::new();
    let mut runtimes = Vec::new();
    for n in [101usize, 201] {
        let spec = GridSpec::unit_square(n).unwrap();
        let ones = ScalarField::constant(spec, 1.0);
        let mask = DomainMask::all(spec);
        let src = Point::new(0.5, 0.5);
        let t = Instant::now();
        let sol = solve_stationary(&ones, &ones, &[src], &mask).unwrap();
        runtimes.push(t.elapsed());
        let mut err = 0.0f64;
        for idx in 0..spec.len() {
            err = err.max((sol.u.at(idx) - spec.node_at(idx).dist(src)).abs());
        }
        errors.push(err);
    }
    let h = 1.0 / 200.0;
    let ratio = errors[0] / errors[1];
    let ok = errors[1] <= 2.0 * h && (1.8..=2.2).contains(&ratio) && runtimes.iter().all(|t| t.as_secs_f64() < 1.0);
    report(
        1,
        "eikonal correctness",
        ok,
        &format!(
            "max error {:.5} <= {:.5}, ratio {:.3} in [1.8, 2.2], runtimes {:?}",
            errors[1],
            2.0 * h,
            ratio,
            runtimes
        ),
    );
}

#[test]
fn criterion_02_oracle_equivalence() {
    let c = ctx();
    let mut worst_gap = 0.0f64;
    let mut cases = 0;
    // the default scenario, solved from the start position
    {
        let swept = solve_stationary_sweeping(
            &c.built.speed,
            &c.built.cost,
            &[c.built.start],
            &c.built.mask,
            1e-10,
        )
        .unwrap();
        for idx in 0..c.built.spec.len() {
            let (a, b) = (c.u0.u.at(idx), swept.u.at(idx));
            if a.is_finite() || b.is_finite() {
                worst_gap = worst_gap.max((a - b).abs());
            }
        }
        cases += 1;
    }
    // five randomized smooth speed fields on the same masked domain
    let spec = c.built.spec;
    for seed in 0..5u32 {
        let (a, b, cph, d) = (
            1.0 + 0.3 * seed as f64,
            2.0 + 0.7 * seed as f64,
            0.5 + 1.1 * seed as f64,
            0.25 * seed as f64,
        );
        let speed = ScalarField::from_fn(spec, |p| {
            1.5 + 0.7 * (a * p.x * 6.0 + d).sin() * (b * p.y * 3.0 + cph).cos()
        })
        .unwrap();
        let srcs = [Point::new(0.1 + 0.2 * seed as f64 * 0.5, 0.3 + 0.1 * seed as f64)];
        let marched = solve_stationary(&speed, &c.built.cost, &srcs, &c.built.mask).unwrap();
        let swept =
            solve_stationary_sweeping(&speed, &c.built.cost, &srcs, &c.built.mask, 1e-10).unwrap();
        for idx in 0..spec.len() {
            let (x, y) = (marched.u.at(idx), swept.u.at(idx));
            if x.is_finite() || y.is_finite() {
                worst_gap = worst_gap.max((x - y).abs());
            }
        }
        cases += 1;
    }
    report(
        2,
        "oracle equivalence",
        worst_gap <= 1e-9,
        &format!("{cases} cases, worst node gap {worst_gap:.2e} <= 1e-9"),
    );
}

#[test]
fn criterion_03_fixed_horizon_threshold() {
    let c = ctx();
    let t0 = Instant::now();
    let (global_idx, _) = waypoint_argmin(&c.q, &c.built.mask).unwrap();
    let (mut lo, mut hi) = (0.05f64, 0.8f64);
    assert_ne!(
        plan_fixed_horizon(&c.q, &c.u0, lo).unwrap().waypoint_idx,
        global_idx
    );
    assert_eq!(
        plan_fixed_horizon(&c.q, &c.u0, hi).unwrap().waypoint_idx,
        global_idx
    );
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if plan_fixed_horizon(&c.q, &c.u0, mid).unwrap().waypoint_idx == global_idx {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let elapsed = t0.elapsed();
    let ok = (hi - 0.4528).abs() <= 0.02 && elapsed.as_secs_f64() < 30.0;
    report(
        3,
        "fixed-horizon threshold",
        ok,
        &format!("T* = {hi:.4} vs 0.4528 +- 0.02, search took {elapsed:?}"),
    );
}

#[test]
fn criterion_04_worst_case_constant() {
    let c = ctx();
    let (idx, _) = waypoint_argmin(&c.q, &c.built.mask).unwrap();
    let value = c.qbar.at(idx);
    let ok = (value - 0.6566).abs() <= 0.015;
    report(
        4,
        "worst-case constant",
        ok,
        &format!("qbar at the expected-cost optimum = {value:.4} vs 0.6566 +- 0.015"),
    );
}

#[test]
fn criterion_05_chance_constraint_reproduction() {
    // the reference risk group appears once the grid resolves the three-target
    // 0.365-ball overlap; the default 201-node grid is one refinement short
    let built = scenario::four_targets().build(Some(401)).unwrap();
    let probs = vec![0.18, 0.18, 0.35, 0.29];
    let (base, _) = built.solve_ensemble().unwrap();
    let ensemble = TargetEnsemble::new(base.targets.clone(), probs, base.value_fields.clone()).unwrap();
    let q = expected_field(&ensemble);
    let u0 = built.solve_from_start().unwrap();
    let reach = reachable_set(&u0, 0.4).unwrap();
    let (c_bound, eps) = (0.365, 0.25);
    let policy = chance_constrained_policy(&ensemble, &q, c_bound, eps, &reach).unwrap();
    let mut got: Vec<f64> = policy.atoms.iter().map(|a| a.probability).collect();
    got.sort_by(f64::total_cmp);
    let probs_ok = policy.atoms.len() == 2
        && (got[0] - 0.3889).abs() <= 0.02
        && (got[1] - 0.6111).abs() <= 0.02;

    // brute-force LP over every reachable node (vertex enumeration)
    let spec = built.spec;
    let mut qs = Vec::new();
    let mut rs = Vec::new();
    for idx in 0..spec.len() {
        if !reach.inside_idx(idx) || !q.at(idx).is_finite() {
            continue;
        }
        let mut r = 0.0;
        for i in 0..ensemble.len() {
            if ensemble.value_fields[i].at(idx) > c_bound {
                r += ensemble.probs[i];
            }
        }
        qs.push(q.at(idx));
        rs.push(r);
    }
    let oracle = single_constraint_optimum(&qs, &rs, eps).expect("oracle feasible");
    let objective_gap = (policy.objective - oracle.objective).abs();
    let ok = probs_ok && objective_gap <= 1e-9;
    report(
        5,
        "chance-constraint reproduction",
        ok,
        &format!(
            "atom probabilities {got:?} vs (0.3889, 0.6111) +- 0.02; |objective - LP oracle| = {objective_gap:.2e}"
        ),
    );
}

#[test]
fn criterion_06_dr_saturation_and_oracle() {
    let c = ctx();
    let reach = reachable_set(&c.u0, 0.4).unwrap();
    let deltas = scenario::linspace(0.0, 0.8, 40);
    let mut values = Vec::new();
    for &d in &deltas {
        let dr = dr_field(&c.ensemble, d).unwrap();
        values.push(dr.min_over(&reach));
    }
    let monotone = values.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    let min_qbar = c.qbar.min_over(&reach);
    let saturation_floor = 1.0 - c.ensemble.probs.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let saturated = deltas
        .iter()
        .zip(&values)
        .filter(|(&d, _)| d >= saturation_floor - 1e-12)
        .all(|(_, &v)| (v - min_qbar).abs() <= 1e-6);

    // brute-force maximizer over the total-variation ball on random instances
    let mut rng = 0x9e3779b97f4a7c15u64;
    let mut next = move || {
        rng ^= rng << 13;
        rng ^= rng >> 7;
        rng ^= rng << 17;
        (rng >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut worst_rel = 0.0f64;
    for case in 0..100 {
        let m = 2 + case % 3;
        let mut probs: Vec<f64> = (0..m).map(|_| 0.05 + next()).collect();
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        let u: Vec<f64> = (0..m).map(|_| next() * 3.0).collect();
        let cap = match m {
            2 => 0.5,
            3 => 0.35,
            _ => 0.2,
        };
        let delta = (next() * cap * 1000.0).round() / 1000.0;
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| u[a].total_cmp(&u[b]).then(a.cmp(&b)));
        let shifted = dr_worst_distribution(&probs, &order, delta);
        let mine: f64 = shifted.iter().zip(&u).map(|(p, v)| p * v).sum();
        let brute = tv_ball_enumerated_max(&probs, &u, delta, 0.001);
        let range = u.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
            - u.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        let tol = 0.002 * range.max(1e-9);
        let gap = (mine - brute).abs();
        worst_rel = worst_rel.max(gap / tol);
        assert!(
            mine >= brute - 1e-9,
            "case {case}: closed form {mine} below enumerated {brute}"
        );
        assert!(gap <= tol, "case {case}: gap {gap} above tolerance {tol}");
    }
    let ok = monotone && saturated;
    report(
        6,
        "distributionally robust saturation",
        ok,
        &format!(
            "sweep monotone = {monotone}, saturated to min worst {min_qbar:.6}, oracle worst gap {worst_rel:.3} of tolerance"
        ),
    );
}

/// Enumerate the total-variation ball on a lattice of the given step and
/// maximize the expected cost (independent check of the mass-shift argument).
fn tv_ball_enumerated_max(probs: &[f64], u: &[f64], delta: f64, step: f64) -> f64 {
    let m = probs.len();
    let span = (delta / step).ceil() as i64;
    let mut best = f64::NEG_INFINITY;
    let mut moves = vec![0i64; m - 1];
    enumerate(probs, u, delta, step, span, 0, &mut moves, &mut best);
    best
}

fn enumerate(
    probs: &[f64],
    u: &[f64],
    delta: f64,
    step: f64,
    span: i64,
    k: usize,
    moves: &mut Vec<i64>,
    best: &mut f64,
) {
    let m = probs.len();
    if k == m - 1 {
        let partial: f64 = moves.iter().map(|&d| d as f64 * step).sum();
        let last = -partial;
        let mut tv = last.abs();
        let mut value = probs[m - 1] + last;
        if !(0.0..=1.0 + 1e-12).contains(&value) {
            return;
        }
        let mut obj = value * u[m - 1];
        for i in 0..m - 1 {
            let d = moves[i] as f64 * step;
            value = probs[i] + d;
            if !(-1e-12..=1.0 + 1e-12).contains(&value) {
                return;
            }
            tv += d.abs();
            obj += value * u[i];
        }
        if tv <= 2.0 * delta + 1e-12 && obj > *best {
            *best = obj;
        }
        return;
    }
    let used: f64 = moves[..k].iter().map(|&d| (d as f64 * step).abs()).sum();
    let budget = 2.0 * delta - used;
    if budget < -1e-12 {
        return;
    }
    let reach = ((budget / step).floor() as i64).min(span);
    for d in -reach..=reach {
        let dp = d as f64 * step;
        let value = probs[k] + dp;
        if !(-1e-12..=1.0 + 1e-12).contains(&value) {
            continue;
        }
        moves[k] = d;
        enumerate(probs, u, delta, step, span, k + 1, moves, best);
    }
    moves[k] = 0;
}

#[test]
fn criterion_07_exponential_certainty_properties() {
    let c = ctx();
    let spec = c.built.spec;
    let k0 = ScalarField::constant(spec, 0.0);
    // the two candidate destinations: global minimum of q and the local
    // minimum closest to the start in travel time
    let minima = discrete_local_minima(&c.q, &c.built.mask);
    let global = *minima
        .iter()
        .min_by(|&&a, &&b| c.q.at(a).total_cmp(&c.q.at(b)))
        .unwrap();
    let nearest = *minima
        .iter()
        .min_by(|&&a, &&b| c.u0.u.at(a).total_cmp(&c.u0.u.at(b)))
        .unwrap();
    assert_ne!(global, nearest);

    let mut ok = true;
    let mut notes = Vec::new();
    for lambda in [2.5, 20.0, 30.0] {
        let sol = solve_random_termination(&c.q, &c.built.speed, lambda, &c.built.mask, &k0).unwrap();
        // capped from above by q
        let capped = (0..spec.len())
            .filter(|&idx| c.built.mask.inside_idx(idx))
            .all(|idx| sol.u_lambda.at(idx) <= c.q.at(idx) + 1e-9);
        // motionless nodes are discrete local minima of q
        let motionless_minimal = (0..spec.len())
            .filter(|&idx| sol.motionless.inside_idx(idx))
            .all(|idx| is_local_min(&c.q, &c.built.mask, idx));
        let traj = trace_to_motionless(&sol, &c.built.speed, &k0, c.built.start, spec.h / 2.0).unwrap();
        let target = if lambda < 25.0 { global } else { nearest };
        let dist = traj.end().dist(spec.node_at(target));
        let reaches = dist <= 3.0 * spec.h;
        ok &= capped && motionless_minimal && reaches;
        notes.push(format!(
            "lambda {lambda}: capped {capped}, minima {motionless_minimal}, terminal {:.4} from its basin center",
            dist
        ));
    }
    report(7, "exponential certainty time", ok, &notes.join("; "));
}

fn discrete_local_minima(q: &ScalarField, mask: &DomainMask) -> Vec<usize> {
    (0..q.spec().len())
        .filter(|&idx| mask.inside_idx(idx) && q.at(idx).is_finite() && is_local_min(q, mask, idx))
        .collect()
}

fn is_local_min(q: &ScalarField, mask: &DomainMask, idx: usize) -> bool {
    let spec = q.spec();
    let (i, j) = spec.coords(idx);
    let c = q.at(idx);
    let mut ok = true;
    let mut check = |ii: usize, jj: usize| {
        if mask.is_inside(ii, jj) && q.get(ii, jj) < c - 1e-12 {
            ok = false;
        }
    };
    if i > 0 {
        check(i - 1, j);
    }
    if i + 1 < spec.nx {
        check(i + 1, j);
    }
    if j > 0 {
        check(i, j - 1);
    }
    if j + 1 < spec.ny {
        check(i, j + 1);
    }
    ok
}

#[test]
fn criterion_08_discrete_consistency() {
    let c = ctx();
    // a one-stage chain is the fixed-horizon plan, computed the same way
    let fixed = plan_fixed_horizon(&c.q, &c.u0, 0.4).unwrap();
    let staged =
        plan_discrete_horizons(&c.q, &c.built.speed, &c.built.mask, c.built.start, &[0.4], &[1.0])
            .unwrap();
    let chain_gap = (staged.value_at_start - fixed.expected_total).abs();
    let same_waypoint = staged.waypoint_idxs[0] == fixed.waypoint_idx;

    // single target: the fixed-horizon total equals the direct solve at the start
    let single = TargetEnsemble::new(
        vec![c.built.targets[0]],
        vec![1.0],
        vec![c.ensemble.value_fields[0].clone()],
    )
    .unwrap();
    let q1 = expected_field(&single);
    let plan1 = plan_fixed_horizon(&q1, &c.u0, 0.4).unwrap();
    let (si, sj) = c.built.spec.nearest_node(c.built.start);
    let direct = c.ensemble.value_fields[0].get(si, sj);
    let rel = (plan1.expected_total - direct).abs() / direct;

    // the marched value function agrees too
    let sliced =
        march_backward(&q1, &c.built.speed, &c.built.cost, 0.4, 0.0, &c.built.mask).unwrap();
    let marched_rel = (sliced.final_slice().get(si, sj) - direct).abs() / direct;

    let ok = chain_gap <= 1e-9 && same_waypoint && rel <= 0.02 && marched_rel <= 0.02;
    report(
        8,
        "discrete-certainty consistency",
        ok,
        &format!(
            "one-stage gap {chain_gap:.2e}, same waypoint {same_waypoint}, single-target rel {rel:.4}, marched rel {marched_rel:.4}"
        ),
    );
}

#[test]
fn criterion_09_coarsening_bound() {
    let c = ctx();
    let reach = reachable_set(&c.u0, 0.4).unwrap();
    let f_l = c
        .built
        .speed
        .values()
        .iter()
        .zip(c.built.mask.inside())
        .filter(|&(_, &ins)| ins)
        .map(|(&v, _)| v)
        .fold(f64::INFINITY, f64::min);
    let mut ok = true;
    let mut notes = Vec::new();
    for w in [0.025, 0.05] {
        let mut fine = Vec::new();
        for (i, t) in c.built.targets.iter().enumerate() {
            for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    fine.push(FineTarget {
                        point: Point::new(t.x + w * di as f64, t.y + w * dj as f64),
                        weight: c.built.probs[i] / 9.0,
                        cell: i,
                    });
                }
            }
        }
        let h_coarse = w * std::f64::consts::SQRT_2;
        let report_out = coarsening_check(
            &c.built.speed,
            &c.built.cost,
            &c.built.mask,
            &fine,
            &c.ensemble,
            f_l,
            h_coarse,
            &reach,
        )
        .unwrap();
        ok &= report_out.field_within_bound && report_out.suboptimality_within_bound;
        notes.push(format!(
            "w {w}: gap {:.4} <= {:.4}, subopt {:.4} <= {:.4}",
            report_out.max_field_gap,
            report_out.field_gap_bound,
            report_out.suboptimality,
            report_out.suboptimality_bound
        ));
    }
    report(9, "coarsening bound", ok, &notes.join("; "));
}

#[test]
fn criterion_10_risk_sensitive_bracketing() {
    let c = ctx();
    let spec = c.built.spec;
    let reach = reachable_set(&c.u0, 0.4).unwrap();
    let mut bracketing = true;
    for beta in [0.1, 1.0, 10.0, 100.0] {
        let ce = risk_sensitive_field(&c.ensemble, beta).unwrap();
        for idx in 0..spec.len() {
            if !(c.q.at(idx) - 1e-9 <= ce.at(idx) && ce.at(idx) <= c.qbar.at(idx) + 1e-9) {
                bracketing = false;
                break;
            }
        }
    }
    let (q_idx, _) = waypoint_argmin(&c.q, &reach).unwrap();
    let (w_idx, _) = waypoint_argmin(&c.qbar, &reach).unwrap();
    let tiny = risk_sensitive_field(&c.ensemble, 1e-6).unwrap();
    let (tiny_idx, _) = waypoint_argmin(&tiny, &reach).unwrap();
    let large = risk_sensitive_field(&c.ensemble, 200.0).unwrap();
    let (large_idx, _) = waypoint_argmin(&large, &reach).unwrap();

    // diagnostics: how far apart the nodes are, and the rate at which the
    // exponential-moment argmin actually reaches the worst-case node
    let gap_cells = {
        let (a, b) = (spec.coords(large_idx), spec.coords(w_idx));
        ((a.0 as f64 - b.0 as f64).powi(2) + (a.1 as f64 - b.1 as f64).powi(2)).sqrt()
    };
    let mut settle_beta = f64::INFINITY;
    for &beta in &[200.0, 500.0, 1000.0, 2000.0, 5000.0, 10000.0, 20000.0, 50000.0] {
        let ce = risk_sensitive_field(&c.ensemble, beta).unwrap();
        if waypoint_argmin(&ce, &reach).unwrap().0 == w_idx {
            settle_beta = beta;
            break;
        }
    }
    let ok = bracketing && tiny_idx == q_idx && large_idx == w_idx;
    report(
        10,
        "risk-sensitive bracketing",
        ok,
        &format!(
            "bracketing {bracketing}, beta 1e-6 matches expectation argmin {}, beta 200 vs worst argmin: {} ({gap_cells:.1} cells apart, argmins coincide from beta = {settle_beta})",
            tiny_idx == q_idx,
            large_idx == w_idx
        ),
    );
}
