// Scratch driver for checking reference values on the default grid.

use waypath_core::eikonal::{reachable_set, solve_stationary, trace_trajectory};
use waypath_core::grid::{DomainMask, Point, ScalarField};
use waypath_core::marching::plan_fixed_horizon;
use waypath_core::robust::{
    chance_constrained_policy, expected_field, risk_sensitive_field, waypoint_argmin, worst_field,
};
use waypath_core::scenario;
use waypath_core::termination::{solve_random_termination, trace_to_motionless};

fn main() {
    let t0 = std::time::Instant::now();
    let def = scenario::four_targets();
    let built = def.build(None).unwrap();
    let spec = built.spec;
    let (ens, sols) = built.solve_ensemble().unwrap();
    println!("ensemble solved in {:?}", t0.elapsed());
    for (i, s) in sols.iter().enumerate() {
        println!("  u_{i} residual {:.2e}", s.max_residual);
    }
    let q = expected_field(&ens);
    let qbar = worst_field(&ens);
    let u0 = built.solve_from_start().unwrap();

    // global argmin of q over the whole domain
    let (gidx, gpt) = waypoint_argmin(&q, &built.mask).unwrap();
    println!(
        "global argmin of q: ({:.3}, {:.3}) q = {:.4}, qbar there = {:.4}, u0 = {:.4}",
        gpt.x,
        gpt.y,
        q.at(gidx),
        qbar.at(gidx),
        u0.u.at(gidx)
    );

    // fixed-T thresholds
    for t in [0.08, 0.4, 0.46] {
        let plan = plan_fixed_horizon(&q, &u0, t).unwrap();
        println!(
            "T = {t}: waypoint ({:.3}, {:.3}), expected_total {:.4}",
            plan.waypoint.x, plan.waypoint.y, plan.expected_total
        );
    }
    // binary search for the smallest T whose waypoint is the global argmin
    let (mut lo, mut hi) = (0.05f64, 0.8f64);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        let plan = plan_fixed_horizon(&q, &u0, mid).unwrap();
        if plan.waypoint_idx == gidx {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    println!("threshold T* = {:.4} (reference 0.4528)", hi);

    // worst-case waypoint over the T = 0.4 reachable set
    let reach = reachable_set(&u0, 0.4).unwrap();
    let (widx, wpt) = waypoint_argmin(&qbar, &reach).unwrap();
    println!(
        "worst-case waypoint over T=0.4: ({:.3}, {:.3}) qbar = {:.4}",
        wpt.x,
        wpt.y,
        qbar.at(widx)
    );

    // risk-sensitive argmins
    for beta in [1e-6, 0.1, 1.0, 10.0, 100.0, 200.0] {
        let ce = risk_sensitive_field(&ens, beta).unwrap();
        let (bidx, bpt) = waypoint_argmin(&ce, &reach).unwrap();
        println!(
            "beta {beta:>8}: argmin ({:.3}, {:.3}), ce = {:.4}, node {}",
            bpt.x,
            bpt.y,
            ce.at(bidx),
            bidx
        );
    }
    let (qidx, _) = waypoint_argmin(&q, &reach).unwrap();
    println!("expectation argmin node over reach: {qidx}, worst argmin node: {widx}");

    // chance constraint, Fig-8 parameters
    let ens2 = waypath_core::robust::TargetEnsemble::new(
        ens.targets.clone(),
        vec![0.18, 0.18, 0.35, 0.29],
        ens.value_fields.clone(),
    )
    .unwrap();
    let q2 = expected_field(&ens2);
    match chance_constrained_policy(&ens2, &q2, 0.365, 0.25, &reach) {
        Ok(policy) => {
            println!("chance policy (C=0.365, eps=0.25):");
            for a in &policy.atoms {
                println!("  atom ({:.3}, {:.3}) prob {:.4}", a.x, a.y, a.probability);
            }
            println!("  objective {:.6}, risk {:.4}", policy.objective, policy.risk);
        }
        Err(e) => println!("chance policy: {e}"),
    }

    // worst-case value at the global q-min: reference 0.6566
    println!("qbar(global argmin of q) = {:.4} (reference 0.6566)", qbar.at(gidx));

    // exponential certainty time: trajectories for the three rates
    let k0 = ScalarField::constant(spec, 0.0);
    for lambda in [2.5, 20.0, 30.0] {
        let sol = solve_random_termination(&q, &built.speed, lambda, &built.mask, &k0).unwrap();
        let traj = trace_to_motionless(&sol, &built.speed, &k0, built.start, spec.h / 2.0);
        match traj {
            Ok(traj) => {
                let end = traj.end();
                println!(
                    "lambda {lambda}: end ({:.3}, {:.3}), residual {:.2e}, motionless {} nodes, u(x0) = {:.4}",
                    end.x,
                    end.y,
                    sol.max_residual,
                    sol.motionless.count_inside(),
                    sol.u_lambda.bilinear(built.start).unwrap()
                );
            }
            Err(e) => println!("lambda {lambda}: trace failed: {e}"),
        }
    }

    // local minima of q (discrete, 4-neighbor)
    let mut minima = Vec::new();
    for j in 0..spec.ny {
        for i in 0..spec.nx {
            if !built.mask.is_inside(i, j) || !q.get(i, j).is_finite() {
                continue;
            }
            let c = q.get(i, j);
            let mut is_min = true;
            let mut check = |ii: usize, jj: usize| {
                if built.mask.is_inside(ii, jj) && q.get(ii, jj) < c {
                    is_min = false;
                }
            };
            if i > 0 { check(i - 1, j); }
            if i + 1 < spec.nx { check(i + 1, j); }
            if j > 0 { check(i, j - 1); }
            if j + 1 < spec.ny { check(i, j + 1); }
            if is_min {
                minima.push((i, j, c));
            }
        }
    }
    println!("local minima of q:");
    for (i, j, c) in &minima {
        let p = spec.node(*i, *j);
        println!("  ({:.3}, {:.3}) q = {:.4}, u0 = {:.4}", p.x, p.y, c, u0.u.get(*i, *j));
    }

    // trajectory symmetry check: traced cost vs u_i(x0)
    let kunit = ScalarField::constant(spec, 1.0);
    for (i, s) in sols.iter().enumerate() {
        let traj = trace_trajectory(s, &built.speed, &kunit, built.start, spec.h / 2.0).unwrap();
        let direct = s.u.bilinear(built.start).unwrap();
        println!(
            "target {i}: traced cost {:.4} vs u_i(x0) {:.4} (rel {:.3}%)",
            traj.total_cost(),
            direct,
            100.0 * (traj.total_cost() - direct).abs() / direct
        );
    }

    // Eikonal accuracy, f = K = 1, 201 and 101 grids
    for n in [101, 201] {
        let gspec = waypath_core::grid::GridSpec::unit_square(n).unwrap();
        let ones = ScalarField::constant(gspec, 1.0);
        let mask = DomainMask::all(gspec);
        let src = Point::new(0.5, 0.5);
        let t = std::time::Instant::now();
        let sol = solve_stationary(&ones, &ones, &[src], &mask).unwrap();
        let mut err = 0.0f64;
        for idx in 0..gspec.len() {
            err = err.max((sol.u.at(idx) - gspec.node_at(idx).dist(src)).abs());
        }
        println!(
            "n = {n}: max |u - dist| = {:.5} ({:.2}h), solve took {:?}",
            err,
            err / gspec.h,
            t.elapsed()
        );
    }
    println!("total {:?}", t0.elapsed());
}
