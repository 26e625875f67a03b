// Scratch driver for the marching / DR / coarsening / scenario checks.

use waypath_core::eikonal::reachable_set;
use waypath_core::grid::{Point, ScalarField};
use waypath_core::marching::{march_backward, plan_discrete_horizons, plan_fixed_horizon, plan_stage_chain};
use waypath_core::robust::{
    coarsening_check, dr_field, expected_field, waypoint_argmin, worst_field, FineTarget,
    TargetEnsemble,
};
use waypath_core::scenario;

fn main() {
    let t0 = std::time::Instant::now();
    let def = scenario::four_targets();
    let built = def.build(None).unwrap();
    let spec = built.spec;
    let (ens, _) = built.solve_ensemble().unwrap();
    let q = expected_field(&ens);
    let qbar = worst_field(&ens);
    let u0 = built.solve_from_start().unwrap();
    let reach = reachable_set(&u0, 0.4).unwrap();
    println!("setup {:?}", t0.elapsed());

    // march the expected field back 0.4 and compare with the fixed-T plan
    let t1 = std::time::Instant::now();
    let sliced = march_backward(&q, &built.speed, &built.cost, 0.4, 0.0, &built.mask).unwrap();
    let (si, sj) = spec.nearest_node(built.start);
    let marched_value = sliced.final_slice().get(si, sj);
    let plan = plan_fixed_horizon(&q, &u0, 0.4).unwrap();
    println!(
        "march 0.4 took {:?}; value at start {:.4} vs plan {:.4} (rel {:.2}%)",
        t1.elapsed(),
        marched_value,
        plan.expected_total,
        100.0 * (marched_value - plan.expected_total).abs() / plan.expected_total
    );

    // single-target marching: value at start matches u_1(x0)
    let m1 = TargetEnsemble::new(
        vec![built.targets[0]],
        vec![1.0],
        vec![ens.value_fields[0].clone()],
    )
    .unwrap();
    let q1 = expected_field(&m1);
    let sliced1 = march_backward(&q1, &built.speed, &built.cost, 0.4, 0.0, &built.mask).unwrap();
    let direct = ens.value_fields[0].get(si, sj);
    println!(
        "m=1 marched {:.4} vs u_1(x0) {:.4} (rel {:.2}%)",
        sliced1.final_slice().get(si, sj),
        direct,
        100.0 * (sliced1.final_slice().get(si, sj) - direct).abs() / direct
    );

    // staged plans for the three probability splits
    for (p1, p2) in [(0.9, 0.1), (0.55, 0.45), (0.1, 0.9)] {
        let t2 = std::time::Instant::now();
        let staged =
            plan_discrete_horizons(&q, &built.speed, &built.mask, built.start, &[0.08, 0.4], &[p1, p2])
                .unwrap();
        let s1 = staged.waypoints[0];
        let s2 = staged.waypoints[1];
        // compare s1 with the T=0.08 fixed plan waypoint
        let fixed_small = plan_fixed_horizon(&q, &u0, 0.08).unwrap();
        // interior check: distance of s1 from the 0.08-reachable boundary
        let u_s1 = u0.u.get(spec.nearest_node(s1).0, spec.nearest_node(s1).1);
        println!(
            "p = ({p1}, {p2}): s1 ({:.3}, {:.3}) [u0(s1) = {:.3}], s2 ({:.3}, {:.3}), value {:.4}, fixed-T1 wp ({:.3}, {:.3}) ({:?})",
            s1.x, s1.y, u_s1, s2.x, s2.y, staged.value_at_start,
            fixed_small.waypoint.x, fixed_small.waypoint.y,
            t2.elapsed()
        );
    }

    // DR saturation sweep
    let t3 = std::time::Instant::now();
    let deltas = scenario::linspace(0.0, 0.8, 40);
    let mut prev = f64::NEG_INFINITY;
    let mut monotone = true;
    let mut last = 0.0;
    for &d in &deltas {
        let dr = dr_field(&ens, d).unwrap();
        let (idx, _) = waypoint_argmin(&dr, &reach).unwrap();
        let v = dr.at(idx);
        if v < prev - 1e-12 {
            monotone = false;
            println!("  NOT monotone at delta {d}: {v} < {prev}");
        }
        prev = v;
        last = v;
    }
    let (widx, _) = waypoint_argmin(&qbar, &reach).unwrap();
    println!(
        "DR sweep ({:?}): monotone = {monotone}, last {:.6} vs min qbar {:.6} (diff {:.2e})",
        t3.elapsed(),
        last,
        qbar.at(widx),
        (last - qbar.at(widx)).abs()
    );
    // waypoints at delta 0.02 / 0.1 distinct from expectation and worst waypoints
    let (qidx, _) = waypoint_argmin(&q, &reach).unwrap();
    for d in [0.02, 0.1] {
        let dr = dr_field(&ens, d).unwrap();
        let (idx, pt) = waypoint_argmin(&dr, &reach).unwrap();
        println!(
            "  delta {d}: waypoint ({:.3}, {:.3}), same-as-expected {}, same-as-worst {}",
            pt.x,
            pt.y,
            idx == qidx,
            idx == widx
        );
    }

    // coarsening: 3x3 clusters per target
    for w in [0.025, 0.05] {
        let t4 = std::time::Instant::now();
        let mut fine = Vec::new();
        for (i, t) in built.targets.iter().enumerate() {
            for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    fine.push(FineTarget {
                        point: Point::new(t.x + w * di as f64, t.y + w * dj as f64),
                        weight: built.probs[i] / 9.0,
                        cell: i,
                    });
                }
            }
        }
        let f_l = built
            .speed
            .values()
            .iter()
            .zip(built.mask.inside())
            .filter(|&(_, &ins)| ins)
            .map(|(&v, _)| v)
            .fold(f64::INFINITY, f64::min);
        let h_coarse = w * std::f64::consts::SQRT_2;
        let report = coarsening_check(
            &built.speed,
            &built.cost,
            &built.mask,
            &fine,
            &ens,
            f_l,
            h_coarse,
            &reach,
        )
        .unwrap();
        println!(
            "coarsen w={w} ({:?}): gap {:.4} <= {:.4} ({}), subopt {:.5} <= {:.4} ({})",
            t4.elapsed(),
            report.max_field_gap,
            report.field_gap_bound,
            report.field_within_bound,
            report.suboptimality,
            report.suboptimality_bound,
            report.suboptimality_within_bound
        );
    }

    // storms: waypoints for two probability splits
    for probs in [[0.8, 0.1, 0.1], [0.1, 0.8, 0.1]] {
        let sdef = scenario::storms(probs);
        let sbuilt = sdef.build(None).unwrap();
        let (sens, _) = sbuilt.solve_ensemble().unwrap();
        let sq = expected_field(&sens);
        let su0 = sbuilt.solve_from_start().unwrap();
        let splan = plan_fixed_horizon(&sq, &su0, 0.4).unwrap();
        println!(
            "storm probs {probs:?}: waypoint ({:.3}, {:.3}), value {:.4}",
            splan.waypoint.x, splan.waypoint.y, splan.expected_total
        );
    }

    // drone rescue end to end
    let t5 = std::time::Instant::now();
    let ddef = scenario::drone_rescue();
    let dbuilt = ddef.build(None).unwrap();
    let (dens, _) = dbuilt.solve_ensemble().unwrap();
    let chain = dbuilt.stage_chain(&dens).unwrap();
    let dplan = plan_stage_chain(&chain, &dbuilt.speed, &dbuilt.mask, dbuilt.start).unwrap();
    println!("drone plan ({:?}):", t5.elapsed());
    for (k, wp) in dplan.waypoints.iter().enumerate() {
        println!("  stage {k}: waypoint ({:.3}, {:.3})", wp.x, wp.y);
    }
    println!("  value at start {:.4}", dplan.value_at_start);
    println!("total {:?}", t0.elapsed());
}
