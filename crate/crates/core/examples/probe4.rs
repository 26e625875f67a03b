// Constrained exponential-certainty checks and the DR-vs-front relation.

use waypath_core::eikonal::reachable_set;
use waypath_core::grid::ScalarField;
use waypath_core::robust::{dr_field, expected_field, pareto_front, waypoint_argmin, worst_field};
use waypath_core::scenario;
use waypath_core::termination::{
    exponential_pareto, solve_random_termination, solve_random_termination_constrained,
    trace_to_motionless,
};

fn main() {
    let def = scenario::four_targets();
    let built = def.build(None).unwrap();
    let spec = built.spec;
    let (ens, _) = built.solve_ensemble().unwrap();
    let q = expected_field(&ens);
    let qbar = worst_field(&ens);
    let k0 = ScalarField::constant(spec, 0.0);
    let (si, sj) = spec.nearest_node(built.start);

    let free = solve_random_termination(&q, &built.speed, 2.5, &built.mask, &k0).unwrap();
    let free_traj = trace_to_motionless(&free, &built.speed, &k0, built.start, spec.h / 2.0).unwrap();
    let mut worst_on_free = f64::NEG_INFINITY;
    for p in &free_traj.points {
        if let Ok(v) = qbar.bilinear(*p) {
            if v.is_finite() {
                worst_on_free = worst_on_free.max(v);
            }
        }
    }
    println!(
        "unconstrained: end ({:.3}, {:.3}), value {:.4}, worst qbar along path {:.4}",
        free_traj.end().x,
        free_traj.end().y,
        free.u_lambda.get(si, sj),
        worst_on_free
    );

    for c in [0.725, 0.7] {
        let sol = solve_random_termination_constrained(&q, &qbar, &built.speed, 2.5, c, &built.mask, &k0)
            .unwrap();
        let traj = trace_to_motionless(&sol, &built.speed, &k0, built.start, spec.h / 2.0);
        match traj {
            Ok(t) => println!(
                "C = {c}: end ({:.3}, {:.3}), value at start {:.4}",
                t.end().x,
                t.end().y,
                sol.u_lambda.get(si, sj)
            ),
            Err(e) => println!("C = {c}: trace failed: {e}"),
        }
    }

    // Pareto sweep per the exponential criterion
    let c_values = scenario::linspace(0.66, 0.81, 16);
    let front = exponential_pareto(
        &q,
        &qbar,
        &built.speed,
        2.5,
        &c_values,
        built.start,
        &built.mask,
        &k0,
    )
    .unwrap();
    println!("exponential front ({} entries):", front.entries.len());
    for e in &front.entries {
        println!("  worst {:.4} avg {:.4}", e.worst, e.avg);
    }

    // DR waypoints vs the fixed-horizon front
    let u0 = built.solve_from_start().unwrap();
    let reach = reachable_set(&u0, 0.4).unwrap();
    let fr = pareto_front(&q, &qbar, &reach);
    let mut dominated = 0;
    let mut total = 0;
    for &d in &scenario::linspace(0.0, 0.8, 40) {
        let dr = dr_field(&ens, d).unwrap();
        let (idx, _) = waypoint_argmin(&dr, &reach).unwrap();
        let (w, a) = (qbar.at(idx), q.at(idx));
        total += 1;
        if fr
            .entries
            .iter()
            .any(|e| e.worst < w - 1e-12 && e.avg < a - 1e-12)
        {
            dominated += 1;
        }
    }
    println!("DR waypoints strictly dominated by a front entry: {dominated}/{total}");
}
