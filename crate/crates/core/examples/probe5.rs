use waypath_core::grid::ScalarField;
use waypath_core::robust::{expected_field, worst_field};
use waypath_core::scenario;
use waypath_core::termination::{solve_random_termination_constrained, trace_to_motionless};

fn main() {
    for n in [201, 301, 401] {
        let built = scenario::four_targets().build(Some(n)).unwrap();
        let spec = built.spec;
        let (ens, _) = built.solve_ensemble().unwrap();
        let q = expected_field(&ens);
        let qbar = worst_field(&ens);
        let k0 = ScalarField::constant(spec, 0.0);
        let (si, sj) = spec.nearest_node(built.start);
        for c in [0.725, 0.75, 0.7] {
            let sol = solve_random_termination_constrained(&q, &qbar, &built.speed, 2.5, c, &built.mask, &k0).unwrap();
            match trace_to_motionless(&sol, &built.speed, &k0, built.start, spec.h / 2.0) {
                Ok(t) => println!("n={n} C={c}: end ({:.3},{:.3}) value {:.4}", t.end().x, t.end().y, sol.u_lambda.get(si, sj)),
                Err(e) => println!("n={n} C={c}: {e}"),
            }
        }
    }
}
