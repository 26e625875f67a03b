// Resolution study for the chance-constraint groups and the large-beta argmin.

use std::collections::HashMap;

use waypath_core::eikonal::reachable_set;
use waypath_core::robust::{
    chance_constrained_policy, expected_field, risk_sensitive_field, waypoint_argmin, worst_field,
    TargetEnsemble,
};
use waypath_core::scenario;

fn main() {
    for n in [201usize, 301, 401, 601, 801] {
        let t0 = std::time::Instant::now();
        let def = scenario::four_targets();
        let built = def.build(Some(n)).unwrap();
        let spec = built.spec;
        let (ens0, _) = built.solve_ensemble().unwrap();
        let ens = TargetEnsemble::new(
            ens0.targets.clone(),
            vec![0.18, 0.18, 0.35, 0.29],
            ens0.value_fields.clone(),
        )
        .unwrap();
        let q = expected_field(&ens);
        let u0 = built.solve_from_start().unwrap();
        let reach = reachable_set(&u0, 0.4).unwrap();
        let c = 0.365;

        // realized risk groups with min q
        let mut groups: HashMap<u8, (f64, usize)> = HashMap::new();
        for idx in 0..spec.len() {
            if !reach.inside_idx(idx) || !q.at(idx).is_finite() {
                continue;
            }
            let mut bits = 0u8;
            for i in 0..4 {
                if ens.value_fields[i].at(idx) > c {
                    bits |= 1 << i;
                }
            }
            let e = groups.entry(bits).or_insert((f64::INFINITY, idx));
            if q.at(idx) < e.0 {
                *e = (q.at(idx), idx);
            }
        }
        let mut rows: Vec<(f64, u8, f64)> = groups
            .iter()
            .map(|(&bits, &(qmin, _))| {
                let mut r = 0.0;
                for i in 0..4 {
                    if bits & (1 << i) != 0 {
                        r += ens.probs[i];
                    }
                }
                (r, bits, qmin)
            })
            .collect();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        println!("--- n = {n} ({:?}) ---", t0.elapsed());
        for (r, bits, qmin) in &rows {
            println!("  r = {r:.3} (miss {{){:04b}}} q_min = {qmin:.4}", bits);
        }
        // three-target max potentials
        let tgt = |a: usize, b: usize, cc: usize| -> f64 {
            let mut best = f64::INFINITY;
            for idx in 0..spec.len() {
                if !reach.inside_idx(idx) {
                    continue;
                }
                let m = ens.value_fields[a]
                    .at(idx)
                    .max(ens.value_fields[b].at(idx))
                    .max(ens.value_fields[cc].at(idx));
                best = best.min(m);
            }
            best
        };
        println!(
            "  min max(u_top,u_bottom,u_left) = {:.4}; min max(u_top,u_bottom,u_right) = {:.4}",
            tgt(0, 2, 3),
            tgt(0, 2, 1)
        );
        match chance_constrained_policy(&ens, &q, c, 0.25, &reach) {
            Ok(policy) => {
                println!("  policy:");
                for a in &policy.atoms {
                    println!("    ({:.3}, {:.3}) prob {:.4}", a.x, a.y, a.probability);
                }
                println!("    objective {:.6}", policy.objective);
            }
            Err(e) => println!("  policy: {e}"),
        }

        // large-beta argmin vs worst-case argmin
        let qbar = worst_field(&ens0);
        let (widx, _) = waypoint_argmin(&qbar, &reach).unwrap();
        for beta in [200.0, 500.0, 1000.0] {
            let ce = risk_sensitive_field(&ens0, beta).unwrap();
            let (bidx, _) = waypoint_argmin(&ce, &reach).unwrap();
            let (wi, wj) = spec.coords(widx);
            let (bi, bj) = spec.coords(bidx);
            println!(
                "  beta {beta}: ce-argmin ({bi},{bj}) vs worst-argmin ({wi},{wj}), match = {}",
                bidx == widx
            );
        }
        let (wi, wj) = spec.coords(widx);
        println!("  qbar near argmin ({wi},{wj}):");
        for dj in -1i64..=1 {
            let mut row = String::new();
            for di in -2i64..=2 {
                let v = qbar.get((wi as i64 + di) as usize, (wj as i64 + dj) as usize);
                row.push_str(&format!("{v:.6} "));
            }
            println!("    {row}");
        }
    }
}
