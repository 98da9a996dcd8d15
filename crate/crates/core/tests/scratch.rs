//! Temporary probe for Example-1 scale numbers; deleted before shipping.

use sgmm::multiindex::{build_index_set, IndexSetSpec};
use sgmm::sgfem::*;

#[test]
#[ignore]
fn probe_example1() {
    let spec = DiffusionSpec { m: 2, s: 1.5, p: 6, spatial: SpatialProfile::Constant };
    let exp = expand_diffusion(&spec).unwrap();
    let fem = FemSpace::new(20, 4).unwrap();
    let opts = SolverOptions::default();

    // Weight estimation from isoTD(2,19).
    let t0 = std::time::Instant::now();
    let set = build_index_set(&IndexSetSpec::IsoTd { n: 2, k: 19 }).unwrap();
    let sol = assemble_and_solve(&exp, &set, &fem, opts).unwrap();
    println!(
        "isoTD(2,19): |set|={} iters={} residual={:.2e} time={:?}",
        set.len(),
        sol.report.iterations,
        sol.report.residual,
        t0.elapsed()
    );
    let g = estimate_weights(&sol, 2).unwrap();
    println!("estimated g = {:?}  (paper: (1.16, 3.82))", g);

    // Ray norms for inspection.
    for m in 1..=2u32 {
        let mut norms = Vec::new();
        for k in 0..=19u32 {
            let target = if k == 0 {
                sgmm::MultiIndex::zero()
            } else {
                sgmm::MultiIndex::from_pairs(vec![(m, k)]).unwrap()
            };
            if let Ok(ord) = set.locate(&target) {
                let n = fem.v_norm(&sol.coeffs.column(ord as usize).clone_owned());
                norms.push(format!("{:.2e}", n));
            }
        }
        println!("ray {}: {}", m, norms.join(" "));
    }

    // Reference statistics.
    let exact = exact_statistics_space_independent(&spec, &fem).unwrap();
    let stats = statistics(&sol);
    let (em, ev) = relative_errors(&stats, &exact, &fem).unwrap();
    println!("isoTD(2,19) errors: mean {:.3e}% var {:.3e}%", em, ev);

    // isoTP sweep point near 200 polynomials: K = 13 -> 196.
    let t0 = std::time::Instant::now();
    let set_tp = build_index_set(&IndexSetSpec::IsoTp { n: 2, k: 13 }).unwrap();
    let sol_tp = assemble_and_solve(&exp, &set_tp, &fem, opts).unwrap();
    let stats_tp = statistics(&sol_tp);
    let (em_tp, ev_tp) = relative_errors(&stats_tp, &exact, &fem).unwrap();
    println!(
        "isoTP(2,13): |set|={} iters={} errors mean {:.3e}% var {:.3e}% time={:?} (paper ~1e-4% / 1e-3%)",
        set_tp.len(),
        sol_tp.report.iterations,
        em_tp,
        ev_tp,
        t0.elapsed()
    );

    // aTP with the estimated weights, capped around 500-600 elements.
    let mut g_sorted = g.clone();
    g_sorted.sort_by(|a: &f64, b: &f64| a.total_cmp(b));
    for k in [20.0, 30.0, 40.0f64] {
        let t0 = std::time::Instant::now();
        let set_atp = build_index_set(&IndexSetSpec::ATp { n: 2, k, g: g_sorted.clone() }).unwrap();
        let sol_atp = assemble_and_solve(&exp, &set_atp, &fem, opts).unwrap();
        let stats_atp = statistics(&sol_atp);
        let (em_a, ev_a) = relative_errors(&stats_atp, &exact, &fem).unwrap();
        let norms: Vec<f64> = coefficient_norms(&sol_atp).into_iter().map(|(_, n)| n).collect();
        let rate = fit_rate(&norms, 1, 100.min(norms.len())).unwrap();
        println!
            ("aTP(2,{}): |set|={} iters={} mean {:.3e}% var {:.3e}% rate={:.3} time={:?}",
            k,
            set_atp.len(),
            sol_atp.report.iterations,
            em_a,
            ev_a,
            rate,
            t0.elapsed()
        );
    }

    // aTD sweep.
    for k in [8.0, 12.0, 16.0f64] {
        let set_atd = build_index_set(&IndexSetSpec::ATd { n: 2, k, g: g_sorted.clone() }).unwrap();
        let sol_atd = assemble_and_solve(&exp, &set_atd, &fem, opts).unwrap();
        let stats_atd = statistics(&sol_atd);
        let (em_a, ev_a) = relative_errors(&stats_atd, &exact, &fem).unwrap();
        println!(
            "aTD(2,{}): |set|={} mean {:.3e}% var {:.3e}%",
            k,
            set_atd.len(),
            em_a,
            ev_a
        );
    }

    // Largest isoTP for final-ordering comparison.
    let set_tp24 = build_index_set(&IndexSetSpec::IsoTp { n: 2, k: 24 }).unwrap();
    let t0 = std::time::Instant::now();
    let sol_tp24 = assemble_and_solve(&exp, &set_tp24, &fem, opts).unwrap();
    let stats_tp24 = statistics(&sol_tp24);
    let (em24, ev24) = relative_errors(&stats_tp24, &exact, &fem).unwrap();
    println!(
        "isoTP(2,24): |set|={} iters={} mean {:.3e}% var {:.3e}% time={:?}",
        set_tp24.len(),
        sol_tp24.report.iterations,
        em24,
        ev24,
        t0.elapsed()
    );
}
