//! One PASS/FAIL line per acceptance criterion.
//!
//! Criteria that cannot hold as stated are still computed and printed as FAIL;
//! the test asserts that exactly those stay in the expected-failure list.

use std::collections::BTreeSet;

use blab_core::bundles::{h_space, BundleSpec, Potential, SectionOfV};
use blab_core::dolbeault::{
    build_dolbeault, kernel_basis, kernel_degree_split, projector_distance, spectral_gap, spectrum_d2,
};
use blab_core::geometry::Symbol;
use blab_core::modules_k::{
    bott_projector, comparator, idempotent_trace_check, intertwining_residual, lift_idempotent,
    morphism_pushforward, rank_polynomial, spinor_rank_gap, BlockMorphism,
};
use blab_core::numerics::{loglog_slope, max_abs, C64};
use blab_core::quantization::{
    gq_toeplitz_gap, module_covariance_defect, norm_convergence, trace_asymptotics, tuynman_residual,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Criteria that fail for reasons recorded in the decisions ledger.
const EXPECTED_FAILURES: [usize; 2] = [9, 11];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn perturbed(degrees: &[i32], band: usize, amplitude: f64, compatible: bool, seed: u64) -> BundleSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = Potential::random(&mut rng, degrees, band, amplitude, compatible);
    BundleSpec::sum(degrees).with_potential(p, "perturbed").unwrap()
}

fn dimension_formula() -> Outcome {
    let mut worst = 0i64;
    for n in 1..=40usize {
        let direct = h_space(n).dim() as i64;
        let kernel = kernel_basis(&build_dolbeault(&BundleSpec::trivial(), n, None).unwrap(), None).unwrap().dim() as i64;
        worst = worst.max((direct - (n as i64 + 1)).abs()).max((kernel - (n as i64 + 1)).abs());
    }
    outcome(worst == 0, format!("max |dim H_N - (N+1)| over N in [1,40] = {worst}"))
}

fn rank_formula() -> Outcome {
    let mut bundles: Vec<BundleSpec> = (-3..=3).map(BundleSpec::line).collect();
    bundles.push(BundleSpec::sum(&[1, -1]));
    let ns: Vec<usize> = (1..=20).collect();
    let mut ok = true;
    let mut notes = Vec::new();
    for v in &bundles {
        let poly = rank_polynomial(v.rank() as i64, v.total_degree() as i64);
        let measured: Vec<(usize, i64)> = ns
            .par_iter()
            .map(|&n| {
                let d = build_dolbeault(v, n, None).unwrap();
                (n, kernel_basis(&d, None).unwrap().dim() as i64)
            })
            .collect();
        let mut threshold = None;
        for &(n, m) in measured.iter().rev() {
            if m != poly.value(n) {
                break;
            }
            threshold = Some(n);
        }
        let max_p = v.degrees().iter().copied().max().unwrap().max(1) as usize;
        let deviations: Vec<String> = measured
            .iter()
            .filter(|&&(n, m)| m != poly.value(n))
            .map(|&(n, m)| format!("N={n}:{:+}", m - poly.value(n)))
            .collect();
        ok &= threshold.is_some_and(|t| t <= max_p);
        notes.push(format!("{} N*={:?} dev[{}]", v.label(), threshold, deviations.join(",")));
    }
    outcome(ok, notes.join("; "))
}

fn spectral_gap_bound() -> Outcome {
    let mut ok = true;
    let mut worst_margin = f64::INFINITY;
    let mut c_trivial = 0.0f64;
    for n in 2..=20usize {
        let d = build_dolbeault(&BundleSpec::trivial(), n, None).unwrap();
        let c = d.weitzenbock().constant;
        c_trivial = c_trivial.max(c);
        let gap = spectral_gap(&spectrum_d2(&d).unwrap(), d.default_threshold()).unwrap();
        ok &= c < 1.0 && gap >= n as f64 - c;
        worst_margin = worst_margin.min(gap - (n as f64 - c));
    }
    let v = perturbed(&[3, 2], 1, 0.3, true, 11);
    let c_pert = v_constant(&v);
    let mut pert_margin = f64::INFINITY;
    for n in 2..=20usize {
        if (n as f64) <= c_pert {
            continue;
        }
        let d = build_dolbeault(&v, n, None).unwrap();
        let gap = spectral_gap(&spectrum_d2(&d).unwrap(), d.default_threshold()).unwrap();
        pert_margin = pert_margin.min(gap - (n as f64 - c_pert));
    }
    ok &= pert_margin >= -1e-9;
    outcome(
        ok,
        format!(
            "trivial: C={c_trivial:.3}, min(gap-(N-C))={worst_margin:.3}; perturbed O(3)+O(2): C={c_pert:.3}, min(gap-(N-C))={pert_margin:.3}"
        ),
    )
}

fn v_constant(v: &BundleSpec) -> f64 {
    blab_core::dolbeault::weitzenbock_constant(v)
}

fn kernel_degrees() -> Outcome {
    let v = perturbed(&[1, -1], 2, 0.3, false, 5);
    let w = build_dolbeault(&v, 4, None).unwrap().weitzenbock();
    let start = 4usize.max((w.constant + w.skew_norm * w.skew_norm).ceil() as usize + 1);
    let rows: Vec<_> = (start..=20usize)
        .into_par_iter()
        .map(|n| (n, kernel_degree_split(&build_dolbeault(&v, n, None).unwrap()).unwrap()))
        .collect();
    let ok = !v.is_self_adjoint() && rows.iter().all(|(_, s)| s.dim_odd == 0 && s.min_degree0_norm > 1e-6);
    let min_norm = rows.iter().map(|(_, s)| s.min_degree0_norm).fold(f64::INFINITY, f64::min);
    outcome(
        ok,
        format!(
            "C={:.3}, |B|^2={:.3}, N in [{start},20]: odd dims {:?}, min |psi_0|={min_norm:.3e}",
            w.constant,
            w.skew_norm * w.skew_norm,
            rows.iter().map(|(_, s)| s.dim_odd).collect::<BTreeSet<_>>()
        ),
    )
}

fn covariance_bound() -> Outcome {
    let v = BundleSpec::line(1);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let section = SectionOfV::random(&mut rng, &v, 2);
    let f = Symbol::cos_theta();
    let ns = [4usize, 8, 16, 32, 64];
    let rows: Vec<_> = ns.par_iter().map(|&n| module_covariance_defect(&f, &section, &v, n).unwrap()).collect();
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.defect).collect();
    let slope = loglog_slope(&xs, &ys);
    let within = rows.iter().all(|r| r.within());
    outcome(
        within && slope <= -0.45 + 0.05,
        format!(
            "all defects within bound: {within}; slope={slope:.3}; defect/bound at N=64: {:.3e}/{:.3e}",
            ys[4], rows[4].bound
        ),
    )
}

fn norm_convergence_check() -> Outcome {
    let ns: Vec<usize> = (1..=60).collect();
    let table = norm_convergence(&Symbol::cos_theta(), &ns);
    let oracle_err = table
        .rows
        .iter()
        .map(|&(n, norm)| ((norm - 1.0).abs() - 2.0 / (n as f64 + 2.0)).abs())
        .fold(0.0, f64::max);
    let at_60 = (table.rows.last().unwrap().1 - 1.0).abs();
    outcome(
        oracle_err < 1e-9 && at_60 <= 0.05,
        format!("max deviation from 2/(N+2) = {oracle_err:.1e}; |‖T_60‖-1| = {at_60:.4}"),
    )
}

fn tuynman_identity() -> Outcome {
    let mut worst = 0.0f64;
    for l in 1..=2 {
        for m in -l..=l {
            let f = Symbol::harmonic(l, m).unwrap();
            for n in 1..=20 {
                worst = worst.max(tuynman_residual(&f, n).unwrap());
            }
        }
    }
    outcome(worst < 1e-8, format!("max residual over Y_1m, Y_2m, N in [1,20] = {worst:.1e}"))
}

fn gq_gap() -> Outcome {
    let ns = [8usize, 16, 32, 64, 128];
    let f = Symbol::cos_theta();
    let rows: Vec<_> = ns.iter().map(|&n| gq_toeplitz_gap(&f, n).unwrap()).collect();
    let g = Symbol::real_harmonic(2, 1).unwrap().add(&Symbol::cos_theta());
    let extra_within = ns.iter().all(|&n| {
        let r = gq_toeplitz_gap(&g, n).unwrap();
        r.measured <= r.bound
    });
    let within = rows.iter().all(|r| r.measured <= r.bound);
    let slope = loglog_slope(
        &ns.iter().map(|&n| n as f64).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.measured).collect::<Vec<_>>(),
    );
    outcome(
        within && extra_within && (slope + 1.0).abs() <= 0.1,
        format!("within bound: cos {within}, Y_21+cos {extra_within}; slope={slope:.3}"),
    )
}

fn projector_drift() -> Outcome {
    let w = BundleSpec::line(2);
    let v = perturbed(&[2], 1, 0.2, true, 3);
    let ns = [8usize, 16, 32, 64];
    let rows: Vec<_> = ns.iter().map(|&n| projector_distance(&v, &w, n, None).unwrap()).collect();
    let bound_ok = rows.iter().filter(|r| r.applicable).all(|r| r.measured <= r.bound);
    let contour_ok = rows.iter().filter(|r| r.applicable).all(|r| r.measured <= r.contour_bound);
    let slope = loglog_slope(
        &ns.iter().map(|&n| n as f64).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.measured).collect::<Vec<_>>(),
    );
    let cells: Vec<String> =
        rows.iter().map(|r| format!("N={}: {:.3e} vs {:.3e}", r.n, r.measured, r.bound)).collect();
    outcome(
        bound_ok && slope <= -0.45,
        format!(
            "printed bound holds: {bound_ok} [{}]; with contour length: {contour_ok}; slope={slope:.3}",
            cells.join(", ")
        ),
    )
}

fn comparator_check() -> Outcome {
    let w = BundleSpec::line(1);
    let v = perturbed(&[1], 2, 0.3, false, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let section = SectionOfV::random(&mut rng, &w, 2);
    let ns = [4usize, 8, 16, 32];
    let rows: Vec<_> = ns
        .par_iter()
        .map(|&n| {
            let c = comparator(&v, &w, n).unwrap();
            let (res, _) = c.residual(&section).unwrap();
            (n, c.projector_distance, c.sigma_min, c.bijective, res)
        })
        .collect();
    let bij = rows.iter().filter(|r| r.1 < 0.5).all(|r| r.3);
    let residuals: Vec<f64> = rows.iter().map(|r| r.4).collect();
    let decreasing = residuals.windows(2).all(|w| w[1] < w[0]);
    let slope = loglog_slope(&ns.iter().map(|&n| n as f64).collect::<Vec<_>>(), &residuals);
    let min_sigma = rows.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
    outcome(
        bij && decreasing && slope < 0.0,
        format!("bijective where ‖ΔΠ‖<0.5: {bij} (min sigma {min_sigma:.3}); residual slope={slope:.3}"),
    )
}

fn idempotent_lifting() -> Outcome {
    let ns: Vec<usize> = (1..=40).collect();
    let lift = lift_idempotent(&bott_projector(), &ns, 1e-3).unwrap();
    let check = idempotent_trace_check(&lift);
    let idem = lift.per_n.values().map(|e| e.idempotency).fold(0.0, f64::max);
    let distance = lift.per_n[&40].distance;
    let threshold_ok = check.threshold.is_some_and(|t| t <= 3);
    outcome(
        idem < 1e-10 && threshold_ok && distance < 1e-3,
        format!(
            "max ‖ẽ²-ẽ‖={idem:.1e}; trace matches {:?} from N*={:?}; ‖T_40(e)-ẽ_40‖={distance:.4} (target 1e-3)",
            lift.polynomial.coeffs, check.threshold
        ),
    )
}

fn trace_asymptotics_check() -> Outcome {
    let f = Symbol::constant(1.0)
        .add(&Symbol::cos_theta().scale(0.7))
        .add(&Symbol::real_harmonic(2, -1).unwrap().scale(0.4));
    let ns: Vec<usize> = (10..=40).collect();
    let fit = trace_asymptotics(&f, &ns);
    outcome(
        fit.relative_error < 0.01,
        format!("leading={:.6}, (1/2π)∫f ω={:.6}, rel err={:.1e}", fit.leading, fit.target, fit.relative_error),
    )
}

fn spinor_gap() -> Outcome {
    let ns: Vec<usize> = (2..=40).collect();
    let rows = spinor_rank_gap(&ns).unwrap();
    let ok = rows.iter().all(|r| r.gap == 2 && r.kernel_bound == 2 * (r.n + 1));
    outcome(ok, format!("gaps {:?}; kernel bound at N=40: {}", rows.iter().map(|r| r.gap).collect::<BTreeSet<_>>(), rows.last().unwrap().kernel_bound))
}

fn functor_identities() -> Outcome {
    let n = 6;
    let c = |re: f64, im: f64| C64::new(re, im);
    let v = BundleSpec::line(1);
    let w = BundleSpec::sum(&[1, 0]);
    let inc = BlockMorphism { phi: vec![vec![c(1.0, 0.0)], vec![c(0.0, 0.0)]] };
    let u = BundleSpec::sum(&[1, 1]);
    let phi = BlockMorphism { phi: vec![vec![c(1.0, 0.5), c(0.0, 2.0)], vec![c(-1.0, 0.0), c(0.3, 0.0)]] };
    let psi = BlockMorphism { phi: vec![vec![c(0.2, -1.0), c(1.0, 0.0)], vec![c(0.0, 0.0), c(2.0, 1.0)]] };
    let mut rng = ChaCha8Rng::seed_from_u64(14);

    let p_inc = morphism_pushforward(&inc, &v, &w, n).unwrap();
    let p_phi = morphism_pushforward(&phi, &u, &u, n).unwrap();
    let p_psi = morphism_pushforward(&psi, &u, &u, n).unwrap();
    let residual = intertwining_residual(&p_inc, &inc, &SectionOfV::random(&mut rng, &v, 3), &w)
        .unwrap()
        .max(intertwining_residual(&p_phi, &phi, &SectionOfV::random(&mut rng, &u, 3), &u).unwrap());

    let p_comp = morphism_pushforward(&psi.after(&phi), &u, &u, n).unwrap();
    let composed = p_phi.r.matmul(&p_psi.r).unwrap();
    let comp_err = max_abs((p_comp.r.mat() - composed.mat()).as_ref());

    let p_id = morphism_pushforward(&BlockMorphism::identity(2), &u, &u, n).unwrap();
    let id_err = max_abs((p_id.r.mat() - faer::Mat::<C64>::identity(p_id.r.rows(), p_id.r.cols())).as_ref());

    let p_sum = morphism_pushforward(&phi.direct_sum(&inc), &BundleSpec::sum(&[1, 1, 1]), &BundleSpec::sum(&[1, 1, 1, 0]), n)
        .unwrap();
    let (a, b) = (p_phi.r.mat(), p_inc.r.mat());
    let sum_err = (0..p_sum.r.rows())
        .flat_map(|i| (0..p_sum.r.cols()).map(move |j| (i, j)))
        .map(|(i, j)| {
            let want = match (i < a.nrows(), j < a.ncols()) {
                (true, true) => a[(i, j)],
                (false, false) => b[(i - a.nrows(), j - a.ncols())],
                _ => C64::default(),
            };
            (p_sum.r.get(i, j) - want).norm()
        })
        .fold(0.0, f64::max);
    let exact = comp_err.max(id_err).max(sum_err);
    outcome(
        residual < 1e-9 && exact < 1e-12,
        format!("intertwining residual={residual:.1e}; identity/composition/direct-sum error={exact:.1e}"),
    )
}

#[test]
fn acceptance() {
    let criteria: Vec<(usize, &str, fn() -> Outcome)> = vec![
        (1, "dimension formula", dimension_formula),
        (2, "rank formula", rank_formula),
        (3, "spectral gap", spectral_gap_bound),
        (4, "kernel degree structure", kernel_degrees),
        (5, "covariance bound", covariance_bound),
        (6, "norm convergence", norm_convergence_check),
        (7, "Tuynman identity", tuynman_identity),
        (8, "GQ-Toeplitz gap", gq_gap),
        (9, "projector drift", projector_drift),
        (10, "comparator", comparator_check),
        (11, "idempotent lifting", idempotent_lifting),
        (12, "trace asymptotics", trace_asymptotics_check),
        (13, "spinor gap", spinor_gap),
        (14, "functor identities", functor_identities),
    ];
    let results: Vec<(usize, &str, Outcome)> = criteria.into_par_iter().map(|(id, name, run)| (id, name, run())).collect();
    let mut failed = BTreeSet::new();
    for (id, name, out) in &results {
        println!("{} {id:>2} {name}: {}", if out.pass { "PASS" } else { "FAIL" }, out.detail);
        if !out.pass {
            failed.insert(*id);
        }
    }
    let expected: BTreeSet<usize> = EXPECTED_FAILURES.into_iter().collect();
    assert_eq!(failed, expected, "failing criteria differ from the documented expected failures");
}
