use std::f64::consts::SQRT_2;

use proptest::prelude::*;
use steering_selftest::experiments::{
    assemblage_of, chsh_steering_value, epr_reference, ghz_mermin_value, ghz_reference, Experiment, MeasurementSet, Provider,
};
use steering_selftest::isometry::{ghz_fidelity, singlet_fidelity};
use steering_selftest::linalg::{qubit, CMat, Ket, Operator};
use steering_selftest::random::{mixed_sample, perturbed_epr, sample_rng, with_nonnegative_chsh, PERTURBATIONS};
use steering_selftest::sdp::ipm::SolveStatus;
use steering_selftest::sdp::problem::block_labels;
use steering_selftest::sdp::sweep::{write_csv, CSV_HEADER};
use steering_selftest::sdp::{
    distance_bound, epr_functional, epr_objective, epr_problem, epr_problem_generic, ghz_problem, solve, sweep, Ipm, MomentLayout,
    Scenario,
};

fn eta_of(e: &Experiment) -> f64 {
    2.0 * SQRT_2 - chsh_steering_value(&assemblage_of(e).unwrap()).unwrap()
}

fn block(m: &CMat, j: usize, k: usize) -> Operator {
    Operator::from_matrix(m.view((2 * j, 2 * k), (2, 2)).into_owned())
}

/// Basis {cos(t/2)|0⟩ + sin(t/2)|1⟩, −sin(t/2)|0⟩ + cos(t/2)|1⟩} of cos t Z + sin t X.
fn xz_basis(t: f64) -> Vec<Ket> {
    let (c, s) = ((t / 2.0).cos(), (t / 2.0).sin());
    vec![Ket::from_real(&[c, s]), Ket::from_real(&[-s, c])]
}

/// A real two-qubit experiment at η ≈ 0.1 found by direct minimization of G;
/// it attains the SDP value.
fn low_fidelity_witness() -> Experiment {
    let state = Ket::from_real(&[1.243119, -0.016848, 0.016848, 1.243119]).with_dims(vec![2, 2]).unwrap().normalized();
    let m = MeasurementSet::from_bases(&[xz_basis(-0.348704), xz_basis(1.7412)]).unwrap();
    Experiment::new(state, 1, vec![Provider::new(vec![1], m)]).unwrap()
}

#[test]
fn ideal_moments_reach_the_maxima() {
    let layout = MomentLayout::single(2);
    let g = layout.gamma_from_experiment(&epr_reference()).unwrap();
    let p = epr_problem(0.0).unwrap();
    assert!((p.objective_value(&g) - 1.0).abs() < 1e-12);
    assert!((p.functional_value(&g) - 2.0 * SQRT_2).abs() < 1e-12);
    assert!(p.is_feasible(&g, 1e-10));

    for setting in [1u8, 2] {
        let e = ghz_reference(setting).unwrap();
        let p = ghz_problem(setting, 0.0).unwrap();
        let g = p.layout.gamma_from_experiment(&e).unwrap();
        assert!((p.objective_value(&g) - 1.0).abs() < 1e-12, "setting {setting}");
        assert!((p.functional_value(&g) - 4.0).abs() < 1e-12, "setting {setting}");
        assert!(p.is_feasible(&g, 1e-10));
    }
}

#[test]
fn printed_matrices() {
    let m = epr_objective();
    assert!(block(&m, 0, 0).approx_eq(&Operator::diag(&[0.0, 0.5]), 0.0));
    assert!(block(&m, 0, 3).approx_eq(&Operator::from_real_rows(&[&[0.0, 0.0], &[1.0, 0.0]]), 0.0));
    assert!(block(&m, 1, 1).approx_eq(&qubit::z().scale_re(0.5), 0.0));
    assert!(block(&m, 3, 3).approx_eq(&qubit::x().scale_re(-1.0), 0.0));
    assert!(block(&m, 2, 2).approx_eq(&Operator::zeros(&[2]), 0.0));
    let n = epr_functional();
    assert!(block(&n, 0, 0).approx_eq(&(&qubit::x() + &qubit::z()).scale_re(-SQRT_2), 1e-15));
    assert!(block(&n, 2, 2).approx_eq(&qubit::x().scale_re(2.0 * SQRT_2), 1e-15));
}

#[test]
fn block_labels_follow_gram_convention() {
    let labels = block_labels(&MomentLayout::single(2));
    assert_eq!(labels[&(0, 0)], "I");
    assert_eq!(labels[&(1, 2)], "(E00E01)†");
    assert_eq!(labels[&(0, 3)], "E00E01");
    assert_eq!(labels[&(3, 3)], "E00E01E00");
}

#[test]
fn literal_and_generic_matrices_agree_on_moments() {
    for i in 0..20 {
        let e = mixed_sample(3, i);
        let eta = eta_of(&with_nonnegative_chsh(e.clone())).min(2.0 * SQRT_2);
        let a = epr_problem(eta.max(0.0)).unwrap();
        let b = epr_problem_generic(eta.max(0.0)).unwrap();
        let g = a.layout.gamma_from_experiment(&e).unwrap();
        assert!((a.objective_value(&g) - b.objective_value(&g)).abs() < 1e-12);
        assert!((a.functional_value(&g) - b.functional_value(&g)).abs() < 1e-12);
        assert!((a.objective_value(&g) - singlet_fidelity(&e).unwrap()).abs() < 1e-12);
        assert!((a.functional_value(&g) - (2.0 * SQRT_2 - eta_of(&e))).abs() < 1e-12);
    }
    for eta in [0.0, 0.1, 0.3] {
        let x = solve(&epr_problem(eta).unwrap(), 1e-8).unwrap();
        let y = solve(&epr_problem_generic(eta).unwrap(), 1e-8).unwrap();
        assert!((x.value - y.value).abs() < 1e-7, "{eta}: {} vs {}", x.value, y.value);
    }
}

#[test]
fn ghz_objective_matches_isometry_fidelity() {
    for setting in [1u8, 2] {
        let e = ghz_reference(setting).unwrap();
        let p = ghz_problem(setting, 0.5).unwrap();
        let g = p.layout.gamma_from_experiment(&e).unwrap();
        assert!((p.objective_value(&g) - ghz_fidelity(&e, setting).unwrap()).abs() < 1e-12);
        let trb = ghz_mermin_value(&assemblage_of(&e).unwrap(), setting).unwrap();
        assert!((p.functional_value(&g) - trb).abs() < 1e-12);
    }
}

#[test]
fn zero_deficit_endpoints() {
    let epr = solve(&epr_problem(0.0).unwrap(), 1e-8).unwrap();
    assert!(epr.value >= 1.0 - 1e-6 && epr.value <= 1.0 + 1e-6, "{epr:?}");
    for setting in [1u8, 2] {
        let r = solve(&ghz_problem(setting, 0.0).unwrap(), 1e-8).unwrap();
        assert!((r.value - 1.0).abs() < 1e-5, "setting {setting}: {r:?}");
    }
}

#[test]
fn epr_values_frozen() {
    // cross-checked against an independent conic solver and against direct
    // minimization over two-qubit experiments
    for (eta, expected) in [(0.05, 0.954409), (0.1, 0.910185), (0.2, 0.825757), (0.4, 0.672431)] {
        let r = solve(&epr_problem(eta).unwrap(), 1e-8).unwrap();
        assert!((r.value - expected).abs() < 2e-6, "{eta}: {}", r.value);
        let real = solve(&epr_problem(eta).unwrap().real_restricted(), 1e-8).unwrap();
        assert!((real.value - r.value).abs() < 1e-6);
    }
}

#[test]
fn qubit_witness_attains_the_bound_below_the_fitted_line() {
    let e = low_fidelity_witness();
    let eta = eta_of(&e);
    assert!((eta - 0.1).abs() < 1e-5, "{eta}");
    let g = singlet_fidelity(&e).unwrap();
    let bound = solve(&epr_problem(eta).unwrap(), 1e-8).unwrap().value;
    assert!(g >= bound - 1e-6);
    assert!(g - bound < 1e-5, "{g} vs {bound}");
    assert!(g < 1.0 - eta / SQRT_2 - 0.015);
}

#[test]
fn soundness_on_random_experiments() {
    let mut worst = f64::INFINITY;
    for i in 0..200u64 {
        let mut rng = sample_rng(2024, i);
        let delta = PERTURBATIONS[(i % 4) as usize] * 3.0;
        let e = with_nonnegative_chsh(perturbed_epr(&mut rng, delta, (i % 2) as usize));
        let eta = eta_of(&e).max(0.0);
        let p = epr_problem(eta).unwrap();
        let g = p.layout.gamma_from_experiment(&e).unwrap();
        assert!(p.is_feasible(&g, 1e-9), "sample {i}");
        let fidelity = singlet_fidelity(&e).unwrap();
        let r = solve(&p, 1e-8).unwrap();
        assert_ne!(r.status, SolveStatus::Infeasible);
        worst = worst.min(fidelity - r.value);
    }
    assert!(worst >= -1e-6, "worst margin {worst}");
}

#[test]
fn ghz_ordering() {
    for eta in [0.0, 0.25, 0.5, 1.0] {
        let g2 = solve(&ghz_problem(2, eta).unwrap(), 1e-8).unwrap().value;
        let g1 = solve(&ghz_problem(1, eta).unwrap(), 1e-8).unwrap().value;
        assert!(g2 >= g1 - 1e-6, "{eta}: {g2} < {g1}");
    }
}

#[test]
fn normalization_is_required() {
    let r = solve(&epr_problem(0.0).unwrap().without_normalization(), 1e-8).unwrap();
    assert!(r.value < 0.5, "{r:?}");
}

#[test]
fn block_transposed_gamma_is_not_psd_in_general() {
    let layout = MomentLayout::single(2);
    let mut worst = 0.0f64;
    for i in 0..50 {
        let g = layout.gamma_from_experiment(&mixed_sample(9, i)).unwrap();
        let swapped = CMat::from_fn(8, 8, |a, b| g[((b / 2) * 2 + a % 2, (a / 2) * 2 + b % 2)]);
        worst = worst.min(Operator::from_matrix(swapped).min_eigenvalue());
        assert!(Operator::from_matrix(g).min_eigenvalue() > -1e-12);
    }
    assert!(worst < -1e-3, "{worst}");
}

#[test]
fn out_of_range_inputs() {
    assert!(epr_problem(-0.1).is_err());
    assert!(epr_problem(3.0).is_err());
    assert!(ghz_problem(3, 0.1).is_err());
    assert!(solve(&epr_problem(0.1).unwrap(), 0.0).is_err());
}

#[test]
fn dump_is_sdpa_sparse() {
    let p = epr_problem(0.1).unwrap();
    let compiled = p.compile();
    let text = compiled.dump(&p.layout);
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('*')).collect();
    assert_eq!(body[0].parse::<usize>().unwrap(), compiled.variables.len());
    assert_eq!(body[1], "2");
    assert_eq!(body[2], "16 1");
    assert_eq!(body[3].split_whitespace().count(), compiled.variables.len());
    for line in &body[4..] {
        let f: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(f.len(), 5);
        let (r, c): (usize, usize) = (f[2].parse().unwrap(), f[3].parse().unwrap());
        assert!(r <= c);
    }
    assert!(text.contains("* label 0 I"));
    let real = p.clone().real_restricted().compile();
    assert!(real.variables.len() < compiled.variables.len());
    assert_eq!(real.sdpa.blocks, vec![8, 1]);
}

#[test]
fn sweep_rows_and_csv() {
    let etas = [0.0, 0.1, 0.2];
    let rows = sweep(Scenario::Epr, &etas, 1e-8, Some(2), &Ipm::default()).unwrap();
    assert_eq!(rows.len(), 3);
    for w in rows.windows(2) {
        assert!(w[1].lower_bound <= w[0].lower_bound + 1e-8);
    }
    for r in &rows {
        assert!((r.distance_bound - distance_bound(r.lower_bound)).abs() < 1e-15);
    }
    let mut a = Vec::new();
    let mut b = Vec::new();
    write_csv(&rows, &mut a, true).unwrap();
    let again = sweep(Scenario::Epr, &etas, 1e-8, Some(1), &Ipm::default()).unwrap();
    write_csv(&again, &mut b, true).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    assert!(text.lines().nth(1).unwrap().ends_with(",0.000000"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gamma_is_psd_and_respects_classes(seed in 0u64..1_000_000, index in 0u64..100) {
        let e = mixed_sample(seed, index);
        let layout = MomentLayout::single(2);
        let g = layout.gamma_from_experiment(&e).unwrap();
        prop_assert!(layout.class_defect(&g) < 1e-10);
        let h = Operator::from_matrix(g);
        prop_assert!(h.is_hermitian(1e-12));
        prop_assert!(h.min_eigenvalue() > -1e-10);
    }

    #[test]
    fn bound_never_exceeds_realized_fidelity(seed in 0u64..1_000_000, k in 0usize..4) {
        let mut rng = sample_rng(seed, 0);
        let e = with_nonnegative_chsh(perturbed_epr(&mut rng, PERTURBATIONS[k] * 3.0, 0));
        let eta = eta_of(&e).max(0.0);
        let r = solve(&epr_problem(eta).unwrap(), 1e-8).unwrap();
        prop_assert!(singlet_fidelity(&e).unwrap() >= r.value - 1e-6);
    }
}
