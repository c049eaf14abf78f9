use proptest::prelude::*;
use steering_selftest::linalg::{
    hermitian_map, operator_norm, partial_trace, pure_trace_distance, trace_distance, trace_norm, Ket, Operator,
};
use steering_selftest::random::{gaussian_vector, haar_ket, random_hermitian, sample_rng};

/// Mixture of three Haar-random pure states with random weights.
fn density(seed: u64, index: u64, dims: &[usize]) -> Operator {
    let mut rng = sample_rng(seed, index);
    let w = gaussian_vector(&mut rng, 3).map(|z| z.norm_sqr());
    let total: f64 = w.iter().sum();
    let mut rho = Operator::zeros(dims);
    for k in 0..3 {
        rho = &rho + &Operator::projector(&haar_ket(&mut rng, dims)).scale_re(w[k] / total);
    }
    rho
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn trace_norm_dominates_bounded_pairings(seed in any::<u64>()) {
        let mut rng = sample_rng(seed, 0);
        let a = random_hermitian(&mut rng, 4).scale_re(3.0);
        let b = random_hermitian(&mut rng, 4);
        prop_assert!(operator_norm(&b) <= 1.0 + 1e-12);
        prop_assert!(trace_norm(&a) >= b.trace_product(&a).norm() - 1e-12);
        let sign = hermitian_map(&a, f64::signum);
        prop_assert!((sign.trace_product(&a).re - trace_norm(&a)).abs() < 1e-10);
    }

    #[test]
    fn partial_trace_contracts_trace_distance(seed in any::<u64>(), keep in 0usize..2) {
        let rho = density(seed, 0, &[2, 2]);
        let sigma = density(seed, 1, &[2, 2]);
        let full = trace_distance(&rho, &sigma).unwrap();
        let reduced = trace_distance(&partial_trace(&rho, &[keep]).unwrap(), &partial_trace(&sigma, &[keep]).unwrap()).unwrap();
        prop_assert!(reduced <= full + 1e-12);
    }

    #[test]
    fn pure_distance_matches_overlap(seed in any::<u64>()) {
        let mut rng = sample_rng(seed, 0);
        let a = haar_ket(&mut rng, &[2, 3]);
        let b = haar_ket(&mut rng, &[2, 3]);
        let f = a.inner(&b).norm();
        let d = pure_trace_distance(&a, &b);
        prop_assert!((d - (1.0 - f * f).max(0.0).sqrt()).abs() < 1e-9);
        let mixed = trace_distance(&Operator::projector(&a), &Operator::projector(&b)).unwrap();
        prop_assert!((d - mixed).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn rank_one_trace_norm_is_product_of_norms(seed in any::<u64>(), n in 2usize..5) {
        let mut rng = sample_rng(seed, 0);
        let u = Ket::from_amps(gaussian_vector(&mut rng, n).as_slice());
        let v = Ket::from_amps(gaussian_vector(&mut rng, n).as_slice());
        let t = Ket::from_amps(gaussian_vector(&mut rng, n).as_slice());
        let diff = &u - &v;
        let lhs = trace_norm(&Operator::outer(&diff, &t));
        prop_assert!((lhs - t.norm() * diff.norm()).abs() <= 1e-10 * (1.0 + lhs));
    }
}
