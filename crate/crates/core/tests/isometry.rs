use std::f64::consts::SQRT_2;

use proptest::prelude::*;
use steering_selftest::experiments::{assemblage_of, chsh_steering_value, ghz_reference};
use steering_selftest::isometry::{ghz_fidelity, singlet_fidelity, swap_apply, swap_apply_all};
use steering_selftest::random::{mixed_sample, perturbed_epr, perturbed_npair, sample_rng, with_nonnegative_chsh, PERTURBATIONS};
use steering_selftest::sdp::{epr_problem, solve};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn swap_isometry_preserves_norm(seed in any::<u64>(), index in 0u64..1000) {
        let e = mixed_sample(seed, index);
        prop_assert!((swap_apply(&e, 0).unwrap().ket.norm() - 1.0).abs() < 1e-10);
        let mut rng = sample_rng(seed, index);
        let pair = perturbed_npair(&mut rng, 0.1, 2).unwrap();
        let post = swap_apply_all(&pair).unwrap();
        prop_assert_eq!(post.ancilla_count, 2);
        prop_assert!((post.ket.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn fidelities_lie_in_unit_interval(seed in any::<u64>(), index in 0u64..1000) {
        let g = singlet_fidelity(&mixed_sample(seed, index)).unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&g));
    }
}

#[test]
fn ghz_fidelity_rejects_wrong_setting() {
    assert!(ghz_fidelity(&ghz_reference(2).unwrap(), 1).is_err());
    assert!(singlet_fidelity(&ghz_reference(2).unwrap()).is_err());
}

#[test]
fn singlet_fidelity_dominates_sdp_bound() {
    let mut worst = f64::INFINITY;
    for i in 0..500u64 {
        let mut rng = sample_rng(99, i);
        let e = with_nonnegative_chsh(perturbed_epr(&mut rng, 2.0 * PERTURBATIONS[(i % 4) as usize], (i % 2) as usize));
        let eta = (2.0 * SQRT_2 - chsh_steering_value(&assemblage_of(&e).unwrap()).unwrap()).max(0.0);
        let bound = solve(&epr_problem(eta).unwrap(), 1e-8).unwrap().value;
        worst = worst.min(singlet_fidelity(&e).unwrap() - bound);
    }
    assert!(worst >= -1e-6, "{worst}");
}
