//! Seeded random states, unitaries and experiments.
//!
//! Ensembles: Haar-random pure states with Haar-random projective
//! measurements, and perturbations of the EPR reference with magnitudes
//! drawn from [`PERTURBATIONS`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::experiments::{epr_reference, npair_reference, Experiment, MeasurementSet, Provider};
use crate::linalg::{self, c, qubit, r, CMat, CVec, Ket, Operator, I};

/// Perturbation magnitudes used by the sweeps.
pub const PERTURBATIONS: [f64; 4] = [0.001, 0.01, 0.05, 0.1];

/// Deterministic generator for sample `index` of a run seeded with `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVec {
    CVec::from_fn(n, |_, _| c(gaussian(rng), gaussian(rng)))
}

/// Haar-random pure state.
pub fn haar_ket<R: Rng + ?Sized>(rng: &mut R, dims: &[usize]) -> Ket {
    let n = dims.iter().product();
    Ket::new(gaussian_vector(rng, n), dims.to_vec()).expect("length matches dims").normalized()
}

/// Haar-random unitary via QR with phase correction.
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Operator {
    let g = CMat::from_fn(n, n, |_, _| c(gaussian(rng), gaussian(rng)));
    let qr = g.qr();
    let (mut q, rr) = qr.unpack();
    for j in 0..n {
        let d = rr[(j, j)];
        let phase = if d.norm() > 0.0 { d / r(d.norm()) } else { r(1.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    Operator::from_matrix(q)
}

/// Random Hermitian matrix with unit operator norm.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Operator {
    let g = CMat::from_fn(n, n, |_, _| c(gaussian(rng), gaussian(rng)));
    let h = Operator::from_matrix((&g + g.adjoint()) * r(0.5));
    let norm = linalg::operator_norm(&h);
    h.scale_re(1.0 / norm)
}

/// Two-outcome projective measurements: each setting splits a Haar basis
/// into a random nontrivial rank.
pub fn random_measurements<R: Rng + ?Sized>(rng: &mut R, dims: &[usize], settings: usize) -> MeasurementSet {
    let n: usize = dims.iter().product();
    let mut projectors = Vec::new();
    for _ in 0..settings {
        let u = haar_unitary(rng, n);
        let rank = if n == 2 { 1 } else { rng.random_range(1..n) };
        let mut e0 = CMat::zeros(n, n);
        for k in 0..rank {
            let col = u.entries().column(k);
            e0 += &col * col.adjoint();
        }
        let e0 = Operator::new(e0, dims.to_vec()).expect("dims match");
        let e1 = &Operator::identity(dims) - &e0;
        projectors.push(vec![e0, e1]);
    }
    MeasurementSet::new(projectors).expect("projectors from a unitary basis")
}

/// Haar state on a qubit client and a provider of dimension `provider_dims`,
/// with Haar two-setting two-outcome measurements.
pub fn haar_experiment<R: Rng + ?Sized>(rng: &mut R, provider_dims: &[usize]) -> Experiment {
    let mut dims = vec![2];
    dims.extend_from_slice(provider_dims);
    let state = haar_ket(rng, &dims);
    let factors = (1..dims.len()).collect();
    let m = random_measurements(rng, provider_dims, 2);
    Experiment::new(state, 1, vec![Provider::new(factors, m)]).expect("valid random experiment")
}

/// The EPR reference with `extra` idle provider qubits, perturbed by `delta`:
/// a Gaussian kick to the state, a rotation exp(iδH) of each measurement, and
/// a Haar-random change of the provider's local basis.
pub fn perturbed_epr<R: Rng + ?Sized>(rng: &mut R, delta: f64, extra: usize) -> Experiment {
    let extra_dims = vec![2; extra];
    let mut ideal = qubit::ebit();
    let mut local = MeasurementSet::qubit_reference();
    if extra > 0 {
        ideal = ideal.tensor(&Ket::basis(&extra_dims, 0));
        local = local.tensor_identity(&extra_dims);
    }
    let dims = ideal.dims().to_vec();
    let kick = Ket::new(gaussian_vector(rng, ideal.len()), dims.clone()).expect("dims").normalized();
    let mut state = (&ideal + &kick.scale(r(delta))).normalized();

    let pdims = local.dims().to_vec();
    let pn: usize = pdims.iter().product();
    let mut projectors = Vec::new();
    for x in 0..local.settings() {
        let h = random_hermitian(rng, pn).with_dims(pdims.clone()).expect("dims");
        let u = linalg::expm_anti_hermitian(&h.scale(I * delta));
        projectors.push((0..local.outcomes()).map(|a| &(&u * local.projector(a, x)) * &u.adjoint()).collect());
    }
    let rotated = MeasurementSet::new(projectors).expect("unitary conjugation keeps projectors");

    let v = haar_unitary(rng, pn).with_dims(pdims.clone()).expect("dims");
    let factors: Vec<usize> = (1..dims.len()).collect();
    state = state.apply(&v, &factors).expect("provider factors");
    let moved: Vec<Vec<Operator>> = rotated
        .projectors()
        .iter()
        .map(|s| s.iter().map(|e| &(&v * e) * &v.adjoint()).collect())
        .collect();
    let m = MeasurementSet::new(moved).expect("unitary conjugation keeps projectors");
    Experiment::new(state, 1, vec![Provider::new(factors, m)]).expect("valid perturbed experiment")
}

/// The n-pair reference perturbed by `delta`: a Gaussian kick to the state
/// and, for each provider, a rotation exp(iδH) of each measurement followed
/// by a Haar-random change of local basis.
pub fn perturbed_npair<R: Rng + ?Sized>(rng: &mut R, delta: f64, n: usize) -> crate::Result<Experiment> {
    let reference = npair_reference(n)?;
    let dims = reference.dims().to_vec();
    let kick = Ket::new(gaussian_vector(rng, reference.state().len()), dims).expect("dims").normalized();
    let mut state = (reference.state() + &kick.scale(r(delta))).normalized();
    let mut providers = Vec::new();
    for p in reference.providers() {
        let local = &p.measurements;
        let v = haar_unitary(rng, 2);
        let mut projectors = Vec::new();
        for x in 0..local.settings() {
            let h = random_hermitian(rng, 2);
            let u = &v * &linalg::expm_anti_hermitian(&h.scale(I * delta));
            projectors.push((0..local.outcomes()).map(|a| &(&u * local.projector(a, x)) * &u.adjoint()).collect());
        }
        state = state.apply(&v, &p.factors)?;
        providers.push(Provider::new(p.factors.clone(), MeasurementSet::new(projectors)?));
    }
    Experiment::new(state, n, providers)
}

/// Sample `index` of the mixed ensemble: every fifth sample is Haar-random,
/// the rest perturb the EPR reference with the magnitudes in [`PERTURBATIONS`].
/// Provider dimensions alternate between one and two qubits.
pub fn mixed_sample(seed: u64, index: u64) -> Experiment {
    let mut rng = sample_rng(seed, index);
    let extra = (index / 5 % 2) as usize;
    match index % 5 {
        0 => haar_experiment(&mut rng, &vec![2; extra + 1]),
        k => perturbed_epr(&mut rng, PERTURBATIONS[(k - 1) as usize], extra),
    }
}

/// Relabels outcomes so the CHSH steering value is nonnegative.
pub fn with_nonnegative_chsh(e: Experiment) -> Experiment {
    let asm = crate::experiments::assemblage_of(&e).expect("valid experiment");
    let value = crate::experiments::chsh_steering_value(&asm).expect("two-setting qubit experiment");
    if value >= 0.0 {
        return e;
    }
    let p = e.provider(0);
    let flipped: Vec<Vec<Operator>> = p.measurements.projectors().iter().map(|s| s.iter().rev().cloned().collect()).collect();
    Experiment::new(
        e.state().clone(),
        e.trusted_count(),
        vec![Provider::new(p.factors.clone(), MeasurementSet::new(flipped).expect("relabelled"))],
    )
    .expect("valid")
}

/// The EPR reference with one measurement rotated by `theta` about the y axis.
pub fn rotated_epr(theta: f64) -> Experiment {
    let e = epr_reference();
    let u = linalg::expm_anti_hermitian(&qubit::y().scale(I * (-theta / 2.0)));
    let m = MeasurementSet::new(vec![
        e.provider(0).measurements.projectors()[0].clone(),
        e.provider(0).measurements.projectors()[1].iter().map(|p| &(&u * p) * &u.adjoint()).collect(),
    ])
    .expect("rotation keeps projectors");
    Experiment::new(e.state().clone(), 1, vec![Provider::new(vec![1], m)]).expect("valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = sample_rng(1, 0);
        let u = haar_unitary(&mut rng, 4);
        assert!((&u * &u.adjoint()).approx_eq(&Operator::identity(&[4]), 1e-12));
    }

    #[test]
    fn samples_are_reproducible() {
        assert_eq!(mixed_sample(7, 3), mixed_sample(7, 3));
        assert_ne!(mixed_sample(7, 3).state(), mixed_sample(7, 4).state());
    }

    #[test]
    fn perturbation_zero_is_locally_equivalent_to_reference() {
        let mut rng = sample_rng(3, 1);
        let e = perturbed_epr(&mut rng, 0.0, 1);
        let a = crate::experiments::assemblage_of(&e).unwrap();
        let b = crate::experiments::assemblage_of(&epr_reference()).unwrap();
        let g = crate::experiments::gap_report(&a, &b).unwrap();
        assert!(g.epsilon() < 1e-12);
    }
}
