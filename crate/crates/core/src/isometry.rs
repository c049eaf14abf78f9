//! The SWAP isometry, self-testing fidelities and distance reports.

use std::f64::consts::FRAC_1_SQRT_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{ghz_state, Experiment, MeasurementSet};
use crate::linalg::{self, qubit, r, CMat, CVec, Ket, Operator, ZERO};
use crate::random::{haar_ket, sample_rng};

/// Minimum number of restarts used by the numeric fidelity optimizer.
pub const MIN_RESTARTS: usize = 64;

/// The state after the SWAP isometry, with one ancilla qubit per provider
/// appended after the original factors.
#[derive(Clone, Debug, PartialEq)]
pub struct PostIsometryState {
    pub ket: Ket,
    pub ancilla_count: usize,
}

impl PostIsometryState {
    /// Factor indices of the ancillas.
    pub fn ancillas(&self) -> Vec<usize> {
        let n = self.ket.dims().len();
        (n - self.ancilla_count..n).collect()
    }
}

fn require_two_by_two(m: &MeasurementSet) -> Result<()> {
    if m.settings() < 2 || m.outcomes() != 2 {
        return Err(Error::Shape(format!(
            "SWAP isometry needs settings 0 and 1 with two outcomes, got {} × {}",
            m.settings(),
            m.outcomes()
        )));
    }
    Ok(())
}

/// V·H·U·H on (provider ⊗ ancilla) with U, V controlled on the ancilla by
/// Z = 2E_{0|0} − I and X = 2E_{0|1} − I.
pub fn swap_unitary(m: &MeasurementSet) -> Result<Operator> {
    require_two_by_two(m)?;
    let dims = m.dims().to_vec();
    let id = Operator::identity(&dims);
    let z = &m.projector(0, 0).scale_re(2.0) - &id;
    let x = &m.projector(0, 1).scale_re(2.0) - &id;
    let p0 = Operator::projector(&qubit::ket0());
    let p1 = Operator::projector(&qubit::ket1());
    let controlled = |op: &Operator| &id.tensor(&p0) + &op.tensor(&p1);
    let h = id.tensor(&qubit::h());
    let u = controlled(&z);
    let v = controlled(&x);
    Ok(&(&(&v * &h) * &u) * &h)
}

/// Appends |0⟩ and applies `unitary` to (provider factors ⊗ new ancilla).
fn apply_with_ancilla(k: &Ket, factors: &[usize], unitary: &Operator) -> Result<Ket> {
    let extended = k.tensor(&qubit::ket0());
    let mut targets = factors.to_vec();
    targets.push(extended.dims().len() - 1);
    extended.apply(unitary, &targets)
}

/// ψ′ = E_{0|0}|ψ⟩|0⟩ + X E_{1|0}|ψ⟩|1⟩ for one provider.
pub fn swap_apply(e: &Experiment, provider: usize) -> Result<PostIsometryState> {
    let p = e
        .providers()
        .get(provider)
        .ok_or_else(|| Error::Shape(format!("no provider {provider}")))?;
    let u = swap_unitary(&p.measurements)?;
    Ok(PostIsometryState { ket: apply_with_ancilla(e.state(), &p.factors, &u)?, ancilla_count: 1 })
}

/// The SWAP isometry applied to every provider in order (ψ″ for two).
pub fn swap_apply_all(e: &Experiment) -> Result<PostIsometryState> {
    let mut k = e.state().clone();
    for p in e.providers() {
        k = apply_with_ancilla(&k, &p.factors, &swap_unitary(&p.measurements)?)?;
    }
    Ok(PostIsometryState { ket: k, ancilla_count: e.providers().len() })
}

/// ⟨target| tr_P(|ψ′⟩⟨ψ′|) |target⟩ with target on (trusted…, ancillas…).
fn overlap_after_swap(e: &Experiment, target: &Ket) -> Result<f64> {
    let post = swap_apply_all(e)?;
    let mut keep = e.trusted_factors();
    keep.extend(post.ancillas());
    let rho = post.ket.reduced(&keep)?;
    let t = Ket::new(target.amps().clone(), rho.dims().to_vec())?;
    Ok((&Operator::projector(&t) * &rho).trace().re)
}

/// Singlet fidelity G = ⟨ψ̃|tr_P(|ψ′⟩⟨ψ′|)|ψ̃⟩.
pub fn singlet_fidelity(e: &Experiment) -> Result<f64> {
    if e.trusted_dim() != 2 || e.providers().len() != 1 {
        return Err(Error::Shape("singlet fidelity needs a qubit client and one provider".into()));
    }
    overlap_after_swap(e, &qubit::ebit())
}

/// GHZ fidelity G₂ (two trusted qubits) or G₁ (one trusted qubit, two providers).
pub fn ghz_fidelity(e: &Experiment, setting: u8) -> Result<f64> {
    let ok = match setting {
        2 => e.trusted_dims() == [2, 2] && e.providers().len() == 1,
        1 => e.trusted_dims() == [2] && e.providers().len() == 2,
        s => return Err(Error::OutOfRange { name: "setting", value: s as f64 }),
    };
    if !ok {
        return Err(Error::Shape(format!("experiment does not match GHZ setting {setting}")));
    }
    overlap_after_swap(e, &ghz_state())
}

/// Distances of the self-testing definition for one isometry and ancilla.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelfTestReport {
    /// D(|Φ⟩⟨Φ|, |A⟩⟨A| ⊗ |ψ̃⟩⟨ψ̃|)
    pub state_distance: f64,
    pub measured_distances: Vec<MeasuredDistance>,
    /// The ancilla |A⟩ as [re, im] amplitudes on the untrusted factors.
    pub ancilla_choice: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasuredDistance {
    pub outcome: usize,
    pub setting: usize,
    /// ‖|Φ,E_{a|x}⟩⟨Φ,E_{a|x}| − |A⟩⟨A| ⊗ Ẽ_{a|x}|ψ̃⟩⟨ψ̃|Ẽ_{a|x}‖₁
    pub distance: f64,
}

impl SelfTestReport {
    pub fn measured(&self, a: usize, x: usize) -> f64 {
        self.measured_distances
            .iter()
            .find(|m| m.outcome == a && m.setting == x)
            .map(|m| m.distance)
            .expect("label present in report")
    }

    pub fn max_measured(&self) -> f64 {
        self.measured_distances.iter().map(|m| m.distance).fold(0.0, f64::max)
    }
}

fn check_reference(e: &Experiment, reference: &Experiment) -> Result<()> {
    if e.trusted_dims() != reference.trusted_dims() {
        return Err(Error::Shape(format!(
            "trusted dims {:?} differ from the reference's {:?}",
            e.trusted_dims(),
            reference.trusted_dims()
        )));
    }
    if e.providers().len() != 1 || reference.providers().len() != 1 || reference.untrusted_dims() != [2] {
        return Err(Error::Shape("need one provider and a reference with a single provider qubit".into()));
    }
    if e.settings() != reference.settings() || e.outcomes() != reference.outcomes() {
        return Err(Error::Shape("measurement shapes differ from the reference".into()));
    }
    Ok(())
}

/// Distances for an arbitrary unitary on (provider ⊗ ancilla qubit) and
/// ancilla state |A⟩ on the untrusted factors.
pub fn report_for(e: &Experiment, reference: &Experiment, unitary: &Operator, ancilla: &Ket) -> Result<SelfTestReport> {
    check_reference(e, reference)?;
    let factors = e.provider(0).factors.clone();
    let nt = e.trusted_count();
    let nu = e.untrusted_dims().len();

    // A ⊗ ψ̃ ordered as (trusted…, untrusted…, ancilla)
    let joint = reference.state().tensor(ancilla);
    let mut order: Vec<usize> = (0..nt).collect();
    order.extend((nt + 1)..(nt + 1 + nu));
    order.push(nt);
    let target = joint.permute(&order)?;
    let anc = nt + nu;

    let phi = apply_with_ancilla(e.state(), &factors, unitary)?;
    let state_distance = linalg::pure_trace_distance(&phi, &target);

    let rm = &reference.provider(0).measurements;
    let mut measured_distances = Vec::new();
    for x in 0..e.settings()[0] {
        for a in 0..e.outcomes()[0] {
            let phys = apply_with_ancilla(&e.measured(&[a], &[x])?, &factors, unitary)?;
            let ideal = target.apply(rm.projector(a, x), &[anc])?;
            measured_distances.push(MeasuredDistance {
                outcome: a,
                setting: x,
                distance: linalg::pure_pair_trace_norm(&phys, &ideal),
            });
        }
    }
    Ok(SelfTestReport {
        state_distance,
        measured_distances,
        ancilla_choice: ancilla.amps().iter().map(|z| [z.re, z.im]).collect(),
    })
}

/// |A⟩ = β^{−1/2}⟨0_C|ψ⟩ with β = ‖⟨0_C|ψ⟩‖².
pub fn theorem_ancilla(e: &Experiment) -> Result<Ket> {
    let zero = Ket::basis(e.trusted_dims(), 0);
    let a = e.state().contract(&zero, &e.trusted_factors())?;
    let beta = a.norm_squared();
    if beta <= f64::MIN_POSITIVE {
        return Err(Error::DegenerateAncilla);
    }
    Ok(a.normalized())
}

/// Distances under the SWAP isometry with the ancilla |A⟩ ∝ ⟨0_C|ψ⟩.
pub fn selftest_report(e: &Experiment, reference: &Experiment) -> Result<SelfTestReport> {
    check_reference(e, reference)?;
    let u = swap_unitary(&e.provider(0).measurements)?;
    report_for(e, reference, &u, &theorem_ancilla(e)?)
}

/// Swaps factor `which` (a qubit) of the provider's space with the ancilla.
pub fn swap_with_ancilla(provider_dims: &[usize], which: usize) -> Result<Operator> {
    if provider_dims.get(which) != Some(&2) {
        return Err(Error::Shape(format!("factor {which} of {provider_dims:?} is not a qubit")));
    }
    let mut dims = provider_dims.to_vec();
    dims.push(2);
    let n: usize = dims.iter().product();
    let mut order: Vec<usize> = (0..dims.len()).collect();
    order.swap(which, dims.len() - 1);
    let mut m = CMat::zeros(n, n);
    for i in 0..n {
        let k = Ket::basis(&dims, i).permute(&order)?;
        let j = k.amps().iter().position(|z| z.re == 1.0).expect("basis vector");
        m[(j, i)] = r(1.0);
    }
    Operator::new(m, dims)
}

/// The (0|0) measured distance for the optimality example under the
/// isometry that swaps P with the ancilla and |A⟩ = |0_P 0_{P′}⟩.
pub fn optimality_construction_distance(eps: f64) -> Result<f64> {
    let e = crate::experiments::example_optimality(eps)?;
    let u = swap_with_ancilla(&[2, 2], 0)?;
    let report = report_for(&e, &crate::experiments::epr_reference(), &u, &Ket::basis(&[2, 2], 0))?;
    Ok(report.measured(0, 0))
}

/// F* = (√λ + √(1−λ))/√2
pub fn appendix_e_fidelity(lambda: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::OutOfRange { name: "lambda", value: lambda });
    }
    Ok(FRAC_1_SQRT_2 * (lambda.sqrt() + (1.0 - lambda).sqrt()))
}

/// Uhlmann fidelity between the client's reduced states.
pub fn uhlmann_fidelity(e: &Experiment, reference: &Experiment) -> Result<f64> {
    let rho = e.state().reduced(&e.trusted_factors())?;
    let sigma = reference.state().reduced(&reference.trusted_factors())?;
    linalg::fidelity(&rho, &sigma)
}

/// max over U on (provider ⊗ ancilla qubit) and |A⟩ of |⟨A|⟨ψ̃|U|ψ⟩|0⟩|,
/// where ψ̃ lives on (trusted…, ancilla qubit).
///
/// Each restart alternates the two exact partial maximizations: U from the
/// polar decomposition for fixed |A⟩, then |A⟩ for fixed U. Restarts run in
/// parallel and are reduced by max, so the result is schedule-independent.
pub fn optimal_fidelity_numeric(e: &Experiment, target: &Ket, restarts: usize, seed: u64) -> Result<f64> {
    let dc = e.trusted_dim();
    if target.len() != dc * 2 {
        return Err(Error::Shape(format!("target of length {} for trusted dim {dc} and one qubit", target.len())));
    }
    let udims = e.untrusted_dims().to_vec();
    let dp: usize = udims.iter().product();
    // ψ as a dc × dp matrix, τ as dc × 2
    let psi = CMat::from_fn(dc, dp, |i, j| e.state().amps()[i * dp + j]);
    let tau = CMat::from_fn(dc, 2, |i, j| target.amps()[i * 2 + j]);

    let restarts = restarts.max(MIN_RESTARTS);
    let best = (0..restarts as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i);
            let a0 = haar_ket(&mut rng, &[dp]);
            alternate(&psi, &tau, a0.amps().clone())
        })
        .reduce(|| 0.0, f64::max);
    Ok(best)
}

/// One local ascent; returns the fidelity reached.
fn alternate(psi: &CMat, tau: &CMat, mut a: CVec) -> f64 {
    let (dc, dp) = (psi.nrows(), psi.ncols());
    let n = dp * 2;
    let mut last = -1.0;
    let mut value = 0.0;
    for _ in 0..2000 {
        // X = tr_C(|ψ,0⟩⟨A,ψ̃|) on (P ⊗ anc)
        let mut x = CMat::zeros(n, n);
        for c in 0..dc {
            for p in 0..dp {
                let left = psi[(c, p)];
                if left == ZERO {
                    continue;
                }
                for q in 0..dp {
                    for b in 0..2 {
                        x[(p * 2, q * 2 + b)] += left * (a[q] * tau[(c, b)]).conj();
                    }
                }
            }
        }
        // U maximizing |tr(U X)| is V W† for X = W S V†
        let svd = x.svd(true, true);
        let w = svd.u.expect("requested");
        let vt = svd.v_t.expect("requested");
        let u = vt.adjoint() * w.adjoint();
        // v = Σ_c (I ⊗ ⟨τ_c|) U |φ_c, 0⟩
        let mut v = CVec::zeros(dp);
        for c in 0..dc {
            for q in 0..dp {
                for b in 0..2 {
                    let mut acc = ZERO;
                    for p in 0..dp {
                        acc += u[(q * 2 + b, p * 2)] * psi[(c, p)];
                    }
                    v[q] += tau[(c, b)].conj() * acc;
                }
            }
        }
        value = v.norm();
        if value <= 0.0 {
            return 0.0;
        }
        a = v / r(value);
        if (value - last).abs() < 1e-15 {
            break;
        }
        last = value;
    }
    value
}

/// Numeric maximum of the fidelity to the ebit over isometries with one
/// ancilla qubit.
pub fn appendix_e_numeric(e: &Experiment, restarts: usize, seed: u64) -> Result<f64> {
    if e.trusted_dim() != 2 {
        return Err(Error::Shape("need a qubit client".into()));
    }
    optimal_fidelity_numeric(e, &qubit::ebit(), restarts, seed)
}
