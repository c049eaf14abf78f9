//! Closed-form robustness bounds and numeric checks of the lemmas behind them.
//!
//! Each `*_residuals` function evaluates the vector norms that a lemma bounds
//! on one experiment and packages them with the analytic bound in a
//! [`BoundReport`]. The sweep functions run those checks over seeded random
//! ensembles in parallel.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{
    appd_steering_value, assemblage_of, epr_reference, example_optimality, example_three_dim, gap_report, labels,
    npair_reference, three_dim_reference, Experiment,
};
use crate::isometry::{optimal_fidelity_numeric, report_for, selftest_report};
use crate::linalg::{self, Ket, Operator};
use crate::random::{self, sample_rng};

/// Slack allowed when comparing a residual with its bound.
pub const BOUND_TOL: f64 = 1e-9;

/// Slack allowed in the rank-1 trace-norm comparison.
pub const LEMMA1_TOL: f64 = 1e-10;

fn nonnegative(name: &'static str, value: f64) -> Result<()> {
    if value >= 0.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange { name, value })
    }
}

/// 24√ε + ε
pub fn thm1_f(eps: f64) -> Result<f64> {
    nonnegative("eps", eps)?;
    Ok(24.0 * eps.sqrt() + eps)
}

/// 12√ε + ε, the measured-distance bound for the x = 0 entries.
pub fn thm1_x0_f(eps: f64) -> Result<f64> {
    nonnegative("eps", eps)?;
    Ok(12.0 * eps.sqrt() + eps)
}

/// 8√ε + 4ε√ε + ε, the bound on the state distance.
pub fn thm1_state_f(eps: f64) -> Result<f64> {
    nonnegative("eps", eps)?;
    let s = eps.sqrt();
    Ok(8.0 * s + 4.0 * eps * s + eps)
}

/// 13√η
pub fn appd_f(eta: f64) -> Result<f64> {
    nonnegative("eta", eta)?;
    Ok(13.0 * eta.sqrt())
}

/// √(2ε′/3)
pub fn sec22_lower(epsp: f64) -> Result<f64> {
    nonnegative("epsp", epsp)?;
    Ok((2.0 * epsp / 3.0).sqrt())
}

/// √ε
pub fn sec23_lower(eps: f64) -> Result<f64> {
    nonnegative("eps", eps)?;
    Ok(eps.sqrt())
}

/// Residuals of one lemma or theorem against its analytic bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub epsilon_or_eta: f64,
    pub bound_value: f64,
    pub residuals: Vec<Residual>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub outcomes: Vec<usize>,
    pub settings: Vec<usize>,
    pub value: f64,
}

impl BoundReport {
    pub fn new(name: &str, epsilon_or_eta: f64, bound_value: f64, residuals: Vec<Residual>) -> Self {
        let pass = residuals.iter().all(|r| r.value <= bound_value + BOUND_TOL);
        Self { name: name.to_string(), epsilon_or_eta, bound_value, residuals, pass }
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().map(|r| r.value).fold(0.0, f64::max)
    }

    /// bound_value − max residual
    pub fn slack(&self) -> f64 {
        self.bound_value - self.max_residual()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// ‖(I_C ⊗ E_{a|x} − Ẽ_{a|x} ⊗ I_P)|ψ⟩‖ for every label, with the reference
/// projector of provider p acting on trusted factor p.
fn transfer_residuals(e: &Experiment, reference: &Experiment) -> Result<Vec<Residual>> {
    let np = reference.providers().len();
    if e.providers().len() != np || e.trusted_count() != np {
        return Err(Error::Shape(format!(
            "need one trusted factor per provider ({} trusted, {} providers, {np} in the reference)",
            e.trusted_count(),
            e.providers().len()
        )));
    }
    if e.settings() != reference.settings() || e.outcomes() != reference.outcomes() {
        return Err(Error::Shape("measurement shapes differ from the reference".into()));
    }
    for (p, prov) in reference.providers().iter().enumerate() {
        if prov.measurements.dims() != [e.trusted_dims()[p]] {
            return Err(Error::Shape(format!("reference projectors of provider {p} do not act on trusted factor {p}")));
        }
    }
    let mut out = Vec::new();
    for x in labels(&e.settings()) {
        for a in labels(&e.outcomes()) {
            let physical = e.measured(&a, &x)?;
            let mut transferred = e.state().clone();
            for (p, prov) in reference.providers().iter().enumerate() {
                transferred = transferred.apply(prov.measurements.projector(a[p], x[p]), &[p])?;
            }
            let value = (&physical - &transferred).norm();
            out.push(Residual { outcomes: a.clone(), settings: x.clone(), value });
        }
    }
    Ok(out)
}

fn gap_epsilon(e: &Experiment, reference: &Experiment) -> Result<f64> {
    Ok(gap_report(&assemblage_of(e)?, &assemblage_of(reference)?)?.epsilon())
}

/// Transfer of provider projectors to the client, bounded by 2√ε.
pub fn lemma2_residuals(e: &Experiment, reference: &Experiment) -> Result<BoundReport> {
    if e.trusted_dims() != reference.trusted_dims() {
        return Err(Error::Shape(format!(
            "trusted dims {:?} differ from the reference's {:?}",
            e.trusted_dims(),
            reference.trusted_dims()
        )));
    }
    let residuals = transfer_residuals(e, reference)?;
    let eps = gap_epsilon(e, reference)?;
    Ok(BoundReport::new("lemma2", eps, 2.0 * eps.sqrt(), residuals))
}

/// The n-pair version of [`lemma2_residuals`] against `npair_reference(n)`.
pub fn lemma3_residuals(e: &Experiment, n: usize) -> Result<BoundReport> {
    let reference = npair_reference(n)?;
    if e.trusted_dims() != reference.trusted_dims() {
        return Err(Error::Shape(format!("not shaped as a {n}-pair experiment")));
    }
    let residuals = transfer_residuals(e, &reference)?;
    let eps = gap_epsilon(e, &reference)?;
    Ok(BoundReport::new("lemma3", eps, 2.0 * eps.sqrt(), residuals))
}

/// Transfer residuals under near-maximal violation of the Appendix-D
/// steering inequality, bounded by √η with η = 2 − value.
pub fn lemma4_residuals(e: &Experiment) -> Result<BoundReport> {
    let value = appd_steering_value(e)?;
    let eta = 2.0 - value;
    if eta > 1.0 {
        return Err(Error::OutOfRegime(format!("eta = {eta} exceeds 1")));
    }
    let eta = eta.clamp(0.0, 1.0);
    let residuals = transfer_residuals(e, &epr_reference())?;
    Ok(BoundReport::new("lemma4", eta, eta.sqrt(), residuals))
}

/// Outcome of [`lemma1_check`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Check {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// lhs = ‖(|u⟩ − |v⟩)⟨t|‖₁ against rhs = ‖t‖·‖u − v‖.
pub fn lemma1_check(u: &Ket, v: &Ket, t: &Ket) -> Result<Lemma1Check> {
    if u.len() != v.len() || u.len() != t.len() {
        return Err(Error::DimensionMismatch(format!("vectors of lengths {}, {}, {}", u.len(), v.len(), t.len())));
    }
    let d = u - v;
    let slack = 1.0 + LEMMA1_TOL;
    if u.norm() > slack || v.norm() > slack || d.norm() > slack {
        return Err(Error::Precondition("need ‖u‖, ‖v‖, ‖u − v‖ ≤ 1".into()));
    }
    let lhs = linalg::trace_norm(&Operator::outer(&d, t));
    let rhs = t.norm() * d.norm();
    Ok(Lemma1Check { lhs, rhs, pass: lhs <= rhs + LEMMA1_TOL })
}

/// The SWAP-isometry distances against the theorem's bounds: the state
/// distance, the x = 0 entries and the x = 1 entries, in that order.
pub fn thm1_reports(e: &Experiment) -> Result<Vec<BoundReport>> {
    let reference = epr_reference();
    let eps = gap_epsilon(e, &reference)?;
    let report = selftest_report(e, &reference)?;
    let entries = |x: usize| -> Vec<Residual> {
        report
            .measured_distances
            .iter()
            .filter(|m| m.setting == x)
            .map(|m| Residual { outcomes: vec![m.outcome], settings: vec![m.setting], value: m.distance })
            .collect()
    };
    let state = vec![Residual { outcomes: vec![], settings: vec![], value: report.state_distance }];
    Ok(vec![
        BoundReport::new("thm1_state", eps, thm1_state_f(eps)?, state),
        BoundReport::new("thm1_x0", eps, thm1_x0_f(eps)?, entries(0)),
        BoundReport::new("thm1_x1", eps, thm1_f(eps)?, entries(1)),
    ])
}

/// Aggregate of one check over a seeded ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub name: String,
    pub seed: u64,
    /// Instances checked.
    pub evaluated: usize,
    /// Instances drawn but outside the check's hypothesis.
    pub skipped: usize,
    pub passed: usize,
    /// Sample indices of failed instances.
    pub failures: Vec<u64>,
    /// Smallest bound − residual seen.
    pub worst_slack: f64,
}

impl SweepSummary {
    pub fn pass(&self) -> bool {
        self.evaluated > 0 && self.passed == self.evaluated
    }
}

enum Outcome {
    Checked(Vec<BoundReport>),
    Skipped,
}

fn summarize(name: &str, seed: u64, results: Vec<(u64, Outcome)>) -> SweepSummary {
    let mut s = SweepSummary {
        name: name.to_string(),
        seed,
        evaluated: 0,
        skipped: 0,
        passed: 0,
        failures: Vec::new(),
        worst_slack: f64::INFINITY,
    };
    for (index, outcome) in results {
        match outcome {
            Outcome::Skipped => s.skipped += 1,
            Outcome::Checked(reports) => {
                s.evaluated += 1;
                if reports.iter().all(|r| r.pass) {
                    s.passed += 1;
                } else {
                    s.failures.push(index);
                }
                for r in &reports {
                    s.worst_slack = s.worst_slack.min(r.slack());
                }
            }
        }
    }
    s
}

/// Runs `check` on indices 0, 1, … until `samples` instances are checked,
/// drawing at most 20·`samples` indices. An instance the check declines
/// (out-of-regime) counts as skipped; any other error is returned.
fn sweep_until<F>(name: &str, samples: usize, seed: u64, check: F) -> Result<SweepSummary>
where
    F: Fn(u64) -> Result<Option<Vec<BoundReport>>> + Sync,
{
    let mut results = Vec::new();
    let mut evaluated = 0;
    let mut next = 0u64;
    let cap = 20 * samples as u64;
    while evaluated < samples && next < cap {
        let batch = ((samples - evaluated) as u64).min(cap - next);
        let chunk: Vec<(u64, Outcome)> = (next..next + batch)
            .into_par_iter()
            .map(|i| {
                check(i).map(|o| match o {
                    Some(reports) => (i, Outcome::Checked(reports)),
                    None => (i, Outcome::Skipped),
                })
            })
            .collect::<Result<_>>()?;
        evaluated += chunk.iter().filter(|(_, o)| matches!(o, Outcome::Checked(_))).count();
        results.extend(chunk);
        next += batch;
    }
    Ok(summarize(name, seed, results))
}

/// A random triple satisfying the lemma's hypotheses, in dimension 2 to 6.
pub fn lemma1_triple<R: Rng + ?Sized>(rng: &mut R) -> (Ket, Ket, Ket) {
    let n = rng.random_range(2..=6);
    let ket = |rng: &mut R, scale: f64| {
        let k = Ket::new(random::gaussian_vector(rng, n), vec![n]).expect("dims").normalized();
        k.scale(linalg::r(scale))
    };
    let su = rng.random::<f64>();
    let u = ket(rng, su);
    let ss = 0.5 * rng.random::<f64>();
    let step = ket(rng, ss);
    let mut v = &u + &step;
    if v.norm() > 1.0 {
        v = v.normalized();
    }
    let st = 2.0 * rng.random::<f64>();
    let t = ket(rng, st);
    (u, v, t)
}

pub fn lemma1_sweep(samples: usize, seed: u64) -> Result<SweepSummary> {
    sweep_until("lemma1", samples, seed, |i| {
        let mut rng = sample_rng(seed, i);
        let (u, v, t) = lemma1_triple(&mut rng);
        let c = lemma1_check(&u, &v, &t)?;
        let residual = Residual { outcomes: vec![], settings: vec![], value: c.lhs };
        let mut report = BoundReport::new("lemma1", 0.0, c.rhs, vec![residual]);
        report.pass = c.pass;
        Ok(Some(vec![report]))
    })
}

pub fn lemma2_sweep(samples: usize, seed: u64) -> Result<SweepSummary> {
    let reference = epr_reference();
    sweep_until("lemma2", samples, seed, |i| {
        Ok(Some(vec![lemma2_residuals(&random::mixed_sample(seed, i), &reference)?]))
    })
}

pub fn lemma3_sweep(samples: usize, seed: u64) -> Result<SweepSummary> {
    sweep_until("lemma3", samples, seed, |i| {
        let mut rng = sample_rng(seed, i);
        let delta = random::PERTURBATIONS[(i % 4) as usize];
        Ok(Some(vec![lemma3_residuals(&random::perturbed_npair(&mut rng, delta, 2)?, 2)?]))
    })
}

pub fn lemma4_sweep(samples: usize, seed: u64) -> Result<SweepSummary> {
    sweep_until("lemma4", samples, seed, |i| match lemma4_residuals(&random::mixed_sample(seed, i)) {
        Ok(r) => Ok(Some(vec![r])),
        Err(Error::OutOfRegime(_)) => Ok(None),
        Err(e) => Err(e),
    })
}

pub fn thm1_sweep(samples: usize, seed: u64) -> Result<SweepSummary> {
    sweep_until("thm1", samples, seed, |i| match thm1_reports(&random::mixed_sample(seed, i)) {
        Ok(r) => Ok(Some(r)),
        Err(Error::DegenerateAncilla) => Ok(None),
        Err(e) => Err(e),
    })
}

/// Numeric maximum over isometries of the fidelity to the embedded ebit for
/// the qutrit-client example; the closed form is √(1 − ε).
pub fn sec22_numeric_fidelity(eps: f64, restarts: usize, seed: u64) -> Result<f64> {
    let e = example_three_dim(eps)?;
    optimal_fidelity_numeric(&e, three_dim_reference().state(), restarts, seed)
}

/// Smallest (0|0) measured distance for the optimality example over
/// `samples` Haar-random unitaries on (provider ⊗ ancilla) and Haar-random
/// ancilla states.
pub fn sec23_sampled_min(eps: f64, samples: usize, seed: u64) -> Result<f64> {
    let e = example_optimality(eps)?;
    let reference = epr_reference();
    let pdims = e.untrusted_dims().to_vec();
    let mut udims = pdims.clone();
    udims.push(2);
    let n: usize = udims.iter().product();
    let values: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i);
            let u = random::haar_unitary(&mut rng, n).with_dims(udims.clone())?;
            let a = random::haar_ket(&mut rng, &pdims);
            Ok(report_for(&e, &reference, &u, &a)?.measured(0, 0))
        })
        .collect::<Result<_>>()?;
    Ok(values.into_iter().fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::qubit;

    #[test]
    fn closed_forms() {
        assert!((thm1_f(0.01).unwrap() - 2.41).abs() < 1e-12);
        assert_eq!(appd_f(0.0).unwrap(), 0.0);
        assert!((sec22_lower(0.15).unwrap() - 0.1f64.sqrt()).abs() < 1e-12);
        assert!((sec23_lower(0.04).unwrap() - 0.2).abs() < 1e-12);
        assert!(thm1_f(-1e-3).is_err());
        assert!(appd_f(-1.0).is_err());
    }

    #[test]
    fn reference_residuals_vanish() {
        let e = epr_reference();
        let r = lemma2_residuals(&e, &e).unwrap();
        assert!(r.pass);
        assert_eq!(r.bound_value, 0.0);
        assert!(r.max_residual() < 1e-12);
        let r4 = lemma4_residuals(&e).unwrap();
        assert_eq!(r4.epsilon_or_eta, 0.0);
        assert!(r4.max_residual() < 1e-12);
        let n2 = npair_reference(2).unwrap();
        let r3 = lemma3_residuals(&n2, 2).unwrap();
        assert!(r3.pass && r3.max_residual() < 1e-12);
        assert_eq!(r3.residuals.len(), 16);
    }

    #[test]
    fn lemma1_rank_one_equality() {
        let half = linalg::r(0.5);
        let v = &qubit::ket0().scale(half) + &qubit::ket1().scale(half);
        let c = lemma1_check(&qubit::ket0(), &v, &qubit::ket0()).unwrap();
        assert!((c.lhs - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((c.lhs - c.rhs).abs() < 1e-12);
        assert!(c.pass);
        // ‖|0⟩ − |1⟩/√2‖ = √1.5 breaks the hypothesis ‖u − v‖ ≤ 1
        let v = qubit::ket1().scale(linalg::r(std::f64::consts::FRAC_1_SQRT_2));
        assert!(matches!(lemma1_check(&qubit::ket0(), &v, &qubit::ket0()), Err(Error::Precondition(_))));
        let u = qubit::plus();
        assert_eq!(lemma1_check(&u, &u, &qubit::ket1()).unwrap().lhs, 0.0);
        let far = qubit::ket0().scale(linalg::r(-1.0));
        assert!(matches!(lemma1_check(&qubit::ket0(), &far, &qubit::ket0()), Err(Error::Precondition(_))));
    }

    #[test]
    fn lemma4_rejects_out_of_regime() {
        let e = crate::experiments::example_idle_qubit();
        assert!(matches!(lemma4_residuals(&e), Err(Error::OutOfRegime(_))));
    }
}
