//! Steering experiments, assemblages and steering functionals.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, qubit, r, C64, CMat, CVec, Ket, Operator};

/// Tolerance for measurement completeness and projectivity.
pub const MEASUREMENT_TOL: f64 = 1e-10;

/// Projective measurements of one provider, indexed `[setting][outcome]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementSet {
    projectors: Vec<Vec<Operator>>,
}

impl MeasurementSet {
    pub fn new(projectors: Vec<Vec<Operator>>) -> Result<Self> {
        let m = Self { projectors };
        m.validate(MEASUREMENT_TOL)?;
        Ok(m)
    }

    /// One orthonormal basis per setting.
    pub fn from_bases(bases: &[Vec<Ket>]) -> Result<Self> {
        Self::new(bases.iter().map(|b| b.iter().map(Operator::projector).collect()).collect())
    }

    /// {|0⟩,|1⟩} for setting 0 and {|+⟩,|−⟩} for setting 1.
    pub fn qubit_reference() -> Self {
        Self::from_bases(&[vec![qubit::ket0(), qubit::ket1()], vec![qubit::plus(), qubit::minus()]])
            .expect("reference bases are orthonormal")
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        let first = self
            .projectors
            .first()
            .ok_or_else(|| Error::InvalidMeasurement("no settings".into()))?;
        let k = first.len();
        if k == 0 {
            return Err(Error::InvalidMeasurement("no outcomes".into()));
        }
        let dims = first[0].dims().to_vec();
        for (x, setting) in self.projectors.iter().enumerate() {
            if setting.len() != k {
                return Err(Error::InvalidMeasurement(format!("setting {x} has {} outcomes, expected {k}", setting.len())));
            }
            let mut sum = Operator::zeros(&dims);
            for (a, e) in setting.iter().enumerate() {
                if e.dims() != dims.as_slice() {
                    return Err(Error::InvalidMeasurement(format!("E[{a}|{x}] has dims {:?}", e.dims())));
                }
                sum = &sum + e;
                for (b, f) in setting.iter().enumerate() {
                    let prod = e * f;
                    let expect = if a == b { e.clone() } else { Operator::zeros(&dims) };
                    if prod.max_abs_diff(&expect) > tol {
                        return Err(Error::InvalidMeasurement(format!("E[{a}|{x}] E[{b}|{x}] is not δ E[{a}|{x}]")));
                    }
                }
            }
            if sum.max_abs_diff(&Operator::identity(&dims)) > tol {
                return Err(Error::InvalidMeasurement(format!("setting {x} does not sum to identity")));
            }
        }
        Ok(())
    }

    pub fn settings(&self) -> usize {
        self.projectors.len()
    }

    pub fn outcomes(&self) -> usize {
        self.projectors[0].len()
    }

    pub fn dims(&self) -> &[usize] {
        self.projectors[0][0].dims()
    }

    pub fn dim(&self) -> usize {
        self.projectors[0][0].side()
    }

    pub fn projector(&self, a: usize, x: usize) -> &Operator {
        &self.projectors[x][a]
    }

    pub fn projectors(&self) -> &[Vec<Operator>] {
        &self.projectors
    }

    /// E_{0|x} − E_{1|x} for a two-outcome setting.
    pub fn observable(&self, x: usize) -> Operator {
        self.projector(0, x) - self.projector(1, x)
    }

    /// E ⊗ I on extra trailing factors.
    pub fn tensor_identity(&self, extra: &[usize]) -> Self {
        let id = Operator::identity(extra);
        Self { projectors: self.projectors.iter().map(|s| s.iter().map(|e| e.tensor(&id)).collect()).collect() }
    }

    /// I ⊗ E on extra leading factors.
    pub fn identity_tensor(&self, extra: &[usize]) -> Self {
        let id = Operator::identity(extra);
        Self { projectors: self.projectors.iter().map(|s| s.iter().map(|e| id.tensor(e)).collect()).collect() }
    }

    pub fn with_settings_reversed(&self) -> Self {
        Self { projectors: self.projectors.iter().rev().cloned().collect() }
    }

    pub fn conj(&self) -> Self {
        Self { projectors: self.projectors.iter().map(|s| s.iter().map(Operator::conj).collect()).collect() }
    }
}

/// A provider: the untrusted factors it holds and its measurements on them.
#[derive(Clone, Debug, PartialEq)]
pub struct Provider {
    pub factors: Vec<usize>,
    pub measurements: MeasurementSet,
}

impl Provider {
    pub fn new(factors: Vec<usize>, measurements: MeasurementSet) -> Self {
        Self { factors, measurements }
    }
}

/// A pure state shared between a client (leading factors) and one or more
/// providers (trailing factors), with the providers' measurements.
#[derive(Clone, Debug, PartialEq)]
pub struct Experiment {
    state: Ket,
    trusted: usize,
    providers: Vec<Provider>,
}

impl Experiment {
    pub fn new(state: Ket, trusted: usize, providers: Vec<Provider>) -> Result<Self> {
        if !state.is_normalized(MEASUREMENT_TOL) {
            return Err(Error::NotNormalized(state.norm_squared()));
        }
        let nf = state.dims().len();
        if trusted == 0 || trusted >= nf {
            return Err(Error::Shape(format!("{trusted} trusted factors out of {nf}")));
        }
        if providers.is_empty() {
            return Err(Error::Shape("no providers".into()));
        }
        let mut seen = Vec::new();
        for (p, prov) in providers.iter().enumerate() {
            prov.measurements.validate(MEASUREMENT_TOL)?;
            for &f in &prov.factors {
                if f < trusted || f >= nf {
                    return Err(Error::Shape(format!("provider {p} holds factor {f}, which is not untrusted")));
                }
                if seen.contains(&f) {
                    return Err(Error::Shape(format!("factor {f} held by two providers")));
                }
                seen.push(f);
            }
            let fd: Vec<usize> = prov.factors.iter().map(|&f| state.dims()[f]).collect();
            if fd != prov.measurements.dims() {
                return Err(Error::Shape(format!(
                    "provider {p} measurements act on {:?} but holds factors of dims {:?}",
                    prov.measurements.dims(),
                    fd
                )));
            }
        }
        Ok(Self { state, trusted, providers })
    }

    pub fn state(&self) -> &Ket {
        &self.state
    }

    pub fn dims(&self) -> &[usize] {
        self.state.dims()
    }

    pub fn trusted_count(&self) -> usize {
        self.trusted
    }

    pub fn trusted_dims(&self) -> &[usize] {
        &self.state.dims()[..self.trusted]
    }

    pub fn trusted_dim(&self) -> usize {
        self.trusted_dims().iter().product()
    }

    pub fn trusted_factors(&self) -> Vec<usize> {
        (0..self.trusted).collect()
    }

    pub fn untrusted_factors(&self) -> Vec<usize> {
        (self.trusted..self.state.dims().len()).collect()
    }

    pub fn untrusted_dims(&self) -> &[usize] {
        &self.state.dims()[self.trusted..]
    }

    pub fn providers(&self) -> &[Provider] {
        &self.providers
    }

    pub fn provider(&self, p: usize) -> &Provider {
        &self.providers[p]
    }

    /// Settings per provider.
    pub fn settings(&self) -> Vec<usize> {
        self.providers.iter().map(|p| p.measurements.settings()).collect()
    }

    /// Outcomes per provider.
    pub fn outcomes(&self) -> Vec<usize> {
        self.providers.iter().map(|p| p.measurements.outcomes()).collect()
    }

    /// (I_C ⊗ ⊗_p E^{(p)}_{a_p|x_p}) |ψ⟩
    pub fn measured(&self, a: &[usize], x: &[usize]) -> Result<Ket> {
        if a.len() != self.providers.len() || x.len() != self.providers.len() {
            return Err(Error::Shape(format!("label of length {} for {} providers", a.len(), self.providers.len())));
        }
        let mut k = self.state.clone();
        for (p, prov) in self.providers.iter().enumerate() {
            let m = &prov.measurements;
            if x[p] >= m.settings() || a[p] >= m.outcomes() {
                return Err(Error::Shape(format!("label ({}|{}) out of range for provider {p}", a[p], x[p])));
            }
            k = k.apply(m.projector(a[p], x[p]), &prov.factors)?;
        }
        Ok(k)
    }

    /// Applies an operator on the provider's factors to the state.
    pub fn apply_on_provider(&self, p: usize, op: &Operator) -> Result<Ket> {
        self.state.apply(op, &self.providers[p].factors)
    }

    /// Complex conjugate of the state and of every provider measurement.
    pub fn conjugated(&self) -> Self {
        Self {
            state: self.state.conj(),
            trusted: self.trusted,
            providers: self
                .providers
                .iter()
                .map(|p| Provider::new(p.factors.clone(), p.measurements.conj()))
                .collect(),
        }
    }

    /// Same state with each provider's settings listed in reverse order.
    pub fn with_settings_reversed(&self) -> Self {
        Self {
            state: self.state.clone(),
            trusted: self.trusted,
            providers: self
                .providers
                .iter()
                .map(|p| Provider::new(p.factors.clone(), p.measurements.with_settings_reversed()))
                .collect(),
        }
    }
}

/// Little-endian flattening of a multi-index.
fn flatten(index: &[usize], radix: &[usize]) -> usize {
    let mut flat = 0;
    let mut scale = 1;
    for (i, r) in index.iter().zip(radix) {
        flat += i * scale;
        scale *= r;
    }
    flat
}

fn unflatten(mut flat: usize, radix: &[usize]) -> Vec<usize> {
    radix
        .iter()
        .map(|r| {
            let d = flat % r;
            flat /= r;
            d
        })
        .collect()
}

/// All multi-indices over `radix` in little-endian order.
pub fn labels(radix: &[usize]) -> Vec<Vec<usize>> {
    (0..radix.iter().product()).map(|f| unflatten(f, radix)).collect()
}

/// The conditional client states σ_{a|x} and the reduced state ρ_C.
///
/// Multi-provider labels are tuples with one entry per provider.
#[derive(Clone, Debug, PartialEq)]
pub struct Assemblage {
    settings: Vec<usize>,
    outcomes: Vec<usize>,
    elements: Vec<Operator>,
    reduced: Operator,
}

impl Assemblage {
    /// Builds an assemblage from elements listed in little-endian label
    /// order: settings outermost, outcomes innermost.
    pub fn from_parts(settings: Vec<usize>, outcomes: Vec<usize>, elements: Vec<Operator>, reduced: Operator) -> Result<Self> {
        let expected = settings.iter().product::<usize>() * outcomes.iter().product::<usize>();
        if elements.len() != expected || settings.len() != outcomes.len() {
            return Err(Error::Shape(format!("{} elements, expected {expected}", elements.len())));
        }
        Ok(Self { settings, outcomes, elements, reduced })
    }

    pub fn settings(&self) -> &[usize] {
        &self.settings
    }

    pub fn outcomes(&self) -> &[usize] {
        &self.outcomes
    }

    pub fn parties(&self) -> usize {
        self.settings.len()
    }

    pub fn trusted_dim(&self) -> usize {
        self.reduced.side()
    }

    pub fn reduced(&self) -> &Operator {
        &self.reduced
    }

    fn slot(&self, a: &[usize], x: &[usize]) -> usize {
        let na: usize = self.outcomes.iter().product();
        flatten(x, &self.settings) * na + flatten(a, &self.outcomes)
    }

    /// σ_{a|x} for tuple labels.
    pub fn element(&self, a: &[usize], x: &[usize]) -> &Operator {
        assert_eq!(a.len(), self.parties(), "outcome tuple length");
        assert_eq!(x.len(), self.parties(), "setting tuple length");
        &self.elements[self.slot(a, x)]
    }

    /// σ_{a|x} for a single provider.
    pub fn get(&self, a: usize, x: usize) -> &Operator {
        self.element(&[a], &[x])
    }

    /// Every (a, x, σ_{a|x}) in little-endian order.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<usize>, Vec<usize>, &Operator)> + '_ {
        let xs = labels(&self.settings);
        let as_ = labels(&self.outcomes);
        xs.into_iter()
            .flat_map(move |x| as_.clone().into_iter().map(move |a| (a, x.clone())))
            .map(move |(a, x)| {
                let s = self.slot(&a, &x);
                (a, x, &self.elements[s])
            })
    }

    /// Positivity, no-signalling to ρ_C and normalization.
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        let tr = self.reduced.trace();
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return Err(Error::Precondition(format!("tr(ρ_C) = {tr}")));
        }
        for x in labels(&self.settings) {
            let mut sum = Operator::zeros(self.reduced.dims());
            for a in labels(&self.outcomes) {
                let e = self.element(&a, &x);
                if e.min_eigenvalue() < -tol {
                    return Err(Error::Precondition(format!("σ[{a:?}|{x:?}] is not positive")));
                }
                sum = &sum + e;
            }
            if sum.max_abs_diff(&self.reduced) > tol {
                return Err(Error::Precondition(format!("elements for setting {x:?} do not sum to ρ_C")));
            }
        }
        Ok(())
    }

    /// Σ_a (−1)^{Σa} tr(T σ_{a|x}) for two-outcome settings.
    pub fn correlator(&self, t: &Operator, x: &[usize]) -> f64 {
        labels(&self.outcomes)
            .into_iter()
            .map(|a| {
                let sign = if a.iter().sum::<usize>() % 2 == 0 { 1.0 } else { -1.0 };
                sign * t.trace_product(self.element(&a, x)).re
            })
            .sum()
    }
}

/// σ_{a|x} = tr_P(I_C ⊗ E_{a|x} |ψ⟩⟨ψ|)
pub fn assemblage_of(e: &Experiment) -> Result<Assemblage> {
    let settings = e.settings();
    let outcomes = e.outcomes();
    let keep = e.trusted_factors();
    let mut elements = Vec::new();
    for x in labels(&settings) {
        for a in labels(&outcomes) {
            elements.push(e.measured(&a, &x)?.reduced(&keep)?);
        }
    }
    let reduced = e.state().reduced(&keep)?;
    Assemblage::from_parts(settings, outcomes, elements, reduced)
}

/// Joint distribution p(a,b|x,y) = tr(F_{b|y} σ_{a|x}).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlations {
    pub settings: Vec<usize>,
    pub outcomes: Vec<usize>,
    pub client_settings: usize,
    pub client_outcomes: usize,
    values: Vec<f64>,
}

impl Correlations {
    fn slot(&self, a: &[usize], b: usize, x: &[usize], y: usize) -> usize {
        let na: usize = self.outcomes.iter().product();
        let fa = flatten(a, &self.outcomes);
        let fx = flatten(x, &self.settings);
        ((fx * self.client_settings + y) * na + fa) * self.client_outcomes + b
    }

    pub fn get(&self, a: &[usize], b: usize, x: &[usize], y: usize) -> f64 {
        self.values[self.slot(a, b, x, y)]
    }

    /// Σ_b p(a,b|x,y)
    pub fn provider_marginal(&self, a: &[usize], x: &[usize], y: usize) -> f64 {
        (0..self.client_outcomes).map(|b| self.get(a, b, x, y)).sum()
    }

    /// Σ_a p(a,b|x,y)
    pub fn client_marginal(&self, b: usize, x: &[usize], y: usize) -> f64 {
        labels(&self.outcomes).iter().map(|a| self.get(a, b, x, y)).sum()
    }
}

pub fn correlations(asm: &Assemblage, client: &MeasurementSet) -> Result<Correlations> {
    if client.dim() != asm.trusted_dim() {
        return Err(Error::DimensionMismatch(format!(
            "client measurement of dim {} on trusted dim {}",
            client.dim(),
            asm.trusted_dim()
        )));
    }
    let mut c = Correlations {
        settings: asm.settings.clone(),
        outcomes: asm.outcomes.clone(),
        client_settings: client.settings(),
        client_outcomes: client.outcomes(),
        values: vec![],
    };
    c.values = vec![0.0; asm.elements.len() * c.client_settings * c.client_outcomes];
    for (a, x, s) in asm.iter() {
        for y in 0..c.client_settings {
            for b in 0..c.client_outcomes {
                let f = client.projector(b, y).clone().with_dims(s.dims().to_vec())?;
                let slot = c.slot(&a, b, &x, y);
                c.values[slot] = f.trace_product(s).re;
            }
        }
    }
    Ok(c)
}

fn require(cond: bool, what: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Shape(what()))
    }
}

fn require_qubit_chsh(asm: &Assemblage) -> Result<()> {
    require(
        asm.parties() == 1 && asm.settings[0] == 2 && asm.outcomes[0] == 2 && asm.trusted_dim() == 2,
        || format!("need one provider with 2 settings × 2 outcomes on a qubit client, got {:?}/{:?}", asm.settings, asm.outcomes),
    )
}

/// trS = √2 tr(τ_z(2σ_{0|0} − ρ_C)) + √2 tr(τ_x(2σ_{0|1} − ρ_C))
pub fn chsh_steering_value(asm: &Assemblage) -> Result<f64> {
    require_qubit_chsh(asm)?;
    let rho = asm.reduced();
    let tz = (&asm.get(0, 0).scale_re(2.0) - rho).trace_product(&qubit::z()).re;
    let tx = (&asm.get(0, 1).scale_re(2.0) - rho).trace_product(&qubit::x()).re;
    Ok(SQRT_2 * (tz + tx))
}

/// ⟨ψ|τ_z ⊗ Z|ψ⟩ + ⟨ψ|τ_x ⊗ X|ψ⟩ with Z = 2E_{0|0} − I and X = 2E_{0|1} − I.
pub fn appd_steering_value(e: &Experiment) -> Result<f64> {
    require(
        e.trusted_dim() == 2 && e.providers().len() == 1 && e.settings()[0] == 2 && e.outcomes()[0] == 2,
        || "need a qubit client and one two-setting two-outcome provider".into(),
    )?;
    let m = &e.provider(0).measurements;
    let id = Operator::identity(m.dims());
    let z = &m.projector(0, 0).scale_re(2.0) - &id;
    let x = &m.projector(0, 1).scale_re(2.0) - &id;
    let psi = e.state();
    let c = e.trusted_factors();
    let zz = psi.apply(&qubit::z(), &c)?.apply(&z, &e.provider(0).factors)?;
    let xx = psi.apply(&qubit::x(), &c)?.apply(&x, &e.provider(0).factors)?;
    Ok(psi.inner(&zz).re + psi.inner(&xx).re)
}

/// Terms of the GHZ-Mermin steering functionals: client observable factors
/// (as Pauli letters) and one setting per provider.
pub(crate) fn mermin_terms(setting: u8) -> Result<Vec<(f64, &'static str, Vec<usize>)>> {
    match setting {
        2 => Ok(vec![(1.0, "zz", vec![1]), (1.0, "xz", vec![0]), (1.0, "zx", vec![0]), (-1.0, "xx", vec![1])]),
        1 => Ok(vec![(1.0, "z", vec![0, 1]), (1.0, "x", vec![0, 0]), (1.0, "z", vec![1, 0]), (-1.0, "x", vec![1, 1])]),
        s => Err(Error::OutOfRange { name: "setting", value: s as f64 }),
    }
}

pub(crate) fn pauli_string(s: &str) -> Operator {
    let ops: Vec<Operator> = s
        .chars()
        .map(|ch| match ch {
            'x' => qubit::x(),
            'y' => qubit::y(),
            'z' => qubit::z(),
            _ => qubit::id(),
        })
        .collect();
    linalg::tensor_all(&ops)
}

/// trB₂ (setting 2) or trB₁ (setting 1); the maximal quantum value is 4.
pub fn ghz_mermin_value(asm: &Assemblage, setting: u8) -> Result<f64> {
    let terms = mermin_terms(setting)?;
    let (parties, dim) = if setting == 2 { (1, 4) } else { (2, 2) };
    require(
        asm.parties() == parties
            && asm.trusted_dim() == dim
            && asm.settings.iter().all(|&s| s == 2)
            && asm.outcomes.iter().all(|&o| o == 2),
        || format!("assemblage shape {:?}/{:?} on dim {} does not match setting {setting}", asm.settings, asm.outcomes, asm.trusted_dim()),
    )?;
    let mut total = 0.0;
    for (coef, t, x) in terms {
        let op = pauli_string(t).with_dims(asm.reduced().dims().to_vec())?;
        total += coef * asm.correlator(&op, &x);
    }
    Ok(total)
}

/// Per-element distances between a physical and a reference assemblage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// D(ρ_C, ρ̃_C)
    pub eps_state: f64,
    /// max over (a, x) of ‖σ_{a|x} − σ̃_{a|x}‖₁
    pub eps_assemblage: f64,
    pub elements: Vec<GapEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapEntry {
    pub outcomes: Vec<usize>,
    pub settings: Vec<usize>,
    pub distance: f64,
}

impl GapReport {
    /// max(eps_state, eps_assemblage)
    pub fn epsilon(&self) -> f64 {
        self.eps_state.max(self.eps_assemblage)
    }
}

pub fn gap_report(physical: &Assemblage, reference: &Assemblage) -> Result<GapReport> {
    if physical.settings != reference.settings
        || physical.outcomes != reference.outcomes
        || physical.reduced.dims() != reference.reduced.dims()
    {
        return Err(Error::Shape("assemblages have different shapes".into()));
    }
    let eps_state = linalg::trace_distance(&physical.reduced, &reference.reduced)?;
    let mut elements = Vec::new();
    let mut eps_assemblage = 0.0f64;
    for (a, x, s) in physical.iter() {
        let d = linalg::trace_norm(&(s - reference.element(&a, &x)));
        eps_assemblage = eps_assemblage.max(d);
        elements.push(GapEntry { outcomes: a, settings: x, distance: d });
    }
    Ok(GapReport { eps_state, eps_assemblage, elements })
}

/// EPR reference: (|00⟩ + |11⟩)/√2 with Z and X provider measurements.
pub fn epr_reference() -> Experiment {
    Experiment::new(qubit::ebit(), 1, vec![Provider::new(vec![1], MeasurementSet::qubit_reference())])
        .expect("reference experiment is valid")
}

/// (|Ψ⟩|+⟩ + |Ψ′⟩|−⟩)/√2 on qubits 1, 2, 3.
pub fn ghz_state() -> Ket {
    let s = FRAC_1_SQRT_2;
    let big_psi = Ket::from_real(&[s, 0.0, 0.0, -s]).with_dims(vec![2, 2]).expect("2·2");
    let big_psi_p = Ket::from_real(&[0.0, s, s, 0.0]).with_dims(vec![2, 2]).expect("2·2");
    (&big_psi.tensor(&qubit::plus()) + &big_psi_p.tensor(&qubit::minus())).scale(r(s))
}

/// GHZ reference with two trusted qubits (setting 2) or one (setting 1).
///
/// In setting 1 the first provider holds qubit 2 and the second qubit 3.
pub fn ghz_reference(setting: u8) -> Result<Experiment> {
    let m = MeasurementSet::qubit_reference();
    match setting {
        2 => Experiment::new(ghz_state(), 2, vec![Provider::new(vec![2], m)]),
        1 => Experiment::new(ghz_state(), 1, vec![Provider::new(vec![1], m.clone()), Provider::new(vec![2], m)]),
        s => Err(Error::OutOfRange { name: "setting", value: s as f64 }),
    }
}

/// n ebits with the client holding one half of each; every pair is measured
/// by its own provider.
pub fn npair_reference(n: usize) -> Result<Experiment> {
    if !(1..=3).contains(&n) {
        return Err(Error::Unsupported(format!("n = {n} pairs (supported: 1 to 3)")));
    }
    let pairs = vec![qubit::ebit(); n];
    let joint = linalg::tensor_all(&pairs);
    let order: Vec<usize> = (0..n).map(|i| 2 * i).chain((0..n).map(|i| 2 * i + 1)).collect();
    let state = joint.permute(&order)?;
    let providers = (0..n).map(|i| Provider::new(vec![n + i], MeasurementSet::qubit_reference())).collect();
    Experiment::new(state, n, providers)
}

fn check_eps(eps: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eps) {
        Ok(())
    } else {
        Err(Error::OutOfRange { name: "eps", value: eps })
    }
}

/// The EPR reference embedded in a qutrit client.
pub fn three_dim_reference() -> Experiment {
    let s = FRAC_1_SQRT_2;
    let mut amps = vec![0.0; 6];
    amps[0] = s; // |0_C 0_P⟩
    amps[3] = s; // |1_C 1_P⟩
    let state = Ket::from_real(&amps).with_dims(vec![3, 2]).expect("3·2");
    Experiment::new(state, 1, vec![Provider::new(vec![1], MeasurementSet::qubit_reference())]).expect("valid")
}

/// √(1−ε)|ψ̃⟩|0_{P′}⟩ + √ε|2_C 0_P⟩|1_{P′}⟩ with a qutrit client.
pub fn example_three_dim(eps: f64) -> Result<Experiment> {
    check_eps(eps)?;
    let ideal = three_dim_reference().state().tensor(&qubit::ket0());
    let xi = Ket::basis(&[3, 2, 2], 2 * 4 + 1);
    let state = &ideal.scale(r((1.0 - eps).sqrt())) + &xi.scale(r(eps.sqrt()));
    let reference = MeasurementSet::qubit_reference();
    let p0 = Operator::projector(&qubit::ket0());
    let p1 = Operator::projector(&qubit::ket1());
    let mut projectors = Vec::new();
    for x in 0..2 {
        let mut setting = Vec::new();
        for a in 0..2 {
            let pa = Operator::projector(&Ket::basis(&[2], a));
            setting.push(&reference.projector(a, x).tensor(&p0) + &pa.tensor(&p1));
        }
        projectors.push(setting);
    }
    Experiment::new(state, 1, vec![Provider::new(vec![1, 2], MeasurementSet::new(projectors)?)])
}

/// The construction showing that the SWAP isometry's √ε scaling is optimal.
pub fn example_optimality(eps: f64) -> Result<Experiment> {
    check_eps(eps)?;
    let s = FRAC_1_SQRT_2;
    let (a, b) = ((1.0 - eps).sqrt(), eps.sqrt());
    let b00 = Ket::basis(&[2, 2], 0);
    let b11 = Ket::basis(&[2, 2], 3);
    let first = (&b00.scale(r(a)) + &b11.scale(r(b))).tensor(&qubit::ket0());
    let second = (&b00.scale(r(b)) + &b11.scale(r(a))).tensor(&qubit::ket1());
    let state = (&first + &second).scale(r(s));
    let id = qubit::id();
    let pp = Operator::projector(&qubit::plus());
    let pm = Operator::projector(&qubit::minus());
    let m = MeasurementSet::new(vec![
        vec![id.tensor(&Operator::projector(&qubit::ket0())), id.tensor(&Operator::projector(&qubit::ket1()))],
        vec![&pp.tensor(&pp) + &pm.tensor(&pm), &pp.tensor(&pm) + &pm.tensor(&pp)],
    ])?;
    Experiment::new(state, 1, vec![Provider::new(vec![1, 2], m)])
}

/// (|0_C 0_{P1}⟩ + |1_C 1_{P1}⟩)|0_{P2}⟩/√2 with the provider measuring only
/// P2, in the X and Y bases.
pub fn example_idle_qubit() -> Experiment {
    let state = qubit::ebit().tensor(&qubit::ket0());
    let local = MeasurementSet::from_bases(&[
        vec![qubit::plus(), qubit::minus()],
        vec![qubit::plus_y(), qubit::minus_y()],
    ])
    .expect("orthonormal");
    Experiment::new(state, 1, vec![Provider::new(vec![1, 2], local.identity_tensor(&[2]))]).expect("valid")
}

/// (|00⟩ + i|11⟩)/√2 with the reference measurements; its conjugate is
/// distinguishable through the assemblage.
pub fn example_conjugation() -> Experiment {
    let s = FRAC_1_SQRT_2;
    let state = Ket::from_amps(&[r(s), r(0.0), r(0.0), C64::new(0.0, s)]).with_dims(vec![2, 2]).expect("2·2");
    Experiment::new(state, 1, vec![Provider::new(vec![1], MeasurementSet::qubit_reference())]).expect("valid")
}

/// √λ|00⟩ + √(1−λ)|11⟩ with the reference measurements.
pub fn schmidt_state(lambda: f64) -> Result<Experiment> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::OutOfRange { name: "lambda", value: lambda });
    }
    let state = Ket::from_real(&[lambda.sqrt(), 0.0, 0.0, (1.0 - lambda).sqrt()]).with_dims(vec![2, 2])?;
    Experiment::new(state, 1, vec![Provider::new(vec![1], MeasurementSet::qubit_reference())])
}

/// The GHZ state in the two-trusted setting with the provider's qubit
/// dephased in the computational basis, purified by an environment qubit
/// the provider also holds but does not measure.
pub fn ghz_dephased() -> Experiment {
    let ghz = ghz_state();
    // copy qubit 3 into an environment qubit: |b⟩ ↦ |b⟩|b⟩
    let mut amps = CVec::zeros(16);
    for i in 0..8 {
        let b = i & 1;
        amps[i * 2 + b] = ghz.amps()[i];
    }
    let state = Ket::new(amps, vec![2, 2, 2, 2]).expect("16 = 2⁴");
    let m = MeasurementSet::qubit_reference().tensor_identity(&[2]);
    Experiment::new(state, 2, vec![Provider::new(vec![2, 3], m)]).expect("valid")
}

/// The first factor of a product experiment replaced on one pair:
/// `npair_reference(2)` with pair 0 swapped for `pair`.
pub fn npair_with_pair(pair: &Experiment) -> Result<Experiment> {
    require(
        pair.trusted_dim() == 2 && pair.providers().len() == 1,
        || "pair must have a qubit client and one provider".into(),
    )?;
    let ebit = epr_reference();
    // pair factors (C0, P0...), ebit factors (C1, P1)
    let joint = pair.state().tensor(ebit.state());
    let np = pair.dims().len();
    let mut order = vec![0, np];
    order.extend(1..np);
    order.push(np + 1);
    let state = joint.permute(&order)?;
    let p0 = pair.provider(0);
    let f0: Vec<usize> = p0.factors.iter().map(|&f| f + 1).collect();
    let f1 = vec![np + 1];
    Experiment::new(
        state,
        2,
        vec![
            Provider::new(f0, p0.measurements.clone()),
            Provider::new(f1, MeasurementSet::qubit_reference()),
        ],
    )
}

/// Serializable form of an [`Experiment`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentDoc {
    pub trusted_dims: Vec<usize>,
    pub untrusted_dims: Vec<usize>,
    /// Amplitudes as [re, im] pairs.
    pub state: Vec<[f64; 2]>,
    pub providers: Vec<ProviderDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProviderDoc {
    pub factors: Vec<usize>,
    /// `[setting][outcome]` row-major matrices of [re, im] pairs.
    pub projectors: Vec<Vec<Vec<Vec<[f64; 2]>>>>,
}

pub(crate) fn matrix_doc(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

pub(crate) fn matrix_from_doc(rows: &[Vec<[f64; 2]>]) -> Result<CMat> {
    let n = rows.len();
    if rows.iter().any(|row| row.len() != n) {
        return Err(Error::Shape("matrix is not square".into()));
    }
    Ok(CMat::from_fn(n, n, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
}

impl Experiment {
    pub fn to_doc(&self) -> ExperimentDoc {
        ExperimentDoc {
            trusted_dims: self.trusted_dims().to_vec(),
            untrusted_dims: self.untrusted_dims().to_vec(),
            state: self.state.amps().iter().map(|z| [z.re, z.im]).collect(),
            providers: self
                .providers
                .iter()
                .map(|p| ProviderDoc {
                    factors: p.factors.clone(),
                    projectors: p
                        .measurements
                        .projectors()
                        .iter()
                        .map(|s| s.iter().map(|e| matrix_doc(e.entries())).collect())
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn from_doc(doc: &ExperimentDoc) -> Result<Self> {
        let mut dims = doc.trusted_dims.clone();
        dims.extend_from_slice(&doc.untrusted_dims);
        let amps = CVec::from_iterator(doc.state.len(), doc.state.iter().map(|p| C64::new(p[0], p[1])));
        let state = Ket::new(amps, dims.clone())?;
        let mut providers = Vec::new();
        for p in &doc.providers {
            let fd: Vec<usize> = p
                .factors
                .iter()
                .map(|&f| dims.get(f).copied().ok_or(Error::FactorOutOfRange { index: f, factors: dims.len() }))
                .collect::<Result<_>>()?;
            let mut projectors = Vec::new();
            for s in &p.projectors {
                let mut setting = Vec::new();
                for e in s {
                    setting.push(Operator::new(matrix_from_doc(e)?, fd.clone())?);
                }
                projectors.push(setting);
            }
            providers.push(Provider::new(p.factors.clone(), MeasurementSet::new(projectors)?));
        }
        Experiment::new(state, doc.trusted_dims.len(), providers)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_doc())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_doc(&serde_json::from_str(s)?)
    }
}

/// Serializable form of an [`Assemblage`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssemblageDoc {
    pub settings: Vec<usize>,
    pub outcomes: Vec<usize>,
    pub reduced: Vec<Vec<[f64; 2]>>,
    pub elements: Vec<AssemblageEntryDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssemblageEntryDoc {
    pub outcomes: Vec<usize>,
    pub settings: Vec<usize>,
    pub matrix: Vec<Vec<[f64; 2]>>,
}

impl Assemblage {
    pub fn to_doc(&self) -> AssemblageDoc {
        AssemblageDoc {
            settings: self.settings.clone(),
            outcomes: self.outcomes.clone(),
            reduced: matrix_doc(self.reduced.entries()),
            elements: self
                .iter()
                .map(|(a, x, s)| AssemblageEntryDoc { outcomes: a, settings: x, matrix: matrix_doc(s.entries()) })
                .collect(),
        }
    }
}
