//! Moment problems and their compilation to SDPA form.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::ipm::{SdpaProblem, SparseSym};
use super::moments::{MomentLayout, Word};
use crate::error::{Error, Result};
use crate::experiments::{ghz_state, mermin_terms, pauli_string};
use crate::linalg::{qubit, r, CMat, Ket, Operator, C64, I, ZERO};

/// Minimize tr(MᵀΓ) subject to Γ ⪰ 0, the block equality classes,
/// tr(NᵀΓ) ≥ threshold and, when `normalized`, tr(ρ_C) = 1.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentProblem {
    pub layout: MomentLayout,
    pub objective: CMat,
    pub functional: CMat,
    pub threshold: f64,
    pub normalized: bool,
    /// Restrict Γ to real symmetric matrices.
    pub real: bool,
}

/// Σ_ab M_ab Γ_ab
pub fn pairing(m: &CMat, gamma: &CMat) -> f64 {
    m.iter().zip(gamma.iter()).map(|(a, b)| a * b).sum::<C64>().re
}

fn hermitian(m: &CMat, what: &str) -> Result<()> {
    if (m - m.adjoint()).camax() > 1e-12 {
        return Err(Error::Shape(format!("{what} matrix is not Hermitian")));
    }
    Ok(())
}

impl MomentProblem {
    pub fn new(layout: MomentLayout, objective: CMat, functional: CMat, threshold: f64) -> Result<Self> {
        let n = layout.side();
        for (m, what) in [(&objective, "objective"), (&functional, "functional")] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::Shape(format!("{what} matrix is {}×{} for Γ of side {n}", m.nrows(), m.ncols())));
            }
            hermitian(m, what)?;
        }
        Ok(Self { layout, objective, functional, threshold, normalized: true, real: false })
    }

    pub fn without_normalization(mut self) -> Self {
        self.normalized = false;
        self
    }

    pub fn real_restricted(mut self) -> Self {
        self.real = true;
        self
    }

    /// tr(MᵀΓ)
    pub fn objective_value(&self, gamma: &CMat) -> f64 {
        pairing(&self.objective, gamma)
    }

    /// tr(NᵀΓ)
    pub fn functional_value(&self, gamma: &CMat) -> f64 {
        pairing(&self.functional, gamma)
    }

    /// Whether Γ satisfies every constraint within `tol`.
    pub fn is_feasible(&self, gamma: &CMat, tol: f64) -> bool {
        let d = self.layout.trusted_dim;
        let id = self.layout.word_index(&Word::identity(self.layout.providers())).expect("identity word");
        let trace: C64 = (0..d).map(|i| gamma[(id * d + i, id * d + i)]).sum();
        let herm = Operator::from_matrix(gamma.clone());
        self.layout.class_defect(gamma) <= tol
            && herm.is_hermitian(tol)
            && herm.min_eigenvalue() >= -tol
            && self.functional_value(gamma) >= self.threshold - tol
            && (!self.normalized || (trace - r(1.0)).norm() <= tol)
    }

    pub fn compile(&self) -> CompiledProblem {
        CompiledProblem::new(self)
    }
}

/// One real variable of the parametrization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub label: usize,
    pub row: usize,
    pub col: usize,
    pub imaginary: bool,
}

/// Γ(y) = G₀ + Σ_v y_v G_v as an SDPA problem in y.
#[derive(Clone, Debug, PartialEq)]
pub struct CompiledProblem {
    pub variables: Vec<Variable>,
    pub sdpa: SdpaProblem,
    /// Objective constant tr(MᵀG₀).
    pub offset: f64,
    gamma_constant: Vec<(usize, usize, C64)>,
    gamma_terms: Vec<Vec<(usize, usize, C64)>>,
    side: usize,
}

type Terms = Vec<(usize, usize, C64)>;

fn moment_variables(p: &MomentProblem) -> (Vec<Variable>, Vec<Terms>) {
    let layout = &p.layout;
    let d = layout.trusted_dim;
    // entries of each label's moment as (row, col, variable, coefficient)
    let mut vars = Vec::new();
    let mut moment: Vec<Vec<(usize, usize, usize, C64)>> = vec![Vec::new(); layout.labels.len()];
    for (l, w) in layout.labels.iter().enumerate() {
        let selfadj = w.is_self_adjoint();
        for row in 0..d {
            for col in 0..d {
                if selfadj && col < row {
                    continue;
                }
                let v = vars.len();
                vars.push(Variable { label: l, row, col, imaginary: false });
                moment[l].push((row, col, v, r(1.0)));
                if selfadj && row != col {
                    moment[l].push((col, row, v, r(1.0)));
                }
                if p.real || (selfadj && row == col) {
                    continue;
                }
                let v = vars.len();
                vars.push(Variable { label: l, row, col, imaginary: true });
                moment[l].push((row, col, v, I));
                if selfadj {
                    moment[l].push((col, row, v, -I));
                }
            }
        }
    }
    let mut terms: Vec<Terms> = vec![Vec::new(); vars.len()];
    for (j, brow) in layout.blocks.iter().enumerate() {
        for (k, b) in brow.iter().enumerate() {
            for &(row, col, v, coef) in &moment[b.label] {
                if b.dagger {
                    terms[v].push((j * d + col, k * d + row, coef.conj()));
                } else {
                    terms[v].push((j * d + row, k * d + col, coef));
                }
            }
        }
    }
    (vars, terms)
}

fn pair_terms(m: &CMat, terms: &[(usize, usize, C64)]) -> f64 {
    terms.iter().map(|&(a, b, z)| m[(a, b)] * z).sum::<C64>().re
}

impl CompiledProblem {
    fn new(p: &MomentProblem) -> Self {
        let (mut variables, mut terms) = moment_variables(p);
        let mut constant: Terms = Vec::new();
        if p.normalized {
            // last diagonal entry of ρ_C is 1 minus the others
            let id = p.layout.identity_label();
            let diag: Vec<usize> = (0..variables.len())
                .filter(|&v| variables[v].label == id && variables[v].row == variables[v].col && !variables[v].imaginary)
                .collect();
            let last = *diag.last().expect("ρ_C has a diagonal");
            let removed = terms[last].clone();
            constant.extend(removed.iter().copied());
            for &v in &diag[..diag.len() - 1] {
                terms[v].extend(removed.iter().map(|&(a, b, z)| (a, b, -z)));
            }
            variables.remove(last);
            terms.remove(last);
        }

        let n = p.layout.side();
        let (gamma_block, embed) = if p.real { (n, 1) } else { (2 * n, 2) };
        let embed_terms = |t: &Terms, scale: f64| -> SparseSym {
            let mut s = SparseSym::default();
            for &(a, b, z) in t {
                let z = z * scale;
                let mut put = |i: usize, j: usize, v: f64| {
                    if i <= j {
                        s.add(0, i, j, v);
                    }
                };
                put(a, b, z.re);
                if embed == 2 {
                    put(a + n, b + n, z.re);
                    put(a + n, b, z.im);
                    put(a, b + n, -z.im);
                }
            }
            s.compact();
            s
        };

        let mut f0 = embed_terms(&constant, -1.0);
        let n0 = pair_terms(&p.functional, &constant);
        f0.add(1, 0, 0, -(n0 - p.threshold));
        f0.compact();
        let mut f = Vec::with_capacity(variables.len());
        let mut cost = Vec::with_capacity(variables.len());
        for t in &terms {
            let mut fi = embed_terms(t, 1.0);
            fi.add(1, 0, 0, pair_terms(&p.functional, t));
            fi.compact();
            f.push(fi);
            cost.push(pair_terms(&p.objective, t));
        }
        let offset = pair_terms(&p.objective, &constant);
        Self {
            variables,
            sdpa: SdpaProblem { blocks: vec![gamma_block, 1], c: cost, f0, f },
            offset,
            gamma_constant: constant,
            gamma_terms: terms,
            side: n,
        }
    }

    /// Γ(y)
    pub fn gamma(&self, y: &[f64]) -> CMat {
        let mut g = CMat::zeros(self.side, self.side);
        for &(a, b, z) in &self.gamma_constant {
            g[(a, b)] += z;
        }
        for (t, &yv) in self.gamma_terms.iter().zip(y) {
            for &(a, b, z) in t {
                g[(a, b)] += z * yv;
            }
        }
        g
    }

    /// SDPA sparse format (.dat-s) preceded by comment lines naming the
    /// variables.
    pub fn dump(&self, layout: &MomentLayout) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "* moment problem: Γ of side {} over {} words, trusted dim {}", self.side, layout.words.len(), layout.trusted_dim);
        let _ = writeln!(s, "* objective offset {:.17e}", self.offset);
        let sizes = layout.class_sizes();
        for (l, w) in layout.labels.iter().enumerate() {
            let _ = writeln!(s, "* label {l} {w} blocks {}", sizes[l]);
        }
        for (v, var) in self.variables.iter().enumerate() {
            let part = if var.imaginary { "im" } else { "re" };
            let _ = writeln!(s, "* x{} = {part} σ[{}]({},{})", v + 1, layout.labels[var.label], var.row, var.col);
        }
        let p = &self.sdpa;
        let _ = writeln!(s, "{}", p.c.len());
        let _ = writeln!(s, "{}", p.blocks.len());
        let _ = writeln!(s, "{}", p.blocks.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(" "));
        let _ = writeln!(s, "{}", p.c.iter().map(|v| format!("{v:.17e}")).collect::<Vec<_>>().join(" "));
        for (i, m) in std::iter::once(&p.f0).chain(&p.f).enumerate() {
            for &(b, r, cc, v) in &m.entries {
                let _ = writeln!(s, "{i} {} {} {} {v:.17e}", b + 1, r + 1, cc + 1);
            }
        }
        s
    }
}

/// Places coef·Tᵀ on the diagonal block of `word`.
fn add_diagonal(m: &mut CMat, layout: &MomentLayout, word: &Word, t: &Operator, coef: f64) -> Result<()> {
    let j = layout.word_index(word).ok_or_else(|| Error::Shape(format!("word {word} is not in the layout")))?;
    let d = layout.trusted_dim;
    if t.side() != d {
        return Err(Error::Shape(format!("client operator of side {} for trusted dim {d}", t.side())));
    }
    for a in 0..d {
        for b in 0..d {
            m[(j * d + a, j * d + b)] += t.get(b, a) * coef;
        }
    }
    Ok(())
}

/// Σ coef·tr(T·Σ_𝐚 (−1)^{Σ𝐚} σ_{𝐚|𝐱}) over the given terms, expanding
/// Π_p(2E^{(p)}_{0|x_p} − I) into words.
pub fn correlator_functional(layout: &MomentLayout, terms: &[(f64, Operator, Vec<usize>)]) -> Result<CMat> {
    let n = layout.side();
    let np = layout.providers();
    let mut m = CMat::zeros(n, n);
    for (coef, t, settings) in terms {
        if settings.len() != np {
            return Err(Error::Shape(format!("{} settings for {np} providers", settings.len())));
        }
        for subset in 0..(1usize << np) {
            let mut letters = vec![Vec::new(); np];
            let mut weight = *coef;
            for p in 0..np {
                if subset >> p & 1 == 1 {
                    letters[p].push(settings[p]);
                    weight *= 2.0;
                } else {
                    weight = -weight;
                }
            }
            add_diagonal(&mut m, layout, &Word::new(letters), t, weight)?;
        }
    }
    Ok(m)
}

/// Expansion of the SWAP-isometry Kraus operators K₀ = E_{0|0} and
/// K₁ = (2E_{0|1} − I)(I − E_{0|0}) into words of one provider.
fn kraus_words(b: usize) -> Vec<(Vec<usize>, f64)> {
    match b {
        0 => vec![(vec![0], 1.0)],
        _ => vec![(vec![], -1.0), (vec![0], 1.0), (vec![1], 2.0), (vec![1, 0], -2.0)],
    }
}

/// M = m m† with G = tr(MᵀΓ) the overlap of `target` (on trusted factors
/// followed by one ancilla qubit per provider) with the post-isometry state.
pub fn fidelity_objective(layout: &MomentLayout, target: &Ket) -> Result<CMat> {
    let d = layout.trusted_dim;
    let np = layout.providers();
    let na = 1usize << np;
    if target.len() != d * na {
        return Err(Error::Shape(format!("target of length {} for trusted dim {d} and {np} ancillas", target.len())));
    }
    let mut m = vec![ZERO; layout.side()];
    for i in 0..d {
        for bits in 0..na {
            let amp = target.amps()[i * na + bits].conj();
            if amp == ZERO {
                continue;
            }
            // provider 0 is the most significant ancilla bit
            let mut expansion: Vec<(Vec<Vec<usize>>, f64)> = vec![(Vec::new(), 1.0)];
            for p in 0..np {
                let b = bits >> (np - 1 - p) & 1;
                let mut next = Vec::new();
                for (letters, coef) in &expansion {
                    for (w, k) in kraus_words(b) {
                        let mut l = letters.clone();
                        l.push(w);
                        next.push((l, coef * k));
                    }
                }
                expansion = next;
            }
            for (letters, coef) in expansion {
                let word = Word::new(letters);
                let j = layout.word_index(&word).ok_or_else(|| Error::Shape(format!("word {word} is not in the layout")))?;
                m[j * d + i] += amp * coef;
            }
        }
    }
    let v = nalgebra::DVector::from_vec(m);
    Ok(&v * v.adjoint())
}

fn check_eta(eta: f64, max: f64) -> Result<()> {
    if (0.0..=max).contains(&eta) {
        Ok(())
    } else {
        Err(Error::OutOfRange { name: "eta", value: eta })
    }
}

fn place(m: &mut CMat, j: usize, k: usize, block: &Operator) {
    m.view_mut((2 * j, 2 * k), (2, 2)).copy_from(block.entries());
}

/// The EPR objective matrix M as printed, with W = diag(0, 1) and
/// Y = [[0, 0], [2, 0]].
pub fn epr_objective() -> CMat {
    let w = Operator::diag(&[0.0, 1.0]);
    let y = Operator::from_real_rows(&[&[0.0, 0.0], &[2.0, 0.0]]);
    let mut m = CMat::zeros(8, 8);
    place(&mut m, 0, 0, &w);
    place(&mut m, 0, 3, &y);
    place(&mut m, 1, 1, &qubit::z());
    place(&mut m, 3, 0, &y.transpose());
    place(&mut m, 3, 3, &qubit::x().scale_re(-2.0));
    m * r(0.5)
}

/// The EPR functional matrix N as printed, encoding trS.
pub fn epr_functional() -> CMat {
    let mut n = CMat::zeros(8, 8);
    place(&mut n, 0, 0, &(&qubit::x() + &qubit::z()).scale_re(-0.5));
    place(&mut n, 1, 1, &qubit::z());
    place(&mut n, 2, 2, &qubit::x());
    n * r(2.0 * SQRT_2)
}

/// Singlet fidelity minimized subject to trS ≥ 2√2 − η.
pub fn epr_problem(eta: f64) -> Result<MomentProblem> {
    check_eta(eta, 2.0 * SQRT_2)?;
    MomentProblem::new(MomentLayout::single(2), epr_objective(), epr_functional(), 2.0 * SQRT_2 - eta)
}

/// The EPR problem with M rebuilt from the isometry's Kraus expansion and
/// N from the correlator expansion of trS.
pub fn epr_problem_generic(eta: f64) -> Result<MomentProblem> {
    check_eta(eta, 2.0 * SQRT_2)?;
    let layout = MomentLayout::single(2);
    let m = fidelity_objective(&layout, &qubit::ebit())?;
    let terms = vec![(SQRT_2, qubit::z(), vec![0]), (SQRT_2, qubit::x(), vec![1])];
    let n = correlator_functional(&layout, &terms)?;
    MomentProblem::new(layout, m, n, 2.0 * SQRT_2 - eta)
}

/// GHZ fidelity minimized subject to trB ≥ 4 − η, with two trusted qubits
/// (`setting` 2) or one trusted qubit and two providers (`setting` 1).
pub fn ghz_problem(setting: u8, eta: f64) -> Result<MomentProblem> {
    check_eta(eta, 8.0)?;
    let layout = match setting {
        2 => MomentLayout::single(4),
        1 => MomentLayout::product(2, 2),
        _ => return Err(Error::Unsupported(format!("GHZ setting {setting}"))),
    };
    let terms: Vec<(f64, Operator, Vec<usize>)> =
        mermin_terms(setting)?.into_iter().map(|(coef, letters, x)| (coef, pauli_string(letters), x)).collect();
    let n = correlator_functional(&layout, &terms)?;
    let m = fidelity_objective(&layout, &ghz_state())?;
    MomentProblem::new(layout, m, n, 4.0 - eta)
}

/// Labels of every block, for display.
pub fn block_labels(layout: &MomentLayout) -> BTreeMap<(usize, usize), String> {
    let mut out = BTreeMap::new();
    for (j, row) in layout.blocks.iter().enumerate() {
        for (k, b) in row.iter().enumerate() {
            let w = &layout.labels[b.label];
            let s = if b.dagger { format!("({w})†") } else { w.to_string() };
            out.insert((j, k), s);
        }
    }
    out
}
