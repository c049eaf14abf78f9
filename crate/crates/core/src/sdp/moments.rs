//! Operator words, moment labels and the block layout of Γ.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::Experiment;
use crate::linalg::{CMat, Ket};

/// A product of outcome-0 projectors, one reduced letter string per
/// provider. Letter x stands for E_{0|x}; letters are in operator order, so
/// [1, 0] is E_{0|1}·E_{0|0}.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Word(pub Vec<Vec<usize>>);

fn reduce(letters: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::with_capacity(letters.len());
    for &l in letters {
        if out.last() != Some(&l) {
            out.push(l);
        }
    }
    out
}

impl Word {
    pub fn identity(providers: usize) -> Self {
        Word(vec![Vec::new(); providers])
    }

    /// Reduces each provider's string with E·E = E.
    pub fn new(letters: Vec<Vec<usize>>) -> Self {
        Word(letters.iter().map(|l| reduce(l)).collect())
    }

    pub fn single(letters: &[usize]) -> Self {
        Word::new(vec![letters.to_vec()])
    }

    pub fn providers(&self) -> usize {
        self.0.len()
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|l| l.is_empty())
    }

    pub fn adjoint(&self) -> Self {
        Word(self.0.iter().map(|l| l.iter().rev().copied().collect()).collect())
    }

    pub fn is_self_adjoint(&self) -> bool {
        *self == self.adjoint()
    }

    /// self·other, reduced; letters of different providers commute.
    pub fn mul(&self, other: &Word) -> Self {
        Word::new(self.0.iter().zip(&other.0).map(|(a, b)| a.iter().chain(b).copied().collect()).collect())
    }

    /// (I_C ⊗ word)|ψ⟩ using each provider's outcome-0 projectors.
    pub fn apply(&self, e: &Experiment) -> Result<Ket> {
        if e.providers().len() != self.providers() {
            return Err(Error::Shape(format!("word for {} providers on an experiment with {}", self.providers(), e.providers().len())));
        }
        let mut k = e.state().clone();
        for (p, letters) in self.0.iter().enumerate() {
            let prov = e.provider(p);
            for &x in letters.iter().rev() {
                if x >= prov.measurements.settings() {
                    return Err(Error::Shape(format!("provider {p} has no setting {x} for symbol {self}")));
                }
                k = k.apply(prov.measurements.projector(0, x), &prov.factors)?;
            }
        }
        Ok(k)
    }
}

const PROVIDER_SYMBOLS: [&str; 2] = ["E", "F"];

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return f.write_str("I");
        }
        let mut first = true;
        for (p, letters) in self.0.iter().enumerate() {
            if letters.is_empty() {
                continue;
            }
            if !first {
                f.write_str("⊗")?;
            }
            first = false;
            for &x in letters {
                match PROVIDER_SYMBOLS.get(p) {
                    Some(s) => write!(f, "{s}0{x}")?,
                    None => write!(f, "E{p}_0{x}")?,
                }
            }
        }
        Ok(())
    }
}

/// I, E_{0|0}, E_{0|1}, E_{0|1}E_{0|0}
pub fn single_provider_words() -> Vec<Word> {
    vec![Word::single(&[]), Word::single(&[0]), Word::single(&[1]), Word::single(&[1, 0])]
}

/// All products of one word per provider, provider 0 outermost.
pub fn product_words(providers: usize) -> Vec<Word> {
    let base = single_provider_words();
    let mut out = vec![Vec::new()];
    for _ in 0..providers {
        let mut next = Vec::new();
        for prefix in &out {
            for w in &base {
                let mut letters: Vec<Vec<usize>> = prefix.clone();
                letters.push(w.0[0].clone());
                next.push(letters);
            }
        }
        out = next;
    }
    out.into_iter().map(Word).collect()
}

/// Moment label of one d×d block of Γ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockRef {
    /// Index into [`MomentLayout::labels`].
    pub label: usize,
    /// The block is the adjoint of the label's moment.
    pub dagger: bool,
}

/// Γ's block structure: block (j, k) is tr_P(w_j ρ w_k†) = σ_{w_k†w_j}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentLayout {
    pub words: Vec<Word>,
    pub trusted_dim: usize,
    /// Canonical labels; the adjoint of a listed non-self-adjoint label is
    /// not listed.
    pub labels: Vec<Word>,
    /// blocks[j][k]
    pub blocks: Vec<Vec<BlockRef>>,
}

impl MomentLayout {
    pub fn new(words: Vec<Word>, trusted_dim: usize) -> Result<Self> {
        let np = words.first().map(Word::providers).ok_or_else(|| Error::Shape("empty word list".into()))?;
        if words.iter().any(|w| w.providers() != np) {
            return Err(Error::Shape("words disagree on the number of providers".into()));
        }
        let mut index: BTreeMap<Word, usize> = BTreeMap::new();
        let mut labels = Vec::new();
        let mut blocks = Vec::new();
        for wj in &words {
            let mut row = Vec::new();
            for wk in &words {
                let label = wk.adjoint().mul(wj);
                let adj = label.adjoint();
                let r = if let Some(&i) = index.get(&label) {
                    BlockRef { label: i, dagger: false }
                } else if let Some(&i) = index.get(&adj) {
                    BlockRef { label: i, dagger: true }
                } else {
                    index.insert(label.clone(), labels.len());
                    labels.push(label);
                    BlockRef { label: labels.len() - 1, dagger: false }
                };
                row.push(r);
            }
            blocks.push(row);
        }
        Ok(Self { words, trusted_dim, labels, blocks })
    }

    /// S = {I, E00, E01, E01E00} for one provider.
    pub fn single(trusted_dim: usize) -> Self {
        Self::new(single_provider_words(), trusted_dim).expect("nonempty")
    }

    /// The product word set for `providers` providers.
    pub fn product(providers: usize, trusted_dim: usize) -> Self {
        Self::new(product_words(providers), trusted_dim).expect("nonempty")
    }

    pub fn providers(&self) -> usize {
        self.words[0].providers()
    }

    /// Side length of Γ.
    pub fn side(&self) -> usize {
        self.words.len() * self.trusted_dim
    }

    pub fn word_index(&self, w: &Word) -> Option<usize> {
        self.words.iter().position(|v| v == w)
    }

    pub fn identity_label(&self) -> usize {
        self.labels.iter().position(Word::is_identity).expect("I·I = I is always a label")
    }

    /// Number of blocks in each label's equality class.
    pub fn class_sizes(&self) -> Vec<usize> {
        let mut out = vec![0; self.labels.len()];
        for row in &self.blocks {
            for b in row {
                out[b.label] += 1;
            }
        }
        out
    }

    /// Γ with entries Γ[(j,i),(k,i′)] = ⟨i|tr_P(w_j|ψ⟩⟨ψ|w_k†)|i′⟩.
    pub fn gamma_from_experiment(&self, e: &Experiment) -> Result<CMat> {
        if e.trusted_dim() != self.trusted_dim {
            return Err(Error::Shape(format!("trusted dim {} for a layout over {}", e.trusted_dim(), self.trusted_dim)));
        }
        let d = self.trusted_dim;
        let dp: usize = e.untrusted_dims().iter().product();
        // rows of Φ_j are ⟨i|w_j|ψ⟩ as vectors on the provider space
        let phis: Vec<CMat> = self
            .words
            .iter()
            .map(|w| w.apply(e).map(|k| CMat::from_fn(d, dp, |i, p| k.amps()[i * dp + p])))
            .collect::<Result<_>>()?;
        let n = self.side();
        let mut g = CMat::zeros(n, n);
        for (j, pj) in phis.iter().enumerate() {
            for (k, pk) in phis.iter().enumerate() {
                let block = pj * pk.adjoint();
                g.view_mut((j * d, k * d), (d, d)).copy_from(&block);
            }
        }
        Ok(g)
    }

    /// Largest deviation of any block from its class representative.
    pub fn class_defect(&self, gamma: &CMat) -> f64 {
        let d = self.trusted_dim;
        let mut reps: Vec<Option<CMat>> = vec![None; self.labels.len()];
        let mut worst = 0.0f64;
        for (j, row) in self.blocks.iter().enumerate() {
            for (k, b) in row.iter().enumerate() {
                let block = gamma.view((j * d, k * d), (d, d)).into_owned();
                let block = if b.dagger { block.adjoint() } else { block };
                match &reps[b.label] {
                    None => reps[b.label] = Some(block),
                    Some(rep) => worst = worst.max((rep - &block).camax()),
                }
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::epr_reference;
    use crate::linalg::{qubit, Operator};

    #[test]
    fn reduction_and_adjoint() {
        let ab = Word::single(&[0, 1]);
        assert_eq!(ab.mul(&Word::single(&[1, 0])), Word::single(&[0, 1, 0]));
        assert_eq!(Word::single(&[0, 0, 1, 1]), Word::single(&[0, 1]));
        assert_eq!(ab.adjoint(), Word::single(&[1, 0]));
        assert!(Word::single(&[0, 1, 0]).is_self_adjoint());
        assert_eq!(Word::single(&[1, 0]).to_string(), "E01E00");
        assert_eq!(Word::new(vec![vec![0], vec![1, 0]]).to_string(), "E00⊗F01F00");
    }

    #[test]
    fn epr_layout_matches_display() {
        let l = MomentLayout::single(2);
        // labels I, E00, E01, E00E01, E01E00 (as adjoint), E00E01E00
        assert_eq!(l.labels.len(), 5);
        assert_eq!(l.side(), 8);
        let label = |j: usize, k: usize| {
            let b = l.blocks[j][k];
            let w = &l.labels[b.label];
            if b.dagger {
                w.adjoint()
            } else {
                w.clone()
            }
        };
        assert_eq!(label(0, 3), Word::single(&[0, 1]));
        assert_eq!(label(1, 2), Word::single(&[1, 0]));
        assert_eq!(label(3, 1), Word::single(&[0, 1, 0]));
        assert_eq!(label(2, 2), Word::single(&[1]));
        for j in 0..4 {
            for k in 0..4 {
                assert_eq!(label(j, k), label(k, j).adjoint());
            }
        }
    }

    #[test]
    fn product_layout_sizes() {
        let l = MomentLayout::product(2, 2);
        assert_eq!(l.words.len(), 16);
        assert_eq!(l.side(), 32);
        assert_eq!(l.labels.len(), 26);
    }

    #[test]
    fn ideal_epr_gamma() {
        let l = MomentLayout::single(2);
        let g = l.gamma_from_experiment(&epr_reference()).unwrap();
        let block = |j: usize, k: usize| Operator::from_matrix(g.view((2 * j, 2 * k), (2, 2)).into_owned());
        assert!(block(0, 0).approx_eq(&qubit::id().scale_re(0.5), 1e-12));
        assert!(block(1, 1).approx_eq(&Operator::projector(&qubit::ket0()).scale_re(0.5), 1e-12));
        assert!(l.class_defect(&g) < 1e-12);
        let herm = Operator::from_matrix(g.clone());
        assert!(herm.is_hermitian(1e-12));
        assert!(herm.min_eigenvalue() > -1e-12);
    }
}
