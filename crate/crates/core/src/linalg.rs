//! Dense complex linear algebra on tensor-product spaces.
//!
//! Every [`Operator`] and [`Ket`] carries the list of tensor-factor
//! dimensions it lives on. Factor 0 is the most significant digit of the
//! flat index.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Default absolute tolerance for approximate comparisons.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Tolerance used when testing Hermiticity before taking the eigenvalue route.
pub const HERMITIAN_TOL: f64 = 1e-12;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn r(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn product(dims: &[usize]) -> usize {
    dims.iter().product()
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

/// Flat offsets of every multi-index over `factors`, in row-major order of
/// those factors, measured with the strides of the full space.
fn offsets(dims: &[usize], factors: &[usize]) -> Vec<usize> {
    let st = strides(dims);
    let mut out = vec![0usize];
    for &f in factors {
        let mut next = Vec::with_capacity(out.len() * dims[f]);
        for &o in &out {
            for d in 0..dims[f] {
                next.push(o + d * st[f]);
            }
        }
        out = next;
    }
    out
}

fn check_factors(dims: &[usize], factors: &[usize]) -> Result<()> {
    for (i, &f) in factors.iter().enumerate() {
        if f >= dims.len() {
            return Err(Error::FactorOutOfRange { index: f, factors: dims.len() });
        }
        if factors[..i].contains(&f) {
            return Err(Error::DimensionMismatch(format!("factor {f} listed twice")));
        }
    }
    Ok(())
}

fn complement(n: usize, factors: &[usize]) -> Vec<usize> {
    (0..n).filter(|i| !factors.contains(i)).collect()
}

/// A dense complex matrix on a tensor-product space.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    entries: CMat,
    dims: Vec<usize>,
}

impl Operator {
    pub fn new(entries: CMat, dims: Vec<usize>) -> Result<Self> {
        let n = product(&dims);
        if entries.nrows() != n || entries.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix for factor dims {:?}",
                entries.nrows(),
                entries.ncols(),
                dims
            )));
        }
        Ok(Self { entries, dims })
    }

    /// Wraps a square matrix as a single-factor operator.
    pub fn from_matrix(entries: CMat) -> Self {
        assert_eq!(entries.nrows(), entries.ncols(), "operator must be square");
        let n = entries.nrows();
        Self { entries, dims: vec![n] }
    }

    /// Builds a single-factor operator from row-major entries.
    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let n = rows.len();
        Self::from_matrix(CMat::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        Self::from_matrix(CMat::from_fn(n, n, |i, j| r(rows[i][j])))
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        Self::from_matrix(CMat::from_fn(n, n, |i, j| if i == j { r(values[i]) } else { ZERO }))
    }

    pub fn identity(dims: &[usize]) -> Self {
        let n = product(dims);
        Self { entries: CMat::identity(n, n), dims: dims.to_vec() }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        let n = product(dims);
        Self { entries: CMat::zeros(n, n), dims: dims.to_vec() }
    }

    /// |a⟩⟨b|
    pub fn outer(a: &Ket, b: &Ket) -> Self {
        Self { entries: &a.amps * b.amps.adjoint(), dims: a.dims.clone() }
    }

    /// |k⟩⟨k|
    pub fn projector(k: &Ket) -> Self {
        Self::outer(k, k)
    }

    pub fn entries(&self) -> &CMat {
        &self.entries
    }

    pub fn into_entries(self) -> CMat {
        self.entries
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn side(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.entries[(i, j)]
    }

    /// Re-declares the factor structure without touching the entries.
    pub fn with_dims(mut self, dims: Vec<usize>) -> Result<Self> {
        if product(&dims) != self.side() {
            return Err(Error::DimensionMismatch(format!("dims {:?} for side {}", dims, self.side())));
        }
        self.dims = dims;
        Ok(self)
    }

    pub fn adjoint(&self) -> Self {
        Self { entries: self.entries.adjoint(), dims: self.dims.clone() }
    }

    pub fn conj(&self) -> Self {
        Self { entries: self.entries.map(|z| z.conj()), dims: self.dims.clone() }
    }

    pub fn transpose(&self) -> Self {
        Self { entries: self.entries.transpose(), dims: self.dims.clone() }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { entries: &self.entries * s, dims: self.dims.clone() }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(r(s))
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    /// tr(self · other)
    pub fn trace_product(&self, other: &Operator) -> C64 {
        let n = self.side();
        let mut acc = ZERO;
        for i in 0..n {
            for j in 0..n {
                acc += self.entries[(i, j)] * other.entries[(j, i)];
            }
        }
        acc
    }

    /// Largest entrywise modulus of `self - self†`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.side();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.entries[(i, j)] - self.entries[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        self.entries
            .iter()
            .zip(other.entries.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &Operator, tol: f64) -> bool {
        self.dims == other.dims && self.max_abs_diff(other) <= tol
    }

    pub fn tensor(&self, other: &Operator) -> Operator {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Operator { entries: self.entries.kronecker(&other.entries), dims }
    }

    /// Lifts `self`, acting on `targets` (in that order), to the full space
    /// with factor dimensions `dims`.
    pub fn embed(&self, targets: &[usize], dims: &[usize]) -> Result<Operator> {
        check_factors(dims, targets)?;
        let tdims: Vec<usize> = targets.iter().map(|&t| dims[t]).collect();
        if product(&tdims) != self.side() {
            return Err(Error::DimensionMismatch(format!(
                "operator of side {} on factors {:?} of {:?}",
                self.side(),
                targets,
                dims
            )));
        }
        let rest = complement(dims.len(), targets);
        let to = offsets(dims, targets);
        let ro = offsets(dims, &rest);
        let n = product(dims);
        let mut out = CMat::zeros(n, n);
        for &base in &ro {
            for (a, &oa) in to.iter().enumerate() {
                for (b, &ob) in to.iter().enumerate() {
                    out[(base + oa, base + ob)] = self.entries[(a, b)];
                }
            }
        }
        Ok(Operator { entries: out, dims: dims.to_vec() })
    }

    /// Reorders tensor factors: factor `i` of the result is factor `order[i]` of `self`.
    pub fn permute(&self, order: &[usize]) -> Result<Operator> {
        let perm = permutation_map(&self.dims, order)?;
        let n = self.side();
        let mut out = CMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out[(perm[i], perm[j])] = self.entries[(i, j)];
            }
        }
        Ok(Operator { entries: out, dims: order.iter().map(|&o| self.dims[o]).collect() })
    }

    /// Eigenvalues in ascending order, assuming Hermiticity.
    pub fn eigenvalues(&self) -> Vec<f64> {
        eigh(self).0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator { entries: &self.entries + &rhs.entries, dims: self.dims.clone() }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator { entries: &self.entries - &rhs.entries, dims: self.dims.clone() }
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator { entries: &self.entries * &rhs.entries, dims: self.dims.clone() }
    }
}

impl Mul<&Ket> for &Operator {
    type Output = Ket;
    fn mul(self, rhs: &Ket) -> Ket {
        Ket { amps: &self.entries * &rhs.amps, dims: rhs.dims.clone() }
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        Operator { entries: -&self.entries, dims: self.dims.clone() }
    }
}

/// A dense complex vector on a tensor-product space.
#[derive(Clone, Debug, PartialEq)]
pub struct Ket {
    amps: CVec,
    dims: Vec<usize>,
}

impl Ket {
    pub fn new(amps: CVec, dims: Vec<usize>) -> Result<Self> {
        if amps.len() != product(&dims) {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for factor dims {:?}",
                amps.len(),
                dims
            )));
        }
        Ok(Self { amps, dims })
    }

    pub fn from_amps(amps: &[C64]) -> Self {
        Self { amps: CVec::from_column_slice(amps), dims: vec![amps.len()] }
    }

    pub fn from_real(amps: &[f64]) -> Self {
        Self { amps: CVec::from_iterator(amps.len(), amps.iter().map(|&a| r(a))), dims: vec![amps.len()] }
    }

    /// Computational basis vector `index` on the given factors.
    pub fn basis(dims: &[usize], index: usize) -> Self {
        let mut amps = CVec::zeros(product(dims));
        amps[index] = ONE;
        Self { amps, dims: dims.to_vec() }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        Self { amps: CVec::zeros(product(dims)), dims: dims.to_vec() }
    }

    pub fn amps(&self) -> &CVec {
        &self.amps
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn with_dims(mut self, dims: Vec<usize>) -> Result<Self> {
        if product(&dims) != self.len() {
            return Err(Error::DimensionMismatch(format!("dims {:?} for length {}", dims, self.len())));
        }
        self.dims = dims;
        Ok(self)
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    pub fn norm_squared(&self) -> f64 {
        self.amps.norm_squared()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_squared() - 1.0).abs() <= tol
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Self { amps: &self.amps / r(n), dims: self.dims.clone() }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { amps: &self.amps * s, dims: self.dims.clone() }
    }

    pub fn conj(&self) -> Self {
        Self { amps: self.amps.map(|z| z.conj()), dims: self.dims.clone() }
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &Ket) -> C64 {
        self.amps.dotc(&other.amps)
    }

    pub fn tensor(&self, other: &Ket) -> Ket {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Ket { amps: self.amps.kronecker(&other.amps), dims }
    }

    pub fn permute(&self, order: &[usize]) -> Result<Ket> {
        let perm = permutation_map(&self.dims, order)?;
        let mut out = CVec::zeros(self.len());
        for (i, &p) in perm.iter().enumerate() {
            out[p] = self.amps[i];
        }
        Ok(Ket { amps: out, dims: order.iter().map(|&o| self.dims[o]).collect() })
    }

    /// Applies `op` to the factors `targets` (in that order), identity elsewhere.
    pub fn apply(&self, op: &Operator, targets: &[usize]) -> Result<Ket> {
        check_factors(&self.dims, targets)?;
        let tdims: Vec<usize> = targets.iter().map(|&t| self.dims[t]).collect();
        if product(&tdims) != op.side() {
            return Err(Error::DimensionMismatch(format!(
                "operator of side {} on factors {:?} of {:?}",
                op.side(),
                targets,
                self.dims
            )));
        }
        let rest = complement(self.dims.len(), targets);
        let to = offsets(&self.dims, targets);
        let ro = offsets(&self.dims, &rest);
        let m = op.entries();
        let mut out = CVec::zeros(self.len());
        for &base in &ro {
            for (a, &oa) in to.iter().enumerate() {
                let mut acc = ZERO;
                for (b, &ob) in to.iter().enumerate() {
                    acc += m[(a, b)] * self.amps[base + ob];
                }
                out[base + oa] = acc;
            }
        }
        Ok(Ket { amps: out, dims: self.dims.clone() })
    }

    /// Contracts the factors `factors` against the bra ⟨b|, leaving a ket on
    /// the remaining factors.
    pub fn contract(&self, b: &Ket, factors: &[usize]) -> Result<Ket> {
        check_factors(&self.dims, factors)?;
        let fdims: Vec<usize> = factors.iter().map(|&f| self.dims[f]).collect();
        if product(&fdims) != b.len() {
            return Err(Error::DimensionMismatch(format!(
                "bra of length {} on factors {:?} of {:?}",
                b.len(),
                factors,
                self.dims
            )));
        }
        let rest = complement(self.dims.len(), factors);
        let fo = offsets(&self.dims, factors);
        let ro = offsets(&self.dims, &rest);
        let mut out = CVec::zeros(ro.len());
        for (i, &base) in ro.iter().enumerate() {
            let mut acc = ZERO;
            for (k, &ok) in fo.iter().enumerate() {
                acc += b.amps[k].conj() * self.amps[base + ok];
            }
            out[i] = acc;
        }
        Ok(Ket { amps: out, dims: rest.iter().map(|&f| self.dims[f]).collect() })
    }

    /// Reduced density operator on `keep`, without forming |ψ⟩⟨ψ|.
    pub fn reduced(&self, keep: &[usize]) -> Result<Operator> {
        check_factors(&self.dims, keep)?;
        let rest = complement(self.dims.len(), keep);
        let ko = offsets(&self.dims, keep);
        let to = offsets(&self.dims, &rest);
        let n = ko.len();
        let mut out = CMat::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut acc = ZERO;
                for &t in &to {
                    acc += self.amps[ko[i] + t] * self.amps[ko[j] + t].conj();
                }
                out[(i, j)] = acc;
                out[(j, i)] = acc.conj();
            }
        }
        Ok(Operator { entries: out, dims: keep.iter().map(|&k| self.dims[k]).collect() })
    }
}

impl Add for &Ket {
    type Output = Ket;
    fn add(self, rhs: &Ket) -> Ket {
        Ket { amps: &self.amps + &rhs.amps, dims: self.dims.clone() }
    }
}

impl Sub for &Ket {
    type Output = Ket;
    fn sub(self, rhs: &Ket) -> Ket {
        Ket { amps: &self.amps - &rhs.amps, dims: self.dims.clone() }
    }
}

fn permutation_map(dims: &[usize], order: &[usize]) -> Result<Vec<usize>> {
    if order.len() != dims.len() {
        return Err(Error::DimensionMismatch(format!("permutation {:?} of {} factors", order, dims.len())));
    }
    check_factors(dims, order)?;
    let new_dims: Vec<usize> = order.iter().map(|&o| dims[o]).collect();
    let new_st = strides(&new_dims);
    // old factor f lands at position pos[f] of the new order
    let mut pos = vec![0; dims.len()];
    for (i, &o) in order.iter().enumerate() {
        pos[o] = i;
    }
    let n = product(dims);
    let mut map = vec![0usize; n];
    let mut digits = vec![0usize; dims.len()];
    for (idx, slot) in map.iter_mut().enumerate() {
        let mut rem = idx;
        for f in (0..dims.len()).rev() {
            digits[f] = rem % dims[f];
            rem /= dims[f];
        }
        *slot = (0..dims.len()).map(|f| digits[f] * new_st[pos[f]]).sum();
    }
    Ok(map)
}

/// Kronecker product of two operators or two kets.
pub trait Tensor {
    fn tensor_with(&self, other: &Self) -> Self;
}

impl Tensor for Operator {
    fn tensor_with(&self, other: &Self) -> Self {
        self.tensor(other)
    }
}

impl Tensor for Ket {
    fn tensor_with(&self, other: &Self) -> Self {
        self.tensor(other)
    }
}

pub fn tensor<T: Tensor>(a: &T, b: &T) -> T {
    a.tensor_with(b)
}

/// Tensor product of a nonempty list.
pub fn tensor_all<T: Tensor + Clone>(items: &[T]) -> T {
    let mut acc = items[0].clone();
    for it in &items[1..] {
        acc = acc.tensor_with(it);
    }
    acc
}

/// Partial trace keeping the factors `keep`, in the order given.
pub fn partial_trace(m: &Operator, keep: &[usize]) -> Result<Operator> {
    if m.dims.len() < 2 {
        return Err(Error::Shape("partial trace needs at least two factors".into()));
    }
    check_factors(&m.dims, keep)?;
    let rest = complement(m.dims.len(), keep);
    let ko = offsets(&m.dims, keep);
    let to = offsets(&m.dims, &rest);
    let n = ko.len();
    let mut out = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = ZERO;
            for &t in &to {
                acc += m.entries[(ko[i] + t, ko[j] + t)];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(Operator { entries: out, dims: keep.iter().map(|&k| m.dims[k]).collect() })
}

/// Hermitian eigendecomposition: ascending eigenvalues and matching
/// eigenvector columns. Only the Hermitian part of `m` is used.
pub fn eigh(m: &Operator) -> (Vec<f64>, CMat) {
    let h = (&m.entries + m.entries.adjoint()) * r(0.5);
    let eig = h.symmetric_eigen();
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let n = m.side();
    let vectors = CMat::from_fn(n, n, |row, col| eig.eigenvectors[(row, idx[col])]);
    (values, vectors)
}

/// Singular values in descending order.
pub fn singular_values(m: &Operator) -> Vec<f64> {
    let mut s: Vec<f64> = m.entries.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Schatten 1-norm.
pub fn trace_norm(m: &Operator) -> f64 {
    if m.side() == 0 {
        return 0.0;
    }
    if m.is_hermitian(HERMITIAN_TOL) {
        eigh(m).0.iter().map(|l| l.abs()).sum()
    } else {
        singular_values(m).iter().sum()
    }
}

/// ½‖r − s‖₁
pub fn trace_distance(r: &Operator, s: &Operator) -> Result<f64> {
    if r.dims != s.dims {
        return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", r.dims, s.dims)));
    }
    Ok(0.5 * trace_norm(&(r - s)))
}

/// ‖a‖²‖b‖² − |⟨a|b⟩|², computed as ‖a‖²‖b − ⟨a|b⟩a/‖a‖²‖² to avoid cancellation.
fn gram_defect(a: &Ket, b: &Ket) -> f64 {
    let na = a.norm_squared();
    if na == 0.0 {
        return 0.0;
    }
    let coef = a.inner(b) / r(na);
    let perp = &b.amps - &a.amps * coef;
    na * perp.norm_squared()
}

/// ‖|a⟩⟨a| − |b⟩⟨b|‖₁ for unnormalized vectors, in closed form.
pub fn pure_pair_trace_norm(a: &Ket, b: &Ket) -> f64 {
    let d = a.norm_squared() - b.norm_squared();
    (d * d + 4.0 * gram_defect(a, b)).max(0.0).sqrt()
}

/// Trace distance between two pure states, √(1 − |⟨a|b⟩|²) after normalization.
pub fn pure_trace_distance(a: &Ket, b: &Ket) -> f64 {
    let n = a.norm_squared() * b.norm_squared();
    (gram_defect(a, b) / n).max(0.0).sqrt()
}

/// Schmidt decomposition across the cut after the first `split` factors.
#[derive(Clone, Debug)]
pub struct Schmidt {
    /// Squared Schmidt coefficients, descending; they sum to one.
    pub coefficients: Vec<f64>,
    pub left: Vec<Ket>,
    pub right: Vec<Ket>,
}

impl Schmidt {
    pub fn reconstruct(&self) -> Ket {
        let mut acc = self.left[0].tensor(&self.right[0]).scale(r(self.coefficients[0].sqrt()));
        for i in 1..self.coefficients.len() {
            let term = self.left[i].tensor(&self.right[i]).scale(r(self.coefficients[i].sqrt()));
            acc = &acc + &term;
        }
        acc
    }
}

pub fn schmidt(k: &Ket, split: usize) -> Result<Schmidt> {
    schmidt_with_tol(k, split, DEFAULT_TOL)
}

pub fn schmidt_with_tol(k: &Ket, split: usize, tol: f64) -> Result<Schmidt> {
    if !k.is_normalized(tol) {
        return Err(Error::NotNormalized(k.norm_squared()));
    }
    if split == 0 || split >= k.dims.len() {
        return Err(Error::Shape(format!("cannot split {} factors after {}", k.dims.len(), split)));
    }
    let ldims = k.dims[..split].to_vec();
    let rdims = k.dims[split..].to_vec();
    let (dl, dr) = (product(&ldims), product(&rdims));
    let m = CMat::from_fn(dl, dr, |i, j| k.amps[i * dr + j]);
    let svd = m.svd(true, true);
    let u = svd.u.expect("left vectors requested");
    let vt = svd.v_t.expect("right vectors requested");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut out = Schmidt { coefficients: vec![], left: vec![], right: vec![] };
    for &i in &idx {
        let s = svd.singular_values[i];
        out.coefficients.push(s * s);
        out.left.push(Ket { amps: u.column(i).into_owned(), dims: ldims.clone() });
        out.right.push(Ket { amps: vt.row(i).transpose(), dims: rdims.clone() });
    }
    Ok(out)
}

/// Applies a real function to the eigenvalues of a Hermitian operator.
pub fn hermitian_map(m: &Operator, f: impl Fn(f64) -> f64) -> Operator {
    let (vals, vecs) = eigh(m);
    let n = m.side();
    let d = CMat::from_fn(n, n, |i, j| if i == j { r(f(vals[i])) } else { ZERO });
    Operator { entries: &vecs * d * vecs.adjoint(), dims: m.dims.clone() }
}

/// Square root of a positive semidefinite operator; negative eigenvalues are clamped.
pub fn sqrt_psd(m: &Operator) -> Operator {
    hermitian_map(m, |x| x.max(0.0).sqrt())
}

/// Root fidelity tr√(√ρ σ √ρ).
pub fn fidelity(rho: &Operator, sigma: &Operator) -> Result<f64> {
    if rho.dims != sigma.dims {
        return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", rho.dims, sigma.dims)));
    }
    let s = sqrt_psd(rho);
    let inner = &(&s * sigma) * &s;
    Ok(eigh(&inner).0.iter().map(|l| l.max(0.0).sqrt()).sum())
}

/// Operator norm (largest singular value).
pub fn operator_norm(m: &Operator) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Matrix exponential of an anti-Hermitian operator, returned as a unitary.
pub fn expm_anti_hermitian(a: &Operator) -> Operator {
    // a = iH with H Hermitian
    let h = a.scale(-I);
    let (vals, vecs) = eigh(&h);
    let n = a.side();
    let d = CMat::from_fn(n, n, |i, j| if i == j { C64::from_polar(1.0, vals[i]) } else { ZERO });
    Operator { entries: &vecs * d * vecs.adjoint(), dims: a.dims.clone() }
}

/// Fixed single-qubit states and operators.
pub mod qubit {
    use super::*;

    pub fn ket0() -> Ket {
        Ket::basis(&[2], 0)
    }

    pub fn ket1() -> Ket {
        Ket::basis(&[2], 1)
    }

    pub fn plus() -> Ket {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Ket::from_real(&[s, s])
    }

    pub fn minus() -> Ket {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Ket::from_real(&[s, -s])
    }

    pub fn plus_y() -> Ket {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Ket::from_amps(&[r(s), c(0.0, s)])
    }

    pub fn minus_y() -> Ket {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Ket::from_amps(&[r(s), c(0.0, -s)])
    }

    pub fn id() -> Operator {
        Operator::identity(&[2])
    }

    pub fn x() -> Operator {
        Operator::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
    }

    pub fn y() -> Operator {
        Operator::from_rows(&[&[ZERO, -I], &[I, ZERO]])
    }

    pub fn z() -> Operator {
        Operator::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]])
    }

    pub fn h() -> Operator {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Operator::from_real_rows(&[&[s, s], &[s, -s]])
    }

    /// (|00⟩ + |11⟩)/√2
    pub fn ebit() -> Ket {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Ket::from_real(&[s, 0.0, 0.0, s]).with_dims(vec![2, 2]).expect("4 = 2·2")
    }
}

#[cfg(test)]
mod tests {
    use super::qubit::*;
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn tensor_of_identities_is_identity() {
        let t = tensor(&id(), &id());
        assert_eq!(t.dims(), &[2, 2]);
        assert!(t.approx_eq(&Operator::identity(&[2, 2]), 0.0));
    }

    #[test]
    fn tensor_of_basis_kets() {
        let k = tensor(&ket0(), &ket1());
        assert_eq!(k, Ket::basis(&[2, 2], 1));
    }

    #[test]
    fn tensor_of_paulis_spectrum() {
        let ev = tensor(&z(), &x()).eigenvalues();
        let expect = [-1.0, -1.0, 1.0, 1.0];
        for (a, b) in ev.iter().zip(expect) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn ebit_reduces_to_maximally_mixed() {
        let rho = partial_trace(&Operator::projector(&ebit()), &[0]).unwrap();
        assert!(rho.approx_eq(&id().scale_re(0.5), 1e-12));
        assert!(ebit().reduced(&[0]).unwrap().approx_eq(&rho, 1e-12));
    }

    #[test]
    fn partial_trace_of_product() {
        let rho = Operator::diag(&[0.3, 0.7]);
        let sigma = Operator::from_real_rows(&[&[0.5, 0.2], &[0.2, 1.5]]);
        let pt = partial_trace(&rho.tensor(&sigma), &[0]).unwrap();
        assert!(pt.approx_eq(&rho.scale_re(2.0), 1e-12));
        let pt1 = partial_trace(&rho.tensor(&sigma), &[1]).unwrap();
        assert!(pt1.approx_eq(&sigma, 1e-12));
    }

    #[test]
    fn partial_trace_rejects_bad_input() {
        assert!(partial_trace(&id(), &[0]).is_err());
        let two = Operator::identity(&[2, 2]);
        assert!(matches!(partial_trace(&two, &[2]), Err(Error::FactorOutOfRange { .. })));
    }

    #[test]
    fn partial_trace_keeps_requested_order() {
        let a = Operator::diag(&[1.0, 0.0]);
        let b = Operator::diag(&[0.0, 1.0]);
        let ab = a.tensor(&b);
        let ba = partial_trace(&ab.tensor(&id()), &[1, 0]).unwrap();
        assert!(ba.approx_eq(&b.tensor(&a).scale_re(2.0), 1e-12));
    }

    #[test]
    fn trace_norm_basics() {
        assert_abs_diff_eq!(trace_norm(&z()), 2.0, epsilon = 1e-12);
        assert_eq!(trace_norm(&Operator::zeros(&[3])), 0.0);
        let u = Ket::from_amps(&[c(0.3, 0.1), c(-0.2, 0.5)]);
        let v = Ket::from_amps(&[c(0.1, 0.0), c(0.4, -0.3)]);
        let t = Ket::from_amps(&[c(1.0, 0.2), c(0.0, 0.7)]);
        let b = Operator::outer(&(&u - &v), &t);
        assert_abs_diff_eq!(trace_norm(&b), t.norm() * (&u - &v).norm(), epsilon = 1e-12);
    }

    #[test]
    fn trace_distance_examples() {
        let p0 = Operator::projector(&ket0());
        let pp = Operator::projector(&plus());
        let p1 = Operator::projector(&ket1());
        assert_abs_diff_eq!(trace_distance(&p0, &p0).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(trace_distance(&p0, &pp).unwrap(), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(trace_distance(&p0, &p1).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pure_trace_distance(&ket0(), &plus()), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        assert!(trace_distance(&p0, &Operator::identity(&[3])).is_err());
    }

    #[test]
    fn pure_pair_norm_matches_spectrum() {
        let a = Ket::from_amps(&[c(0.3, 0.1), c(-0.2, 0.5), c(0.0, 0.1)]);
        let b = Ket::from_amps(&[c(0.1, 0.0), c(0.4, -0.3), c(0.2, 0.2)]);
        let diff = &Operator::projector(&a) - &Operator::projector(&b);
        assert_abs_diff_eq!(pure_pair_trace_norm(&a, &b), trace_norm(&diff), epsilon = 1e-12);
    }

    #[test]
    fn schmidt_examples() {
        let s = schmidt(&ebit(), 1).unwrap();
        assert_abs_diff_eq!(s.coefficients[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s.coefficients[1], 0.5, epsilon = 1e-12);

        let s = schmidt(&tensor(&ket0(), &ket0()), 1).unwrap();
        assert_abs_diff_eq!(s.coefficients[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.coefficients[1], 0.0, epsilon = 1e-12);

        let (l, u, v) = (0.6f64, plus(), Ket::from_amps(&[c(0.6, 0.0), c(0.0, 0.8)]));
        let vp = Ket::from_amps(&[c(0.0, 0.8), c(0.6, 0.0)]);
        let psi = &u.tensor(&v).scale(r(l.sqrt())) + &minus().tensor(&vp).scale(r((1.0 - l).sqrt()));
        let s = schmidt(&psi, 1).unwrap();
        assert_abs_diff_eq!(s.coefficients[0], 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(s.coefficients[1], 0.4, epsilon = 1e-12);
        assert!((&s.reconstruct() - &psi).norm() < 1e-10);

        assert!(matches!(schmidt(&Ket::basis(&[2, 2], 0).scale(r(2.0)), 1), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn permute_and_apply_agree_with_embed() {
        let k = Ket::from_amps(&(0..8).map(|i| c(i as f64, 1.0 - i as f64)).collect::<Vec<_>>())
            .with_dims(vec![2, 2, 2])
            .unwrap();
        let op = x().tensor(&h());
        let via_apply = k.apply(&op, &[2, 0]).unwrap();
        let via_embed = &op.embed(&[2, 0], &[2, 2, 2]).unwrap() * &k;
        assert!((&via_apply - &via_embed).norm() < 1e-12);
        let p = k.permute(&[2, 0, 1]).unwrap();
        let back = p.permute(&[1, 2, 0]).unwrap();
        assert_eq!(back, k);
        let pr = Operator::projector(&k).permute(&[2, 0, 1]).unwrap();
        assert!(pr.approx_eq(&Operator::projector(&p), 1e-12));
    }

    #[test]
    fn contract_against_basis() {
        let k = ebit();
        let left = k.contract(&ket1(), &[1]).unwrap();
        assert!((&left - &ket1().scale(r(std::f64::consts::FRAC_1_SQRT_2))).norm() < 1e-12);
    }

    #[test]
    fn fidelity_of_pure_states_is_overlap() {
        let f = fidelity(&Operator::projector(&ket0()), &Operator::projector(&plus())).unwrap();
        assert_abs_diff_eq!(f, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-7);
        let f = fidelity(&Operator::diag(&[0.5, 0.5]), &Operator::diag(&[0.5, 0.5])).unwrap();
        assert_abs_diff_eq!(f, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn exponential_of_pauli() {
        let t = 0.3;
        let u = expm_anti_hermitian(&x().scale(c(0.0, t)));
        let expect = &id().scale_re(t.cos()) + &x().scale(c(0.0, t.sin()));
        assert!(u.approx_eq(&expect, 1e-12));
    }
}
