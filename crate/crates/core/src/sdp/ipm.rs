//! Primal-dual interior-point solver for block-diagonal SDPs in SDPA form.
//!
//! Primal: minimize cᵀx subject to S = Σᵢ xᵢFᵢ − F₀ ⪰ 0.
//! Dual:   maximize F₀•Y subject to Fᵢ•Y = cᵢ, Y ⪰ 0.
//!
//! Infeasible-start path following with the HKM search direction and a
//! Mehrotra predictor-corrector step.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One stored entry of a symmetric matrix: (block, row, col, value) with
/// row ≤ col. An off-diagonal entry stands for both (row, col) and (col, row).
pub type Entry = (usize, usize, usize, f64);

/// Sparse symmetric block-diagonal matrix.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseSym {
    pub entries: Vec<Entry>,
}

impl SparseSym {
    /// Adds `value` at (r, c) and, by symmetry, at (c, r).
    pub fn add(&mut self, block: usize, r: usize, c: usize, value: f64) {
        if value == 0.0 {
            return;
        }
        let (r, c) = if r <= c { (r, c) } else { (c, r) };
        self.entries.push((block, r, c, value));
    }

    /// Merges duplicate positions and drops zeros.
    pub fn compact(&mut self) {
        self.entries.sort_by(|a, b| (a.0, a.1, a.2).cmp(&(b.0, b.1, b.2)));
        let mut out: Vec<Entry> = Vec::with_capacity(self.entries.len());
        for &(b, r, c, v) in &self.entries {
            match out.last_mut() {
                Some(last) if (last.0, last.1, last.2) == (b, r, c) => last.3 += v,
                _ => out.push((b, r, c, v)),
            }
        }
        out.retain(|e| e.3.abs() > 1e-15);
        self.entries = out;
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// tr(F G) for a dense block matrix G, not necessarily symmetric.
    pub fn dot(&self, g: &[DMatrix<f64>]) -> f64 {
        self.entries
            .iter()
            .map(|&(b, r, c, v)| if r == c { v * g[b][(r, r)] } else { v * (g[b][(c, r)] + g[b][(r, c)]) })
            .sum()
    }

    fn add_scaled_to(&self, s: f64, out: &mut [DMatrix<f64>]) {
        for &(b, r, c, v) in &self.entries {
            out[b][(r, c)] += s * v;
            if r != c {
                out[b][(c, r)] += s * v;
            }
        }
    }

    pub fn to_dense(&self, blocks: &[usize]) -> Vec<DMatrix<f64>> {
        let mut out = zeros(blocks);
        self.add_scaled_to(1.0, &mut out);
        out
    }

    fn full_entries(&self) -> Vec<Entry> {
        let mut out = Vec::with_capacity(2 * self.entries.len());
        for &(b, r, c, v) in &self.entries {
            out.push((b, r, c, v));
            if r != c {
                out.push((b, c, r, v));
            }
        }
        out
    }
}

/// A block-diagonal SDP in SDPA form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdpaProblem {
    pub blocks: Vec<usize>,
    pub c: Vec<f64>,
    pub f0: SparseSym,
    pub f: Vec<SparseSym>,
}

impl SdpaProblem {
    pub fn validate(&self) -> Result<()> {
        if self.c.len() != self.f.len() {
            return Err(Error::Shape(format!("{} costs for {} constraint matrices", self.c.len(), self.f.len())));
        }
        for m in std::iter::once(&self.f0).chain(&self.f) {
            for &(b, r, c, _) in &m.entries {
                if b >= self.blocks.len() || c >= self.blocks[b] || r > c {
                    return Err(Error::Shape(format!("entry ({b}, {r}, {c}) outside the block structure")));
                }
            }
        }
        Ok(())
    }

    /// Σᵢ xᵢFᵢ − F₀
    pub fn slack(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        let mut s = zeros(&self.blocks);
        self.f0.add_scaled_to(-1.0, &mut s);
        for (fi, &xi) in self.f.iter().zip(x) {
            fi.add_scaled_to(xi, &mut s);
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    Optimal,
    Inaccurate,
    Infeasible,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Inaccurate => "inaccurate",
            SolveStatus::Infeasible => "infeasible",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOutput {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// |cᵀx − F₀•Y| / (1 + |cᵀx| + |F₀•Y|)
    pub gap: f64,
    /// ‖Σ xᵢFᵢ − F₀ − S‖_F / (1 + ‖F₀‖_F)
    pub primal_infeasibility: f64,
    /// ‖c − (Fᵢ•Y)ᵢ‖ / (1 + ‖c‖)
    pub dual_infeasibility: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IpmOptions {
    pub tol: f64,
    pub max_iterations: usize,
    /// Initial S = Y = λI.
    pub initial_scale: f64,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
    /// Norm beyond which the iterates are taken to diverge.
    pub divergence: f64,
}

impl Default for IpmOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iterations: 200, initial_scale: 10.0, step_fraction: 0.95, divergence: 1e10 }
    }
}

fn zeros(blocks: &[usize]) -> Vec<DMatrix<f64>> {
    blocks.iter().map(|&n| DMatrix::zeros(n, n)).collect()
}

fn identity(blocks: &[usize], s: f64) -> Vec<DMatrix<f64>> {
    blocks.iter().map(|&n| DMatrix::identity(n, n) * s).collect()
}

fn frob(a: &[DMatrix<f64>]) -> f64 {
    a.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
}

fn inner(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn symmetrize(a: &mut [DMatrix<f64>]) {
    for m in a.iter_mut() {
        let t = m.transpose();
        *m += t;
        *m *= 0.5;
    }
}

fn inverse_spd(a: &[DMatrix<f64>]) -> Option<Vec<DMatrix<f64>>> {
    a.iter().map(|m| m.clone().cholesky().map(|c| c.inverse())).collect()
}

/// Largest α ≤ `cap` with A + α·D ⪰ 0, for A ≻ 0.
fn max_step(a: &[DMatrix<f64>], d: &[DMatrix<f64>], cap: f64) -> f64 {
    let mut alpha = cap;
    for (am, dm) in a.iter().zip(d) {
        let Some(ch) = am.clone().cholesky() else { return 0.0 };
        let l = ch.l();
        let Some(linv) = l.clone().try_inverse() else { return 0.0 };
        let w = &linv * dm * linv.transpose();
        let w = (&w + w.transpose()) * 0.5;
        let lmin = w.symmetric_eigenvalues().min();
        if lmin < 0.0 {
            alpha = alpha.min(-1.0 / lmin);
        }
    }
    alpha
}

fn schur(problem: &SdpaProblem, y: &[DMatrix<f64>], sinv: &[DMatrix<f64>]) -> DMatrix<f64> {
    let full: Vec<Vec<Entry>> = problem.f.iter().map(|f| f.full_entries()).collect();
    let m = full.len();
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0.0; m];
            for (j, fj) in full.iter().enumerate().skip(i) {
                let mut acc = 0.0;
                for &(b, r, c, v) in &full[i] {
                    for &(b2, p, q, w) in fj {
                        if b2 == b {
                            acc += v * w * y[b][(c, p)] * sinv[b][(q, r)];
                        }
                    }
                }
                row[j] = acc;
            }
            row
        })
        .collect();
    DMatrix::from_fn(m, m, |i, j| if i <= j { rows[i][j] } else { rows[j][i] })
}

fn solve_spd(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = m.clone().cholesky() {
        return Some(ch.solve(rhs));
    }
    m.clone().lu().solve(rhs)
}

struct Direction {
    dx: DVector<f64>,
    ds: Vec<DMatrix<f64>>,
    dy: Vec<DMatrix<f64>>,
}

/// Solves the Newton system for complementarity target Y S + dY S + Y dS = R.
#[allow(clippy::too_many_arguments)]
fn direction(
    problem: &SdpaProblem,
    schur_chol: &DMatrix<f64>,
    y: &[DMatrix<f64>],
    sinv: &[DMatrix<f64>],
    rd: &[DMatrix<f64>],
    rp: &[f64],
    r: &[DMatrix<f64>],
) -> Option<Direction> {
    // G = (R − Y·Rd) S⁻¹
    let g: Vec<DMatrix<f64>> = (0..y.len()).map(|b| (&r[b] - &y[b] * &rd[b]) * &sinv[b]).collect();
    let rhs = DVector::from_iterator(problem.f.len(), problem.f.iter().zip(rp).map(|(fi, &rpi)| fi.dot(&g) - rpi));
    let dx = solve_spd(schur_chol, &rhs)?;
    let mut ds = rd.to_vec();
    for (fi, &d) in problem.f.iter().zip(dx.iter()) {
        fi.add_scaled_to(d, &mut ds);
    }
    let mut dy: Vec<DMatrix<f64>> = (0..y.len()).map(|b| (&r[b] - &y[b] * &ds[b]) * &sinv[b]).collect();
    symmetrize(&mut dy);
    Some(Direction { dx, ds, dy })
}

pub fn solve(problem: &SdpaProblem, options: &IpmOptions) -> Result<SolverOutput> {
    problem.validate()?;
    let blocks = &problem.blocks;
    let n: usize = blocks.iter().sum();
    let m = problem.f.len();
    let c = DVector::from_column_slice(&problem.c);
    let cnorm = c.norm();
    let f0norm = frob(&problem.f0.to_dense(blocks));

    let mut x = DVector::<f64>::zeros(m);
    let mut s = identity(blocks, options.initial_scale);
    let mut y = identity(blocks, options.initial_scale);

    let mut best_merit = f64::INFINITY;
    let mut out = SolverOutput {
        status: SolveStatus::Inaccurate,
        x: vec![0.0; m],
        primal_objective: 0.0,
        dual_objective: 0.0,
        gap: f64::INFINITY,
        primal_infeasibility: f64::INFINITY,
        dual_infeasibility: f64::INFINITY,
        iterations: 0,
    };

    for iter in 0..=options.max_iterations {
        let mut rd = problem.slack(x.as_slice());
        for (rb, sb) in rd.iter_mut().zip(&s) {
            *rb -= sb;
        }
        let rp: Vec<f64> = problem.f.iter().zip(&problem.c).map(|(fi, &ci)| ci - fi.dot(&y)).collect();
        let pobj = c.dot(&x);
        let dobj = problem.f0.dot(&y);
        let pinf = frob(&rd) / (1.0 + f0norm);
        let dinf = rp.iter().map(|v| v * v).sum::<f64>().sqrt() / (1.0 + cnorm);
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        let current = SolverOutput {
            status: SolveStatus::Inaccurate,
            x: x.iter().copied().collect(),
            primal_objective: pobj,
            dual_objective: dobj,
            gap,
            primal_infeasibility: pinf,
            dual_infeasibility: dinf,
            iterations: iter,
        };
        if pinf <= options.tol && dinf <= options.tol && gap <= options.tol {
            return Ok(SolverOutput { status: SolveStatus::Optimal, ..current });
        }
        if frob(&y) > options.divergence || x.norm() > options.divergence {
            return Ok(SolverOutput { status: SolveStatus::Infeasible, ..current });
        }
        // on stalling, report the iterate closest to optimality
        let merit = pinf.max(dinf).max(gap);
        if merit < best_merit {
            best_merit = merit;
            out = current;
        } else {
            out.iterations = iter;
        }
        if iter == options.max_iterations {
            break;
        }

        let mu = inner(&s, &y) / n as f64;
        let Some(sinv) = inverse_spd(&s) else { break };
        let mut schur_m = schur(problem, &y, &sinv);
        // tiny diagonal shift against loss of definiteness near the optimum
        let shift = 1e-14 * (1.0 + schur_m.diagonal().amax());
        for i in 0..m {
            schur_m[(i, i)] += shift;
        }

        let ys: Vec<DMatrix<f64>> = y.iter().zip(&s).map(|(a, b)| a * b).collect();
        let r_aff: Vec<DMatrix<f64>> = ys.iter().map(|m| -m).collect();
        let Some(pred) = direction(problem, &schur_m, &y, &sinv, &rd, &rp, &r_aff) else { break };
        let ap = max_step(&s, &pred.ds, 1.0);
        let ad = max_step(&y, &pred.dy, 1.0);
        let s_aff: Vec<DMatrix<f64>> = s.iter().zip(&pred.ds).map(|(a, d)| a + d * ap).collect();
        let y_aff: Vec<DMatrix<f64>> = y.iter().zip(&pred.dy).map(|(a, d)| a + d * ad).collect();
        let mu_aff = inner(&s_aff, &y_aff) / n as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        let r_cor: Vec<DMatrix<f64>> = (0..blocks.len())
            .map(|b| {
                let mut r = DMatrix::identity(blocks[b], blocks[b]) * (sigma * mu) - &ys[b];
                r -= &pred.dy[b] * &pred.ds[b];
                r
            })
            .collect();
        let Some(dir) = direction(problem, &schur_m, &y, &sinv, &rd, &rp, &r_cor) else { break };
        let ap = (options.step_fraction * max_step(&s, &dir.ds, f64::INFINITY)).min(1.0);
        let ad = (options.step_fraction * max_step(&y, &dir.dy, f64::INFINITY)).min(1.0);
        if ap <= 1e-14 && ad <= 1e-14 {
            break;
        }
        x += &dir.dx * ap;
        for b in 0..blocks.len() {
            s[b] += &dir.ds[b] * ap;
            y[b] += &dir.dy[b] * ad;
        }
        symmetrize(&mut s);
        symmetrize(&mut y);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn largest_eigenvalue() {
        // minimize t subject to tI − A ⪰ 0
        let a = [[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]];
        let mut f0 = SparseSym::default();
        for (i, row) in a.iter().enumerate() {
            for (j, &v) in row.iter().enumerate().skip(i) {
                f0.add(0, i, j, v);
            }
        }
        let mut f1 = SparseSym::default();
        for i in 0..3 {
            f1.add(0, i, i, 1.0);
        }
        let p = SdpaProblem { blocks: vec![3], c: vec![1.0], f0, f: vec![f1] };
        let out = solve(&p, &IpmOptions::default()).unwrap();
        assert_eq!(out.status, SolveStatus::Optimal);
        let am = DMatrix::from_fn(3, 3, |i, j| a[i][j]);
        let lmax = am.symmetric_eigenvalues().max();
        assert!((out.primal_objective - lmax).abs() < 1e-7, "{out:?}");
        assert!((out.dual_objective - lmax).abs() < 1e-7);
    }

    #[test]
    fn linear_program_block() {
        // minimize x₁ + 2x₂ subject to x₁ + x₂ ≥ 1, x₁ ≥ 0, x₂ ≥ 0
        let mut f0 = SparseSym::default();
        f0.add(0, 0, 0, 1.0);
        let mut f1 = SparseSym::default();
        f1.add(0, 0, 0, 1.0);
        f1.add(1, 0, 0, 1.0);
        let mut f2 = SparseSym::default();
        f2.add(0, 0, 0, 1.0);
        f2.add(2, 0, 0, 1.0);
        let p = SdpaProblem { blocks: vec![1, 1, 1], c: vec![1.0, 2.0], f0, f: vec![f1, f2] };
        let out = solve(&p, &IpmOptions::default()).unwrap();
        assert_eq!(out.status, SolveStatus::Optimal);
        assert!((out.dual_objective - 1.0).abs() < 1e-7);
        assert!((out.x[0] - 1.0).abs() < 1e-6 && out.x[1].abs() < 1e-6);
    }

    #[test]
    fn infeasible_problem_is_flagged() {
        // x ≥ 1 and −x ≥ 0
        let mut f0 = SparseSym::default();
        f0.add(0, 0, 0, 1.0);
        let mut f1 = SparseSym::default();
        f1.add(0, 0, 0, 1.0);
        f1.add(1, 0, 0, -1.0);
        let p = SdpaProblem { blocks: vec![1, 1], c: vec![0.0], f0, f: vec![f1] };
        let out = solve(&p, &IpmOptions::default()).unwrap();
        assert_ne!(out.status, SolveStatus::Optimal);
    }

    #[test]
    fn rejects_bad_entries() {
        let mut f0 = SparseSym::default();
        f0.add(0, 0, 5, 1.0);
        let p = SdpaProblem { blocks: vec![2], c: vec![], f0, f: vec![] };
        assert!(solve(&p, &IpmOptions::default()).is_err());
    }
}
