//! Moment-matrix SDP relaxations that lower-bound self-testing fidelities.
//!
//! Γ is the Gram matrix of the vectors (⟨i_C| ⊗ I)w|ψ⟩ for operator words w
//! built from the providers' outcome-0 projectors. Its d×d blocks are
//! σ_{w_k†w_j} = tr_P(w_k†w_j|ψ⟩⟨ψ|), so blocks sharing a reduced word are
//! constrained equal. The SWAP-isometry fidelity and the steering functional
//! are both linear in Γ, which gives a lower bound on the fidelity over all
//! experiments reaching a given functional value.

pub mod ipm;
pub mod moments;
pub mod problem;
pub mod sweep;

use serde::{Deserialize, Serialize};

pub use ipm::{IpmOptions, SdpaProblem, SolveStatus, SolverOutput, SparseSym};
pub use moments::{BlockRef, MomentLayout, Word};
pub use problem::{
    correlator_functional, epr_functional, epr_objective, epr_problem, epr_problem_generic, fidelity_objective, ghz_problem,
    CompiledProblem, MomentProblem,
};
pub use sweep::{default_grid, grid, sweep, Scenario, SweepRow};

use crate::error::{Error, Result};

/// Default duality-gap tolerance.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Environment variable naming the default solver backend.
pub const SOLVER_ENV: &str = "STEERING_SOLVER";

/// A backend for block-diagonal SDPs in SDPA form.
pub trait ConicSolver: Send + Sync {
    fn name(&self) -> &'static str;

    /// Whether independent problems may be solved concurrently.
    fn concurrent(&self) -> bool {
        true
    }

    fn solve(&self, problem: &SdpaProblem, tol: f64) -> Result<SolverOutput>;
}

/// The built-in interior-point backend.
#[derive(Clone, Debug, Default)]
pub struct Ipm {
    pub options: IpmOptions,
}

impl ConicSolver for Ipm {
    fn name(&self) -> &'static str {
        "ipm"
    }

    fn solve(&self, problem: &SdpaProblem, tol: f64) -> Result<SolverOutput> {
        ipm::solve(problem, &IpmOptions { tol, ..self.options })
    }
}

pub fn solver_by_name(name: &str) -> Result<Box<dyn ConicSolver>> {
    match name {
        "ipm" => Ok(Box::new(Ipm::default())),
        other => Err(Error::Unsupported(format!("solver backend {other:?} (available: ipm)"))),
    }
}

/// The backend named by `STEERING_SOLVER`, or the interior-point solver.
pub fn solver_from_env() -> Result<Box<dyn ConicSolver>> {
    match std::env::var(SOLVER_ENV) {
        Ok(name) if !name.is_empty() => solver_by_name(&name),
        _ => Ok(Box::new(Ipm::default())),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundResult {
    /// Dual objective: a lower bound on the minimum up to the reported
    /// dual infeasibility.
    pub value: f64,
    pub status: SolveStatus,
    /// Relative primal-dual gap.
    pub gap: f64,
    /// Objective at the primal iterate.
    pub primal_value: f64,
    pub dual_infeasibility: f64,
    pub iterations: usize,
}

pub fn solve(p: &MomentProblem, tol: f64) -> Result<LowerBoundResult> {
    solve_with(p, tol, &Ipm::default())
}

pub fn solve_with(p: &MomentProblem, tol: f64, solver: &dyn ConicSolver) -> Result<LowerBoundResult> {
    if !(tol > 0.0) {
        return Err(Error::OutOfRange { name: "tol", value: tol });
    }
    let compiled = p.compile();
    let out = solver.solve(&compiled.sdpa, tol)?;
    Ok(LowerBoundResult {
        value: out.dual_objective + compiled.offset,
        status: out.status,
        gap: out.gap,
        primal_value: out.primal_objective + compiled.offset,
        dual_infeasibility: out.dual_infeasibility,
        iterations: out.iterations,
    })
}

/// Trace-distance bound √(2(1 − g)) from a singlet-fidelity bound g, via
/// (F*)² ≥ 2g − 1.
pub fn fidelity_to_distance(g: f64) -> Result<f64> {
    if !(0.5..=1.0).contains(&g) {
        return Err(Error::OutOfRange { name: "g", value: g });
    }
    Ok((2.0 * (1.0 - g)).sqrt())
}

/// [`fidelity_to_distance`] with g clamped to 1 from above; below ½ the
/// relation is vacuous and the trivial bound 1 is returned.
pub fn distance_bound(g: f64) -> f64 {
    if g < 0.5 || g.is_nan() {
        1.0
    } else {
        fidelity_to_distance(g.min(1.0)).expect("in range")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_conversion() {
        assert_eq!(fidelity_to_distance(1.0).unwrap(), 0.0);
        assert!((fidelity_to_distance(0.995).unwrap() - 0.1).abs() < 1e-12);
        let eta: f64 = 0.1;
        let d = fidelity_to_distance(1.0 - eta / std::f64::consts::SQRT_2).unwrap();
        assert!((d - 2f64.powf(0.25) * eta.sqrt()).abs() < 1e-12);
        assert!(fidelity_to_distance(0.4).is_err());
        assert_eq!(distance_bound(0.3), 1.0);
        assert_eq!(distance_bound(1.0 + 1e-12), 0.0);
    }

    #[test]
    fn unknown_backend_is_rejected() {
        assert!(solver_by_name("mosek").is_err());
        assert_eq!(solver_by_name("ipm").unwrap().name(), "ipm");
    }
}
