//! Lower-bound sweeps over the functional deficit η.

use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{distance_bound, epr_problem, ghz_problem, solve_with, ConicSolver, MomentProblem, SolveStatus};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Epr,
    Ghz1,
    Ghz2,
}

impl Scenario {
    pub fn problem(self, eta: f64) -> Result<MomentProblem> {
        match self {
            Scenario::Epr => epr_problem(eta),
            Scenario::Ghz1 => ghz_problem(1, eta),
            Scenario::Ghz2 => ghz_problem(2, eta),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Epr => "epr",
            Scenario::Ghz1 => "ghz1",
            Scenario::Ghz2 => "ghz2",
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "epr" => Ok(Scenario::Epr),
            "ghz1" => Ok(Scenario::Ghz1),
            "ghz2" => Ok(Scenario::Ghz2),
            other => Err(Error::Unsupported(format!("scenario {other:?} (expected epr, ghz1 or ghz2)"))),
        }
    }
}

/// `steps` evenly spaced values from 0 to `eta_max` inclusive.
pub fn grid(eta_max: f64, steps: usize) -> Result<Vec<f64>> {
    if steps == 0 || !(eta_max >= 0.0) {
        return Err(Error::Precondition(format!("grid needs steps ≥ 1 and eta_max ≥ 0 (got {steps}, {eta_max})")));
    }
    if steps == 1 {
        return Ok(vec![0.0]);
    }
    Ok((0..steps).map(|i| eta_max * i as f64 / (steps - 1) as f64).collect())
}

/// EPR: 0 to 0.4 in steps of 0.02. GHZ: 0 to 1 in steps of 0.05.
pub fn default_grid(s: Scenario) -> Vec<f64> {
    match s {
        Scenario::Epr => grid(0.4, 21),
        Scenario::Ghz1 | Scenario::Ghz2 => grid(1.0, 21),
    }
    .expect("valid grid")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eta: f64,
    pub lower_bound: f64,
    pub distance_bound: f64,
    /// None when the problem could not be built or solved.
    pub status: Option<SolveStatus>,
    pub solve_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SweepRow {
    pub fn status_name(&self) -> String {
        self.status.map_or_else(|| "failed".to_string(), |s| s.to_string())
    }
}

fn row(s: Scenario, eta: f64, tol: f64, solver: &dyn ConicSolver) -> SweepRow {
    let start = Instant::now();
    let result = s.problem(eta).and_then(|p| solve_with(&p, tol, solver));
    let solve_seconds = start.elapsed().as_secs_f64();
    match result {
        Ok(r) => SweepRow {
            eta,
            lower_bound: r.value,
            distance_bound: distance_bound(r.value),
            status: Some(r.status),
            solve_seconds,
            error: None,
        },
        Err(e) => SweepRow {
            eta,
            lower_bound: f64::NAN,
            distance_bound: f64::NAN,
            status: None,
            solve_seconds,
            error: Some(e.to_string()),
        },
    }
}

/// One row per η. Rows are solved concurrently on `jobs` threads (all cores
/// when `None`) if the backend allows it; a failed row is reported, not
/// propagated.
pub fn sweep(s: Scenario, etas: &[f64], tol: f64, jobs: Option<usize>, solver: &dyn ConicSolver) -> Result<Vec<SweepRow>> {
    if !solver.concurrent() || jobs == Some(1) {
        return Ok(etas.iter().map(|&eta| row(s, eta, tol, solver)).collect());
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(|e| Error::Solver(e.to_string()))?;
    Ok(pool.install(|| etas.par_iter().map(|&eta| row(s, eta, tol, solver)).collect()))
}

pub const CSV_HEADER: [&str; 5] = ["eta", "lower_bound", "distance_bound", "status", "solve_seconds"];

/// Writes the sweep as CSV; `reproducible` zeroes the timing column so
/// identical runs give identical bytes.
pub fn write_csv<W: Write>(rows: &[SweepRow], out: W, reproducible: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        let secs = if reproducible { 0.0 } else { r.solve_seconds };
        w.write_record([
            format!("{}", r.eta),
            format!("{:.12}", r.lower_bound),
            format!("{:.12}", r.distance_bound),
            r.status_name(),
            format!("{secs:.6}"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(rows: &[SweepRow], out: W, reproducible: bool) -> Result<()> {
    let rows: Vec<SweepRow> = rows
        .iter()
        .cloned()
        .map(|mut r| {
            if reproducible {
                r.solve_seconds = 0.0;
            }
            r
        })
        .collect();
    serde_json::to_writer_pretty(out, &rows)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        let g = default_grid(Scenario::Epr);
        assert_eq!(g.len(), 21);
        assert!((g[1] - 0.02).abs() < 1e-15 && (g[20] - 0.4).abs() < 1e-15);
        assert_eq!(default_grid(Scenario::Ghz1).len(), 21);
        assert!(grid(1.0, 0).is_err());
        assert_eq!("ghz2".parse::<Scenario>().unwrap(), Scenario::Ghz2);
        assert!("chsh".parse::<Scenario>().is_err());
    }
}
