//! Python bindings: reference experiments, fidelities, bounds and SDP sweeps.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use steering_selftest::bounds as b;
use steering_selftest::experiments as ex;
use steering_selftest::isometry as iso;
use steering_selftest::linalg::Operator;
use steering_selftest::sdp;

fn err(e: steering_selftest::Error) -> PyErr {
    match e {
        steering_selftest::Error::Solver(m) => PyRuntimeError::new_err(m),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn matrix(m: &Operator) -> Vec<Vec<Complex64>> {
    (0..m.side()).map(|i| (0..m.side()).map(|j| m.get(i, j)).collect()).collect()
}

/// A pure state shared between a trusted client and untrusted providers,
/// with the providers' projective measurements.
#[pyclass(name = "Experiment", module = "pysteering", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyExperiment {
    inner: ex::Experiment,
}

#[pymethods]
impl PyExperiment {
    #[staticmethod]
    fn epr_reference() -> Self {
        Self { inner: ex::epr_reference() }
    }

    #[staticmethod]
    fn ghz_reference(setting: u8) -> PyResult<Self> {
        Ok(Self { inner: ex::ghz_reference(setting).map_err(err)? })
    }

    #[staticmethod]
    fn npair_reference(n: usize) -> PyResult<Self> {
        Ok(Self { inner: ex::npair_reference(n).map_err(err)? })
    }

    #[staticmethod]
    fn schmidt_state(lam: f64) -> PyResult<Self> {
        Ok(Self { inner: ex::schmidt_state(lam).map_err(err)? })
    }

    #[staticmethod]
    fn example_optimality(eps: f64) -> PyResult<Self> {
        Ok(Self { inner: ex::example_optimality(eps).map_err(err)? })
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        Ok(Self { inner: ex::Experiment::from_json(s).map_err(err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    fn conjugated(&self) -> Self {
        Self { inner: self.inner.conjugated() }
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.inner.dims().to_vec()
    }

    #[getter]
    fn trusted_dims(&self) -> Vec<usize> {
        self.inner.trusted_dims().to_vec()
    }

    /// Assemblage elements as (outcomes, settings, matrix) triples.
    fn assemblage(&self) -> PyResult<Vec<(Vec<usize>, Vec<usize>, Vec<Vec<Complex64>>)>> {
        let asm = ex::assemblage_of(&self.inner).map_err(err)?;
        Ok(asm.iter().map(|(a, x, s)| (a, x, matrix(s))).collect())
    }

    fn reduced_state(&self) -> PyResult<Vec<Vec<Complex64>>> {
        Ok(matrix(ex::assemblage_of(&self.inner).map_err(err)?.reduced()))
    }

    /// trS for one provider with two binary settings.
    fn chsh_value(&self) -> PyResult<f64> {
        ex::chsh_steering_value(&ex::assemblage_of(&self.inner).map_err(err)?).map_err(err)
    }

    fn appendix_d_value(&self) -> PyResult<f64> {
        ex::appd_steering_value(&self.inner).map_err(err)
    }

    fn mermin_value(&self, setting: u8) -> PyResult<f64> {
        ex::ghz_mermin_value(&ex::assemblage_of(&self.inner).map_err(err)?, setting).map_err(err)
    }

    fn singlet_fidelity(&self) -> PyResult<f64> {
        iso::singlet_fidelity(&self.inner).map_err(err)
    }

    fn ghz_fidelity(&self, setting: u8) -> PyResult<f64> {
        iso::ghz_fidelity(&self.inner, setting).map_err(err)
    }

    /// State and measured distances after the SWAP isometry, as JSON.
    fn selftest_report(&self, reference: &PyExperiment) -> PyResult<String> {
        let r = iso::selftest_report(&self.inner, &reference.inner).map_err(err)?;
        serde_json::to_string(&r).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!("Experiment(dims={:?}, trusted={})", self.inner.dims(), self.inner.trusted_count())
    }
}

/// Outcome of one SDP solve.
#[pyclass(name = "LowerBound", module = "pysteering", frozen, get_all)]
struct PyLowerBound {
    value: f64,
    status: String,
    gap: f64,
    iterations: usize,
}

#[pymethods]
impl PyLowerBound {
    fn __repr__(&self) -> String {
        format!("LowerBound(value={}, status={:?}, gap={:.1e})", self.value, self.status, self.gap)
    }
}

fn scenario(name: &str) -> PyResult<sdp::Scenario> {
    name.parse().map_err(err)
}

/// Lower bound on the fidelity for scenario "epr", "ghz1" or "ghz2" at deficit η.
#[pyfunction]
#[pyo3(signature = (name, eta, tol = sdp::DEFAULT_TOL, real = false, normalized = true))]
fn lower_bound(name: &str, eta: f64, tol: f64, real: bool, normalized: bool) -> PyResult<PyLowerBound> {
    let mut p = scenario(name)?.problem(eta).map_err(err)?;
    if real {
        p = p.real_restricted();
    }
    if !normalized {
        p = p.without_normalization();
    }
    let r = sdp::solve(&p, tol).map_err(err)?;
    Ok(PyLowerBound { value: r.value, status: r.status.to_string(), gap: r.gap, iterations: r.iterations })
}

/// Rows (eta, lower_bound, distance_bound, status) over a grid of η.
#[pyfunction]
#[pyo3(signature = (name, etas, tol = sdp::DEFAULT_TOL, jobs = None))]
fn sweep(py: Python<'_>, name: &str, etas: Vec<f64>, tol: f64, jobs: Option<usize>) -> PyResult<Vec<(f64, f64, f64, String)>> {
    let s = scenario(name)?;
    let solver = sdp::solver_from_env().map_err(err)?;
    let rows = py.detach(|| sdp::sweep(s, &etas, tol, jobs, solver.as_ref())).map_err(err)?;
    Ok(rows.into_iter().map(|r| (r.eta, r.lower_bound, r.distance_bound, r.status_name())).collect())
}

/// SDPA sparse text of one problem.
#[pyfunction]
fn dump(name: &str, eta: f64) -> PyResult<String> {
    let p = scenario(name)?.problem(eta).map_err(err)?;
    Ok(p.compile().dump(&p.layout))
}

#[pyfunction]
fn fidelity_to_distance(g: f64) -> PyResult<f64> {
    sdp::fidelity_to_distance(g).map_err(err)
}

/// Seeded check of one bound ("lemma1".."lemma4", "thm1"); returns
/// (passed, evaluated, worst_slack).
#[pyfunction]
#[pyo3(signature = (name, samples = 100, seed = 7))]
fn verify(py: Python<'_>, name: &str, samples: usize, seed: u64) -> PyResult<(usize, usize, f64)> {
    let run = match name {
        "lemma1" => b::lemma1_sweep,
        "lemma2" => b::lemma2_sweep,
        "lemma3" => b::lemma3_sweep,
        "lemma4" => b::lemma4_sweep,
        "thm1" => b::thm1_sweep,
        other => return Err(PyValueError::new_err(format!("unknown check {other:?}"))),
    };
    let s = py.detach(|| run(samples, seed)).map_err(err)?;
    Ok((s.passed, s.evaluated, s.worst_slack))
}

#[pyfunction]
fn thm1_f(eps: f64) -> PyResult<f64> {
    b::thm1_f(eps).map_err(err)
}

#[pyfunction]
fn appd_f(eta: f64) -> PyResult<f64> {
    b::appd_f(eta).map_err(err)
}

#[pymodule]
fn pysteering(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyExperiment>()?;
    m.add_class::<PyLowerBound>()?;
    m.add_function(wrap_pyfunction!(lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(dump, m)?)?;
    m.add_function(wrap_pyfunction!(fidelity_to_distance, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(thm1_f, m)?)?;
    m.add_function(wrap_pyfunction!(appd_f, m)?)?;
    Ok(())
}
