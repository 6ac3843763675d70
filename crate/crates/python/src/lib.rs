//! Python bindings. Structured results cross the boundary as JSON-compatible
//! dicts and lists; rationals stay "p/q" strings.

use pyo3::exceptions::{PyOverflowError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use nekhoro_core::dynamics::{integrate, IntegratorConfig, State};
use nekhoro_core::frequency_geometry as fg;
use nekhoro_core::harness::{self, ScanConfig};
use nekhoro_core::model::SystemSpec;
use nekhoro_core::planner::{self, Exact, PlannerConstants};
use nekhoro_core::resonance_lattice::{self as lattice, IntMatrix, IntegerVector};
use nekhoro_core::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidArgument(_) | Error::Precondition(_) | Error::Parse(_) | Error::NotQuasiConvex { .. } => {
            PyValueError::new_err(e.to_string())
        }
        Error::Overflow(_) => PyOverflowError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn exact(s: &str) -> PyResult<Exact> {
    s.parse().map_err(py_err)
}

/// Unimodular completion of a primitive k with |A| ≤ K (K defaults to |k|₁).
#[pyfunction]
#[pyo3(signature = (k, order=None))]
fn unimodular_completion(py: Python<'_>, k: Vec<i64>, order: Option<i64>) -> PyResult<Bound<'_, PyAny>> {
    let k = IntegerVector::new(k).map_err(py_err)?;
    let order = match order {
        Some(o) => o,
        None => k.l1_norm().map_err(py_err)?,
    };
    to_py(py, &lattice::unimodular_completion(&k, order).map_err(py_err)?)
}

/// Smith normal form of a full-row-rank integer matrix given as rows.
#[pyfunction]
fn smith_normal_form(py: Python<'_>, rows: Vec<Vec<i64>>) -> PyResult<Bound<'_, PyAny>> {
    let m = IntMatrix::from_rows(rows).map_err(py_err)?;
    to_py(py, &lattice::smith_normal_form(&m).map_err(py_err)?)
}

/// Short fraction (p, q) in [x − l/2, x + l/2] with |p| + q < 6/l.
#[pyfunction]
fn rational_in_interval(x: f64, l: f64) -> PyResult<(i64, i64)> {
    lattice::rational_in_interval(x, l).map_err(py_err)
}

/// Primitive k with |k|₁ ≤ K minimising |k·ω|, and that minimum.
#[pyfunction]
fn small_divisor(omega: Vec<f64>, order: i64) -> PyResult<(Vec<i64>, f64)> {
    let (k, v) = fg::small_divisor(&omega, order).map_err(py_err)?;
    Ok((k.components().to_vec(), v))
}

/// Resonance crossings along sampled frequencies ω(t_i).
#[pyfunction]
fn detect_crossings(py: Python<'_>, times: Vec<f64>, omegas: Vec<Vec<f64>>, order: i64) -> PyResult<Bound<'_, PyAny>> {
    if times.len() != omegas.len() {
        return Err(PyValueError::new_err("times and omegas differ in length"));
    }
    let samples: Vec<(f64, Vec<f64>)> = times.into_iter().zip(omegas).collect();
    to_py(py, &fg::detect_crossings(&samples, order).map_err(py_err)?)
}

/// Analytic-regime exponents for γ given as "p/q"; thresholds too when ε is given.
#[pyfunction]
#[pyo3(signature = (n, gamma, eps=None))]
fn analytic_exponents<'py>(py: Python<'py>, n: u32, gamma: &str, eps: Option<f64>) -> PyResult<Bound<'py, PyAny>> {
    let mut plan = planner::analytic_exponents(n, &exact(gamma)?).map_err(py_err)?;
    if let Some(eps) = eps {
        plan = plan.with_thresholds(eps, PlannerConstants::default()).map_err(py_err)?;
    }
    to_py(py, &plan)
}

/// Gevrey-regime exponents for α and γ given as "p/q" strings.
#[pyfunction]
fn gevrey_exponents<'py>(py: Python<'py>, n: u32, alpha: &str, gamma: &str) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &planner::gevrey_exponents(n, &exact(alpha)?, &exact(gamma)?).map_err(py_err)?)
}

/// The canonical n = 3 benchmark scan configuration as JSON.
#[pyfunction]
fn benchmark_config() -> PyResult<String> {
    serde_json::to_string(&ScanConfig::benchmark()).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Runs a scan from a JSON configuration; returns records, fit and manifest.
#[pyfunction]
#[pyo3(signature = (config_json, out_dir=None))]
fn run_scan<'py>(py: Python<'py>, config_json: &str, out_dir: Option<std::path::PathBuf>) -> PyResult<Bound<'py, PyAny>> {
    let config: ScanConfig = serde_json::from_str(config_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let result = py.detach(|| harness::run_scan(&config)).map_err(py_err)?;
    if let Some(dir) = out_dir {
        harness::emit_outputs(&result, &dir).map_err(py_err)?;
    }
    to_py(py, &result)
}

/// H(θ, I) = h(I) + ε·f(θ, I) on 𝕋ⁿ × B(0, R).
#[pyclass(module = "nekhoro", frozen)]
struct System {
    spec: SystemSpec,
}

#[pymethods]
impl System {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { spec: SystemSpec::from_json(text).map_err(py_err)? })
    }

    /// The n = 3 convex benchmark at the given ε.
    #[staticmethod]
    fn benchmark(eps: f64) -> Self {
        Self { spec: harness::benchmark_spec(eps) }
    }

    fn to_json(&self) -> PyResult<String> {
        self.spec.to_json().map_err(py_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.spec.epsilon
    }

    fn with_epsilon(&self, eps: f64) -> Self {
        Self { spec: self.spec.with_epsilon(eps) }
    }

    fn hamiltonian(&self, theta: Vec<f64>, action: Vec<f64>) -> PyResult<f64> {
        let n = self.spec.dim();
        if theta.len() != n || action.len() != n {
            return Err(PyValueError::new_err(format!("expected {n} angles and {n} actions")));
        }
        Ok(self.spec.hamiltonian(&theta, &action))
    }

    fn frequency(&self, action: Vec<f64>) -> PyResult<Vec<f64>> {
        if action.len() != self.spec.dim() {
            return Err(PyValueError::new_err(format!("expected {} actions", self.spec.dim())));
        }
        Ok(self.spec.h.frequency(&action))
    }

    /// Implicit-midpoint trajectory; returns samples, exit and drift statistics.
    #[pyo3(signature = (theta, action, t_max, step=0.01, stride=1))]
    fn integrate<'py>(
        &self,
        py: Python<'py>,
        theta: Vec<f64>,
        action: Vec<f64>,
        t_max: f64,
        step: f64,
        stride: usize,
    ) -> PyResult<Bound<'py, PyAny>> {
        let initial = State::new(theta, action, 0.0).map_err(py_err)?;
        let config = IntegratorConfig { step, sample_stride: stride, ..Default::default() };
        let spec = &self.spec;
        let traj = py.detach(|| integrate(spec, &initial, t_max, &config)).map_err(py_err)?;
        to_py(py, &traj)
    }

    fn __repr__(&self) -> String {
        format!("System(n={}, epsilon={})", self.spec.dim(), self.spec.epsilon)
    }
}

#[pymodule]
pub fn nekhoro(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", nekhoro_core::VERSION)?;
    m.add_class::<System>()?;
    m.add_function(wrap_pyfunction!(unimodular_completion, m)?)?;
    m.add_function(wrap_pyfunction!(smith_normal_form, m)?)?;
    m.add_function(wrap_pyfunction!(rational_in_interval, m)?)?;
    m.add_function(wrap_pyfunction!(small_divisor, m)?)?;
    m.add_function(wrap_pyfunction!(detect_crossings, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_exponents, m)?)?;
    m.add_function(wrap_pyfunction!(gevrey_exponents, m)?)?;
    m.add_function(wrap_pyfunction!(benchmark_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_scan, m)?)?;
    Ok(())
}
