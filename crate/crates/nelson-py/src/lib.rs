//! Python bindings: parameters, schedule, single sweeps and the experiment commands.

use std::path::PathBuf;

use nelson_core::experiment::{self, ExperimentConfig, NmvPayload};
use nelson_core::multiscale::{self, Context, SweepSettings};
use nelson_core::schedule::{self, ModelParams as CoreParams, ScheduleConfig};
use nelson_core::{verify, LabError};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyComplex;

fn to_py(e: LabError) -> PyErr {
    match experiment::exit_code(&e) {
        2 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn json_obj<T: serde::Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let s = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (s,))?.unbind())
}

#[pyclass(name = "ModelParams", from_py_object)]
#[derive(Clone)]
struct PyModelParams {
    inner: CoreParams,
}

#[pymethods]
impl PyModelParams {
    #[new]
    #[pyo3(signature = (g=0.05, kappa=1.5, beta=1.2, gamma=0.25, zeta=0.05, theta=0.05, p=[0.2, 0.0, 0.0]))]
    fn new(g: f64, kappa: f64, beta: f64, gamma: f64, zeta: f64, theta: f64, p: [f64; 3]) -> Self {
        Self { inner: CoreParams { g, kappa, beta, gamma, zeta, theta, p } }
    }

    #[getter]
    fn g(&self) -> f64 {
        self.inner.g
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }

    #[getter(P)]
    fn p(&self) -> [f64; 3] {
        self.inner.p
    }

    fn validate(&self, py: Python<'_>, n_max: usize, m_max: usize, alpha_prime: usize) -> PyResult<Py<PyAny>> {
        let cfg = ScheduleConfig { n_max, m_max, alpha_prime, ..Default::default() };
        let r = schedule::validate_params(&self.inner, &cfg).map_err(to_py)?;
        json_obj(py, &r)
    }

    fn __repr__(&self) -> String {
        let m = &self.inner;
        format!(
            "ModelParams(g={}, kappa={}, beta={}, gamma={}, zeta={}, theta={}, P={:?})",
            m.g, m.kappa, m.beta, m.gamma, m.zeta, m.theta, m.p
        )
    }
}

#[pyclass(name = "CutoffSchedule")]
struct PySchedule {
    inner: schedule::CutoffSchedule,
}

#[pymethods]
impl PySchedule {
    #[new]
    #[pyo3(signature = (params, alpha_prime=2, k_rate=5.0))]
    fn new(params: &PyModelParams, alpha_prime: usize, k_rate: f64) -> Self {
        let cfg = ScheduleConfig { alpha_prime, k_rate, ..Default::default() };
        Self { inner: schedule::CutoffSchedule::new(&params.inner, &cfg) }
    }

    fn sigma(&self, n: usize) -> f64 {
        self.inner.sigma(n)
    }

    fn tau(&self, m: usize) -> f64 {
        self.inner.tau(m)
    }

    fn xi(&self, n: usize) -> f64 {
        self.inner.xi(n)
    }

    fn ir_gap_bound(&self, m: usize) -> f64 {
        self.inner.ir_gap_bound(m)
    }

    fn joint_n(&self, m: usize) -> usize {
        self.inner.joint_n(m)
    }

    fn table(&self, py: Python<'_>, n_max: usize, m_max: usize) -> PyResult<Py<PyAny>> {
        json_obj(py, &self.inner.table(n_max, m_max))
    }
}

/// Closed-form self-energy counterterm.
#[pyfunction]
fn vself(lam: f64, kappa: f64, g: f64) -> PyResult<f64> {
    schedule::vself(lam, kappa, g).map_err(to_py)
}

#[pyfunction]
fn basis_dimension(modes: usize, n_occ: usize) -> u128 {
    nelson_core::fock::basis_dimension(modes, n_occ)
}

#[pyfunction]
#[pyo3(signature = (kappa, tol=1e-12))]
fn appendix_constants(py: Python<'_>, kappa: f64, tol: f64) -> PyResult<Py<PyAny>> {
    let c = verify::appendix_constants(kappa, tol).map_err(to_py)?;
    json_obj(py, &c)
}

/// UV sweep at the parameters' P and g; returns the record dicts.
#[pyfunction]
#[pyo3(signature = (params, n_max, n_occ=2))]
fn uv_sweep(py: Python<'_>, params: &PyModelParams, n_max: usize, n_occ: usize) -> PyResult<Py<PyAny>> {
    let p = params.inner.clone();
    let trace = py
        .detach(move || {
            experiment::init_numerics();
            let cfg = ScheduleConfig { n_max, m_max: 1, ..Default::default() };
            let mut settings = SweepSettings::default();
            settings.grid.n_occ = n_occ;
            let ctx = Context::new(&p, &cfg, &settings, n_max, 1)?;
            Ok::<_, LabError>(multiscale::uv_sweep(&ctx, p.p, p.g, n_max))
        })
        .map_err(to_py)?;
    json_obj(py, &trace)
}

fn load_config(config: Option<PathBuf>) -> PyResult<ExperimentConfig> {
    match config {
        Some(p) => ExperimentConfig::load(&p).map_err(to_py),
        None => Ok(ExperimentConfig::default()),
    }
}

#[pyfunction]
#[pyo3(signature = (config=None))]
fn plan(py: Python<'_>, config: Option<PathBuf>) -> PyResult<Py<PyAny>> {
    let cfg = load_config(config)?;
    json_obj(py, &experiment::cmd_plan(&cfg).map_err(to_py)?)
}

#[pyfunction]
#[pyo3(signature = (out, config=None, threads=1))]
fn run(py: Python<'_>, out: PathBuf, config: Option<PathBuf>, threads: usize) -> PyResult<Py<PyAny>> {
    let cfg = load_config(config)?;
    let rep = py.detach(move || experiment::cmd_run(&cfg, &out, threads)).map_err(to_py)?;
    json_obj(py, &rep)
}

#[pyfunction]
#[pyo3(signature = (out, suites=None, seed=None))]
fn verify_artifact(py: Python<'_>, out: PathBuf, suites: Option<Vec<String>>, seed: Option<u64>) -> PyResult<Py<PyAny>> {
    let rep = py
        .detach(move || {
            let art = experiment::load_artifact(&out)?;
            let suites = suites.unwrap_or_else(|| art.config.suites.clone());
            experiment::cmd_verify(&art, &suites, seed)
        })
        .map_err(to_py)?;
    json_obj(py, &rep)
}

#[pyfunction]
fn report(out: PathBuf) -> PyResult<Vec<PathBuf>> {
    let art = experiment::load_artifact(&out).map_err(to_py)?;
    experiment::cmd_report(&art).map_err(to_py)
}

#[pyfunction]
fn read_nmv(py: Python<'_>, path: PathBuf) -> PyResult<Py<PyAny>> {
    match experiment::read_nmv(&path).map_err(to_py)? {
        NmvPayload::Real(v) => Ok(v.into_pyobject(py)?.into_any().unbind()),
        NmvPayload::Complex(v) => {
            let items: Vec<Bound<'_, PyComplex>> = v.iter().map(|z| PyComplex::from_doubles(py, z.re, z.im)).collect();
            Ok(items.into_pyobject(py)?.into_any().unbind())
        }
    }
}

#[pyfunction]
fn write_nmv(path: PathBuf, values: Vec<f64>) -> PyResult<()> {
    experiment::write_nmv(&path, &NmvPayload::Real(values)).map_err(to_py)
}

#[pymodule]
fn nelson_lab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelParams>()?;
    m.add_class::<PySchedule>()?;
    m.add_function(wrap_pyfunction!(vself, m)?)?;
    m.add_function(wrap_pyfunction!(basis_dimension, m)?)?;
    m.add_function(wrap_pyfunction!(appendix_constants, m)?)?;
    m.add_function(wrap_pyfunction!(uv_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(plan, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(verify_artifact, m)?)?;
    m.add_function(wrap_pyfunction!(report, m)?)?;
    m.add_function(wrap_pyfunction!(read_nmv, m)?)?;
    m.add_function(wrap_pyfunction!(write_nmv, m)?)?;
    Ok(())
}
