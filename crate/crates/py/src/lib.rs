//! Python bindings: end-to-end solves, evaluation of the fitted solution,
//! finite-difference references and the numerical building blocks.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict};

use rrnn::cli::{self, RawConfig, RunConfig, SolveReport};
use rrnn::problems::{self, ProblemParams};
use rrnn::{basis, fdm, FdmSolution, RrnnError, RrnnSolution};

fn to_py(err: RrnnError) -> PyErr {
    if err.is_numerical() {
        PyRuntimeError::new_err(err.to_string())
    } else {
        PyValueError::new_err(err.to_string())
    }
}

fn to_toml(value: &Bound<'_, PyAny>) -> PyResult<toml::Value> {
    if value.is_instance_of::<PyBool>() {
        return Ok(toml::Value::Boolean(value.extract()?));
    }
    if let Ok(i) = value.extract::<i64>() {
        return Ok(toml::Value::Integer(i));
    }
    if let Ok(f) = value.extract::<f64>() {
        return Ok(toml::Value::Float(f));
    }
    if let Ok(s) = value.extract::<String>() {
        return Ok(toml::Value::String(s));
    }
    if let Ok(items) = value.extract::<Vec<Bound<'_, PyAny>>>() {
        return Ok(toml::Value::Array(
            items.iter().map(to_toml).collect::<PyResult<Vec<_>>>()?,
        ));
    }
    Err(PyValueError::new_err(format!(
        "unsupported config value {value}"
    )))
}

fn config_from_kwargs(problem: &str, kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<RunConfig> {
    let mut table = toml::Table::new();
    table.insert("problem".into(), toml::Value::String(problem.into()));
    if let Some(kwargs) = kwargs {
        for (k, v) in kwargs.iter() {
            table.insert(k.extract::<String>()?, to_toml(&v)?);
        }
    }
    let raw: RawConfig = table
        .try_into()
        .map_err(|e: toml::de::Error| PyValueError::new_err(e.to_string()))?;
    RunConfig::from_raw(&raw).map_err(to_py)
}

/// Summary of one solve.
#[pyclass(name = "Report", frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct PyReport {
    problem: String,
    n_rows: usize,
    n_cols: usize,
    rank: usize,
    max_error: f64,
    rms_error: f64,
    residual_norm: f64,
    interface_jump: f64,
    t_pre: f64,
    t_opt: f64,
    t_test: f64,
    seed: u64,
}

impl From<&SolveReport> for PyReport {
    fn from(r: &SolveReport) -> Self {
        PyReport {
            problem: r.config.problem.clone(),
            n_rows: r.n_rows,
            n_cols: r.n_cols,
            rank: r.rank,
            max_error: r.max_error,
            rms_error: r.rms_error,
            residual_norm: r.residual_norm,
            interface_jump: r.interface_jump,
            t_pre: r.t_pre,
            t_opt: r.t_opt,
            t_test: r.t_test,
            seed: r.seed,
        }
    }
}

#[pymethods]
impl PyReport {
    fn __repr__(&self) -> String {
        format!(
            "Report(problem={:?}, N={}, M={}, max_error={:e}, rms_error={:e})",
            self.problem, self.n_rows, self.n_cols, self.max_error, self.rms_error
        )
    }
}

/// A fitted piecewise RBF solution.
#[pyclass(name = "Solution", frozen)]
struct PySolution {
    inner: RrnnSolution,
    report: PyReport,
    weights: Vec<f64>,
}

#[pymethods]
impl PySolution {
    #[getter]
    fn report(&self) -> PyReport {
        self.report.clone()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.weights.clone()
    }

    /// Value at one physical point.
    fn eval(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.eval(&x).map_err(to_py)
    }

    /// Values at a list of points.
    fn eval_many(&self, points: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        points
            .iter()
            .map(|x| self.inner.eval(x).map_err(to_py))
            .collect()
    }
}

/// Solves a named problem; keyword arguments use the config file keys
/// (eps, S, J, Q, beta, seed, n_q, N_bper, N_cper, rcond, ...).
#[pyfunction]
#[pyo3(signature = (problem, **kwargs))]
fn solve(
    py: Python<'_>,
    problem: &str,
    kwargs: Option<&Bound<'_, PyDict>>,
) -> PyResult<PySolution> {
    let cfg = config_from_kwargs(problem, kwargs)?;
    let out = py.detach(|| cli::run_full(&cfg)).map_err(to_py)?;
    Ok(PySolution {
        report: PyReport::from(&out.report),
        inner: out.solution,
        weights: out.weights,
    })
}

/// Finite-difference reference on a uniform grid.
#[pyclass(name = "FdmGrid", frozen)]
struct PyFdmGrid {
    inner: FdmSolution,
}

#[pymethods]
impl PyFdmGrid {
    #[getter]
    fn h(&self) -> f64 {
        self.inner.h
    }

    #[getter]
    fn nodes(&self) -> Vec<usize> {
        self.inner.nodes.clone()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values.clone()
    }

    fn interpolate(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.interpolate(&x).map_err(to_py)
    }
}

#[pyfunction]
#[pyo3(signature = (problem, h, eps=None, eps1=None, eps2=None))]
fn fdm_reference(
    py: Python<'_>,
    problem: &str,
    h: f64,
    eps: Option<f64>,
    eps1: Option<f64>,
    eps2: Option<f64>,
) -> PyResult<PyFdmGrid> {
    let spec = problems::by_name(problem, &ProblemParams { eps, eps1, eps2 }).map_err(to_py)?;
    let inner = py.detach(|| fdm::fdm_solve(&spec, h)).map_err(to_py)?;
    Ok(PyFdmGrid { inner })
}

/// Gauss-Lobatto nodes and weights on [-1, 1].
#[pyfunction]
fn gauss_lobatto(n_q: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let rule = basis::gauss_lobatto(n_q).map_err(to_py)?;
    Ok((rule.nodes, rule.weights))
}

/// Legendre polynomial P_k and its derivative at x.
#[pyfunction]
fn legendre(k: usize, x: f64) -> (f64, f64) {
    basis::legendre(k, x)
}

/// Relative (max, rms) errors of `approx` against `reference`.
#[pyfunction]
fn metrics(approx: Vec<f64>, reference: Vec<f64>) -> PyResult<(f64, f64)> {
    cli::metrics(&approx, &reference).map_err(to_py)
}

#[pyfunction]
fn problem_names() -> Vec<&'static str> {
    problems::PROBLEM_NAMES.to_vec()
}

#[pymodule]
fn pyrrnn(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyReport>()?;
    m.add_class::<PySolution>()?;
    m.add_class::<PyFdmGrid>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(fdm_reference, m)?)?;
    m.add_function(wrap_pyfunction!(gauss_lobatto, m)?)?;
    m.add_function(wrap_pyfunction!(legendre, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(problem_names, m)?)?;
    Ok(())
}
