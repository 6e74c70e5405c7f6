//! Python bindings for the singplap solver.

use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyList;

use singplap_core::analysis;
use singplap_core::mesh::{self, Field};
use singplap_core::nonlinearity::{self, Coefficient, ProblemDocument, ProblemSpec};
use singplap_core::plap;
use singplap_core::solver::{self, SolverConfig};
use singplap_core::verify::{self, VerifyOptions};
use singplap_core::Error;

fn to_py(err: Error) -> PyErr {
    match err {
        Error::NotConverged { .. } | Error::Diverged { .. } | Error::Io { .. } => {
            PyRuntimeError::new_err(err.to_string())
        }
        _ => PyValueError::new_err(err.to_string()),
    }
}

fn json_to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn solver_config(config: Option<&str>) -> PyResult<SolverConfig> {
    let cfg = match config {
        Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => SolverConfig::default(),
    };
    cfg.validate().map_err(to_py)?;
    Ok(cfg)
}

/// Uniform P1 mesh of an interval or a rectangle.
#[pyclass(name = "Mesh", module = "singplap", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMesh {
    inner: Arc<mesh::Mesh>,
}

#[pymethods]
impl PyMesh {
    #[staticmethod]
    fn interval(a: f64, b: f64, cells: usize) -> PyResult<Self> {
        let m = mesh::build_interval_mesh(a, b, cells).map_err(to_py)?;
        Ok(PyMesh { inner: Arc::new(m) })
    }

    #[staticmethod]
    fn rectangle(low: (f64, f64), high: (f64, f64), nx: usize, ny: usize) -> PyResult<Self> {
        let m = mesh::build_rectangle_mesh([low.0, low.1], [high.0, high.1], nx, ny).map_err(to_py)?;
        Ok(PyMesh { inner: Arc::new(m) })
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn cells(&self) -> Vec<usize> {
        self.inner.cells().to_vec()
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.mesh_size()
    }

    /// Node coordinates as `(x, y)` pairs; `y` is 0 on intervals.
    fn coords(&self) -> Vec<(f64, f64)> {
        self.inner.coords().iter().map(|c| (c[0], c[1])).collect()
    }

    fn boundary_mask(&self) -> Vec<bool> {
        self.inner.boundary_mask().to_vec()
    }

    fn boundary_distance(&self) -> Vec<f64> {
        mesh::boundary_distance(&self.inner).into_values()
    }

    fn refine(&self) -> PyResult<Self> {
        Ok(PyMesh {
            inner: Arc::new(self.inner.refine().map_err(to_py)?),
        })
    }

    fn __repr__(&self) -> String {
        format!("Mesh(dimension={}, cells={:?})", self.inner.dimension(), self.inner.cells())
    }
}

/// `f` or `g` given as a constant, an expression in `x`, `y`, or nodal values.
fn coefficient(mesh: &Arc<mesh::Mesh>, value: &Bound<'_, PyAny>) -> PyResult<Coefficient> {
    if let Ok(v) = value.extract::<f64>() {
        return Ok(Coefficient::constant(v));
    }
    if let Ok(s) = value.extract::<String>() {
        return Coefficient::expr(&s).map_err(to_py);
    }
    if let Ok(v) = value.extract::<Vec<f64>>() {
        let field = Field::new(Arc::clone(mesh), v).map_err(to_py)?;
        return Ok(Coefficient::Nodal(field));
    }
    Err(PyValueError::new_err(
        "coefficient must be a number, an expression string or a list of nodal values",
    ))
}

/// Problem `-div(|grad u|^(p-2) grad u) = f u^-gamma + g u^q` on a mesh.
#[pyclass(name = "Problem", module = "singplap", frozen)]
struct PyProblem {
    inner: ProblemSpec,
}

#[pymethods]
impl PyProblem {
    #[new]
    #[pyo3(signature = (mesh, p, gamma, q=0.0, f=None, g=None, m=None))]
    fn new(
        mesh: &PyMesh,
        p: f64,
        gamma: f64,
        q: f64,
        f: Option<&Bound<'_, PyAny>>,
        g: Option<&Bound<'_, PyAny>>,
        m: Option<f64>,
    ) -> PyResult<Self> {
        let m_ = &mesh.inner;
        let f = match f {
            Some(v) => coefficient(m_, v)?,
            None => Coefficient::constant(1.0),
        };
        let g = match g {
            Some(v) => coefficient(m_, v)?,
            None => Coefficient::constant(0.0),
        };
        let mut doc = ProblemDocument::power(p, gamma, q, f, g);
        doc.m = m;
        Ok(PyProblem {
            inner: ProblemSpec::new(doc, m_).map_err(to_py)?,
        })
    }

    /// Builds a problem from the JSON `problem` section of a run config.
    #[staticmethod]
    fn from_json(mesh: &PyMesh, document: &str) -> PyResult<Self> {
        let doc: ProblemDocument =
            serde_json::from_str(document).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(PyProblem {
            inner: ProblemSpec::new(doc, &mesh.inner).map_err(to_py)?,
        })
    }

    #[getter]
    fn mesh(&self) -> PyMesh {
        PyMesh {
            inner: Arc::clone(self.inner.mesh()),
        }
    }

    #[getter]
    fn p(&self) -> f64 {
        self.inner.p()
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma()
    }

    #[getter]
    fn q(&self) -> f64 {
        self.inner.q()
    }

    fn f(&self) -> Vec<f64> {
        self.inner.f().values().to_vec()
    }

    fn g(&self) -> Vec<f64> {
        self.inner.g().values().to_vec()
    }

    fn slope_monotone(&self) -> PyResult<bool> {
        nonlinearity::check_slope_monotonicity(&self.inner, &nonlinearity::default_sample_grid())
            .map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Problem(p={}, gamma={}, q={}, nodes={})",
            self.inner.p(),
            self.inner.gamma(),
            self.inner.q(),
            self.inner.mesh().node_count()
        )
    }
}

/// Outcome of [`solve`]: nodal values plus the full report.
#[pyclass(name = "Solution", module = "singplap", frozen)]
struct PySolution {
    #[pyo3(get)]
    u: Vec<f64>,
    #[pyo3(get)]
    outcome: String,
    report: solver::SolveReport,
}

#[pymethods]
impl PySolution {
    #[getter]
    fn converged(&self) -> bool {
        self.report.converged()
    }

    #[getter]
    fn energy(&self) -> f64 {
        self.report.energy
    }

    #[getter]
    fn levels(&self) -> usize {
        self.report.levels.len()
    }

    /// The solve report as a dict.
    fn report<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &self.report)
    }

    fn __repr__(&self) -> String {
        format!("Solution(outcome={:?}, levels={})", self.outcome, self.report.levels.len())
    }
}

fn outcome_name(o: solver::Outcome) -> String {
    serde_json::to_value(o)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

/// Runs the truncation scheme; `config` is an optional JSON solver section.
#[pyfunction]
#[pyo3(signature = (problem, config=None))]
fn solve(py: Python<'_>, problem: &PyProblem, config: Option<&str>) -> PyResult<PySolution> {
    let cfg = solver_config(config)?;
    let spec = &problem.inner;
    let (u, report) = py.detach(|| solver::outer_solve(spec, &cfg)).map_err(to_py)?;
    Ok(PySolution {
        u: u.into_values(),
        outcome: outcome_name(report.outcome),
        report,
    })
}

/// Solves `-div(|grad u|^(p-2) grad u) = rhs` with zero boundary values.
#[pyfunction]
fn solve_fixed_rhs(py: Python<'_>, mesh: &PyMesh, rhs: Vec<f64>, p: f64) -> PyResult<Vec<f64>> {
    let r = Field::new(Arc::clone(&mesh.inner), rhs).map_err(to_py)?;
    let m = &mesh.inner;
    let u = py
        .detach(|| plap::plap_solve_fixed_rhs(m, &r, p, &plap::PlapOptions::default()))
        .map_err(to_py)?;
    Ok(u.into_values())
}

/// Solves both problems and checks `v1 <= v2`; returns the certificate as a dict.
#[pyfunction]
#[pyo3(signature = (problem1, problem2, config=None))]
fn compare<'py>(
    py: Python<'py>,
    problem1: &PyProblem,
    problem2: &PyProblem,
    config: Option<&str>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = solver_config(config)?;
    let (s1, s2) = (&problem1.inner, &problem2.inner);
    let rep = py
        .detach(|| analysis::run_comparison_test(s1, s2, &cfg))
        .map_err(to_py)?;
    let out = serde_json::json!({
        "holds": rep.holds,
        "tol_cmp": rep.tol_cmp,
        "max_excess": rep.max_excess,
        "certificate": rep.certificate,
        "v1": rep.v1.values(),
        "v2": rep.v2.values(),
    });
    json_to_py(py, &out)
}

#[pyfunction]
fn convexity_gap(xi: Vec<f64>, eta: Vec<f64>, p: f64) -> PyResult<f64> {
    if xi.len() != eta.len() {
        return Err(PyValueError::new_err("xi and eta must have the same length"));
    }
    Ok(plap::convexity_gap(&xi, &eta, p))
}

/// `max(-k, min(s, k))`.
#[pyfunction]
fn truncate(s: f64, k: f64) -> PyResult<f64> {
    if !(k > 0.0) {
        return Err(PyValueError::new_err("k must be > 0"));
    }
    Ok(nonlinearity::truncate_scalar(s, k))
}

/// Piecewise-linear cutoff: 1 below `delta`, 0 above `2 delta`.
#[pyfunction]
fn cutoff(s: f64, delta: f64) -> PyResult<f64> {
    if !(delta > 0.0) {
        return Err(PyValueError::new_err("delta must be > 0"));
    }
    Ok(nonlinearity::cutoff_v(s, delta))
}

/// Threshold predicates for `(gamma, m, p)`; `m=None` means `m = inf`.
#[pyfunction]
#[pyo3(signature = (gamma, m=None, p=2.0))]
fn thresholds<'py>(py: Python<'py>, gamma: f64, m: Option<f64>, p: f64) -> PyResult<Bound<'py, PyAny>> {
    let m = m.unwrap_or(f64::INFINITY);
    let v = analysis::thresholds(gamma, m, p);
    let b = analysis::threshold_bounds(m, p);
    let out = serde_json::json!({
        "gamma": gamma,
        "p": p,
        "ex_gamma": v.ex_gamma,
        "cin_gamma": v.cin_gamma,
        "plap_gamma": v.plap_gamma,
        "ex_bound": b.ex,
        "cin_bound": b.cin,
        "plap_bound": b.plap,
    });
    json_to_py(py, &out)
}

/// Discrete Poincare constant `C_p` of the mesh domain.
#[pyfunction]
#[pyo3(signature = (mesh, p=2.0))]
fn poincare_constant(py: Python<'_>, mesh: &PyMesh, p: f64) -> PyResult<f64> {
    let m = &mesh.inner;
    let c = py.detach(|| plap::poincare_constant(m, p)).map_err(to_py)?;
    Ok(c.value)
}

/// Least-squares exponent of `u ~ c delta^beta` on the band `[3h, 30h]`.
#[pyfunction]
fn boundary_exponent(mesh: &PyMesh, u: Vec<f64>) -> PyResult<f64> {
    let m = &mesh.inner;
    let field = Field::new(Arc::clone(m), u).map_err(to_py)?;
    analysis::boundary_exponent_fit(&field, &mesh::boundary_distance(m), analysis::default_fit_band(m))
        .map_err(to_py)
}

/// Runs the built-in acceptance suite; returns `(id, name, status, detail)`.
#[pyfunction]
#[pyo3(signature = (cells=None, seed=42))]
fn run_verify<'py>(py: Python<'py>, cells: Option<usize>, seed: u64) -> PyResult<Bound<'py, PyList>> {
    let results = py.detach(|| verify::run_suite(&VerifyOptions { cells, seed }));
    let rows: Vec<(u8, &str, String, String)> = results
        .iter()
        .map(|r| (r.id, r.name, r.status.to_string(), r.detail.clone()))
        .collect();
    PyList::new(py, rows)
}

#[pymodule]
fn singplap(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMesh>()?;
    m.add_class::<PyProblem>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(solve_fixed_rhs, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(convexity_gap, m)?)?;
    m.add_function(wrap_pyfunction!(truncate, m)?)?;
    m.add_function(wrap_pyfunction!(cutoff, m)?)?;
    m.add_function(wrap_pyfunction!(thresholds, m)?)?;
    m.add_function(wrap_pyfunction!(poincare_constant, m)?)?;
    m.add_function(wrap_pyfunction!(boundary_exponent, m)?)?;
    m.add_function(wrap_pyfunction!(run_verify, m)?)?;
    Ok(())
}
