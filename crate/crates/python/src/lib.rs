//! Python bindings for the Faedo-Galerkin solver and harness.
//!
//! Coefficient matrices cross the boundary as nested lists indexed
//! `[basis index][orbital]`; trajectories as lists of such matrices, one per
//! time sample. Report-style results are returned as plain dicts/lists.

use std::path::PathBuf;
use std::sync::Arc;

use num_complex::Complex64;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;
use serde::Serialize;

use faedo_core::derivative::{build_operator, invertibility_margin, operator_norm, Linearization};
use faedo_core::fixed_point::{apply_kn, free_evolution, initial_coefficients, initial_fields, solve_fixed_point};
use faedo_core::function_space::{build_basis, traj_norm};
use faedo_core::harness::{self, ExperimentConfig};
use faedo_core::{CMatrix, GalerkinSystem};

/// Error category of a core error: `value`, `io` or `runtime`.
pub fn error_kind(e: &faedo_core::Error) -> &'static str {
    match harness::exit_code(e) {
        2 => "value",
        4 => "io",
        _ => "runtime",
    }
}

fn to_py(e: faedo_core::Error) -> PyErr {
    match error_kind(&e) {
        "value" => PyValueError::new_err(e.to_string()),
        "io" => PyOSError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Converts any serializable result into Python objects via `json.loads`.
fn to_python<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn matrix_to_rows(m: &CMatrix) -> Vec<Vec<Complex64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn rows_to_matrix(rows: &[Vec<Complex64>], dim: usize) -> PyResult<CMatrix> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.len() != dim || cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err(format!(
            "expected a {dim} x orbitals coefficient matrix"
        )));
    }
    Ok(CMatrix::from_fn(dim, cols, |i, o| rows[i][o]))
}

/// Experiment configuration (flat `section.key = value` text format).
#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    /// The built-in default scenario.
    #[staticmethod]
    fn default() -> Self {
        Self { inner: ExperimentConfig::default_scenario() }
    }

    /// Reads a config file; `"default"` selects the built-in scenario.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        ExperimentConfig::load(path).map(|inner| Self { inner }).map_err(to_py)
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        ExperimentConfig::parse(text).map(|inner| Self { inner }).map_err(to_py)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(to_py)
    }

    #[getter]
    fn n_ref(&self) -> usize {
        self.inner.n_ref()
    }

    #[getter]
    fn sweep_n(&self) -> Vec<usize> {
        self.inner.sweep_n.clone()
    }

    #[setter]
    fn set_sweep_n(&mut self, n: Vec<usize>) {
        self.inner.sweep_n = n;
    }

    #[getter]
    fn coupling(&self) -> f64 {
        self.inner.coupling
    }

    #[setter]
    fn set_coupling(&mut self, v: f64) {
        self.inner.coupling = v;
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.inner.horizon
    }

    #[setter]
    fn set_horizon(&mut self, v: f64) {
        self.inner.horizon = v;
    }

    #[getter]
    fn intervals(&self) -> usize {
        self.inner.intervals
    }

    #[setter]
    fn set_intervals(&mut self, v: usize) {
        self.inner.intervals = v;
    }

    #[getter]
    fn substeps(&self) -> usize {
        self.inner.substeps
    }

    #[setter]
    fn set_substeps(&mut self, v: usize) {
        self.inner.substeps = v;
    }

    #[getter]
    fn domain_points(&self) -> usize {
        self.inner.domain_points
    }

    #[setter]
    fn set_domain_points(&mut self, v: usize) {
        self.inner.domain_points = v;
    }

    #[getter]
    fn samples(&self) -> usize {
        self.inner.derivative_samples
    }

    #[setter]
    fn set_samples(&mut self, v: usize) {
        self.inner.derivative_samples = v;
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, v: u64) {
        self.inner.seed = v;
    }

    #[getter]
    fn initial(&self) -> String {
        self.inner.initial.to_string()
    }

    #[setter]
    fn set_initial(&mut self, v: &str) -> PyResult<()> {
        self.inner.initial = v.parse().map_err(to_py)?;
        Ok(())
    }

    #[getter]
    fn output_dir(&self) -> PathBuf {
        self.inner.output_dir.clone()
    }

    #[setter]
    fn set_output_dir(&mut self, v: PathBuf) {
        self.inner.output_dir = v;
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(n={:?}, n_ref={}, coupling={}, horizon={}, intervals={}, substeps={})",
            self.inner.sweep_n,
            self.inner.n_ref(),
            self.inner.coupling,
            self.inner.horizon,
            self.inner.intervals,
            self.inner.substeps
        )
    }
}

/// Coefficient trajectory on one Galerkin basis.
#[pyclass(name = "Trajectory", skip_from_py_object)]
struct PyTrajectory {
    inner: faedo_core::Trajectory,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn dim(&self) -> usize {
        self.inner.basis().dim()
    }

    #[getter]
    fn orbitals(&self) -> usize {
        self.inner.orbitals()
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        let grid = self.inner.grid();
        (0..grid.samples()).map(|j| grid.time(j)).collect()
    }

    /// Coefficients as `[sample][basis index][orbital]`.
    fn samples(&self) -> Vec<Vec<Vec<Complex64>>> {
        self.inner.samples().iter().map(matrix_to_rows).collect()
    }

    /// Max-in-time H¹₀ norm, or distance to `other` on the same basis.
    #[pyo3(signature = (other=None))]
    fn norm(&self, other: Option<PyRef<'_, PyTrajectory>>) -> PyResult<f64> {
        traj_norm(&self.inner, other.as_ref().map(|o| &o.inner)).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.samples().len()
    }
}

/// One Galerkin level: basis of dimension `n` with the model of `config`.
#[pyclass(name = "Level", skip_from_py_object)]
struct PyLevel {
    system: Arc<GalerkinSystem>,
    psi0: CMatrix,
    config: ExperimentConfig,
}

impl PyLevel {
    fn trajectory(&self, t: faedo_core::Trajectory) -> PyTrajectory {
        PyTrajectory { inner: t }
    }
}

#[pymethods]
impl PyLevel {
    #[new]
    fn new(config: PyConfig, n: usize) -> PyResult<Self> {
        let config = config.inner;
        config.validate().map_err(to_py)?;
        let model = config.model().map_err(to_py)?;
        let basis = build_basis(&model.domain, n).map_err(to_py)?;
        let fields = initial_fields(config.initial, &model.domain, config.orbitals);
        let psi0 = initial_coefficients(&basis, &fields).map_err(to_py)?;
        let system = GalerkinSystem::new(model, basis).map_err(to_py)?;
        Ok(Self {
            system: Arc::new(system),
            psi0,
            config,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.system.dim()
    }

    /// `Q_n Ψ₀` as `[basis index][orbital]`.
    fn initial_coefficients(&self) -> Vec<Vec<Complex64>> {
        matrix_to_rows(&self.psi0)
    }

    /// `‖c‖²_{L²}` of a coefficient matrix.
    fn l2_norm_sq(&self, coefficients: Vec<Vec<Complex64>>) -> PyResult<f64> {
        Ok(self.system.l2_norm_sq(&rows_to_matrix(&coefficients, self.system.dim())?))
    }

    /// External-only evolution of `Q_n Ψ₀`.
    fn free_evolution(&self, py: Python<'_>) -> PyResult<PyTrajectory> {
        let t = py.detach(|| free_evolution(&self.system, &self.psi0)).map_err(to_py)?;
        Ok(self.trajectory(t))
    }

    /// `K_n ψ*`: propagation of `Q_n Ψ₀` in the density of `psi_star`.
    fn apply_kn(&self, py: Python<'_>, psi_star: PyRef<'_, PyTrajectory>) -> PyResult<PyTrajectory> {
        let star = &psi_star.inner;
        let t = py.detach(|| apply_kn(&self.system, star, &self.psi0)).map_err(to_py)?;
        Ok(self.trajectory(t))
    }

    /// Picard fixed point; returns `(trajectory, residuals)`.
    fn solve_fixed_point(&self, py: Python<'_>) -> PyResult<(PyTrajectory, Vec<f64>)> {
        let (t, log) = py
            .detach(|| solve_fixed_point(&self.system, &self.psi0, &self.config.fixed_point))
            .map_err(to_py)?;
        Ok((self.trajectory(t), log.residuals))
    }

    /// `(norm estimate, invertibility margin)` of `K'_n` at the fixed point.
    fn derivative_at_fixed_point(&self, py: Python<'_>) -> PyResult<(f64, f64)> {
        py.detach(|| {
            let (psi, _) = solve_fixed_point(&self.system, &self.psi0, &self.config.fixed_point)?;
            let lin = Linearization::new(&self.system, &psi, &self.psi0)?;
            let op = build_operator(&lin, self.config.dim_cap)?;
            Ok((operator_norm(&op), invertibility_margin(&op)?))
        })
        .map_err(to_py)
    }
}

/// Full convergence sweep; returns the report as a dict (rows, n_ref, ...).
#[pyfunction]
fn sweep<'py>(py: Python<'py>, config: PyConfig) -> PyResult<Bound<'py, PyAny>> {
    let report = py.detach(|| harness::run_convergence_sweep(&config.inner)).map_err(to_py)?;
    to_python(py, &report)
}

/// Sweep report in the canonical CSV layout.
#[pyfunction]
fn sweep_csv(py: Python<'_>, config: PyConfig) -> PyResult<String> {
    let report = py.detach(|| harness::run_convergence_sweep(&config.inner)).map_err(to_py)?;
    Ok(report.to_csv())
}

#[pyfunction]
fn propagate<'py>(py: Python<'py>, config: PyConfig) -> PyResult<Bound<'py, PyAny>> {
    let rows = py.detach(|| harness::run_propagation(&config.inner)).map_err(to_py)?;
    to_python(py, &rows)
}

#[pyfunction]
fn fixed_point<'py>(py: Python<'py>, config: PyConfig) -> PyResult<Bound<'py, PyAny>> {
    let rows = py.detach(|| harness::run_fixed_point(&config.inner)).map_err(to_py)?;
    to_python(py, &rows)
}

#[pyfunction]
fn derivative_check<'py>(py: Python<'py>, config: PyConfig) -> PyResult<Bound<'py, PyAny>> {
    let check = py.detach(|| harness::run_derivative_check(&config.inner)).map_err(to_py)?;
    to_python(py, &check)
}

#[pyfunction]
fn hypotheses<'py>(py: Python<'py>, config: PyConfig) -> PyResult<Bound<'py, PyAny>> {
    let table = py.detach(|| harness::run_hypothesis_check(&config.inner)).map_err(to_py)?;
    to_python(py, &table)
}

#[pyfunction]
fn dispersion<'py>(py: Python<'py>, config: PyConfig) -> PyResult<Bound<'py, PyAny>> {
    let report = py.detach(|| harness::run_dispersion(&config.inner)).map_err(to_py)?;
    to_python(py, &report)
}

#[pymodule]
fn faedo(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PyLevel>()?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_csv, m)?)?;
    m.add_function(wrap_pyfunction!(propagate, m)?)?;
    m.add_function(wrap_pyfunction!(fixed_point, m)?)?;
    m.add_function(wrap_pyfunction!(derivative_check, m)?)?;
    m.add_function(wrap_pyfunction!(hypotheses, m)?)?;
    m.add_function(wrap_pyfunction!(dispersion, m)?)?;
    m.add("CSV_HEADER", harness::CSV_HEADER)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
