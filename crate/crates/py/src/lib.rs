//! Python bindings for `modwave`.
//!
//! Fields cross the boundary as flat lists of complex numbers in the lattice's
//! row-major site order; momenta and positions as lists of floats.

use std::path::PathBuf;
use std::sync::Arc;

use num_complex::Complex64;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use modwave::classical::{self, FlowParams, PhasePoint};
use modwave::experiment::{self, ExperimentConfig, Stage};
use modwave::hj::{self, Modifier};
use modwave::lattice::{self, ContinuumPotential, ExtensionPolicy};
use modwave::quantum;
use modwave::Error;

fn err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        e @ (Error::SizeMismatch { .. }
        | Error::InvalidInput(_)
        | Error::BoxTooSmall(_)
        | Error::ThresholdOverlap(_)
        | Error::Precondition(_)
        | Error::Config(_)
        | Error::Parse(_)
        | Error::TimeOutOfRange { .. }) => PyValueError::new_err(e.to_string()),
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Truncated lattice `{-L..L}^d`.
#[pyclass(name = "LatticeBox", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyLatticeBox(lattice::LatticeBox);

#[pymethods]
impl PyLatticeBox {
    #[new]
    fn new(dim: usize, half_width: usize) -> PyResult<Self> {
        lattice::LatticeBox::new(dim, half_width).map(Self).map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn half_width(&self) -> usize {
        self.0.half_width()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    /// Site coordinates of a flat index.
    fn site(&self, index: usize) -> PyResult<Vec<i64>> {
        if index >= self.0.len() {
            return Err(PyValueError::new_err(format!("index {index} out of range")));
        }
        Ok(self.0.site_vec(index))
    }

    fn __repr__(&self) -> String {
        format!("LatticeBox(dim={}, half_width={})", self.0.dim(), self.0.half_width())
    }
}

/// Energy window `I = [lower, upper]` with margin `delta` and smoothing collar.
#[pyclass(name = "EnergyWindow", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyEnergyWindow(lattice::EnergyWindow);

#[pymethods]
impl PyEnergyWindow {
    #[new]
    #[pyo3(signature = (dim, lower, upper, margin=None, smoothing=None))]
    fn new(dim: usize, lower: f64, upper: f64, margin: Option<f64>, smoothing: Option<f64>) -> PyResult<Self> {
        let w = match margin {
            Some(m) => lattice::EnergyWindow::new(dim, lower, upper, m),
            None => lattice::EnergyWindow::with_auto_margin(dim, lower, upper),
        }
        .map_err(err)?;
        let w = match smoothing {
            Some(s) => w.with_smoothing(s).map_err(err)?,
            None => w,
        };
        Ok(Self(w))
    }

    #[getter]
    fn lower(&self) -> f64 {
        self.0.lower()
    }

    #[getter]
    fn upper(&self) -> f64 {
        self.0.upper()
    }

    #[getter]
    fn margin(&self) -> f64 {
        self.0.margin()
    }

    #[getter]
    fn smoothing(&self) -> f64 {
        self.0.smoothing()
    }

    fn contains(&self, energy: f64) -> bool {
        self.0.contains(energy)
    }

    fn __repr__(&self) -> String {
        format!("EnergyWindow([{}, {}], margin={})", self.0.lower(), self.0.upper(), self.0.margin())
    }
}

/// Lattice potential with its continuum evaluator.
#[pyclass(name = "Potential", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPotential {
    spec: lattice::PotentialSpec,
    eval: Arc<lattice::Potential>,
}

impl PyPotential {
    fn from_spec(spec: lattice::PotentialSpec, dim: usize) -> PyResult<Self> {
        if spec.policy == ExtensionPolicy::Window && !spec.is_zero() {
            return Err(PyValueError::new_err(
                "window-extended potentials are built by the experiment runner; use policy 'analytic'",
            ));
        }
        let eval = lattice::Potential::new(spec.clone(), dim).map_err(err)?;
        Ok(PyPotential { spec, eval: Arc::new(eval) })
    }
}

#[pymethods]
impl PyPotential {
    #[staticmethod]
    fn zero(dim: usize) -> PyResult<Self> {
        Self::from_spec(lattice::PotentialSpec::zero(), dim)
    }

    /// `V[n] = amplitude <n>^(-decay)`.
    #[staticmethod]
    fn power(dim: usize, amplitude: f64, decay: f64) -> PyResult<Self> {
        Self::from_spec(lattice::PotentialSpec::power(amplitude, decay).map_err(err)?, dim)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.eval.dim()
    }

    fn value(&self, x: Vec<f64>) -> PyResult<f64> {
        self.eval.value(&x).map_err(err)
    }

    fn gradient(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        let mut g = vec![0.0; x.len()];
        self.eval.gradient(&x, &mut g).map_err(err)?;
        Ok(g)
    }

    fn lattice_value(&self, site: Vec<i64>) -> f64 {
        self.spec.lattice_value(&site)
    }

    fn __repr__(&self) -> String {
        format!("Potential({:?})", self.spec.family)
    }
}

/// Free symbol `p0(xi) = sum cos xi_j`.
#[pyfunction]
fn free_symbol(xi: Vec<f64>) -> f64 {
    lattice::free_symbol(&xi)
}

/// Group velocity `v(xi) = grad p0(xi)`.
#[pyfunction]
fn velocity(xi: Vec<f64>) -> Vec<f64> {
    lattice::symbols::velocity_vec(&xi)
}

/// `(delta0, delta, R0)` of the escape estimate.
#[pyfunction]
#[pyo3(signature = (window, potential, max_radius=1e6))]
fn escape_constants(window: &PyEnergyWindow, potential: &PyPotential, max_radius: f64) -> PyResult<(f64, f64, f64)> {
    let k = classical::escape_constants(&window.0, potential.eval.as_ref(), max_radius).map_err(err)?;
    Ok((k.delta0, k.delta, k.r0))
}

/// Hamilton flow sampled at `times`: returns `(x, xi, energy)` lists, one row per time.
#[pyfunction]
#[pyo3(signature = (potential, x, xi, times, step=1e-2, drift_tolerance=1e-8))]
fn integrate_flow(
    potential: &PyPotential,
    x: Vec<f64>,
    xi: Vec<f64>,
    times: Vec<f64>,
    step: f64,
    drift_tolerance: f64,
) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>)> {
    let start = PhasePoint::new(x, xi).map_err(err)?;
    let params = FlowParams {
        step,
        drift_tolerance,
        ..FlowParams::default()
    };
    let t = classical::integrate_flow(potential.eval.as_ref(), &start, &params, &times, None).map_err(err)?;
    Ok((t.x, t.xi, t.energy))
}

/// Normalized Gaussian momentum bump centred at `momentum`.
#[pyfunction]
fn wavepacket(lattice_box: &PyLatticeBox, window: &PyEnergyWindow, momentum: Vec<f64>, width: f64) -> PyResult<Vec<Complex64>> {
    let f = lattice::Fourier::new(lattice_box.0);
    let spec = lattice::PacketSpec::new(momentum, width);
    Ok(lattice::build_wavepacket(&f, &spec, &window.0).map_err(err)?.into_values())
}

fn field(b: lattice::LatticeBox, values: Vec<Complex64>) -> PyResult<lattice::LatticeField> {
    lattice::LatticeField::new(b, values).map_err(err)
}

/// Chebyshev propagator for `H = H0 + V` on a box.
#[pyclass(name = "Propagator", frozen)]
struct PyPropagator {
    inner: quantum::Propagator,
    fourier: lattice::Fourier,
}

#[pymethods]
impl PyPropagator {
    #[new]
    #[pyo3(signature = (lattice_box, potential, tolerance=1e-12))]
    fn new(lattice_box: &PyLatticeBox, potential: &PyPotential, tolerance: f64) -> PyResult<Self> {
        let h = quantum::Hamiltonian::new(lattice_box.0, &potential.spec).map_err(err)?;
        let cfg = quantum::PropagatorConfig {
            tolerance,
            ..quantum::PropagatorConfig::default()
        };
        Ok(PyPropagator {
            inner: quantum::Propagator::new(h, cfg).map_err(err)?,
            fourier: lattice::Fourier::new(lattice_box.0),
        })
    }

    /// `e^{-itH} u`.
    fn propagate(&self, u: Vec<Complex64>, t: f64) -> PyResult<Vec<Complex64>> {
        let b = self.inner.hamiltonian().lattice_box();
        Ok(self.inner.propagate(&field(b, u)?, t).map_err(err)?.into_values())
    }

    /// `e^{-itH0} u`, exact in Fourier space.
    fn propagate_free(&self, u: Vec<Complex64>, t: f64) -> PyResult<Vec<Complex64>> {
        let b = self.inner.hamiltonian().lattice_box();
        Ok(quantum::free_propagate(&self.fourier, &field(b, u)?, t).map_err(err)?.into_values())
    }

    /// Share of `|u|^2` within `margin` sites of the box edge.
    fn boundary_mass(&self, u: Vec<Complex64>, margin: usize) -> PyResult<f64> {
        let b = self.inner.hamiltonian().lattice_box();
        Ok(quantum::boundary_mass(&field(b, u)?, margin))
    }

    #[getter]
    fn half_width(&self) -> f64 {
        self.inner.half_width()
    }
}

/// Hamilton-Jacobi phase table loaded from disk (as written by the `hj` stage).
#[pyclass(name = "PhaseTable", frozen)]
struct PyPhaseTable(hj::PhaseTable);

#[pymethods]
impl PyPhaseTable {
    #[staticmethod]
    fn load(json_path: PathBuf, csv_path: PathBuf) -> PyResult<Self> {
        hj::PhaseTable::load(&json_path, &csv_path).map(Self).map_err(err)
    }

    /// Schedule times.
    fn times(&self) -> Vec<f64> {
        self.0.schedule().times().to_vec()
    }

    #[getter]
    fn r1(&self) -> f64 {
        self.0.header().r1
    }

    /// `Phi(t, xi_k)` on the full momentum grid.
    fn phase(&self, t: f64) -> PyResult<Vec<f64>> {
        self.0.phase(t).map_err(err)
    }

    /// `d_xi Phi(t, xi_k)`, `d` entries per grid point.
    fn position(&self, t: f64) -> PyResult<Vec<f64>> {
        self.0.position(t).map_err(err)
    }
}

/// Run an experiment stage from a TOML config; returns `(run_dir, exit_code)`.
#[pyfunction]
#[pyo3(signature = (config_path, stage="all", out=None, seed=None))]
fn run_experiment(config_path: PathBuf, stage: &str, out: Option<PathBuf>, seed: Option<u64>) -> PyResult<(String, i32)> {
    let mut cfg = ExperimentConfig::load(&config_path).map_err(err)?;
    if let Some(o) = out {
        cfg.output.dir = o;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let stage: Stage = stage.parse().map_err(err)?;
    let outcome = experiment::run(&cfg, stage).map_err(err)?;
    Ok((outcome.dir.display().to_string(), outcome.exit_code()))
}

/// Render the summary of a finished run and write `<run_dir>.report.json`.
#[pyfunction]
fn report(run_dir: PathBuf) -> PyResult<String> {
    Ok(experiment::write_report(&run_dir).map_err(err)?.0.summary)
}

/// Validate a config file without running anything; returns it as TOML.
#[pyfunction]
fn check_config(config_path: PathBuf) -> PyResult<String> {
    Ok(ExperimentConfig::load(&config_path).map_err(err)?.to_toml())
}

#[pymodule]
fn modwave_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyLatticeBox>()?;
    m.add_class::<PyEnergyWindow>()?;
    m.add_class::<PyPotential>()?;
    m.add_class::<PyPropagator>()?;
    m.add_class::<PyPhaseTable>()?;
    m.add_function(wrap_pyfunction!(free_symbol, m)?)?;
    m.add_function(wrap_pyfunction!(velocity, m)?)?;
    m.add_function(wrap_pyfunction!(escape_constants, m)?)?;
    m.add_function(wrap_pyfunction!(integrate_flow, m)?)?;
    m.add_function(wrap_pyfunction!(wavepacket, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(report, m)?)?;
    m.add_function(wrap_pyfunction!(check_config, m)?)?;
    Ok(())
}
