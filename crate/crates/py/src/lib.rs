//! Python bindings for the multiphoton simulator.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use multiphoton::cat_code::{build_chain, cat_overlap_closed_form, compare_arms, run_ensemble, CavitySpec, ProtocolSpec};
use multiphoton::hilbert::{fidelity, StateVector, SubsystemLayout};
use multiphoton::photon_swap::{
    integrate_dynamics, register_swap, sweep_point, GaussianMode, SpectralGrid, SweepOptions, ThreeLevelDot,
};
use multiphoton::pipeline::{run_command, Command, PipelineConfig};
use multiphoton::polarization::{convert_register, pair_photons, ConversionSpec, DualRailState};
use multiphoton::spin_register::{apply_correction, execute, ghz_correction, initial_register, plan_ghz};
use multiphoton::C64;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// State vector over a labeled tensor-product space.
#[pyclass(name = "State", module = "multiphoton_py", from_py_object)]
#[derive(Clone)]
struct PyState {
    inner: StateVector,
}

#[pymethods]
impl PyState {
    #[new]
    #[pyo3(signature = (amplitudes, dims, labels=None))]
    fn new(amplitudes: Vec<C64>, dims: Vec<usize>, labels: Option<Vec<String>>) -> PyResult<Self> {
        let labels = labels.unwrap_or_else(|| (0..dims.len()).map(|i| format!("q{i}")).collect());
        let layout = SubsystemLayout::new(dims, labels).map_err(value_err)?;
        Ok(Self { inner: StateVector::new(amplitudes, layout).map_err(value_err)? })
    }

    #[staticmethod]
    fn ghz(n: usize) -> Self {
        Self { inner: StateVector::ghz(n) }
    }

    #[getter]
    fn amplitudes(&self) -> Vec<C64> {
        self.inner.amplitudes().to_vec()
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.inner.layout().dims().to_vec()
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.layout().labels().to_vec()
    }

    fn norm(&self) -> f64 {
        self.inner.norm()
    }

    fn fidelity(&self, other: &PyState) -> PyResult<f64> {
        fidelity(&self.inner, &other.inner).map_err(value_err)
    }

    fn __len__(&self) -> usize {
        self.inner.dim()
    }

    fn __repr__(&self) -> String {
        format!("State(dims={:?})", self.inner.layout().dims())
    }
}

/// Plans and runs the GHZ schedule; returns the corrected register and the timing report as JSON.
#[pyfunction]
#[pyo3(signature = (n, j1=1e8, j2=1e8))]
fn prepare_ghz(n: usize, j1: f64, j2: f64) -> PyResult<(PyState, String)> {
    let (schedule, timing) = plan_ghz(n, j1, j2).map_err(value_err)?;
    let raw = execute(&schedule, &initial_register(n)).map_err(value_err)?;
    let corr = ghz_correction(&raw).map_err(value_err)?;
    let state = apply_correction(&raw, &corr).map_err(value_err)?;
    let timing = serde_json::to_string(&timing).map_err(value_err)?;
    Ok((PyState { inner: state }, timing))
}

/// `<C+_alpha|C+_{i alpha}>` for real alpha.
#[pyfunction]
fn cat_overlap(alpha: f64) -> C64 {
    cat_overlap_closed_form(C64::new(alpha, 0.0))
}

/// Mean logical fidelity of the GHZ register after loss, with and without parity recovery.
#[pyfunction]
#[pyo3(signature = (n_dots=4, alpha=2.0, kappa=1.0, tau_syn=0.05, duration=0.1, n_cavities=3, n_trajectories=200, seed=1))]
#[allow(clippy::too_many_arguments)]
fn protect(
    n_dots: usize,
    alpha: f64,
    kappa: f64,
    tau_syn: f64,
    duration: f64,
    n_cavities: usize,
    n_trajectories: usize,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let cavity = CavitySpec::new(C64::new(alpha, 0.0), kappa).map_err(value_err)?;
    let chain = build_chain(&StateVector::ghz(n_dots), 0, n_cavities, &cavity).map_err(value_err)?;
    let specs = vec![cavity; n_cavities];
    let arm = |correct: bool| {
        let protocol = ProtocolSpec { duration, tau_syn, corrected: correct };
        run_ensemble(&chain, &StateVector::ghz(n_dots), &specs, &protocol, seed, n_trajectories)
    };
    let corrected = arm(true).map_err(value_err)?;
    let uncorrected = arm(false).map_err(value_err)?;
    let cmp = compare_arms(&corrected, &uncorrected).map_err(value_err)?;
    Ok((cmp.mean_corrected, cmp.mean_uncorrected))
}

/// Swap probability curve `(times, p)` for one dot driven by a Gaussian mode.
#[pyfunction]
#[pyo3(signature = (d, gamma1=1.0, gamma2=1.0, t_end=20.0, w1=1e6, w2=5e5, dt=None))]
fn swap_curve(
    d: f64,
    gamma1: f64,
    gamma2: f64,
    t_end: f64,
    w1: f64,
    w2: f64,
    dt: Option<f64>,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let dot = ThreeLevelDot { w1, w2, gamma1, gamma2 };
    let mode = GaussianMode { d, center: w1 };
    let grid = SpectralGrid::for_run(&dot, &mode, t_end).map_err(value_err)?;
    let dt = dt.unwrap_or_else(|| 1.0 / (20.0 * dot.gamma_total().max(d)));
    let traj = integrate_dynamics(&dot, &mode, &grid, t_end, dt).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok((traj.times, traj.p))
}

/// Long-time swap probability at one `(d, gamma)` point; returns `(p, converged)`.
#[pyfunction]
fn long_time_probability(d: f64, gamma: f64) -> PyResult<(f64, bool)> {
    let row = sweep_point(d, gamma, &SweepOptions::default()).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok((row.p_longtime, row.converged))
}

/// Dual-rail photon state from a register and per-dot swap probabilities; returns `(state, herald)`.
#[pyfunction]
fn swap_register(register: &PyState, p_success: Vec<f64>) -> PyResult<(PyState, f64)> {
    let (state, herald) = register_swap(&register.inner, &p_success).map_err(value_err)?;
    Ok((PyState { inner: state }, herald))
}

/// Pairs dual-rail photons and converts them to polarization; returns `(state, herald)`.
#[pyfunction]
#[pyo3(signature = (dual_rail, eta_bbo=1.0, detector_efficiency=1.0))]
fn to_polarization(dual_rail: &PyState, eta_bbo: f64, detector_efficiency: f64) -> PyResult<(PyState, f64)> {
    let spec = ConversionSpec { eta_bbo, detector_efficiency };
    let rails = DualRailState::new(dual_rail.inner.clone()).map_err(value_err)?;
    let (paired, h_pair) = pair_photons(&rails, &spec).map_err(value_err)?;
    let (pol, h_conv) = convert_register(&paired, &spec).map_err(value_err)?;
    Ok((PyState { inner: pol.into_state() }, h_pair * h_conv))
}

/// Runs a pipeline command with a JSON configuration and returns the JSON report.
#[pyfunction]
#[pyo3(signature = (command, config_json=None))]
fn run(py: Python<'_>, command: &str, config_json: Option<&str>) -> PyResult<String> {
    let command = match command {
        "ghz" => Command::Ghz,
        "protect" => Command::Protect,
        "swap" => Command::Swap,
        "sweep" => Command::Sweep,
        "pipeline" => Command::Pipeline,
        other => return Err(PyValueError::new_err(format!("unknown command {other}"))),
    };
    let config = match config_json {
        Some(s) => PipelineConfig::from_json(s).map_err(value_err)?,
        None => PipelineConfig::default(),
    };
    py.detach(|| run_command(command, &config))
        .map(|r| r.to_json())
        .map_err(|e| PyRuntimeError::new_err(e.to_json()))
}

#[pymodule]
fn multiphoton_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyState>()?;
    m.add_function(wrap_pyfunction!(prepare_ghz, m)?)?;
    m.add_function(wrap_pyfunction!(cat_overlap, m)?)?;
    m.add_function(wrap_pyfunction!(protect, m)?)?;
    m.add_function(wrap_pyfunction!(swap_curve, m)?)?;
    m.add_function(wrap_pyfunction!(long_time_probability, m)?)?;
    m.add_function(wrap_pyfunction!(swap_register, m)?)?;
    m.add_function(wrap_pyfunction!(to_polarization, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
