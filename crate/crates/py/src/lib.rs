//! Python bindings for the terrabench core.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::sync::Arc;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use terrabench::dynamics::{self, Action, RobotState, SimConfig};
use terrabench::env::{self as core_env, EpisodeRecord, EpisodeSetup, TrajectoryLog};
use terrabench::grid::Grid;
use terrabench::planners::{PlannerConfigs, PlannerKind};
use terrabench::terrain::{self, ScenarioFamily};
use terrabench::traversability::{self as trav, Component, RiskConfig, RiskMetric, RiskMode, TrainingConfig};
use terrabench::Error;

/// `(x, y, theta, t)`.
type StateTuple = (f64, f64, f64, f64);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyIOError::new_err(io.to_string()),
        e if e.is_config() => PyValueError::new_err(e.to_string()),
        Error::Format(_) | Error::Data(_) | Error::OutOfBounds { .. } => PyValueError::new_err(e.to_string()),
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

fn rows<T: Clone>(g: &Grid<T>) -> Vec<Vec<T>> {
    g.as_slice().chunks(g.width()).map(|r| r.to_vec()).collect()
}

fn risk_config(metric: &str, alpha: f64, mode: &str) -> PyResult<RiskConfig> {
    let metric: RiskMetric = metric.parse().map_err(to_py)?;
    let mode = match mode {
        "mixture" => RiskMode::Mixture,
        "most_likely_class" => RiskMode::MostLikelyClass,
        other => return Err(PyValueError::new_err(format!("unknown risk mode '{other}'"))),
    };
    let cfg = RiskConfig { metric, alpha, mode };
    cfg.validate().map_err(to_py)?;
    Ok(cfg)
}

fn json_to_py(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// Parameters of one problem instance.
#[pyclass(module = "pyterrabench", name = "ScenarioSpec", from_py_object)]
#[derive(Clone)]
struct PyScenarioSpec {
    inner: terrain::ScenarioSpec,
}

#[pymethods]
impl PyScenarioSpec {
    #[new]
    #[pyo3(signature = (family = "std", seed = 0))]
    fn new(family: &str, seed: u64) -> PyResult<Self> {
        let family: ScenarioFamily = family.parse().map_err(to_py)?;
        Ok(PyScenarioSpec {
            inner: terrain::ScenarioSpec::for_family(family, seed),
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: terrain::ScenarioSpec =
            serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        inner.validate().map_err(to_py)?;
        Ok(PyScenarioSpec { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    #[getter]
    fn family(&self) -> &'static str {
        self.inner.family.key()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    #[getter]
    fn resolution(&self) -> f64 {
        self.inner.resolution
    }

    #[getter]
    fn start(&self) -> (f64, f64) {
        self.inner.start
    }

    #[getter]
    fn goal(&self) -> (f64, f64) {
        self.inner.goal
    }

    #[getter]
    fn time_budget(&self) -> f64 {
        self.inner.time_budget_t
    }

    #[getter]
    fn lambda_stuck(&self) -> f64 {
        self.inner.lambda_stuck
    }

    fn __repr__(&self) -> String {
        format!("ScenarioSpec(family='{}', seed={})", self.inner.family.key(), self.inner.seed)
    }
}

/// A generated terrain map with its hidden ground truth.
#[pyclass(module = "pyterrabench", name = "GridMap", frozen)]
struct PyGridMap {
    inner: Arc<terrain::GridMap>,
}

#[pymethods]
impl PyGridMap {
    #[staticmethod]
    fn generate(spec: &PyScenarioSpec) -> PyResult<Self> {
        let map = terrain::generate_map(&spec.inner).map_err(to_py)?;
        Ok(PyGridMap { inner: Arc::new(map) })
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        let f = File::open(path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        let map = terrain::read_map(BufReader::new(f)).map_err(to_py)?;
        Ok(PyGridMap { inner: Arc::new(map) })
    }

    fn write(&self, path: &str) -> PyResult<()> {
        let f = File::create(path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        terrain::write_map(&self.inner, BufWriter::new(f)).map_err(to_py)
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    #[getter]
    fn resolution(&self) -> f64 {
        self.inner.resolution()
    }

    /// Row-major lists, row 0 first.
    fn elevation(&self) -> Vec<Vec<f64>> {
        rows(self.inner.elevation())
    }

    fn slope(&self) -> Vec<Vec<f64>> {
        rows(self.inner.slope())
    }

    fn class_id(&self) -> Vec<Vec<u8>> {
        rows(self.inner.class_id())
    }

    fn lambda_true(&self) -> Vec<Vec<f64>> {
        rows(self.inner.lambda_true())
    }

    /// RGB in [0, 1].
    fn colors(&self) -> Vec<Vec<(f64, f64, f64)>> {
        let c = self.inner.colors();
        c.as_slice()
            .chunks(c.width())
            .map(|r| r.iter().map(|p| (p[0], p[1], p[2])).collect())
            .collect()
    }
}

/// Predicted class weights and per-class traversability moments for one map.
#[pyclass(module = "pyterrabench", name = "TravField", frozen)]
struct PyTravField {
    inner: Arc<trav::TravField>,
}

#[pymethods]
impl PyTravField {
    #[getter]
    fn n_cells(&self) -> usize {
        self.inner.n_cells()
    }

    #[getter]
    fn n_classes(&self) -> usize {
        self.inner.n_classes()
    }

    fn weights(&self, cell: usize) -> PyResult<Vec<f64>> {
        self.check(cell)?;
        Ok(self.inner.weights().cell(cell).to_vec())
    }

    /// `(weight, mean, variance)` per class.
    fn components(&self, cell: usize) -> PyResult<Vec<(f64, f64, f64)>> {
        self.check(cell)?;
        Ok(self
            .inner
            .components(cell)
            .iter()
            .map(|c| (c.weight, c.mean, c.variance))
            .collect())
    }

    #[pyo3(signature = (cell, metric = "cvar", alpha = 0.9, mode = "mixture"))]
    fn risk_value(&self, cell: usize, metric: &str, alpha: f64, mode: &str) -> PyResult<f64> {
        self.check(cell)?;
        trav::risk_value(&self.inner, cell, &risk_config(metric, alpha, mode)?).map_err(to_py)
    }

    #[pyo3(signature = (metric = "cvar", alpha = 0.9, mode = "mixture"))]
    fn risk_raster(&self, metric: &str, alpha: f64, mode: &str) -> PyResult<Vec<Vec<f64>>> {
        let raster = trav::risk_raster(&self.inner, &risk_config(metric, alpha, mode)?).map_err(to_py)?;
        Ok(rows(&raster))
    }
}

impl PyTravField {
    fn check(&self, cell: usize) -> PyResult<()> {
        if cell < self.inner.n_cells() {
            Ok(())
        } else {
            Err(PyValueError::new_err(format!("cell {cell} out of range")))
        }
    }
}

/// Terrain classifier plus one GP per class.
#[pyclass(module = "pyterrabench", name = "TravModels", frozen)]
struct PyTravModels {
    inner: Arc<trav::TravModels>,
}

#[pymethods]
impl PyTravModels {
    #[staticmethod]
    #[pyo3(signature = (template = None, seed = 0, n_maps = 4))]
    fn train(template: Option<&PyScenarioSpec>, seed: u64, n_maps: usize) -> PyResult<Self> {
        let template = template
            .map(|t| t.inner.clone())
            .unwrap_or_else(|| terrain::ScenarioSpec::standard(seed));
        let cfg = TrainingConfig {
            n_maps,
            ..Default::default()
        };
        let models = trav::TravModels::train(&template, seed, &cfg).map_err(to_py)?;
        Ok(PyTravModels { inner: Arc::new(models) })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let f = File::open(path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        let models = trav::read_models(BufReader::new(f)).map_err(to_py)?;
        Ok(PyTravModels { inner: Arc::new(models) })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        let f = File::create(path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        trav::write_models(&self.inner, BufWriter::new(f)).map_err(to_py)
    }

    fn predict(&self, map: &PyGridMap) -> PyResult<PyTravField> {
        let field = self.inner.predict(&map.inner).map_err(to_py)?;
        Ok(PyTravField { inner: Arc::new(field) })
    }
}

/// A step-by-step navigation episode driven from Python.
#[pyclass(module = "pyterrabench", name = "Env")]
struct PyEnv {
    inner: core_env::Env,
}

#[pymethods]
impl PyEnv {
    #[new]
    #[pyo3(signature = (spec, models, seed = None))]
    fn new(spec: &PyScenarioSpec, models: &PyTravModels, seed: Option<u64>) -> PyResult<Self> {
        let seed = seed.unwrap_or(spec.inner.seed);
        let (inner, _) = core_env::Env::reset(&spec.inner, &models.inner, seed, SimConfig::default()).map_err(to_py)?;
        Ok(PyEnv { inner })
    }

    /// Returns `((x, y, theta, t), done, failure_reason)`.
    fn step(&mut self, v: f64, omega: f64) -> PyResult<(StateTuple, bool, &'static str)> {
        let out = self.inner.step(Action::new(v, omega)).map_err(to_py)?;
        let s = out.observation.state;
        Ok(((s.x, s.y, s.theta, s.t), out.done, out.failure_reason.key()))
    }

    #[getter]
    fn state(&self) -> StateTuple {
        let s = self.inner.state();
        (s.x, s.y, s.theta, s.t)
    }

    #[getter]
    fn elapsed(&self) -> f64 {
        self.inner.elapsed()
    }

    #[getter]
    fn done(&self) -> bool {
        self.inner.is_done()
    }

    fn map(&self) -> PyGridMap {
        PyGridMap {
            inner: self.inner.map().clone(),
        }
    }

    fn field(&self) -> PyTravField {
        PyTravField {
            inner: self.inner.field().clone(),
        }
    }

    /// Episode summary in the log record layout, trajectory included.
    fn result(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let spec = self.inner.spec();
        let rec = EpisodeRecord::new(spec.family.key(), "external", spec.seed, &self.inner.result(), true);
        json_to_py(py, &serde_json::to_string(&rec).map_err(|e| PyRuntimeError::new_err(e.to_string()))?)
    }
}

/// Runs one planner on the instance map for `seed` and returns the log record as a dict.
#[pyfunction]
#[pyo3(signature = (spec, models, planner = "mppi", seed = None, metric = "cvar", alpha = 0.9, trajectory = false))]
#[allow(clippy::too_many_arguments)]
fn run_episode(
    py: Python<'_>,
    spec: &PyScenarioSpec,
    models: &PyTravModels,
    planner: &str,
    seed: Option<u64>,
    metric: &str,
    alpha: f64,
    trajectory: bool,
) -> PyResult<Py<PyAny>> {
    let kind: PlannerKind = planner.parse().map_err(to_py)?;
    let setup = EpisodeSetup {
        kind,
        planners: PlannerConfigs::default(),
        risk: risk_config(metric, alpha, "mixture")?,
        sim: SimConfig::default(),
    };
    let seed = seed.unwrap_or(spec.inner.seed);
    let result = core_env::run_episode(&spec.inner, &models.inner, &setup, seed, None).map_err(to_py)?;
    let rec = EpisodeRecord::new(spec.inner.family.key(), kind.key(), seed, &result, trajectory);
    json_to_py(py, &serde_json::to_string(&rec).map_err(|e| PyRuntimeError::new_err(e.to_string()))?)
}

/// One Euler step of the traversability-scaled unicycle.
#[pyfunction]
#[pyo3(signature = (state, v, omega, lam, dt = 0.1))]
fn dynamics_step(state: (f64, f64, f64), v: f64, omega: f64, lam: f64, dt: f64) -> PyResult<(f64, f64, f64)> {
    let sim = SimConfig {
        dt,
        ..Default::default()
    };
    sim.validate().map_err(to_py)?;
    let s = RobotState::new(state.0, state.1, state.2);
    let n = dynamics::step(&s, Action::new(v, omega), lam, &sim).map_err(to_py)?;
    Ok((n.x, n.y, n.theta))
}

/// Risk value of a mixture given as `(weight, mean, variance)` tuples.
#[pyfunction]
#[pyo3(signature = (components, metric = "cvar", alpha = 0.9, mode = "mixture"))]
fn risk_of_mixture(components: Vec<(f64, f64, f64)>, metric: &str, alpha: f64, mode: &str) -> PyResult<f64> {
    let comps: Vec<Component> = components
        .into_iter()
        .map(|(weight, mean, variance)| Component { weight, mean, variance })
        .collect();
    trav::risk_of_components(&comps, &risk_config(metric, alpha, mode)?).map_err(to_py)
}

/// Re-simulates a logged trajectory dict and returns the max position error.
#[pyfunction]
#[pyo3(signature = (trajectory, dt = 0.1))]
fn replay_error(trajectory: &Bound<'_, PyAny>, dt: f64) -> PyResult<f64> {
    let py = trajectory.py();
    let text: String = py.import("json")?.call_method1("dumps", (trajectory,))?.extract()?;
    let log: TrajectoryLog = serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let sim = SimConfig {
        dt,
        ..Default::default()
    };
    log.to_trajectory().and_then(|t| t.replay_error(&sim)).map_err(to_py)
}

#[pymodule]
fn pyterrabench(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenarioSpec>()?;
    m.add_class::<PyGridMap>()?;
    m.add_class::<PyTravField>()?;
    m.add_class::<PyTravModels>()?;
    m.add_class::<PyEnv>()?;
    m.add_function(wrap_pyfunction!(run_episode, m)?)?;
    m.add_function(wrap_pyfunction!(dynamics_step, m)?)?;
    m.add_function(wrap_pyfunction!(risk_of_mixture, m)?)?;
    m.add_function(wrap_pyfunction!(replay_error, m)?)?;
    m.add("MAP_MAGIC", terrain::MAP_MAGIC)?;
    m.add("MODEL_MAGIC", trav::MODEL_MAGIC)?;
    Ok(())
}
