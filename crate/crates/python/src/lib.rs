//! Python bindings: feasible sets, problem instances, the four learners, and
//! whole experiments driven by a JSON configuration.

use std::sync::Arc;

use cocofw::harness::solve_comparator;
use cocofw::{
    build_learner, fit_slope as core_fit_slope, resolve, run_experiment as core_run_experiment,
    Algo, Error, FeasibleSet as CoreSet, Learner as CoreLearner, PartialConfig, ProblemStream,
    RoundFunctions,
};
use pyo3::exceptions::{PyIndexError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidArgument(_) | Error::Config(_) | Error::Parse { .. } => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn json_to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_config(config: &str) -> PyResult<PartialConfig> {
    PartialConfig::from_json_str(config).map_err(to_py)
}

/// Compact convex set with a linear minimization oracle.
#[pyclass(name = "FeasibleSet", module = "cocofw", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySet(CoreSet);

#[pymethods]
impl PySet {
    #[staticmethod]
    fn l2_ball(dimension: usize, radius: f64) -> PyResult<Self> {
        CoreSet::l2_ball(dimension, radius).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn cube(dimension: usize, half_width: f64) -> PyResult<Self> {
        CoreSet::cube(dimension, half_width)
            .map(Self)
            .map_err(to_py)
    }

    #[staticmethod]
    fn simplex(dimension: usize, scale: f64) -> PyResult<Self> {
        CoreSet::simplex(dimension, scale).map(Self).map_err(to_py)
    }

    /// Matrices of shape `rows x cols` (row-major) with nuclear norm at most `tau`.
    #[staticmethod]
    fn trace_norm_ball(rows: usize, cols: usize, tau: f64) -> PyResult<Self> {
        CoreSet::trace_norm_ball(rows, cols, tau)
            .map(Self)
            .map_err(to_py)
    }

    fn lmo(&self, direction: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.lmo(&direction).map_err(to_py)
    }

    #[pyo3(signature = (point, tol = 1e-9))]
    fn contains(&self, point: Vec<f64>, tol: f64) -> PyResult<bool> {
        self.0.contains(&point, tol).map_err(to_py)
    }

    #[getter]
    fn kind(&self) -> String {
        format!("{:?}", self.0.kind())
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.0.dimension()
    }

    #[getter]
    fn radius(&self) -> f64 {
        self.0.radius()
    }

    #[getter]
    fn inner_radius(&self) -> f64 {
        self.0.inner_radius()
    }

    #[getter]
    fn diameter(&self) -> f64 {
        self.0.diameter()
    }

    fn __repr__(&self) -> String {
        format!(
            "FeasibleSet({:?}, dimension={}, radius={})",
            self.0.kind(),
            self.0.dimension(),
            self.0.radius()
        )
    }
}

/// A fixed sequence of losses and constraints.
#[pyclass(name = "Problem", module = "cocofw", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyProblem(Arc<ProblemStream>);

#[pymethods]
impl PyProblem {
    /// Builds the instance a configuration would run at horizon `horizon`;
    /// `config` is the same JSON document the command-line tool reads.
    #[staticmethod]
    #[pyo3(signature = (config, horizon, seed = 0))]
    fn from_config(config: &str, horizon: usize, seed: u64) -> PyResult<Self> {
        let mut partial = parse_config(config)?;
        if partial.algo.is_none() {
            partial.algo = Some(cocofw::config::OneOrMany::One(Algo::OfwTvc));
        }
        if partial.t_grid.is_none() {
            partial.t_grid = Some(vec![horizon]);
        }
        let cfg = partial.resolve().map_err(to_py)?;
        cfg.build_problem(horizon, seed)
            .map(|s| Self(Arc::new(s)))
            .map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn loss_value(&self, t: usize, x: Vec<f64>) -> PyResult<f64> {
        Ok(self.round(t)?.loss_value(&x))
    }

    fn constraint_value(&self, t: usize, x: Vec<f64>) -> PyResult<f64> {
        Ok(self.round(t)?.constraint_value(&x))
    }

    /// Fixed decision minimizing the total loss, or `None` without a feasibility guarantee.
    #[pyo3(signature = (iterations = 10_000))]
    fn comparator(&self, iterations: usize) -> PyResult<Option<Vec<f64>>> {
        let report = solve_comparator(&self.0, iterations).map_err(to_py)?;
        Ok(report.feasible.then_some(report.x_star))
    }

    #[getter]
    fn set(&self) -> PySet {
        PySet(self.0.meta.set.clone())
    }

    #[getter]
    fn lipschitz(&self) -> f64 {
        self.0.meta.lipschitz
    }

    #[getter]
    fn value_bound(&self) -> f64 {
        self.0.meta.value_bound
    }

    #[getter]
    fn strong_convexity(&self) -> f64 {
        self.0.meta.strong_convexity
    }
}

impl PyProblem {
    fn round(&self, t: usize) -> PyResult<&cocofw::Round> {
        self.0
            .rounds()
            .get(t)
            .ok_or_else(|| PyIndexError::new_err(format!("round {t} outside 0..{}", self.0.len())))
    }
}

/// One of the four learners, bound to a problem and played round by round.
#[pyclass(name = "Learner", module = "cocofw", unsendable)]
struct PyLearner {
    inner: Box<dyn CoreLearner>,
    problem: Arc<ProblemStream>,
    params: cocofw::Resolved,
    next: usize,
}

#[pymethods]
impl PyLearner {
    /// `overrides` is a JSON object with any of the parameter keys of a
    /// configuration file (beta, gamma, lambda, c, block_k, ...).
    #[new]
    #[pyo3(signature = (algo, problem, seed = 0, overrides = None))]
    fn new(algo: &str, problem: &PyProblem, seed: u64, overrides: Option<&str>) -> PyResult<Self> {
        let algo: Algo = algo.parse().map_err(to_py)?;
        let ov = match overrides {
            Some(text) => {
                let mut partial = parse_config(text)?;
                partial.algo = Some(cocofw::config::OneOrMany::One(algo));
                partial.t_grid = Some(vec![problem.0.len()]);
                partial.alpha_f = partial.alpha_f.or(Some(1.0));
                partial.problem = partial
                    .problem
                    .or(Some(cocofw::ProblemKind::SyntheticQuadratic));
                partial.resolve().map_err(to_py)?.overrides
            }
            None => Default::default(),
        };
        let params = resolve(algo, &problem.0.meta, &ov).map_err(to_py)?;
        let inner = build_learner(&params, &problem.0.meta, seed).map_err(to_py)?;
        Ok(Self {
            inner,
            problem: problem.0.clone(),
            params,
            next: 0,
        })
    }

    /// Plays the next round and returns its report.
    fn step<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let round =
            self.problem.rounds().get(self.next).ok_or_else(|| {
                PyIndexError::new_err("every round of the problem has been played")
            })?;
        let r = self.inner.step(round).map_err(to_py)?;
        self.next += 1;
        let d = PyDict::new(py);
        d.set_item("t", self.next)?;
        d.set_item("played", r.played)?;
        d.set_item("f_value", r.f_value)?;
        d.set_item("g_value", r.g_value)?;
        d.set_item("q", r.q)?;
        d.set_item("surrogate_value", r.surrogate_value)?;
        d.set_item("sigma", r.sigma)?;
        d.set_item("epoch", r.epoch.map(|e| e.epoch))?;
        d.set_item("g_tilde", r.epoch.map(|e| e.g_tilde))?;
        d.set_item("block", r.block)?;
        d.set_item(
            "failures",
            r.failures
                .iter()
                .map(|f| f.invariant.clone())
                .collect::<Vec<_>>(),
        )?;
        Ok(d)
    }

    /// Plays every remaining round; returns `(cumulative loss, final CCV)`.
    fn run(&mut self) -> PyResult<(f64, f64)> {
        let mut loss = 0.0;
        let mut q = 0.0;
        while let Some(round) = self.problem.rounds().get(self.next) {
            let r = self.inner.step(round).map_err(to_py)?;
            loss += r.f_value;
            q = r.q;
            self.next += 1;
        }
        Ok((loss, q))
    }

    fn set_checks(&mut self, on: bool) {
        self.inner.set_checks(on);
    }

    #[getter]
    fn algo(&self) -> String {
        self.params.algo.name().to_string()
    }

    #[getter]
    fn rounds_played(&self) -> usize {
        self.next
    }

    /// Resolved parameters (beta, gamma, Lyapunov function, block sizes, ...).
    #[getter]
    fn params<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &self.params)
    }
}

/// Runs an experiment from a JSON configuration and returns its summary.
#[pyfunction]
fn run_experiment<'py>(py: Python<'py>, config: &str) -> PyResult<Bound<'py, PyAny>> {
    let cfg = parse_config(config)?.resolve().map_err(to_py)?;
    let outcome = py.detach(|| core_run_experiment(&cfg)).map_err(to_py)?;
    json_to_py(py, &outcome.summary)
}

/// Least-squares slope of `ln metric` against `ln T` over `(T, metric)` pairs;
/// returns `(slope, intercept, r2)`.
#[pyfunction]
fn fit_slope(points: Vec<(f64, f64)>) -> PyResult<(f64, f64, f64)> {
    let fit = core_fit_slope(&points).map_err(to_py)?;
    Ok((fit.slope, fit.intercept, fit.r_squared))
}

#[pymodule]
#[pyo3(name = "cocofw")]
fn cocofw_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySet>()?;
    m.add_class::<PyProblem>()?;
    m.add_class::<PyLearner>()?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(fit_slope, m)?)?;
    m.add(
        "ALGORITHMS",
        Algo::ALL.iter().map(|a| a.name()).collect::<Vec<_>>(),
    )?;
    Ok(())
}
