//! Python bindings.
//!
//! Specs, reports and questions cross the boundary as plain dicts with the
//! same shape as the JSON the command-line tool reads and writes.
//! Distributions are lists of `(state, productivity, lifetime)` tuples.

use lifeyears_core::axioms::{self, AxiomId, CheckConfig};
use lifeyears_core::elicitation::{self, Answer, SessionState};
use lifeyears_core::sensitivity::{self, FreeParameter, ParametricFamily};
use lifeyears_core::{Distribution, EvaluatorSpec, HealthStateId, Profile};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyString;
use serde::de::DeserializeOwned;
use serde::Serialize;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Accepts a JSON string or any object `json.dumps` can encode.
fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = if obj.is_instance_of::<PyString>() {
        obj.extract()?
    } else {
        obj.py()
            .import("json")?
            .call_method1("dumps", (obj,))?
            .extract()?
    };
    serde_json::from_str(&text).map_err(err)
}

type Row = (String, f64, f64);

fn to_distribution(rows: Vec<Row>) -> PyResult<Distribution> {
    let profiles = rows
        .into_iter()
        .map(|(s, p, t)| Ok(Profile::new(HealthStateId::new(s).map_err(err)?, p, t)))
        .collect::<PyResult<Vec<_>>>()?;
    let d = Distribution::new(profiles);
    d.validate_attributes().map_err(err)?;
    Ok(d)
}

fn to_rows(d: &Distribution) -> Vec<Row> {
    d.iter()
        .map(|p| (p.state.as_str().to_string(), p.productivity, p.lifetime))
        .collect()
}

fn check_config(spec: &EvaluatorSpec, trials: u64, seed: u64, tol: f64) -> CheckConfig {
    let mut cfg = CheckConfig {
        trials,
        seed,
        tolerance: tol,
        ..CheckConfig::default()
    };
    if let Some(reg) = spec.implied_registry() {
        cfg.registry = reg;
    }
    cfg
}

/// An evaluation function of one of the supported families.
#[pyclass(name = "Spec", module = "lifeyears", frozen)]
struct PySpec {
    inner: EvaluatorSpec,
}

#[pymethods]
impl PySpec {
    #[new]
    fn new(spec: &Bound<'_, PyAny>) -> PyResult<Self> {
        let inner: EvaluatorSpec = from_py(spec)?;
        inner.validate_params().map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn family(&self) -> &'static str {
        self.inner.family().name()
    }

    fn evaluate(&self, dist: Vec<Row>) -> PyResult<f64> {
        self.inner.evaluate(&to_distribution(dist)?).map_err(err)
    }

    fn contributions(&self, dist: Vec<Row>) -> PyResult<Vec<f64>> {
        self.inner
            .per_profile_contributions(&to_distribution(dist)?)
            .map_err(err)
    }

    /// Returns "first", "second" or "indifferent".
    #[pyo3(signature = (first, second, tol = 1e-9))]
    fn compare(&self, first: Vec<Row>, second: Vec<Row>, tol: f64) -> PyResult<&'static str> {
        let p = self
            .inner
            .compare(&to_distribution(first)?, &to_distribution(second)?, tol)
            .map_err(err)?;
        Ok(p.symbol())
    }

    fn hpye(&self, state: &str, productivity: f64, lifetime: f64) -> PyResult<f64> {
        let p = Profile::new(
            HealthStateId::new(state).map_err(err)?,
            productivity,
            lifetime,
        );
        self.inner.hpye_of_profile(&p).map_err(err)
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "Spec({})",
            serde_json::to_string(&self.inner).unwrap_or_default()
        )
    }
}

fn spec_of(obj: &Bound<'_, PyAny>) -> PyResult<EvaluatorSpec> {
    match obj.cast::<PySpec>() {
        Ok(s) => Ok(s.get().inner.clone()),
        Err(_) => PySpec::new(obj).map(|s| s.inner),
    }
}

/// A person trade-off elicitation session.
#[pyclass(name = "Session", module = "lifeyears")]
struct PySession {
    inner: SessionState,
}

#[pymethods]
impl PySession {
    #[staticmethod]
    #[pyo3(signature = (state, lo, hi, tol = elicitation::DEFAULT_SESSION_TOL))]
    fn quality(state: &str, lo: f64, hi: f64, tol: f64) -> PyResult<Self> {
        let state = HealthStateId::new(state).map_err(err)?;
        let inner = elicitation::start_quality_session(state, lo, hi, tol).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (q_a, lo, hi, tol = elicitation::DEFAULT_SESSION_TOL))]
    fn sigma(q_a: f64, lo: f64, hi: f64, tol: f64) -> PyResult<Self> {
        let inner = elicitation::start_sigma_session(q_a, lo, hi, tol).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn active(&self) -> bool {
        self.inner.is_active()
    }

    fn question<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.next_question().map_err(err)?)
    }

    /// `answer` is "prefer_a", "prefer_b" or "indifferent"; `value` pins the
    /// question's adjustable quantity instead of the bracket midpoint.
    #[pyo3(signature = (answer, value = None))]
    fn answer(&mut self, answer: &str, value: Option<f64>) -> PyResult<()> {
        let a: Answer =
            serde_json::from_value(serde_json::Value::String(answer.to_string())).map_err(err)?;
        match value {
            Some(v) => self.inner.submit_answer_at(v, a),
            None => self.inner.submit_answer(a),
        }
        .map_err(err)
    }

    fn estimate<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.estimate().map_err(err)?)
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }
}

/// The two five-person distributions of the worked example.
#[pyfunction]
fn example1() -> (Vec<Row>, Vec<Row>) {
    let (d, l) = lifeyears_core::example1();
    (to_rows(&d), to_rows(&l))
}

#[pyfunction]
fn evaluate(spec: &Bound<'_, PyAny>, dist: Vec<Row>) -> PyResult<f64> {
    spec_of(spec)?
        .evaluate(&to_distribution(dist)?)
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (spec, first, second, tol = 1e-9))]
fn compare(
    spec: &Bound<'_, PyAny>,
    first: Vec<Row>,
    second: Vec<Row>,
    tol: f64,
) -> PyResult<&'static str> {
    let p = spec_of(spec)?
        .compare(&to_distribution(first)?, &to_distribution(second)?, tol)
        .map_err(err)?;
    Ok(p.symbol())
}

#[pyfunction]
#[pyo3(signature = (spec, axiom, trials = 10_000, seed = 42, tol = 1e-9))]
fn check_axiom<'py>(
    py: Python<'py>,
    spec: &Bound<'py, PyAny>,
    axiom: &str,
    trials: u64,
    seed: u64,
    tol: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let spec = spec_of(spec)?;
    let axiom: AxiomId = axiom.parse().map_err(err)?;
    let cfg = check_config(&spec, trials, seed, tol);
    let verdict = py
        .detach(|| axioms::check_axiom(&spec, axiom, &cfg))
        .map_err(err)?;
    to_py(py, &verdict)
}

#[pyfunction]
#[pyo3(signature = (spec, trials = 10_000, seed = 42, tol = 1e-9))]
fn conformance_report<'py>(
    py: Python<'py>,
    spec: &Bound<'py, PyAny>,
    trials: u64,
    seed: u64,
    tol: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let spec = spec_of(spec)?;
    let cfg = check_config(&spec, trials, seed, tol);
    let report = py
        .detach(|| axioms::conformance_report(&spec, &cfg))
        .map_err(err)?;
    to_py(py, &report)
}

/// `param` is e.g. "sigma" or "q:a"; `None` scans a constant family.
#[pyfunction]
#[pyo3(signature = (spec, param, first, second, lo = 0.0, hi = 1.0, grid_n = sensitivity::DEFAULT_GRID_N, tol = sensitivity::DEFAULT_TOL))]
#[allow(clippy::too_many_arguments)]
fn find_thresholds<'py>(
    py: Python<'py>,
    spec: &Bound<'py, PyAny>,
    param: Option<&str>,
    first: Vec<Row>,
    second: Vec<Row>,
    lo: f64,
    hi: f64,
    grid_n: usize,
    tol: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let param: Option<FreeParameter> = param.map(str::parse).transpose().map_err(err)?;
    let fam = ParametricFamily::new(spec_of(spec)?, param, lo, hi).map_err(err)?;
    let report = sensitivity::find_thresholds(
        &fam,
        &to_distribution(first)?,
        &to_distribution(second)?,
        grid_n,
        tol,
    )
    .map_err(err)?;
    to_py(py, &report)
}

/// Runs `k` simulated quality and sigma sessions against a QALY/PALY truth.
#[pyfunction]
#[pyo3(signature = (truth, state = "a", k = 20, tol = elicitation::DEFAULT_SESSION_TOL, seed = 42))]
fn simulate_batch<'py>(
    py: Python<'py>,
    truth: &Bound<'py, PyAny>,
    state: &str,
    k: usize,
    tol: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let truth = spec_of(truth)?;
    let state = HealthStateId::new(state).map_err(err)?;
    let report = elicitation::simulate_batch(&truth, &state, k, tol, seed).map_err(err)?;
    to_py(py, &report)
}

#[pymodule]
fn lifeyears(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpec>()?;
    m.add_class::<PySession>()?;
    m.add_function(wrap_pyfunction!(example1, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(check_axiom, m)?)?;
    m.add_function(wrap_pyfunction!(conformance_report, m)?)?;
    m.add_function(wrap_pyfunction!(find_thresholds, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_batch, m)?)?;
    Ok(())
}
