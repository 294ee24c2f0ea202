//! Python bindings: `import rpm_monitor`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use rpm_core::asymptotic::{self, FreeParam};
use rpm_core::bench::{self, SweepParam, SweepSpec};
use rpm_core::model::{self, State, Tier};
use rpm_core::policy::{self, PolicyClass};
use rpm_core::sim;
use rpm_core::solver::{self, EvalMethod, SolverError, ValueFunction};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn solver_err(e: SolverError) -> PyErr {
    match e {
        SolverError::NotConverged(_) => PyRuntimeError::new_err(e.to_string()),
        other => value_err(other),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(value_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_tier(s: &str) -> PyResult<Tier> {
    match s {
        "o" | "ordinary" => Ok(Tier::Ordinary),
        "i" | "intensive" => Ok(Tier::Intensive),
        _ => Err(PyValueError::new_err(format!(
            "unknown tier {s:?}; use 'o' or 'i'"
        ))),
    }
}

fn parse_row(row: Vec<String>) -> PyResult<Vec<Tier>> {
    row.iter().map(|s| parse_tier(s)).collect()
}

fn row_symbols(row: &[Tier]) -> Vec<String> {
    row.iter().map(|t| t.symbol().to_string()).collect()
}

#[pyclass(name = "ModelParams", module = "rpm_monitor", from_py_object)]
#[derive(Clone)]
struct PyModelParams {
    inner: model::ModelParams,
}

#[pymethods]
impl PyModelParams {
    #[new]
    #[pyo3(signature = (h_max, lambda_o, lambda_i, c_o, c_i, c_c, gamma, c_oi = 0.0, c_io = 0.0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        h_max: usize,
        lambda_o: f64,
        lambda_i: f64,
        c_o: f64,
        c_i: f64,
        c_c: f64,
        gamma: f64,
        c_oi: f64,
        c_io: f64,
    ) -> Self {
        let inner = model::ModelParams {
            h_max,
            lambda_o,
            lambda_i,
            c_o,
            c_i,
            c_c,
            c_oi,
            c_io,
            gamma,
        };
        Self { inner }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = serde_json::from_str(text).map_err(value_err)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(value_err)
    }

    /// List of `(field, message)` violations; empty when valid.
    fn validate(&self) -> Vec<(String, String)> {
        self.inner
            .validate()
            .violations
            .into_iter()
            .map(|v| (v.field, v.message))
            .collect()
    }

    fn warnings(&self) -> Vec<(String, String)> {
        self.inner
            .validate()
            .warnings
            .into_iter()
            .map(|v| (v.field, v.message))
            .collect()
    }

    fn is_simplified(&self) -> bool {
        self.inner.is_simplified()
    }

    /// `[(tier, h, probability), ...]` for one step from `(tier, h)` under `action`.
    fn transition(&self, tier: &str, h: usize, action: &str) -> PyResult<Vec<(String, usize, f64)>> {
        let d = model::transition(&self.inner, State::new(parse_tier(tier)?, h), parse_tier(action)?)
            .map_err(value_err)?;
        Ok(d.outcomes()
            .iter()
            .map(|(s, p)| (s.tier.symbol().to_string(), s.h, *p))
            .collect())
    }

    fn cost(&self, tier: &str, h: usize, action: &str) -> PyResult<f64> {
        model::cost(&self.inner, State::new(parse_tier(tier)?, h), parse_tier(action)?).map_err(value_err)
    }

    #[getter]
    fn h_max(&self) -> usize {
        self.inner.h_max
    }
    #[getter]
    fn lambda_o(&self) -> f64 {
        self.inner.lambda_o
    }
    #[getter]
    fn lambda_i(&self) -> f64 {
        self.inner.lambda_i
    }
    #[getter]
    fn c_o(&self) -> f64 {
        self.inner.c_o
    }
    #[getter]
    fn c_i(&self) -> f64 {
        self.inner.c_i
    }
    #[getter]
    fn c_c(&self) -> f64 {
        self.inner.c_c
    }
    #[getter]
    fn c_oi(&self) -> f64 {
        self.inner.c_oi
    }
    #[getter]
    fn c_io(&self) -> f64 {
        self.inner.c_io
    }
    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "ModelParams(h_max={}, lambda_o={}, lambda_i={}, c_o={}, c_i={}, c_c={}, gamma={}, c_oi={}, c_io={})",
            p.h_max, p.lambda_o, p.lambda_i, p.c_o, p.c_i, p.c_c, p.gamma, p.c_oi, p.c_io
        )
    }
}

#[pyclass(name = "Policy", module = "rpm_monitor", from_py_object)]
#[derive(Clone)]
struct PyPolicy {
    inner: policy::Policy,
}

#[pymethods]
impl PyPolicy {
    /// Rows of `'o'`/`'i'` for `h = 1..H`, one per current tier.
    #[new]
    fn new(ordinary: Vec<String>, intensive: Vec<String>) -> PyResult<Self> {
        let inner =
            policy::Policy::from_rows(parse_row(ordinary)?, parse_row(intensive)?).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn ordinary(&self) -> Vec<String> {
        row_symbols(self.inner.row(Tier::Ordinary))
    }

    #[getter]
    fn intensive(&self) -> Vec<String> {
        row_symbols(self.inner.row(Tier::Intensive))
    }

    #[getter]
    fn h_max(&self) -> usize {
        self.inner.h_max()
    }

    fn action(&self, tier: &str, h: usize) -> PyResult<String> {
        if h == 0 || h > self.inner.h_max() {
            return Err(PyValueError::new_err(format!(
                "h must lie in [1, {}]",
                self.inner.h_max()
            )));
        }
        Ok(self
            .inner
            .action(State::new(parse_tier(tier)?, h))
            .symbol()
            .to_string())
    }

    /// Structural class as a dict, e.g. `{"class": "threshold", "h_bar": 3}`.
    fn classify<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.classify())
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!(
            "Policy(ordinary={:?}, intensive={:?})",
            self.ordinary(),
            self.intensive()
        )
    }
}

#[pyclass(name = "SolveResult", module = "rpm_monitor", frozen)]
struct PySolveResult {
    inner: solver::SolveResult,
}

#[pymethods]
impl PySolveResult {
    /// `V(o, h)` for `h = 0..H`.
    #[getter]
    fn values_ordinary(&self) -> Vec<f64> {
        self.inner.values.row(Tier::Ordinary).to_vec()
    }

    #[getter]
    fn values_intensive(&self) -> Vec<f64> {
        self.inner.values.row(Tier::Intensive).to_vec()
    }

    #[getter]
    fn policy(&self) -> PyPolicy {
        PyPolicy {
            inner: self.inner.policy.clone(),
        }
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    #[getter]
    fn final_residual(&self) -> f64 {
        self.inner.final_residual
    }

    fn policy_class<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.policy.classify())
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "SolveResult(class={}, iterations={}, final_residual={:e})",
            self.inner.policy.classify().name(),
            self.inner.iterations,
            self.inner.final_residual
        )
    }
}

#[pyfunction]
fn simplified_preset(
    lambda_o: f64,
    lambda_i: f64,
    c_i: f64,
    c_c: f64,
    gamma: f64,
    h_max: usize,
) -> PyResult<PyModelParams> {
    let inner = model::simplified_preset(lambda_o, lambda_i, c_i, c_c, gamma, h_max).map_err(value_err)?;
    Ok(PyModelParams { inner })
}

#[pyfunction]
#[pyo3(signature = (params, epsilon = solver::DEFAULT_EPSILON, max_iter = solver::DEFAULT_MAX_ITER))]
fn value_iteration(
    py: Python<'_>,
    params: PyModelParams,
    epsilon: f64,
    max_iter: usize,
) -> PyResult<PySolveResult> {
    let inner = py
        .detach(|| solver::value_iteration(&params.inner, epsilon, max_iter))
        .map_err(solver_err)?;
    Ok(PySolveResult { inner })
}

#[pyfunction]
fn solve(py: Python<'_>, params: PyModelParams) -> PyResult<PySolveResult> {
    value_iteration(py, params, solver::DEFAULT_EPSILON, solver::DEFAULT_MAX_ITER)
}

#[pyfunction]
fn bruteforce_optimal(py: Python<'_>, params: PyModelParams) -> PyResult<PySolveResult> {
    let inner = py
        .detach(|| solver::bruteforce_optimal(&params.inner))
        .map_err(solver_err)?;
    Ok(PySolveResult { inner })
}

/// Exact (or iterative) values of `policy`, as `(ordinary_row, intensive_row)`.
#[pyfunction]
#[pyo3(signature = (params, policy, direct = true, epsilon = solver::DEFAULT_EPSILON))]
fn policy_evaluation(
    params: PyModelParams,
    policy: PyPolicy,
    direct: bool,
    epsilon: f64,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let method = if direct {
        EvalMethod::Direct
    } else {
        EvalMethod::Iterative
    };
    let v = solver::policy_evaluation(&params.inner, &policy.inner, method, epsilon).map_err(solver_err)?;
    Ok((v.row(Tier::Ordinary).to_vec(), v.row(Tier::Intensive).to_vec()))
}

type QRow = Vec<(f64, f64)>;

/// `Q(m, h, a)` rows for `h = 1..H`, each entry `(q_ordinary, q_intensive)`.
#[pyfunction]
fn q_values(
    params: PyModelParams,
    values_ordinary: Vec<f64>,
    values_intensive: Vec<f64>,
) -> PyResult<(QRow, QRow)> {
    let v = ValueFunction {
        ordinary: values_ordinary,
        intensive: values_intensive,
    };
    let q = solver::q_values(&params.inner, &v).map_err(solver_err)?;
    let rows = |tier| {
        (1..=params.inner.h_max)
            .map(|h| {
                let s = State::new(tier, h);
                (q.get(s, Tier::Ordinary), q.get(s, Tier::Intensive))
            })
            .collect()
    };
    Ok((rows(Tier::Ordinary), rows(Tier::Intensive)))
}

#[pyfunction]
fn greedy_policy(
    params: PyModelParams,
    values_ordinary: Vec<f64>,
    values_intensive: Vec<f64>,
) -> PyResult<PyPolicy> {
    let v = ValueFunction {
        ordinary: values_ordinary,
        intensive: values_intensive,
    };
    let inner = solver::greedy_policy(&params.inner, &v).map_err(solver_err)?;
    Ok(PyPolicy { inner })
}

#[pyfunction]
fn make_constant(h_max: usize, tier: &str) -> PyResult<PyPolicy> {
    Ok(PyPolicy {
        inner: policy::make_constant(h_max, parse_tier(tier)?),
    })
}

#[pyfunction]
fn make_threshold(h_max: usize, h_bar: usize) -> PyResult<PyPolicy> {
    Ok(PyPolicy {
        inner: policy::make_threshold(h_max, h_bar).map_err(value_err)?,
    })
}

#[pyfunction]
fn make_two_threshold(h_max: usize, lower: usize, upper: usize) -> PyResult<PyPolicy> {
    Ok(PyPolicy {
        inner: policy::make_two_threshold(h_max, lower, upper).map_err(value_err)?,
    })
}

#[pyfunction]
fn phi(lambda_o: f64, gamma: f64) -> PyResult<f64> {
    asymptotic::phi(lambda_o, gamma).map_err(value_err)
}

#[pyfunction]
fn v_o_asymptotic(params: PyModelParams, h: usize) -> PyResult<f64> {
    asymptotic::v_o_asymptotic(&params.inner, h).map_err(value_err)
}

#[pyfunction]
fn h_prime(params: PyModelParams) -> PyResult<usize> {
    asymptotic::h_prime(&params.inner).map_err(value_err)
}

/// Closed-form quantities and sufficient conditions, as a dict.
#[pyfunction]
fn check<'py>(py: Python<'py>, params: PyModelParams) -> PyResult<Bound<'py, PyAny>> {
    let r = asymptotic::report(&params.inner).map_err(value_err)?;
    to_py(py, &r)
}

fn parse_free(free: &str) -> PyResult<FreeParam> {
    match free {
        "cost_ratio" => Ok(FreeParam::CostRatio),
        "lambda_i" => Ok(FreeParam::LambdaI),
        "gamma" => Ok(FreeParam::Gamma),
        _ => Err(PyValueError::new_err(format!("unknown free parameter {free:?}"))),
    }
}

#[pyfunction]
fn boundary(params: PyModelParams, free: &str) -> PyResult<Vec<f64>> {
    asymptotic::boundary(&params.inner, parse_free(free)?).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (params, policy, tier, h, seed = 0, max_steps = None))]
fn simulate<'py>(
    py: Python<'py>,
    params: PyModelParams,
    policy: PyPolicy,
    tier: &str,
    h: usize,
    seed: u64,
    max_steps: Option<usize>,
) -> PyResult<Bound<'py, PyAny>> {
    let max_steps = max_steps.unwrap_or_else(|| sim::value_horizon(params.inner.gamma));
    let t = sim::simulate(
        &params.inner,
        &policy.inner,
        State::new(parse_tier(tier)?, h),
        seed,
        max_steps,
    )
    .map_err(value_err)?;
    to_py(py, &t)
}

#[pyfunction]
#[pyo3(signature = (params, policy, tier, h, n, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn estimate_value<'py>(
    py: Python<'py>,
    params: PyModelParams,
    policy: PyPolicy,
    tier: &str,
    h: usize,
    n: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let s0 = State::new(parse_tier(tier)?, h);
    let est = py
        .detach(|| sim::estimate_value(&params.inner, &policy.inner, s0, n, seed))
        .map_err(value_err)?;
    to_py(py, &est)
}

#[pyfunction]
#[pyo3(signature = (params, h0, n, seed = 0))]
fn estimate_hitting_mgf<'py>(
    py: Python<'py>,
    params: PyModelParams,
    h0: usize,
    n: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let est = py
        .detach(|| sim::estimate_hitting_mgf(&params.inner, h0, n, seed))
        .map_err(value_err)?;
    to_py(py, &est)
}

fn parse_sweep_param(free: &str) -> PyResult<SweepParam> {
    serde_json::from_value(serde_json::Value::String(free.to_string()))
        .map_err(|_| PyValueError::new_err(format!("unknown sweep parameter {free:?}")))
}

/// Sweep one parameter over `grid`; returns the outcome as a dict.
#[pyfunction]
#[pyo3(signature = (params, free, grid, annotate_boundary = false))]
fn run_sweep<'py>(
    py: Python<'py>,
    params: PyModelParams,
    free: &str,
    grid: Vec<f64>,
    annotate_boundary: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let spec = SweepSpec {
        base: params.inner,
        free: parse_sweep_param(free)?,
        grid,
        annotate_boundary,
    };
    let out = py.detach(|| bench::run_sweep(&spec)).map_err(value_err)?;
    to_py(py, &out)
}

#[pyfunction]
fn linear_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    bench::linear_grid(start, stop, step)
}

/// `[(h, v_numeric, v_asymptotic), ...]` for `h = 0..H`.
#[pyfunction]
fn value_comparison(params: PyModelParams) -> PyResult<Vec<(usize, f64, f64)>> {
    let rows = bench::value_comparison(&params.inner).map_err(value_err)?;
    Ok(rows.iter().map(|r| (r.h, r.v_numeric, r.v_asymptotic)).collect())
}

#[pyo3::pymodule]
fn rpm_monitor(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelParams>()?;
    m.add_class::<PyPolicy>()?;
    m.add_class::<PySolveResult>()?;
    m.add("GENERATOR_ID", sim::GENERATOR_ID)?;
    m.add("POLICY_CLASSES", {
        let names: Vec<&str> = [
            PolicyClass::AlwaysOrdinary,
            PolicyClass::AlwaysIntensive,
            PolicyClass::Threshold { h_bar: 1 },
            PolicyClass::TwoThreshold { lower: 1, upper: 2 },
            PolicyClass::Other,
        ]
        .iter()
        .map(|c| c.name())
        .collect();
        names
    })?;
    m.add_function(wrap_pyfunction!(simplified_preset, m)?)?;
    m.add_function(wrap_pyfunction!(value_iteration, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(bruteforce_optimal, m)?)?;
    m.add_function(wrap_pyfunction!(policy_evaluation, m)?)?;
    m.add_function(wrap_pyfunction!(q_values, m)?)?;
    m.add_function(wrap_pyfunction!(greedy_policy, m)?)?;
    m.add_function(wrap_pyfunction!(make_constant, m)?)?;
    m.add_function(wrap_pyfunction!(make_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(make_two_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(phi, m)?)?;
    m.add_function(wrap_pyfunction!(v_o_asymptotic, m)?)?;
    m.add_function(wrap_pyfunction!(h_prime, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(boundary, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_value, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_hitting_mgf, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(linear_grid, m)?)?;
    m.add_function(wrap_pyfunction!(value_comparison, m)?)?;
    Ok(())
}
