//! Python bindings for `ar-bridge`.
//!
//! Library errors surface as `ar_bridge.ArBridgeError` (a `ValueError`
//! subclass) whose `args` are `(message, code)`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use ar_bridge::criteria::{self, Criterion, CriterionParams};
use ar_bridge::experiments::{self, ExperimentConfig};
use ar_bridge::fit::{fit_all_orders, sample_moments};
use ar_bridge::numerics::RngStream;
use ar_bridge::prequential::{self, normalize_against_best, PrequentialConfig, WindowMode};
use ar_bridge::process::{self, GrowthRule};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

create_exception!(ar_bridge, ArBridgeError, PyValueError);

fn to_py(e: ar_bridge::Error) -> PyErr {
    ArBridgeError::new_err((e.to_string(), e.code()))
}

trait IntoPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for ar_bridge::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

fn parse_list(criteria: &str) -> PyResult<Vec<Criterion>> {
    criteria::parse_criteria(criteria).py_err()
}

/// Autoregressive filter `x_n + sum psi_l x_{n-l} = e_n`.
#[pyclass(name = "Filter", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyFilter {
    inner: process::Filter,
}

#[pymethods]
impl PyFilter {
    #[new]
    #[pyo3(signature = (coeffs, noise_variance = 1.0))]
    fn new(coeffs: Vec<f64>, noise_variance: f64) -> PyResult<Self> {
        Ok(Self { inner: process::Filter::new(coeffs, noise_variance).py_err()? })
    }

    /// Builds a filter from coefficients of `x_n = sum phi_l x_{n-l} + e_n`.
    #[staticmethod]
    #[pyo3(signature = (phi, noise_variance = 1.0))]
    fn from_conventional(phi: Vec<f64>, noise_variance: f64) -> PyResult<Self> {
        Ok(Self { inner: process::Filter::from_conventional(&phi, noise_variance).py_err()? })
    }

    #[getter]
    fn order(&self) -> usize {
        self.inner.order()
    }

    #[getter]
    fn coeffs(&self) -> Vec<f64> {
        self.inner.coeffs().to_vec()
    }

    #[getter]
    fn conventional_coeffs(&self) -> Vec<f64> {
        self.inner.conventional_coeffs()
    }

    #[getter]
    fn noise_variance(&self) -> f64 {
        self.inner.noise_variance()
    }

    fn is_stable(&self) -> bool {
        process::is_stable(&self.inner)
    }

    fn predict(&self, history: Vec<f64>) -> PyResult<f64> {
        ar_bridge::fit::predict_one_step(&self.inner, &history).py_err()
    }

    fn __repr__(&self) -> String {
        format!("Filter(coeffs={:?}, noise_variance={})", self.inner.coeffs(), self.inner.noise_variance())
    }
}

/// A true process: finite AR, growing-order AR, or MA(1).
#[pyclass(name = "ProcessSpec", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyProcessSpec {
    inner: process::ProcessSpec,
}

#[pymethods]
impl PyProcessSpec {
    #[staticmethod]
    #[pyo3(signature = (coeffs, noise_variance = 1.0))]
    fn finite_ar(coeffs: Vec<f64>, noise_variance: f64) -> PyResult<Self> {
        Ok(Self { inner: process::ProcessSpec::finite_ar(coeffs, noise_variance).py_err()? })
    }

    /// AR truth of order `floor(N^order_exponent)` with coefficients `decay^k`.
    #[staticmethod]
    #[pyo3(signature = (decay = GrowthRule::STANDARD.decay, order_exponent = GrowthRule::STANDARD.order_exponent, noise_variance = 1.0))]
    fn growing_ar(decay: f64, order_exponent: f64, noise_variance: f64) -> PyResult<Self> {
        let rule = GrowthRule { decay, order_exponent };
        Ok(Self { inner: process::ProcessSpec::growing_ar(rule, noise_variance).py_err()? })
    }

    #[staticmethod]
    #[pyo3(signature = (theta, noise_variance = 1.0))]
    fn ma1(theta: f64, noise_variance: f64) -> PyResult<Self> {
        Ok(Self { inner: process::ProcessSpec::ma1(theta, noise_variance).py_err()? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text)
            .map(|inner| Self { inner })
            .map_err(|e| to_py(ar_bridge::Error::Config(e.to_string())))
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("process specs serialize")
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind()
    }

    /// `n` observations from stream 0 of `seed`; growing truths are resolved at `n`.
    #[pyo3(signature = (n, seed, burnin = None))]
    fn simulate(&self, n: usize, seed: u64, burnin: Option<usize>) -> PyResult<Vec<f64>> {
        let mut rng = RngStream::new(seed, 0);
        self.inner.simulate(n, burnin, &mut rng).py_err()
    }

    /// Exact autocovariances `gamma_0 ..= gamma_max_lag`.
    #[pyo3(signature = (max_lag, n = None))]
    fn autocovariances(&self, max_lag: usize, n: Option<usize>) -> PyResult<Vec<f64>> {
        Ok(self.inner.autocovariances(max_lag, n).py_err()?.values)
    }

    /// Excess one-step error of a candidate filter over the optimal predictor.
    #[pyo3(signature = (candidate, n = None))]
    fn mismatch_error(&self, candidate: Vec<f64>, n: Option<usize>) -> PyResult<f64> {
        process::mismatch_error(&candidate, &self.inner, n).py_err()
    }

    /// Order minimizing the expected excess error plus `L / N` variance term.
    #[pyo3(signature = (n, cap = None))]
    fn optimal_order(&self, n: usize, cap: Option<usize>) -> PyResult<usize> {
        process::universally_optimal_order(n, &self.inner, cap).py_err()
    }

    fn __repr__(&self) -> String {
        format!("ProcessSpec({})", self.to_json())
    }
}

#[pyclass(name = "SelectionResult", frozen, skip_from_py_object)]
pub struct PySelectionResult {
    inner: criteria::SelectionResult,
    models: BTreeMap<String, process::Filter>,
}

#[pymethods]
impl PySelectionResult {
    /// Effective sample size.
    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn l_max(&self) -> usize {
        self.inner.params.l_max
    }

    #[getter]
    fn m_n(&self) -> f64 {
        self.inner.params.m_n
    }

    #[getter]
    fn chosen(&self) -> BTreeMap<&'static str, usize> {
        self.inner.chosen.iter().map(|(c, &l)| (c.id(), l)).collect()
    }

    #[getter]
    fn scores(&self) -> BTreeMap<&'static str, Vec<f64>> {
        self.inner.scores.iter().map(|(c, s)| (c.id(), s.clone())).collect()
    }

    #[getter]
    fn pi(&self) -> f64 {
        self.inner.pi
    }

    #[getter]
    fn degenerate(&self) -> bool {
        self.inner.degenerate
    }

    /// Fitted filter chosen by `criterion`.
    fn model(&self, criterion: &str) -> PyResult<PyFilter> {
        self.models
            .get(criterion)
            .map(|f| PyFilter { inner: f.clone() })
            .ok_or_else(|| to_py(ar_bridge::Error::Domain(format!("criterion '{criterion}' was not scored"))))
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("selection results serialize")
    }

    fn __repr__(&self) -> String {
        format!("SelectionResult(chosen={:?}, pi={})", self.chosen(), self.inner.pi)
    }
}

/// Fits orders `1 ..= l_max` and applies each criterion.
///
/// `l_max=None` uses the largest `L <= floor((n0 - L)^(1/3))`; `m_n=None`
/// uses `(ln N)^0.9` at the effective size `N = n0 - l_max`.
#[pyfunction]
#[pyo3(signature = (data, criteria = "bc,aic,bic,hq", l_max = None, m_n = None, zeta = criteria::DEFAULT_ZETA, hq_c = criteria::DEFAULT_HQ_C))]
fn select_order(
    data: Vec<f64>,
    criteria: &str,
    l_max: Option<usize>,
    m_n: Option<f64>,
    zeta: f64,
    hq_c: f64,
) -> PyResult<PySelectionResult> {
    let list = parse_list(criteria)?;
    let l_max = match l_max {
        Some(l) => l,
        None => criteria::auto_params(data.len()).py_err()?.0.l_max,
    };
    let moments = sample_moments(&data, l_max).py_err()?;
    let params = CriterionParams::new(l_max, m_n.unwrap_or_else(|| criteria::default_m_n(moments.n)), hq_c, zeta).py_err()?;
    let table = fit_all_orders(&moments).py_err()?;
    let inner = criteria::select(&table, moments.n, &list, &params).py_err()?;
    let models = inner.chosen.iter().map(|(c, &l)| (c.id().to_string(), table.filter(l).clone())).collect();
    Ok(PySelectionResult { inner, models })
}

/// Fitted residual variances `e_hat_0 ..= e_hat_l_max`.
#[pyfunction]
fn fit_errors(data: Vec<f64>, l_max: usize) -> PyResult<Vec<f64>> {
    let table = fit_all_orders(&sample_moments(&data, l_max).py_err()?).py_err()?;
    Ok((0..=l_max).map(|l| table.e_hat(l)).collect())
}

/// `(l_max, m_n)` defaults at effective sample size `n`.
#[pyfunction]
fn default_params(n: usize) -> PyResult<(usize, f64)> {
    let p = criteria::default_params(n).py_err()?;
    Ok((p.l_max, p.m_n))
}

#[pyfunction]
fn parametricness_index(l_bc: usize, l_aic: usize, l_bic: usize) -> f64 {
    criteria::parametricness_index(l_bc, l_aic, l_bic)
}

#[pyfunction]
fn bic_significance_level(n: usize) -> PyResult<f64> {
    criteria::bic_significance_level(n).py_err()
}

#[pyfunction]
fn underfit_threshold(order: usize, p: f64) -> PyResult<f64> {
    criteria::underfit_threshold(order, p).py_err()
}

#[pyfunction]
fn underfit_threshold_approx(order: usize, p: f64) -> PyResult<f64> {
    criteria::underfit_threshold_approx(order, p).py_err()
}

#[pyfunction]
fn bc_calibration_level(n: usize, l_max: usize) -> PyResult<f64> {
    criteria::bc_calibration_level(n, l_max).py_err()
}

/// Penalty curves as CSV (`L,J_BC,J_AIC,J_BIC,J_HQ`).
#[pyfunction]
#[pyo3(signature = (n, l_max, c = criteria::DEFAULT_HQ_C, shifted = false))]
fn penalty_curves_csv(n: usize, l_max: usize, c: f64, shifted: bool) -> PyResult<String> {
    Ok(criteria::penalty_curves(n, l_max, c).py_err()?.to_csv(shifted))
}

#[pyclass(name = "ExperimentReport", frozen, skip_from_py_object)]
pub struct PyExperimentReport {
    inner: experiments::ExperimentReport,
}

#[pymethods]
impl PyExperimentReport {
    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn master_seed(&self) -> u64 {
        self.inner.master_seed
    }

    #[getter]
    fn wall_time_secs(&self) -> f64 {
        self.inner.wall_time_secs
    }

    /// Share of replications at size `n` where `criterion` chose `order`.
    fn proportion(&self, n: usize, criterion: &str, order: usize) -> PyResult<Option<f64>> {
        let c: Criterion = criterion.parse().py_err()?;
        Ok(self.inner.order_cell(n, c).map(|cell| cell.proportion(order)))
    }

    /// Mean mismatch and its standard error at size `n`.
    fn mismatch(&self, n: usize, criterion: &str) -> PyResult<Option<(f64, Option<f64>)>> {
        let c: Criterion = criterion.parse().py_err()?;
        Ok(self.inner.mismatch_cell(n, c).and_then(|cell| cell.mismatch.as_ref().map(|m| (m.mean, m.se))))
    }
}

/// Runs a study from a TOML string, or from a file when `path=True`
/// (`.json` files are read as JSON).
#[pyfunction]
#[pyo3(signature = (config, threads = None, path = false))]
fn run_study(py: Python<'_>, config: &str, threads: Option<usize>, path: bool) -> PyResult<PyExperimentReport> {
    let cfg = if path {
        ExperimentConfig::from_path(&PathBuf::from(config))
    } else {
        ExperimentConfig::from_toml_str(config)
    }
    .py_err()?;
    let inner = py.detach(|| experiments::run_study(&cfg, threads)).py_err()?;
    Ok(PyExperimentReport { inner })
}

#[pyclass(name = "PrequentialSeries", frozen, skip_from_py_object)]
pub struct PyPrequentialSeries {
    inner: prequential::PrequentialSeries,
}

#[pymethods]
impl PyPrequentialSeries {
    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    /// Squared one-step errors of `criterion`, in time order.
    fn errors(&self, criterion: &str) -> PyResult<Vec<f64>> {
        Ok(self.inner.errors(criterion.parse().py_err()?))
    }

    /// Orders chosen by `criterion` at each step.
    fn orders(&self, criterion: &str) -> PyResult<Vec<usize>> {
        let c: Criterion = criterion.parse().py_err()?;
        Ok(self.inner.steps.iter().filter_map(|s| s.entries.iter().find(|e| e.criterion == c)).map(|e| e.order).collect())
    }

    fn __len__(&self) -> usize {
        self.inner.steps.len()
    }
}

/// One-step-ahead evaluation from `n0` onward. Averages are normalized
/// against the better of AIC and BIC when both are listed.
#[pyfunction]
#[pyo3(signature = (data, n0, mode = "expanding", window = None, avg_window = 100, criteria = "bc,aic,bic"))]
fn run_prequential(
    data: Vec<f64>,
    n0: usize,
    mode: &str,
    window: Option<usize>,
    avg_window: usize,
    criteria: &str,
) -> PyResult<PyPrequentialSeries> {
    let mode: WindowMode = mode.parse().py_err()?;
    let mut config = PrequentialConfig::new(n0, mode);
    config.window = window;
    config.avg_window = avg_window;
    config.criteria = parse_list(criteria)?;
    let mut inner = prequential::run_prequential(&data, &config).py_err()?;
    if config.criteria.contains(&Criterion::Aic) && config.criteria.contains(&Criterion::Bic) {
        inner = normalize_against_best(&inner).py_err()?;
    }
    Ok(PyPrequentialSeries { inner })
}

#[pyfunction]
fn demean(data: Vec<f64>) -> Vec<f64> {
    prequential::demean(&data)
}

#[pyfunction]
fn deseason(data: Vec<f64>, period: usize) -> PyResult<Vec<f64>> {
    prequential::deseason(&data, period).py_err()
}

#[pymodule(name = "ar_bridge")]
pub fn ar_bridge_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ArBridgeError", m.py().get_type::<ArBridgeError>())?;
    m.add_class::<PyFilter>()?;
    m.add_class::<PyProcessSpec>()?;
    m.add_class::<PySelectionResult>()?;
    m.add_class::<PyExperimentReport>()?;
    m.add_class::<PyPrequentialSeries>()?;
    m.add_function(wrap_pyfunction!(select_order, m)?)?;
    m.add_function(wrap_pyfunction!(fit_errors, m)?)?;
    m.add_function(wrap_pyfunction!(default_params, m)?)?;
    m.add_function(wrap_pyfunction!(parametricness_index, m)?)?;
    m.add_function(wrap_pyfunction!(bic_significance_level, m)?)?;
    m.add_function(wrap_pyfunction!(underfit_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(underfit_threshold_approx, m)?)?;
    m.add_function(wrap_pyfunction!(bc_calibration_level, m)?)?;
    m.add_function(wrap_pyfunction!(penalty_curves_csv, m)?)?;
    m.add_function(wrap_pyfunction!(run_study, m)?)?;
    m.add_function(wrap_pyfunction!(run_prequential, m)?)?;
    m.add_function(wrap_pyfunction!(demean, m)?)?;
    m.add_function(wrap_pyfunction!(deseason, m)?)?;
    Ok(())
}
