//! Online one-step-ahead evaluation of selection criteria on a single series.
//!
//! At every step `n > n0` each criterion selects and fits a model from past
//! observations only (all of `x_1 .. x_{n-1}` in expanding mode, the last
//! `window` of them in sliding mode), predicts `x_n` and records the squared
//! error. Parameters follow the default rule on the available training
//! length. Time indices are 1-based to match the usual notation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::criteria::{auto_params, select, Criterion};
use crate::error::{domain, Error, Result};
use crate::fit::{fit_orders_until_singular, predict_one_step, sample_moments};
use crate::process::Filter;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowMode {
    Expanding,
    Sliding,
}

impl FromStr for WindowMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "expanding" => Ok(WindowMode::Expanding),
            "sliding" => Ok(WindowMode::Sliding),
            other => Err(domain(format!("unknown window mode '{other}'"))),
        }
    }
}

impl fmt::Display for WindowMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WindowMode::Expanding => "expanding",
            WindowMode::Sliding => "sliding",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrequentialConfig {
    /// Initial training size; the first prediction is for `x_{n0+1}`.
    pub n0: usize,
    pub mode: WindowMode,
    /// Sliding training width; defaults to `n0`.
    pub window: Option<usize>,
    /// Width of the windowed error average.
    pub avg_window: usize,
    pub criteria: Vec<Criterion>,
}

impl PrequentialConfig {
    pub fn new(n0: usize, mode: WindowMode) -> Self {
        Self {
            n0,
            mode,
            window: None,
            avg_window: 100,
            criteria: vec![Criterion::Bc, Criterion::Aic, Criterion::Bic],
        }
    }

    fn training_width(&self) -> usize {
        self.window.unwrap_or(self.n0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrequentialEntry {
    pub criterion: Criterion,
    pub order: usize,
    pub prediction: f64,
    /// Squared one-step error.
    pub err: f64,
    pub cum_avg: f64,
    pub win_avg: f64,
    pub cum_avg_norm: Option<f64>,
    pub win_avg_norm: Option<f64>,
    /// The fit at this step was degenerate; the model may be inherited.
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrequentialStep {
    /// 1-based index of the predicted observation.
    pub n: usize,
    pub train_len: usize,
    pub l_max: usize,
    /// One entry per configured criterion, in config order.
    pub entries: Vec<PrequentialEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrequentialSeries {
    pub config: PrequentialConfig,
    pub steps: Vec<PrequentialStep>,
}

pub const PREQUENTIAL_CSV_HEADER: &str = "n,criterion,order,err,cum_avg,win_avg,cum_avg_norm,win_avg_norm";

impl PrequentialSeries {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(PREQUENTIAL_CSV_HEADER);
        out.push('\n');
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for step in &self.steps {
            for e in &step.entries {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    step.n,
                    e.criterion,
                    e.order,
                    e.err,
                    e.cum_avg,
                    e.win_avg,
                    opt(e.cum_avg_norm),
                    opt(e.win_avg_norm)
                ));
            }
        }
        out
    }

    /// Squared errors of one criterion, in time order.
    pub fn errors(&self, c: Criterion) -> Vec<f64> {
        self.steps.iter().filter_map(|s| s.entries.iter().find(|e| e.criterion == c)).map(|e| e.err).collect()
    }

    pub fn entry(&self, n: usize, c: Criterion) -> Option<&PrequentialEntry> {
        self.steps.iter().find(|s| s.n == n)?.entries.iter().find(|e| e.criterion == c)
    }
}

struct StepFit {
    l_max: usize,
    models: Option<Vec<(usize, Filter)>>,
    degenerate: bool,
}

fn fit_step(train: &[f64], criteria: &[Criterion]) -> Result<StepFit> {
    let (params, _) = auto_params(train.len())?;
    let moments = sample_moments(train, params.l_max)?;
    let table = match fit_orders_until_singular(&moments) {
        Ok((t, _)) if t.l_max >= 1 => t,
        Ok(_) | Err(Error::SingularFit { .. }) => {
            return Ok(StepFit { l_max: params.l_max, models: None, degenerate: true });
        }
        Err(e) => return Err(e),
    };
    let sel = select(&table, moments.n, criteria, &params)?;
    let models = criteria
        .iter()
        .map(|c| {
            let l = sel.chosen[c];
            (l, table.filter(l).clone())
        })
        .collect();
    Ok(StepFit { l_max: params.l_max, models: Some(models), degenerate: table.degenerate })
}

/// Runs the online protocol. Aggregates: `cum_avg` averages errors of steps
/// `n0+1 ..= n`; `win_avg` those of steps `s+1 ..= n` with
/// `s = max(n0, n - avg_window)`. Normalized columns are left empty, see
/// [`normalize_against_best`].
///
/// A step whose fit is degenerate is flagged; if no model can be fitted at all
/// it reuses the previous step's models (white noise before the first).
pub fn run_prequential(data: &[f64], config: &PrequentialConfig) -> Result<PrequentialSeries> {
    let n_total = data.len();
    if config.n0 == 0 || n_total <= config.n0 + 1 {
        return Err(Error::InsufficientData { needed: config.n0 + 1, got: n_total });
    }
    if config.avg_window == 0 {
        return Err(domain("avg_window must be at least 1"));
    }
    if config.criteria.is_empty() {
        return Err(domain("criterion list is empty"));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(domain("data contain non-finite values"));
    }
    let width = config.training_width();
    if config.mode == WindowMode::Sliding && (width == 0 || width > config.n0) {
        return Err(domain(format!("sliding window {width} must lie in 1..={}", config.n0)));
    }
    let k = config.criteria.len();
    let mut previous: Vec<(usize, Filter)> = vec![(0, Filter::white_noise(1.0)?); k];
    let mut errs: Vec<Vec<f64>> = vec![Vec::new(); k];
    let mut steps = Vec::with_capacity(n_total - config.n0);
    for n in config.n0 + 1..=n_total {
        let past = &data[..n - 1];
        let train = match config.mode {
            WindowMode::Expanding => past,
            WindowMode::Sliding => &past[past.len() - width..],
        };
        let fit = fit_step(train, &config.criteria)?;
        if let Some(models) = fit.models {
            previous = models;
        }
        let x = data[n - 1];
        let mut entries = Vec::with_capacity(k);
        for (i, &c) in config.criteria.iter().enumerate() {
            let (order, filter) = &previous[i];
            let prediction = predict_one_step(filter, past)?;
            let err = (x - prediction) * (x - prediction);
            errs[i].push(err);
            let all = &errs[i];
            let cum_avg = all.iter().sum::<f64>() / all.len() as f64;
            let s = config.n0.max(n.saturating_sub(config.avg_window));
            let recent = &all[s - config.n0..];
            let win_avg = recent.iter().sum::<f64>() / recent.len() as f64;
            entries.push(PrequentialEntry {
                criterion: c,
                order: *order,
                prediction,
                err,
                cum_avg,
                win_avg,
                cum_avg_norm: None,
                win_avg_norm: None,
                degenerate: fit.degenerate,
            });
        }
        steps.push(PrequentialStep { n, train_len: train.len(), l_max: fit.l_max, entries });
    }
    Ok(PrequentialSeries { config: config.clone(), steps })
}

/// Subtracts, for each step and each aggregate kind, the smaller of the AIC
/// and BIC aggregates from every criterion's aggregate.
pub fn normalize_against_best(series: &PrequentialSeries) -> Result<PrequentialSeries> {
    let mut out = series.clone();
    for step in &mut out.steps {
        let find = |c: Criterion| step.entries.iter().find(|e| e.criterion == c).map(|e| (e.cum_avg, e.win_avg));
        let (Some(aic), Some(bic)) = (find(Criterion::Aic), find(Criterion::Bic)) else {
            return Err(Error::Contract("normalization needs both AIC and BIC curves".into()));
        };
        let best_cum = aic.0.min(bic.0);
        let best_win = aic.1.min(bic.1);
        for e in &mut step.entries {
            e.cum_avg_norm = Some(e.cum_avg - best_cum);
            e.win_avg_norm = Some(e.win_avg - best_win);
        }
    }
    Ok(out)
}

/// Subtracts the sample mean.
pub fn demean(data: &[f64]) -> Vec<f64> {
    if data.is_empty() {
        return Vec::new();
    }
    let mean = data.iter().sum::<f64>() / data.len() as f64;
    data.iter().map(|x| x - mean).collect()
}

/// Subtracts from every value the mean of all values at the same phase
/// (`index mod period`), e.g. each calendar month's average for monthly data.
pub fn deseason(data: &[f64], period: usize) -> Result<Vec<f64>> {
    if period == 0 {
        return Err(domain("period must be at least 1"));
    }
    if data.len() < period {
        return Err(Error::InsufficientData { needed: period - 1, got: data.len() });
    }
    let mut sums = vec![0.0; period];
    let mut counts = vec![0usize; period];
    for (i, x) in data.iter().enumerate() {
        sums[i % period] += x;
        counts[i % period] += 1;
    }
    Ok(data.iter().enumerate().map(|(i, x)| x - sums[i % period] / counts[i % period] as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;
    use crate::process::simulate_ar;

    fn ar1_data(len: usize, seed: u64) -> Vec<f64> {
        let f = Filter::new(vec![0.9], 1.0).unwrap();
        simulate_ar(&f, len, 1000, &mut RngStream::new(seed, 0)).unwrap()
    }

    #[test]
    fn ar1_expanding_error_near_noise_variance() {
        let data = ar1_data(2000, 3);
        let s = run_prequential(&data, &PrequentialConfig::new(200, WindowMode::Expanding)).unwrap();
        assert_eq!(s.steps.len(), 1800);
        let last = s.steps.last().unwrap();
        for e in &last.entries {
            assert!((e.cum_avg - 1.0).abs() < 0.1, "{}: {}", e.criterion, e.cum_avg);
        }
        assert_eq!(last.train_len, 1999);
    }

    #[test]
    fn sliding_training_size_is_fixed() {
        let data = ar1_data(400, 4);
        let s = run_prequential(&data, &PrequentialConfig::new(200, WindowMode::Sliding)).unwrap();
        assert!(s.steps.iter().all(|st| st.train_len == 200 && st.l_max == 5));
    }

    #[test]
    fn constant_series_is_flagged() {
        let data = vec![2.5; 60];
        let s = run_prequential(&data, &PrequentialConfig::new(30, WindowMode::Expanding)).unwrap();
        for step in &s.steps {
            for e in &step.entries {
                assert!(e.degenerate);
                assert!((e.prediction - 2.5).abs() < 1e-12);
                assert!(e.err < 1e-24);
            }
        }
        let zeros = run_prequential(&[0.0; 40], &PrequentialConfig::new(20, WindowMode::Expanding)).unwrap();
        assert!(zeros.steps.iter().all(|st| st.entries.iter().all(|e| e.degenerate && e.order == 0 && e.err == 0.0)));
    }

    #[test]
    fn aggregation_identity() {
        let data = ar1_data(400, 5);
        let mut cfg = PrequentialConfig::new(200, WindowMode::Expanding);
        cfg.avg_window = 1000;
        let s = run_prequential(&data, &cfg).unwrap();
        for step in &s.steps {
            for e in &step.entries {
                assert_eq!(e.cum_avg, e.win_avg);
            }
        }
    }

    #[test]
    fn windowed_average_uses_recent_errors() {
        let data = ar1_data(500, 6);
        let mut cfg = PrequentialConfig::new(200, WindowMode::Expanding);
        cfg.avg_window = 50;
        let s = run_prequential(&data, &cfg).unwrap();
        let errs = s.errors(Criterion::Bc);
        let e = s.entry(400, Criterion::Bc).unwrap();
        // steps 351..=400 are errors[150..200]
        let expected = errs[150..200].iter().sum::<f64>() / 50.0;
        assert_eq!(e.win_avg, expected);
        let cum = errs[..200].iter().sum::<f64>() / 200.0;
        assert_eq!(e.cum_avg, cum);
    }

    #[test]
    fn prefix_stability_and_no_lookahead() {
        let data = ar1_data(600, 7);
        let cfg = PrequentialConfig::new(300, WindowMode::Expanding);
        let full = run_prequential(&data, &cfg).unwrap();
        let prefix = run_prequential(&data[..450], &cfg).unwrap();
        assert_eq!(&full.steps[..prefix.steps.len()], &prefix.steps[..]);

        let n = 420;
        let mut corrupted = data.clone();
        for x in &mut corrupted[n - 1..] {
            *x = 1e3;
        }
        let c = run_prequential(&corrupted, &cfg).unwrap();
        let (a, b) = (&full.steps[n - 301], &c.steps[n - 301]);
        assert_eq!(a.n, n);
        for (x, y) in a.entries.iter().zip(&b.entries) {
            assert_eq!((x.order, x.prediction), (y.order, y.prediction));
        }
    }

    #[test]
    fn normalization() {
        let data = ar1_data(500, 8);
        let mut cfg = PrequentialConfig::new(200, WindowMode::Expanding);
        cfg.criteria = vec![Criterion::Bc, Criterion::Aic, Criterion::Bic, Criterion::Hq];
        let s = normalize_against_best(&run_prequential(&data, &cfg).unwrap()).unwrap();
        for step in &s.steps {
            let get = |c: Criterion| step.entries.iter().find(|e| e.criterion == c).unwrap();
            let (a, b) = (get(Criterion::Aic), get(Criterion::Bic));
            assert_eq!(a.cum_avg_norm.unwrap().min(b.cum_avg_norm.unwrap()), 0.0);
            assert_eq!(a.win_avg_norm.unwrap().min(b.win_avg_norm.unwrap()), 0.0);
            assert!(a.cum_avg_norm.unwrap() >= 0.0 && b.cum_avg_norm.unwrap() >= 0.0);
        }
        let csv = s.to_csv();
        assert!(csv.starts_with(PREQUENTIAL_CSV_HEADER));
        assert_eq!(csv.lines().count(), 1 + 300 * 4);

        cfg.criteria = vec![Criterion::Bc, Criterion::Aic];
        let partial = run_prequential(&data, &cfg).unwrap();
        assert!(matches!(normalize_against_best(&partial), Err(Error::Contract(_))));
    }

    #[test]
    fn bad_configs() {
        let data = ar1_data(100, 9);
        assert!(run_prequential(&data, &PrequentialConfig::new(100, WindowMode::Expanding)).is_err());
        assert!(run_prequential(&data, &PrequentialConfig::new(99, WindowMode::Expanding)).is_err());
        let mut cfg = PrequentialConfig::new(50, WindowMode::Expanding);
        cfg.avg_window = 0;
        assert!(run_prequential(&data, &cfg).is_err());
    }

    #[test]
    fn preprocessing() {
        let d = demean(&[1.0, 2.0, 3.0]);
        assert_eq!(d, vec![-1.0, 0.0, 1.0]);
        let s = deseason(&[1.0, 10.0, 3.0, 12.0, 5.0], 2).unwrap();
        assert_eq!(s, vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
        assert!(deseason(&[1.0], 2).is_err());
        assert!(deseason(&[1.0], 0).is_err());
    }
}
