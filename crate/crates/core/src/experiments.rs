//! Config-driven Monte Carlo studies: order-selection histograms for
//! well-specified truths and mismatch errors (with the parametricness index)
//! for any truth the process oracle can resolve.
//!
//! Each replication draws from its own stream, fixed by
//! `(master_seed, size index, replication index)`, so results do not depend on
//! scheduling. Replications run in parallel; records are collected in
//! replication order and reduced sequentially, so reports are bit-identical for
//! any thread count.
//!
//! Sample sizes are effective sizes: a replication at size `N` simulates
//! `N + L_max` observations so that the moment window leaves exactly `N`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{default_params, select, Criterion, CriterionParams};
use crate::error::{Error, Result};
use crate::fit::{fit_all_orders, sample_moments};
use crate::numerics::RngStream;
use crate::process::{mismatch_error, ProcessSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    OrderSelection,
    Mismatch,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolicyDoc", into = "PolicyDoc")]
pub enum ParamsPolicy {
    /// `L_max = floor(N^(1/3))`, `M_N = (ln N)^0.9` at every sample size.
    Standard,
    Explicit(CriterionParams),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PolicyDoc {
    Named(String),
    Params(CriterionParams),
}

impl TryFrom<PolicyDoc> for ParamsPolicy {
    type Error = Error;

    fn try_from(doc: PolicyDoc) -> Result<Self> {
        match doc {
            PolicyDoc::Named(s) if s == "standard" => Ok(ParamsPolicy::Standard),
            PolicyDoc::Named(s) => Err(Error::Config(format!("unknown params_policy `{s}`"))),
            PolicyDoc::Params(p) => {
                p.validate()?;
                Ok(ParamsPolicy::Explicit(p))
            }
        }
    }
}

impl From<ParamsPolicy> for PolicyDoc {
    fn from(p: ParamsPolicy) -> Self {
        match p {
            ParamsPolicy::Standard => PolicyDoc::Named("standard".into()),
            ParamsPolicy::Explicit(p) => PolicyDoc::Params(p),
        }
    }
}

impl ParamsPolicy {
    pub fn params_for(&self, n: usize) -> Result<CriterionParams> {
        match self {
            ParamsPolicy::Standard => default_params(n),
            ParamsPolicy::Explicit(p) => Ok(*p),
        }
    }
}

/// A reporting bucket: a single order, or every order above a bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "BucketDoc", into = "String")]
pub enum OrderBucket {
    Exact(usize),
    Above(usize),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum BucketDoc {
    Order(usize),
    Label(String),
}

impl TryFrom<BucketDoc> for OrderBucket {
    type Error = Error;

    fn try_from(doc: BucketDoc) -> Result<Self> {
        match doc {
            BucketDoc::Order(k) => Ok(OrderBucket::Exact(k)),
            BucketDoc::Label(s) => s.parse(),
        }
    }
}

impl FromStr for OrderBucket {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Config(format!("invalid order bucket `{s}`"));
        match s.strip_prefix('>') {
            Some(rest) => rest.trim().parse().map(OrderBucket::Above).map_err(|_| bad()),
            None => s.parse().map(OrderBucket::Exact).map_err(|_| bad()),
        }
    }
}

impl fmt::Display for OrderBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OrderBucket::Exact(k) => write!(f, "{k}"),
            OrderBucket::Above(k) => write!(f, ">{k}"),
        }
    }
}

impl From<OrderBucket> for String {
    fn from(b: OrderBucket) -> String {
        b.to_string()
    }
}

impl OrderBucket {
    pub fn contains(&self, order: usize) -> bool {
        match *self {
            OrderBucket::Exact(k) => order == k,
            OrderBucket::Above(k) => order > k,
        }
    }
}

fn default_criteria() -> Vec<Criterion> {
    vec![Criterion::Bc, Criterion::Aic, Criterion::Bic]
}

fn default_buckets() -> Vec<OrderBucket> {
    vec![OrderBucket::Exact(1), OrderBucket::Exact(2), OrderBucket::Exact(3), OrderBucket::Above(3)]
}

fn default_policy() -> ParamsPolicy {
    ParamsPolicy::Standard
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub study: StudyKind,
    pub truth: ProcessSpec,
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    pub master_seed: u64,
    #[serde(default = "default_criteria")]
    pub criteria: Vec<Criterion>,
    #[serde(default = "default_policy")]
    pub params_policy: ParamsPolicy,
    #[serde(default = "default_buckets")]
    pub order_buckets: Vec<OrderBucket>,
    /// Burn-in override; the process default applies when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burnin: Option<usize>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.replications > u32::MAX as usize || self.sample_sizes.len() > u32::MAX as usize {
            return Err(Error::Config("too many replications or sample sizes for the stream layout".into()));
        }
        if self.sample_sizes.is_empty() {
            return Err(Error::Config("sample_sizes must not be empty".into()));
        }
        if self.criteria.is_empty() {
            return Err(Error::Config("criteria must not be empty".into()));
        }
        for &n in &self.sample_sizes {
            let p = self.params_policy.params_for(n).map_err(|e| Error::Config(format!("sample size {n}: {e}")))?;
            if n < 3 || n <= p.l_max {
                return Err(Error::Config(format!("sample size {n} is too small for L_max = {}", p.l_max)));
            }
        }
        if self.study == StudyKind::OrderSelection && !matches!(self.truth, ProcessSpec::FiniteAr(_)) {
            return Err(Error::Config("order-selection studies need a finite_ar truth".into()));
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a `.json` file as JSON and anything else as TOML.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }
}

/// Stream for replication `r_index` at sample-size index `n_index`:
/// stream id `(n_index << 32) | r_index`, injective for indices below `2^32`.
pub fn replication_stream(master_seed: u64, n_index: usize, r_index: usize) -> RngStream {
    debug_assert!(n_index <= u32::MAX as usize && r_index <= u32::MAX as usize);
    RngStream::new(master_seed, ((n_index as u64) << 32) | (r_index as u64 & 0xffff_ffff))
}

#[derive(Clone, Debug, PartialEq)]
struct Record {
    chosen: BTreeMap<Criterion, usize>,
    mismatch: BTreeMap<Criterion, f64>,
    pi: f64,
}

/// `Ok(None)` marks a degenerate replication (singular moments or floored errors).
fn run_replication(cfg: &ExperimentConfig, n_index: usize, r_index: usize, with_mismatch: bool) -> Result<Option<Record>> {
    let n = cfg.sample_sizes[n_index];
    let params = cfg.params_policy.params_for(n)?;
    let mut rng = replication_stream(cfg.master_seed, n_index, r_index);
    let data = cfg.truth.simulate_at(n + params.l_max, n, cfg.burnin, &mut rng)?;
    let moments = sample_moments(&data, params.l_max)?;
    let fit = match fit_all_orders(&moments) {
        Ok(f) if !f.degenerate => f,
        Ok(_) | Err(Error::SingularFit { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let sel = select(&fit, moments.n, &cfg.criteria, &params)?;
    let mut mismatch = BTreeMap::new();
    if with_mismatch {
        for (&c, &l) in &sel.chosen {
            mismatch.insert(c, mismatch_error(fit.filter(l).coeffs(), &cfg.truth, Some(n))?);
        }
    }
    Ok(Some(Record { chosen: sel.chosen, mismatch, pi: sel.pi }))
}

fn run_all(cfg: &ExperimentConfig, threads: Option<usize>, with_mismatch: bool) -> Result<Vec<Vec<Option<Record>>>> {
    cfg.validate()?;
    let work = || -> Result<Vec<Vec<Option<Record>>>> {
        (0..cfg.sample_sizes.len())
            .map(|ni| {
                (0..cfg.replications)
                    .into_par_iter()
                    .map(|r| run_replication(cfg, ni, r, with_mismatch))
                    .collect::<Result<Vec<_>>>()
            })
            .collect()
    };
    match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderSelectionCell {
    pub n: usize,
    pub criterion: Criterion,
    /// Counts per configured bucket, in config order.
    pub buckets: Vec<(OrderBucket, u64)>,
    /// Raw counts per selected order.
    pub histogram: BTreeMap<usize, u64>,
    pub valid: u64,
    pub excluded: u64,
}

impl OrderSelectionCell {
    /// Fraction of all replications (valid or not) that selected `order`.
    pub fn proportion(&self, order: usize) -> f64 {
        let total = self.valid + self.excluded;
        *self.histogram.get(&order).unwrap_or(&0) as f64 / total as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(count)`; absent with fewer than two values.
    pub se: Option<f64>,
}

impl MeanSe {
    /// Two-pass mean and standard error, reduced in the given order.
    pub fn from_values(values: &[f64]) -> Option<MeanSe> {
        if values.is_empty() {
            return None;
        }
        let k = values.len() as f64;
        let mean = values.iter().sum::<f64>() / k;
        let se = (values.len() > 1).then(|| {
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            (ss / (k - 1.0)).sqrt() / k.sqrt()
        });
        Some(MeanSe { mean, se })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MismatchCell {
    pub n: usize,
    pub criterion: Criterion,
    pub mismatch: Option<MeanSe>,
    pub mean_order: Option<f64>,
    pub valid: u64,
    pub excluded: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiCell {
    pub n: usize,
    pub pi: Option<MeanSe>,
    pub valid: u64,
    pub excluded: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReportBody {
    OrderSelection { cells: Vec<OrderSelectionCell> },
    Mismatch { cells: Vec<MismatchCell>, pi: Vec<PiCell> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub master_seed: u64,
    pub body: ReportBody,
    /// Wall time of the run; JSON only, never part of the CSV.
    pub wall_time_secs: f64,
}

pub const REPORT_CSV_HEADER: &str = "n,criterion,metric,value";

impl ExperimentReport {
    /// One row per (N, criterion, metric). Contains no timing information, so
    /// it is byte-identical across reruns with the same config.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_CSV_HEADER);
        out.push('\n');
        let mut row = |n: usize, c: &str, metric: &str, value: String| {
            out.push_str(&format!("{n},{c},{metric},{value}\n"));
        };
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        match &self.body {
            ReportBody::OrderSelection { cells } => {
                for cell in cells {
                    let c = cell.criterion.id();
                    for (b, count) in &cell.buckets {
                        row(cell.n, c, &format!("bucket_{b}"), count.to_string());
                    }
                    for (order, count) in &cell.histogram {
                        row(cell.n, c, &format!("order_{order}"), count.to_string());
                    }
                    row(cell.n, c, "valid", cell.valid.to_string());
                    row(cell.n, c, "excluded", cell.excluded.to_string());
                }
            }
            ReportBody::Mismatch { cells, pi } => {
                for cell in cells {
                    let c = cell.criterion.id();
                    row(cell.n, c, "mean_mismatch", opt(cell.mismatch.as_ref().map(|m| m.mean)));
                    row(cell.n, c, "se_mismatch", opt(cell.mismatch.as_ref().and_then(|m| m.se)));
                    row(cell.n, c, "mean_order", opt(cell.mean_order));
                    row(cell.n, c, "valid", cell.valid.to_string());
                    row(cell.n, c, "excluded", cell.excluded.to_string());
                }
                for cell in pi {
                    row(cell.n, "pi", "mean", opt(cell.pi.as_ref().map(|m| m.mean)));
                    row(cell.n, "pi", "se", opt(cell.pi.as_ref().and_then(|m| m.se)));
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn order_cell(&self, n: usize, c: Criterion) -> Option<&OrderSelectionCell> {
        match &self.body {
            ReportBody::OrderSelection { cells } => cells.iter().find(|x| x.n == n && x.criterion == c),
            _ => None,
        }
    }

    pub fn mismatch_cell(&self, n: usize, c: Criterion) -> Option<&MismatchCell> {
        match &self.body {
            ReportBody::Mismatch { cells, .. } => cells.iter().find(|x| x.n == n && x.criterion == c),
            _ => None,
        }
    }

    pub fn pi_cell(&self, n: usize) -> Option<&PiCell> {
        match &self.body {
            ReportBody::Mismatch { pi, .. } => pi.iter().find(|x| x.n == n),
            _ => None,
        }
    }
}

fn counts(records: &[Option<Record>]) -> (u64, u64) {
    let valid = records.iter().filter(|r| r.is_some()).count() as u64;
    (valid, records.len() as u64 - valid)
}

/// Histograms of selected orders for every (N, criterion) cell.
pub fn run_order_selection_study(config: &ExperimentConfig, threads: Option<usize>) -> Result<ExperimentReport> {
    if !matches!(config.truth, ProcessSpec::FiniteAr(_)) {
        return Err(Error::Config("order-selection studies need a finite_ar truth".into()));
    }
    let start = Instant::now();
    let all = run_all(config, threads, false)?;
    let mut cells = Vec::new();
    for (ni, records) in all.iter().enumerate() {
        let (valid, excluded) = counts(records);
        for &c in &config.criteria {
            let mut histogram = BTreeMap::new();
            for rec in records.iter().flatten() {
                *histogram.entry(rec.chosen[&c]).or_insert(0u64) += 1;
            }
            let buckets = config
                .order_buckets
                .iter()
                .map(|b| (*b, histogram.iter().filter(|(o, _)| b.contains(**o)).map(|(_, k)| k).sum()))
                .collect();
            cells.push(OrderSelectionCell { n: config.sample_sizes[ni], criterion: c, buckets, histogram, valid, excluded });
        }
    }
    Ok(ExperimentReport {
        config: config.clone(),
        master_seed: config.master_seed,
        body: ReportBody::OrderSelection { cells },
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// Mean mismatch error of each criterion's fitted filter, plus the mean
/// parametricness index, for every sample size.
pub fn run_mismatch_study(config: &ExperimentConfig, threads: Option<usize>) -> Result<ExperimentReport> {
    let start = Instant::now();
    let all = run_all(config, threads, true)?;
    let mut cells = Vec::new();
    let mut pi_cells = Vec::new();
    for (ni, records) in all.iter().enumerate() {
        let n = config.sample_sizes[ni];
        let (valid, excluded) = counts(records);
        for &c in &config.criteria {
            let values: Vec<f64> = records.iter().flatten().map(|r| r.mismatch[&c]).collect();
            let orders: Vec<f64> = records.iter().flatten().map(|r| r.chosen[&c] as f64).collect();
            cells.push(MismatchCell {
                n,
                criterion: c,
                mismatch: MeanSe::from_values(&values),
                mean_order: MeanSe::from_values(&orders).map(|m| m.mean),
                valid,
                excluded,
            });
        }
        let pis: Vec<f64> = records.iter().flatten().map(|r| r.pi).collect();
        pi_cells.push(PiCell { n, pi: MeanSe::from_values(&pis), valid, excluded });
    }
    Ok(ExperimentReport {
        config: config.clone(),
        master_seed: config.master_seed,
        body: ReportBody::Mismatch { cells, pi: pi_cells },
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// Runs whichever study the config names.
pub fn run_study(config: &ExperimentConfig, threads: Option<usize>) -> Result<ExperimentReport> {
    match config.study {
        StudyKind::OrderSelection => run_order_selection_study(config, threads),
        StudyKind::Mismatch => run_mismatch_study(config, threads),
    }
}
