//! Order-selection criteria, the parametricness index, significance and
//! underfitting diagnostics, and penalty-curve geometry.
//!
//! Every criterion scores `log e_hat_L + penalty(L)` over the candidates
//! `L = 1 ..= L_max` (order 0 is never selected). Score vectors are indexed from
//! zero, so `scores[i]` belongs to order `i + 1`. Logarithms are natural.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fit::OrderFitTable;
use crate::numerics::{beta_cdf, chi2_1_quantile, chi2_1_tail};
use crate::process::last_coefficient_beta_params;

pub const DEFAULT_HQ_C: f64 = 1.1;
pub const DEFAULT_ZETA: f64 = 1.0;
/// Exponent `tau` in the default `M_N = (ln N)^tau`.
pub const DEFAULT_MN_EXPONENT: f64 = 0.9;
/// Smallest sample size accepted by [`default_params`].
pub const MIN_DEFAULT_N: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Aic,
    Bic,
    Hq,
    /// Two-step bridge criterion (AIC screen, then the `M_N` penalty).
    Bc,
    /// Bridge criterion with the `L_max` harmonic penalty over all candidates.
    #[serde(rename = "bc_oneshot")]
    BcOneShot,
}

impl Criterion {
    pub const ALL: [Criterion; 5] = [Criterion::Bc, Criterion::Aic, Criterion::Bic, Criterion::Hq, Criterion::BcOneShot];

    pub fn id(self) -> &'static str {
        match self {
            Criterion::Aic => "aic",
            Criterion::Bic => "bic",
            Criterion::Hq => "hq",
            Criterion::Bc => "bc",
            Criterion::BcOneShot => "bc_oneshot",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "aic" => Ok(Criterion::Aic),
            "bic" => Ok(Criterion::Bic),
            "hq" => Ok(Criterion::Hq),
            "bc" => Ok(Criterion::Bc),
            "bc_oneshot" | "bc-oneshot" => Ok(Criterion::BcOneShot),
            other => Err(domain(format!("unknown criterion '{other}'"))),
        }
    }
}

/// Parses a comma-separated criterion list such as `bc,aic,bic`.
pub fn parse_criteria(list: &str) -> Result<Vec<Criterion>> {
    let out: Vec<Criterion> = list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect::<Result<_>>()?;
    if out.is_empty() {
        return Err(domain("criterion list is empty"));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionParams {
    pub l_max: usize,
    pub m_n: f64,
    #[serde(default = "default_hq_c")]
    pub hq_c: f64,
    #[serde(default = "default_zeta")]
    pub zeta: f64,
}

fn default_hq_c() -> f64 {
    DEFAULT_HQ_C
}

fn default_zeta() -> f64 {
    DEFAULT_ZETA
}

impl CriterionParams {
    pub fn new(l_max: usize, m_n: f64, hq_c: f64, zeta: f64) -> Result<Self> {
        let p = Self { l_max, m_n, hq_c, zeta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.l_max < 1 {
            return Err(domain("l_max must be at least 1"));
        }
        if !(self.m_n > 0.0) || !self.m_n.is_finite() {
            return Err(domain(format!("M_N must be positive, got {}", self.m_n)));
        }
        if !(self.hq_c > 1.0) || !self.hq_c.is_finite() {
            return Err(domain(format!("HQ constant must exceed 1, got {}", self.hq_c)));
        }
        if !(self.zeta > 0.0) || !self.zeta.is_finite() {
            return Err(domain(format!("zeta must be positive, got {}", self.zeta)));
        }
        Ok(())
    }
}

/// Largest integer `r` with `r^3 <= n`.
pub fn integer_cbrt(n: usize) -> usize {
    let mut r = (n as f64).cbrt().round() as usize;
    while r > 0 && r.pow(3) > n {
        r -= 1;
    }
    while (r + 1).pow(3) <= n {
        r += 1;
    }
    r
}

/// Default parameters for effective sample size `n`: `L_max = floor(n^(1/3))`,
/// `M_N = (ln n)^0.9`, `c = 1.1`, `zeta = 1`.
pub fn default_params(n: usize) -> Result<CriterionParams> {
    if n < MIN_DEFAULT_N {
        return Err(domain(format!("default parameters need N >= {MIN_DEFAULT_N}, got {n}")));
    }
    CriterionParams::new(integer_cbrt(n), default_m_n(n), DEFAULT_HQ_C, DEFAULT_ZETA)
}

pub fn default_m_n(n: usize) -> f64 {
    (n as f64).ln().powf(DEFAULT_MN_EXPONENT)
}

/// Default parameters for a raw series of length `n0`.
///
/// The moment window removes `L_max` observations, so `L_max` is the largest
/// `L` with `L <= floor((n0 - L)^(1/3))`; `M_N` uses the effective size
/// `n0 - L_max`, which is returned alongside.
pub fn auto_params(n0: usize) -> Result<(CriterionParams, usize)> {
    let mut l_max = 0;
    let mut l = 1;
    while l < n0 && l <= integer_cbrt(n0 - l) {
        l_max = l;
        l += 1;
    }
    if l_max == 0 || n0 - l_max < MIN_DEFAULT_N {
        return Err(Error::InsufficientData { needed: MIN_DEFAULT_N, got: n0 });
    }
    let n = n0 - l_max;
    Ok((CriterionParams::new(l_max, default_m_n(n), DEFAULT_HQ_C, DEFAULT_ZETA)?, n))
}

/// Index of the minimum as an order (1-based); exact ties go to the smaller order.
pub fn argmin_order(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if *s < scores[best] {
            best = i;
        }
    }
    best + 1
}

fn penalized(errors: &[f64], penalty: impl Fn(usize) -> f64) -> Vec<f64> {
    errors.iter().enumerate().map(|(i, e)| e.ln() + penalty(i + 1)).collect()
}

/// `sum_{k=1}^{L} k^(-zeta)`.
pub fn generalized_harmonic(l: usize, zeta: f64) -> f64 {
    if zeta == 1.0 {
        (1..=l).map(|k| 1.0 / k as f64).sum()
    } else {
        (1..=l).map(|k| (k as f64).powf(-zeta)).sum()
    }
}

// Score functions over raw error sequences `e_hat_1 ..= e_hat_Lmax`.

pub fn aic_scores(errors: &[f64], n: usize) -> Vec<f64> {
    let n = n as f64;
    penalized(errors, |l| 2.0 * l as f64 / n)
}

pub fn bic_scores(errors: &[f64], n: usize) -> Vec<f64> {
    let step = (n as f64).ln() / n as f64;
    penalized(errors, |l| l as f64 * step)
}

pub fn hq_scores(errors: &[f64], n: usize, c: f64) -> Result<Vec<f64>> {
    let step = hq_step(n, c)?;
    Ok(penalized(errors, |l| l as f64 * step))
}

/// Per-order HQ penalty `c ln ln N / N`.
pub fn hq_step(n: usize, c: f64) -> Result<f64> {
    if !(c > 1.0) {
        return Err(domain(format!("HQ constant must exceed 1, got {c}")));
    }
    let nf = n as f64;
    if nf <= std::f64::consts::E {
        return Err(domain(format!("HQ needs N > e, got {n}")));
    }
    Ok(c * nf.ln().ln() / nf)
}

/// One-shot BC penalty increment from order `k - 1` to `k`: `(2 L_max / N) / k`,
/// evaluated as one integer ratio so that `k = L_max` gives `2/N` bit-exactly.
pub fn bc_increment(k: usize, n: usize, l_max: usize) -> f64 {
    (2 * l_max) as f64 / (n * k) as f64
}

pub fn bc_scores(errors: &[f64], n: usize, l_max: usize) -> Vec<f64> {
    let scale = 2.0 * l_max as f64 / n as f64;
    let mut h = 0.0;
    errors
        .iter()
        .enumerate()
        .map(|(i, e)| {
            h += 1.0 / (i + 1) as f64;
            e.ln() + scale * h
        })
        .collect()
}

pub fn modified_bc_scores(errors: &[f64], n: usize, m_n: f64, zeta: f64) -> Vec<f64> {
    let scale = 2.0 * m_n / n as f64;
    let mut h = 0.0;
    errors
        .iter()
        .enumerate()
        .map(|(i, e)| {
            h += ((i + 1) as f64).powf(-zeta);
            e.ln() + scale * h
        })
        .collect()
}

// Table-level wrappers.

pub fn score_aic(fit: &OrderFitTable, n: usize) -> Vec<f64> {
    aic_scores(&fit.errors(), n)
}

pub fn score_bic(fit: &OrderFitTable, n: usize) -> Vec<f64> {
    bic_scores(&fit.errors(), n)
}

pub fn score_hq(fit: &OrderFitTable, n: usize, c: f64) -> Result<Vec<f64>> {
    hq_scores(&fit.errors(), n, c)
}

/// One-shot bridge criterion with penalty `(2 L_max / N) sum_{k<=L} 1/k`.
pub fn score_bc(fit: &OrderFitTable, n: usize, l_max: usize) -> Vec<f64> {
    bc_scores(&fit.errors(), n, l_max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoStepBc {
    pub chosen: usize,
    pub aic_chosen: usize,
    /// Modified-BC scores over all of `1 ..= L_max`; only `1 ..= aic_chosen` compete.
    pub scores: Vec<f64>,
}

pub fn two_step_bc_from_errors(errors: &[f64], n: usize, params: &CriterionParams) -> TwoStepBc {
    let aic_chosen = argmin_order(&aic_scores(errors, n));
    let scores = modified_bc_scores(errors, n, params.m_n, params.zeta);
    let chosen = argmin_order(&scores[..aic_chosen]);
    TwoStepBc { chosen, aic_chosen, scores }
}

/// AIC over `1 ..= L_max`, then `log e_hat_L + (2 M_N / N) sum_{k<=L} k^(-zeta)`
/// minimized over `1 ..= L_hat_AIC`.
pub fn two_step_bc(fit: &OrderFitTable, n: usize, params: &CriterionParams) -> TwoStepBc {
    two_step_bc_from_errors(&fit.errors(), n, params)
}

/// `|l_bc - l_aic| / (|l_bc - l_aic| + |l_bc - l_bic|)`, or 1 when `l_aic == l_bic`.
pub fn parametricness_index(l_bc: usize, l_aic: usize, l_bic: usize) -> f64 {
    if l_aic == l_bic {
        return 1.0;
    }
    let to_aic = l_bc.abs_diff(l_aic) as f64;
    let to_bic = l_bc.abs_diff(l_bic) as f64;
    to_aic / (to_aic + to_bic)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub n: usize,
    pub params: CriterionParams,
    pub scores: BTreeMap<Criterion, Vec<f64>>,
    pub chosen: BTreeMap<Criterion, usize>,
    /// Parametricness index from the two-step BC, AIC and BIC choices.
    pub pi: f64,
    /// `log e_hat_0`, the white-noise score; reported only, never selected.
    pub order0_score: f64,
    /// The fit table was flagged degenerate.
    pub degenerate: bool,
}

impl SelectionResult {
    pub fn chosen(&self, c: Criterion) -> Option<usize> {
        self.chosen.get(&c).copied()
    }
}

/// Scores `criteria` on a fitted table. `n` is the effective sample size.
pub fn select(fit: &OrderFitTable, n: usize, criteria: &[Criterion], params: &CriterionParams) -> Result<SelectionResult> {
    params.validate()?;
    if fit.l_max == 0 {
        return Err(Error::SingularFit { order: 1 });
    }
    let errors = fit.errors();
    let aic = aic_scores(&errors, n);
    let bic = bic_scores(&errors, n);
    let two = two_step_bc_from_errors(&errors, n, params);
    let l_aic = argmin_order(&aic);
    let l_bic = argmin_order(&bic);
    let mut scores = BTreeMap::new();
    let mut chosen = BTreeMap::new();
    for &c in criteria {
        let (s, l) = match c {
            Criterion::Aic => (aic.clone(), l_aic),
            Criterion::Bic => (bic.clone(), l_bic),
            Criterion::Hq => {
                let s = hq_scores(&errors, n, params.hq_c)?;
                let l = argmin_order(&s);
                (s, l)
            }
            Criterion::Bc => (two.scores.clone(), two.chosen),
            Criterion::BcOneShot => {
                let s = bc_scores(&errors, n, params.l_max);
                let l = argmin_order(&s);
                (s, l)
            }
        };
        scores.insert(c, s);
        chosen.insert(c, l);
    }
    Ok(SelectionResult {
        n,
        params: *params,
        scores,
        chosen,
        pi: parametricness_index(two.chosen, l_aic, l_bic),
        order0_score: fit.e_hat(0).ln(),
        degenerate: fit.degenerate,
    })
}

/// `q = P(chi2_1 > ln N)`, the per-step significance level implied by BIC.
pub fn bic_significance_level(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(domain(format!("significance level needs N >= 2, got {n}")));
    }
    chi2_1_tail((n as f64).ln())
}

/// `P(g_L < h)` for `g_L = -ln(1 - psi_LL^2)` under the uniform stable prior.
pub fn gain_cdf(order: usize, h: f64) -> Result<f64> {
    if order == 0 {
        return Err(domain("order must be at least 1"));
    }
    if !(h >= 0.0) {
        return Err(domain(format!("threshold must be nonnegative, got {h}")));
    }
    let t = (-(-h).exp_m1()).sqrt();
    let (a, b) = last_coefficient_beta_params(order);
    let hi = beta_cdf(0.5 * (1.0 + t), a, b)?;
    let lo = beta_cdf(0.5 * (1.0 - t), a, b)?;
    Ok((hi - lo).clamp(0.0, 1.0))
}

/// Exact `p`-quantile `h_L` of the order-L gain under the uniform stable prior.
pub fn underfit_threshold(order: usize, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(domain(format!("p must lie in (0, 1), got {p}")));
    }
    if order == 0 {
        return Err(domain("order must be at least 1"));
    }
    let mut lo = 0.0_f64;
    let mut hi = 1.0 / order as f64;
    while gain_cdf(order, hi)? < p {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(domain("threshold bracket diverged"));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if gain_cdf(order, mid)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The level `p` at which the one-shot BC's last increment `2/N` is the
/// underfitting threshold of order `L_max`, i.e. `h_{L_max}(p) = 2/N`.
///
/// Since `h_L` is the quantile function of the gain, this is the gain CDF at
/// `2/N`; no root finding is needed.
pub fn bc_calibration_level(n: usize, l_max: usize) -> Result<f64> {
    if n == 0 {
        return Err(domain("sample size must be positive"));
    }
    gain_cdf(l_max, 2.0 / n as f64)
}

/// Large-order approximation `F^{-1}_{chi2_1}(p) / L`.
pub fn underfit_threshold_approx(order: usize, p: f64) -> Result<f64> {
    if order == 0 {
        return Err(domain("order must be at least 1"));
    }
    Ok(chi2_1_quantile(p)? / order as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentPoints {
    pub bc_aic: f64,
    pub bc_hq: f64,
    pub bc_bic: f64,
}

fn check_curve_args(n: usize, l_max: usize) -> Result<()> {
    if (n as f64) <= std::f64::consts::E {
        return Err(domain(format!("N must exceed e, got {n}")));
    }
    if l_max == 0 {
        return Err(domain("l_max must be at least 1"));
    }
    Ok(())
}

/// Orders where the one-shot BC increment `(2 L_max / N) / k` equals the
/// per-order slope of AIC, HQ and BIC.
pub fn tangent_points(n: usize, l_max: usize, c: f64) -> Result<TangentPoints> {
    check_curve_args(n, l_max)?;
    let nf = n as f64;
    let two_l = 2.0 * l_max as f64;
    Ok(TangentPoints {
        bc_aic: l_max as f64,
        bc_hq: two_l / (nf * hq_step(n, c)?),
        bc_bic: two_l / nf.ln(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscreteTangentPoints {
    pub bc_aic: usize,
    pub bc_hq: usize,
    pub bc_bic: usize,
}

/// Largest `k` in `1 ..= L_max` whose BC increment is at least the
/// competitor's slope (1 when no candidate qualifies).
pub fn discrete_tangent_points(n: usize, l_max: usize, c: f64) -> Result<DiscreteTangentPoints> {
    check_curve_args(n, l_max)?;
    let nf = n as f64;
    let increment = |k: usize| 2.0 * l_max as f64 / (nf * k as f64);
    let last = |slope: f64| (1..=l_max).rev().find(|&k| increment(k) >= slope).unwrap_or(1);
    Ok(DiscreteTangentPoints {
        bc_aic: last(2.0 / nf),
        bc_hq: last(hq_step(n, c)?),
        bc_bic: last(nf.ln() / nf),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltyRow {
    pub l: usize,
    pub j_bc: f64,
    pub j_aic: f64,
    pub j_bic: f64,
    pub j_hq: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltyCurves {
    pub n: usize,
    pub l_max: usize,
    pub hq_c: f64,
    pub raw: Vec<PenaltyRow>,
    /// Each curve shifted so that it is zero at `L = 1`.
    pub shifted: Vec<PenaltyRow>,
}

pub const PENALTY_CSV_HEADER: &str = "L,J_BC,J_AIC,J_BIC,J_HQ";

impl PenaltyCurves {
    pub fn to_csv(&self, shifted: bool) -> String {
        let rows = if shifted { &self.shifted } else { &self.raw };
        let mut out = String::from(PENALTY_CSV_HEADER);
        out.push('\n');
        for r in rows {
            out.push_str(&format!("{},{},{},{},{}\n", r.l, r.j_bc, r.j_aic, r.j_bic, r.j_hq));
        }
        out
    }
}

/// Penalty curves `J(L)` for `L = 1 ..= L_max`.
pub fn penalty_curves(n: usize, l_max: usize, c: f64) -> Result<PenaltyCurves> {
    check_curve_args(n, l_max)?;
    let nf = n as f64;
    let hq = hq_step(n, c)?;
    let bic = nf.ln() / nf;
    let scale = 2.0 * l_max as f64 / nf;
    let mut h = 0.0;
    let raw: Vec<PenaltyRow> = (1..=l_max)
        .map(|l| {
            h += 1.0 / l as f64;
            let lf = l as f64;
            PenaltyRow { l, j_bc: scale * h, j_aic: 2.0 * lf / nf, j_bic: lf * bic, j_hq: lf * hq }
        })
        .collect();
    let first = raw[0];
    let shifted = raw
        .iter()
        .map(|r| PenaltyRow {
            l: r.l,
            j_bc: r.j_bc - first.j_bc,
            j_aic: r.j_aic - first.j_aic,
            j_bic: r.j_bic - first.j_bic,
            j_hq: r.j_hq - first.j_hq,
        })
        .collect();
    Ok(PenaltyCurves { n, l_max, hq_c: c, raw, shifted })
}
