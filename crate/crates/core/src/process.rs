//! True data-generating processes and the exact oracles derived from them:
//! autocovariances, best finite-order predictors, mismatch error and the
//! prediction cost `C_N(L)`.
//!
//! All filters are stored in the `x_n + sum_l psi_l x_{n-l} = eps_n`
//! convention. Conventional AR coefficients (`x_n = sum_l phi_l x_{n-l} + eps_n`)
//! are the negation, see [`Filter::conventional_coeffs`].

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numerics::{levinson, levinson_visit, sample_beta, solve_general, step_up, LevinsonResult, RngStream, SymmetricMatrix};

/// Roots must have modulus below `1 - STABILITY_TOL` to count as stable.
pub const STABILITY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Filter {
    coeffs: Vec<f64>,
    #[serde(rename = "sigma2")]
    noise_variance: f64,
}

impl Filter {
    pub fn new(coeffs: Vec<f64>, noise_variance: f64) -> Result<Self> {
        if !(noise_variance > 0.0) || !noise_variance.is_finite() {
            return Err(domain(format!("noise variance must be positive, got {noise_variance}")));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(domain("filter coefficients must be finite"));
        }
        Ok(Self { coeffs, noise_variance })
    }

    /// Filter from conventional AR coefficients `phi` (`x_n = sum phi_l x_{n-l} + eps_n`).
    pub fn from_conventional(phi: &[f64], noise_variance: f64) -> Result<Self> {
        Self::new(phi.iter().map(|p| -p).collect(), noise_variance)
    }

    pub fn white_noise(noise_variance: f64) -> Result<Self> {
        Self::new(Vec::new(), noise_variance)
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn conventional_coeffs(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| -c).collect()
    }

    /// The same filter with trailing zeros up to `order`.
    pub fn padded(&self, order: usize) -> Filter {
        let mut coeffs = self.coeffs.clone();
        if coeffs.len() < order {
            coeffs.resize(order, 0.0);
        }
        Filter { coeffs, noise_variance: self.noise_variance }
    }
}

/// Rule producing the order-`floor(N^order_exponent)` filter `psi_k = decay^k`
/// for a sample size `N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthRule {
    pub decay: f64,
    pub order_exponent: f64,
}

impl GrowthRule {
    pub const STANDARD: GrowthRule = GrowthRule { decay: 0.7, order_exponent: 0.4 };

    pub fn order_at(&self, n: usize) -> usize {
        // nudge so exact integer powers do not floor one below
        ((n as f64).powf(self.order_exponent) + 1e-9).floor() as usize
    }

    pub fn coeffs_at(&self, n: usize) -> Vec<f64> {
        (1..=self.order_at(n)).map(|k| self.decay.powi(k as i32)).collect()
    }
}

/// Description of a true process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProcessSpecDoc", into = "ProcessSpecDoc")]
pub enum ProcessSpec {
    FiniteAr(Filter),
    GrowingAr { rule: GrowthRule, noise_variance: f64 },
    Ma1 { theta: f64, noise_variance: f64 },
}

/// A process resolved at a concrete sample size.
#[derive(Clone, Debug, PartialEq)]
pub enum ResolvedProcess {
    Ar(Filter),
    Ma1 { theta: f64, noise_variance: f64 },
}

impl ProcessSpec {
    pub fn finite_ar(coeffs: Vec<f64>, noise_variance: f64) -> Result<Self> {
        let filter = Filter::new(coeffs, noise_variance)?;
        if !is_stable(&filter) {
            return Err(Error::Unstable);
        }
        Ok(ProcessSpec::FiniteAr(filter))
    }

    pub fn growing_ar(rule: GrowthRule, noise_variance: f64) -> Result<Self> {
        if !(rule.decay.abs() < 1.0) {
            return Err(Error::Unstable);
        }
        if !(rule.order_exponent > 0.0 && rule.order_exponent < 1.0) {
            return Err(Error::Spec(format!("order_exponent must lie in (0, 1), got {}", rule.order_exponent)));
        }
        Filter::white_noise(noise_variance)?;
        Ok(ProcessSpec::GrowingAr { rule, noise_variance })
    }

    pub fn ma1(theta: f64, noise_variance: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(domain("theta must be finite"));
        }
        Filter::white_noise(noise_variance)?;
        Ok(ProcessSpec::Ma1 { theta, noise_variance })
    }

    pub fn noise_variance(&self) -> f64 {
        match self {
            ProcessSpec::FiniteAr(f) => f.noise_variance(),
            ProcessSpec::GrowingAr { noise_variance, .. } | ProcessSpec::Ma1 { noise_variance, .. } => *noise_variance,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ProcessSpec::FiniteAr(_) => "finite_ar",
            ProcessSpec::GrowingAr { .. } => "growing_ar",
            ProcessSpec::Ma1 { .. } => "ma1",
        }
    }

    /// Resolves the process at sample size `n` (required for growing-order truths).
    pub fn resolve(&self, n: Option<usize>) -> Result<ResolvedProcess> {
        match self {
            ProcessSpec::FiniteAr(f) => Ok(ResolvedProcess::Ar(f.clone())),
            ProcessSpec::GrowingAr { rule, noise_variance } => {
                let n = n.ok_or_else(|| Error::Spec("growing-order truth needs a sample size".into()))?;
                Ok(ResolvedProcess::Ar(Filter::new(rule.coeffs_at(n), *noise_variance)?))
            }
            ProcessSpec::Ma1 { theta, noise_variance } => Ok(ResolvedProcess::Ma1 {
                theta: *theta,
                noise_variance: *noise_variance,
            }),
        }
    }

    /// Exact autocovariances up to `max_lag`.
    pub fn autocovariances(&self, max_lag: usize, n: Option<usize>) -> Result<AutocovarianceTable> {
        match self.resolve(n)? {
            ResolvedProcess::Ar(f) => {
                let mut table = true_ar_autocovariances(&f, max_lag)?;
                table.source = self.clone();
                Ok(table)
            }
            ResolvedProcess::Ma1 { theta, noise_variance } => Ok(ma1_autocovariances(theta, noise_variance, max_lag)),
        }
    }

    /// Draws `n` observations. Growing-order truths are resolved at `n`.
    pub fn simulate(&self, n: usize, burnin: Option<usize>, rng: &mut RngStream) -> Result<Vec<f64>> {
        self.simulate_at(n, n, burnin, rng)
    }

    /// Draws `len` observations of the process as resolved at sample size `size`.
    pub fn simulate_at(&self, len: usize, size: usize, burnin: Option<usize>, rng: &mut RngStream) -> Result<Vec<f64>> {
        match self.resolve(Some(size))? {
            ResolvedProcess::Ar(f) => {
                let burnin = burnin.unwrap_or_else(|| default_burnin(f.order()));
                simulate_ar(&f, len, burnin, rng)
            }
            ResolvedProcess::Ma1 { theta, noise_variance } => Ok(simulate_ma1(theta, noise_variance, len, rng)),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProcessSpecDoc {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coeffs: Option<Vec<f64>>,
    #[serde(default = "unit_variance")]
    sigma2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    decay: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    order_exponent: Option<f64>,
}

fn unit_variance() -> f64 {
    1.0
}

impl TryFrom<ProcessSpecDoc> for ProcessSpec {
    type Error = Error;

    fn try_from(doc: ProcessSpecDoc) -> Result<Self> {
        match doc.kind.as_str() {
            "finite_ar" => {
                let coeffs = doc.coeffs.ok_or_else(|| Error::Spec("finite_ar needs `coeffs`".into()))?;
                ProcessSpec::finite_ar(coeffs, doc.sigma2)
            }
            "growing_ar" => {
                let rule = GrowthRule {
                    decay: doc.decay.unwrap_or(GrowthRule::STANDARD.decay),
                    order_exponent: doc.order_exponent.unwrap_or(GrowthRule::STANDARD.order_exponent),
                };
                ProcessSpec::growing_ar(rule, doc.sigma2)
            }
            "ma1" => {
                let theta = doc.theta.ok_or_else(|| Error::Spec("ma1 needs `theta`".into()))?;
                ProcessSpec::ma1(theta, doc.sigma2)
            }
            other => Err(Error::Spec(format!("unknown process kind `{other}`"))),
        }
    }
}

impl From<ProcessSpec> for ProcessSpecDoc {
    fn from(spec: ProcessSpec) -> Self {
        let kind = spec.kind().to_string();
        let sigma2 = spec.noise_variance();
        let mut doc = ProcessSpecDoc { kind, coeffs: None, sigma2, theta: None, decay: None, order_exponent: None };
        match spec {
            ProcessSpec::FiniteAr(f) => doc.coeffs = Some(f.coeffs),
            ProcessSpec::GrowingAr { rule, .. } => {
                doc.decay = Some(rule.decay);
                doc.order_exponent = Some(rule.order_exponent);
            }
            ProcessSpec::Ma1 { theta, .. } => doc.theta = Some(theta),
        }
        doc
    }
}

impl std::fmt::Display for ProcessSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", serde_json::to_string(self).map_err(|_| std::fmt::Error)?)
    }
}

/// Exact autocovariances `gamma_0 ..= gamma_K` of a process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutocovarianceTable {
    pub values: Vec<f64>,
    pub source: ProcessSpec,
}

impl AutocovarianceTable {
    pub fn max_lag(&self) -> usize {
        self.values.len() - 1
    }

    /// Toeplitz covariance matrix `Gamma_L`.
    pub fn covariance_matrix(&self, dim: usize) -> Result<SymmetricMatrix> {
        if dim > self.values.len() {
            return Err(domain(format!("need lags up to {} but table stops at {}", dim - 1, self.max_lag())));
        }
        Ok(SymmetricMatrix::toeplitz(&self.values, dim))
    }
}

/// True iff every eigenvalue of the companion matrix has modulus below `1 - 1e-10`.
pub fn is_stable(filter: &Filter) -> bool {
    let p = filter.order();
    if p == 0 {
        return true;
    }
    let c = filter.coeffs();
    let companion = DMatrix::from_fn(p, p, |i, j| {
        if i == 0 {
            -c[j]
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    companion
        .complex_eigenvalues()
        .iter()
        .all(|z| z.norm().is_finite() && z.norm() < 1.0 - STABILITY_TOL)
}

/// Draws a filter uniformly from the region of stable order-L filters: last
/// coefficients are independent with `(psi_kk + 1)/2 ~ Beta(floor(k/2+1), floor((k+1)/2))`
/// and are expanded with the Levinson step-up update.
pub fn sample_uniform_stable_filter(order: usize, rng: &mut RngStream) -> Result<Filter> {
    if order == 0 {
        return Err(domain("order must be at least 1"));
    }
    let last = sample_last_coefficients(order, rng)?;
    Filter::new(step_up(&last), 1.0)
}

/// The independent last coefficients `psi_{1,1} ..= psi_{L,L}` of a uniform stable filter.
pub fn sample_last_coefficients(order: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    (1..=order)
        .map(|k| {
            let (a, b) = last_coefficient_beta_params(k);
            Ok(2.0 * sample_beta(a, b, rng)? - 1.0)
        })
        .collect()
}

/// Beta parameters of `(psi_kk + 1) / 2` under the uniform stable prior.
pub fn last_coefficient_beta_params(k: usize) -> (f64, f64) {
    ((k / 2 + 1) as f64, (k + 1).div_euclid(2) as f64)
}

/// Burn-in used when none is given: `max(10 * order, 1000)`.
pub fn default_burnin(order: usize) -> usize {
    (10 * order).max(1000)
}

/// Runs `x_n = -sum psi_l x_{n-l} + eps_n` from a zero state, drops `burnin`
/// values and returns the next `n`.
pub fn simulate_ar(filter: &Filter, n: usize, burnin: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    if !is_stable(filter) {
        return Err(Error::Unstable);
    }
    let sigma = filter.noise_variance().sqrt();
    let c = filter.coeffs();
    let total = burnin + n;
    let mut x = Vec::with_capacity(total);
    for t in 0..total {
        let mut v = sigma * rng.std_normal();
        for (l, psi) in c.iter().enumerate() {
            if t > l {
                v -= psi * x[t - 1 - l];
            }
        }
        x.push(v);
    }
    Ok(x.split_off(burnin))
}

/// `x_n = eps_n + theta eps_{n-1}`.
pub fn simulate_ma1(theta: f64, noise_variance: f64, n: usize, rng: &mut RngStream) -> Vec<f64> {
    let sigma = noise_variance.sqrt();
    let mut prev = sigma * rng.std_normal();
    (0..n)
        .map(|_| {
            let eps = sigma * rng.std_normal();
            let x = eps + theta * prev;
            prev = eps;
            x
        })
        .collect()
}

/// Exact autocovariances of a stable AR process.
///
/// Solves `(I + Phi) rho = -Psi` for the correlations `rho_1..rho_L0`, where
/// row `l` of `Phi` holds `psi_{l+m}` (first summand) and `psi_{l-m}` (second
/// summand) in column `m`; then `gamma_0 = sigma^2 / (1 + rho^T Psi)` and the
/// remaining lags follow the AR recursion.
pub fn true_ar_autocovariances(filter: &Filter, max_lag: usize) -> Result<AutocovarianceTable> {
    let sigma2 = filter.noise_variance();
    let source = ProcessSpec::FiniteAr(filter.clone());
    let psi = filter.coeffs();
    let p = psi.len();
    if p == 0 {
        let mut values = vec![0.0; max_lag + 1];
        values[0] = sigma2;
        return Ok(AutocovarianceTable { values, source });
    }
    if !is_stable(filter) {
        return Err(Error::Unstable);
    }
    // psi_k with 1-based k, zero outside 1..=p
    let coef = |k: usize| if (1..=p).contains(&k) { psi[k - 1] } else { 0.0 };
    let rows: Vec<Vec<f64>> = (1..=p)
        .map(|l| {
            (1..=p)
                .map(|m| {
                    let upper = coef(l + m);
                    let lower = if m < l { coef(l - m) } else { 0.0 };
                    upper + lower + if l == m { 1.0 } else { 0.0 }
                })
                .collect()
        })
        .collect();
    let rhs: Vec<f64> = psi.iter().map(|v| -v).collect();
    let rho = solve_general(&rows, &rhs)
        .ok_or_else(|| Error::DegenerateProcess("I + Phi is singular".into()))?;
    let denom = 1.0 + rho.iter().zip(psi).map(|(r, s)| r * s).sum::<f64>();
    let gamma0 = sigma2 / denom;
    if !(gamma0 > 0.0) || !gamma0.is_finite() {
        return Err(Error::DegenerateProcess(format!("nonpositive variance {gamma0}")));
    }
    let mut values = Vec::with_capacity(max_lag.max(p) + 1);
    values.push(gamma0);
    values.extend(rho.iter().map(|r| gamma0 * r));
    for l in (p + 1)..=max_lag {
        let g = -(1..=p).map(|k| psi[k - 1] * values[l - k]).sum::<f64>();
        values.push(g);
    }
    values.truncate(max_lag + 1);
    Ok(AutocovarianceTable { values, source })
}

pub fn ma1_autocovariances(theta: f64, noise_variance: f64, max_lag: usize) -> AutocovarianceTable {
    let mut values = vec![0.0; max_lag + 1];
    values[0] = noise_variance * (1.0 + theta * theta);
    if max_lag >= 1 {
        values[1] = noise_variance * theta;
    }
    AutocovarianceTable {
        values,
        source: ProcessSpec::Ma1 { theta, noise_variance },
    }
}

/// Theoretical best predictors `Psi_L` and errors `e_L` for `L = 0..=l_max`.
pub fn best_predictors(table: &AutocovarianceTable, l_max: usize) -> Result<LevinsonResult> {
    if table.values.len() < l_max + 1 {
        return Err(domain(format!("table has lags up to {} but {l_max} requested", table.max_lag())));
    }
    levinson(&table.values[..=l_max])
}

/// Excess one-step prediction error of `candidate` over the innovation
/// variance: `||Lambda - Psi||^2_Gamma` over `Gamma_{L'}`, `L' = max` of the
/// two orders, for AR truths; the closed form
/// `s2 (1 + t^2)(1 + |Lambda|^2) + 2 s2 t (Lambda_1 + sum Lambda_k Lambda_{k+1}) - s2`
/// for MA(1) truths.
pub fn mismatch_error(candidate: &[f64], truth: &ProcessSpec, n: Option<usize>) -> Result<f64> {
    match truth.resolve(n)? {
        ResolvedProcess::Ar(f) => {
            let dim = candidate.len().max(f.order());
            if dim == 0 {
                return Ok(0.0);
            }
            let table = true_ar_autocovariances(&f, dim - 1)?;
            let gamma = table.covariance_matrix(dim)?;
            let diff: Vec<f64> = (0..dim)
                .map(|i| candidate.get(i).copied().unwrap_or(0.0) - f.coeffs().get(i).copied().unwrap_or(0.0))
                .collect();
            Ok(gamma.quadratic_form(&diff))
        }
        ResolvedProcess::Ma1 { theta, noise_variance: s2 } => {
            let norm2: f64 = candidate.iter().map(|c| c * c).sum();
            let lag1: f64 = candidate.first().copied().unwrap_or(0.0)
                + candidate.windows(2).map(|w| w[0] * w[1]).sum::<f64>();
            Ok(s2 * (1.0 + theta * theta) * (1.0 + norm2) + 2.0 * s2 * theta * lag1 - s2)
        }
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(domain("sample size must be positive"));
    }
    Ok(())
}

/// `C_N(L) = L sigma^2 / N + mismatch_error(Psi_L)` with `Psi_L` the best order-L predictor.
pub fn cost(order: usize, n: usize, truth: &ProcessSpec) -> Result<f64> {
    check_n(n)?;
    let table = truth.autocovariances(order, Some(n))?;
    let predictors = best_predictors(&table, order)?;
    let sigma2 = truth.noise_variance();
    let mismatch = mismatch_error(&predictors.filters[order], truth, Some(n))?;
    Ok(order as f64 * sigma2 / n as f64 + mismatch)
}

/// `C_N(L) + extra_per_order * L * sigma^2 / N` for `L = 0..=cap`, using the
/// identity `mismatch(Psi_L) = e_L - sigma^2`, which keeps a scan over `cap`
/// orders at `O(cap^2)`.
fn cost_curve(n: usize, truth: &ProcessSpec, cap: usize, extra_per_order: f64) -> Result<Vec<f64>> {
    let table = truth.autocovariances(cap, Some(n))?;
    let sigma2 = truth.noise_variance();
    let per_order = (1.0 + extra_per_order) * sigma2 / n as f64;
    let mut curve = Vec::with_capacity(cap + 1);
    levinson_visit(&table.values, |order, _, e| {
        curve.push(order as f64 * per_order + (e - sigma2).max(0.0));
    })?;
    Ok(curve)
}

fn argmin_with_cap_guard(curve: &[f64], cap: usize) -> Result<usize> {
    let mut best = 1;
    for l in 2..=cap {
        if curve[l] < curve[best] {
            best = l;
        }
    }
    if best == cap || !(curve[cap] > curve[best]) {
        return Err(Error::CapTooSmall { cap });
    }
    Ok(best)
}

fn resolve_cap(n: usize, cap: Option<usize>) -> Result<usize> {
    check_n(n)?;
    let cap = cap.unwrap_or(n / 2);
    if cap < 2 {
        return Err(Error::CapTooSmall { cap });
    }
    Ok(cap)
}

/// `argmin_{1 <= L <= cap} C_N(L)`; ties go to the smaller order. `cap`
/// defaults to `floor(N / 2)`.
pub fn universally_optimal_order(n: usize, truth: &ProcessSpec, cap: Option<usize>) -> Result<usize> {
    let cap = resolve_cap(n, cap)?;
    argmin_with_cap_guard(&cost_curve(n, truth, cap, 0.0)?, cap)
}

/// Minimizer of `C_N(L) + (log N - 2) L sigma^2 / N`.
pub fn bic_cost_minimizer(n: usize, truth: &ProcessSpec, cap: Option<usize>) -> Result<usize> {
    let cap = resolve_cap(n, cap)?;
    argmin_with_cap_guard(&cost_curve(n, truth, cap, (n as f64).ln() - 2.0)?, cap)
}
