//! Sample moments and per-order least-squares AR fits.
//!
//! With `N = N0 - L_max`, the moments are
//! `gamma_hat[i][j] = (1/N) sum_{n=L_max+1}^{N0} x_{n-i} x_{n-j}` for
//! `0 <= i, j <= L_max`. This matrix is not Toeplitz, so every order is fitted
//! with its own symmetric solve instead of a Levinson recursion. Data are used
//! as given (no mean removal).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{solve_spd, SymmetricMatrix};
use crate::process::Filter;

/// Relative floor applied to `e_hat_L` (as a fraction of `e_hat_0`).
pub const ERROR_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMoments {
    pub l_max: usize,
    pub gamma_hat: SymmetricMatrix,
    /// Effective sample size `N0 - L_max`.
    pub n: usize,
    pub n0: usize,
    /// Set when the data carry no variation to fit (constant or all-zero series).
    pub degenerate: bool,
}

pub fn sample_moments(data: &[f64], l_max: usize) -> Result<SampleMoments> {
    let n0 = data.len();
    if l_max == 0 {
        return Err(Error::Domain("l_max must be at least 1".into()));
    }
    if n0 <= l_max + 1 {
        return Err(Error::InsufficientData { needed: l_max + 1, got: n0 });
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("data contain non-finite values".into()));
    }
    let n = n0 - l_max;
    let inv_n = 1.0 / n as f64;
    let gamma_hat = SymmetricMatrix::from_lower_fn(l_max + 1, |i, j| {
        let a = &data[l_max - i..n0 - i];
        let b = &data[l_max - j..n0 - j];
        a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * inv_n
    });
    let first = data[0];
    let degenerate = data.iter().all(|&x| x == first);
    Ok(SampleMoments { l_max, gamma_hat, n, n0, degenerate })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    pub order: usize,
    /// Estimated filter; its noise variance is `e_hat`.
    pub filter: Filter,
    pub e_hat: f64,
    /// `log(e_hat_{L-1} / e_hat_L)`, absent for order 0.
    pub gain_hat: Option<f64>,
    /// The error recursion gave a value at or below the floor.
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderFitTable {
    /// Highest fitted order (may be below `moments_l_max` for truncated fits).
    pub l_max: usize,
    /// `L_max` used for the moment window.
    pub moments_l_max: usize,
    pub n: usize,
    pub n0: usize,
    /// Orders `0 ..= l_max`.
    pub orders: Vec<OrderFit>,
    pub degenerate: bool,
}

impl OrderFitTable {
    pub fn e_hat(&self, order: usize) -> f64 {
        self.orders[order].e_hat
    }

    pub fn filter(&self, order: usize) -> &Filter {
        &self.orders[order].filter
    }

    /// `e_hat_1 ..= e_hat_Lmax`.
    pub fn errors(&self) -> Vec<f64> {
        self.orders[1..].iter().map(|o| o.e_hat).collect()
    }
}

fn fit_order(moments: &SampleMoments, order: usize) -> Result<(Vec<f64>, f64)> {
    let g = &moments.gamma_hat;
    let block = g.block(1, order);
    let rhs: Vec<f64> = (1..=order).map(|i| g.get(i, 0)).collect();
    let x = solve_spd(&block, &rhs).map_err(|e| match e {
        Error::Singular { .. } => Error::SingularFit { order },
        other => other,
    })?;
    let explained: f64 = rhs.iter().zip(&x).map(|(a, b)| a * b).sum();
    Ok((x.iter().map(|v| -v).collect(), g.get(0, 0) - explained))
}

fn build_table(moments: &SampleMoments, stop_at_singular: bool) -> Result<(OrderFitTable, Option<usize>)> {
    let e0 = moments.gamma_hat.get(0, 0);
    if !(e0 > 0.0) {
        return Err(Error::SingularFit { order: 0 });
    }
    let floor = ERROR_FLOOR * e0;
    let mut orders = vec![OrderFit {
        order: 0,
        filter: Filter::white_noise(e0)?,
        e_hat: e0,
        gain_hat: None,
        degenerate: false,
    }];
    let mut failed = None;
    for order in 1..=moments.l_max {
        let (coeffs, raw) = match fit_order(moments, order) {
            Ok(v) => v,
            Err(Error::SingularFit { order }) if stop_at_singular => {
                failed = Some(order);
                break;
            }
            Err(e) => return Err(e),
        };
        let degenerate = !(raw > floor);
        let e_hat = if degenerate { floor } else { raw };
        let prev = orders[order - 1].e_hat;
        orders.push(OrderFit {
            order,
            filter: Filter::new(coeffs, e_hat)?,
            e_hat,
            gain_hat: Some((prev / e_hat).ln()),
            degenerate,
        });
    }
    let degenerate = moments.degenerate || failed.is_some() || orders.iter().any(|o| o.degenerate);
    Ok((
        OrderFitTable {
            l_max: orders.len() - 1,
            moments_l_max: moments.l_max,
            n: moments.n,
            n0: moments.n0,
            orders,
            degenerate,
        },
        failed,
    ))
}

/// Fits orders `1..=L_max`: `Psi_hat_L = -Gamma_hat_L^{-1} gamma_hat_L` and
/// `e_hat_L = e_hat_0 - gamma_hat_L^T Gamma_hat_L^{-1} gamma_hat_L`.
///
/// `e_hat_L` is floored at `1e-12 * e_hat_0` and the order flagged when the
/// recursion yields a value at or below the floor.
pub fn fit_all_orders(moments: &SampleMoments) -> Result<OrderFitTable> {
    build_table(moments, false).map(|(t, _)| t)
}

/// Like [`fit_all_orders`], but stops before the first order whose moment
/// matrix is singular and returns the truncated table with that order.
pub fn fit_orders_until_singular(moments: &SampleMoments) -> Result<(OrderFitTable, Option<usize>)> {
    build_table(moments, true)
}

/// One-step prediction `-sum_l psi_l x_{n-l}` from a history ordered oldest to newest.
pub fn predict_one_step(filter: &Filter, history: &[f64]) -> Result<f64> {
    let order = filter.order();
    if history.len() < order {
        return Err(Error::InsufficientContext { order, got: history.len() });
    }
    let last = history.len();
    Ok(-filter
        .coeffs()
        .iter()
        .enumerate()
        .map(|(l, psi)| psi * history[last - 1 - l])
        .sum::<f64>())
}
