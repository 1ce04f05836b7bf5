//! Order-recursive solution of the Toeplitz Yule-Walker systems.
//!
//! Filters use the `x_n + sum_l psi_l x_{n-l} = e_n` sign convention, so an
//! AR(1) with autocovariances `(g0, -0.9 g0)` has `psi_{1,1} = 0.9`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevinsonResult {
    /// `filters[L]` is the order-L predictor (`filters[0]` is empty).
    pub filters: Vec<Vec<f64>>,
    /// Prediction errors `e_0 ..= e_L`.
    pub errors: Vec<f64>,
    /// Last coefficients `psi_{1,1} ..= psi_{L,L}` (reflection coefficients).
    pub last_coefficients: Vec<f64>,
}

impl LevinsonResult {
    pub fn max_order(&self) -> usize {
        self.errors.len() - 1
    }
}

/// Runs the recursion over `gamma[0..=max]`, calling `visit(order, filter, error)`
/// for every order including 0. Only the current filter is kept in memory.
pub fn levinson_visit(
    gamma: &[f64],
    mut visit: impl FnMut(usize, &[f64], f64),
) -> Result<()> {
    let Some(&g0) = gamma.first() else {
        return Err(Error::DegenerateSequence { order: 0 });
    };
    if !(g0 > 0.0) || !g0.is_finite() {
        return Err(Error::DegenerateSequence { order: 0 });
    }
    let mut filter: Vec<f64> = Vec::with_capacity(gamma.len());
    let mut prev: Vec<f64> = Vec::with_capacity(gamma.len());
    let mut err = g0;
    visit(0, &filter, err);
    for order in 1..gamma.len() {
        let mut acc = gamma[order];
        for (l, psi) in filter.iter().enumerate() {
            acc += psi * gamma[order - 1 - l];
        }
        let k = -acc / err;
        prev.clone_from(&filter);
        for l in 0..prev.len() {
            filter[l] = prev[l] + k * prev[prev.len() - 1 - l];
        }
        filter.push(k);
        err *= 1.0 - k * k;
        if !(err > 0.0) || !err.is_finite() {
            return Err(Error::DegenerateSequence { order });
        }
        visit(order, &filter, err);
    }
    Ok(())
}

/// Per-order best linear predictors from autocovariances `gamma_0 ..= gamma_L`.
pub fn levinson(gamma: &[f64]) -> Result<LevinsonResult> {
    let mut filters = Vec::with_capacity(gamma.len());
    let mut errors = Vec::with_capacity(gamma.len());
    let mut last_coefficients = Vec::with_capacity(gamma.len().saturating_sub(1));
    levinson_visit(gamma, |order, filter, e| {
        if order > 0 {
            last_coefficients.push(filter[order - 1]);
        }
        filters.push(filter.to_vec());
        errors.push(e);
    })?;
    Ok(LevinsonResult {
        filters,
        errors,
        last_coefficients,
    })
}

/// Expands last coefficients `psi_{1,1}, ..., psi_{L,L}` into the order-L
/// filter with the step-up update `psi_{k,l} = psi_{k-1,l} + psi_{k,k} psi_{k-1,k-l}`.
pub fn step_up(last_coefficients: &[f64]) -> Vec<f64> {
    let mut filter: Vec<f64> = Vec::with_capacity(last_coefficients.len());
    let mut prev: Vec<f64> = Vec::with_capacity(last_coefficients.len());
    for &k in last_coefficients {
        prev.clone_from(&filter);
        for l in 0..prev.len() {
            filter[l] = prev[l] + k * prev[prev.len() - 1 - l];
        }
        filter.push(k);
    }
    filter
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ar1_autocovariances() {
        let g0 = 1.0 / (1.0 - 0.81);
        let r = levinson(&[g0, -0.9 * g0]).unwrap();
        assert!((r.last_coefficients[0] - 0.9).abs() < 1e-12);
        assert!((r.errors[1] - 1.0).abs() < 1e-12);
        assert_eq!(r.errors[0], g0);
    }

    #[test]
    fn ma1_autocovariances() {
        let r = levinson(&[1.64, -0.8]).unwrap();
        assert!((r.filters[1][0] - 0.487_804_878_048_780_5).abs() < 1e-12);
        assert!((r.errors[1] - 1.249_756_097_560_975_6).abs() < 1e-12);
    }

    #[test]
    fn white_noise() {
        let r = levinson(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(r.filters[2], vec![0.0, 0.0]);
        assert_eq!(r.errors[2], 1.0);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(levinson(&[0.0, 0.0]), Err(Error::DegenerateSequence { order: 0 }));
        assert_eq!(levinson(&[]), Err(Error::DegenerateSequence { order: 0 }));
        // perfectly predictable: |rho_1| = 1
        assert_eq!(levinson(&[1.0, 1.0]), Err(Error::DegenerateSequence { order: 1 }));
    }

    #[test]
    fn step_up_inverts_levinson() {
        let r = levinson(&[2.0, 0.7, -0.3, 0.1, 0.05]).unwrap();
        let rebuilt = step_up(&r.last_coefficients);
        for (a, b) in rebuilt.iter().zip(&r.filters[4]) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
