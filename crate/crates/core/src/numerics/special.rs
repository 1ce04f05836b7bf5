//! Chi-square(1) tail and quantile, regularized incomplete beta.

use statrs::function::{beta, erf};

use crate::error::{domain, Result};

/// `P(W > s)` for `W ~ chi2(1)`, i.e. `2 (1 - Phi(sqrt(s)))`, evaluated as
/// `erfc(sqrt(s / 2))` so the upper tail keeps full relative precision.
pub fn chi2_1_tail(s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(domain(format!("chi2_1_tail needs s >= 0, got {s}")));
    }
    if s.is_infinite() {
        return Ok(0.0);
    }
    Ok(erf::erfc((0.5 * s).sqrt()))
}

fn chi2_1_cdf(x: f64) -> f64 {
    erf::erf((0.5 * x).sqrt())
}

/// Inverse of the chi2(1) CDF.
pub fn chi2_1_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(domain(format!("chi2_1_quantile needs 0 < p < 1, got {p}")));
    }
    // Solve on whichever tail is represented more accurately.
    let upper = p > 0.5;
    let q = 1.0 - p;
    let below = |x: f64| -> bool {
        if upper {
            erf::erfc((0.5 * x).sqrt()) > q
        } else {
            chi2_1_cdf(x) < p
        }
    };
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    while below(hi) {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if below(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn beta_cdf(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) || !(a > 0.0) || !(b > 0.0) {
        return Err(domain(format!("beta_cdf needs x in [0,1], a, b > 0; got x={x}, a={a}, b={b}")));
    }
    beta::checked_beta_reg(a, b, x).map_err(|e| domain(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi2_tail_examples() {
        assert_eq!(chi2_1_tail(0.0).unwrap(), 1.0);
        assert!((chi2_1_tail(100f64.ln()).unwrap() - 0.0319).abs() < 5e-5);
        assert!((chi2_1_tail(10000f64.ln()).unwrap() - 0.0024).abs() < 5e-5);
        assert!(chi2_1_tail(-1e-3).is_err());
        assert!(chi2_1_tail(f64::NAN).is_err());
    }

    #[test]
    fn quantile_domain() {
        assert!(chi2_1_quantile(0.0).is_err());
        assert!(chi2_1_quantile(1.0).is_err());
        assert!(chi2_1_quantile(1e-12).unwrap() < 1e-20);
    }

    #[test]
    fn quantile_round_trip() {
        for p in [0.01, 0.1, 0.5, 0.9, 0.99] {
            let x = chi2_1_quantile(p).unwrap();
            assert!((chi2_1_tail(x).unwrap() - (1.0 - p)).abs() < 1e-8, "p = {p}");
        }
        let tail = chi2_1_tail(100f64.ln()).unwrap();
        assert!((chi2_1_quantile(1.0 - tail).unwrap() - 100f64.ln()).abs() < 1e-8);
        // 0.0319 is the 4-digit rounding of the tail; the tail density there is
        // ~1.9e-3, so the rounding alone moves the quantile by ~0.013.
        assert!((chi2_1_quantile(1.0 - 0.0319).unwrap() - 100f64.ln()).abs() < 0.015);
    }

    #[test]
    fn quantile_is_monotone() {
        let mut prev = 0.0;
        for i in 1..100 {
            let x = chi2_1_quantile(i as f64 / 100.0).unwrap();
            assert!(x > prev);
            prev = x;
        }
    }

    #[test]
    fn beta_cdf_trivial_cases() {
        assert!((beta_cdf(0.5, 1.0, 1.0).unwrap() - 0.5).abs() < 1e-12);
        assert!((beta_cdf(0.5, 2.0, 1.0).unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(beta_cdf(0.0, 3.0, 2.0).unwrap(), 0.0);
        assert_eq!(beta_cdf(1.0, 3.0, 2.0).unwrap(), 1.0);
        assert!(beta_cdf(1.5, 1.0, 1.0).is_err());
        assert!(beta_cdf(0.5, 0.0, 1.0).is_err());
    }
}
