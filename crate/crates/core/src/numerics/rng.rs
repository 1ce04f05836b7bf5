//! Seeded, stream-splittable random sampling.
//!
//! Every stream is a ChaCha20 keystream. The key is derived from the 64-bit
//! master seed with `SeedableRng::seed_from_u64` (PCG32 expansion, stable in
//! `rand_core`), and the ChaCha stream counter is set to `stream_id`. Two
//! streams with different ids therefore never share keystream blocks and no
//! state is shared between replications. ChaCha output is platform
//! independent, and the samplers below only use IEEE basic arithmetic plus
//! `ln`/`sqrt`/`powf`, so sequences reproduce across runs and machines.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{domain, Result};

#[derive(Clone, Debug)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
    inner: ChaCha20Rng,
    spare_normal: Option<f64>,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(master_seed);
        inner.set_stream(stream_id);
        Self {
            master_seed,
            stream_id,
            inner,
            spare_normal: None,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform draw on the open interval (0, 1) with 53 bits of resolution.
    pub fn uniform_open(&mut self) -> f64 {
        ((self.inner.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw (Marsaglia polar method; the second variate of
    /// each accepted pair is cached).
    pub fn std_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.uniform_open() - 1.0;
            let v = 2.0 * self.uniform_open() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let factor = (-2.0 * s.ln() / s).sqrt();
                self.spare_normal = Some(v * factor);
                return u * factor;
            }
        }
    }

    /// Gamma(shape, 1) draw by Marsaglia and Tsang's squeeze/rejection method,
    /// with the `U^(1/shape)` boost for shapes below one.
    pub fn gamma(&mut self, shape: f64) -> Result<f64> {
        if !(shape > 0.0) || !shape.is_finite() {
            return Err(domain(format!("gamma shape must be positive, got {shape}")));
        }
        if shape < 1.0 {
            let g = self.gamma(shape + 1.0)?;
            let u = self.uniform_open();
            return Ok(g * u.powf(1.0 / shape));
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let (x, v) = loop {
                let x = self.std_normal();
                let v = 1.0 + c * x;
                if v > 0.0 {
                    break (x, v * v * v);
                }
            };
            let u = self.uniform_open();
            let x2 = x * x;
            if u < 1.0 - 0.0331 * x2 * x2 {
                return Ok(d * v);
            }
            if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
                return Ok(d * v);
            }
        }
    }
}

/// Draw from Beta(a, b) as `X / (X + Y)` with independent Gamma(a), Gamma(b).
pub fn sample_beta(a: f64, b: f64, rng: &mut RngStream) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(domain(format!("beta parameters must be positive, got ({a}, {b})")));
    }
    let x = rng.gamma(a)?;
    let y = rng.gamma(b)?;
    Ok(x / (x + y))
}

pub fn sample_std_normal(rng: &mut RngStream) -> f64 {
    rng.std_normal()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn equal_seed_and_id_reproduce_bitwise() {
        let mut a = RngStream::new(42, 7);
        let mut b = RngStream::new(42, 7);
        for _ in 0..1000 {
            assert_eq!(a.std_normal().to_bits(), b.std_normal().to_bits());
        }
        assert_eq!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn distinct_streams_are_uncorrelated() {
        let mut a = RngStream::new(42, 0);
        let mut b = RngStream::new(42, 1);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| a.std_normal()).collect();
        let ys: Vec<f64> = (0..n).map(|_| b.std_normal()).collect();
        assert_ne!(xs[..10], ys[..10]);
        let corr = xs.iter().zip(&ys).map(|(x, y)| x * y).sum::<f64>() / n as f64;
        // sd of the sample correlation is 1/sqrt(n) ~ 0.0032
        assert!(corr.abs() < 0.015, "cross correlation {corr}");
    }

    #[test]
    fn normal_moments() {
        let mut rng = RngStream::new(1, 0);
        let xs: Vec<f64> = (0..100_000).map(|_| sample_std_normal(&mut rng)).collect();
        let (m, v) = mean_var(&xs);
        assert!(m.abs() < 0.02, "mean {m}");
        assert!((v - 1.0).abs() < 0.03, "var {v}");
    }

    #[test]
    fn beta_means_within_three_standard_errors() {
        let cases = [(1.0, 1.0, 0.5), (2.0, 1.0, 2.0 / 3.0), (4.0, 3.0, 4.0 / 7.0), (0.5, 0.5, 0.5)];
        for (i, &(a, b, mean)) in cases.iter().enumerate() {
            let mut rng = RngStream::new(9, i as u64);
            let xs: Vec<f64> = (0..100_000)
                .map(|_| sample_beta(a, b, &mut rng).unwrap())
                .collect();
            assert!(xs.iter().all(|&x| x > 0.0 && x < 1.0));
            let (m, _) = mean_var(&xs);
            let sd = (a * b / ((a + b) * (a + b) * (a + b + 1.0))).sqrt();
            let se = sd / (xs.len() as f64).sqrt();
            assert!((m - mean).abs() < 3.0 * se, "Beta({a},{b}) mean {m} vs {mean}");
        }
    }

    #[test]
    fn gamma_rejects_bad_shape() {
        let mut rng = RngStream::new(0, 0);
        assert!(rng.gamma(0.0).is_err());
        assert!(sample_beta(-1.0, 1.0, &mut rng).is_err());
    }
}
