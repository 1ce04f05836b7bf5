//! Dense symmetric matrices and solvers.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Relative pivot floor: a Cholesky pivot must retain at least this fraction
/// of its diagonal entry, otherwise the direction is treated as rank deficient.
const PIVOT_REL_TOL: f64 = 1e-9;
/// Diagonal jitter, as a multiple of `trace / dim`, applied once on failure.
const JITTER: f64 = 1e-10;

/// Dense symmetric matrix stored row-major. Entries are mirrored at
/// construction so `get(i, j) == get(j, i)` holds bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetricMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl SymmetricMatrix {
    /// Builds the matrix by evaluating `f(i, j)` for `i >= j` only.
    pub fn from_lower_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..=i {
                let v = f(i, j);
                entries[i * dim + j] = v;
                entries[j * dim + i] = v;
            }
        }
        Self { dim, entries }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(domain("matrix rows must all have length equal to the row count"));
        }
        for i in 0..dim {
            for j in 0..i {
                if rows[i][j] != rows[j][i] {
                    return Err(domain(format!("matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self {
            dim,
            entries: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_lower_fn(dim, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    /// Symmetric Toeplitz matrix `[gamma_{|i-j|}]`.
    pub fn toeplitz(gamma: &[f64], dim: usize) -> Self {
        Self::from_lower_fn(dim, |i, j| gamma[i - j])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Leading-block of rows/cols `offset..offset + dim`.
    pub fn block(&self, offset: usize, dim: usize) -> Self {
        Self::from_lower_fn(dim, |i, j| self.get(offset + i, offset + j))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    /// `x^T A x`, with `x` zero-padded when shorter than the matrix.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let n = x.len().min(self.dim);
        let mut acc = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += self.get(i, j) * x[j];
            }
            acc += x[i] * row;
        }
        acc
    }
}

/// Lower Cholesky factor, or the index of the first pivot that fails the
/// relative floor.
fn cholesky(a: &SymmetricMatrix, shift: f64) -> std::result::Result<Vec<f64>, usize> {
    let n = a.dim();
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let diag = a.get(j, j) + shift;
        let mut d = diag;
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d.is_finite() && diag > 0.0 && d > PIVOT_REL_TOL * diag) {
            return Err(j);
        }
        let ljj = d.sqrt();
        l[j * n + j] = ljj;
        for i in (j + 1)..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / ljj;
        }
    }
    Ok(l)
}

fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = b.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    y
}

/// Solves `A x = b` for symmetric positive definite `A` via Cholesky.
///
/// If the plain factorization fails, it is retried once with
/// `1e-10 * trace / dim` added to the diagonal; a second failure reports the
/// failing pivot.
pub fn solve_spd(a: &SymmetricMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.dim();
    if b.len() != n {
        return Err(domain(format!("rhs length {} does not match dimension {n}", b.len())));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let l = match cholesky(a, 0.0) {
        Ok(l) => l,
        Err(_) => {
            let shift = JITTER * a.trace() / n as f64;
            cholesky(a, shift.max(0.0)).map_err(|pivot| Error::Singular { pivot })?
        }
    };
    Ok(cholesky_solve(&l, n, b))
}

/// Solves a general square system with partial-pivot LU.
pub(crate) fn solve_general(rows: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    let lu = m.lu();
    let x = lu.solve(&DVector::from_column_slice(b))?;
    x.iter().all(|v| v.is_finite()).then(|| x.iter().copied().collect())
}
