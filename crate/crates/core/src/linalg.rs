//! Dense symmetric positive-definite solve for the normal equations.

use crate::error::{Error, Result};

/// Relative pivot threshold below which a column is treated as dependent.
const PIVOT_RTOL: f64 = 1e-12;

/// Row-major square matrix; only the upper triangle is read by the solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.data[i * self.n + j]
    }

    /// Adds `scale * row[j]` to entries `(a, j)` for `j >= a`.
    pub fn add_row_scaled(&mut self, a: usize, scale: f64, row: &[f64]) {
        let base = a * self.n;
        for (dst, &v) in self.data[base + a..base + self.n].iter_mut().zip(&row[a..]) {
            *dst += scale * v;
        }
    }

    pub fn add_diagonal(&mut self, i: usize, v: f64) {
        self.data[i * self.n + i] += v;
    }
}

/// Solves `A x = b` by an in-place upper Cholesky factorization `A = R^T R`.
///
/// Returns [`Error::SingularSystem`] when a pivot falls to a negligible
/// fraction of its original diagonal entry.
pub fn cholesky_solve(mut a: SymmetricMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.n;
    assert_eq!(b.len(), n, "right-hand side length");
    let diag: Vec<f64> = (0..n).map(|i| a.data[i * n + i]).collect();
    let r = &mut a.data;
    for j in 0..n {
        let mut pivot = r[j * n + j];
        for k in 0..j {
            pivot -= r[k * n + j] * r[k * n + j];
        }
        if !pivot.is_finite() || pivot <= 0.0 || pivot <= PIVOT_RTOL * diag[j] {
            return Err(Error::SingularSystem);
        }
        let rjj = pivot.sqrt();
        r[j * n + j] = rjj;
        for c in j + 1..n {
            let mut s = r[j * n + c];
            for k in 0..j {
                s -= r[k * n + j] * r[k * n + c];
            }
            r[j * n + c] = s / rjj;
        }
    }
    // R^T y = b
    let mut y = b.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= r[k * n + i] * y[k];
        }
        y[i] = s / r[i * n + i];
    }
    // R x = y
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= r[i * n + k] * y[k];
        }
        y[i] = s / r[i * n + i];
    }
    Ok(y)
}
