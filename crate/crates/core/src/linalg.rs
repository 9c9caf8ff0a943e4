//! Small dense linear-algebra helpers shared by the field, GP and PCE code.

use nalgebra::{Cholesky, DMatrix, Dyn, SymmetricEigen};

use crate::prelude::*;
use crate::{Error, Result};

/// Relative size of the first jitter step.
pub const JITTER_START: f64 = 1e-12;
/// Number of times the jitter is doubled before giving up.
pub const JITTER_DOUBLINGS: u32 = 8;

/// Cholesky factor of a symmetric matrix, adding diagonal jitter when needed.
///
/// The jitter starts at `1e-12 · mean(diag)` and doubles up to eight times.
/// Returns the factor together with the jitter that was finally added.
pub fn jittered_cholesky(a: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    if let Some(c) = Cholesky::new(a.clone()) {
        return Ok((c, 0.0));
    }
    let n = a.nrows();
    let mean_diag = if n == 0 { 0.0 } else { a.diagonal().sum() / n as f64 };
    let base = JITTER_START * mean_diag.abs().max(f64::MIN_POSITIVE);
    for k in 0..=JITTER_DOUBLINGS {
        let jitter = base * f64::from(1u32 << k);
        let mut b = a.clone();
        for i in 0..n {
            b[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(b) {
            return Ok((c, jitter));
        }
    }
    Err(Error::NotPositiveDefinite)
}

/// Eigenpairs of a symmetric matrix sorted by descending eigenvalue.
///
/// Columns of the returned matrix are the eigenvectors. Ties keep the
/// solver's original order.
pub fn sorted_symmetric_eigen(a: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch { expected: n, got: a.ncols() });
    }
    let eig = SymmetricEigen::try_new(a.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::DecompositionFailed("symmetric eigen solver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap_or(core::cmp::Ordering::Equal).then(i.cmp(&j))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// Solves `L Lᵀ x = b` for a lower-triangular `L` held as a plain matrix.
pub fn cholesky_solve(l: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let mut y = forward_substitute(l, b);
    let n = y.len();
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[(k, i)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    y
}

/// Solves `L y = b` for lower-triangular `L`.
pub fn forward_substitute(l: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    y
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; zero for fewer than two values.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}
