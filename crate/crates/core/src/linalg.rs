//! Dense least squares by Householder QR.
//!
//! Columns are equilibrated to unit norm before factorization; this keeps
//! designs that mix an intercept with covariates of very different
//! magnitude (age in years, head volume in mm³) well conditioned, and makes
//! the rank test scale-free.

use ndarray::{Array2, ArrayView2};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("design matrix has {rows} rows but response has {len} entries")]
    DimensionMismatch { rows: usize, len: usize },
    #[error("design matrix with {rows} rows cannot determine {cols} coefficients")]
    Underdetermined { rows: usize, cols: usize },
    #[error("design matrix is rank deficient at column {column}")]
    RankDeficient { column: usize },
}

#[derive(Debug, Clone)]
pub struct LeastSquares<T> {
    pub coefficients: Vec<T>,
    /// `y - X b`, in input order.
    pub residuals: Vec<T>,
}

/// Minimize `||y - X b||²` over `b`.
pub fn lstsq<T: Scalar>(design: ArrayView2<'_, T>, y: &[T]) -> Result<LeastSquares<T>, LinalgError> {
    let (n, p) = design.dim();
    if n != y.len() {
        return Err(LinalgError::DimensionMismatch { rows: n, len: y.len() });
    }
    if n < p {
        return Err(LinalgError::Underdetermined { rows: n, cols: p });
    }

    let mut a: Array2<T> = design.to_owned();
    let mut scale = vec![T::one(); p];
    for j in 0..p {
        let norm = a.column(j).iter().map(|&v| v * v).sum::<T>().sqrt();
        if !(norm > T::zero()) || !norm.is_finite() {
            return Err(LinalgError::RankDeficient { column: j });
        }
        scale[j] = norm;
        a.column_mut(j).mapv_inplace(|v| v / norm);
    }

    let mut qty: Vec<T> = y.to_vec();
    let tol = T::epsilon().sqrt() * T::of(1e-2);

    for k in 0..p {
        // Householder vector for column k, rows k..n.
        let sigma = (k..n).map(|i| a[[i, k]] * a[[i, k]]).sum::<T>().sqrt();
        if sigma <= tol {
            return Err(LinalgError::RankDeficient { column: k });
        }
        let alpha = if a[[k, k]] > T::zero() { -sigma } else { sigma };
        let mut v: Vec<T> = (k..n).map(|i| a[[i, k]]).collect();
        v[0] = v[0] - alpha;
        let vnorm2: T = v.iter().map(|&x| x * x).sum();
        if vnorm2 > T::zero() {
            let two = T::of(2.0);
            for j in k..p {
                let dot: T = (k..n).map(|i| v[i - k] * a[[i, j]]).sum();
                let f = two * dot / vnorm2;
                for i in k..n {
                    a[[i, j]] = a[[i, j]] - f * v[i - k];
                }
            }
            let dot: T = (k..n).map(|i| v[i - k] * qty[i]).sum();
            let f = two * dot / vnorm2;
            for i in k..n {
                qty[i] = qty[i] - f * v[i - k];
            }
        }
        if a[[k, k]].abs() <= tol {
            return Err(LinalgError::RankDeficient { column: k });
        }
    }

    // Back substitution on the scaled system, then undo the scaling.
    let mut b = vec![T::zero(); p];
    for k in (0..p).rev() {
        let mut acc = qty[k];
        for j in (k + 1)..p {
            acc = acc - a[[k, j]] * b[j];
        }
        b[k] = acc / a[[k, k]];
    }
    for j in 0..p {
        b[j] = b[j] / scale[j];
    }

    let residuals = (0..n)
        .map(|i| {
            let fit: T = (0..p).map(|j| design[[i, j]] * b[j]).sum();
            y[i] - fit
        })
        .collect();
    Ok(LeastSquares { coefficients: b, residuals })
}
