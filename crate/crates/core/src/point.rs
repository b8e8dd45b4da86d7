use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::linalg::{self, CMat, HermitianEigen};

/// A spacetime point: a Hermitian operator on the finite Hilbert space with
/// at most `n` positive and at most `n` negative eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct PointOperator {
    matrix: CMat,
}

/// Numbers of positive and negative eigenvalues beyond the zero threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub positive: usize,
    pub negative: usize,
}

impl Signature {
    pub fn rank(&self) -> usize {
        self.positive + self.negative
    }
}

impl PointOperator {
    /// Validates Hermiticity and the signature bound for spin dimension `n`.
    ///
    /// ```
    /// use cfs_core::{linalg::{c, CMat}, PointOperator};
    /// let x = CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
    /// assert!(PointOperator::new(x, 1).is_ok());
    /// let both_positive = CMat::identity(2, 2).scale(0.5);
    /// assert!(PointOperator::new(both_positive, 1).is_err());
    /// ```
    pub fn new(matrix: CMat, n: usize) -> Result<Self> {
        Self::with_tolerance(matrix, n, 1e-9)
    }

    pub fn with_tolerance(matrix: CMat, n: usize, sigma_rel: f64) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(CoreError::Dimension(format!(
                "point operator must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let scale = linalg::max_abs(&matrix);
        let resid = linalg::hermitian_residual(&matrix);
        if resid > 1e-12 * scale {
            return Err(CoreError::NotHermitian(resid / scale.max(f64::MIN_POSITIVE)));
        }
        let point = PointOperator { matrix: linalg::hermitian_part(&matrix) };
        let sig = point.signature(sigma_rel);
        if sig.positive > n || sig.negative > n {
            return Err(CoreError::Signature { pos: sig.positive, neg: sig.negative, n });
        }
        Ok(point)
    }

    /// Wraps a matrix without any checks; the Hermitian part is stored.
    pub fn from_matrix_unchecked(matrix: CMat) -> Self {
        PointOperator { matrix: linalg::hermitian_part(&matrix) }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let dim = values.len();
        let mut m = CMat::zeros(dim, dim);
        for (k, &v) in values.iter().enumerate() {
            m[(k, k)] = linalg::c(v, 0.0);
        }
        PointOperator { matrix: m }
    }

    pub fn zero(dim: usize) -> Self {
        PointOperator { matrix: CMat::zeros(dim, dim) }
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn eigen(&self) -> HermitianEigen {
        linalg::hermitian_eigen(&self.matrix)
    }

    /// Operator norm, the largest eigenvalue modulus.
    pub fn norm(&self) -> f64 {
        self.eigen().values.iter().fold(0.0, |a: f64, v| a.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.matrix).re
    }

    pub fn signature(&self, sigma_rel: f64) -> Signature {
        let eig = self.eigen();
        let norm = eig.values.iter().fold(0.0, |a: f64, v| a.max(v.abs()));
        let cut = sigma_rel * norm;
        Signature {
            positive: eig.values.iter().filter(|&&v| v > cut).count(),
            negative: eig.values.iter().filter(|&&v| v < -cut).count(),
        }
    }
}

impl AsRef<CMat> for PointOperator {
    fn as_ref(&self) -> &CMat {
        &self.matrix
    }
}
