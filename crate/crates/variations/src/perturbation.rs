use cfs_core::linalg::{self, CMat, C64};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VariationError};

/// Perturbation series of the eigenvalues of `A0 + ε dA` up to second order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenPerturbation {
    pub values: Vec<C64>,
    /// `λ¹_i = Tr(Λ_i dA)`; empty when the spectrum is degenerate.
    pub first: Vec<C64>,
    /// Coefficient of `ε²`; empty unless order 2 was requested and reachable.
    pub second: Vec<C64>,
    /// Spectral projectors `Λ_i = r_i l_i^*`, skipped in the serialized form.
    #[serde(skip)]
    pub projectors: Vec<CMat>,
    /// Order actually computed.
    pub order: usize,
    pub degenerate: bool,
}

impl EigenPerturbation {
    /// Truncated series `λ⁰ + ε λ¹ + ε² λ²` at the computed order.
    pub fn series(&self, eps: f64) -> Vec<C64> {
        (0..self.values.len())
            .map(|i| {
                let mut v = self.values[i];
                if self.order >= 1 {
                    v += self.first[i] * eps;
                }
                if self.order >= 2 {
                    v += self.second[i] * eps * eps;
                }
                v
            })
            .collect()
    }

    /// `‖Σ Λ_i − 1‖_max`.
    pub fn completeness_residual(&self) -> f64 {
        let Some(first) = self.projectors.first() else { return 0.0 };
        let dim = first.nrows();
        let mut sum = CMat::zeros(dim, dim);
        for p in &self.projectors {
            sum += p;
        }
        linalg::max_abs(&(sum - CMat::identity(dim, dim)))
    }
}

/// Smallest distance between two eigenvalues, relative to the largest modulus.
pub fn relative_gap(values: &[C64]) -> f64 {
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.norm()));
    if scale == 0.0 {
        return if values.len() > 1 { 0.0 } else { f64::INFINITY };
    }
    let mut gap = f64::INFINITY;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            gap = gap.min((values[i] - values[j]).norm());
        }
    }
    gap / scale
}

/// Rayleigh–Schrödinger coefficients for the non-Hermitian matrix `A0 + ε dA`,
/// using bi-orthogonal left and right eigenvectors of `A0`.
///
/// A relative eigenvalue gap below `degen_tol` limits the result to order 0.
pub fn eigen_perturbation(a0: &CMat, da: &CMat, order: usize, degen_tol: f64) -> Result<EigenPerturbation> {
    if a0.shape() != da.shape() || a0.nrows() != a0.ncols() {
        return Err(VariationError::Dimension(format!("A0 is {:?}, dA is {:?}", a0.shape(), da.shape())));
    }
    let eig = linalg::general_eigen(a0).ok_or(VariationError::EigenFailure)?;
    let dim = eig.values.len();
    let projectors = (0..dim).map(|i| eig.projector(i)).collect();
    let degenerate = relative_gap(&eig.values) < degen_tol;
    let order = if degenerate { 0 } else { order.min(2) };
    let mut first = Vec::new();
    let mut second = Vec::new();
    if order >= 1 {
        let elements = CMat::from_fn(dim, dim, |i, j| eig.matrix_element(i, da, j));
        first = (0..dim).map(|i| elements[(i, i)]).collect();
        if order >= 2 {
            second = (0..dim)
                .map(|k| {
                    (0..dim)
                        .filter(|&m| m != k)
                        .map(|m| elements[(k, m)] * elements[(m, k)] / (eig.values[k] - eig.values[m]))
                        .sum()
                })
                .collect();
        }
    }
    Ok(EigenPerturbation { values: eig.values, first, second, projectors, order, degenerate })
}

/// First and second derivative of `|λ(τ)|` along `λ + τ δλ + ½ τ² δ²λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsVariation {
    pub first: f64,
    pub second: f64,
    /// `(|δλ|² − first²)/|λ|`, the non-negative part of `second`.
    pub convexity: f64,
}

pub fn abs_variation(lambda: C64, dlambda: C64, d2lambda: C64, degen_tol: f64) -> Result<AbsVariation> {
    let modulus = lambda.norm();
    if modulus <= degen_tol {
        return Err(VariationError::NonDifferentiable(modulus));
    }
    let first = (lambda.conj() * dlambda).re / modulus;
    let convexity = ((dlambda.norm_sqr() - first * first) / modulus).max(0.0);
    let second = (lambda.conj() * d2lambda).re / modulus + convexity;
    Ok(AbsVariation { first, second, convexity })
}
