use cfs_core::linalg::{self, c, CMat, CVec, C64};
use cfs_core::DiscreteSystem;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpinError {
    #[error("vector is not in the spin space (distance {0:.3e})")]
    NotInSpinSpace(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Orthonormal eigenbasis of the range of one point operator.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinBasis {
    pub index: usize,
    /// `f × d` matrix whose columns span `S_x M`.
    pub vectors: CMat,
    /// Nonzero eigenvalues `μ` belonging to the columns.
    pub eigenvalues: Vec<f64>,
}

impl SpinBasis {
    /// Eigenvectors of `x` with `|μ| > sigma_rel · |x|`.
    pub fn new(index: usize, x: &CMat, sigma_rel: f64) -> Self {
        let eig = linalg::hermitian_eigen(x);
        let norm = eig.values.iter().fold(0.0, |a: f64, v| a.max(v.abs()));
        let keep: Vec<usize> = (0..eig.values.len()).filter(|&k| eig.values[k].abs() > sigma_rel * norm && norm > 0.0).collect();
        let vectors = CMat::from_fn(x.nrows(), keep.len(), |r, col| eig.vectors[(r, keep[col])]);
        let eigenvalues = keep.iter().map(|&k| eig.values[k]).collect();
        SpinBasis { index, vectors, eigenvalues }
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Metric of the spin inner product, `S = −diag(μ)`.
    pub fn metric(&self) -> CMat {
        diag(self.eigenvalues.iter().map(|m| -m))
    }

    /// Metric of the spin scalar product, `diag|μ|`.
    pub fn scalar_metric(&self) -> CMat {
        diag(self.eigenvalues.iter().map(|m| m.abs()))
    }

    /// Euclidean sign operator `s = S^{-1} |S| = −sign(μ)`, so that
    /// `≺u|s v≻ = ⟨⟨u|v⟩⟩`.
    pub fn sign(&self) -> CMat {
        diag(self.eigenvalues.iter().map(|m| -m.signum()))
    }

    pub fn metric_inverse(&self) -> CMat {
        diag(self.eigenvalues.iter().map(|m| -1.0 / m))
    }

    /// Wave evaluation operator `Ψ(x) = E^*`: coordinates of `π_x u`.
    pub fn psi(&self) -> CMat {
        self.vectors.adjoint()
    }

    /// Number of positive and negative directions of the spin inner product.
    pub fn spin_signature(&self) -> (usize, usize) {
        let pos = self.eigenvalues.iter().filter(|m| **m < 0.0).count();
        (pos, self.dim() - pos)
    }

    /// Coordinates of an ambient vector that lies in the spin space.
    pub fn coordinates(&self, u: &CVec) -> Result<CVec, SpinError> {
        let coords = self.vectors.adjoint() * u;
        let dist = (u - &self.vectors * &coords).norm();
        if dist > 1e-10 * u.norm().max(1e-300) && dist > 0.0 {
            return Err(SpinError::NotInSpinSpace(dist));
        }
        Ok(coords)
    }

    pub fn ambient(&self, coords: &CVec) -> CVec {
        &self.vectors * coords
    }
}

fn diag(values: impl Iterator<Item = f64>) -> CMat {
    let v: Vec<C64> = values.map(|x| c(x, 0.0)).collect();
    CMat::from_diagonal(&CVec::from_vec(v))
}

/// Spin bases of all points of a system.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinFrame {
    pub bases: Vec<SpinBasis>,
    /// Offsets of the blocks in the direct sum of spin spaces.
    offsets: Vec<usize>,
}

impl SpinFrame {
    pub fn new(system: &DiscreteSystem, sigma_rel: f64) -> Self {
        let bases: Vec<SpinBasis> = (0..system.len()).map(|i| SpinBasis::new(i, system.point(i), sigma_rel)).collect();
        let mut offsets = Vec::with_capacity(bases.len() + 1);
        let mut acc = 0;
        for b in &bases {
            offsets.push(acc);
            acc += b.dim();
        }
        offsets.push(acc);
        SpinFrame { bases, offsets }
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    pub fn dim(&self, i: usize) -> usize {
        self.bases[i].dim()
    }

    /// Total dimension of the direct sum of all spin spaces.
    pub fn total_dim(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    pub fn offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    pub fn basis(&self, i: usize) -> &SpinBasis {
        &self.bases[i]
    }

    /// Spin adjoint `Ψ^* = Ψ^H S` of a map `Ψ: H → S_x` (coordinates).
    pub fn psi_adjoint(&self, i: usize, psi: &CMat) -> CMat {
        psi.adjoint() * self.bases[i].metric()
    }

    /// Spin adjoint `S_y^{-1} B^H S_x` of a map `B: S_y → S_x`.
    pub fn spin_adjoint(&self, x: usize, y: usize, b: &CMat) -> CMat {
        self.bases[y].metric_inverse() * b.adjoint() * self.bases[x].metric()
    }

    /// `P(x,y) = −Ψ(x) Ψ(y)^*` for arbitrary wave evaluation matrices.
    pub fn kernel_from(&self, psi_x: &CMat, y: usize, psi_y: &CMat) -> CMat {
        -(psi_x * self.psi_adjoint(y, psi_y))
    }

    /// `max |x + Ψ(x)^* Ψ(x)|` relative to `|x|`.
    pub fn local_correlation_residual(&self, system: &DiscreteSystem, i: usize) -> f64 {
        let psi = self.bases[i].psi();
        let x = system.point(i);
        let resid = linalg::max_abs(&(x + self.psi_adjoint(i, &psi) * &psi));
        resid / linalg::max_abs(x).max(1e-300)
    }

    /// Spin inner product `≺a|b≻` of coordinate vectors at point `i`.
    pub fn spin_inner(&self, i: usize, a: &CVec, b: &CVec) -> C64 {
        (a.adjoint() * self.bases[i].metric() * b)[(0, 0)]
    }

    /// Spin scalar product `⟨⟨a|b⟩⟩` of coordinate vectors at point `i`.
    pub fn spin_scalar(&self, i: usize, a: &CVec, b: &CVec) -> C64 {
        (a.adjoint() * self.bases[i].scalar_metric() * b)[(0, 0)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinProducts {
    pub spin_inner: C64,
    pub spin_scalar: C64,
}

/// Spin inner product `−⟨u|x v⟩` and spin scalar product `⟨u| |x| v⟩` of
/// two ambient vectors in the spin space of `x`.
///
/// ```
/// use cfs_core::{linalg::c, PointOperator};
/// let x = PointOperator::diagonal(&[1.0, -1.0]);
/// let e2 = nalgebra::DVector::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0)]);
/// let p = cfs_spin::spin_products(x.matrix(), &e2, &e2, 1e-9).unwrap();
/// assert_eq!((p.spin_inner.re, p.spin_scalar.re), (1.0, 1.0));
/// ```
pub fn spin_products(x: &CMat, u: &CVec, v: &CVec, sigma_rel: f64) -> Result<SpinProducts, SpinError> {
    if u.len() != x.nrows() || v.len() != x.nrows() {
        return Err(SpinError::Dimension("vector length differs from the Hilbert dimension".into()));
    }
    let basis = SpinBasis::new(0, x, sigma_rel);
    let a = basis.coordinates(u)?;
    let b = basis.coordinates(v)?;
    Ok(SpinProducts {
        spin_inner: (a.adjoint() * basis.metric() * &b)[(0, 0)],
        spin_scalar: (a.adjoint() * basis.scalar_metric() * &b)[(0, 0)],
    })
}
