use cfs_core::linalg::{self, c, CMat, CVec, GeneralEigen, C64};
use cfs_core::spectrum::lagrangian_from_moduli;
use cfs_core::{DiscreteSystem, Tolerances};
use cfs_spin::{FermionicKernel, SpinFrame};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::perturbation::relative_gap;

/// Lagrangian of the pair `(x_i, x_j)` as a function of the kernel block
/// `P(x_i, x_j)` alone; `P(x_j, x_i)` is its spin adjoint.
pub fn pair_lagrangian(frame: &SpinFrame, i: usize, j: usize, p: &CMat, n: usize, kappa: f64) -> f64 {
    if p.nrows() == 0 || p.ncols() == 0 {
        return 0.0;
    }
    let a = p * frame.spin_adjoint(i, j, p);
    let values = linalg::eigenvalues(&a).unwrap_or_default();
    let mut moduli: Vec<f64> = values.iter().map(|v| v.norm()).collect();
    moduli.sort_by(|a, b| b.total_cmp(a));
    moduli.truncate(2 * n);
    moduli.resize(2 * n, 0.0);
    lagrangian_from_moduli(&moduli, n, kappa)
}

/// Eigen-decomposition of a closed chain prepared for differentiation.
#[derive(Debug, Clone)]
pub(crate) struct ChainData {
    pub eig: GeneralEigen,
    /// Indices of the eigenvalues that are not structurally zero.
    pub active: Vec<usize>,
    /// `∂L/∂|λ_k|` for every eigenvalue index (zero for inactive ones).
    pub slopes: Vec<f64>,
}

impl ChainData {
    /// `None` if the spectrum is degenerate or has more zero eigenvalues than
    /// the rank deficit `dim_x − min(dim_x, dim_y)` explains.
    pub fn new(a: &CMat, dim_y: usize, n: usize, kappa: f64, degen_tol: f64) -> Option<Self> {
        let eig = linalg::general_eigen(a)?;
        let dim = eig.values.len();
        let scale = eig.values.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        if scale == 0.0 {
            return None;
        }
        let active: Vec<usize> = (0..dim).filter(|&k| eig.values[k].norm() > degen_tol * scale).collect();
        if dim - active.len() != dim - dim.min(dim_y) {
            return None;
        }
        let active_values: Vec<C64> = active.iter().map(|&k| eig.values[k]).collect();
        if relative_gap(&active_values) < degen_tol {
            return None;
        }
        let sum: f64 = active_values.iter().map(|v| v.norm()).sum();
        let mut slopes = vec![0.0; dim];
        for &k in &active {
            slopes[k] = 2.0 * eig.values[k].norm() - sum / n as f64 + 2.0 * kappa * sum;
        }
        Some(ChainData { eig, active, slopes })
    }
}

/// How a block of the Q kernel was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QMethod {
    /// `P(x,y) = 0`; the Lagrangian is quartic there and `Q` vanishes.
    Zero,
    Spectral,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QMode {
    /// Spectral formula wherever the closed chain is non-degenerate.
    Auto,
    /// Finite-difference oracle for every pair.
    FiniteDifference,
}

/// Blocks `Q(x_i, x_j): S_{x_j} → S_{x_i}` for all pairs of points.
#[derive(Debug, Clone)]
pub struct QKernel {
    blocks: Vec<Vec<CMat>>,
    methods: Vec<Vec<QMethod>>,
}

impl QKernel {
    pub fn get(&self, i: usize, j: usize) -> &CMat {
        &self.blocks[i][j]
    }

    pub fn method(&self, i: usize, j: usize) -> QMethod {
        self.methods[i][j]
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Copy with every block `Q(x_i,x_j)` with `|t_i − t_j| > delta` set to zero.
    /// The result stays symmetric.
    pub fn windowed(&self, times: &[f64], delta: f64) -> QKernel {
        let mut out = self.clone();
        for i in 0..self.len() {
            for j in 0..self.len() {
                if (times[i] - times[j]).abs() > delta {
                    let (r, c) = out.blocks[i][j].shape();
                    out.blocks[i][j] = CMat::zeros(r, c);
                    out.methods[i][j] = QMethod::Zero;
                }
            }
        }
        out
    }

    /// Operator norm of `Q(x_i,x_j)` with respect to the spin scalar norms,
    /// `‖|S_x|^{1/2} Q |S_y|^{-1/2}‖`.
    pub fn block_norm(&self, frame: &SpinFrame, i: usize, j: usize) -> f64 {
        let q = &self.blocks[i][j];
        if q.is_empty() {
            return 0.0;
        }
        let left: Vec<f64> = frame.basis(i).eigenvalues.iter().map(|m| m.abs().sqrt()).collect();
        let right: Vec<f64> = frame.basis(j).eigenvalues.iter().map(|m| 1.0 / m.abs().sqrt()).collect();
        let scaled = CMat::from_fn(q.nrows(), q.ncols(), |r, col| q[(r, col)] * (left[r] * right[col]));
        linalg::operator_norm(&scaled)
    }

    /// Pairs whose closed chain was too degenerate for the spectral formula.
    pub fn flagged_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, row) in self.methods.iter().enumerate() {
            for (j, m) in row.iter().enumerate() {
                if *m == QMethod::FiniteDifference {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// `max |Q(x_j,x_i) − Q(x_i,x_j)^*|` relative to the largest block entry.
    pub fn symmetry_residual(&self, frame: &SpinFrame) -> f64 {
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..self.len() {
            for j in 0..self.len() {
                let q = &self.blocks[i][j];
                if q.is_empty() {
                    continue;
                }
                scale = scale.max(linalg::max_abs(q));
                let adj = frame.spin_adjoint(i, j, q);
                worst = worst.max(linalg::max_abs(&(&self.blocks[j][i] - adj)));
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    /// `(Q φ)(x_i) = Σ_j ρ_j Q(x_i,x_j) φ(x_j)` for matrices with any number of columns.
    pub fn apply(&self, weights: &[f64], phi: &[CMat]) -> Vec<CMat> {
        (0..self.len())
            .into_par_iter()
            .map(|i| {
                let cols = phi.first().map_or(0, |p| p.ncols());
                let mut acc = CMat::zeros(self.blocks[i][i].nrows(), cols);
                for (j, p) in phi.iter().enumerate() {
                    acc += &self.blocks[i][j] * p * c(weights[j], 0.0);
                }
                acc
            })
            .collect()
    }

    /// Same as [`QKernel::apply`] for wave functions given as coordinate vectors.
    pub fn apply_vectors(&self, weights: &[f64], phi: &[CVec]) -> Vec<CVec> {
        let mats: Vec<CMat> = phi.iter().map(|v| CMat::from_column_slice(v.len(), 1, v.as_slice())).collect();
        self.apply(weights, &mats).into_iter().map(|m| m.column(0).into_owned()).collect()
    }
}

/// Wirtinger finite differences of the pair Lagrangian with respect to the
/// entries of `P(x_i, x_j)`, converted to `Q = S_x^{-1} W S_y`.
pub fn q_block_fd(frame: &SpinFrame, i: usize, j: usize, p: &CMat, n: usize, kappa: f64, fd_step: f64) -> CMat {
    let (rows, cols) = p.shape();
    let h = fd_step * linalg::max_abs(p).max(f64::MIN_POSITIVE);
    let mut w = CMat::zeros(rows, cols);
    for a in 0..rows {
        for b in 0..cols {
            let mut partial = [0.0; 2];
            for (slot, dir) in [c(h, 0.0), c(0.0, h)].into_iter().enumerate() {
                let mut plus = p.clone();
                plus[(a, b)] += dir;
                let mut minus = p.clone();
                minus[(a, b)] -= dir;
                partial[slot] =
                    (pair_lagrangian(frame, i, j, &plus, n, kappa) - pair_lagrangian(frame, i, j, &minus, n, kappa)) / (2.0 * h);
            }
            w[(a, b)] = c(0.5 * partial[0], 0.5 * partial[1]);
        }
    }
    frame.basis(i).metric_inverse() * w * frame.basis(j).metric()
}

/// Spectral formula `Q = ½ (M + M^*) P` with
/// `M = Σ_k ∂L/∂|λ_k| · (conj λ_k/|λ_k|) r_k l_k^*`.
/// `None` if the closed chain is degenerate.
pub fn q_block_spectral(frame: &SpinFrame, i: usize, j: usize, p: &CMat, n: usize, kappa: f64, degen_tol: f64) -> Option<CMat> {
    let a = p * frame.spin_adjoint(i, j, p);
    let chain = ChainData::new(&a, p.ncols(), n, kappa, degen_tol)?;
    let dim = a.nrows();
    let mut m = CMat::zeros(dim, dim);
    for &k in &chain.active {
        let lam = chain.eig.values[k];
        let phase = lam.conj() / lam.norm();
        m += chain.eig.projector(k) * (phase * chain.slopes[k]);
    }
    let sym = (&m + frame.spin_adjoint(i, i, &m)) * c(0.5, 0.0);
    Some(sym * p)
}

/// Builds the Q kernel of the system's own fermionic kernel.
pub fn q_kernel(system: &DiscreteSystem, frame: &SpinFrame, kernel: &FermionicKernel, tol: &Tolerances, mode: QMode) -> QKernel {
    let count = system.len();
    let (n, kappa) = (system.n(), system.kappa());
    let rows: Vec<(Vec<CMat>, Vec<QMethod>)> = (0..count)
        .into_par_iter()
        .map(|i| {
            (0..count)
                .map(|j| {
                    let p = kernel.get(i, j);
                    if p.is_empty() || linalg::max_abs(p) == 0.0 {
                        return (CMat::zeros(p.nrows(), p.ncols()), QMethod::Zero);
                    }
                    if mode == QMode::Auto {
                        if let Some(q) = q_block_spectral(frame, i, j, p, n, kappa, tol.degen_tol) {
                            return (q, QMethod::Spectral);
                        }
                    }
                    (q_block_fd(frame, i, j, p, n, kappa, tol.fd_step), QMethod::FiniteDifference)
                })
                .unzip()
        })
        .collect();
    let (blocks, methods) = rows.into_iter().unzip();
    QKernel { blocks, methods }
}

/// Largest relative disagreement between the two routes over the pairs where
/// the spectral formula applies.
pub fn q_route_agreement(system: &DiscreteSystem, frame: &SpinFrame, kernel: &FermionicKernel, tol: &Tolerances) -> f64 {
    let count = system.len();
    let (n, kappa) = (system.n(), system.kappa());
    (0..count * count)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / count, idx % count);
            let p = kernel.get(i, j);
            if p.is_empty() || linalg::max_abs(p) == 0.0 {
                return 0.0;
            }
            match q_block_spectral(frame, i, j, p, n, kappa, tol.degen_tol) {
                Some(fast) => {
                    let slow = q_block_fd(frame, i, j, p, n, kappa, tol.fd_step);
                    linalg::max_abs(&(&fast - &slow)) / linalg::max_abs(&slow).max(f64::MIN_POSITIVE)
                }
                None => 0.0,
            }
        })
        .reduce(|| 0.0, f64::max)
}

/// `2 Re Tr(Q δP^*)`: the first variation of the pair Lagrangian.
pub fn first_variation(frame: &SpinFrame, i: usize, j: usize, q: &CMat, dp: &CMat) -> f64 {
    if q.is_empty() {
        return 0.0;
    }
    2.0 * linalg::trace(&(q * frame.spin_adjoint(i, j, dp))).re
}
