use cfs_core::linalg::{self, CMat, C64};
use cfs_core::DiscreteSystem;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::frame::SpinFrame;

/// All blocks `P(x_i, x_j): S_{x_j} → S_{x_i}` in spin coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct FermionicKernel {
    blocks: Vec<Vec<CMat>>,
}

impl FermionicKernel {
    pub fn new(frame: &SpinFrame) -> Self {
        let count = frame.len();
        let psi: Vec<CMat> = frame.bases.iter().map(|b| b.psi()).collect();
        let blocks =
            (0..count).into_par_iter().map(|i| (0..count).map(|j| frame.kernel_from(&psi[i], j, &psi[j])).collect()).collect();
        FermionicKernel { blocks }
    }

    /// Kernel built from arbitrary wave evaluation matrices `Ψ(x_i)`.
    pub fn from_psi(frame: &SpinFrame, psi: &[CMat]) -> Self {
        let count = frame.len();
        let blocks =
            (0..count).into_par_iter().map(|i| (0..count).map(|j| frame.kernel_from(&psi[i], j, &psi[j])).collect()).collect();
        FermionicKernel { blocks }
    }

    pub fn get(&self, i: usize, j: usize) -> &CMat {
        &self.blocks[i][j]
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Closed chain `A_{x_i x_j} = P(x_i,x_j) P(x_j,x_i)`.
    pub fn closed_chain(&self, i: usize, j: usize) -> CMat {
        &self.blocks[i][j] * &self.blocks[j][i]
    }

    /// `max_ij |P(x_j,x_i) − P(x_i,x_j)^*|` with spin adjoints.
    pub fn symmetry_residual(&self, frame: &SpinFrame) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.len() {
            for j in 0..self.len() {
                let adj = frame.spin_adjoint(i, j, &self.blocks[i][j]);
                if adj.nrows() > 0 && adj.ncols() > 0 {
                    worst = worst.max(linalg::max_abs(&(&self.blocks[j][i] - adj)));
                }
            }
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsospectralityReport {
    pub pair: (usize, usize),
    /// Nonzero eigenvalues of the f×f product `x_i x_j`.
    pub product_spectrum: Vec<C64>,
    /// Nonzero eigenvalues of the closed chain on the spin space.
    pub chain_spectrum: Vec<C64>,
    pub counts_match: bool,
    /// Largest distance after the best matching of the two lists.
    pub mismatch: f64,
}

/// Compares the nonzero spectra of `x_i x_j` and of `A_{x_i x_j}`.
pub fn isospectrality_check(
    system: &DiscreteSystem,
    kernel: &FermionicKernel,
    i: usize,
    j: usize,
    sigma_rel: f64,
) -> IsospectralityReport {
    let x = system.point(i);
    let y = system.point(j);
    let cut = sigma_rel * linalg::operator_norm(x) * linalg::operator_norm(y);
    let nonzero = |m: &CMat| -> Vec<C64> {
        linalg::eigenvalues(m).unwrap_or_default().into_iter().filter(|z| z.norm() > cut.max(1e-300)).collect()
    };
    let product_spectrum = nonzero(&(x * y));
    let chain_spectrum = nonzero(&kernel.closed_chain(i, j));
    let counts_match = product_spectrum.len() == chain_spectrum.len();
    let mismatch = if counts_match { best_matching(&product_spectrum, &chain_spectrum) } else { f64::INFINITY };
    IsospectralityReport { pair: (i, j), product_spectrum, chain_spectrum, counts_match, mismatch }
}

/// Minimal over permutations of the maximal pairwise distance (brute force;
/// lists have at most 2n entries).
fn best_matching(a: &[C64], b: &[C64]) -> f64 {
    fn recurse(a: &[C64], b: &[C64], used: &mut Vec<bool>, k: usize, current: f64, best: &mut f64) {
        if current >= *best {
            return;
        }
        if k == a.len() {
            *best = current;
            return;
        }
        for m in 0..b.len() {
            if !used[m] {
                used[m] = true;
                recurse(a, b, used, k + 1, current.max((a[k] - b[m]).norm()), best);
                used[m] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    recurse(a, b, &mut vec![false; b.len()], 0, 0.0, &mut best);
    if a.is_empty() {
        0.0
    } else {
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use cfs_core::linalg::c;
    use cfs_core::PointOperator;

    #[test]
    fn matching_finds_permutation() {
        let a = [c(1.0, 0.0), c(0.0, 2.0)];
        let b = [c(0.0, 2.0), c(1.0, 1e-9)];
        assert!(best_matching(&a, &b) < 2e-9);
    }

    #[test]
    fn orthogonal_ranges_give_zero_kernel() {
        let x = PointOperator::diagonal(&[1.0, 0.0, 0.0]);
        let y = PointOperator::diagonal(&[0.0, 2.0, -1.0]);
        let system = DiscreteSystem::new(1, 0.1, vec![x, y], vec![0.5, 0.5], vec![0.0, 1.0]).unwrap();
        let frame = SpinFrame::new(&system, 1e-9);
        let kernel = FermionicKernel::new(&frame);
        assert_eq!(linalg::max_abs(kernel.get(0, 1)), 0.0);
        let report = isospectrality_check(&system, &kernel, 0, 1, 1e-9);
        assert!(report.product_spectrum.is_empty() && report.chain_spectrum.is_empty());
        assert_eq!(report.mismatch, 0.0);
    }
}
