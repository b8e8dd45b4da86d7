use cfs_core::linalg::CMat;
use cfs_core::random::normalize_weights;
use cfs_core::{fit_lagrange_parameters, random_point, DiscreteSystem, PointOperator, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Systems whose kernel has finite time range by construction.
///
/// The Hilbert space is `H_0 ⊕ … ⊕ H_slots`, each block of dimension
/// `block_dim`. A point in time slot `k` (time `t = k`) is supported on
/// `H_k ⊕ H_{k+1}`, so `P(x,y) = 0` as soon as the slots differ by two or more.
/// The time range is therefore `δ = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub slots: usize,
    pub points_per_slot: usize,
    pub block_dim: usize,
    pub n: usize,
    pub kappa: f64,
    pub seed: u64,
    /// Positive and negative eigenvalues of every point.
    pub signature: (usize, usize),
}

impl ChainSpec {
    pub fn new(slots: usize, points_per_slot: usize, seed: u64) -> Self {
        ChainSpec { slots, points_per_slot, block_dim: 1, n: 1, kappa: 0.2, seed, signature: (1, 0) }
    }

    pub fn with_signature(mut self, positive: usize, negative: usize) -> Self {
        self.signature = (positive, negative);
        self
    }

    pub fn with_block_dim(mut self, block_dim: usize) -> Self {
        self.block_dim = block_dim;
        self
    }

    pub fn f(&self) -> usize {
        (self.slots + 1) * self.block_dim
    }
}

/// Seeded chain system with fitted Lagrange parameters.
pub fn chain_system(spec: &ChainSpec) -> Result<DiscreteSystem> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let f = spec.f();
    let local = 2 * spec.block_dim;
    let (positive, negative) = spec.signature;
    let mut points = Vec::new();
    let mut times = Vec::new();
    for slot in 0..spec.slots {
        for _ in 0..spec.points_per_slot {
            let small = random_point(&mut rng, local, positive, negative).into_matrix();
            let mut x = CMat::zeros(f, f);
            let at = slot * spec.block_dim;
            x.view_mut((at, at), (local, local)).copy_from(&small);
            points.push(PointOperator::from_matrix_unchecked(x));
            times.push(slot as f64);
        }
    }
    let mut weights: Vec<f64> = (0..points.len()).map(|_| rng.random_range(0.5..1.5)).collect();
    normalize_weights(&mut weights);
    let system = DiscreteSystem::new(spec.n, spec.kappa, points, weights, times)?;
    let (r, s) = fit_lagrange_parameters(&system)?;
    Ok(system.with_lagrange_parameters(r, s))
}
