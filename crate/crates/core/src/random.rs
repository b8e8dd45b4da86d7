//! Seeded generators for admissible point operators and systems.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{self, c, CMat, CVec};
use crate::point::PointOperator;
use crate::system::DiscreteSystem;

/// Unit-trace point `U diag(μ) U^*` with `positive` positive and `negative`
/// negative eigenvalues and a Haar-random frame.
pub fn random_point<R: Rng + ?Sized>(rng: &mut R, f: usize, positive: usize, negative: usize) -> PointOperator {
    assert!(positive + negative <= f, "rank exceeds the Hilbert dimension");
    assert!(positive > 0, "unit trace needs a positive eigenvalue");
    loop {
        let mut mu = vec![0.0; f];
        for v in mu.iter_mut().take(positive) {
            *v = rng.random_range(0.5..1.5);
        }
        for v in mu.iter_mut().skip(positive).take(negative) {
            *v = -rng.random_range(0.1..0.6);
        }
        let total: f64 = mu.iter().sum();
        if total < 0.2 {
            continue;
        }
        let u = linalg::random_unitary(rng, f);
        let d = CMat::from_diagonal(&CVec::from_iterator(f, mu.iter().map(|v| c(v / total, 0.0))));
        return PointOperator::from_matrix_unchecked(&u * d * u.adjoint());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomSystemSpec {
    pub points: usize,
    pub f: usize,
    pub n: usize,
    pub kappa: f64,
    pub seed: u64,
    /// Numbers of positive and negative eigenvalues of every point; `None`
    /// means the maximal admissible inertia.
    #[serde(default)]
    pub signature: Option<(usize, usize)>,
}

impl RandomSystemSpec {
    pub fn new(points: usize, f: usize, n: usize, kappa: f64, seed: u64) -> Self {
        RandomSystemSpec { points, f, n, kappa, seed, signature: None }
    }

    pub fn with_signature(mut self, positive: usize, negative: usize) -> Self {
        self.signature = Some((positive, negative));
        self
    }
}

/// Random system with weights drawn uniformly from [0.5, 1.5] and
/// normalized, and times `t_i = i`.
pub fn random_system(spec: &RandomSystemSpec) -> Result<DiscreteSystem> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (positive, negative) = spec.signature.unwrap_or_else(|| {
        let positive = spec.n.min(spec.f);
        (positive, spec.n.min(spec.f - positive))
    });
    let points = (0..spec.points).map(|_| random_point(&mut rng, spec.f, positive, negative)).collect();
    let raw: Vec<f64> = (0..spec.points).map(|_| rng.random_range(0.5..1.5)).collect();
    let total: f64 = raw.iter().sum();
    let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    normalize_weights(&mut weights);
    let times = (0..spec.points).map(|i| i as f64).collect();
    DiscreteSystem::new(spec.n, spec.kappa, points, weights, times)
}

/// Rescales weights so that their floating-point sum is 1 up to one ulp.
pub fn normalize_weights(weights: &mut [f64]) {
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
    let residual = 1.0 - weights.iter().sum::<f64>();
    if let Some(last) = weights.last_mut() {
        *last += residual;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_points_are_admissible() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let x = random_point(&mut rng, 5, 2, 2);
            assert!((x.trace() - 1.0).abs() < 1e-12);
            let sig = x.signature(1e-9);
            assert_eq!((sig.positive, sig.negative), (2, 2));
        }
    }

    #[test]
    fn random_system_is_deterministic() {
        let spec = RandomSystemSpec::new(4, 3, 1, 0.1, 11);
        assert_eq!(random_system(&spec).unwrap(), random_system(&spec).unwrap());
        let volume: f64 = random_system(&spec).unwrap().weights().iter().sum();
        assert!((volume - 1.0).abs() <= 1e-15);
    }
}
