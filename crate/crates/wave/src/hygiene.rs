use cfs_core::DiscreteSystem;
use cfs_spin::SpinFrame;
use cfs_variations::QKernel;
use serde::{Deserialize, Serialize};

/// Uniform L¹ bound and finite time range of a Q kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HygieneReport {
    /// `Σ_j ρ_j ‖Q(x_i,x_j)‖` for every point.
    pub row_sums: Vec<f64>,
    pub sup: f64,
    pub bound: f64,
    /// Points whose row sum is not below `bound`.
    pub bound_violations: Vec<usize>,
    /// Pairs with `|t_i − t_j| > δ` whose block norm exceeds
    /// `range_tol · max‖Q‖`.
    pub range_violations: Vec<(usize, usize)>,
    /// Largest block norm outside the time range, relative to the largest block norm.
    pub out_of_range: f64,
    pub passed: bool,
}

/// Checks `Σ_j ρ_j ‖Q(x_i,x_j)‖ < bound` for all `i` and `‖Q(x_i,x_j)‖ = 0`
/// (within `range_tol`) whenever `|t_i − t_j| > delta`. Norms are operator
/// norms with respect to the spin scalar products.
pub fn kernel_hygiene(
    system: &DiscreteSystem,
    frame: &SpinFrame,
    q: &QKernel,
    delta: f64,
    bound: f64,
    range_tol: f64,
) -> HygieneReport {
    let count = system.len();
    let w = system.weights();
    let times = system.times();
    let norms: Vec<Vec<f64>> = (0..count).map(|i| (0..count).map(|j| q.block_norm(frame, i, j)).collect()).collect();
    let largest = norms.iter().flatten().fold(0.0f64, |m, &v| m.max(v));
    let row_sums: Vec<f64> = norms.iter().map(|row| row.iter().zip(w).map(|(n, wj)| wj * n).sum()).collect();
    let sup = row_sums.iter().fold(0.0f64, |m, &v| m.max(v));
    let bound_violations = (0..count).filter(|&i| row_sums[i] >= bound).collect::<Vec<_>>();
    let mut range_violations = Vec::new();
    let mut out_of_range: f64 = 0.0;
    for i in 0..count {
        for j in 0..count {
            if (times[i] - times[j]).abs() > delta {
                let rel = if largest > 0.0 { norms[i][j] / largest } else { 0.0 };
                out_of_range = out_of_range.max(rel);
                if rel > range_tol {
                    range_violations.push((i, j));
                }
            }
        }
    }
    let passed = bound_violations.is_empty() && range_violations.is_empty();
    HygieneReport { row_sums, sup, bound, bound_violations, range_violations, out_of_range, passed }
}
