use cfs_core::linalg::{self, c, CMat, CVec};
use cfs_core::spectrum::lagrangian;
use cfs_core::DiscreteSystem;
use cfs_spin::{SpinFrame, WaveFunction};

use crate::error::Result;
use crate::qkernel::QKernel;

/// `max_i ‖(Qψ^u)(x_i) − 𝔯 ψ^u(x_i)‖` in the spin scalar product, for each `u`.
pub fn restricted_el_residual(system: &DiscreteSystem, frame: &SpinFrame, q: &QKernel, vectors: &[CVec]) -> Vec<f64> {
    restricted_el_residual_with(system, frame, q, vectors, system.r())
}

/// [`restricted_el_residual`] with an explicit Lagrange parameter `𝔯`.
pub fn restricted_el_residual_with(
    system: &DiscreteSystem,
    frame: &SpinFrame,
    q: &QKernel,
    vectors: &[CVec],
    r: f64,
) -> Vec<f64> {
    vectors
        .iter()
        .map(|u| {
            let psi = WaveFunction::physical(frame, u);
            let qpsi = q.apply_vectors(system.weights(), &psi.components);
            (0..frame.len())
                .map(|i| {
                    let resid = &qpsi[i] - &psi.components[i] * c(r, 0.0);
                    frame.spin_scalar(i, &resid, &resid).re.max(0.0).sqrt()
                })
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Gradient `D₁L(x,y)` as a Hermitian matrix with
/// `d/dτ L(x + τH, y) = tr(H D₁L)`, by central differences over a Hermitian basis.
pub fn lagrangian_gradient_x(x: &CMat, y: &CMat, n: usize, kappa: f64, fd_step: f64) -> Result<CMat> {
    let dim = x.nrows();
    let mut grad = CMat::zeros(dim, dim);
    if linalg::max_abs(y) == 0.0 {
        return Ok(grad);
    }
    let h = fd_step * linalg::operator_norm(x).max(f64::MIN_POSITIVE);
    for b in linalg::hermitian_basis(dim) {
        let plus = x + &b * c(h, 0.0);
        let minus = x - &b * c(h, 0.0);
        let slope = (lagrangian(&plus, y, n, kappa)? - lagrangian(&minus, y, n, kappa)?) / (2.0 * h);
        grad += b * c(slope, 0.0);
    }
    Ok(grad)
}
