use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::CMat;
use crate::spectrum::{chain_spectrum, lagrangian_from_moduli};
use crate::system::DiscreteSystem;

/// Symmetric matrix of pair Lagrangians `L(x_i, x_j)`, diagonal included.
pub fn lagrangian_matrix(system: &DiscreteSystem) -> Result<DMatrix<f64>> {
    let count = system.len();
    let (n, kappa) = (system.n(), system.kappa());
    let rows: Vec<Vec<f64>> = (0..count)
        .into_par_iter()
        .map(|i| {
            (i..count)
                .map(|j| {
                    chain_spectrum(system.point(i), system.point(j), n, 1e-9)
                        .map(|s| lagrangian_from_moduli(&s.moduli(), n, kappa))
                        .map_err(|e| e.at_pair(i, j))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = DMatrix::zeros(count, count);
    for (i, row) in rows.iter().enumerate() {
        for (offset, &value) in row.iter().enumerate() {
            out[(i, i + offset)] = value;
            out[(i + offset, i)] = value;
        }
    }
    Ok(out)
}

/// `Σ_ij ρ_i ρ_j L(x_i, x_j)`.
pub fn causal_action(system: &DiscreteSystem) -> Result<f64> {
    let lag = lagrangian_matrix(system)?;
    Ok(weighted_double_sum(&lag, system.weights()))
}

pub(crate) fn weighted_double_sum(lag: &DMatrix<f64>, weights: &[f64]) -> f64 {
    let mut total = 0.0;
    for (i, wi) in weights.iter().enumerate() {
        let mut row = 0.0;
        for (j, wj) in weights.iter().enumerate() {
            row += wj * lag[(i, j)];
        }
        total += wi * row;
    }
    total
}

/// `Σ_j ρ_j L(z, x_j)`.
pub fn potential(z: &CMat, system: &DiscreteSystem) -> Result<f64> {
    let (n, kappa) = (system.n(), system.kappa());
    let mut total = 0.0;
    for (j, w) in system.weights().iter().enumerate() {
        let spec = chain_spectrum(z, system.point(j), n, 1e-9)?;
        total += w * lagrangian_from_moduli(&spec.moduli(), n, kappa);
    }
    Ok(total)
}

/// The Euler-Lagrange function `ℓ(z) = Σ_j ρ_j L(z, x_j) − 𝔯 (tr z − 1) − 𝔰`.
pub fn ell(z: &CMat, system: &DiscreteSystem) -> Result<f64> {
    let tr = crate::linalg::trace(z).re;
    Ok(potential(z, system)? - system.r() * (tr - 1.0) - system.s())
}

/// `S − 2𝔯 Σ_i ρ_i tr(x_i)`.
pub fn effective_action(system: &DiscreteSystem) -> Result<f64> {
    let report = constraint_report(system);
    Ok(causal_action(system)? - 2.0 * system.r() * report.trace)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub volume: f64,
    pub trace: f64,
    pub local_traces: Vec<f64>,
}

pub fn constraint_report(system: &DiscreteSystem) -> ConstraintReport {
    let local_traces: Vec<f64> = system.points().iter().map(|p| p.trace()).collect();
    let volume = system.weights().iter().sum();
    let trace = system.weights().iter().zip(&local_traces).map(|(w, t)| w * t).sum();
    ConstraintReport { volume, trace, local_traces }
}

/// Lagrange parameters for which ℓ vanishes on average over the support and
/// is stationary under rescaling of the points: `𝔯 = 2S / Σρ tr x`,
/// `𝔰 = S − 𝔯 (Σρ tr x − 1)`.
pub fn fit_lagrange_parameters(system: &DiscreteSystem) -> Result<(f64, f64)> {
    let action = causal_action(system)?;
    let trace = constraint_report(system).trace;
    let r = if trace.abs() > 0.0 { 2.0 * action / trace } else { 0.0 };
    Ok((r, action - r * (trace - 1.0)))
}

/// `ℓ(x_i)` at every point of the support.
pub fn el_values(system: &DiscreteSystem) -> Result<Vec<f64>> {
    let lag = lagrangian_matrix(system)?;
    let w = system.weights();
    Ok((0..system.len())
        .map(|i| {
            let pot: f64 = (0..system.len()).map(|j| w[j] * lag[(i, j)]).sum();
            pot - system.r() * (system.points()[i].trace() - 1.0) - system.s()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::point::PointOperator;

    fn single(x: PointOperator, kappa: f64) -> DiscreteSystem {
        DiscreteSystem::new(1, kappa, vec![x], vec![1.0], vec![0.0]).unwrap()
    }

    #[test]
    fn single_projector_action() {
        let system = single(PointOperator::diagonal(&[1.0, 0.0]), 0.1);
        assert!((causal_action(&system).unwrap() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn split_point_has_same_action() {
        let x = PointOperator::diagonal(&[2.0, -1.0]);
        let one = single(x.clone(), 0.1);
        let two = DiscreteSystem::new(1, 0.1, vec![x.clone(), x], vec![0.5, 0.5], vec![0.0, 1.0]).unwrap();
        assert!((causal_action(&one).unwrap() - causal_action(&two).unwrap()).abs() < 1e-13);
    }

    #[test]
    fn zero_points_have_zero_action() {
        let system =
            DiscreteSystem::new(1, 0.1, vec![PointOperator::zero(2), PointOperator::zero(2)], vec![0.25, 0.75], vec![0.0, 1.0])
                .unwrap();
        assert_eq!(causal_action(&system).unwrap(), 0.0);
        assert_eq!(ell(&CMat::zeros(2, 2), &system).unwrap(), 0.0);
    }

    #[test]
    fn constraints_of_single_point() {
        let report = constraint_report(&single(PointOperator::diagonal(&[2.0, -1.0]), 0.1));
        assert_eq!(report.volume, 1.0);
        assert_eq!(report.trace, 1.0);
        assert_eq!(report.local_traces, vec![1.0]);
    }

    #[test]
    fn fitted_parameters_make_ell_vanish_for_one_point() {
        let system = single(PointOperator::diagonal(&[1.0, 0.0]), 0.1);
        let (r, s) = fit_lagrange_parameters(&system).unwrap();
        assert!((r - 1.2).abs() < 1e-14 && (s - 0.6).abs() < 1e-14);
        let system = system.with_lagrange_parameters(r, s);
        assert!(el_values(&system).unwrap()[0].abs() < 1e-14);
    }
}
