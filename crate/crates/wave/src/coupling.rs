use cfs_core::linalg::{c, CVec};
use cfs_core::{DiscreteSystem, Tolerances};
use cfs_spin::{FermionicKernel, SpinFrame};
use cfs_variations::{coupling_form, QKernel, VariationDirection};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::operator::StripOperator;

/// The `lfe + remainder` part of the second variation along single-wave
/// variations `δΨ = φ u^†/|u|²` supported on the strip, as a real-linear map
/// on the strip space.
#[derive(Debug, Clone)]
pub struct CouplingMap {
    /// Real matrix acting on `(Re ψ, Im ψ)` and returning the Riesz
    /// representative of the gradient with respect to `Re⟨.|.⟩_Ω`.
    pub matrix: DMatrix<f64>,
    /// Spectral radius of `𝒬⁺ ∘ coupling` before normalization.
    pub radius: f64,
}

fn to_real(v: &CVec) -> Vec<f64> {
    v.iter().map(|z| z.re).chain(v.iter().map(|z| z.im)).collect()
}

fn from_real(x: &[f64]) -> CVec {
    let d = x.len() / 2;
    CVec::from_fn(d, |k, _| c(x[k], x[d + k]))
}

impl CouplingMap {
    /// Builds the map by polarization of the quadratic form, then rescales it
    /// so that `𝒬⁺ ∘ coupling` has spectral radius one (unless it vanishes).
    pub fn new(
        system: &DiscreteSystem,
        frame: &SpinFrame,
        kernel: &FermionicKernel,
        q: &QKernel,
        op: &StripOperator,
        u: &CVec,
        tol: &Tolerances,
    ) -> Self {
        let space = &op.space;
        let d = space.dim();
        let form = |x: &[f64]| {
            let psi = space.extend(frame, &from_real(x));
            let dir = VariationDirection::SingleWave { u: u.clone(), phi: psi.components };
            let (lfe, rem) = coupling_form(system, frame, kernel, q, &dir.matrices(), tol);
            lfe + rem
        };
        let unit = |a: usize| {
            let mut x = vec![0.0; 2 * d];
            x[a] = 1.0;
            x
        };
        let diag: Vec<f64> = (0..2 * d).map(|a| form(&unit(a))).collect();
        let mut hess = DMatrix::<f64>::zeros(2 * d, 2 * d);
        for a in 0..2 * d {
            hess[(a, a)] = diag[a];
            for b in 0..a {
                let mut x = unit(a);
                x[b] = 1.0;
                let v = 0.5 * (form(&x) - diag[a] - diag[b]);
                hess[(a, b)] = v;
                hess[(b, a)] = v;
            }
        }
        // Riesz representative: divide the real gradient by the Gram weights
        let mut matrix = hess;
        for a in 0..2 * d {
            let g = space.gram[a % d];
            for b in 0..2 * d {
                matrix[(a, b)] /= g;
            }
        }
        let pinv = DMatrix::from_fn(2 * d, 2 * d, |a, b| {
            let out = op.solve(&from_real(&unit(b)), f64::INFINITY).map(|s| s.psi).unwrap_or_else(|_| CVec::zeros(d));
            to_real(&out)[a]
        });
        let composed = &pinv * &matrix;
        let radius = composed.complex_eigenvalues().iter().fold(0.0f64, |m, z| m.max(z.norm()));
        if radius > 0.0 {
            matrix /= radius;
        }
        CouplingMap { matrix, radius }
    }

    pub fn apply(&self, psi: &CVec) -> CVec {
        let x = DMatrix::from_column_slice(2 * psi.len(), 1, &to_real(psi));
        from_real((&self.matrix * x).as_slice())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingOptions {
    /// Factor multiplying the normalized coupling.
    pub scale: f64,
    pub max_iters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    /// Norms of the effective inhomogeneities, starting with the initial one.
    pub inhomogeneity_norms: Vec<f64>,
    /// Successive quotients of `inhomogeneity_norms`.
    pub ratios: Vec<f64>,
    pub converged: bool,
    pub diverged: bool,
    pub iterations: usize,
    /// Largest component of an inhomogeneity outside the range of `𝒬`, relative to its norm.
    pub max_range_defect: f64,
    /// Spectral radius of the unnormalized `𝒬⁺ ∘ coupling`.
    pub raw_radius: f64,
}

/// Solves `𝒬ψ = φ + scale · coupling(ψ)` by alternating a pseudo-inverse
/// solve with a recomputation of the coupling inhomogeneity.
///
/// Stops when the inhomogeneity norm drops below `couple_tol · ‖φ‖_Ω`, and
/// flags divergence once the norm ratio stays at or above one for three
/// consecutive steps.
pub fn coupling_iteration(
    op: &StripOperator,
    map: &CouplingMap,
    phi: &CVec,
    options: &CouplingOptions,
    tol: &Tolerances,
) -> (Vec<CVec>, CouplingReport) {
    let space = &op.space;
    let size = space.norm(phi);
    let mut norms = vec![size];
    let mut ratios = Vec::new();
    let mut iterates = Vec::new();
    let mut max_defect: f64 = 0.0;
    let solve = |rhs: &CVec, defect: &mut f64| match op.solve(rhs, f64::INFINITY) {
        Ok(s) => {
            *defect = defect.max(s.range_defect);
            s.psi
        }
        Err(_) => CVec::zeros(rhs.len()),
    };
    let mut delta = solve(phi, &mut max_defect);
    let mut psi = delta.clone();
    iterates.push(psi.clone());
    let (mut converged, mut diverged) = (size == 0.0, false);
    let mut above = 0;
    let mut iterations = 1;
    while !converged && !diverged && iterations < options.max_iters.max(1) {
        let inhomogeneity = map.apply(&delta) * c(options.scale, 0.0);
        let norm = space.norm(&inhomogeneity);
        let prev = *norms.last().expect("nonempty");
        norms.push(norm);
        let ratio = if prev == 0.0 { 0.0 } else { norm / prev };
        ratios.push(ratio);
        if norm < tol.couple_tol * size {
            converged = true;
            break;
        }
        above = if ratio >= 1.0 { above + 1 } else { 0 };
        if above >= 3 {
            diverged = true;
            break;
        }
        delta = solve(&inhomogeneity, &mut max_defect);
        psi += &delta;
        iterates.push(psi.clone());
        iterations += 1;
    }
    let report = CouplingReport {
        inhomogeneity_norms: norms,
        ratios,
        converged,
        diverged,
        iterations,
        max_range_defect: max_defect,
        raw_radius: map.radius,
    };
    (iterates, report)
}

/// Geometric mean of the ratios, ignoring the first `skip` transient steps.
pub fn mean_ratio(report: &CouplingReport, skip: usize) -> f64 {
    let tail: Vec<f64> = report.ratios.iter().skip(skip).copied().filter(|r| *r > 0.0).collect();
    if tail.is_empty() {
        return 0.0;
    }
    (tail.iter().map(|r| r.ln()).sum::<f64>() / tail.len() as f64).exp()
}
