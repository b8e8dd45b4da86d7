use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::action::random_coefficient;
use crate::error::{DiracError, Result};
use crate::mode::{gamma0, spin_product, DiracMode, ModeSolution, Spinor};
use crate::profile::CutoffProfile;

const I: C64 = C64::new(0.0, 1.0);

/// Trapezoid resolution of the single time integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineQuadrature {
    /// Number of nodes on `[t₂ − R, t₂ + R]`, where `η` drops below `1e-20 η(0)` beyond `R`.
    pub nodes: usize,
}

impl Default for LineQuadrature {
    fn default() -> Self {
        LineQuadrature { nodes: 4001 }
    }
}

fn dirac_of(s: &ModeSolution, t: f64) -> Spinor {
    let g0 = gamma0();
    g0 * s.derivative(t) * I + s.mode.b() * s.value(t)
}

fn line_integral<F: Fn(f64) -> C64>(center: f64, radius: f64, nodes: usize, f: F) -> C64 {
    let n = nodes.max(3);
    let h = 2.0 * radius / (n - 1) as f64;
    let mut sum = C64::new(0.0, 0.0);
    for j in 0..n {
        let w = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
        sum += f(center - radius + j as f64 * h) * w;
    }
    sum * h
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommutatorValue {
    pub t: f64,
    /// Quadrature of the boundary formula with `(iD−m)` applied to the exact solutions.
    pub value: C64,
    /// Closed form through `η∗`, acting on each frequency as multiplication by `η̂`.
    pub closed_form: C64,
    /// `|value|` at half the number of nodes minus `|value|`.
    pub refinement_gap: f64,
    /// Integral of the absolute integrands.
    pub scale: f64,
}

fn boundary_quadrature(psi: &ModeSolution, phi: &ModeSolution, profile: &CutoffProfile, t2: f64, nodes: usize) -> (C64, f64) {
    let r = profile.radius(1e-20);
    let (psi_t2, phi_t2) = (psi.value(t2), phi.value(t2));
    let (dpsi_t2, dphi_t2) = (dirac_of(psi, t2), dirac_of(phi, t2));
    let first = |t: f64| {
        let e = profile.eta(t2 - t);
        let a = spin_product(&psi_t2, &dirac_of(phi, t)) + spin_product(&dpsi_t2, &phi.value(t));
        C64::new(e, 0.0) * a
    };
    let second = |t: f64| {
        let e = profile.eta(t - t2);
        let a = spin_product(&psi.value(t), &dphi_t2) + spin_product(&dirac_of(psi, t), &phi_t2);
        C64::new(e, 0.0) * a
    };
    let value = -(line_integral(t2, r, nodes, first) + line_integral(t2, r, nodes, second));
    let scale = line_integral(t2, r, nodes, |t| C64::new(first(t).norm() + second(t).norm(), 0.0)).re;
    (value, scale)
}

/// `−i[(ψ|η∗φ₂) − (ψ₂|η∗φ) + (η∗ψ|φ₂) − (η∗ψ₂|φ)]` at `t`, with `(.|.)` the
/// Euclidean product of spinors.
pub fn commutator_closed_form(psi: &ModeSolution, phi: &ModeSolution, profile: &CutoffProfile, t: f64) -> C64 {
    let conv = |s: &ModeSolution| {
        let w = s.mode.omega();
        (s.convolved(t, profile.eta_hat(w), profile.eta_hat_prime(w)), s.convolved_psi2(t, profile.eta_hat(w)))
    };
    let (cpsi, cpsi2) = conv(psi);
    let (cphi, cphi2) = conv(phi);
    let (psi_t, psi2_t, phi_t, phi2_t) = (psi.value(t), psi.psi2(t), phi.value(t), phi.psi2(t));
    -I * (psi_t.dotc(&cphi2) - psi2_t.dotc(&cphi) + cpsi.dotc(&phi2_t) - cpsi2.dotc(&phi_t))
}

/// Commutator inner product of two mode solutions of the same momentum at time `t₂`,
/// `−∫∫ η(t−t') (δ(t−t₂) + δ(t'−t₂)) (≺ψ(t)|(iD−m)φ(t')≻ + ≺(iD−m)ψ(t)|φ(t')≻)`.
pub fn dirac_commutator(
    psi: &ModeSolution,
    phi: &ModeSolution,
    profile: &CutoffProfile,
    t2: f64,
    quad: &LineQuadrature,
) -> Result<CommutatorValue> {
    if psi.mode != phi.mode {
        return Err(DiracError::Input("the commutator inner product pairs solutions of one mode".into()));
    }
    let (value, scale) = boundary_quadrature(psi, phi, profile, t2, quad.nodes);
    let (coarse, _) = boundary_quadrature(psi, phi, profile, t2, quad.nodes / 2 + 1);
    Ok(CommutatorValue {
        t: t2,
        value,
        closed_form: commutator_closed_form(psi, phi, profile, t2),
        refinement_gap: (coarse - value).norm(),
        scale,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    pub values: Vec<CommutatorValue>,
    /// Largest `|value(t) − value(t_first)|`.
    pub max_drift: f64,
    /// Largest `|value − closed_form|`.
    pub max_closed_form_gap: f64,
    pub scale: f64,
}

impl ConservationReport {
    pub fn relative_drift(&self) -> f64 {
        if self.scale == 0.0 {
            self.max_drift
        } else {
            self.max_drift / self.scale
        }
    }

    pub fn relative_closed_form_gap(&self) -> f64 {
        if self.scale == 0.0 {
            self.max_closed_form_gap
        } else {
            self.max_closed_form_gap / self.scale
        }
    }
}

pub fn conservation(
    psi: &ModeSolution,
    phi: &ModeSolution,
    profile: &CutoffProfile,
    times: &[f64],
    quad: &LineQuadrature,
) -> Result<ConservationReport> {
    let values = times.iter().map(|&t| dirac_commutator(psi, phi, profile, t, quad)).collect::<Result<Vec<_>>>()?;
    let first = values.first().map(|v| v.value).unwrap_or_default();
    let max_drift = values.iter().map(|v| (v.value - first).norm()).fold(0.0, f64::max);
    let max_closed_form_gap = values.iter().map(|v| (v.value - v.closed_form).norm()).fold(0.0, f64::max);
    let scale = values.iter().map(|v| v.scale).fold(0.0, f64::max);
    Ok(ConservationReport { values, max_drift, max_closed_form_gap, scale })
}

/// `ψ^D + iλtψ^D` for a Dirac solution `ψ^D` (the `a` coefficients of `dirac`).
pub fn positive_direction(dirac: &ModeSolution, lambda: f64) -> ModeSolution {
    let il = C64::new(0.0, lambda);
    ModeSolution::new(dirac.mode, dirac.a_plus, dirac.a_minus, dirac.a_plus * il, dirac.a_minus * il)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiracSequenceRow {
    pub delta: f64,
    /// `d/dλ ⟨ψ|ψ⟩` at `λ = 0`, by Richardson extrapolation of the quadrature.
    pub linear_coefficient: f64,
    /// `4 Σ± η̂(ω) |a±|²`.
    pub expected: f64,
    /// `linear_coefficient / (4 ‖ψ^D‖²)`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiracSequenceReport {
    pub k: f64,
    pub m: f64,
    pub rows: Vec<DiracSequenceRow>,
}

impl DiracSequenceReport {
    pub fn final_ratio(&self) -> f64 {
        self.rows.last().map(|r| r.ratio).unwrap_or(f64::NAN)
    }
}

/// Sweeps unit-mass cutoffs `√(δ/π) e^{−δτ²}` and compares the linear term of
/// `⟨ψ^D + iλtψ^D | ψ^D + iλtψ^D⟩` with the `L²` norm of `ψ^D`.
pub fn dirac_sequence_sweep(mode: &DiracMode, deltas: &[f64], t2: f64, seed: u64) -> Result<DiracSequenceReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirac = ModeSolution::new(
        *mode,
        random_coefficient(&mut rng),
        random_coefficient(&mut rng),
        C64::new(0.0, 0.0),
        C64::new(0.0, 0.0),
    );
    let norm = dirac.dirac_norm_sqr();
    let quad = LineQuadrature::default();
    let (l1, l2) = (1e-4, 2e-4);
    let rows = deltas
        .iter()
        .map(|&delta| {
            let profile = CutoffProfile::dirac_sequence(delta)?;
            let at = |l: f64| -> Result<f64> {
                let s = positive_direction(&dirac, l);
                Ok(dirac_commutator(&s, &s, &profile, t2, &quad)?.value.re / l)
            };
            let (c1, c2) = (at(l1)?, at(l2)?);
            let linear_coefficient = (l2 * c1 - l1 * c2) / (l2 - l1);
            let w = mode.omega();
            let expected = 4.0 * profile.eta_hat(w) * norm;
            Ok(DiracSequenceRow { delta, linear_coefficient, expected, ratio: linear_coefficient / (4.0 * norm) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DiracSequenceReport { k: mode.k(), m: mode.m(), rows })
}
