use cfs_core::linalg::{c, CVec, C64};
use cfs_core::{DiscreteSystem, Tolerances};
use cfs_spin::SpinFrame;
use cfs_variations::QKernel;
use serde::{Deserialize, Serialize};

use crate::commutator::commutator_inner;
use crate::error::{Result, WaveError};
use crate::operator::StripOperator;
use crate::strip::TimeStrip;

/// Solution of `𝒬ψ = λφ₀ + φ₁` with its interior homogeneity residual.
#[derive(Debug, Clone)]
pub struct BoundarySolution {
    pub psi: CVec,
    /// `‖(𝒬ψ)|_interior‖_Ω / ‖λφ₀ + φ₁‖_Ω`; the interior is `(t_min, t_max)`,
    /// or `[t0, t_max)` when the past inhomogeneity is absent.
    pub interior_residual: f64,
    pub solve_residual: f64,
}

/// Solves the strip equation for inhomogeneities localized near the two
/// boundaries: `φ₁` in `[t_max, t1]` and `φ₀` in `[t0, t_min]`.
pub fn homogeneous_from_boundary(
    op: &StripOperator,
    strip: &TimeStrip,
    phi1: &CVec,
    phi0: &CVec,
    lambda: f64,
    tol: &Tolerances,
) -> Result<BoundarySolution> {
    let space = &op.space;
    for (name, v) in [("φ₁", phi1), ("φ₀", phi0)] {
        if v.len() != space.dim() {
            return Err(WaveError::Dimension(format!("{name} has length {} on a strip of dimension {}", v.len(), space.dim())));
        }
    }
    let future_leak = space.support_violation(phi1, |t| strip.in_future(t));
    if future_leak > 0.0 {
        return Err(WaveError::Support(format!("φ₁ is nonzero ({future_leak:.3e}) before t_max")));
    }
    let past_leak = space.support_violation(phi0, |t| strip.in_past(t));
    if past_leak > 0.0 {
        return Err(WaveError::Support(format!("φ₀ is nonzero ({past_leak:.3e}) after t_min")));
    }
    let source = phi1 + phi0 * c(lambda, 0.0);
    let solution = op.solve(&source, tol.adm_tol)?;
    let image = op.apply(&solution.psi);
    let has_past = lambda != 0.0 && space.norm(phi0) > 0.0;
    let interior = if has_past {
        space.mask(&image, |t| t > strip.t_min && t < strip.t_max)
    } else {
        space.mask(&image, |t| t >= strip.t0 && t < strip.t_max)
    };
    let size = space.norm(&source);
    let interior_residual = if size == 0.0 { space.norm(&interior) } else { space.norm(&interior) / size };
    Ok(BoundarySolution { psi: solution.psi, interior_residual, solve_residual: solution.residual })
}

/// `ψ⁽⁰⁾` driven from the future and its first-order correction `ψ⁽¹⁾`,
/// with `ψ = ψ⁽⁰⁾ + λψ⁽¹⁾`.
#[derive(Debug, Clone)]
pub struct SolutionPair {
    pub psi0: CVec,
    pub psi1: CVec,
    pub lambda: f64,
}

impl SolutionPair {
    pub fn combined(&self) -> CVec {
        &self.psi0 + &self.psi1 * c(self.lambda, 0.0)
    }
}

/// Inhomogeneity `(i/4) s_x ψ(x)` on `[t0, t_min]`, written as a source of
/// `(Q − 𝔯)ψ = φ₀`. In the representation of `𝒬` (which carries one factor
/// of `s`) it reads `(i/4) ψ χ_past`.
pub fn past_source(op: &StripOperator, strip: &TimeStrip, psi0: &CVec) -> CVec {
    let raw = op.space.mask(&op.space.sign(psi0), |t| strip.in_past(t)) * c(0.0, 0.25);
    op.space.sign(&raw)
}

/// Perturbs a future-driven solution by the past inhomogeneity `λφ₀` with
/// `φ₀ = (i/4) s ψ⁽⁰⁾ χ_{[t0, t_min]}`.
pub fn positivity_perturbation(
    op: &StripOperator,
    strip: &TimeStrip,
    psi0: &CVec,
    lambda: f64,
    tol: &Tolerances,
) -> Result<SolutionPair> {
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(WaveError::Dimension(format!("λ must be positive, got {lambda}")));
    }
    let source = past_source(op, strip, psi0);
    let psi1 = match op.solve(&source, tol.adm_tol) {
        Ok(s) => s.psi,
        Err(WaveError::Inadmissible { residual }) => {
            return Err(WaveError::Support(format!(
                "past inhomogeneity is not admissible (range defect {residual:.3e}); enlarge the past boundary strip"
            )))
        }
        Err(e) => return Err(e),
    };
    Ok(SolutionPair { psi0: psi0.clone(), psi1, lambda })
}

/// `λ = 1e-2 ‖𝒬‖ / ‖ψ⁽⁰⁾‖_past`.
pub fn default_lambda(op: &StripOperator, strip: &TimeStrip, psi0: &CVec) -> f64 {
    let past = op.space.norm(&op.space.mask(psi0, |t| strip.in_past(t)));
    if past == 0.0 {
        1e-2
    } else {
        1e-2 * op.norm / past
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    /// `⟨ψ|ψ⟩^t` for `ψ = ψ⁽⁰⁾ + λψ⁽¹⁾`.
    pub value: C64,
    /// `value − λ ‖ψ⁽⁰⁾‖²_past`.
    pub remainder: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub t: f64,
    /// `‖ψ⁽⁰⁾‖²` on `[t0, t_min]`.
    pub past_norm: f64,
    pub rows: Vec<SweepRow>,
    /// Richardson extrapolation of `value/λ` to `λ = 0` from the two smallest `λ`.
    pub linear_coefficient: f64,
    pub relative_error: f64,
    /// Largest `|remainder| / (λ ‖ψ⁽⁰⁾‖²_past)`.
    pub relative_remainder: f64,
    /// Log-log slope of `|remainder|` against `λ`, fitted on the rows whose
    /// remainder lies above the round-off floor; `None` if fewer than two do.
    pub remainder_slope: Option<f64>,
    pub floor: f64,
}

/// Evaluates `⟨ψ|ψ⟩^t` along a λ-sweep of the positivity perturbation.
#[allow(clippy::too_many_arguments)]
pub fn lambda_sweep(
    system: &DiscreteSystem,
    frame: &SpinFrame,
    q: &QKernel,
    op: &StripOperator,
    strip: &TimeStrip,
    psi0: &CVec,
    lambdas: &[f64],
    t: f64,
    tol: &Tolerances,
) -> Result<SweepReport> {
    let past_norm = op.space.norm(&op.space.mask(psi0, |s| strip.in_past(s))).powi(2);
    let mut rows = Vec::new();
    let mut scale: f64 = 0.0;
    for &lambda in lambdas {
        let pair = positivity_perturbation(op, strip, psi0, lambda, tol)?;
        let psi = op.space.extend(frame, &pair.combined());
        let value = commutator_inner(system, frame, q, &psi, &psi, t);
        scale = scale.max(crate::commutator::commutator_scale(system, frame, q, &psi, &psi));
        rows.push(SweepRow { lambda, value, remainder: value.re - lambda * past_norm });
    }
    let mut sorted = rows.clone();
    sorted.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let linear_coefficient = match sorted.as_slice() {
        [a, b, ..] => {
            let (ca, cb) = (a.value.re / a.lambda, b.value.re / b.lambda);
            (b.lambda * ca - a.lambda * cb) / (b.lambda - a.lambda)
        }
        [a] => a.value.re / a.lambda,
        [] => 0.0,
    };
    let relative_error =
        if past_norm == 0.0 { linear_coefficient.abs() } else { (linear_coefficient - past_norm).abs() / past_norm };
    let relative_remainder = rows
        .iter()
        .map(|r| if past_norm == 0.0 { r.remainder.abs() } else { r.remainder.abs() / (r.lambda * past_norm) })
        .fold(0.0, f64::max);
    let floor = 1e3 * f64::EPSILON * scale;
    let above: Vec<(f64, f64)> =
        rows.iter().filter(|r| r.remainder.abs() > floor).map(|r| (r.lambda.ln(), r.remainder.abs().ln())).collect();
    let remainder_slope = (above.len() >= 2).then(|| {
        let mx = above.iter().map(|p| p.0).sum::<f64>() / above.len() as f64;
        let my = above.iter().map(|p| p.1).sum::<f64>() / above.len() as f64;
        let num: f64 = above.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let den: f64 = above.iter().map(|p| (p.0 - mx).powi(2)).sum();
        num / den
    });
    Ok(SweepReport { t, past_norm, rows, linear_coefficient, relative_error, relative_remainder, remainder_slope, floor })
}
