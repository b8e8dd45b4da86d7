use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{DiracError, Result};

/// Time cutoff `η(τ) = scale · exp(−δτ²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffProfile {
    pub delta: f64,
    pub scale: f64,
}

impl CutoffProfile {
    pub fn new(delta: f64) -> Result<Self> {
        Self::with_scale(delta, 1.0)
    }

    /// Unit-mass normalization `scale = √(δ/π)`, so that `η → δ(τ)` as `δ → ∞`.
    pub fn dirac_sequence(delta: f64) -> Result<Self> {
        Self::with_scale(delta, (delta / PI).sqrt())
    }

    pub fn with_scale(delta: f64, scale: f64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0 && scale.is_finite() && scale > 0.0) {
            return Err(DiracError::Input(format!("cutoff needs δ > 0 and a positive scale, got δ = {delta}, scale = {scale}")));
        }
        Ok(CutoffProfile { delta, scale })
    }

    pub fn eta(&self, tau: f64) -> f64 {
        self.scale * (-self.delta * tau * tau).exp()
    }

    /// `η̂(ω) = ∫ η(τ) e^{iωτ} dτ = scale · √(π/δ) · exp(−ω²/4δ)`.
    pub fn eta_hat(&self, omega: f64) -> f64 {
        self.scale * (PI / self.delta).sqrt() * (-omega * omega / (4.0 * self.delta)).exp()
    }

    pub fn eta_hat_prime(&self, omega: f64) -> f64 {
        -omega / (2.0 * self.delta) * self.eta_hat(omega)
    }

    /// `|τ|` beyond which `η(τ) < rel · η(0)`.
    pub fn radius(&self, rel: f64) -> f64 {
        (-rel.ln() / self.delta).sqrt()
    }
}

impl Default for CutoffProfile {
    fn default() -> Self {
        CutoffProfile { delta: 1.0, scale: 1.0 }
    }
}
