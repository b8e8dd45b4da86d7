use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DiracError, Result};
use crate::mode::{fd_first, gamma0, DiracMode, ModeSolution, Spinor, TimeGrid};
use crate::profile::CutoffProfile;

/// Smooth window `θ(t) = exp(1 − 1/(1 − s²))`, `s = (t − center)/half_width`,
/// vanishing with all derivatives outside `|s| < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub center: f64,
    pub half_width: f64,
}

impl Window {
    pub fn new(center: f64, half_width: f64) -> Result<Self> {
        if !(center.is_finite() && half_width.is_finite() && half_width > 0.0) {
            return Err(DiracError::Input(format!("window needs a positive half width, got {half_width}")));
        }
        Ok(Window { center, half_width })
    }

    pub fn theta(&self, t: f64) -> f64 {
        let s = (t - self.center) / self.half_width;
        if s.abs() >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - s * s)).exp()
        }
    }

    pub fn theta_prime(&self, t: f64) -> f64 {
        let s = (t - self.center) / self.half_width;
        if s.abs() >= 1.0 {
            0.0
        } else {
            let q = 1.0 - s * s;
            self.theta(t) * (-2.0 * s / (q * q)) / self.half_width
        }
    }

    pub fn contains(&self, grid: &TimeGrid) -> bool {
        // two stencil points of zero padding on each side
        let margin = 2.0 * grid.step;
        self.center - self.half_width >= grid.start + margin && self.center + self.half_width <= grid.end() - margin
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionValue {
    pub value: f64,
    pub imaginary: f64,
    /// `∫∫ η(t−t') |g(t)| |g(t')|` for the integrand `g`; the natural size of `value`.
    pub magnitude: f64,
    /// Same quadrature on every second grid point.
    pub coarse_value: f64,
}

impl ActionValue {
    pub fn refinement_gap(&self) -> f64 {
        if self.magnitude == 0.0 {
            0.0
        } else {
            (self.value - self.coarse_value).abs() / self.magnitude
        }
    }
}

// ≺Dψ|γ⁰ Dψ'≻ = (Dψ)^† (Dψ'), so the Euclidean product of the images suffices
fn dirac_images(samples: &[Spinor], h: f64, mode: &DiracMode) -> Vec<Spinor> {
    let g0 = gamma0();
    let b = mode.b();
    (0..samples.len()).map(|i| g0 * fd_first(samples, i, h) * C64::new(0.0, 1.0) + b * samples[i]).collect()
}

fn double_trapezoid(g: &[Spinor], h: f64, profile: &CutoffProfile) -> (C64, f64) {
    let reach = (profile.radius(1e-20) / h).ceil() as usize + 1;
    let kernel: Vec<f64> = (0..=reach.min(g.len())).map(|l| profile.eta(l as f64 * h)).collect();
    let norms: Vec<f64> = g.iter().map(|v| v.norm()).collect();
    let (sum, mag) = (0..g.len())
        .into_par_iter()
        .map(|a| {
            let mut s = C64::new(0.0, 0.0);
            let mut m = 0.0;
            if norms[a] == 0.0 {
                return (s, m);
            }
            let lo = a.saturating_sub(reach);
            let hi = (a + reach).min(g.len() - 1);
            for b in lo..=hi {
                let e = kernel[a.abs_diff(b)];
                s += g[a].dotc(&g[b]) * e;
                m += e * norms[a] * norms[b];
            }
            (s, m)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((C64::new(0.0, 0.0), 0.0), |(s, m), (a, b)| (s + a, m + b));
    (sum * (h * h), mag * h * h)
}

/// `S(ψ) = ∫∫ ≺(iD−m)ψ(t) | γ⁰ η(t−t') (iD−m)ψ(t')≻ dt dt'` for one mode, by
/// the trapezoid rule on the sample grid. The Dirac operator is applied with
/// fourth-order differences, treating samples beyond the grid as zero.
pub fn action_mode(samples: &[Spinor], mode: &DiracMode, profile: &CutoffProfile, grid: &TimeGrid) -> Result<ActionValue> {
    if samples.len() != grid.len {
        return Err(DiracError::Input(format!("{} samples on a grid of {} points", samples.len(), grid.len)));
    }
    let (fine, magnitude) = double_trapezoid(&dirac_images(samples, grid.step, mode), grid.step, profile);
    let sub: Vec<Spinor> = samples.iter().step_by(2).copied().collect();
    let coarse_value = double_trapezoid(&dirac_images(&sub, 2.0 * grid.step, mode), 2.0 * grid.step, profile).0.re;
    Ok(ActionValue { value: fine.re, imaginary: fine.im, magnitude, coarse_value })
}

/// The action of `θψ` through `(iD−m)(θψ) = iγ⁰(θ'ψ + θψ₂)`, with the exact
/// solution in place of finite differences.
pub fn windowed_action(solution: &ModeSolution, window: &Window, profile: &CutoffProfile, grid: &TimeGrid) -> ActionValue {
    let g: Vec<Spinor> = grid
        .points()
        .map(|t| solution.value(t) * C64::new(window.theta_prime(t), 0.0) + solution.psi2(t) * C64::new(window.theta(t), 0.0))
        .collect();
    let (value, magnitude) = double_trapezoid(&g, grid.step, profile);
    let sub: Vec<Spinor> = g.iter().step_by(2).copied().collect();
    let coarse_value = double_trapezoid(&sub, 2.0 * grid.step, profile).0.re;
    ActionValue { value: value.re, imaginary: value.im, magnitude, coarse_value }
}

pub fn windowed_samples(solution: &ModeSolution, window: &Window, grid: &TimeGrid) -> Vec<Spinor> {
    grid.points().map(|t| solution.value(t) * C64::new(window.theta(t), 0.0)).collect()
}

pub fn random_coefficient(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityRow {
    pub k: f64,
    pub m: f64,
    pub value: f64,
    pub imaginary: f64,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    pub samples: usize,
    pub rows: Vec<PositivityRow>,
    /// Smallest `value / magnitude` over the nonzero samples.
    pub min_relative: f64,
    pub max_imaginary: f64,
    /// Action of the zero solution.
    pub zero_value: f64,
}

impl PositivityReport {
    pub fn passed(&self, imaginary_tol: f64) -> bool {
        self.min_relative > 0.0 && self.max_imaginary <= imaginary_tol && self.zero_value == 0.0
    }
}

/// Actions of `count` windowed solutions with random modes, coefficients and windows.
pub fn positivity_sweep(count: usize, profile: &CutoffProfile, seed: u64) -> Result<PositivityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = TimeGrid::new(-6.0, 6.0, 0.02)?;
    let cases: Vec<(ModeSolution, Window)> = (0..count)
        .map(|_| {
            let mode = DiracMode::new(rng.random_range(-2.0..2.0), rng.random_range(0.2..1.5)).expect("valid mode");
            let s = ModeSolution::new(
                mode,
                random_coefficient(&mut rng),
                random_coefficient(&mut rng),
                random_coefficient(&mut rng),
                random_coefficient(&mut rng),
            );
            let w = Window { center: rng.random_range(-1.0..1.0), half_width: rng.random_range(1.5..4.5) };
            (s, w)
        })
        .collect();
    let rows = cases
        .iter()
        .map(|(s, w)| {
            let a = action_mode(&windowed_samples(s, w, &grid), &s.mode, profile, &grid)?;
            Ok(PositivityRow { k: s.mode.k(), m: s.mode.m(), value: a.value, imaginary: a.imaginary, magnitude: a.magnitude })
        })
        .collect::<Result<Vec<_>>>()?;
    let mode = DiracMode::new(0.0, 1.0)?;
    let zero = action_mode(&vec![Spinor::zeros(); grid.len], &mode, profile, &grid)?;
    let min_relative = rows.iter().map(|r| r.value / r.magnitude).fold(f64::INFINITY, f64::min);
    let max_imaginary = rows.iter().map(|r| r.imaginary.abs() / r.magnitude).fold(0.0, f64::max);
    Ok(PositivityReport { samples: count, rows, min_relative, max_imaginary, zero_value: zero.value })
}
