use cfs_core::linalg::{c, C64, I};
use cfs_core::DiscreteSystem;
use cfs_spin::{SpinFrame, WaveFunction};
use cfs_variations::QKernel;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

fn pair_term(frame: &SpinFrame, q: &QKernel, psi: &WaveFunction, phi: &WaveFunction, x: usize, y: usize) -> C64 {
    let block = q.get(x, y);
    if block.is_empty() {
        return c(0.0, 0.0);
    }
    frame.spin_inner(x, &psi.components[x], &(block * &phi.components[y]))
}

/// Commutator inner product with the past of `t` (closed: `t_x ≤ t`) as the
/// surface region,
/// `−2i [Σ_{x≤t} Σ_{y>t} − Σ_{x>t} Σ_{y≤t}] ρ_x ρ_y ≺ψ(x)|Q(x,y) φ(y)≻`.
pub fn commutator_inner(
    system: &DiscreteSystem,
    frame: &SpinFrame,
    q: &QKernel,
    psi: &WaveFunction,
    phi: &WaveFunction,
    t: f64,
) -> C64 {
    let times = system.times();
    let w = system.weights();
    let count = system.len();
    let sum: C64 = (0..count)
        .into_par_iter()
        .map(|x| {
            let past = times[x] <= t;
            let mut acc = c(0.0, 0.0);
            for y in 0..count {
                if (times[y] <= t) == past {
                    continue;
                }
                let term = pair_term(frame, q, psi, phi, x, y) * (w[x] * w[y]);
                if past {
                    acc += term;
                } else {
                    acc -= term;
                }
            }
            acc
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    -2.0 * I * sum
}

/// `((Q − 𝔯)ψ)(x) = Σ_y ρ_y Q(x,y)ψ(y) − 𝔯ψ(x)` on the whole system.
pub fn wave_operator(system: &DiscreteSystem, q: &QKernel, psi: &WaveFunction, multiplier: f64) -> WaveFunction {
    let mut out = WaveFunction { components: q.apply_vectors(system.weights(), &psi.components) };
    for (o, p) in out.components.iter_mut().zip(&psi.components) {
        *o -= p * c(multiplier, 0.0);
    }
    out
}

/// Second route to the commutator inner product through the wave operator:
/// `−2i Σ_{x≤t} ρ_x (≺ψ|(Q−𝔯)φ≻_x − ≺(Q−𝔯)ψ|φ≻_x)`.
///
/// It agrees with [`commutator_inner`] for every symmetric kernel; the
/// double sums over the past cancel in pairs.
pub fn commutator_inner_by_sources(
    system: &DiscreteSystem,
    frame: &SpinFrame,
    q: &QKernel,
    psi: &WaveFunction,
    phi: &WaveFunction,
    t: f64,
) -> C64 {
    let qpsi = wave_operator(system, q, psi, system.r());
    let qphi = wave_operator(system, q, phi, system.r());
    let w = system.weights();
    let mut sum = c(0.0, 0.0);
    for (x, &tx) in system.times().iter().enumerate() {
        if tx <= t {
            sum += (frame.spin_inner(x, &psi.components[x], &qphi.components[x])
                - frame.spin_inner(x, &qpsi.components[x], &phi.components[x]))
                * w[x];
        }
    }
    -2.0 * I * sum
}

/// `4 Im Σ_{t_x ≤ t} ρ_x ≺ψ(x)|φ(x)≻`: the commutator norm of a solution of
/// `(Q − 𝔯)ψ = φ` whose source lies in the past.
pub fn source_formula(system: &DiscreteSystem, frame: &SpinFrame, psi: &WaveFunction, source: &WaveFunction, t: f64) -> f64 {
    let w = system.weights();
    let mut sum = c(0.0, 0.0);
    for (x, &tx) in system.times().iter().enumerate() {
        if tx <= t {
            sum += frame.spin_inner(x, &psi.components[x], &source.components[x]) * w[x];
        }
    }
    4.0 * sum.im
}

/// `Σ_{x,y} ρ_x ρ_y |≺ψ(x)|Q(x,y)φ(y)≻|`: natural size of commutator inner products of `ψ, φ`.
pub fn commutator_scale(system: &DiscreteSystem, frame: &SpinFrame, q: &QKernel, psi: &WaveFunction, phi: &WaveFunction) -> f64 {
    let w = system.weights();
    let count = system.len();
    (0..count)
        .into_par_iter()
        .map(|x| (0..count).map(|y| w[x] * w[y] * pair_term(frame, q, psi, phi, x, y).norm()).sum::<f64>())
        .collect::<Vec<_>>()
        .into_iter()
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservationSeries {
    pub times: Vec<f64>,
    pub values: Vec<C64>,
    /// `|value(t) − value(t_first)|` per grid time.
    pub drift: Vec<f64>,
    pub max_drift: f64,
    pub scale: f64,
}

impl ConservationSeries {
    /// Columns `t, Re, Im, drift`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,re,im,drift\n");
        for ((t, v), d) in self.times.iter().zip(&self.values).zip(&self.drift) {
            let _ = writeln!(out, "{t},{:.17e},{:.17e},{:.17e}", v.re, v.im, d);
        }
        out
    }

    pub fn relative_drift(&self) -> f64 {
        if self.scale == 0.0 {
            0.0
        } else {
            self.max_drift / self.scale
        }
    }
}

/// `⟨ψ|φ⟩^t` on a time grid together with its drift from the first value.
pub fn conservation_series(
    system: &DiscreteSystem,
    frame: &SpinFrame,
    q: &QKernel,
    psi: &WaveFunction,
    phi: &WaveFunction,
    grid: &[f64],
) -> ConservationSeries {
    let values: Vec<C64> = grid.iter().map(|&t| commutator_inner(system, frame, q, psi, phi, t)).collect();
    let first = values.first().copied().unwrap_or(c(0.0, 0.0));
    let drift: Vec<f64> = values.iter().map(|v| (v - first).norm()).collect();
    let max_drift = drift.iter().copied().fold(0.0, f64::max);
    ConservationSeries { times: grid.to_vec(), values, drift, max_drift, scale: commutator_scale(system, frame, q, psi, phi) }
}
