//! Large timelike asymptotics of mass-shell superpositions and of the
//! `P → M → Q` chain built from the Dirac kernel of one mass.

use gkquad::single::Integrator;
use gkquad::Tolerance;
use nalgebra::Matrix4;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::error::{DiracError, Result};
use crate::kernel::{bessel_t_a, bessel_t_a_derivative, log_grid, slope};

/// `exp(1 − 1/(1 − x²))` on `|x| < 1`: equal to one at zero, smooth, compactly supported.
fn bump(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - x * x)).exp()
    }
}

/// Weight `f(a)` of the superposition `U = ∫ f(a) T_a da`, supported on `[a₀, a₀ + width]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MassProfile {
    /// `c (a − a₀) bump((a − a₀)/width)`: continuous, zero at `a₀`, with
    /// derivative jump `c` there and smooth elsewhere.
    Kinked { a0: f64, c: f64, width: f64 },
    /// `c · width · bump(2(a − a₀)/width − 1)`: smooth everywhere.
    Smooth { a0: f64, c: f64, width: f64 },
}

impl MassProfile {
    pub fn value(&self, a: f64) -> f64 {
        match *self {
            MassProfile::Kinked { a0, c, width } => {
                if a <= a0 {
                    0.0
                } else {
                    c * (a - a0) * bump((a - a0) / width)
                }
            }
            MassProfile::Smooth { a0, c, width } => c * width * bump(2.0 * (a - a0) / width - 1.0),
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match *self {
            MassProfile::Kinked { a0, width, .. } | MassProfile::Smooth { a0, width, .. } => (a0, a0 + width),
        }
    }

    /// `(a₀, c)` used to normalize `U` against `c a₀ T_{a₀} / ξ²`.
    pub fn reference(&self) -> (f64, f64) {
        match *self {
            MassProfile::Kinked { a0, c, .. } | MassProfile::Smooth { a0, c, .. } => (a0, c),
        }
    }

    fn validate(&self) -> Result<()> {
        let (a0, c) = self.reference();
        let (_, hi) = self.support();
        if !(a0 > 0.0 && hi > a0 && c != 0.0 && c.is_finite() && hi.is_finite()) {
            return Err(DiracError::Input(format!("mass profile needs a₀ > 0, width > 0 and c ≠ 0: {self:?}")));
        }
        Ok(())
    }
}

fn gk(xi2: f64, lo: f64, hi: f64, abs_tol: f64, max_iters: usize, f: impl Fn(f64) -> f64) -> Result<f64> {
    Integrator::new(|a: f64| f(a))
        .tolerance(Tolerance::Absolute(abs_tol))
        .max_iters(max_iters)
        .run(lo..hi)
        .estimate()
        .map_err(|e| DiracError::Quadrature { xi2, message: format!("{e:?}") })
}

/// `U(ξ) = ∫ f(a) T_a(ξ) da` for future-directed timelike `ξ`, by adaptive
/// Gauss–Kronrod quadrature of the real and imaginary parts.
pub fn superposition(profile: &MassProfile, xi2: f64, quad_tol: f64, lightcone_tol: f64) -> Result<C64> {
    profile.validate()?;
    let (lo, hi) = profile.support();
    let t_at = |a: f64| bessel_t_a(a, xi2, 1.0, lightcone_tol).unwrap_or(C64::new(f64::NAN, f64::NAN));
    let f_max = (0..=64).map(|j| profile.value(lo + (hi - lo) * j as f64 / 64.0).abs()).fold(0.0, f64::max);
    let scale = f_max * (hi - lo) * t_at(hi).norm().max(t_at(lo).norm());
    let abs_tol = (quad_tol * scale).max(f64::MIN_POSITIVE);
    let re = gk(xi2, lo, hi, abs_tol, 4000, |a| profile.value(a) * t_at(a).re)?;
    let im = gk(xi2, lo, hi, abs_tol, 4000, |a| profile.value(a) * t_at(a).im)?;
    Ok(C64::new(re, im))
}

fn pauli(j: usize) -> [[C64; 2]; 2] {
    let (o, z, i) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 1.0));
    match j {
        1 => [[z, o], [o, z]],
        2 => [[z, -i], [i, z]],
        _ => [[o, z], [z, -o]],
    }
}

/// Dirac representation `γ⁰ = diag(1, 1, −1, −1)`, `γʲ = [[0, σⱼ], [−σⱼ, 0]]`.
pub fn dirac_gammas() -> [Matrix4<C64>; 4] {
    let mut g = [Matrix4::zeros(); 4];
    for d in 0..4 {
        g[0][(d, d)] = C64::new(if d < 2 { 1.0 } else { -1.0 }, 0.0);
    }
    for (j, gj) in g.iter_mut().enumerate().skip(1) {
        let s = pauli(j);
        for r in 0..2 {
            for c in 0..2 {
                gj[(r, c + 2)] = s[r][c];
                gj[(r + 2, c)] = -s[r][c];
            }
        }
    }
    g
}

/// `ξ̸ = γ⁰ξ⁰ − γʲξʲ` for signature `(+,−,−,−)`.
pub fn slash(xi: &[f64; 4]) -> Matrix4<C64> {
    let g = dirac_gammas();
    g[0] * C64::new(xi[0], 0.0) - g[1] * C64::new(xi[1], 0.0) - g[2] * C64::new(xi[2], 0.0) - g[3] * C64::new(xi[3], 0.0)
}

pub fn minkowski_square(xi: &[f64; 4]) -> f64 {
    xi[0] * xi[0] - xi[1] * xi[1] - xi[2] * xi[2] - xi[3] * xi[3]
}

/// `P_m(x,y) = (i∂̸_x + m) T_{m²}` at `ξ = y − x`, using `∂_x = −∂_ξ` and
/// `∂_ξ T = 2ξ dT/dξ²` off the light cone: `P = −2iξ̸ T' + m T`.
pub fn dirac_kernel(mass: f64, xi: &[f64; 4], lightcone_tol: f64) -> Result<Matrix4<C64>> {
    let xi2 = minkowski_square(xi);
    let sign = if xi[0] >= 0.0 { 1.0 } else { -1.0 };
    let a = mass * mass;
    let t = bessel_t_a(a, xi2, sign, lightcone_tol)?;
    let dt = bessel_t_a_derivative(a, xi2, sign, lightcone_tol)?;
    Ok(slash(xi) * (dt * C64::new(0.0, -2.0)) + Matrix4::identity() * (t * mass))
}

fn operator_norm(m: &Matrix4<C64>) -> f64 {
    m.singular_values().max()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainNorms {
    pub xi2: f64,
    pub p: f64,
    pub m: f64,
    pub q: f64,
}

/// Operator norms of `P(x,y)`, `M = P(x,y)P(y,x) − ¼ tr(P(x,y)P(y,x))` and `Q = M P(x,y)`.
pub fn chain_norms(mass: f64, xi: &[f64; 4], lightcone_tol: f64) -> Result<ChainNorms> {
    let back = [-xi[0], -xi[1], -xi[2], -xi[3]];
    let pxy = dirac_kernel(mass, xi, lightcone_tol)?;
    let pyx = dirac_kernel(mass, &back, lightcone_tol)?;
    let prod = pxy * pyx;
    let m = prod - Matrix4::identity() * (prod.trace() / 4.0);
    let q = m * pxy;
    Ok(ChainNorms { xi2: minkowski_square(xi), p: operator_norm(&pxy), m: operator_norm(&m), q: operator_norm(&q) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelAsymptoticsConfig {
    pub profile: MassProfile,
    /// Smooth profile with the same support, used as the negative control.
    pub control: MassProfile,
    pub mass: f64,
    pub xi2_min: f64,
    pub xi2_max: f64,
    pub points: usize,
    /// Spatial part of the direction of `ξ`, relative to its time component (|v| < 1).
    pub velocity: [f64; 3],
}

impl Default for KernelAsymptoticsConfig {
    fn default() -> Self {
        KernelAsymptoticsConfig {
            profile: MassProfile::Kinked { a0: 1.0, c: 1.0, width: 4.0 },
            control: MassProfile::Smooth { a0: 1.0, c: 1.0, width: 4.0 },
            mass: 1.0,
            xi2_min: 1e2,
            xi2_max: 1e6,
            points: 41,
            velocity: [0.0; 3],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelRow {
    pub xi2: f64,
    pub t_abs: f64,
    /// `U / (c a₀ T_{a₀} / ξ²)` for the kinked profile.
    pub ratio: C64,
    /// The same ratio for the smooth control profile.
    pub control_ratio: C64,
    pub p_norm: f64,
    pub m_norm: f64,
    pub q_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelAsymptoticsReport {
    pub config: KernelAsymptoticsConfig,
    pub rows: Vec<KernelRow>,
    /// Log-log slope of `|T_{a₀}|` against `ξ²` over the largest decade.
    pub t_exponent: f64,
    /// Mean ratio over the largest decade.
    pub plateau: C64,
    /// `max |ratio − plateau| / |plateau|` over the largest decade.
    pub plateau_spread: f64,
    /// `|control ratio| / |plateau|` at the largest `ξ²`.
    pub control_fraction: f64,
    pub p_exponent: f64,
    pub m_exponent: f64,
    pub q_exponent: f64,
    /// Exponent of `|Q|/|P|`.
    pub q_over_p_exponent: f64,
    /// `q_over_p_exponent − p_exponent`.
    pub exponent_difference: f64,
}

impl KernelAsymptoticsReport {
    /// Columns `xi2, |T|, Re ratio, Im ratio, |control ratio|, |P|, |M|, |Q|`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("xi2,t_abs,ratio_re,ratio_im,control_abs,p_norm,m_norm,q_norm\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                r.xi2,
                r.t_abs,
                r.ratio.re,
                r.ratio.im,
                r.control_ratio.norm(),
                r.p_norm,
                r.m_norm,
                r.q_norm
            );
        }
        out
    }
}

/// Evaluates the superposition ratio, its negative control and the kernel
/// chain on a logarithmic timelike `ξ²` grid, and fits exponents over the
/// largest decade.
pub fn kernel_asymptotics(
    config: &KernelAsymptoticsConfig,
    quad_tol: f64,
    lightcone_tol: f64,
) -> Result<KernelAsymptoticsReport> {
    config.profile.validate()?;
    config.control.validate()?;
    let v2: f64 = config.velocity.iter().map(|v| v * v).sum();
    if !(config.xi2_min > 0.0 && config.xi2_max > config.xi2_min && config.points >= 4 && v2 < 1.0 && config.mass > 0.0) {
        return Err(DiracError::Input(
            "kernel asymptotics need 0 < ξ²_min < ξ²_max, ≥ 4 points, a timelike direction and m > 0".into(),
        ));
    }
    let (a0, c) = config.profile.reference();
    let (ca0, cc) = config.control.reference();
    let grid = log_grid(config.xi2_min, config.xi2_max, config.points);
    let rows = grid
        .par_iter()
        .map(|&xi2| {
            let t = bessel_t_a(a0, xi2, 1.0, lightcone_tol)?;
            let u = superposition(&config.profile, xi2, quad_tol, lightcone_tol)?;
            let tc = bessel_t_a(ca0, xi2, 1.0, lightcone_tol)?;
            let uc = superposition(&config.control, xi2, quad_tol, lightcone_tol)?;
            let tau = (xi2 / (1.0 - v2)).sqrt();
            let xi = [tau, tau * config.velocity[0], tau * config.velocity[1], tau * config.velocity[2]];
            let chain = chain_norms(config.mass, &xi, lightcone_tol)?;
            Ok(KernelRow {
                xi2,
                t_abs: t.norm(),
                ratio: u / (t * (c * a0 / xi2)),
                control_ratio: uc / (tc * (cc * ca0 / xi2)),
                p_norm: chain.p,
                m_norm: chain.m,
                q_norm: chain.q,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let decade: Vec<&KernelRow> = rows.iter().filter(|r| r.xi2 >= config.xi2_max / 10.0 * (1.0 - 1e-12)).collect();
    let lx: Vec<f64> = decade.iter().map(|r| r.xi2.ln()).collect();
    let fit = |f: &dyn Fn(&KernelRow) -> f64| slope(&lx, &decade.iter().map(|r| f(r).ln()).collect::<Vec<_>>());
    let plateau = decade.iter().map(|r| r.ratio).sum::<C64>() / decade.len() as f64;
    let plateau_spread = decade.iter().map(|r| (r.ratio - plateau).norm()).fold(0.0, f64::max) / plateau.norm();
    let last = rows.last().expect("grid has points");
    let p_exponent = fit(&|r| r.p_norm);
    let q_over_p_exponent = fit(&|r| r.q_norm / r.p_norm);
    Ok(KernelAsymptoticsReport {
        config: config.clone(),
        t_exponent: fit(&|r| r.t_abs),
        plateau,
        plateau_spread,
        control_fraction: last.control_ratio.norm() / plateau.norm(),
        p_exponent,
        m_exponent: fit(&|r| r.m_norm),
        q_exponent: fit(&|r| r.q_norm),
        q_over_p_exponent,
        exponent_difference: q_over_p_exponent - p_exponent,
        rows,
    })
}
