//! Fourier transform `T_a` of the lower mass shell of mass² `a` in 3+1
//! dimensions, away from the light cone.
//!
//! For timelike `ξ` (`ξ² > 0`) with `z = √(aξ²)`,
//! `T_a = √a/(16π²) · (Y₁(z) + i ε(ξ⁰) J₁(z)) / √ξ²`;
//! for spacelike `ξ`, `T_a = √a/(8π³) · K₁(√(−aξ²)) / √(−ξ²)`.

use num_complex::Complex64 as C64;
use puruspe::{Jn, Kn, Yn};
use std::f64::consts::PI;

use crate::error::{DiracError, Result};

fn check(a: f64, xi2: f64, lightcone_tol: f64) -> Result<()> {
    if !(a.is_finite() && a > 0.0) {
        return Err(DiracError::Input(format!("mass parameter a must be positive, got {a}")));
    }
    if !xi2.is_finite() || xi2.abs() < lightcone_tol {
        return Err(DiracError::LightCone { xi2, tol: lightcone_tol });
    }
    Ok(())
}

/// `T_a(ξ)` as a function of `a`, the signed `ξ²` and `ε(ξ⁰) = ±1`.
pub fn bessel_t_a(a: f64, xi2: f64, time_sign: f64, lightcone_tol: f64) -> Result<C64> {
    check(a, xi2, lightcone_tol)?;
    let ra = a.sqrt();
    if xi2 > 0.0 {
        let s = xi2.sqrt();
        let z = ra * s;
        Ok(C64::new(Yn(1, z), time_sign.signum() * Jn(1, z)) * (ra / (16.0 * PI * PI * s)))
    } else {
        let r = (-xi2).sqrt();
        Ok(C64::new(ra / (8.0 * PI * PI * PI) * Kn(1, ra * r) / r, 0.0))
    }
}

/// `dT_a/d(ξ²)` at fixed `ε(ξ⁰)`.
pub fn bessel_t_a_derivative(a: f64, xi2: f64, time_sign: f64, lightcone_tol: f64) -> Result<C64> {
    check(a, xi2, lightcone_tol)?;
    let ra = a.sqrt();
    if xi2 > 0.0 {
        let s = xi2.sqrt();
        let z = ra * s;
        let e = time_sign.signum();
        let h1 = C64::new(Yn(1, z), e * Jn(1, z));
        let h0 = C64::new(Yn(0, z), e * Jn(0, z));
        // B₁' = B₀ − B₁/z for B = J, Y
        let dh1 = h0 - h1 / z;
        let d_ds = (dh1 * ra / s - h1 / (s * s)) * (ra / (16.0 * PI * PI));
        Ok(d_ds / (2.0 * s))
    } else {
        let r = (-xi2).sqrt();
        let z = ra * r;
        let (k0, k1) = (Kn(0, z), Kn(1, z));
        // K₁' = −K₀ − K₁/z
        let d_dr = ra / (8.0 * PI * PI * PI) * ((-k0 - k1 / z) * ra / r - k1 / (r * r));
        Ok(C64::new(-d_dr / (2.0 * r), 0.0))
    }
}

/// Modulus of the leading large-argument term of the timelike `T_a`,
/// `√(2/π) a^{1/4} / (16π² (ξ²)^{3/4})`.
pub fn timelike_envelope(a: f64, xi2: f64) -> f64 {
    (2.0 / PI).sqrt() * a.powf(0.25) / (16.0 * PI * PI * xi2.powf(0.75))
}

/// Least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let num: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}

/// `count` logarithmically spaced points from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let n = count.max(2);
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

/// Log-log slope of `|T_a|` against `ξ²` on a timelike grid.
pub fn timelike_exponent(a: f64, xi2: &[f64], lightcone_tol: f64) -> Result<f64> {
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    for &x in xi2 {
        lx.push(x.ln());
        ly.push(bessel_t_a(a, x, 1.0, lightcone_tol)?.norm().ln());
    }
    Ok(slope(&lx, &ly))
}

/// Slopes of `log T_a` and of `log(T_a · r^{3/2})` against `r = √(−ξ²)` on a
/// spacelike grid of distances `r`; the second removes the algebraic prefactor
/// of the `K₁` asymptotics and approaches `−√a`.
pub fn spacelike_decay(a: f64, r: &[f64], lightcone_tol: f64) -> Result<(f64, f64)> {
    let mut raw = Vec::new();
    let mut corrected = Vec::new();
    for &d in r {
        let t = bessel_t_a(a, -d * d, 1.0, lightcone_tol)?.re;
        raw.push(t.ln());
        corrected.push(t.ln() + 1.5 * d.ln());
    }
    Ok((slope(r, &raw), slope(r, &corrected)))
}
