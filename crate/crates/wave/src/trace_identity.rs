use cfs_core::linalg::{self, c, CMat, CVec, I};
use cfs_core::spectrum::lagrangian;
use cfs_core::{DiscreteSystem, Tolerances};
use cfs_variations::lagrangian_gradient_x;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceIdentityReport {
    /// `C` as rows of `[re, im]` entries.
    pub c_matrix: Vec<Vec<[f64; 2]>>,
    pub trace_c: [f64; 2],
    pub c_norm: f64,
    /// `|tr C| / ‖C‖`, zero for `C = 0`.
    pub relative_trace: f64,
    /// `⟨u|Cu⟩`.
    pub quadratic: f64,
    /// The commutator inner product `⟨u|u⟩^Ω` from directional differences of `L`.
    pub commutator_norm: f64,
    /// `|⟨u|Cu⟩ − ⟨u|u⟩^Ω|` relative to the larger of `scale` and
    /// `summand_scale`. Both sides vanish identically when every `D₁L(x,y)`
    /// commutes with `x` (e.g. a single spacelike pair), so the size of the
    /// summands, floored by `L` itself, sets the unit.
    pub relative_error: f64,
    /// Summed size of the pair terms of `⟨u|u⟩^Ω`.
    pub scale: f64,
    /// `Σ ρ_x ρ_y max(‖[x, D₁L(x,y)]‖, L(x,y)) · |u|²` over the cross pairs.
    pub summand_scale: f64,
}

impl TraceIdentityReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Builds `C = i Σ_x ρ_x [x, B(x)]` with
/// `B(x) = χ_Ω(x) Σ_{y∉Ω} ρ_y D₁L(x,y) − χ_{M∖Ω}(x) Σ_{y∈Ω} ρ_y D₁L(x,y)`
/// and compares `⟨u|Cu⟩` with the commutator inner product of the
/// commutator jet `i[|u⟩⟨u|, x]`, evaluated by directional differences of
/// the Lagrangian on `Ω × (M∖Ω)`.
pub fn trace_identity_check(system: &DiscreteSystem, omega: &[usize], u: &CVec, tol: &Tolerances) -> Result<TraceIdentityReport> {
    let count = system.len();
    let f = system.f();
    let w = system.weights();
    let (n, kappa) = (system.n(), system.kappa());
    let mut inside = vec![false; count];
    for &i in omega {
        inside[i] = true;
    }
    let commutators: Vec<Result<(CMat, f64)>> = (0..count)
        .into_par_iter()
        .map(|x| {
            let xm = system.point(x);
            let mut b = CMat::zeros(f, f);
            let mut size = 0.0;
            for y in (0..count).filter(|&y| inside[y] != inside[x]) {
                let grad = lagrangian_gradient_x(xm, system.point(y), n, kappa, tol.fd_step)?;
                let commutator = linalg::operator_norm(&(xm * &grad - &grad * xm));
                size += w[x] * w[y] * commutator.max(lagrangian(xm, system.point(y), n, kappa)?);
                b += grad * c(w[y], 0.0);
            }
            if !inside[x] {
                b = -b;
            }
            Ok(((xm * &b - &b * xm) * c(w[x], 0.0), size))
        })
        .collect();
    let mut cm = CMat::zeros(f, f);
    let mut summands = 0.0;
    for m in commutators {
        let (m, size) = m?;
        cm += m;
        summands += size;
    }
    let summand_scale = summands * u.norm_squared();
    cm *= I;

    let projector = u * u.adjoint();
    let jet = |x: &CMat| (&projector * x - x * &projector) * I;
    let pairs: Vec<(usize, usize)> =
        (0..count).flat_map(|x| (0..count).map(move |y| (x, y))).filter(|&(x, y)| inside[x] && !inside[y]).collect();
    let terms: Vec<f64> = pairs
        .par_iter()
        .map(|&(x, y)| -> Result<f64> {
            let (px, py) = (system.point(x), system.point(y));
            let directional = |moving_first: bool| -> Result<f64> {
                let (base, other) = if moving_first { (px, py) } else { (py, px) };
                let dir = jet(base);
                let size = linalg::operator_norm(&dir);
                if size == 0.0 {
                    return Ok(0.0);
                }
                let h = tol.fd_step * linalg::operator_norm(base).max(f64::MIN_POSITIVE) / size;
                let eval = |tau: f64| -> Result<f64> {
                    let moved = base + &dir * c(tau, 0.0);
                    let value =
                        if moving_first { lagrangian(&moved, other, n, kappa) } else { lagrangian(other, &moved, n, kappa) };
                    Ok(value?)
                };
                Ok((eval(h)? - eval(-h)?) / (2.0 * h))
            };
            Ok(w[x] * w[y] * (directional(true)? - directional(false)?))
        })
        .collect::<Result<_>>()?;
    let commutator_norm: f64 = terms.iter().sum();
    let scale: f64 = terms.iter().map(|t| t.abs()).sum();

    let quadratic = u.dotc(&(&cm * u)).re;
    let trace = linalg::trace(&cm);
    let c_norm = linalg::operator_norm(&cm);
    let relative_trace = if c_norm == 0.0 { 0.0 } else { trace.norm() / c_norm };
    let diff = (quadratic - commutator_norm).abs();
    let reference = scale.max(summand_scale);
    let relative_error = if reference == 0.0 { diff } else { diff / reference };
    Ok(TraceIdentityReport {
        c_matrix: (0..f).map(|r| (0..f).map(|k| [cm[(r, k)].re, cm[(r, k)].im]).collect()).collect(),
        trace_c: [trace.re, trace.im],
        c_norm,
        relative_trace,
        quadratic,
        commutator_norm,
        relative_error,
        scale,
        summand_scale,
    })
}
