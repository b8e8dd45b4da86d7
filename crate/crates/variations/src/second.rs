use cfs_core::linalg::{self, c, CMat, CVec, C64, I};
use cfs_core::spectrum::lagrangian;
use cfs_core::{DiscreteSystem, Tolerances};
use cfs_spin::{FermionicKernel, SpinFrame};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::error::{Result, VariationError};
use crate::perturbation::abs_variation;
use crate::qkernel::{pair_lagrangian, ChainData, QKernel};

/// Second derivative of one pair Lagrangian, split into its three parts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PairSecondVariation {
    /// Sum of squares of first variations of the moduli (κ part included).
    pub lfe: f64,
    /// The κ part `2κ (δΣ|λ|)²` of `lfe`.
    pub lfe_kappa: f64,
    /// `2 Re Tr(Q δ²P^*)`.
    pub q_term: f64,
    /// Everything else: eigenvector mixing and the convexity of `|λ|`.
    pub remainder: f64,
    pub total: f64,
}

/// Decomposes `d²/dτ² L(P0 + τ δP + ½ τ² δ²P)` at `τ = 0`.
///
/// `q` is the kernel block `Q(x_i, x_j)` at `P0`.
#[allow(clippy::too_many_arguments)]
pub fn second_variation_lagrangian(
    frame: &SpinFrame,
    i: usize,
    j: usize,
    p0: &CMat,
    dp: &CMat,
    d2p: &CMat,
    q: &CMat,
    n: usize,
    kappa: f64,
    degen_tol: f64,
) -> Result<PairSecondVariation> {
    if p0.shape() != dp.shape() || p0.shape() != d2p.shape() {
        return Err(VariationError::Dimension("P, δP and δ²P must have the same shape".into()));
    }
    if p0.is_empty() || linalg::max_abs(p0) == 0.0 {
        return Ok(PairSecondVariation::default());
    }
    let adj = |m: &CMat| frame.spin_adjoint(i, j, m);
    let (p0s, dps, d2ps) = (adj(p0), adj(dp), adj(d2p));
    let a0 = p0 * &p0s;
    let a1 = dp * &p0s + p0 * &dps;
    let a2q = d2p * &p0s + p0 * &d2ps;
    let a2r = (dp * &dps) * c(2.0, 0.0);
    let chain = ChainData::new(&a0, p0.ncols(), n, kappa, degen_tol).ok_or(VariationError::Degenerate(i, j))?;
    let eig = &chain.eig;
    let dim = eig.values.len();
    let elements = CMat::from_fn(dim, dim, |k, m| eig.matrix_element(k, &a1, m));

    let mut firsts = Vec::with_capacity(2 * n);
    let mut curvature_r = 0.0;
    for &k in &chain.active {
        let lam = eig.values[k];
        let mixing: C64 = (0..dim).filter(|&m| m != k).map(|m| elements[(k, m)] * elements[(m, k)] / (lam - eig.values[m])).sum();
        let from_q = eig.matrix_element(k, &a2q, k);
        let from_r = eig.matrix_element(k, &a2r, k) + mixing * 2.0;
        let full = abs_variation(lam, elements[(k, k)], from_q + from_r, 0.0)?;
        let q_part = (lam.conj() * from_q).re / lam.norm();
        firsts.push(full.first);
        curvature_r += chain.slopes[k] * (full.second - q_part);
    }
    firsts.resize(2 * n, 0.0);
    let mut spread = 0.0;
    for a in &firsts {
        for b in &firsts {
            spread += (a - b) * (a - b);
        }
    }
    spread /= 2.0 * n as f64;
    let sum_first: f64 = firsts.iter().sum();
    let lfe_kappa = 2.0 * kappa * sum_first * sum_first;
    let lfe = spread + lfe_kappa;
    let q_term = if q.is_empty() { 0.0 } else { 2.0 * linalg::trace(&(q * &d2ps)).re };
    // the q part comes from the kernel block, so a wrong Q breaks the
    // identity against the oracle instead of cancelling here
    let remainder = curvature_r;
    Ok(PairSecondVariation { lfe, lfe_kappa, q_term, remainder, total: lfe + q_term + remainder })
}

/// Five-point central difference of `g` at zero with step `h`.
pub fn five_point_second(g: impl Fn(f64) -> f64, h: f64) -> f64 {
    (-g(2.0 * h) + 16.0 * g(h) - 30.0 * g(0.0) + 16.0 * g(-h) - g(-2.0 * h)) / (12.0 * h * h)
}

/// [`five_point_second`] with step halving: starting from `h`, keeps halving
/// while successive estimates still move, and returns the estimate whose
/// change to the next one is smallest. Protects the oracle near nearly
/// colliding eigenvalues, where the initial step is outside the region of
/// analyticity.
pub fn five_point_second_adaptive(g: impl Fn(f64) -> f64, h: f64) -> f64 {
    let f0 = g(0.0);
    let stencil = |h: f64| (-g(2.0 * h) + 16.0 * g(h) - 30.0 * f0 + 16.0 * g(-h) - g(-2.0 * h)) / (12.0 * h * h);
    let mut step = h;
    let mut prev = stencil(step);
    let mut best = (f64::INFINITY, prev);
    for _ in 0..6 {
        step *= 0.5;
        let cur = stencil(step);
        let change = (cur - prev).abs();
        if change < best.0 {
            best = (change, prev);
        }
        if change <= 1e-9 * cur.abs().max(prev.abs()) {
            break;
        }
        prev = cur;
    }
    best.1
}

/// Finite-difference oracle for [`second_variation_lagrangian`].
#[allow(clippy::too_many_arguments)]
pub fn pair_second_derivative_fd(
    frame: &SpinFrame,
    i: usize,
    j: usize,
    p0: &CMat,
    dp: &CMat,
    d2p: &CMat,
    n: usize,
    kappa: f64,
    fd2_step: f64,
) -> f64 {
    let scale = linalg::max_abs(p0);
    let speed = linalg::max_abs(dp).max((linalg::max_abs(d2p) * scale).sqrt());
    if scale == 0.0 || speed == 0.0 {
        return 0.0;
    }
    let h = fd2_step * scale / speed;
    five_point_second_adaptive(
        |t| {
            let p = p0 + dp * c(t, 0.0) + d2p * c(0.5 * t * t, 0.0);
            pair_lagrangian(frame, i, j, &p, n, kappa)
        },
        h,
    )
}

/// A variation of the wave evaluation operator.
#[derive(Debug, Clone, PartialEq)]
pub enum VariationDirection {
    /// Only the physical wave function of `u` changes, by `φ`.
    SingleWave { u: CVec, phi: Vec<CVec> },
    /// `δΨ(x_i)` as `d_i × f` coordinate matrices.
    General(Vec<CMat>),
}

impl VariationDirection {
    /// `δΨ(x_i)`; for a single wave this is `φ(x_i) u^† / |u|²`.
    pub fn matrices(&self) -> Vec<CMat> {
        match self {
            VariationDirection::General(m) => m.clone(),
            VariationDirection::SingleWave { u, phi } => {
                let norm2 = u.norm_squared();
                phi.iter()
                    .map(|p| if norm2 == 0.0 { p * u.adjoint() * c(0.0, 0.0) } else { p * u.adjoint() / c(norm2, 0.0) })
                    .collect()
            }
        }
    }

    /// The global phase direction `δΨ = iΨ`, which leaves `P` unchanged to first order.
    pub fn global_phase(frame: &SpinFrame) -> Self {
        VariationDirection::General(frame.bases.iter().map(|b| b.psi() * I).collect())
    }
}

/// Per-pair row of a second variation report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
    pub lfe: f64,
    pub lfe_kappa: f64,
    pub q_term: f64,
    pub remainder: f64,
    pub total: f64,
    /// Set when the chain was degenerate and only the oracle total is known.
    pub degenerate: bool,
}

/// Second variation of the effective action along `τ ↦ Ψ + τΦ`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SecondVariationReport {
    pub lfe_term: f64,
    pub lfe_kappa: f64,
    /// `−4 Σ_i ρ_i Re tr(δΨ(x_i)^* ((Q − 𝔯) δΨ)(x_i))`.
    pub q_term: f64,
    /// The same quantity assembled from the pair rows plus the trace term.
    pub q_term_pairs: f64,
    pub remainder: f64,
    /// Oracle totals of degenerate pairs minus their q part.
    pub unresolved: f64,
    pub total: f64,
    /// Five-point finite difference of the effective action.
    pub fd_total: f64,
    /// Central difference of the first derivative, and its analytic value.
    pub fd_first: f64,
    pub first: f64,
    /// `|total − fd_total|` relative to the size of the terms.
    pub relative_error: f64,
    /// Sum of the absolute pair contributions.
    pub scale: f64,
    pub degenerate_pairs: Vec<(usize, usize)>,
    pub pairs: Vec<PairRow>,
}

impl SecondVariationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per pair followed by a totals footer.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,weight,lfe,lfe_kappa,q_term,remainder,total,degenerate\n");
        for r in &self.pairs {
            let _ = writeln!(
                out,
                "{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{}",
                r.i, r.j, r.weight, r.lfe, r.lfe_kappa, r.q_term, r.remainder, r.total, r.degenerate
            );
        }
        let _ = writeln!(
            out,
            "total,,,{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{}",
            self.lfe_term,
            self.lfe_kappa,
            self.q_term,
            self.remainder,
            self.total,
            self.degenerate_pairs.len()
        );
        let _ = writeln!(out, "fd_total,,,,,,,{:.17e},", self.fd_total);
        out
    }
}

pub(crate) fn psi_matrices(frame: &SpinFrame) -> Vec<CMat> {
    frame.bases.iter().map(|b| b.psi()).collect()
}

/// `Re tr(A^* B) = Re tr(A^H S B)` for `A, B: H → S_{x_i}`.
pub(crate) fn spin_trace(frame: &SpinFrame, i: usize, a: &CMat, b: &CMat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    linalg::trace(&(frame.psi_adjoint(i, a) * b)).re
}

/// Kernel variations `δP = −ΦΨ^* − ΨΦ^*` and `δ²P = −2ΦΦ^*` of a pair.
pub(crate) fn pair_variations(frame: &SpinFrame, psi: &[CMat], phi: &[CMat], i: usize, j: usize) -> (CMat, CMat) {
    let dp = frame.kernel_from(&phi[i], j, &psi[j]) + frame.kernel_from(&psi[i], j, &phi[j]);
    let d2p = frame.kernel_from(&phi[i], j, &phi[j]) * c(2.0, 0.0);
    (dp, d2p)
}

/// All pair rows of the decomposition (unweighted values plus the weight).
pub(crate) fn pair_rows(
    system: &DiscreteSystem,
    frame: &SpinFrame,
    kernel: &FermionicKernel,
    q: &QKernel,
    phi: &[CMat],
    tol: &Tolerances,
) -> Vec<PairRow> {
    let psi = psi_matrices(frame);
    let count = system.len();
    let (n, kappa) = (system.n(), system.kappa());
    let w = system.weights();
    (0..count * count)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / count, idx % count);
            let (dp, d2p) = pair_variations(frame, &psi, phi, i, j);
            let p0 = kernel.get(i, j);
            let qb = q.get(i, j);
            let weight = w[i] * w[j];
            if p0.is_empty() || linalg::max_abs(p0) == 0.0 {
                // the pair Lagrangian is quartic in P around P = 0
                return PairRow {
                    i,
                    j,
                    weight,
                    lfe: 0.0,
                    lfe_kappa: 0.0,
                    q_term: 0.0,
                    remainder: 0.0,
                    total: 0.0,
                    degenerate: false,
                };
            }
            match second_variation_lagrangian(frame, i, j, p0, &dp, &d2p, qb, n, kappa, tol.degen_tol) {
                Ok(v) => PairRow {
                    i,
                    j,
                    weight,
                    lfe: v.lfe,
                    lfe_kappa: v.lfe_kappa,
                    q_term: v.q_term,
                    remainder: v.remainder,
                    total: v.total,
                    degenerate: false,
                },
                Err(_) => {
                    let total = pair_second_derivative_fd(frame, i, j, p0, &dp, &d2p, n, kappa, tol.fd2_step);
                    let q_term = if qb.is_empty() { 0.0 } else { 2.0 * linalg::trace(&(qb * frame.spin_adjoint(i, j, &d2p))).re };
                    PairRow { i, j, weight, lfe: 0.0, lfe_kappa: 0.0, q_term, remainder: 0.0, total, degenerate: true }
                }
            }
        })
        .collect()
}

/// Weighted sums of the `lfe` and remainder parts of the second variation
/// along `phi`, without the finite-difference oracle. Degenerate pairs
/// contribute their oracle value minus the q part to the remainder.
pub fn coupling_form(
    system: &DiscreteSystem,
    frame: &SpinFrame,
    kernel: &FermionicKernel,
    q: &QKernel,
    phi: &[CMat],
    tol: &Tolerances,
) -> (f64, f64) {
    let rows = pair_rows(system, frame, kernel, q, phi, tol);
    let mut lfe = 0.0;
    let mut rem = 0.0;
    for r in &rows {
        if r.degenerate {
            rem += r.weight * (r.total - r.q_term);
        } else {
            lfe += r.weight * r.lfe;
            rem += r.weight * r.remainder;
        }
    }
    (lfe, rem)
}

/// Effective action of the system whose wave evaluation operators are `psi`,
/// evaluated through the point operators `x_i = −Ψ(x_i)^* Ψ(x_i)`.
pub fn effective_action_of(system: &DiscreteSystem, frame: &SpinFrame, psi: &[CMat]) -> f64 {
    let points: Vec<CMat> = psi.iter().enumerate().map(|(i, p)| -(frame.psi_adjoint(i, p) * p)).collect();
    let w = system.weights();
    let (n, kappa) = (system.n(), system.kappa());
    let count = points.len();
    let double: f64 = (0..count)
        .into_par_iter()
        .map(|i| (0..count).map(|j| w[i] * w[j] * lagrangian(&points[i], &points[j], n, kappa).unwrap_or(f64::NAN)).sum::<f64>())
        .sum();
    let trace: f64 = points.iter().zip(w).map(|(x, wi)| wi * linalg::trace(x).re).sum();
    double - 2.0 * system.r() * trace
}

/// Decomposed second variation of the effective action with its oracle.
pub fn second_variation_action(
    system: &DiscreteSystem,
    frame: &SpinFrame,
    kernel: &FermionicKernel,
    q: &QKernel,
    direction: &VariationDirection,
    tol: &Tolerances,
) -> Result<SecondVariationReport> {
    let phi = direction.matrices();
    if phi.len() != system.len() {
        return Err(VariationError::Dimension(format!("{} variation blocks for {} points", phi.len(), system.len())));
    }
    for (i, p) in phi.iter().enumerate() {
        if p.nrows() != frame.dim(i) || p.ncols() != system.f() {
            return Err(VariationError::Dimension(format!("variation block {i} has shape {:?}", p.shape())));
        }
    }
    let psi = psi_matrices(frame);
    let w = system.weights();
    let r = system.r();
    let rows = pair_rows(system, frame, kernel, q, &phi, tol);

    let mut lfe_term = 0.0;
    let mut lfe_kappa = 0.0;
    let mut pair_q = 0.0;
    let mut remainder = 0.0;
    let mut unresolved = 0.0;
    let mut scale = 0.0;
    let mut degenerate_pairs = Vec::new();
    for row in &rows {
        pair_q += row.weight * row.q_term;
        scale += row.weight * (row.lfe.abs() + row.q_term.abs() + row.remainder.abs());
        if row.degenerate {
            unresolved += row.weight * (row.total - row.q_term);
            degenerate_pairs.push((row.i, row.j));
        } else {
            lfe_term += row.weight * row.lfe;
            lfe_kappa += row.weight * row.lfe_kappa;
            remainder += row.weight * row.remainder;
        }
    }
    let norm_phi: f64 = (0..phi.len()).map(|i| w[i] * spin_trace(frame, i, &phi[i], &phi[i])).sum();
    let q_term_pairs = pair_q + 4.0 * r * norm_phi;

    let qphi = q.apply(w, &phi);
    let qpsi = q.apply(w, &psi);
    let mut q_term = 0.0;
    let mut first = 0.0;
    for i in 0..phi.len() {
        let shifted = &qphi[i] - &phi[i] * c(r, 0.0);
        q_term += -4.0 * w[i] * spin_trace(frame, i, &phi[i], &shifted);
        let shifted_psi = &qpsi[i] - &psi[i] * c(r, 0.0);
        first += -4.0 * w[i] * spin_trace(frame, i, &phi[i], &shifted_psi);
    }
    let total = lfe_term + q_term + remainder + unresolved;

    let psi_scale = psi.iter().map(linalg::max_abs).fold(0.0, f64::max);
    let phi_scale = phi.iter().map(linalg::max_abs).fold(0.0, f64::max);
    let (fd_total, fd_first) = if phi_scale == 0.0 {
        (0.0, 0.0)
    } else {
        let path = |t: f64| -> f64 {
            let moved: Vec<CMat> = psi.iter().zip(&phi).map(|(p, d)| p + d * c(t, 0.0)).collect();
            effective_action_of(system, frame, &moved)
        };
        let h2 = tol.fd2_step * psi_scale / phi_scale;
        let h1 = tol.fd_step * psi_scale / phi_scale;
        (five_point_second_adaptive(path, h2), (path(h1) - path(-h1)) / (2.0 * h1))
    };
    let denom = fd_total.abs().max(lfe_term.abs() + q_term.abs() + remainder.abs() + unresolved.abs());
    let relative_error = if denom == 0.0 { 0.0 } else { (total - fd_total).abs() / denom };
    Ok(SecondVariationReport {
        lfe_term,
        lfe_kappa,
        q_term,
        q_term_pairs,
        remainder,
        unresolved,
        total,
        fd_total,
        fd_first,
        first,
        relative_error,
        scale,
        degenerate_pairs,
        pairs: rows,
    })
}
