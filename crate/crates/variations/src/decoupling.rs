use cfs_core::linalg::{c, CMat};
use cfs_core::{DiscreteSystem, Tolerances};
use cfs_spin::{FermionicKernel, SpinFrame};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::error::Result;
use crate::qkernel::QKernel;
use crate::second::{pair_rows, second_variation_action, spin_trace, PairRow, VariationDirection};

/// Strip-restricted parts of the second variation and the two decoupling margins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecouplingRow {
    pub t_lo: f64,
    pub t_hi: f64,
    pub points: usize,
    /// `|Σ_Ω Σ_Ω ρρ δ²L^lfe|`.
    pub lfe: f64,
    /// `|Σ_Ω Σ_Ω ρρ Re tr(δΨ^* (Q − 𝔯) δΨ)|`, without the factor −4.
    pub q: f64,
    /// `|Σ_Ω Σ_Ω ρρ R|`.
    pub remainder: f64,
    /// `remainder − lfe`; the first inequality holds when this is ≥ 0.
    pub lfe_margin: f64,
    /// `remainder/4 − q`.
    pub q_margin: f64,
    pub degenerate_pairs: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecouplingReport {
    pub strips: Vec<DecouplingRow>,
    /// One row per time slice, summed against all points.
    pub slices: Vec<DecouplingRow>,
}

impl DecouplingReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,t_lo,t_hi,points,lfe,q,remainder,lfe_margin,q_margin,degenerate_pairs\n");
        for (kind, rows) in [("strip", &self.strips), ("slice", &self.slices)] {
            for r in rows {
                let _ = writeln!(
                    out,
                    "{kind},{},{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{}",
                    r.t_lo, r.t_hi, r.points, r.lfe, r.q, r.remainder, r.lfe_margin, r.q_margin, r.degenerate_pairs
                );
            }
        }
        out
    }
}

fn row(
    t_lo: f64,
    t_hi: f64,
    left: &[bool],
    right: &[bool],
    rows: &[PairRow],
    q_pairs: &DMatrix<f64>,
    diag: &[f64],
) -> DecouplingRow {
    let (mut lfe, mut rem, mut q, mut degenerate) = (0.0, 0.0, 0.0, 0);
    for r in rows.iter().filter(|r| left[r.i] && right[r.j]) {
        if r.degenerate {
            degenerate += 1;
        } else {
            lfe += r.weight * r.lfe;
            rem += r.weight * r.remainder;
        }
        q += q_pairs[(r.i, r.j)];
    }
    q -= (0..left.len()).filter(|&i| left[i] && right[i]).map(|i| diag[i]).sum::<f64>();
    let (lfe, q, remainder) = (lfe.abs(), q.abs(), rem.abs());
    DecouplingRow {
        t_lo,
        t_hi,
        points: left.iter().filter(|&&b| b).count(),
        lfe,
        q,
        remainder,
        lfe_margin: remainder - lfe,
        q_margin: remainder / 4.0 - q,
        degenerate_pairs: degenerate,
    }
}

/// Strip and slice tables of the decomposed second variation.
///
/// Each strip `[t_lo, t_hi]` restricts both arguments; each slice time `t`
/// restricts the first argument to points with that time label.
#[allow(clippy::too_many_arguments)]
pub fn decoupling_report(
    system: &DiscreteSystem,
    frame: &SpinFrame,
    kernel: &FermionicKernel,
    q: &QKernel,
    direction: &VariationDirection,
    strips: &[(f64, f64)],
    slices: &[f64],
    tol: &Tolerances,
) -> Result<DecouplingReport> {
    let phi = direction.matrices();
    let rows = pair_rows(system, frame, kernel, q, &phi, tol);
    let w = system.weights();
    let count = system.len();
    let q_pairs = DMatrix::from_fn(count, count, |i, j| {
        let block = q.get(i, j);
        if block.is_empty() {
            return 0.0;
        }
        w[i] * w[j] * spin_trace(frame, i, &phi[i], &(block * &phi[j]))
    });
    let diag: Vec<f64> = (0..count).map(|i| system.r() * w[i] * spin_trace(frame, i, &phi[i], &phi[i])).collect();
    let times = system.times();
    let all = vec![true; count];
    let strips = strips
        .iter()
        .map(|&(lo, hi)| {
            let inside: Vec<bool> = times.iter().map(|&t| t >= lo && t <= hi).collect();
            row(lo, hi, &inside, &inside, &rows, &q_pairs, &diag)
        })
        .collect();
    let slices = slices
        .iter()
        .map(|&t0| {
            let on: Vec<bool> = times.iter().map(|&t| t == t0).collect();
            row(t0, t0, &on, &all, &rows, &q_pairs, &diag)
        })
        .collect();
    Ok(DecouplingReport { strips, slices })
}

/// Direction in the numerical kernel of the total second variation: the
/// eigenvector of its real Hessian with the smallest `|eigenvalue|`, returned
/// with that eigenvalue. Intended for small systems; costs `O(dim²)`
/// evaluations of the quadratic form.
pub fn null_direction(
    system: &DiscreteSystem,
    frame: &SpinFrame,
    kernel: &FermionicKernel,
    q: &QKernel,
    tol: &Tolerances,
) -> Result<(VariationDirection, f64)> {
    let f = system.f();
    let shapes: Vec<usize> = (0..system.len()).map(|i| frame.dim(i) * f).collect();
    let dim: usize = 2 * shapes.iter().sum::<usize>();
    let build = |coords: &[f64]| -> Vec<CMat> {
        let mut at = 0;
        (0..system.len())
            .map(|i| {
                let d = frame.dim(i);
                let m = CMat::from_fn(d, f, |r, col| {
                    let k = at + 2 * (r * f + col);
                    c(coords[k], coords[k + 1])
                });
                at += 2 * d * f;
                m
            })
            .collect()
    };
    let form = |coords: &[f64]| -> Result<f64> {
        let dir = VariationDirection::General(build(coords));
        Ok(second_variation_action(system, frame, kernel, q, &dir, tol)?.total)
    };
    let mut diag = vec![0.0; dim];
    for a in 0..dim {
        let mut e = vec![0.0; dim];
        e[a] = 1.0;
        diag[a] = form(&e)?;
    }
    let mut hess = DMatrix::zeros(dim, dim);
    for a in 0..dim {
        hess[(a, a)] = diag[a];
        for b in a + 1..dim {
            let mut e = vec![0.0; dim];
            e[a] = 1.0;
            e[b] = 1.0;
            let v = 0.5 * (form(&e)? - diag[a] - diag[b]);
            hess[(a, b)] = v;
            hess[(b, a)] = v;
        }
    }
    let eig = hess.symmetric_eigen();
    let k = (0..dim).min_by(|&a, &b| eig.eigenvalues[a].abs().total_cmp(&eig.eigenvalues[b].abs())).unwrap_or(0);
    let coords: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
    Ok((VariationDirection::General(build(&coords)), eig.eigenvalues[k]))
}
