use cfs_core::linalg::{self, c, CMat, CVec, C64};
use cfs_core::{DiscreteSystem, Tolerances};
use cfs_spin::{SpinFrame, WaveFunction};
use cfs_variations::QKernel;
use serde::{Deserialize, Serialize};

use crate::commutator::{commutator_inner, commutator_scale, wave_operator};
use crate::error::{Result, WaveError};
use crate::homogeneous::past_source;
use crate::operator::StripOperator;
use crate::strip::{Cutoffs, TimeStrip};

#[derive(Debug, Clone)]
pub struct ExtendOptions {
    pub lambda: f64,
    /// Time at which the Gram matrix is evaluated.
    pub t: f64,
    /// Second time for the invariance check.
    pub t_alt: f64,
    pub cutoffs: Option<Cutoffs>,
}

/// Per Hilbert vector diagnostics of the embedding `u ↦ ψ^u_0 + ψ^u_1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRow {
    /// Part of `𝒬(η₀ψ^u)` outside `[t0, t_min]`, relative to its norm. Zero
    /// when `ψ^u` solves the dynamical wave equation near the strip.
    pub leakage_past: f64,
    pub leakage_future: f64,
    pub admissible_past: bool,
    pub admissible_future: bool,
    /// `⟨ι(u)|ι(u)⟩^t`.
    pub commutator_norm: f64,
    pub hilbert_norm: f64,
    /// `|⟨ι(u)|ι(u)⟩^t − c ⟨u|u⟩| / |c ⟨u|u⟩|` with the fitted `c`.
    pub ccond_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendedSpaceReport {
    pub lambda: f64,
    pub t: f64,
    pub t_alt: f64,
    pub pair_count: usize,
    pub embedded_count: usize,
    /// Gram matrix of `⟨.|.⟩^t`, entries as `[re, im]`.
    pub gram: Vec<Vec<[f64; 2]>>,
    pub eigenvalues: Vec<f64>,
    /// Smallest eigenvalue relative to the largest.
    pub min_ratio: f64,
    pub kernel_dim: usize,
    pub rank: usize,
    /// `max |G(t) − G(t_alt)| / max |G(t)|`.
    pub time_invariance: f64,
    /// Largest relative component of a past perturbation outside the range of `𝒬`.
    pub max_range_defect: f64,
    /// Change of the Gram matrix when a kernel vector of `𝒬` is added to every
    /// basis vector, relative to the larger of the Gram maximum and `λ` times
    /// the size `Σ|terms|` of the commutator inner products involved; `None`
    /// if `𝒬` has no kernel.
    pub kernel_neutrality: Option<f64>,
    /// Least-squares `c` in `⟨ι(u)|ι(v)⟩^t = c ⟨u|v⟩`; `None` without embedded vectors.
    pub fitted_c: Option<f64>,
    pub embedding: Vec<EmbeddingRow>,
}

impl ExtendedSpaceReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Vectors spanning the extended space before the quotient.
#[derive(Debug, Clone)]
pub struct ExtendedSpace {
    pub report: ExtendedSpaceReport,
    /// `(ψ⁽⁰⁾, ψ⁽¹⁾)` pairs on the strip.
    pub pairs: Vec<(CVec, CVec)>,
    /// `ι(u)` on the strip.
    pub embedded: Vec<CVec>,
    /// Orthonormal basis of the quotient, as coefficient columns over
    /// `pairs ++ embedded`, scaled by `1/√eigenvalue`.
    pub quotient: CMat,
}

/// Coefficient vectors `a` with `Σ_k row_k a_k = 0` for every row, as orthonormal columns.
fn null_space(rows: &[Vec<C64>], dim: usize) -> CMat {
    // orthonormalize the conjugated rows, then diagonalize the complementary projector
    let mut basis: Vec<CVec> = Vec::new();
    for row in rows {
        let mut v = CVec::from_iterator(dim, row.iter().map(|z| z.conj()));
        let size = v.norm();
        for _ in 0..2 {
            for b in &basis {
                let overlap = b.dotc(&v);
                v -= b * overlap;
            }
        }
        if size > 0.0 && v.norm() > 1e-10 * size {
            let n = v.norm();
            basis.push(v / c(n, 0.0));
        }
    }
    let mut projector = CMat::identity(dim, dim);
    for b in &basis {
        projector -= b * b.adjoint();
    }
    let eig = linalg::hermitian_eigen(&projector);
    let keep: Vec<usize> = (0..dim).filter(|&k| eig.values[k] > 0.5).collect();
    CMat::from_fn(dim, keep.len(), |r, col| eig.vectors[(r, keep[col])])
}

struct Basis<'a> {
    system: &'a DiscreteSystem,
    frame: &'a SpinFrame,
    q: &'a QKernel,
    op: &'a StripOperator,
}

impl Basis<'_> {
    fn world(&self, v: &CVec) -> WaveFunction {
        self.op.space.extend(self.frame, v)
    }

    fn cip(&self, a: &CVec, b: &CVec, t: f64) -> C64 {
        commutator_inner(self.system, self.frame, self.q, &self.world(a), &self.world(b), t)
    }

    /// Gram matrix of pairs (λ-linear part) and embedded vectors.
    fn gram(&self, pairs: &[(CVec, CVec)], embedded: &[CVec], lambda: f64, t: f64) -> CMat {
        let m = pairs.len();
        let total = m + embedded.len();
        let mut g = CMat::zeros(total, total);
        for a in 0..m {
            for b in 0..m {
                let v = self.cip(&pairs[a].0, &pairs[b].1, t) + self.cip(&pairs[a].1, &pairs[b].0, t);
                g[(a, b)] = v * lambda;
            }
            for (k, e) in embedded.iter().enumerate() {
                let v = self.cip(&pairs[a].0, e, t) + self.cip(&pairs[a].1, e, t) * lambda;
                g[(a, m + k)] = v;
                g[(m + k, a)] = v.conj();
            }
        }
        for (k, e) in embedded.iter().enumerate() {
            for (l, f) in embedded.iter().enumerate() {
                g[(m + k, m + l)] = self.cip(e, f, t);
            }
        }
        g
    }
}

/// `ι(u) = ψ^u₀ + ψ^u₁` where `ψ^u_k` solves `𝒬ψ = φ_k^u` with `φ₀^u`, `φ₁^u`
/// the parts of `𝒬(η₀ψ^u)`, `𝒬(η₁ψ^u)` in the past and future boundary strips.
#[allow(clippy::too_many_arguments)]
pub fn embed_hilbert_vectors(
    system: &DiscreteSystem,
    frame: &SpinFrame,
    q: &QKernel,
    op: &StripOperator,
    strip: &TimeStrip,
    hf: &[CVec],
    cutoffs: &Cutoffs,
    tol: &Tolerances,
) -> Result<(Vec<CVec>, Vec<EmbeddingRow>)> {
    let space = &op.space;
    let mut embedded = Vec::new();
    let mut rows = Vec::new();
    let mut offending = Vec::new();
    for (k, u) in hf.iter().enumerate() {
        if u.len() != system.f() {
            return Err(WaveError::Dimension(format!("Hilbert vector {k} has length {}", u.len())));
        }
        let psi_u = WaveFunction::physical(frame, u);
        let mut parts = Vec::new();
        let mut row = EmbeddingRow {
            leakage_past: 0.0,
            leakage_future: 0.0,
            admissible_past: true,
            admissible_future: true,
            commutator_norm: 0.0,
            hilbert_norm: u.norm_squared(),
            ccond_residual: 0.0,
        };
        for past in [true, false] {
            let mut cut = psi_u.clone();
            for (i, comp) in cut.components.iter_mut().enumerate() {
                let t = system.times()[i];
                *comp *= c(if past { cutoffs.past(t) } else { cutoffs.future(t) }, 0.0);
            }
            // 𝒬 in the representation of the strip operator, evaluated on the whole system
            let image = space.sign(&space.restrict(&wave_operator(system, q, &cut, op.multiplier)));
            let inside = if past { space.mask(&image, |s| strip.in_past(s)) } else { space.mask(&image, |s| strip.in_future(s)) };
            let total = space.norm(&image);
            let leak = if total == 0.0 { 0.0 } else { space.norm(&(&image - &inside)) / total };
            let solved = op.solve(&inside, tol.adm_tol);
            if past {
                row.leakage_past = leak;
                row.admissible_past = solved.is_ok();
            } else {
                row.leakage_future = leak;
                row.admissible_future = solved.is_ok();
            }
            if let Ok(s) = solved {
                parts.push(s.psi);
            }
        }
        if parts.len() != 2 {
            offending.push(k);
            continue;
        }
        embedded.push(&parts[0] + &parts[1]);
        rows.push(row);
    }
    if !offending.is_empty() {
        return Err(WaveError::CutoffsInadmissible(offending));
    }

    Ok((embedded, rows))
}

/// Builds the extended space of the strip: future-driven solutions
/// orthogonal to the embedded Hilbert vectors, perturbed from the past, plus
/// the embedded physical wave functions of `hf`.
#[allow(clippy::too_many_arguments)]
pub fn build_extended_space(
    system: &DiscreteSystem,
    frame: &SpinFrame,
    q: &QKernel,
    op: &StripOperator,
    strip: &TimeStrip,
    hf: &[CVec],
    options: &ExtendOptions,
    tol: &Tolerances,
) -> Result<ExtendedSpace> {
    strip.validate()?;
    let space = &op.space;
    let cutoffs = options.cutoffs.clone().unwrap_or_else(|| Cutoffs::linear(strip));
    cutoffs.check(strip, system.times())?;
    let basis = Basis { system, frame, q, op };
    let (t, lambda) = (options.t, options.lambda);

    let (embedded, mut rows) = embed_hilbert_vectors(system, frame, q, op, strip, hf, &cutoffs, tol)?;

    // future-driven solutions: one per coordinate of the future boundary strip
    let future: Vec<usize> = (0..space.dim()).filter(|&k| strip.in_future(space.times[k])).collect();
    let kernel = op.kernel_basis();
    let solves: Vec<CVec> = future
        .iter()
        .map(|&k| {
            let mut e = CVec::zeros(space.dim());
            e[k] = c(1.0, 0.0);
            op.solve(&e, f64::INFINITY).map(|s| s.psi)
        })
        .collect::<Result<_>>()?;
    let units: Vec<CVec> = future
        .iter()
        .map(|&k| {
            let mut e = CVec::zeros(space.dim());
            e[k] = c(1.0, 0.0);
            e
        })
        .collect();
    // linear constraints on the coefficients over `future`
    let mut constraints: Vec<Vec<C64>> = Vec::new();
    for kv in &kernel {
        // admissibility of the future inhomogeneity and of the past perturbation
        constraints.push(units.iter().map(|e| space.inner(kv, e)).collect());
        constraints.push(solves.iter().map(|y| space.inner(kv, &past_source(op, strip, y))).collect());
    }
    for e in &embedded {
        constraints.push(solves.iter().map(|y| basis.cip(y, e, t).conj()).collect());
    }
    let coeffs = null_space(&constraints, future.len());
    let mut pairs = Vec::new();
    let mut max_range_defect: f64 = 0.0;
    for col in 0..coeffs.ncols() {
        let mut psi0 = CVec::zeros(space.dim());
        for (k, y) in solves.iter().enumerate() {
            psi0 += y * coeffs[(k, col)];
        }
        // admissible by the constraints above; only round-off leaves the range
        let solved = op.solve(&past_source(op, strip, &psi0), f64::INFINITY)?;
        max_range_defect = max_range_defect.max(solved.range_defect);
        pairs.push((psi0, solved.psi));
    }

    let gram = basis.gram(&pairs, &embedded, lambda, t);
    let eig = linalg::hermitian_eigen(&gram);
    let top = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = eig.values.first().copied().unwrap_or(0.0);
    let min_ratio = if top == 0.0 { 0.0 } else { min / top };
    if min_ratio < -tol.psd_tol {
        return Err(WaveError::Indefinite(min_ratio));
    }
    let keep: Vec<usize> = (0..eig.values.len()).filter(|&k| eig.values[k] > tol.psd_tol * top).collect();
    let quotient =
        CMat::from_fn(gram.nrows(), keep.len(), |r, col| eig.vectors[(r, keep[col])] / c(eig.values[keep[col]].sqrt(), 0.0));

    let gram_alt = basis.gram(&pairs, &embedded, lambda, options.t_alt);
    let gmax = linalg::max_abs(&gram);
    let time_invariance = if gmax == 0.0 { linalg::max_abs(&gram_alt) } else { linalg::max_abs(&(&gram - &gram_alt)) / gmax };

    let kernel_neutrality = kernel.first().map(|kv| {
        let size = pairs
            .iter()
            .flat_map(|p| [space.norm(&p.0), space.norm(&p.1)])
            .chain(embedded.iter().map(|e| space.norm(e)))
            .fold(0.0, f64::max)
            .max(1.0);
        let shift = kv * c(size / space.norm(kv), 0.0);
        let moved: Vec<(CVec, CVec)> = pairs.iter().map(|p| (&p.0 + &shift, &p.1 + &shift)).collect();
        let moved_e: Vec<CVec> = embedded.iter().map(|e| e + &shift).collect();
        let g = basis.gram(&moved, &moved_e, lambda, t);
        // natural size of the entries: Σ|terms| of the commutator inner products involved
        let worlds: Vec<WaveFunction> = moved.iter().flat_map(|p| [&p.0, &p.1]).chain(&moved_e).map(|v| basis.world(v)).collect();
        let scale = worlds.iter().map(|w| commutator_scale(system, frame, q, w, w)).fold(0.0, f64::max);
        let size = gmax.max(scale * lambda.min(1.0));
        if size == 0.0 {
            linalg::max_abs(&g)
        } else {
            linalg::max_abs(&(&g - &gram)) / size
        }
    });

    let m = pairs.len();
    let fitted_c = (!embedded.is_empty()).then(|| {
        let mut num = 0.0;
        let mut den = 0.0;
        for a in 0..hf.len() {
            for b in 0..hf.len() {
                let h = hf[a].dotc(&hf[b]);
                num += (h.conj() * gram[(m + a, m + b)]).re;
                den += h.norm_sqr();
            }
        }
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    });
    for (k, row) in rows.iter_mut().enumerate() {
        row.commutator_norm = gram[(m + k, m + k)].re;
        let expected = fitted_c.unwrap_or(0.0) * row.hilbert_norm;
        row.ccond_residual = if expected == 0.0 {
            (row.commutator_norm - expected).abs()
        } else {
            (row.commutator_norm - expected).abs() / expected.abs()
        };
    }

    let report = ExtendedSpaceReport {
        lambda,
        t,
        t_alt: options.t_alt,
        pair_count: m,
        embedded_count: embedded.len(),
        gram: (0..gram.nrows()).map(|r| (0..gram.ncols()).map(|k| [gram[(r, k)].re, gram[(r, k)].im]).collect()).collect(),
        eigenvalues: eig.values.clone(),
        min_ratio,
        kernel_dim: eig.values.len() - keep.len(),
        rank: keep.len(),
        time_invariance,
        max_range_defect,
        kernel_neutrality,
        fitted_c,
        embedding: rows,
    };
    Ok(ExtendedSpace { report, pairs, embedded, quotient })
}
