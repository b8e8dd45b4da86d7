use cfs_core::linalg::{self, c, CMat, CVec, C64};
use cfs_core::{DiscreteSystem, Tolerances};
use cfs_spin::{SpinFrame, WaveFunction};
use cfs_variations::QKernel;
use rayon::prelude::*;

use crate::error::{Result, WaveError};
use crate::strip::TimeStrip;

/// `⊕_{i∈Ω} S_{x_i}M` in spin coordinates with the scalar product
/// `⟨ψ|φ⟩_Ω = Σ_i ρ_i ⟨⟨ψ(x_i)|φ(x_i)⟩⟩`.
///
/// The spin bases diagonalize the point operators, so the Gram matrix is
/// diagonal with entries `ρ_i |μ_k|`.
#[derive(Debug, Clone, PartialEq)]
pub struct StripSpace {
    pub members: Vec<usize>,
    pub dims: Vec<usize>,
    pub offsets: Vec<usize>,
    /// Diagonal of the Gram matrix, one entry per coordinate.
    pub gram: Vec<f64>,
    /// Euclidean sign operator per coordinate, `s = −sign μ`.
    pub signs: Vec<f64>,
    /// Time label per coordinate.
    pub times: Vec<f64>,
    world: usize,
}

impl StripSpace {
    pub fn new(system: &DiscreteSystem, frame: &SpinFrame, strip: &TimeStrip) -> Self {
        let members = strip.members(system.times());
        let mut dims = Vec::new();
        let mut offsets = Vec::new();
        let (mut gram, mut signs, mut times) = (Vec::new(), Vec::new(), Vec::new());
        let mut at = 0;
        for &i in &members {
            let basis = frame.basis(i);
            offsets.push(at);
            dims.push(basis.dim());
            at += basis.dim();
            for &mu in &basis.eigenvalues {
                gram.push(system.weights()[i] * mu.abs());
                signs.push(-mu.signum());
                times.push(system.times()[i]);
            }
        }
        StripSpace { members, dims, offsets, gram, signs, times, world: system.len() }
    }

    pub fn dim(&self) -> usize {
        self.gram.len()
    }

    /// Smallest Gram entry; positive definiteness means this is positive.
    pub fn min_gram(&self) -> f64 {
        self.gram.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn inner(&self, a: &CVec, b: &CVec) -> C64 {
        a.iter().zip(b.iter()).zip(&self.gram).map(|((x, y), g)| x.conj() * y * g).sum()
    }

    pub fn norm(&self, a: &CVec) -> f64 {
        self.inner(a, a).re.max(0.0).sqrt()
    }

    /// Applies the Euclidean sign operator pointwise.
    pub fn sign(&self, a: &CVec) -> CVec {
        CVec::from_iterator(a.len(), a.iter().zip(&self.signs).map(|(v, s)| v * *s))
    }

    /// Keeps the coordinates whose time satisfies `keep`, zeroing the rest.
    pub fn mask(&self, a: &CVec, keep: impl Fn(f64) -> bool) -> CVec {
        CVec::from_iterator(a.len(), a.iter().zip(&self.times).map(|(v, &t)| if keep(t) { *v } else { c(0.0, 0.0) }))
    }

    /// Multiplies each coordinate by `profile(t)`.
    pub fn scale_by(&self, a: &CVec, profile: impl Fn(f64) -> f64) -> CVec {
        CVec::from_iterator(a.len(), a.iter().zip(&self.times).map(|(v, &t)| v * profile(t)))
    }

    /// Largest `|a_k|` over coordinates whose time fails `keep`.
    pub fn support_violation(&self, a: &CVec, keep: impl Fn(f64) -> bool) -> f64 {
        a.iter().zip(&self.times).filter(|(_, &t)| !keep(t)).map(|(v, _)| v.norm()).fold(0.0, f64::max)
    }

    /// Restriction of a wave function on the whole system to the strip.
    pub fn restrict(&self, psi: &WaveFunction) -> CVec {
        let mut out = CVec::zeros(self.dim());
        for (k, &i) in self.members.iter().enumerate() {
            out.rows_mut(self.offsets[k], self.dims[k]).copy_from(&psi.components[i]);
        }
        out
    }

    /// Extension by zero to the whole system.
    pub fn extend(&self, frame: &SpinFrame, a: &CVec) -> WaveFunction {
        let mut psi = WaveFunction::zero(frame);
        debug_assert_eq!(psi.components.len(), self.world);
        for (k, &i) in self.members.iter().enumerate() {
            psi.components[i] = a.rows(self.offsets[k], self.dims[k]).into_owned();
        }
        psi
    }

    fn sqrt_gram(&self) -> Vec<f64> {
        self.gram.iter().map(|g| g.sqrt()).collect()
    }
}

/// The operator `𝒬` representing the restricted effective action,
/// `S_Ω(φ, ψ) = ⟨φ|𝒬ψ⟩_Ω`, i.e. `(𝒬ψ)(x) = s_x (Σ_y ρ_y Q(x,y)ψ(y) − 𝔯ψ(x))`.
#[derive(Debug, Clone)]
pub struct StripOperator {
    pub space: StripSpace,
    /// Matrix of `𝒬` in spin coordinates.
    pub matrix: CMat,
    pub multiplier: f64,
    /// Eigenvalues of `𝒬`, ascending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors in the coordinates `G^{1/2} ψ`.
    vectors: CMat,
    /// Spectral norm `max |eig|`.
    pub norm: f64,
    /// Schwarz estimate `sup_i Σ_j ρ_j ‖Q(x_i,x_j)‖ + 𝔯`.
    pub norm_bound: f64,
    /// `‖𝒬 − 𝒬^†‖ / ‖𝒬‖` before symmetrization.
    pub symmetry_residual: f64,
    pub rank_tol: f64,
}

/// Result of a pseudo-inverse solve.
#[derive(Debug, Clone)]
pub struct StripSolution {
    pub psi: CVec,
    /// `‖𝒬ψ − Πφ‖_Ω / ‖φ‖_Ω` with `Π` the projection onto the range.
    pub residual: f64,
    /// `‖(1 − Π)φ‖_Ω / ‖φ‖_Ω`.
    pub range_defect: f64,
}

/// Builds `𝒬` on the strip and checks its symmetry and norm bound.
pub fn assemble_strip_operator(
    system: &DiscreteSystem,
    frame: &SpinFrame,
    q: &QKernel,
    strip: &TimeStrip,
    tol: &Tolerances,
) -> Result<StripOperator> {
    let space = StripSpace::new(system, frame, strip);
    let dim = space.dim();
    let w = system.weights();
    let r = system.r();
    let mut matrix = CMat::zeros(dim, dim);
    for (a, &i) in space.members.iter().enumerate() {
        for (b, &j) in space.members.iter().enumerate() {
            let block = q.get(i, j);
            if block.is_empty() {
                continue;
            }
            let mut view = matrix.view_mut((space.offsets[a], space.offsets[b]), (space.dims[a], space.dims[b]));
            view.copy_from(&(block * c(w[j], 0.0)));
        }
    }
    for k in 0..dim {
        matrix[(k, k)] -= c(r, 0.0);
    }
    for k in 0..dim {
        let s = space.signs[k];
        for col in 0..dim {
            matrix[(k, col)] *= s;
        }
    }
    let root = space.sqrt_gram();
    let hat = CMat::from_fn(dim, dim, |a, b| matrix[(a, b)] * (root[a] / root[b]));
    let scale = linalg::max_abs(&hat);
    let symmetry_residual = if scale == 0.0 { 0.0 } else { linalg::max_abs(&(&hat - hat.adjoint())) / scale };
    if symmetry_residual > tol.sym_tol {
        return Err(WaveError::Asymmetric(symmetry_residual));
    }
    let eig = linalg::hermitian_eigen(&linalg::hermitian_part(&hat));
    let norm = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rows: Vec<f64> =
        space.members.par_iter().map(|&i| space.members.iter().map(|&j| w[j] * q.block_norm(frame, i, j)).sum()).collect();
    let norm_bound = rows.iter().fold(0.0f64, |m, &v| m.max(v)) + r.abs();
    if norm > norm_bound * (1.0 + 1e-6) {
        return Err(WaveError::BoundViolated { norm, bound: norm_bound });
    }
    Ok(StripOperator {
        space,
        matrix,
        multiplier: r,
        eigenvalues: eig.values.to_vec(),
        vectors: eig.vectors,
        norm,
        norm_bound,
        symmetry_residual,
        rank_tol: tol.rank_tol,
    })
}

impl StripOperator {
    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn apply(&self, psi: &CVec) -> CVec {
        &self.matrix * psi
    }

    fn threshold(&self) -> f64 {
        self.rank_tol * self.norm
    }

    fn to_hat(&self, v: &CVec) -> CVec {
        CVec::from_iterator(v.len(), v.iter().zip(&self.space.gram).map(|(x, g)| x * g.sqrt()))
    }

    fn unhat(&self, v: &CVec) -> CVec {
        CVec::from_iterator(v.len(), v.iter().zip(&self.space.gram).map(|(x, g)| x / g.sqrt()))
    }

    /// Number of eigenvalues with `|e| ≤ rank_tol · ‖𝒬‖`.
    pub fn kernel_dim(&self) -> usize {
        let thr = self.threshold();
        self.eigenvalues.iter().filter(|e| e.abs() <= thr).count()
    }

    /// Orthonormal basis (in `⟨.|.⟩_Ω`) of the numerical kernel.
    pub fn kernel_basis(&self) -> Vec<CVec> {
        let thr = self.threshold();
        (0..self.dim())
            .filter(|&k| self.eigenvalues[k].abs() <= thr)
            .map(|k| self.unhat(&self.vectors.column(k).into_owned()))
            .collect()
    }

    /// Minimal-norm solution of `𝒬ψ = φ`. Fails if the component of `φ`
    /// outside the range exceeds `adm_tol · ‖φ‖_Ω`.
    pub fn solve(&self, phi: &CVec, adm_tol: f64) -> Result<StripSolution> {
        if phi.len() != self.dim() {
            return Err(WaveError::Dimension(format!(
                "inhomogeneity of length {} on a strip of dimension {}",
                phi.len(),
                self.dim()
            )));
        }
        let size = self.space.norm(phi);
        if size == 0.0 {
            return Ok(StripSolution { psi: CVec::zeros(self.dim()), residual: 0.0, range_defect: 0.0 });
        }
        let thr = self.threshold();
        let coeff = self.vectors.adjoint() * self.to_hat(phi);
        let mut out = CVec::zeros(self.dim());
        let mut in_range = CVec::zeros(self.dim());
        let mut defect = 0.0;
        for k in 0..self.dim() {
            let e = self.eigenvalues[k];
            if e.abs() <= thr {
                defect += coeff[k].norm_sqr();
            } else {
                out += self.vectors.column(k) * (coeff[k] / e);
                in_range += self.vectors.column(k) * coeff[k];
            }
        }
        let range_defect = defect.sqrt() / size;
        if range_defect > adm_tol {
            return Err(WaveError::Inadmissible { residual: range_defect });
        }
        let psi = self.unhat(&out);
        let target = self.unhat(&in_range);
        let residual = self.space.norm(&(self.apply(&psi) - target)) / size;
        Ok(StripSolution { psi, residual, range_defect })
    }

    /// Whether `φ` lies in the range up to `adm_tol`.
    pub fn is_admissible(&self, phi: &CVec, adm_tol: f64) -> bool {
        self.solve(phi, adm_tol).is_ok()
    }

    /// Eigenvalues of the unshifted strip kernel `ψ ↦ Σ_y ρ_y Q(x,y)ψ(y)`:
    /// `𝒬` has a kernel exactly when `𝔯` is one of them.
    pub fn multiplier_spectrum(&self) -> Vec<C64> {
        let mut k = CMat::from_fn(self.dim(), self.dim(), |a, b| self.matrix[(a, b)] * self.space.signs[a]);
        for a in 0..self.dim() {
            k[(a, a)] += c(self.multiplier, 0.0);
        }
        linalg::eigenvalues(&k).unwrap_or_default()
    }
}
