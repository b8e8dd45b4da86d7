//! One spatial Fourier mode of the 1+1 dimensional Dirac field.
//!
//! Spinors have two components. The representation is
//! `γ⁰ = diag(1, −1)` and `γ¹ = [[0, 1], [−1, 0]]`, so `γ⁰` is Hermitian,
//! `γ¹` anti-Hermitian, `(γ⁰)² = 1`, `(γ¹)² = −1` and `{γ⁰, γ¹} = 0`.
//! A wave `ψ(t) e^{ikx}` sees the Dirac operator as `iγ⁰ d/dt + B` with
//! `B = −kγ¹ − m`.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{DiracError, Result};

pub type C64 = Complex64;
pub type Spinor = Vector2<C64>;
pub type Mat2 = Matrix2<C64>;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

pub fn gamma0() -> Mat2 {
    Mat2::new(ONE, ZERO, ZERO, -ONE)
}

pub fn gamma1() -> Mat2 {
    Mat2::new(ZERO, ONE, -ONE, ZERO)
}

/// Spin inner product `≺a|b≻ = a^† γ⁰ b`.
pub fn spin_product(a: &Spinor, b: &Spinor) -> C64 {
    a[0].conj() * b[0] - a[1].conj() * b[1]
}

/// Largest deviation from the Clifford relations of [`gamma0`], [`gamma1`].
pub fn clifford_defect() -> f64 {
    let (g0, g1) = (gamma0(), gamma1());
    let id = Mat2::identity();
    [g0 * g0 - id, g1 * g1 + id, g0 * g1 + g1 * g0, g0.adjoint() - g0, g1.adjoint() + g1]
        .iter()
        .map(|m| m.iter().map(|z| z.norm()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiracMode {
    k: f64,
    m: f64,
}

impl DiracMode {
    pub fn new(k: f64, m: f64) -> Result<Self> {
        if !(k.is_finite() && m.is_finite() && m >= 0.0) {
            return Err(DiracError::Input(format!("mode needs finite k and m ≥ 0, got k = {k}, m = {m}")));
        }
        if k == 0.0 && m == 0.0 {
            return Err(DiracError::Input("k = m = 0 has no positive frequency".into()));
        }
        Ok(DiracMode { k, m })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn omega(&self) -> f64 {
        self.k.hypot(self.m)
    }

    pub fn b(&self) -> Mat2 {
        gamma1() * C64::new(-self.k, 0.0) - Mat2::identity() * C64::new(self.m, 0.0)
    }

    /// `h = −γ⁰B = kσ₁ + mσ₃`, the Hamiltonian of the Dirac equation `iψ' = hψ`.
    pub fn hamiltonian(&self) -> Mat2 {
        -(gamma0() * self.b())
    }

    /// Normalized spinor with `h u₊ = ω u₊`.
    pub fn u_plus(&self) -> Spinor {
        let w = self.omega();
        Spinor::new(C64::new(self.m + w, 0.0), C64::new(self.k, 0.0)).normalize()
    }

    /// Normalized spinor with `h u₋ = −ω u₋`.
    pub fn u_minus(&self) -> Spinor {
        let w = self.omega();
        Spinor::new(C64::new(-self.k, 0.0), C64::new(self.m + w, 0.0)).normalize()
    }
}

/// Coefficients of `A₂ψ'' + A₁ψ' + A₀ψ`, the mode form of
/// `(iγ⁰ d/dt + B) γ⁰ (iγ⁰ d/dt + B)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElOperator {
    pub a2: Mat2,
    pub a1: Mat2,
    pub a0: Mat2,
}

pub fn el_operator_mode(mode: &DiracMode) -> ElOperator {
    let b = mode.b();
    ElOperator { a2: -gamma0(), a1: b * (I * 2.0), a0: b * gamma0() * b }
}

impl ElOperator {
    /// Matrix acting on `e^{−ik⁰t} v`.
    pub fn symbol(&self, k0: f64) -> Mat2 {
        self.a2 * C64::new(-k0 * k0, 0.0) + self.a1 * C64::new(0.0, -k0) + self.a0
    }

    /// Eigenvalues of `γ⁰ · symbol(k⁰)` in ascending order.
    pub fn symbol_eigenvalues(&self, k0: f64) -> [f64; 2] {
        let m = gamma0() * self.symbol(k0);
        let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
        let (a, d) = (h[(0, 0)].re, h[(1, 1)].re);
        let off = h[(0, 1)].norm();
        let mid = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + off * off).sqrt();
        [mid - rad, mid + rad]
    }

    pub fn apply(&self, psi: &Spinor, d1: &Spinor, d2: &Spinor) -> Spinor {
        self.a2 * d2 + self.a1 * d1 + self.a0 * psi
    }
}

/// Solution `a₊e^{−iωt}u₊ + a₋e^{iωt}u₋ + t(b₊e^{−iωt}u₊ + b₋e^{iωt}u₋)` of the
/// mode equations; the `a` part is `ψ₁`, the `b` part `ψ₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSolution {
    pub mode: DiracMode,
    pub a_plus: C64,
    pub a_minus: C64,
    pub b_plus: C64,
    pub b_minus: C64,
}

impl ModeSolution {
    pub fn new(mode: DiracMode, a_plus: C64, a_minus: C64, b_plus: C64, b_minus: C64) -> Self {
        ModeSolution { mode, a_plus, a_minus, b_plus, b_minus }
    }

    /// Basis element `index` in the order `e^{−iωt}u₊, e^{iωt}u₋, te^{−iωt}u₊, te^{iωt}u₋`.
    pub fn basis(mode: DiracMode, index: usize) -> Self {
        let mut c = [ZERO; 4];
        c[index % 4] = ONE;
        ModeSolution::new(mode, c[0], c[1], c[2], c[3])
    }

    pub fn zero(mode: DiracMode) -> Self {
        ModeSolution::new(mode, ZERO, ZERO, ZERO, ZERO)
    }

    fn waves(&self, t: f64) -> (Spinor, Spinor) {
        let w = self.mode.omega();
        let e = C64::from_polar(1.0, -w * t);
        (self.mode.u_plus() * e, self.mode.u_minus() * e.conj())
    }

    /// Dirac part `ψ₁(t)`.
    pub fn psi1(&self, t: f64) -> Spinor {
        let (p, m) = self.waves(t);
        p * self.a_plus + m * self.a_minus
    }

    /// Dirac part `ψ₂(t)` multiplying `t`.
    pub fn psi2(&self, t: f64) -> Spinor {
        let (p, m) = self.waves(t);
        p * self.b_plus + m * self.b_minus
    }

    pub fn value(&self, t: f64) -> Spinor {
        self.psi1(t) + self.psi2(t) * C64::new(t, 0.0)
    }

    /// `ψ'(t) = −ihψ₁ + ψ₂ − ihtψ₂`.
    pub fn derivative(&self, t: f64) -> Spinor {
        let h = self.mode.hamiltonian();
        h * self.value(t) * (-I) + self.psi2(t)
    }

    pub fn second_derivative(&self, t: f64) -> Spinor {
        let h = self.mode.hamiltonian();
        let hh = h * h;
        -(hh * self.value(t)) - h * self.psi2(t) * (I * 2.0)
    }

    /// `(iγ⁰ d/dt + B)ψ = iγ⁰ψ₂`.
    pub fn dirac_image(&self, t: f64) -> Spinor {
        gamma0() * self.psi2(t) * I
    }

    /// `(η∗ψ)(t)` for the cutoff `eta_hat` and its derivative `eta_hat_prime`,
    /// both evaluated at `ω`.
    pub fn convolved(&self, t: f64, eta_hat: f64, eta_hat_prime: f64) -> Spinor {
        let (p, m) = self.waves(t);
        let plus = self.a_plus * eta_hat + self.b_plus * C64::new(t * eta_hat, eta_hat_prime);
        let minus = self.a_minus * eta_hat + self.b_minus * C64::new(t * eta_hat, -eta_hat_prime);
        p * plus + m * minus
    }

    /// Convolution of the `ψ₂` part alone.
    pub fn convolved_psi2(&self, t: f64, eta_hat: f64) -> Spinor {
        self.psi2(t) * C64::new(eta_hat, 0.0)
    }

    pub fn coefficient_norm(&self) -> f64 {
        [self.a_plus, self.a_minus, self.b_plus, self.b_minus].iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `|ψ₁(t)|² = |a₊|² + |a₋|²`, independent of `t`.
    pub fn dirac_norm_sqr(&self) -> f64 {
        self.a_plus.norm_sqr() + self.a_minus.norm_sqr()
    }

    pub fn sample(&self, grid: &TimeGrid) -> Vec<Spinor> {
        grid.points().map(|t| self.value(t)).collect()
    }
}

/// Uniform grid `start + i·step`, `i < len`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl TimeGrid {
    pub fn new(start: f64, end: f64, step: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite() && end > start && step > 0.0) {
            return Err(DiracError::Input(format!("bad time grid [{start}, {end}] with step {step}")));
        }
        let len = ((end - start) / step).round() as usize + 1;
        Ok(TimeGrid { start, step, len })
    }

    pub fn point(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(|i| self.point(i))
    }

    pub fn end(&self) -> f64 {
        self.point(self.len.saturating_sub(1))
    }

    pub fn halved(&self) -> Self {
        TimeGrid { start: self.start, step: self.step / 2.0, len: 2 * self.len - 1 }
    }
}

const D1: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
const D2: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0];

/// Fourth-order central first derivative at interior index `i`; samples
/// outside the grid count as zero.
pub fn fd_first(samples: &[Spinor], i: usize, h: f64) -> Spinor {
    stencil(samples, i, &D1) / C64::new(12.0 * h, 0.0)
}

pub fn fd_second(samples: &[Spinor], i: usize, h: f64) -> Spinor {
    stencil(samples, i, &D2) / C64::new(12.0 * h * h, 0.0)
}

fn stencil(samples: &[Spinor], i: usize, weights: &[f64; 5]) -> Spinor {
    let mut acc = Spinor::zeros();
    for (j, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let idx = i as isize + j as isize - 2;
        if idx >= 0 && (idx as usize) < samples.len() {
            acc += samples[idx as usize] * C64::new(w, 0.0);
        }
    }
    acc
}

/// Largest `|A₂ψ'' + A₁ψ' + A₀ψ|` over the interior (two points away from
/// each end), with fourth-order differences.
pub fn fd_el_residual(op: &ElOperator, samples: &[Spinor], h: f64) -> f64 {
    if samples.len() < 5 {
        return 0.0;
    }
    (2..samples.len() - 2)
        .map(|i| op.apply(&samples[i], &fd_first(samples, i, h), &fd_second(samples, i, h)).norm())
        .fold(0.0, f64::max)
}

/// Residual of the exact derivatives, `max_t |A₂ψ'' + A₁ψ' + A₀ψ|` on the grid.
pub fn analytic_el_residual(op: &ElOperator, solution: &ModeSolution, grid: &TimeGrid) -> f64 {
    grid.points()
        .map(|t| op.apply(&solution.value(t), &solution.derivative(t), &solution.second_derivative(t)).norm())
        .fold(0.0, f64::max)
}

/// Largest `hω` accepted by [`basis_convergence`].
pub const MAX_H_OMEGA: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub label: String,
    /// Residuals at `h, h/2, h/4`.
    pub residuals: Vec<f64>,
    /// Least-squares slope of `log residual` against `log h`.
    pub order: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisReport {
    pub k: f64,
    pub m: f64,
    pub omega: f64,
    pub steps: Vec<f64>,
    pub basis: Vec<ConvergenceRow>,
    pub min_order: f64,
}

/// Fits `log r = p log h + c` and returns `p`.
pub fn order_fit(steps: &[f64], residuals: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = steps.iter().zip(residuals).map(|(h, r)| (h.ln(), r.max(f64::MIN_POSITIVE).ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    num / den
}

/// Finite-difference EL residuals of an arbitrary sampled function on `grid`
/// and its two halvings.
pub fn residual_convergence<F: Fn(f64) -> Spinor>(
    mode: &DiracMode,
    grid: &TimeGrid,
    label: &str,
    f: F,
) -> Result<ConvergenceRow> {
    let h_omega = grid.step * mode.omega();
    if h_omega > MAX_H_OMEGA {
        return Err(DiracError::UnderResolved { h_omega, limit: MAX_H_OMEGA });
    }
    let op = el_operator_mode(mode);
    let mut g = *grid;
    let mut steps = Vec::new();
    let mut residuals = Vec::new();
    for _ in 0..3 {
        let samples: Vec<Spinor> = g.points().map(&f).collect();
        steps.push(g.step);
        residuals.push(fd_el_residual(&op, &samples, g.step));
        g = g.halved();
    }
    Ok(ConvergenceRow { label: label.to_string(), order: order_fit(&steps, &residuals), residuals })
}

/// Builds the four basis solutions and measures the order of convergence of
/// their discretized EL residuals.
pub fn solution_basis_and_residual(mode: &DiracMode, grid: &TimeGrid) -> Result<BasisReport> {
    let labels = ["exp(-iwt)u+", "exp(iwt)u-", "t exp(-iwt)u+", "t exp(iwt)u-"];
    let mut basis = Vec::new();
    for (i, label) in labels.iter().enumerate() {
        let s = ModeSolution::basis(*mode, i);
        basis.push(residual_convergence(mode, grid, label, |t| s.value(t))?);
    }
    let steps = (0..3).map(|j| grid.step / f64::powi(2.0, j)).collect();
    let min_order = basis.iter().map(|r| r.order).fold(f64::INFINITY, f64::min);
    Ok(BasisReport { k: mode.k, m: mode.m, omega: mode.omega(), steps, basis, min_order })
}
