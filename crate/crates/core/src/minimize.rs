//! Projected gradient descent for the causal action over point operators
//! and weights, with central finite-difference gradients.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action::{el_values, fit_lagrange_parameters, lagrangian_matrix, weighted_double_sum};
use crate::error::Result;
use crate::linalg::{self, c, CMat};
use crate::point::PointOperator;
use crate::random::normalize_weights;
use crate::spectrum::{chain_spectrum, lagrangian_from_moduli};
use crate::system::DiscreteSystem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceHandling {
    /// Rescale every point to unit local trace after each step.
    Rescale,
    /// Add `weight * (Σ ρ tr x − 1)^2` to the objective.
    Penalty { weight: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parametrization {
    /// Each point is written as `x = V J V^*` with `J = diag(±1)` fixed by the
    /// inertia of the initial point; the signature bound holds identically.
    Factorized,
    /// Each point is a free Hermitian matrix; after every step the spectrum
    /// is clipped to the `n` largest positive and `n` most negative
    /// eigenvalues.
    Hermitian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinimizeOptions {
    pub max_iters: usize,
    /// Stop once the projected gradient norm drops below this value.
    pub gtol: f64,
    /// Finite-difference step relative to the norm of the point coordinates.
    pub fd_step: f64,
    /// Sufficient-decrease constant of the Armijo condition.
    pub armijo: f64,
    pub trace: TraceHandling,
    pub parametrization: Parametrization,
    pub optimize_weights: bool,
    /// Eigenvalues (or factor singular values) below this fraction of the
    /// largest one count as zero when deciding ranks.
    pub rank_rel: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            max_iters: 5000,
            gtol: 1e-6,
            fd_step: 1e-5,
            armijo: 1e-4,
            trace: TraceHandling::Rescale,
            parametrization: Parametrization::Factorized,
            optimize_weights: true,
            rank_rel: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinimizeReport {
    #[serde(skip)]
    pub system: Option<DiscreteSystem>,
    pub initial_action: f64,
    pub final_action: f64,
    pub action_history: Vec<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
    /// Points that end up on the boundary of their signature class (rank
    /// lost during the descent). Criticality is not claimed in the
    /// directions that would restore the rank.
    pub clipped_points: Vec<usize>,
    pub warnings: Vec<String>,
    pub r: f64,
    pub s: f64,
    /// `max_i |ℓ(x_i)|` with the fitted Lagrange parameters.
    pub el_residual: f64,
}

impl MinimizeReport {
    pub fn system(&self) -> &DiscreteSystem {
        self.system.as_ref().expect("minimizer report carries its system")
    }

    pub fn is_clipped(&self) -> bool {
        !self.clipped_points.is_empty()
    }
}

#[derive(Clone)]
struct State {
    /// Hermitian matrices or factors `V`, depending on the parametrization.
    coords: Vec<CMat>,
    points: Vec<CMat>,
    logits: Vec<f64>,
    weights: Vec<f64>,
}

struct Gradient {
    coords: Vec<CMat>,
    logits: Vec<f64>,
    norm: f64,
}

struct Problem<'a> {
    system: &'a DiscreteSystem,
    options: &'a MinimizeOptions,
    /// Diagonal of `J` per point (factorized parametrization only).
    signs: Vec<Vec<f64>>,
}

/// Real inner product `Re tr(a^* b)`.
fn real_inner(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

impl<'a> Problem<'a> {
    fn new(system: &'a DiscreteSystem, options: &'a MinimizeOptions) -> (Self, State) {
        let mut signs = Vec::new();
        let mut coords = Vec::new();
        for p in system.points() {
            match options.parametrization {
                Parametrization::Hermitian => coords.push(p.matrix().clone()),
                Parametrization::Factorized => {
                    let eig = p.eigen();
                    let norm = eig.values.iter().fold(0.0, |a: f64, v| a.max(v.abs()));
                    let keep: Vec<usize> = (0..eig.values.len()).filter(|&k| eig.values[k].abs() > 1e-9 * norm).collect();
                    let v = CMat::from_fn(p.dim(), keep.len(), |r, col| {
                        eig.vectors[(r, keep[col])] * eig.values[keep[col]].abs().sqrt()
                    });
                    signs.push(keep.iter().map(|&k| eig.values[k].signum()).collect());
                    coords.push(v);
                }
            }
        }
        let problem = Problem { system, options, signs };
        let weights = system.weights().to_vec();
        let points = system.points().iter().map(|p| p.matrix().clone()).collect();
        let state = State { coords, points, logits: weights.iter().map(|w| w.ln()).collect(), weights };
        (problem, state)
    }

    fn point_of(&self, i: usize, coords: &CMat) -> CMat {
        match self.options.parametrization {
            Parametrization::Hermitian => coords.clone(),
            Parametrization::Factorized => {
                let mut vj = coords.clone();
                for (k, s) in self.signs[i].iter().enumerate() {
                    let mut col = vj.column_mut(k);
                    col *= c(*s, 0.0);
                }
                linalg::hermitian_part(&(vj * coords.adjoint()))
            }
        }
    }

    fn lag(&self, x: &CMat, y: &CMat) -> f64 {
        let n = self.system.n();
        chain_spectrum(x, y, n, 1e-9)
            .map(|s| lagrangian_from_moduli(&s.moduli(), n, self.system.kappa()))
            .unwrap_or(f64::INFINITY)
    }

    fn objective(&self, state: &State) -> f64 {
        let points: Vec<PointOperator> = state.points.iter().map(|m| PointOperator::from_matrix_unchecked(m.clone())).collect();
        let sys = self.system.replace_unchecked(points, state.weights.clone());
        let action = match lagrangian_matrix(&sys) {
            Ok(lag) => weighted_double_sum(&lag, &state.weights),
            Err(_) => return f64::INFINITY,
        };
        action + self.penalty(state)
    }

    fn total_trace(&self, state: &State) -> f64 {
        state.weights.iter().zip(&state.points).map(|(w, x)| w * linalg::trace(x).re).sum()
    }

    fn penalty(&self, state: &State) -> f64 {
        match self.options.trace {
            TraceHandling::Rescale => 0.0,
            TraceHandling::Penalty { weight } => weight * (self.total_trace(state) - 1.0).powi(2),
        }
    }

    /// The part of the objective that depends on point `i`, as a function
    /// of that point.
    fn row_energy(&self, state: &State, i: usize, z: &CMat) -> f64 {
        let w = &state.weights;
        let mut e = w[i] * w[i] * self.lag(z, z);
        for (j, x) in state.points.iter().enumerate() {
            if j != i {
                e += 2.0 * w[i] * w[j] * self.lag(z, x);
            }
        }
        if let TraceHandling::Penalty { weight } = self.options.trace {
            let others = self.total_trace(state) - w[i] * linalg::trace(&state.points[i]).re;
            e += weight * (others + w[i] * linalg::trace(z).re - 1.0).powi(2);
        }
        e
    }

    fn range_projector(&self, x: &CMat) -> CMat {
        let eig = linalg::hermitian_eigen(x);
        let norm = eig.values.iter().fold(0.0, |a: f64, v| a.max(v.abs()));
        let cut = self.options.rank_rel * norm;
        linalg::spectral_function(&eig, |mu| if mu.abs() > cut { 1.0 } else { 0.0 })
    }

    /// Central differences of the row energy along an orthonormal real basis
    /// of the coordinate space of point `i`.
    fn coordinate_gradient(&self, state: &State, i: usize) -> CMat {
        let v = &state.coords[i];
        let (rows, cols) = v.shape();
        let h = self.options.fd_step * linalg::operator_norm(v).max(1e-300);
        let mut g = CMat::zeros(rows, cols);
        let probe = |dir: &CMat| {
            let plus = self.row_energy(state, i, &self.point_of(i, &(v + dir.scale(h))));
            let minus = self.row_energy(state, i, &self.point_of(i, &(v - dir.scale(h))));
            (plus - minus) / (2.0 * h)
        };
        match self.options.parametrization {
            Parametrization::Hermitian => {
                for b in linalg::hermitian_basis(rows) {
                    let d = probe(&b);
                    g += b.scale(d);
                }
            }
            Parametrization::Factorized => {
                for r in 0..rows {
                    for k in 0..cols {
                        for unit in [c(1.0, 0.0), c(0.0, 1.0)] {
                            let mut e = CMat::zeros(rows, cols);
                            e[(r, k)] = unit;
                            g[(r, k)] += unit * probe(&e);
                        }
                    }
                }
            }
        }
        g
    }

    fn gradient(&self, state: &State) -> Gradient {
        let coords: Vec<CMat> = (0..state.coords.len())
            .into_par_iter()
            .map(|i| {
                let g = self.coordinate_gradient(state, i);
                self.tangent(i, state, &g)
            })
            .collect();
        let logits = if self.options.optimize_weights { self.logit_gradient(state) } else { vec![0.0; state.weights.len()] };
        let norm =
            (coords.iter().map(|g| linalg::frobenius(g).powi(2)).sum::<f64>() + logits.iter().map(|g| g * g).sum::<f64>()).sqrt();
        Gradient { coords, logits, norm }
    }

    /// Projects a coordinate gradient onto the tangent space of the
    /// constraint manifold through point `i`.
    fn tangent(&self, i: usize, state: &State, g: &CMat) -> CMat {
        let rescale = matches!(self.options.trace, TraceHandling::Rescale);
        match self.options.parametrization {
            Parametrization::Hermitian => {
                let x = &state.points[i];
                let f = x.nrows();
                let p = self.range_projector(x);
                let q = CMat::identity(f, f) - &p;
                let mut t = g - &q * g * &q;
                let rank = linalg::trace(&p).re;
                if rescale && rank > 0.5 {
                    let shift = linalg::trace(&(&p * g)).re / rank;
                    t -= p.scale(shift);
                }
                linalg::hermitian_part(&t)
            }
            Parametrization::Factorized => {
                if !rescale {
                    return g.clone();
                }
                let mut normal = state.coords[i].clone();
                for (k, s) in self.signs[i].iter().enumerate() {
                    let mut col = normal.column_mut(k);
                    col *= c(*s, 0.0);
                }
                let nn = real_inner(&normal, &normal);
                if nn > 0.0 {
                    g - normal.scale(real_inner(&normal, g) / nn)
                } else {
                    g.clone()
                }
            }
        }
    }

    fn logit_gradient(&self, state: &State) -> Vec<f64> {
        let count = state.points.len();
        let w = &state.weights;
        let mut dfdw = vec![0.0; count];
        for (d, x) in dfdw.iter_mut().zip(&state.points) {
            for (wj, y) in w.iter().zip(&state.points) {
                *d += 2.0 * wj * self.lag(x, y);
            }
        }
        if let TraceHandling::Penalty { weight } = self.options.trace {
            let excess = self.total_trace(state) - 1.0;
            for (d, x) in dfdw.iter_mut().zip(&state.points) {
                *d += 2.0 * weight * excess * linalg::trace(x).re;
            }
        }
        let mean: f64 = w.iter().zip(&dfdw).map(|(a, b)| a * b).sum();
        w.iter().zip(&dfdw).map(|(wi, d)| wi * (d - mean)).collect()
    }

    /// Maps updated coordinates back onto the constraint set.
    fn retract(&self, i: usize, coords: &CMat) -> CMat {
        let rescale = matches!(self.options.trace, TraceHandling::Rescale);
        match self.options.parametrization {
            Parametrization::Hermitian => clip_signature(coords, self.system.n(), rescale),
            Parametrization::Factorized => {
                let tr = linalg::trace(&self.point_of(i, coords)).re;
                if rescale && tr > 1e-12 {
                    coords.unscale(tr.sqrt())
                } else {
                    coords.clone()
                }
            }
        }
    }

    fn step(&self, state: &State, dir: &[CMat], dir_logits: &[f64], alpha: f64) -> State {
        let coords: Vec<CMat> =
            state.coords.iter().zip(dir).enumerate().map(|(i, (v, d))| self.retract(i, &(v - d.scale(alpha)))).collect();
        let points = coords.iter().enumerate().map(|(i, v)| self.point_of(i, v)).collect();
        let logits: Vec<f64> = state.logits.iter().zip(dir_logits).map(|(l, d)| l - alpha * d).collect();
        State { coords, points, weights: softmax(&logits), logits }
    }

    fn clipped(&self, state: &State) -> Vec<usize> {
        let full = (2 * self.system.n()).min(self.system.f());
        (0..state.points.len())
            .filter(|&i| match self.options.parametrization {
                Parametrization::Hermitian => linalg::trace(&self.range_projector(&state.points[i])).re.round() < full as f64,
                Parametrization::Factorized => {
                    let sv = state.coords[i].clone().singular_values();
                    let max = sv.iter().fold(0.0, |a: f64, &s| a.max(s));
                    sv.iter().any(|&s| s < 1e-3 * max)
                }
            })
            .collect()
    }
}

/// Keeps the `n` largest positive and `n` most negative eigenvalues and
/// optionally rescales to unit trace.
pub fn clip_signature(x: &CMat, n: usize, unit_trace: bool) -> CMat {
    let eig = linalg::hermitian_eigen(x);
    let dim = eig.values.len();
    let mut keep = vec![0.0; dim];
    for k in 0..dim.min(n) {
        let idx = dim - 1 - k;
        if eig.values[idx] > 0.0 {
            keep[idx] = eig.values[idx];
        }
        if eig.values[k] < 0.0 {
            keep[k] = eig.values[k];
        }
    }
    let mut out = CMat::zeros(dim, dim);
    for (k, &mu) in keep.iter().enumerate() {
        if mu != 0.0 {
            let v = eig.vectors.column(k);
            out += (v * v.adjoint()).scale(mu);
        }
    }
    if unit_trace {
        let tr: f64 = keep.iter().sum();
        if tr > 1e-12 {
            out.unscale_mut(tr);
        }
    }
    linalg::hermitian_part(&out)
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut w: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    normalize_weights(&mut w);
    w
}

/// Minimizes the causal action starting from `initial`.
///
/// The returned system carries Lagrange parameters fitted by
/// [`fit_lagrange_parameters`]. An initial system whose projected gradient
/// is already below `gtol` is returned unchanged.
pub fn minimize_action(initial: &DiscreteSystem, options: &MinimizeOptions) -> Result<MinimizeReport> {
    let (problem, mut state) = Problem::new(initial, options);
    let mut value = problem.objective(&state);
    let initial_action = value;
    let mut history = vec![value];
    let mut warnings = Vec::new();
    let mut grad = problem.gradient(&state);

    if grad.norm < options.gtol {
        let (r, s) = fit_lagrange_parameters(initial)?;
        let system = initial.clone().with_lagrange_parameters(r, s);
        let el_residual = el_values(&system)?.iter().fold(0.0, |a: f64, v| a.max(v.abs()));
        return Ok(MinimizeReport {
            system: Some(system),
            initial_action,
            final_action: initial_action,
            action_history: history,
            iterations: 0,
            gradient_norm: grad.norm,
            converged: true,
            clipped_points: problem.clipped(&state),
            warnings,
            r,
            s,
            el_residual,
        });
    }

    let directions = |g: &Gradient, st: &State| -> (Vec<CMat>, Vec<f64>) {
        let dp = g.coords.iter().zip(&st.weights).map(|(m, w)| m.unscale(*w)).collect();
        let dl = g.logits.iter().zip(&st.weights).map(|(d, w)| d / w).collect();
        (dp, dl)
    };
    let (mut dir_p, mut dir_l) = directions(&grad, &state);
    let dir_norm = dir_p.iter().map(linalg::frobenius).fold(0.0, f64::max).max(1e-300);
    let mut alpha = 0.1 / dir_norm;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iters {
        iterations += 1;
        let slope: f64 = grad.coords.iter().zip(&dir_p).map(|(g, d)| real_inner(g, d)).sum::<f64>()
            + grad.logits.iter().zip(&dir_l).map(|(g, d)| g * d).sum::<f64>();
        let step_norm =
            dir_p.iter().map(linalg::frobenius).fold(0.0, f64::max) + dir_l.iter().fold(0.0, |a: f64, d| a.max(d.abs()));
        let mut trial_alpha = alpha;
        let accepted = loop {
            let trial = problem.step(&state, &dir_p, &dir_l, trial_alpha);
            let trial_value = problem.objective(&trial);
            if trial_value <= value - options.armijo * trial_alpha * slope {
                break Some((trial, trial_value));
            }
            trial_alpha *= 0.5;
            if trial_alpha * step_norm < 1e-16 {
                break None;
            }
        };
        let Some((next, next_value)) = accepted else {
            warnings.push(format!("step-size underflow after {iterations} iterations"));
            break;
        };
        let next_grad = problem.gradient(&next);
        let (next_dp, next_dl) = directions(&next_grad, &next);
        let mut ss = 0.0;
        let mut sy = 0.0;
        for k in 0..state.coords.len() {
            let s = &next.coords[k] - &state.coords[k];
            let y = &next_dp[k] - &dir_p[k];
            ss += real_inner(&s, &s);
            sy += real_inner(&s, &y);
            let sl = next.logits[k] - state.logits[k];
            ss += sl * sl;
            sy += sl * (next_dl[k] - dir_l[k]);
        }
        alpha = if sy > 0.0 && ss > 0.0 { (ss / sy).clamp(1e-12, 1e6) } else { 2.0 * trial_alpha };
        state = next;
        value = next_value;
        grad = next_grad;
        dir_p = next_dp;
        dir_l = next_dl;
        history.push(value);
        if grad.norm < options.gtol {
            converged = true;
            break;
        }
    }
    if !converged && warnings.is_empty() {
        warnings.push(format!("no convergence within {} iterations", options.max_iters));
    }

    let mut weights = state.weights.clone();
    normalize_weights(&mut weights);
    let points = state.points.iter().map(|m| PointOperator::from_matrix_unchecked(m.clone())).collect();
    let system = initial.replace_unchecked(points, weights);
    let (r, s) = fit_lagrange_parameters(&system)?;
    let system = system.with_lagrange_parameters(r, s);
    let el_residual = el_values(&system)?.iter().fold(0.0, |a: f64, v| a.max(v.abs()));
    let final_action = crate::action::causal_action(&system)?;
    Ok(MinimizeReport {
        system: Some(system),
        initial_action,
        final_action,
        action_history: history,
        iterations,
        gradient_norm: grad.norm,
        converged,
        clipped_points: problem.clipped(&state),
        warnings,
        r,
        s,
        el_residual,
    })
}

/// Projected finite-difference gradient norm of the action at `system`.
pub fn projected_gradient_norm(system: &DiscreteSystem, options: &MinimizeOptions) -> f64 {
    let (problem, state) = Problem::new(system, options);
    problem.gradient(&state).norm
}

/// Unit-trace point `½ (1 + τ v·σ)`-type operator on C²: eigenvalues `½ ± τ`
/// along the unit Bloch vector `v`.
pub fn bloch_point(tau: f64, v: [f64; 3]) -> PointOperator {
    let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let (a, b, d) = (v[0] / norm, v[1] / norm, v[2] / norm);
    let m =
        CMat::from_row_slice(2, 2, &[c(0.5 + tau * d, 0.0), c(tau * a, -tau * b), c(tau * a, tau * b), c(0.5 - tau * d, 0.0)]);
    PointOperator::from_matrix_unchecked(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::causal_action;
    use crate::random::{random_system, RandomSystemSpec};

    #[test]
    fn single_projector_stays_at_half_plus_kappa() {
        let kappa = 0.1;
        let start = bloch_point(0.5 + 1e-4, [0.3, 0.1, 1.0]);
        let system = DiscreteSystem::new(1, kappa, vec![start], vec![1.0], vec![0.0]).unwrap();
        let report = minimize_action(&system, &MinimizeOptions::default()).unwrap();
        assert!((report.final_action - (0.5 + kappa)).abs() < 1e-6, "{}", report.final_action);
    }

    #[test]
    fn critical_start_is_returned_unchanged() {
        let x = PointOperator::diagonal(&[1.0, 0.0]);
        let system = DiscreteSystem::new(1, 0.1, vec![x], vec![1.0], vec![0.0]).unwrap();
        let report = minimize_action(&system, &MinimizeOptions::default()).unwrap();
        assert_eq!(report.iterations, 0);
        assert_eq!(report.system().points(), system.points());
    }

    #[test]
    fn two_point_descent_is_monotone_and_converges() {
        let system = random_system(&RandomSystemSpec::new(2, 2, 1, 0.1, 5)).unwrap();
        let before = causal_action(&system).unwrap();
        let report = minimize_action(&system, &MinimizeOptions::default()).unwrap();
        assert!(report.final_action <= before + 1e-12);
        for pair in report.action_history.windows(2).skip(1) {
            assert!(pair[1] <= pair[0] + 1e-15);
        }
        assert!(report.converged, "{:?} {}", report.warnings, report.gradient_norm);
        let volume: f64 = report.system().weights().iter().sum();
        assert!((volume - 1.0).abs() <= 1e-15);
    }
}
