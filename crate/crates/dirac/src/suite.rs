use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::action::{
    action_mode, positivity_sweep, random_coefficient, windowed_action, windowed_samples, PositivityReport, Window,
};
use crate::commutator::{conservation, dirac_commutator, dirac_sequence_sweep, DiracSequenceReport, LineQuadrature};
use crate::error::Result;
use crate::mode::{
    analytic_el_residual, el_operator_mode, residual_convergence, solution_basis_and_residual, BasisReport, DiracMode,
    ModeSolution, Spinor, TimeGrid,
};
use crate::profile::CutoffProfile;

/// A named check with its measured value and limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    /// `true` when the value must stay at or above the limit.
    #[serde(default)]
    pub lower_bound: bool,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Check { name: name.into(), value, limit, lower_bound: false, passed: value <= limit }
    }

    pub fn at_least(name: &str, value: f64, limit: f64) -> Self {
        Check { name: name.into(), value, limit, lower_bound: true, passed: value >= limit }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiracSuiteConfig {
    pub momenta: Vec<f64>,
    pub mass: f64,
    pub delta_g: f64,
    pub seed: u64,
    pub positivity_samples: usize,
    pub conservation_times: usize,
    pub sequence_deltas: Vec<f64>,
}

impl Default for DiracSuiteConfig {
    fn default() -> Self {
        DiracSuiteConfig {
            momenta: vec![0.0],
            mass: 1.0,
            delta_g: 1.0,
            seed: 7,
            positivity_samples: 200,
            conservation_times: 10,
            sequence_deltas: vec![1.0, 10.0, 100.0, 1000.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    pub k: f64,
    pub omega: f64,
    /// `max |eig(γ⁰ symbol(k⁰)) − (|k⁰| ± ω)²| / (|k⁰| + ω)²` on a frequency grid.
    pub symbol_error: f64,
    /// Smallest `|det symbol(k⁰)|` on the grid away from `±ω`.
    pub off_shell_min_det: f64,
    /// Exact-derivative residual of `e^{−iωt}u₊`.
    pub plane_wave_residual: f64,
    pub basis: BasisReport,
    /// Convergence order of the off-shell wave `e^{−i(ω+½)t}u₊`.
    pub off_shell_order: f64,
    pub off_shell_residual: f64,
    pub action: f64,
    /// `|action − windowed rewriting| / magnitude`.
    pub action_oracle_gap: f64,
    pub action_imaginary: f64,
    pub conservation_drift: f64,
    pub closed_form_gap: f64,
    /// `|⟨ψ₁|ψ₁⟩| / (η̂(0) ω |ψ₁|²)` for a solution `ψ₁` of the Dirac equation.
    pub dirac_part_value: f64,
    pub sequence: DiracSequenceReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiracSuiteReport {
    pub config: DiracSuiteConfig,
    pub modes: Vec<ModeReport>,
    pub positivity: PositivityReport,
    pub checks: Vec<Check>,
}

impl DiracSuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    /// Columns `k, omega, action, drift, min_order, sequence_ratio`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,omega,action,conservation_drift,min_order,sequence_ratio\n");
        for m in &self.modes {
            let _ = writeln!(
                out,
                "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                m.k,
                m.omega,
                m.action,
                m.conservation_drift,
                m.basis.min_order,
                m.sequence.final_ratio()
            );
        }
        out
    }
}

fn random_solution(mode: DiracMode, rng: &mut ChaCha8Rng, with_b: bool) -> ModeSolution {
    let z = C64::new(0.0, 0.0);
    let (ap, am) = (random_coefficient(rng), random_coefficient(rng));
    let (bp, bm) = if with_b { (random_coefficient(rng), random_coefficient(rng)) } else { (z, z) };
    ModeSolution::new(mode, ap, am, bp, bm)
}

fn symbol_checks(mode: &DiracMode) -> (f64, f64) {
    let op = el_operator_mode(mode);
    let w = mode.omega();
    let mut err: f64 = 0.0;
    let mut min_det = f64::INFINITY;
    for j in 0..=400 {
        let k0 = -3.0 * w + 6.0 * w * j as f64 / 400.0;
        let ev = op.symbol_eigenvalues(k0);
        let mut want = [(k0.abs() - w).powi(2), (k0.abs() + w).powi(2)];
        want.sort_by(f64::total_cmp);
        let size = (k0.abs() + w).powi(2);
        err = err.max((ev[0] - want[0]).abs().max((ev[1] - want[1]).abs()) / size);
        if (k0.abs() - w).abs() > 0.05 * w {
            min_det = min_det.min(op.symbol(k0).determinant().norm());
        }
    }
    (err, min_det)
}

pub fn mode_report(k: f64, config: &DiracSuiteConfig) -> Result<ModeReport> {
    let mode = DiracMode::new(k, config.mass)?;
    let w = mode.omega();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ k.to_bits());
    let profile = CutoffProfile::new(config.delta_g)?;
    let (symbol_error, off_shell_min_det) = symbol_checks(&mode);
    let op = el_operator_mode(&mode);
    let window_grid = TimeGrid::new(-5.0, 5.0, 0.01)?;
    let plane_wave_residual = analytic_el_residual(&op, &ModeSolution::basis(mode, 0), &window_grid);

    let step = 0.08 / w;
    let basis_grid = TimeGrid::new(-2.0, 2.0, step)?;
    let basis = solution_basis_and_residual(&mode, &basis_grid)?;
    let up = mode.u_plus();
    let off = residual_convergence(&mode, &basis_grid, "off-shell", |t| up * C64::from_polar(1.0, -(w + 0.5) * t))?;

    let action_grid = TimeGrid::new(-5.0, 5.0, 0.005)?;
    let solution = random_solution(mode, &mut rng, true);
    let window = Window::new(0.0, 4.0)?;
    let action = action_mode(&windowed_samples(&solution, &window, &action_grid), &mode, &profile, &action_grid)?;
    let oracle = windowed_action(&solution, &window, &profile, &action_grid);

    let psi = random_solution(mode, &mut rng, true);
    let phi = random_solution(mode, &mut rng, true);
    let n = config.conservation_times.max(2);
    let times: Vec<f64> = (0..n).map(|i| -3.0 + 6.0 * i as f64 / (n - 1) as f64).collect();
    let quad = LineQuadrature::default();
    let cons = conservation(&psi, &phi, &profile, &times, &quad)?;
    let dirac = random_solution(mode, &mut rng, false);
    let dv = dirac_commutator(&dirac, &dirac, &profile, 0.7, &quad)?;
    let sequence = dirac_sequence_sweep(&mode, &config.sequence_deltas, 0.3, config.seed)?;

    Ok(ModeReport {
        k,
        omega: w,
        symbol_error,
        off_shell_min_det,
        plane_wave_residual,
        basis,
        off_shell_order: off.order,
        off_shell_residual: off.residuals.last().copied().unwrap_or(0.0),
        action: action.value,
        action_oracle_gap: (action.value - oracle.value).abs() / oracle.magnitude,
        action_imaginary: action.imaginary.abs() / action.magnitude,
        conservation_drift: cons.relative_drift(),
        closed_form_gap: cons.relative_closed_form_gap(),
        dirac_part_value: dv.value.norm() / (profile.eta_hat(0.0) * w * dirac.dirac_norm_sqr()),
        sequence,
    })
}

/// Runs the per-mode suite for every momentum in parallel, plus the random
/// positivity sweep, and evaluates the checks.
pub fn run_suite(config: &DiracSuiteConfig) -> Result<DiracSuiteReport> {
    let modes = config.momenta.par_iter().map(|&k| mode_report(k, config)).collect::<Result<Vec<_>>>()?;
    let profile = CutoffProfile::new(config.delta_g)?;
    let positivity = positivity_sweep(config.positivity_samples, &profile, config.seed)?;
    let mut checks = Vec::new();
    for m in &modes {
        let tag = |s: &str| format!("k={} {s}", m.k);
        checks.push(Check::at_most(&tag("symbol eigenvalues"), m.symbol_error, 1e-12));
        checks.push(Check::at_least(&tag("off-shell symbol determinant"), m.off_shell_min_det, 1e-6));
        checks.push(Check::at_most(&tag("plane wave residual"), m.plane_wave_residual, 1e-12));
        checks.push(Check::at_least(&tag("basis residual order"), m.basis.min_order, 3.5));
        checks.push(Check::at_most(&tag("off-shell residual order"), m.off_shell_order.abs(), 0.5));
        checks.push(Check::at_most(&tag("action oracle agreement"), m.action_oracle_gap, 1e-8));
        checks.push(Check::at_most(&tag("action imaginary part"), m.action_imaginary, 1e-10));
        checks.push(Check::at_most(&tag("conservation drift"), m.conservation_drift, 1e-8));
        checks.push(Check::at_most(&tag("closed form agreement"), m.closed_form_gap, 1e-8));
        checks.push(Check::at_most(&tag("Dirac part inner product"), m.dirac_part_value, 1e-12));
        checks.push(Check::at_most(&tag("Dirac sequence ratio"), (m.sequence.final_ratio() - 1.0).abs(), 0.02));
    }
    checks.push(Check::at_least("action positivity (min relative)", positivity.min_relative, f64::MIN_POSITIVE));
    checks.push(Check::at_most("action of zero", positivity.zero_value.abs(), 0.0));
    checks.push(Check::at_most("action imaginary part (sweep)", positivity.max_imaginary, 1e-10));
    Ok(DiracSuiteReport { config: config.clone(), modes, positivity, checks })
}

/// Samples of `ψ` on a grid, for plot output.
pub fn plot_samples(solution: &ModeSolution, grid: &TimeGrid) -> Vec<(f64, Spinor)> {
    grid.points().map(|t| (t, solution.value(t))).collect()
}
