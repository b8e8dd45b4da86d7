use cfs_dirac::asymptotics::{dirac_gammas, slash};
use cfs_dirac::kernel::slope;
use cfs_dirac::*;
use nalgebra::Matrix4;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn solution(k: f64, m: f64, coeffs: [f64; 8]) -> ModeSolution {
    ModeSolution::new(
        DiracMode::new(k, m).unwrap(),
        c(coeffs[0], coeffs[1]),
        c(coeffs[2], coeffs[3]),
        c(coeffs[4], coeffs[5]),
        c(coeffs[6], coeffs[7]),
    )
}

// ---- modes -------------------------------------------------------------

#[test]
fn clifford_relations_are_exact() {
    assert_eq!(clifford_defect(), 0.0);
}

#[test]
fn spinors_diagonalize_the_hamiltonian() {
    for (k, m) in [(0.0, 1.0), (0.7, 1.0), (-2.0, 0.3), (1.5, 0.0)] {
        let mode = DiracMode::new(k, m).unwrap();
        let h = mode.hamiltonian();
        let w = mode.omega();
        assert_eq!(w * w, k * k + m * m);
        let (up, um) = (mode.u_plus(), mode.u_minus());
        assert!((h * up - up * c(w, 0.0)).norm() < 1e-14);
        assert!((h * um + um * c(w, 0.0)).norm() < 1e-14);
        assert!(up.dotc(&um).norm() < 1e-15);
    }
}

#[test]
fn invalid_modes_are_rejected() {
    assert!(DiracMode::new(0.0, 0.0).is_err());
    assert!(DiracMode::new(1.0, -1.0).is_err());
    assert!(DiracMode::new(f64::NAN, 1.0).is_err());
}

#[test]
fn symbol_eigenvalues_are_shifted_mass_shells() {
    let mode = DiracMode::new(0.6, 0.8).unwrap();
    let op = el_operator_mode(&mode);
    for k0 in [-2.5, -1.0, -0.3, 0.0, 0.4, 1.0, 3.0] {
        let ev = op.symbol_eigenvalues(k0);
        let mut want = [(f64::abs(k0) - 1.0).powi(2), (f64::abs(k0) + 1.0).powi(2)];
        want.sort_by(f64::total_cmp);
        assert!((ev[0] - want[0]).abs() < 1e-13 && (ev[1] - want[1]).abs() < 1e-13, "{k0}: {ev:?} vs {want:?}");
    }
    // singular exactly on the mass shell
    assert!(op.symbol(1.0).determinant().norm() < 1e-13);
    assert!(op.symbol(0.9).determinant().norm() > 1e-3);
}

#[test]
fn plane_wave_at_rest_is_annihilated() {
    let mode = DiracMode::new(0.0, 1.0).unwrap();
    let op = el_operator_mode(&mode);
    let grid = TimeGrid::new(-5.0, 5.0, 0.01).unwrap();
    assert!(analytic_el_residual(&op, &ModeSolution::basis(mode, 0), &grid) <= 1e-12);
}

#[test]
fn basis_residuals_converge_at_fourth_order() {
    for (k, m) in [(0.0, 1.0), (1.3, 0.5)] {
        let mode = DiracMode::new(k, m).unwrap();
        let grid = TimeGrid::new(-2.0, 2.0, 0.08 / mode.omega()).unwrap();
        let report = solution_basis_and_residual(&mode, &grid).unwrap();
        assert_eq!(report.basis.len(), 4);
        for row in &report.basis {
            assert!(row.order >= 3.5, "{}: order {}", row.label, row.order);
            assert!(row.residuals.windows(2).all(|w| w[1] < w[0]));
        }
        // the Jordan-block solutions carry the same order as the plane waves
        assert!(report.basis[2].order >= 3.5 && report.basis[3].order >= 3.5);
    }
}

#[test]
fn off_shell_wave_does_not_converge() {
    let mode = DiracMode::new(0.0, 1.0).unwrap();
    let grid = TimeGrid::new(-2.0, 2.0, 0.05).unwrap();
    let up = mode.u_plus();
    let row = residual_convergence(&mode, &grid, "off", |t| up * C64::from_polar(1.0, -1.5 * t)).unwrap();
    assert!(row.order.abs() < 0.1, "order {}", row.order);
    // |symbol(1.5) u₊| = |(1.5 − 1)²| for the upper component at rest
    assert!((row.residuals[2] - 0.25).abs() < 1e-6, "{:?}", row.residuals);
}

#[test]
fn under_resolved_grid_is_an_error() {
    let mode = DiracMode::new(3.0, 4.0).unwrap();
    let grid = TimeGrid::new(0.0, 1.0, 0.05).unwrap();
    match solution_basis_and_residual(&mode, &grid) {
        Err(DiracError::UnderResolved { h_omega, .. }) => assert!((h_omega - 0.25).abs() < 1e-12),
        other => panic!("expected an under-resolution error, got {other:?}"),
    }
}

#[test]
fn derivatives_match_finite_differences() {
    let s = solution(0.4, 1.1, [0.3, -0.2, 1.0, 0.5, -0.7, 0.1, 0.2, 0.9]);
    let (t, h) = (0.37, 1e-5);
    let fd = (s.value(t + h) - s.value(t - h)) / c(2.0 * h, 0.0);
    assert!((fd - s.derivative(t)).norm() < 1e-8);
    let fd2 = (s.derivative(t + h) - s.derivative(t - h)) / c(2.0 * h, 0.0);
    assert!((fd2 - s.second_derivative(t)).norm() < 1e-8);
    // (iγ⁰ d/dt + B)ψ = iγ⁰ψ₂
    let direct = gamma0() * s.derivative(t) * c(0.0, 1.0) + s.mode.b() * s.value(t);
    assert!((direct - s.dirac_image(t)).norm() < 1e-13);
}

// ---- cutoff ------------------------------------------------------------

#[test]
fn cutoff_is_even_with_positive_transform() {
    let p = CutoffProfile::new(1.3).unwrap();
    for tau in [0.1, 0.7, 2.0] {
        assert_eq!(p.eta(tau), p.eta(-tau));
    }
    // trapezoid of η(τ) cos(ωτ) against the closed form
    for w in [0.0, 0.8, 2.5] {
        let h = 1e-3;
        let sum: f64 = (-8000..=8000).map(|j| p.eta(j as f64 * h) * (w * j as f64 * h).cos()).sum::<f64>() * h;
        assert!((sum - p.eta_hat(w)).abs() < 1e-12, "{w}");
        assert!(p.eta_hat(w) > 0.0);
    }
    let d = CutoffProfile::dirac_sequence(1e3).unwrap();
    assert!((d.eta_hat(0.0) - 1.0).abs() < 1e-15);
    assert!(CutoffProfile::new(0.0).is_err());
}

// ---- action ------------------------------------------------------------

#[test]
fn action_of_zero_is_zero() {
    let mode = DiracMode::new(0.3, 1.0).unwrap();
    let grid = TimeGrid::new(-3.0, 3.0, 0.01).unwrap();
    let a = action_mode(&vec![Spinor::zeros(); grid.len], &mode, &CutoffProfile::default(), &grid).unwrap();
    assert_eq!(a.value, 0.0);
    assert_eq!(a.imaginary, 0.0);
}

#[test]
fn action_agrees_with_the_windowed_rewriting() {
    let grid = TimeGrid::new(-5.0, 5.0, 0.005).unwrap();
    let window = Window::new(0.2, 4.0).unwrap();
    assert!(window.contains(&grid));
    for (k, m) in [(0.0, 1.0), (0.9, 0.6)] {
        let s = solution(k, m, [1.0, 0.0, 0.2, -0.4, 0.3, 0.3, -0.5, 0.1]);
        let profile = CutoffProfile::default();
        let direct = action_mode(&windowed_samples(&s, &window, &grid), &s.mode, &profile, &grid).unwrap();
        let oracle = windowed_action(&s, &window, &profile, &grid);
        assert!((direct.value - oracle.value).abs() <= 1e-8 * oracle.magnitude, "{direct:?} vs {oracle:?}");
        assert!(direct.imaginary.abs() <= 1e-10 * direct.magnitude);
        assert!(direct.value > 0.0);
        assert!(direct.refinement_gap() < 1e-6);
    }
}

#[test]
fn action_samples_must_match_the_grid() {
    let mode = DiracMode::new(0.0, 1.0).unwrap();
    let grid = TimeGrid::new(0.0, 1.0, 0.1).unwrap();
    assert!(action_mode(&[Spinor::zeros(); 3], &mode, &CutoffProfile::default(), &grid).is_err());
}

#[test]
fn random_windowed_solutions_have_positive_action() {
    let report = positivity_sweep(200, &CutoffProfile::default(), 7).unwrap();
    assert_eq!(report.rows.len(), 200);
    assert!(report.passed(1e-10), "min relative {}", report.min_relative);
    assert_eq!(report.zero_value, 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn action_is_quadratic_and_nonnegative(
        coeffs in prop::array::uniform8(-1.0f64..1.0),
        k in -1.5f64..1.5,
        scale in 0.1f64..3.0,
    ) {
        let grid = TimeGrid::new(-4.0, 4.0, 0.02).unwrap();
        let window = Window::new(0.0, 3.0).unwrap();
        let profile = CutoffProfile::default();
        let s = solution(k, 1.0, coeffs);
        let scaled = ModeSolution::new(s.mode, s.a_plus * scale, s.a_minus * scale, s.b_plus * scale, s.b_minus * scale);
        let a = action_mode(&windowed_samples(&s, &window, &grid), &s.mode, &profile, &grid).unwrap();
        let b = action_mode(&windowed_samples(&scaled, &window, &grid), &s.mode, &profile, &grid).unwrap();
        prop_assert!(a.value >= 0.0);
        prop_assert!((b.value - scale * scale * a.value).abs() <= 1e-10 * b.magnitude.max(1e-300));
    }
}

// ---- commutator inner product ------------------------------------------

#[test]
fn commutator_is_conserved_and_matches_the_closed_form() {
    let profile = CutoffProfile::default();
    let psi = solution(0.5, 1.0, [0.4, 0.1, -0.3, 0.8, 0.6, -0.2, 0.1, 0.5]);
    let phi = solution(0.5, 1.0, [-0.1, 0.7, 0.2, 0.2, -0.4, 0.3, 0.9, -0.6]);
    let times: Vec<f64> = (0..10).map(|i| -3.0 + 0.6 * i as f64).collect();
    let report = conservation(&psi, &phi, &profile, &times, &LineQuadrature::default()).unwrap();
    assert!(report.relative_drift() <= 1e-8, "drift {}", report.relative_drift());
    assert!(report.relative_closed_form_gap() <= 1e-8);
    assert!(report.values.iter().all(|v| v.refinement_gap <= 1e-10 * v.scale));
}

#[test]
fn commutator_is_hermitian() {
    let profile = CutoffProfile::new(2.0).unwrap();
    let psi = solution(-0.8, 0.5, [0.4, 0.1, -0.3, 0.8, 0.6, -0.2, 0.1, 0.5]);
    let phi = solution(-0.8, 0.5, [-0.1, 0.7, 0.2, 0.2, -0.4, 0.3, 0.9, -0.6]);
    let q = LineQuadrature::default();
    let a = dirac_commutator(&psi, &phi, &profile, 1.1, &q).unwrap();
    let b = dirac_commutator(&phi, &psi, &profile, 1.1, &q).unwrap();
    assert!((a.value - b.value.conj()).norm() < 1e-12 * a.scale);
    let d = dirac_commutator(&psi, &psi, &profile, 1.1, &q).unwrap();
    assert!(d.value.im.abs() < 1e-12 * d.scale);
}

#[test]
fn pure_dirac_solutions_are_neutral() {
    let profile = CutoffProfile::default();
    let psi = solution(0.2, 1.0, [0.4, 0.1, -0.3, 0.8, 0.0, 0.0, 0.0, 0.0]);
    let v = dirac_commutator(&psi, &psi, &profile, 0.5, &LineQuadrature::default()).unwrap();
    assert!(v.value.norm() < 1e-14, "{}", v.value);
    assert_eq!(commutator_closed_form(&psi, &psi, &profile, 0.5), C64::new(0.0, 0.0));
}

#[test]
fn mixed_modes_are_rejected() {
    let a = solution(0.2, 1.0, [1.0; 8]);
    let b = solution(0.3, 1.0, [1.0; 8]);
    assert!(dirac_commutator(&a, &b, &CutoffProfile::default(), 0.0, &LineQuadrature::default()).is_err());
}

#[test]
fn positive_subspace_is_positive_to_first_order() {
    // ⟨ψ|ψ⟩ for ψ = ψ^D + iλtψ^D is 4λ Σ η̂(ω)|a±|² + O(λ²)
    let profile = CutoffProfile::new(1.0).unwrap();
    let dirac = solution(0.7, 1.0, [0.6, -0.2, 0.3, 0.5, 0.0, 0.0, 0.0, 0.0]);
    let expected = 4.0 * profile.eta_hat(dirac.mode.omega()) * dirac.dirac_norm_sqr();
    let q = LineQuadrature::default();
    let mut remainders = Vec::new();
    for l in [1e-3, 2e-3, 4e-3] {
        let s = positive_direction(&dirac, l);
        let v = dirac_commutator(&s, &s, &profile, 0.4, &q).unwrap().value;
        assert!(v.re > 0.0 && v.im.abs() < 1e-14);
        remainders.push((l, (v.re - l * expected).abs()));
    }
    // the remainder is quadratic
    let x: Vec<f64> = remainders.iter().map(|r| r.0.ln()).collect();
    let y: Vec<f64> = remainders.iter().map(|r| r.1.ln()).collect();
    assert!((slope(&x, &y) - 2.0).abs() < 0.05, "{remainders:?}");
}

#[test]
fn dirac_sequence_recovers_the_l2_norm() {
    let mode = DiracMode::new(0.0, 1.0).unwrap();
    let report = dirac_sequence_sweep(&mode, &[1.0, 10.0, 100.0, 1000.0], 0.3, 3).unwrap();
    for row in &report.rows {
        assert!((row.linear_coefficient - row.expected).abs() <= 1e-8 * row.expected);
    }
    // η̂(ω) = exp(−ω²/4δ) for the unit-mass cutoff
    assert!((report.rows[0].ratio - (-0.25f64).exp()).abs() < 1e-8);
    assert!((report.final_ratio() - 1.0).abs() <= 0.02);
    assert!(report.rows.windows(2).all(|w| w[1].ratio > w[0].ratio));
}

// ---- Bessel kernels ----------------------------------------------------

#[test]
fn bessel_kernel_matches_reference_values() {
    // references from an independent Bessel implementation
    let t = bessel_t_a(2.0, 30.0, 1.0, 1e-12).unwrap();
    assert!((t.re - -3.5179249162688793e-4).abs() < 1e-15);
    assert!((t.im - 3.119572578429521e-4).abs() < 1e-15);
    let past = bessel_t_a(2.0, 30.0, -1.0, 1e-12).unwrap();
    assert_eq!(past, t.conj());
    let s = bessel_t_a(2.0, -3.0, 1.0, 1e-12).unwrap();
    assert!((s.re - 2.5903075155463937e-4).abs() < 1e-16 && s.im == 0.0);
}

#[test]
fn light_cone_is_rejected() {
    assert!(matches!(bessel_t_a(1.0, 1e-14, 1.0, 1e-12), Err(DiracError::LightCone { .. })));
    assert!(bessel_t_a(0.0, 1.0, 1.0, 1e-12).is_err());
}

#[test]
fn kernel_derivative_matches_finite_differences() {
    for xi2 in [3.0, 40.0, -2.0] {
        let h = 1e-5 * f64::abs(xi2);
        let fd = (bessel_t_a(1.5, xi2 + h, 1.0, 1e-12).unwrap() - bessel_t_a(1.5, xi2 - h, 1.0, 1e-12).unwrap()) / (2.0 * h);
        let d = bessel_t_a_derivative(1.5, xi2, 1.0, 1e-12).unwrap();
        assert!((fd - d).norm() <= 1e-7 * d.norm(), "{xi2}: {fd} vs {d}");
    }
}

#[test]
fn kernel_rescaling_identity() {
    // T_{4a}(ξ²/4) = 4 T_a(ξ²)
    for xi2 in [0.5, 12.0, 900.0, -0.7, -6.0] {
        let a = bessel_t_a(0.8, xi2, 1.0, 1e-12).unwrap();
        let b = bessel_t_a(3.2, xi2 / 4.0, 1.0, 1e-12).unwrap();
        assert!((b - a * 4.0).norm() <= 1e-13 * a.norm(), "{xi2}");
    }
}

#[test]
fn timelike_kernel_envelope() {
    let grid = log_grid(1e4, 1e5, 21);
    let p = timelike_exponent(1.0, &grid, 1e-12).unwrap();
    assert!((p + 0.75).abs() <= 0.02, "{p}");
    for &xi2 in &grid {
        let t = bessel_t_a(1.0, xi2, 1.0, 1e-12).unwrap().norm();
        assert!((t / timelike_envelope(1.0, xi2) - 1.0).abs() <= 1.0 / xi2.sqrt());
    }
}

#[test]
fn spacelike_kernel_decays_exponentially() {
    for a in [0.5, 1.0, 4.0] {
        let r: Vec<f64> = (0..20).map(|i| (10.0 + i as f64) / f64::sqrt(a)).collect();
        let (raw, corrected) = spacelike_decay(a, &r, 1e-12).unwrap();
        assert!((corrected + a.sqrt()).abs() <= 0.01 * a.sqrt(), "{a}: {corrected}");
        assert!((raw + a.sqrt()).abs() <= 0.1 * a.sqrt(), "{a}: {raw}");
    }
}

// ---- asymptotics -------------------------------------------------------

#[test]
fn superposition_ratio_plateaus_at_minus_four() {
    // two integrations by parts at the kink give U → −4 c a₀ T_{a₀} / ξ²
    let report = kernel_asymptotics(&KernelAsymptoticsConfig::default(), 1e-12, 1e-12).unwrap();
    assert!(report.plateau_spread <= 0.1, "{}", report.plateau_spread);
    assert!((report.plateau - C64::new(-4.0, 0.0)).norm() <= 0.05, "{}", report.plateau);
    assert!(report.control_fraction <= 1e-2, "{}", report.control_fraction);
    assert!((report.t_exponent + 0.75).abs() <= 0.02);
    assert!((report.p_exponent + 0.75).abs() <= 0.05);
    assert!((report.m_exponent + 1.5).abs() <= 0.05);
    assert!((report.q_exponent + 2.25).abs() <= 0.05);
    assert!((report.exponent_difference + 0.75).abs() <= 0.05);
    assert!(report.to_csv().lines().count() == report.rows.len() + 1);
}

#[test]
fn smooth_profile_has_no_plateau() {
    let config = KernelAsymptoticsConfig { profile: MassProfile::Smooth { a0: 1.0, c: 1.0, width: 4.0 }, ..Default::default() };
    let report = kernel_asymptotics(&config, 1e-12, 1e-12).unwrap();
    let first = report.rows[0].ratio.norm();
    let last = report.rows.last().unwrap().ratio.norm();
    assert!(last < 1e-2 * first, "{first} → {last}");
}

#[test]
fn invalid_profiles_are_rejected() {
    let bad = MassProfile::Kinked { a0: 1.0, c: 0.0, width: 1.0 };
    assert!(superposition(&bad, 100.0, 1e-12, 1e-12).is_err());
    let config = KernelAsymptoticsConfig { xi2_min: 10.0, xi2_max: 1.0, ..Default::default() };
    assert!(kernel_asymptotics(&config, 1e-12, 1e-12).is_err());
}

#[test]
fn dirac_kernel_leading_form() {
    // temporal ξ: P → m(1 − γ⁰)T and M = 2imξ̸(T T̃' − T' T̃) exactly
    let g0 = dirac_gammas()[0];
    let id = Matrix4::<C64>::identity();
    for tau in [30.0, 100.0, 300.0] {
        let xi = [tau, 0.0, 0.0, 0.0];
        let p = dirac_kernel(1.0, &xi, 1e-12).unwrap();
        let t = bessel_t_a(1.0, tau * tau, 1.0, 1e-12).unwrap();
        let lead = (id - g0) * t;
        assert!((p - lead).norm() <= 2.0 / tau * p.norm(), "{tau}");

        let back = dirac_kernel(1.0, &[-tau, 0.0, 0.0, 0.0], 1e-12).unwrap();
        let prod = p * back;
        let m = prod - id * (prod.trace() / 4.0);
        let tt = bessel_t_a(1.0, tau * tau, -1.0, 1e-12).unwrap();
        let (dt, dtt) = (
            bessel_t_a_derivative(1.0, tau * tau, 1.0, 1e-12).unwrap(),
            bessel_t_a_derivative(1.0, tau * tau, -1.0, 1e-12).unwrap(),
        );
        let expected = slash(&xi) * ((t * dtt - dt * tt) * C64::new(0.0, 2.0));
        assert!((m - expected).norm() <= 1e-12 * m.norm());
    }
}

#[test]
fn chain_exponents_do_not_depend_on_the_direction() {
    let config = KernelAsymptoticsConfig { velocity: [0.5, 0.2, 0.0], points: 21, ..Default::default() };
    let report = kernel_asymptotics(&config, 1e-12, 1e-12).unwrap();
    assert!((report.p_exponent + 0.75).abs() <= 0.05);
    assert!((report.q_over_p_exponent + 1.5).abs() <= 0.05);
}

// ---- suite -------------------------------------------------------------

#[test]
fn suite_passes_and_serializes() {
    let config = DiracSuiteConfig { momenta: vec![0.0, 0.8], positivity_samples: 40, ..Default::default() };
    let report = run_suite(&config).unwrap();
    assert!(report.passed(), "{:?}", report.failures());
    let json = serde_json::to_string(&report).unwrap();
    let back: DiracSuiteReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, report);
    assert_eq!(report.to_csv().lines().count(), 3);
}
