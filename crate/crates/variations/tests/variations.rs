use cfs_core::linalg::{self, c, CMat, CVec, C64, I};
use cfs_core::*;
use cfs_spin::{FermionicKernel, SpinFrame, WaveFunction};
use cfs_variations::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Setup {
    system: DiscreteSystem,
    frame: SpinFrame,
    kernel: FermionicKernel,
    q: QKernel,
    tol: Tolerances,
}

fn setup(system: DiscreteSystem) -> Setup {
    let tol = Tolerances::default();
    let frame = SpinFrame::new(&system, tol.sigma_rel);
    let kernel = FermionicKernel::new(&frame);
    let q = q_kernel(&system, &frame, &kernel, &tol, QMode::Auto);
    Setup { system, frame, kernel, q, tol }
}

fn random_setup(points: usize, f: usize, n: usize, seed: u64) -> Setup {
    setup(random_system(&RandomSystemSpec::new(points, f, n, 0.2, seed)).unwrap())
}

fn random_direction(s: &Setup, rng: &mut ChaCha8Rng) -> VariationDirection {
    VariationDirection::General(
        (0..s.system.len()).map(|i| linalg::random_complex_matrix(rng, s.frame.dim(i), s.system.f())).collect(),
    )
}

#[test]
fn perturbation_of_zero_direction_vanishes() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a0 = linalg::random_complex_matrix(&mut rng, 4, 4);
    let p = eigen_perturbation(&a0, &CMat::zeros(4, 4), 2, 1e-6).unwrap();
    assert_eq!(p.order, 2);
    assert!(p.first.iter().chain(&p.second).all(|v| v.norm() == 0.0));
    assert!(p.completeness_residual() < 1e-10);
}

#[test]
fn perturbation_along_the_matrix_is_a_rescaling() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a0 = linalg::random_complex_matrix(&mut rng, 4, 4);
    let p = eigen_perturbation(&a0, &(&a0 * c(0.7, 0.0)), 2, 1e-6).unwrap();
    for k in 0..4 {
        assert!((p.first[k] - p.values[k] * 0.7).norm() < 1e-12 * p.values[k].norm().max(1.0));
        assert!(p.second[k].norm() < 1e-12);
    }
}

#[test]
fn degenerate_spectrum_limits_order() {
    let a0 = CMat::identity(3, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let da = linalg::random_complex_matrix(&mut rng, 3, 3);
    let p = eigen_perturbation(&a0, &da, 2, 1e-6).unwrap();
    assert!(p.degenerate);
    assert_eq!(p.order, 0);
    assert!(p.first.is_empty());
}

fn cubic_slope(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a0 = linalg::random_complex_matrix(&mut rng, 4, 4);
    let da = linalg::random_complex_matrix(&mut rng, 4, 4);
    let p = eigen_perturbation(&a0, &da, 2, 1e-6).unwrap();
    let eps = [1e-2, 3e-3, 1e-3, 3e-4, 1e-4];
    let points: Vec<(f64, f64)> = eps
        .iter()
        .map(|&e| {
            let exact = linalg::eigenvalues(&(&a0 + &da * c(e, 0.0))).unwrap();
            let err = p
                .series(e)
                .iter()
                .map(|s| exact.iter().map(|x| (x - s).norm()).fold(f64::INFINITY, f64::min))
                .fold(0.0, f64::max);
            (e.ln(), err.ln())
        })
        .collect();
    let mx = points.iter().map(|p| p.0).sum::<f64>() / points.len() as f64;
    let my = points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64;
    let num: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let den: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    num / den
}

#[test]
fn second_order_remainder_is_cubic() {
    for seed in 0..20 {
        let slope = cubic_slope(100 + seed);
        assert!(slope >= 2.7, "seed {seed}: slope {slope}");
    }
}

#[test]
fn abs_variation_examples() {
    let v = abs_variation(c(1.0, 0.0), I, c(0.0, 0.0), 1e-12).unwrap();
    assert!(v.first.abs() < 1e-15 && (v.second - 1.0).abs() < 1e-15);
    let v = abs_variation(c(1.0, 0.0), c(1.0, 0.0), c(0.3, -2.0), 1e-12).unwrap();
    assert!((v.first - 1.0).abs() < 1e-15 && (v.second - 0.3).abs() < 1e-15);
    assert!(abs_variation(c(0.0, 0.0), I, I, 1e-12).is_err());
}

#[test]
fn abs_variation_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let mut draw = || c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let (l, d1, d2) = (draw() + c(0.5, 0.0), draw(), draw());
        let v = abs_variation(l, d1, d2, 1e-12).unwrap();
        let g = |t: f64| (l + d1 * t + d2 * (0.5 * t * t)).norm();
        let h = 1e-3 * l.norm();
        let fd1 = (g(h) - g(-h)) / (2.0 * h);
        let fd2 = five_point_second(g, h);
        assert!((v.first - fd1).abs() < 1e-6 * (1.0 + v.first.abs()));
        assert!((v.second - fd2).abs() < 1e-6 * (1.0 + v.second.abs()));
        assert!(v.convexity >= 0.0);
    }
}

#[test]
fn q_vanishes_where_the_kernel_vanishes() {
    // two orthogonal projectors: P(x,y) = 0
    let mut a = CMat::zeros(2, 2);
    a[(0, 0)] = c(1.0, 0.0);
    let mut b = CMat::zeros(2, 2);
    b[(1, 1)] = c(1.0, 0.0);
    let points = vec![PointOperator::new(a, 1).unwrap(), PointOperator::new(b, 1).unwrap()];
    let system = DiscreteSystem::new(1, 0.1, points, vec![0.5, 0.5], vec![0.0, 1.0]).unwrap();
    let s = setup(system);
    assert_eq!(s.q.method(0, 1), QMethod::Zero);
    assert_eq!(linalg::max_abs(s.q.get(0, 1)), 0.0);
    assert!(linalg::max_abs(s.q.get(0, 0)) > 0.0);
}

#[test]
fn q_routes_agree_and_q_is_symmetric() {
    for (seed, f, n) in [(1, 2, 1), (2, 3, 1), (3, 4, 2), (4, 5, 2), (5, 3, 1), (6, 6, 2)] {
        let s = random_setup(4, f, n, seed);
        let agreement = q_route_agreement(&s.system, &s.frame, &s.kernel, &s.tol);
        assert!(agreement < 1e-5, "seed {seed}: routes differ by {agreement}");
        let sym = s.q.symmetry_residual(&s.frame);
        assert!(sym < 1e-8, "seed {seed}: symmetry residual {sym}");
    }
}

#[test]
fn kappa_only_spacelike_pair_routes_agree() {
    // n = 1 with κ dominating; pure states give a single real eigenvalue
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let u = linalg::random_complex_vector(&mut rng, 3).normalize();
        let v = linalg::random_complex_vector(&mut rng, 3).normalize();
        let pa = PointOperator::new(&u * u.adjoint(), 1).unwrap();
        let pb = PointOperator::new(&v * v.adjoint(), 1).unwrap();
        let system = DiscreteSystem::new(1, 5.0, vec![pa, pb], vec![0.5, 0.5], vec![0.0, 1.0]).unwrap();
        let s = setup(system);
        assert_eq!(s.q.method(0, 1), QMethod::Spectral);
        let p = s.kernel.get(0, 1);
        let slow = q_block_fd(&s.frame, 0, 1, p, 1, 5.0, 1e-5);
        let rel = linalg::max_abs(&(s.q.get(0, 1) - &slow)) / linalg::max_abs(&slow);
        assert!(rel < 1e-5, "{rel}");
    }
}

#[test]
fn q_is_the_derivative_of_the_pair_lagrangian() {
    let s = random_setup(3, 4, 2, 9);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (n, kappa) = (s.system.n(), s.system.kappa());
    for i in 0..3 {
        for j in 0..3 {
            let p = s.kernel.get(i, j);
            let dp = linalg::random_complex_matrix(&mut rng, p.nrows(), p.ncols());
            let h = 1e-5 * linalg::max_abs(p) / linalg::max_abs(&dp);
            let fd = (pair_lagrangian(&s.frame, i, j, &(p + &dp * c(h, 0.0)), n, kappa)
                - pair_lagrangian(&s.frame, i, j, &(p - &dp * c(h, 0.0)), n, kappa))
                / (2.0 * h);
            let exact = first_variation(&s.frame, i, j, s.q.get(i, j), &dp);
            assert!((fd - exact).abs() < 1e-5 * exact.abs().max(1e-3), "({i},{j}): {fd} vs {exact}");
        }
    }
}

#[test]
fn pair_decomposition_of_nothing_is_zero() {
    let s = random_setup(2, 3, 1, 10);
    let p = s.kernel.get(0, 1);
    let zero = CMat::zeros(p.nrows(), p.ncols());
    let v = second_variation_lagrangian(&s.frame, 0, 1, p, &zero, &zero, s.q.get(0, 1), 1, 0.2, 1e-6).unwrap();
    assert_eq!(v, PairSecondVariation::default());
}

#[test]
fn separated_supports_reduce_to_the_q_term() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for seed in 0..20 {
        let s = random_setup(2, 3 + (seed % 3) as usize, 1 + (seed % 2) as usize, 200 + seed);
        let p = s.kernel.get(0, 1);
        let zero = CMat::zeros(p.nrows(), p.ncols());
        let phi_x = linalg::random_complex_vector(&mut rng, p.nrows());
        let phi_y = linalg::random_complex_vector(&mut rng, p.ncols());
        // δ²P = −2 |φ(x)≻≺φ(y)|
        let bra = phi_y.adjoint() * s.frame.basis(1).metric();
        let d2p = &phi_x * bra * c(-2.0, 0.0);
        let (n, kappa) = (s.system.n(), s.system.kappa());
        let v = second_variation_lagrangian(&s.frame, 0, 1, p, &zero, &d2p, s.q.get(0, 1), n, kappa, 1e-6).unwrap();
        assert_eq!(v.lfe, 0.0);
        assert!(v.remainder.abs() < 1e-14 * v.q_term.abs().max(1.0));
        let inner: C64 = s.frame.spin_inner(0, &phi_x, &(s.q.get(0, 1) * &phi_y));
        let expected = -4.0 * inner.re;
        assert!((v.q_term - expected).abs() < 1e-10 * expected.abs().max(1e-3));
        let fd = pair_second_derivative_fd(&s.frame, 0, 1, p, &zero, &d2p, n, kappa, 1e-3);
        assert!((fd - v.total).abs() < 1e-4 * expected.abs().max(1e-3), "{fd} vs {}", v.total);
    }
}

#[test]
fn pair_decomposition_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for seed in 0..10 {
        let s = random_setup(2, 4, 2, 300 + seed);
        let p = s.kernel.get(0, 1);
        let dp = linalg::random_complex_matrix(&mut rng, p.nrows(), p.ncols());
        let d2p = linalg::random_complex_matrix(&mut rng, p.nrows(), p.ncols());
        let v = second_variation_lagrangian(&s.frame, 0, 1, p, &dp, &d2p, s.q.get(0, 1), 2, 0.2, 1e-6).unwrap();
        let fd = pair_second_derivative_fd(&s.frame, 0, 1, p, &dp, &d2p, 2, 0.2, 1e-3);
        assert!(v.lfe >= 0.0);
        assert!((fd - v.total).abs() <= 1e-4 * fd.abs().max(v.lfe + v.q_term.abs() + v.remainder.abs()));
    }
}

#[test]
fn action_decomposition_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for seed in 0..8 {
        let s = random_setup(4, 3 + (seed % 4) as usize, 1 + (seed % 2) as usize, 400 + seed);
        let dir = random_direction(&s, &mut rng);
        let report = second_variation_action(&s.system, &s.frame, &s.kernel, &s.q, &dir, &s.tol).unwrap();
        assert!(report.relative_error < 1e-4, "seed {seed}: {report:?}");
        assert!(report.lfe_term >= -1e-14 * report.scale);
        assert!((report.q_term - report.q_term_pairs).abs() < 1e-10 * report.scale);
        assert!((report.first - report.fd_first).abs() < 1e-6 * report.scale.max(report.first.abs()));
        let csv = report.to_csv();
        assert_eq!(csv.lines().count(), 1 + 16 + 2);
    }
}

#[test]
fn zero_direction_gives_zero_report() {
    let s = random_setup(3, 3, 1, 14);
    let dir = VariationDirection::General((0..3).map(|i| CMat::zeros(s.frame.dim(i), 3)).collect());
    let r = second_variation_action(&s.system, &s.frame, &s.kernel, &s.q, &dir, &s.tol).unwrap();
    assert_eq!((r.lfe_term, r.q_term, r.remainder, r.total, r.fd_total), (0.0, 0.0, 0.0, 0.0, 0.0));
}

#[test]
fn global_phase_only_sees_the_q_structure() {
    for seed in 0..5 {
        let s = random_setup(3, 4, 2, 500 + seed);
        let dir = VariationDirection::global_phase(&s.frame);
        let r = second_variation_action(&s.system, &s.frame, &s.kernel, &s.q, &dir, &s.tol).unwrap();
        let scale = r.q_term.abs().max(1e-12);
        assert!(r.lfe_term.abs() < 1e-12 * scale.max(1.0));
        assert!(r.remainder.abs() < 1e-10 * scale.max(1.0));
        // the kernel is invariant, so only the trace term survives in the oracle
        assert!(r.relative_error < 1e-4);
    }
}

#[test]
fn single_wave_direction_matches_general_form() {
    let s = random_setup(3, 3, 1, 15);
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let u = linalg::random_complex_vector(&mut rng, 3);
    let phi: Vec<CVec> = (0..3).map(|i| linalg::random_complex_vector(&mut rng, s.frame.dim(i))).collect();
    let single = VariationDirection::SingleWave { u: u.clone(), phi: phi.clone() };
    let mats = single.matrices();
    for i in 0..3 {
        assert!((&mats[i] * &u - &phi[i]).norm() < 1e-12);
    }
    let r = second_variation_action(&s.system, &s.frame, &s.kernel, &s.q, &single, &s.tol).unwrap();
    assert!(r.relative_error < 1e-4);
}

fn minimized(seed: u64) -> DiscreteSystem {
    let start = random_system(&RandomSystemSpec::new(3, 2, 1, 0.1, seed).with_signature(1, 0)).unwrap();
    let report = minimize_action(&start, &MinimizeOptions::default()).unwrap();
    assert!(report.converged, "{:?}", report.warnings);
    report.system().clone()
}

#[test]
fn restricted_el_holds_at_minimizers() {
    let s = setup(minimized(21));
    let basis: Vec<CVec> = (0..s.system.f()).map(|k| CVec::from_fn(s.system.f(), |r, _| c((r == k) as u8 as f64, 0.0))).collect();
    let res = restricted_el_residual(&s.system, &s.frame, &s.q, &basis);
    assert!(res.iter().all(|&r| r <= s.tol.el_tol), "{res:?}");
    let zero = restricted_el_residual(&s.system, &s.frame, &s.q, &[CVec::zeros(s.system.f())]);
    assert_eq!(zero[0], 0.0);
    let shifted = restricted_el_residual_with(&s.system, &s.frame, &s.q, &basis, s.system.r() + 1.0);
    for (k, u) in basis.iter().enumerate() {
        let psi = WaveFunction::physical(&s.frame, u);
        let size = (0..s.frame.len())
            .map(|i| s.frame.spin_scalar(i, &psi.components[i], &psi.components[i]).re.sqrt())
            .fold(0.0, f64::max);
        assert!((shifted[k] - size).abs() <= res[k] + 1e-12);
    }
}

#[test]
fn gradient_in_x_is_directional_derivative() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..10 {
        let x = random_point(&mut rng, 3, 1, 1).into_matrix();
        let y = random_point(&mut rng, 3, 1, 1).into_matrix();
        let g = lagrangian_gradient_x(&x, &y, 1, 0.2, 1e-5).unwrap();
        assert!(linalg::hermitian_residual(&g) < 1e-12);
        let h = linalg::random_hermitian(&mut rng, 3);
        let t = 1e-5;
        let fd = (lagrangian(&(&x + &h * c(t, 0.0)), &y, 1, 0.2).unwrap()
            - lagrangian(&(&x - &h * c(t, 0.0)), &y, 1, 0.2).unwrap())
            / (2.0 * t);
        let exact = linalg::trace(&(&h * &g)).re;
        assert!((fd - exact).abs() < 1e-5 * exact.abs().max(1e-3));
        // L(x,y) = L(y,x): the gradient in the second slot is the gradient in the first with roles swapped
        let g2 = lagrangian_gradient_x(&y, &x, 1, 0.2, 1e-5).unwrap();
        let fd2 = (lagrangian(&x, &(&y + &h * c(t, 0.0)), 1, 0.2).unwrap()
            - lagrangian(&x, &(&y - &h * c(t, 0.0)), 1, 0.2).unwrap())
            / (2.0 * t);
        assert!((fd2 - linalg::trace(&(&h * &g2)).re).abs() < 1e-5 * fd2.abs().max(1e-3));
    }
    let x = random_point(&mut rng, 3, 1, 1).into_matrix();
    let g = lagrangian_gradient_x(&x, &CMat::zeros(3, 3), 1, 0.2, 1e-5).unwrap();
    assert_eq!(linalg::max_abs(&g), 0.0);
}

#[test]
fn decoupling_rows() {
    let s = random_setup(4, 3, 1, 23);
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let dir = random_direction(&s, &mut rng);
    let strips = [(-100.0, 100.0), (0.5, 2.5), (10.0, 11.0)];
    let rep = decoupling_report(&s.system, &s.frame, &s.kernel, &s.q, &dir, &strips, &[0.0, 1.0], &s.tol).unwrap();
    let global = second_variation_action(&s.system, &s.frame, &s.kernel, &s.q, &dir, &s.tol).unwrap();
    let all = rep.strips[0];
    assert_eq!(all.points, 4);
    assert!((all.lfe - global.lfe_term.abs()).abs() < 1e-12 * global.scale);
    assert!((all.remainder - global.remainder.abs()).abs() < 1e-12 * global.scale);
    assert!((4.0 * all.q - global.q_term.abs()).abs() < 1e-10 * global.scale);
    assert_eq!(rep.strips[2].points, 0);
    assert_eq!((rep.strips[2].lfe, rep.strips[2].q, rep.strips[2].remainder), (0.0, 0.0, 0.0));
    assert_eq!(rep.slices.len(), 2);
    assert!(rep.to_csv().lines().count() == 6);

    let zero = VariationDirection::General((0..4).map(|i| CMat::zeros(s.frame.dim(i), 3)).collect());
    let rep = decoupling_report(&s.system, &s.frame, &s.kernel, &s.q, &zero, &strips, &[0.0], &s.tol).unwrap();
    assert!(rep.strips.iter().chain(&rep.slices).all(|r| r.lfe == 0.0 && r.q == 0.0 && r.remainder == 0.0));
}

#[test]
fn null_direction_satisfies_the_decoupling_inequalities() {
    let s = setup(minimized(24));
    let (dir, eigenvalue) = null_direction(&s.system, &s.frame, &s.kernel, &s.q, &s.tol).unwrap();
    let global = second_variation_action(&s.system, &s.frame, &s.kernel, &s.q, &dir, &s.tol).unwrap();
    assert!(global.total.abs() < 1e-6 * global.scale.max(1.0), "{eigenvalue} {global:?}");
    let rep = decoupling_report(&s.system, &s.frame, &s.kernel, &s.q, &dir, &[(-1.0, 10.0)], &[], &s.tol).unwrap();
    let row = rep.strips[0];
    let slack = 1e-6 * global.scale.max(1.0);
    assert!(row.lfe <= row.remainder + slack && row.q <= row.remainder / 4.0 + slack, "{row:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn decomposition_identity(seed in 0u64..10_000, f in 2usize..6, n in 1usize..3, points in 2usize..5) {
        let s = random_setup(points, f, n, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let dir = random_direction(&s, &mut rng);
        let r = second_variation_action(&s.system, &s.frame, &s.kernel, &s.q, &dir, &s.tol).unwrap();
        prop_assert!(r.relative_error < 1e-4, "{:?}", r);
        prop_assert!(r.lfe_term >= -1e-14 * r.scale);
    }
}
