use cfs_core::linalg::{self, c, CVec, C64};
use cfs_core::*;
use cfs_spin::{FermionicKernel, SpinFrame, WaveFunction};
use cfs_variations::{q_kernel, QKernel, QMode};
use cfs_wave::*;
use proptest::prelude::*;
use rand::SeedableRng;
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

fn chain(slots: usize, pps: usize, seed: u64) -> Setup {
    setup(chain_system(&ChainSpec::new(slots, pps, seed)).unwrap())
}

fn strip() -> TimeStrip {
    TimeStrip::new(0.0, 3.0, 9.0, 12.0, 1.0).unwrap()
}

fn operator(s: &Setup, strip: &TimeStrip) -> StripOperator {
    assemble_strip_operator(&s.system, &s.frame, &s.q, strip, &s.tol).unwrap()
}

fn random_on(op: &StripOperator, rng: &mut ChaCha8Rng, keep: impl Fn(f64) -> bool) -> CVec {
    op.space.mask(&linalg::random_complex_vector(rng, op.dim()), keep)
}

/// Future-only driven solution.
fn future_solution(s: &Setup, op: &StripOperator, strip: &TimeStrip, seed: u64) -> CVec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phi1 = random_on(op, &mut rng, |t| strip.in_future(t));
    let zero = CVec::zeros(op.dim());
    homogeneous_from_boundary(op, strip, &phi1, &zero, 0.0, &s.tol).unwrap().psi
}

#[test]
fn strip_rejects_narrow_boundary_strips() {
    assert!(TimeStrip::new(0.0, 1.5, 9.0, 12.0, 1.0).is_err());
    assert!(TimeStrip::new(0.0, 3.0, 2.0, 12.0, 1.0).is_err());
    assert!(TimeStrip::new(0.0, 3.0, 9.0, 12.0, 1.0).is_ok());
}

#[test]
fn default_cutoffs_meet_their_constraints() {
    let strip = strip();
    let cut = Cutoffs::linear(&strip);
    let times: Vec<f64> = (0..=120).map(|k| k as f64 * 0.1).collect();
    cut.check(&strip, &times).unwrap();
    assert_eq!(cut.past(0.5), 0.0);
    assert_eq!(cut.past(2.5), 1.0);
    assert_eq!(cut.future(9.5), 1.0);
    assert_eq!(cut.future(11.5), 0.0);
    let bad = Cutoffs::new(|_| 1.0, |_| 1.0);
    assert!(bad.check(&strip, &times).is_err());
}

#[test]
fn chain_kernel_has_finite_range() {
    let s = chain(13, 2, 1);
    let report = kernel_hygiene(&s.system, &s.frame, &s.q, 1.0, 1e6, 0.0);
    assert!(report.passed, "{:?}", report.range_violations);
    assert_eq!(report.out_of_range, 0.0);
    // a bound below the true supremum lists violating points
    let tight = kernel_hygiene(&s.system, &s.frame, &s.q, 1.0, 0.5 * report.sup, 0.0);
    assert!(!tight.bound_violations.is_empty());
}

#[test]
fn windowing_enforces_the_range() {
    let s = setup(random_system(&RandomSystemSpec::new(6, 3, 1, 0.2, 4)).unwrap());
    let windowed = s.q.windowed(s.system.times(), 1.5);
    let report = kernel_hygiene(&s.system, &s.frame, &windowed, 1.5, f64::INFINITY, 0.0);
    assert!(report.range_violations.is_empty());
}

#[test]
fn zero_kernel_passes_hygiene_with_margin() {
    let s = chain(5, 1, 2);
    let zero = s.q.windowed(s.system.times(), -1.0);
    let report = kernel_hygiene(&s.system, &s.frame, &zero, 0.0, 1.0, 0.0);
    assert!(report.passed);
    assert_eq!(report.sup, 0.0);
}

#[test]
fn strip_operator_is_symmetric_and_bounded() {
    let s = chain(13, 2, 3);
    let op = operator(&s, &strip());
    assert!(op.symmetry_residual <= 1e-10);
    assert!(op.norm <= op.norm_bound * (1.0 + 1e-6));
    assert!(op.space.min_gram() > 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = linalg::random_complex_vector(&mut rng, op.dim());
    let b = linalg::random_complex_vector(&mut rng, op.dim());
    let lhs = op.space.inner(&a, &op.apply(&b));
    let rhs = op.space.inner(&op.apply(&a), &b);
    assert!((lhs - rhs).norm() <= 1e-12 * op.norm * op.space.norm(&a) * op.space.norm(&b));
}

#[test]
fn zero_kernel_gives_zero_operator() {
    let s = chain(5, 1, 2);
    let system = s.system.clone().with_lagrange_parameters(0.0, 0.0);
    let zero = s.q.windowed(system.times(), -1.0);
    let strip = TimeStrip::new(0.0, 1.5, 2.5, 4.0, 0.5).unwrap();
    let op = assemble_strip_operator(&system, &s.frame, &zero, &strip, &s.tol).unwrap();
    assert_eq!(linalg::max_abs(&op.matrix), 0.0);
}

#[test]
fn single_point_strip_is_the_diagonal_block() {
    let s = chain(5, 1, 6);
    let strip = TimeStrip::new(1.5, 1.8, 2.2, 2.5, 0.1).unwrap();
    let op = operator(&s, &strip);
    assert_eq!(op.space.members, vec![2]);
    let block = s.q.get(2, 2) * c(s.system.weights()[2], 0.0);
    let sign = s.frame.basis(2).sign();
    let mut expected = block;
    for k in 0..expected.nrows() {
        expected[(k, k)] -= c(s.system.r(), 0.0);
    }
    let expected = sign * expected;
    assert!(linalg::max_abs(&(&op.matrix - &expected)) <= 1e-14 * (1.0 + linalg::max_abs(&expected)));
}

#[test]
fn solving_an_image_recovers_it() {
    let s = chain(13, 2, 7);
    let op = operator(&s, &strip());
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let chi = linalg::random_complex_vector(&mut rng, op.dim());
    let phi = op.apply(&chi);
    let sol = op.solve(&phi, s.tol.adm_tol).unwrap();
    assert!(sol.residual <= 1e-10, "{}", sol.residual);
    assert!(op.space.norm(&(op.apply(&sol.psi) - &phi)) <= s.tol.solve_tol * op.space.norm(&phi));
}

/// Positive chain with a rank-one kernel: 𝔯 is moved onto a real eigenvalue of the strip kernel.
/// Two-dimensional blocks keep the slot-to-slot coupling of full rank; with a
/// rank-one coupling the kernel vector spans the past of every solution that
/// is homogeneous there, and admissibility of the past perturbation forces it to zero.
fn kernel_setup() -> (Setup, StripOperator, TimeStrip) {
    let s = setup(chain_system(&ChainSpec::new(13, 2, 11).with_block_dim(2)).unwrap());
    let strip = strip();
    let op = operator(&s, &strip);
    let mut spectrum: Vec<f64> = op.multiplier_spectrum().iter().map(|z| z.re).collect();
    spectrum.sort_by(f64::total_cmp);
    let r = spectrum[spectrum.len() / 2];
    let shifted = s.system.clone().with_lagrange_parameters(r, s.system.s());
    let s = Setup { system: shifted, ..s };
    let op = operator(&s, &strip);
    (s, op, strip)
}

#[test]
fn kernel_vectors_are_inadmissible() {
    let (s, op, _) = kernel_setup();
    assert_eq!(op.kernel_dim(), 1);
    let kv = &op.kernel_basis()[0];
    assert!(op.space.norm(&op.apply(kv)) <= 1e-9 * op.norm);
    assert!(matches!(op.solve(kv, s.tol.adm_tol), Err(WaveError::Inadmissible { .. })));
}

#[test]
fn commutator_inner_product_vanishes_before_all_points() {
    let s = chain(13, 2, 12);
    let op = operator(&s, &strip());
    let psi = op.space.extend(&s.frame, &future_solution(&s, &op, &strip(), 1));
    assert_eq!(commutator_inner(&s.system, &s.frame, &s.q, &psi, &psi, -1.0), c(0.0, 0.0));
    let zero = WaveFunction::zero(&s.frame);
    assert_eq!(commutator_inner(&s.system, &s.frame, &s.q, &zero, &psi, 5.0), c(0.0, 0.0));
}

#[test]
fn the_two_routes_to_the_commutator_inner_product_agree() {
    let s = chain(13, 2, 13);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let f = s.system.f();
    for t in [0.0, 3.0, 6.5, 11.0] {
        let a = WaveFunction::physical(&s.frame, &linalg::random_complex_vector(&mut rng, f));
        let b = WaveFunction::physical(&s.frame, &linalg::random_complex_vector(&mut rng, f));
        let direct = commutator_inner(&s.system, &s.frame, &s.q, &a, &b, t);
        let sources = commutator_inner_by_sources(&s.system, &s.frame, &s.q, &a, &b, t);
        let scale = commutator_scale(&s.system, &s.frame, &s.q, &a, &b);
        assert!((direct - sources).norm() <= 1e-12 * scale, "{direct} vs {sources}");
    }
}

#[test]
fn future_driven_solutions_are_homogeneous_with_zero_norm() {
    let s = chain(13, 2, 15);
    let strip = strip();
    let op = operator(&s, &strip);
    for seed in 0..3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi1 = random_on(&op, &mut rng, |t| strip.in_future(t));
        let zero = CVec::zeros(op.dim());
        let sol = homogeneous_from_boundary(&op, &strip, &phi1, &zero, 0.0, &s.tol).unwrap();
        assert!(sol.interior_residual <= s.tol.hom_tol, "{}", sol.interior_residual);
        let psi = op.space.extend(&s.frame, &sol.psi);
        let scale = commutator_scale(&s.system, &s.frame, &s.q, &psi, &psi);
        for t in [0.0, 1.0, 2.0, 4.5, 6.0, 8.0, 8.9] {
            let v = commutator_inner(&s.system, &s.frame, &s.q, &psi, &psi, t);
            assert!(v.norm() <= s.tol.cip_tol * scale, "t = {t}: {v} (scale {scale})");
        }
    }
}

#[test]
fn boundary_solutions_with_both_sources_are_homogeneous_inside() {
    let s = chain(13, 2, 16);
    let strip = strip();
    let op = operator(&s, &strip);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let phi1 = random_on(&op, &mut rng, |t| strip.in_future(t));
    let phi0 = random_on(&op, &mut rng, |t| strip.in_past(t));
    let sol = homogeneous_from_boundary(&op, &strip, &phi1, &phi0, 0.3, &s.tol).unwrap();
    assert!(sol.interior_residual <= s.tol.hom_tol);
    assert!(sol.solve_residual <= s.tol.solve_tol);
}

#[test]
fn zero_boundary_data_give_zero() {
    let s = chain(13, 2, 18);
    let strip = strip();
    let op = operator(&s, &strip);
    let zero = CVec::zeros(op.dim());
    let sol = homogeneous_from_boundary(&op, &strip, &zero, &zero, 1.0, &s.tol).unwrap();
    assert_eq!(op.space.norm(&sol.psi), 0.0);
}

#[test]
fn misplaced_boundary_data_are_rejected() {
    let s = chain(13, 2, 19);
    let strip = strip();
    let op = operator(&s, &strip);
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let everywhere = linalg::random_complex_vector(&mut rng, op.dim());
    let zero = CVec::zeros(op.dim());
    assert!(matches!(homogeneous_from_boundary(&op, &strip, &everywhere, &zero, 0.0, &s.tol), Err(WaveError::Support(_))));
    assert!(matches!(homogeneous_from_boundary(&op, &strip, &zero, &everywhere, 1.0, &s.tol), Err(WaveError::Support(_))));
}

#[test]
fn commutator_norm_is_conserved_for_homogeneous_pairs() {
    let s = chain(13, 2, 21);
    let strip = strip();
    let op = operator(&s, &strip);
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let a = homogeneous_from_boundary(
        &op,
        &strip,
        &random_on(&op, &mut rng, |t| strip.in_future(t)),
        &random_on(&op, &mut rng, |t| strip.in_past(t)),
        1.0,
        &s.tol,
    )
    .unwrap();
    let b = future_solution(&s, &op, &strip, 23);
    let (lo, hi) = strip.interior();
    let grid: Vec<f64> = (0..=20).map(|k| lo + (hi - lo) * k as f64 / 20.0).filter(|&t| t > lo && t < hi).collect();
    let psi = op.space.extend(&s.frame, &a.psi);
    let phi = op.space.extend(&s.frame, &b);
    for (x, y) in [(&psi, &psi), (&psi, &phi), (&phi, &phi)] {
        let series = conservation_series(&s.system, &s.frame, &s.q, x, y, &grid);
        assert!(series.relative_drift() <= s.tol.cons_tol, "{}", series.relative_drift());
    }
    let empty = conservation_series(&s.system, &s.frame, &s.q, &WaveFunction::zero(&s.frame), &psi, &grid);
    assert!(empty.values.iter().all(|v| *v == c(0.0, 0.0)));
    assert!(empty.to_csv().starts_with("t,re,im,drift\n"));
}

#[test]
fn past_driven_norm_follows_the_source_formula() {
    let s = chain(13, 2, 24);
    let strip = strip();
    let op = operator(&s, &strip);
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let phi0 = random_on(&op, &mut rng, |t| strip.in_past(t));
    let zero = CVec::zeros(op.dim());
    let sol = homogeneous_from_boundary(&op, &strip, &zero, &phi0, 1.0, &s.tol).unwrap();
    let psi = op.space.extend(&s.frame, &sol.psi);
    // raw source of (Q − 𝔯)ψ: undo the sign operator carried by 𝒬
    let raw = op.space.extend(&s.frame, &op.space.sign(&phi0));
    for t in [0.0, 1.0, 2.0, 3.0, 5.0] {
        let direct = commutator_inner(&s.system, &s.frame, &s.q, &psi, &psi, t).re;
        let formula = source_formula(&s.system, &s.frame, &psi, &raw, t);
        let scale = commutator_scale(&s.system, &s.frame, &s.q, &psi, &psi);
        assert!((direct - formula).abs() <= 1e-6 * (direct.abs() + 1e-6 * scale), "t = {t}: {direct} vs {formula}");
    }
}

#[test]
fn sign_operator_turns_spin_products_into_scalar_products() {
    let s = chain(6, 1, 26);
    let mut rng = ChaCha8Rng::seed_from_u64(27);
    for i in 0..s.system.len() {
        let d = s.frame.dim(i);
        let u = linalg::random_complex_vector(&mut rng, d);
        let v = linalg::random_complex_vector(&mut rng, d);
        let sv = s.frame.basis(i).sign() * &v;
        let lhs = s.frame.spin_inner(i, &u, &sv);
        let rhs = s.frame.spin_scalar(i, &u, &v);
        assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
    }
}

#[test]
fn positivity_sweep_recovers_the_past_norm() {
    let s = chain(13, 2, 28);
    let strip = strip();
    let op = operator(&s, &strip);
    let psi0 = future_solution(&s, &op, &strip, 29);
    let lambda = default_lambda(&op, &strip, &psi0);
    let lambdas = [10.0 * lambda, lambda, 0.1 * lambda];
    let report = lambda_sweep(&s.system, &s.frame, &s.q, &op, &strip, &psi0, &lambdas, 6.0, &s.tol).unwrap();
    assert!(report.past_norm > 0.0);
    assert!(report.relative_error <= 1e-4, "{report:?}");
    for row in &report.rows {
        assert!(row.value.re > 0.0);
        assert!(row.value.im.abs() <= report.floor);
    }
}

#[test]
fn zero_seed_solution_gives_a_zero_pair() {
    let s = chain(13, 2, 30);
    let strip = strip();
    let op = operator(&s, &strip);
    let zero = CVec::zeros(op.dim());
    let pair = positivity_perturbation(&op, &strip, &zero, 0.1, &s.tol).unwrap();
    assert_eq!(op.space.norm(&pair.combined()), 0.0);
    assert!(positivity_perturbation(&op, &strip, &zero, 0.0, &s.tol).is_err());
}

#[test]
fn extended_space_without_embedded_vectors() {
    let s = chain(13, 2, 31);
    let strip = strip();
    let op = operator(&s, &strip);
    let options = ExtendOptions { lambda: 1e-2, t: 5.0, t_alt: 7.0, cutoffs: None };
    let ext = build_extended_space(&s.system, &s.frame, &s.q, &op, &strip, &[], &options, &s.tol).unwrap();
    let r = &ext.report;
    assert_eq!(r.embedded_count, 0);
    assert!(r.pair_count > 0);
    assert!(r.min_ratio >= -s.tol.psd_tol, "{}", r.min_ratio);
    assert!(r.time_invariance <= s.tol.cons_tol, "{}", r.time_invariance);
    assert!(r.fitted_c.is_none());
    let parsed: ExtendedSpaceReport = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(&parsed, r);
}

#[test]
fn kernel_vectors_do_not_change_the_gram_matrix() {
    let (s, op, strip) = kernel_setup();
    let options = ExtendOptions { lambda: 1e-2, t: 5.0, t_alt: 7.0, cutoffs: None };
    let ext = build_extended_space(&s.system, &s.frame, &s.q, &op, &strip, &[], &options, &s.tol).unwrap();
    let neutrality = ext.report.kernel_neutrality.expect("operator has a kernel");
    assert!(neutrality <= 1e-10, "{neutrality}");
    assert!(ext.report.min_ratio >= -s.tol.psd_tol);
}

#[test]
fn embedding_into_a_finite_chain_is_flagged() {
    // physical wave functions of a finite, non-critical chain do not solve the
    // dynamical wave equation, so the cutoff images leak out of the boundary strips
    let s = chain(13, 2, 32);
    let strip = strip();
    let op = operator(&s, &strip);
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let hf: Vec<CVec> = (0..2).map(|_| linalg::random_complex_vector(&mut rng, s.system.f())).collect();
    let (embedded, rows) =
        embed_hilbert_vectors(&s.system, &s.frame, &s.q, &op, &strip, &hf, &Cutoffs::linear(&strip), &s.tol).unwrap();
    assert_eq!(embedded.len(), 2);
    for row in &rows {
        assert!(row.admissible_past && row.admissible_future);
        assert!(row.leakage_past > 0.1 && row.leakage_future > 0.1, "{row:?}");
    }
    let options = ExtendOptions { lambda: 1e-2, t: 5.0, t_alt: 7.0, cutoffs: None };
    let result = build_extended_space(&s.system, &s.frame, &s.q, &op, &strip, &hf, &options, &s.tol);
    assert!(matches!(result, Err(WaveError::Indefinite(_))), "{result:?}");
}

fn coupling_setup() -> (Setup, StripOperator, CouplingMap, CVec) {
    let s = chain(7, 1, 34);
    let strip = TimeStrip::new(0.0, 2.5, 3.5, 6.0, 1.0).unwrap();
    let op = operator(&s, &strip);
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    let u = linalg::random_complex_vector(&mut rng, s.system.f());
    let map = CouplingMap::new(&s.system, &s.frame, &s.kernel, &s.q, &op, &u, &s.tol);
    let phi = linalg::random_complex_vector(&mut rng, op.dim());
    (s, op, map, phi)
}

#[test]
fn coupling_iteration_regimes() {
    let (s, op, map, phi) = coupling_setup();
    assert!(map.radius > 0.0);

    let off = CouplingOptions { scale: 0.0, max_iters: 50 };
    let (iterates, report) = coupling_iteration(&op, &map, &phi, &off, &s.tol);
    assert!(report.converged && report.iterations == 1);
    assert_eq!(iterates.len(), 1);

    let weak = CouplingOptions { scale: 1e-3, max_iters: 50 };
    let (_, report) = coupling_iteration(&op, &map, &phi, &weak, &s.tol);
    assert!(report.converged && !report.diverged);
    let ratio = mean_ratio(&report, 1);
    assert!((ratio / 1e-3 - 1.0).abs() < 0.5, "{ratio} {:?}", report.ratios);

    let strong = CouplingOptions { scale: 10.0, max_iters: 50 };
    let (_, report) = coupling_iteration(&op, &map, &phi, &strong, &s.tol);
    assert!(report.diverged && !report.converged);
}

#[test]
fn trace_vanishes_and_quadratic_form_matches() {
    for seed in 0..3 {
        let system = random_system(&RandomSystemSpec::new(6, 3, 1, 0.2, 40 + seed)).unwrap();
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = linalg::random_complex_vector(&mut rng, system.f());
        let report = trace_identity_check(&system, &[0, 1, 2], &u, &tol).unwrap();
        assert!(report.relative_trace <= 1e-10, "{}", report.relative_trace);
        assert!(report.relative_error <= 1e-4, "{report:?}");
    }
}

#[test]
fn trace_identity_degenerate_cases() {
    let system = random_system(&RandomSystemSpec::new(4, 3, 1, 0.2, 50)).unwrap();
    let tol = Tolerances::default();
    let all: Vec<usize> = (0..system.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    let u = linalg::random_complex_vector(&mut rng, system.f());
    let report = trace_identity_check(&system, &all, &u, &tol).unwrap();
    assert_eq!(report.c_norm, 0.0);
    assert_eq!(report.trace_c, [0.0, 0.0]);
    let zero = CVec::zeros(system.f());
    let report = trace_identity_check(&system, &[0], &zero, &tol).unwrap();
    assert_eq!(report.quadratic, 0.0);
    assert_eq!(report.commutator_norm, 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn commutator_inner_product_is_hermitian(seed in 0u64..1000, t in -1.0f64..13.0) {
        let s = chain(13, 1, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        let f = s.system.f();
        let a = WaveFunction::physical(&s.frame, &linalg::random_complex_vector(&mut rng, f));
        let b = WaveFunction::physical(&s.frame, &linalg::random_complex_vector(&mut rng, f));
        let ab = commutator_inner(&s.system, &s.frame, &s.q, &a, &b, t);
        let ba = commutator_inner(&s.system, &s.frame, &s.q, &b, &a, t);
        let scale = commutator_scale(&s.system, &s.frame, &s.q, &a, &b);
        prop_assert!((ab - ba.conj()).norm() <= 1e-12 * scale.max(1e-300));
        let aa: C64 = commutator_inner(&s.system, &s.frame, &s.q, &a, &a, t);
        prop_assert!(aa.im.abs() <= 1e-12 * commutator_scale(&s.system, &s.frame, &s.q, &a, &a).max(1e-300));
    }

    #[test]
    fn strip_operator_symmetry_holds_for_random_chains(seed in 0u64..1000) {
        let s = chain(13, 2, seed);
        let op = operator(&s, &strip());
        prop_assert!(op.symmetry_residual <= 1e-10);
    }
}
