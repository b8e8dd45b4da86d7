use cfs_core::linalg::{self, c, CVec};
use cfs_core::*;
use cfs_spin::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn system(seed: u64, count: usize, f: usize, n: usize) -> DiscreteSystem {
    random_system(&RandomSystemSpec::new(count, f, n, 0.1, seed)).unwrap()
}

#[test]
fn spin_product_examples() {
    let x = PointOperator::diagonal(&[1.0, -1.0]);
    let e1 = CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
    let p = spin_products(x.matrix(), &e1, &e1, 1e-9).unwrap();
    assert_eq!((p.spin_inner.re, p.spin_scalar.re), (-1.0, 1.0));
    let y = PointOperator::diagonal(&[1.0, 0.0]);
    let e2 = CVec::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0)]);
    assert!(spin_products(y.matrix(), &e2, &e2, 1e-9).is_err());
}

#[test]
fn physical_wave_functions_of_projectors() {
    let x = PointOperator::diagonal(&[1.0, 0.0, 0.0]);
    let sys = DiscreteSystem::new(1, 0.1, vec![x], vec![1.0], vec![0.0]).unwrap();
    let frame = SpinFrame::new(&sys, 1e-9);
    let kernel_vec = CVec::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 2.0)]);
    let psi = WaveFunction::physical(&frame, &kernel_vec);
    assert_eq!(psi.components[0].norm(), 0.0);
    let inside = CVec::from_vec(vec![c(0.3, -0.2), c(0.0, 0.0), c(0.0, 0.0)]);
    let psi = WaveFunction::physical(&frame, &inside);
    assert!((psi.ambient(&frame, 0) - &inside).norm() < 1e-15);
}

#[test]
fn kernel_diagonal_reproduces_point_on_spin_space() {
    let sys = system(4, 3, 4, 2);
    let frame = SpinFrame::new(&sys, 1e-9);
    let kernel = FermionicKernel::new(&frame);
    for i in 0..sys.len() {
        let b = frame.basis(i);
        let x_on_spin = b.vectors.adjoint() * sys.point(i) * &b.vectors;
        assert!(linalg::max_abs(&(kernel.get(i, i) - x_on_spin)) < 1e-12);
    }
}

#[test]
fn single_point_closed_chain_matches_square() {
    let sys = system(2, 1, 2, 1);
    let frame = SpinFrame::new(&sys, 1e-9);
    let kernel = FermionicKernel::new(&frame);
    let mut a: Vec<_> = linalg::eigenvalues(&kernel.closed_chain(0, 0)).unwrap();
    let spec = chain_spectrum(sys.point(0), sys.point(0), 1, 1e-9).unwrap();
    a.sort_by(|p, q| q.norm().total_cmp(&p.norm()));
    for (p, q) in a.iter().zip(&spec.values) {
        assert!((p - q).norm() < 1e-12);
    }
}

#[test]
fn wave_function_json_round_trip() {
    let sys = system(5, 3, 3, 1);
    let frame = SpinFrame::new(&sys, 1e-9);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let u = linalg::random_complex_vector(&mut rng, 3);
    let psi = WaveFunction::physical(&frame, &u);
    assert_eq!(WaveFunction::from_json(&psi.to_json()).unwrap(), psi);
}

#[test]
fn isospectrality_over_random_systems() {
    for seed in 0..100 {
        let n = 1 + (seed as usize % 2);
        let sys = system(seed, 3, 2 * n + 1, n);
        let frame = SpinFrame::new(&sys, 1e-9);
        let kernel = FermionicKernel::new(&frame);
        for i in 0..sys.len() {
            for j in 0..sys.len() {
                let report = isospectrality_check(&sys, &kernel, i, j, 1e-9);
                assert!(report.counts_match, "seed {seed} pair ({i},{j})");
                assert!(report.mismatch <= 1e-8, "seed {seed}: {}", report.mismatch);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn local_correlation_identity(seed in any::<u64>(), f in 2usize..6, n in 1usize..3) {
        let sys = system(seed, 3, f, n);
        let frame = SpinFrame::new(&sys, 1e-9);
        for i in 0..sys.len() {
            prop_assert!(frame.local_correlation_residual(&sys, i) <= 1e-10);
        }
    }

    #[test]
    fn kernel_is_symmetric(seed in any::<u64>(), f in 2usize..6) {
        let sys = system(seed, 4, f, 1);
        let frame = SpinFrame::new(&sys, 1e-9);
        let kernel = FermionicKernel::new(&frame);
        prop_assert!(kernel.symmetry_residual(&frame) <= 1e-12);
    }

    #[test]
    fn spin_signature_matches_eigenvalue_signs(seed in any::<u64>(), f in 2usize..6, n in 1usize..3) {
        let sys = system(seed, 2, f, n);
        let frame = SpinFrame::new(&sys, 1e-9);
        for i in 0..sys.len() {
            let sig = sys.points()[i].signature(1e-9);
            let (p, q) = frame.basis(i).spin_signature();
            prop_assert_eq!((p, q), (sig.negative, sig.positive));
            prop_assert!(p <= n && q <= n);
            let metric = frame.basis(i).scalar_metric();
            prop_assert!(metric.diagonal().iter().all(|z| z.re > 0.0));
        }
    }

    #[test]
    fn projection_is_idempotent(seed in any::<u64>(), f in 2usize..6) {
        let sys = system(seed, 2, f, 1);
        let frame = SpinFrame::new(&sys, 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = linalg::random_complex_vector(&mut rng, f);
        let once = WaveFunction::physical(&frame, &u);
        for i in 0..sys.len() {
            let amb = once.ambient(&frame, i);
            let twice = frame.basis(i).psi() * &amb;
            prop_assert!((twice - &once.components[i]).norm() <= 1e-12 * u.norm());
        }
    }

    #[test]
    fn sign_operator_converts_products(seed in any::<u64>(), f in 2usize..6) {
        let sys = system(seed, 1, f, 1);
        let frame = SpinFrame::new(&sys, 1e-9);
        let b = frame.basis(0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = linalg::random_complex_vector(&mut rng, b.dim());
        let v = linalg::random_complex_vector(&mut rng, b.dim());
        let lhs = frame.spin_inner(0, &u, &(b.sign() * &v));
        let rhs = frame.spin_scalar(0, &u, &v);
        prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
    }
}
