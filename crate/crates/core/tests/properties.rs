use nalgebra::{DMatrix, DVector};
use opinf_core::gappy_interp::{block_triangular_features, gappy_interpolate, evaluate, GappyProblem};
use opinf_core::pod::pod_from_matrix;
use opinf_core::{
    enumerate_monomials, eval_rhs, exact_opinf, generate_ensemble, implicit_euler_step, rank_ensuring_pairs, reduce,
    DegreeSet, DenseFom, NewtonOptions, Provenance,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn orthonormal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(rows, cols + 2, |_, _| rng.random_range(-1.0..1.0));
    pod_from_matrix(&a, cols).unwrap().into_modes()
}

fn degree_set(mask: u8, top: usize) -> DegreeSet {
    DegreeSet::new((0..=top).filter(|d| mask & (1 << d) != 0))
}

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn exact_reconstruction_of_random_models(
        seed in any::<u64>(),
        mask in 1u8..16,
        nu in 0usize..=2,
        big_n in 2usize..=10,
        n_frac in 0.0f64..1.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let degrees = degree_set(mask, 3);
        let fom = DenseFom::random(&mut rng, big_n, degrees, nu);
        let n = 1 + ((n_frac * big_n.min(5) as f64) as usize).min(big_n.min(5) - 1);
        let v = orthonormal(&mut rng, big_n, n);
        let intrusive = reduce(&fom, &v).unwrap();
        let inferred = exact_opinf(&fom, &v, 1e-3).unwrap();
        prop_assert!(rel(inferred.operator.matrix(), intrusive.matrix()) < 1e-10);
    }

    #[test]
    fn ensemble_is_minimal_and_follows_the_layout(n in 1usize..=5, mask in 1u8..32, nu in 0usize..=3) {
        let degrees = degree_set(mask, 4);
        let pairs = rank_ensuring_pairs(n, &degrees, nu).unwrap();
        let mut expected = Vec::new();
        for i in degrees.iter() {
            expected.extend(enumerate_monomials(n, i).unwrap().into_iter().map(Provenance::Monomial));
        }
        expected.extend((0..nu).map(Provenance::Input));
        let got: Vec<Provenance> = pairs.iter().map(|p| p.provenance.clone()).collect();
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn full_feature_matrix_is_block_triangular(n in 1usize..=4, mask in 1u8..32, nu in 0usize..=3) {
        let degrees = degree_set(mask, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let fom = DenseFom::random(&mut rng, n + 1, degrees.clone(), nu);
        let v = orthonormal(&mut rng, n + 1, n);
        let pairs = rank_ensuring_pairs(n, &degrees, nu).unwrap();
        let ens = generate_ensemble(&fom, &v, pairs, 1e-2).unwrap();
        prop_assert_eq!(ens.features, block_triangular_features(n, &degrees, nu).unwrap());
    }

    #[test]
    fn dt_invariance(seed in any::<u64>(), exponent in -4.0f64..-1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fom = DenseFom::random(&mut rng, 6, DegreeSet::new([1, 2]), 1);
        let v = orthonormal(&mut rng, 6, 3);
        let dt = 10f64.powf(exponent);
        let a = exact_opinf(&fom, &v, dt).unwrap().operator;
        let b = exact_opinf(&fom, &v, 10.0 * dt).unwrap().operator;
        prop_assert!(rel(a.matrix(), b.matrix()) < 1e-8);
    }

    #[test]
    fn homogeneous_interpolation(n in 1usize..=4, l in 0usize..=5, seed in any::<u64>()) {
        let degrees = DegreeSet::new([l]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let count = rank_ensuring_pairs(n, &degrees, 0).unwrap().len();
        let values = DVector::from_fn(count, |_, _| rng.random_range(-1.0..1.0));
        let problem = GappyProblem::new(n, degrees.clone(), values.clone()).unwrap();
        let c = gappy_interpolate(&problem).unwrap();
        for (node, b) in problem.nodes.iter().zip(values.iter()) {
            prop_assert!((evaluate(&degrees, &c, node.as_slice()).unwrap() - b).abs() < 1e-10);
        }
    }

    #[test]
    fn implicit_steps_satisfy_the_residual(seed in any::<u64>(), dt in 1e-3f64..1e-1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fom = DenseFom::random(&mut rng, 5, DegreeSet::new([1, 2]), 1);
        let x = DVector::from_fn(5, |_, _| rng.random_range(-0.3..0.3));
        let u = DVector::from_element(1, 0.5);
        let newton = NewtonOptions::default();
        let y = implicit_euler_step(&fom, &x, &u, dt, newton).unwrap();
        let r = &y - &x - eval_rhs(&fom, &y, &u).unwrap() * dt;
        prop_assert!(r.norm() < newton.tol * (1.0 + x.norm()));
    }
}

#[test]
fn ensemble_is_independent_of_thread_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let fom = DenseFom::random(&mut rng, 30, DegreeSet::new([0, 1, 2, 3]), 2);
    let v = orthonormal(&mut rng, 30, 5);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let pairs = rank_ensuring_pairs(5, &DegreeSet::new([0, 1, 2, 3]), 2).unwrap();
            let ens = generate_ensemble(&fom, &v, pairs, 1e-3).unwrap();
            (ens.derivatives, reduce(&fom, &v).unwrap())
        })
    };
    let (d1, r1) = run(1);
    let (d4, r4) = run(4);
    assert_eq!(d1, d4);
    assert_eq!(r1, r4);
}
