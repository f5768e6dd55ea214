use faer::c64;
use nelson_core::linalg::{self, LinearOperator};
use nelson_core::schedule::Contour;
use nelson_core::spectral::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sparse symmetric test operator: diagonal plus weak random couplings.
fn random_sym(n: usize, seed: u64, coupling: f64) -> LinearOperator {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, i as f64 * 0.5 + rng.random::<f64>() * 0.1));
        for _ in 0..3 {
            let j = rng.random_range(0..n);
            if j != i {
                let v = coupling * (rng.random::<f64>() - 0.5);
                t.push((i, j, v));
                t.push((j, i, v));
            }
        }
    }
    LinearOperator::from_triplets(n, t, true)
}

#[test]
fn iterative_agrees_with_dense() {
    let op = random_sym(400, 3, 0.2);
    let cfg = SolverConfig::default();
    let d = ground_state_dense(&op, &cfg).unwrap();
    let it = ground_state_iterative(&op, &cfg, None).unwrap();
    assert!((d.e0 - it.e0).abs() < 1e-10);
    assert!((d.gap - it.gap).abs() < 1e-8);
    assert!((linalg::dot(&d.ground, &it.ground).abs() - 1.0).abs() < 1e-10);
    assert!(it.residual < 1e-9);
}

#[test]
fn degenerate_ground_state_rejected() {
    let op = LinearOperator::diagonal(&[1.0, 1.0, 2.0]);
    assert!(matches!(ground_state(&op, &SolverConfig::default()), Err(nelson_core::LabError::Degenerate(_))));
}

#[test]
fn contour_projector_matches_eigenprojector() {
    let op = random_sym(200, 11, 0.1);
    let cfg = SolverConfig::default();
    let gs = ground_state(&op, &cfg).unwrap();
    let c = Contour::new(gs.e0, gs.gap / 2.0, 0.0, 64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let v: Vec<f64> = (0..200).map(|_| rng.random::<f64>() - 0.5).collect();
        let q = contour_project(&op, &c, &v, &cfg).unwrap();
        let e = eigenprojector_apply(&gs.ground, &v);
        assert!(linalg::norm2(&linalg::sub(&q, &e)) < 1e-8 * linalg::norm2(&v));
    }
    let odd = Contour::new(gs.e0, gs.gap / 2.0, 0.0, 63).unwrap();
    let v = gs.ground.clone();
    let q = contour_project_complex(&op, &odd, &[v.clone()], &cfg).unwrap();
    let err: f64 = q[0].iter().zip(&v).map(|(a, b)| (a - c64::new(*b, 0.0)).norm().powi(2)).sum::<f64>().sqrt();
    assert!(err < 1e-8);
}

#[test]
fn resolvent_solves() {
    let op = random_sym(300, 2, 0.3);
    let z = c64::new(-0.3, 0.2);
    let v: Vec<c64> = (0..300).map(|i| c64::new((i as f64).sin(), 0.0)).collect();
    let x = resolve(&op, z, &v, &SolverConfig::default()).unwrap();
    let ax = op.apply_complex(&x);
    let r: f64 = (0..300).map(|i| (ax[i] - z * x[i] - v[i]).norm().powi(2)).sum::<f64>().sqrt();
    assert!(r < 1e-8);
}

#[test]
fn neumann_value_scales_with_slice() {
    let op = LinearOperator::diagonal(&[0.0, 1.0, 2.0, 3.0]);
    let slice = random_sym(4, 9, 0.2);
    let z = c64::new(-0.5, 0.0);
    let a = neumann_contraction(&op, &slice, z).unwrap().value;
    let b = neumann_contraction(&op, &slice.scaled(2.0), z).unwrap().value;
    assert!((b - 2.0 * a).abs() < 1e-12);
}

proptest! {
    #[test]
    fn ground_state_is_minimal_rayleigh_quotient(seed in 0u64..500) {
        let op = random_sym(40, seed, 0.5);
        let gs = ground_state(&op, &SolverConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        let v: Vec<f64> = (0..40).map(|_| rng.random::<f64>() - 0.5).collect();
        let rq = op.expectation(&v) / linalg::dot(&v, &v);
        prop_assert!(rq >= gs.e0 - 1e-12);
        prop_assert!((linalg::norm2(&gs.ground) - 1.0).abs() < 1e-12);
        prop_assert!(gs.residual < 1e-10);
    }

    #[test]
    fn contour_projector_idempotent(seed in 0u64..200) {
        let op = random_sym(30, seed, 0.3);
        let cfg = SolverConfig::default();
        let gs = ground_state(&op, &cfg).unwrap();
        let c = Contour::new(gs.e0, gs.gap / 2.0, 0.0, 64).unwrap();
        let v: Vec<f64> = (0..30).map(|i| ((i as u64 + seed) as f64).cos()).collect();
        let q = contour_project(&op, &c, &v, &cfg).unwrap();
        let qq = contour_project(&op, &c, &q, &cfg).unwrap();
        prop_assert!(linalg::norm2(&linalg::sub(&q, &qq)) < 1e-9 * linalg::norm2(&v).max(1.0));
    }
}
