use nelson_core::dressing::*;
use nelson_core::fock::*;
use nelson_core::hamiltonian::*;
use nelson_core::linalg;
use nelson_core::schedule::{CutoffSchedule, ModelParams, ScheduleConfig};
use nelson_core::spectral::{ground_state, SolverConfig};
use proptest::prelude::*;

fn basis(n: usize, m: usize, occ: usize) -> FockBasis {
    let s = CutoffSchedule::new(&ModelParams::default(), &ScheduleConfig::default());
    let g = build_mode_grid(&s, n.max(1), m.max(1), 1, AngularSet::Axes6).unwrap();
    enumerate_basis(&g, &g.active(n, m).unwrap(), occ).unwrap()
}

#[test]
fn alpha_vanishes_outside_infrared() {
    let b = basis(1, 1, 1);
    let c = alpha_coeffs(&b.modes, [0.1, 0.0, 0.0], 1, 0.05).unwrap();
    for (m, a) in b.modes.iter().zip(&c.alpha) {
        if m.shell.is_uv() {
            assert_eq!(*a, 0.0);
        } else {
            let want = -0.05 * m.rho() / (m.omega() * (1.0 - m.khat()[0] * 0.1));
            assert!((a - want).abs() < 1e-15 * want.abs());
        }
    }
    assert!(alpha_coeffs(&b.modes, [1.0, 0.0, 0.0], 1, 0.05).is_err());
}

#[test]
fn w_is_orthogonal() {
    let b = basis(0, 1, 3);
    let c = alpha_coeffs(&b.modes, [0.15, 0.05, 0.0], 1, 0.05).unwrap();
    let w = bogolyubov_w(&b, &c);
    assert!(w.unitarity_defect() < 1e-12);
    let v: Vec<f64> = (0..b.dim()).map(|i| (i as f64).sin()).collect();
    let back = w.apply_adjoint(&w.apply(&v));
    assert!(linalg::norm2(&linalg::sub(&back, &v)) < 1e-12);
}

#[test]
fn cancellation_vanishes() {
    let b = basis(1, 1, 2);
    let c = alpha_coeffs(&b.modes, [0.18, -0.03, 0.02], 1, 0.05).unwrap();
    assert!(cancellation_operator(&b, &c).max_abs() < 1e-14);
}

#[test]
fn initial_state_is_centered() {
    let b = std::sync::Arc::new(basis(1, 1, 2));
    let cut = Cutoffs { p: [0.2, 0.0, 0.0], g: 0.05, kappa: 1.5, beta: 1.2, uv_n: 1, ir_m: 0 };
    let h = assemble_gross(&b, &cut).unwrap();
    let gs = ground_state(&h.op, &SolverConfig::default()).unwrap();
    let gross = assemble_gross_data(&b, 0.05, 1.5, 1.2, 1).unwrap();
    let grad = nelson_core::multiscale::grad_e(&b, cut.p, cut.g, 1, &gs.ground).unwrap();
    let st = DressedState::initial(1, b.clone(), &gs.ground, grad, &gross).unwrap();
    for a in 0..3 {
        assert!((st.pi_expectation[a] + grad[a] - cut.p[a]).abs() < 1e-12);
    }
    let coeffs = alpha_coeffs(&b.modes, grad, 0, 0.05).unwrap();
    let ops = gamma_ops(&b, &coeffs, &gross, &st.phi).unwrap();
    assert!(ops.centered_defect(&st.phi) < 1e-14);
}

#[test]
fn f_shift_positive_for_slow_gradient() {
    for k in [[0.1, 0.0, 0.0], [0.0, -0.3, 0.2], [1.0, 1.0, 1.0]] {
        assert!(f_shift(k, [0.5, 0.1, 0.0]) > 0.0);
    }
    assert_eq!(f_shift([0.0; 3], [0.5, 0.0, 0.0]), 0.0);
}

proptest! {
    #[test]
    fn dressing_constants_quadratic_in_coupling(g in 0.001f64..0.06, qx in -0.7f64..0.7) {
        let b = basis(0, 1, 1);
        let c1 = alpha_coeffs(&b.modes, [qx, 0.0, 0.0], 1, g).unwrap();
        let c2 = alpha_coeffs(&b.modes, [qx, 0.0, 0.0], 1, 2.0 * g).unwrap();
        let d1 = dressing_constants(&b.modes, &c1, g);
        let d2 = dressing_constants(&b.modes, &c2, 2.0 * g);
        prop_assert!((d2.c_omega - 4.0 * d1.c_omega).abs() <= 1e-12 * d2.c_omega.abs());
        prop_assert!((d2.c_rho - 4.0 * d1.c_rho).abs() <= 1e-12 * d2.c_rho.abs());
        prop_assert!(d1.c_rho <= 0.0);
    }

    #[test]
    fn cancellation_any_gradient(qx in -0.7f64..0.7, qy in -0.5f64..0.5) {
        let b = basis(0, 1, 2);
        let c = alpha_coeffs(&b.modes, [qx, qy, 0.0], 1, 0.05).unwrap();
        prop_assert!(cancellation_operator(&b, &c).max_abs() < 1e-14);
    }
}
