use nelson_core::fock::*;
use nelson_core::hamiltonian::*;
use nelson_core::schedule::{self, CutoffSchedule, ModelParams, ScheduleConfig};
use nelson_core::spectral::{ground_state, SolverConfig};
use proptest::prelude::*;

fn setup(n: usize, m: usize, occ: usize) -> (ModeGrid, FockBasis) {
    let s = CutoffSchedule::new(&ModelParams::default(), &ScheduleConfig::default());
    let g = build_mode_grid(&s, n, m, 1, AngularSet::Axes6).unwrap();
    let b = enumerate_basis(&g, &g.active(n, m).unwrap(), occ).unwrap();
    (g, b)
}

fn cut(p: [f64; 3], g: f64, n: usize, m: usize) -> Cutoffs {
    Cutoffs { p, g, kappa: 1.5, beta: 1.2, uv_n: n, ir_m: m }
}

#[test]
fn free_ground_state_is_vacuum() {
    let (_, b) = setup(2, 1, 2);
    let p = [0.2, 0.0, 0.0];
    for v in [Variant::Free, Variant::Bare, Variant::Gross] {
        let h = assemble(&b, &cut(p, 0.0, 2, 1), v).unwrap();
        let gs = ground_state(&h.op, &SolverConfig::default()).unwrap();
        assert!((gs.e0 - 0.02).abs() < 1e-14);
        assert!((gs.ground[0].abs() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn assembled_operators_symmetric() {
    let (_, b) = setup(2, 1, 2);
    for v in [Variant::Free, Variant::Bare, Variant::Gross] {
        let h = assemble(&b, &cut([0.1, 0.05, 0.0], 0.05, 2, 1), v).unwrap();
        assert!(h.op.symmetry_defect() < 1e-15, "{v:?}");
    }
}

#[test]
fn uv_slices_add_up() {
    let (_, b) = setup(2, 0, 2);
    let p = [0.2, 0.0, 0.0];
    let h1 = assemble_gross(&b, &cut(p, 0.05, 1, 0)).unwrap().op;
    let h2 = assemble_gross(&b, &cut(p, 0.05, 2, 0)).unwrap().op;
    let d = uv_slice_op(&b, p, 0.05, 2).unwrap();
    assert!(h1.add_scaled(&d, 1.0).max_abs_diff(&h2) < 1e-14);
    assert!(uv_slice_op(&b, p, 0.05, 0).is_err());
}

#[test]
fn ir_slices_add_up() {
    let (_, b) = setup(1, 2, 2);
    let p = [0.2, 0.0, 0.0];
    let h1 = assemble_gross(&b, &cut(p, 0.05, 1, 1)).unwrap().op;
    let h2 = assemble_gross(&b, &cut(p, 0.05, 1, 2)).unwrap().op;
    let d = ir_slice_op(&b, 0.05, 2).unwrap();
    assert!(h1.add_scaled(&d, 1.0).max_abs_diff(&h2) < 1e-14);
}

#[test]
fn missing_slice_rejected() {
    let (_, b) = setup(1, 0, 2);
    assert!(assemble_gross(&b, &cut([0.0; 3], 0.05, 2, 0)).is_err());
}

#[test]
fn gross_coefficient_formula() {
    let (_, b) = setup(1, 0, 1);
    for m in &b.modes {
        let w = m.omega();
        let want = -0.05 * rho(w) / (w * w / 2.0 + w);
        assert_eq!(gross_beta(m, 0.05), want);
    }
}

#[test]
fn discrete_self_energy_approaches_continuum() {
    let s = CutoffSchedule::new(&ModelParams::default(), &ScheduleConfig::default());
    let mut prev = f64::INFINITY;
    for radial in [1, 4, 16] {
        let g = build_mode_grid(&s, 3, 0, radial, AngularSet::Axes6).unwrap();
        let b = enumerate_basis(&g, &g.active(3, 0).unwrap(), 0).unwrap();
        let d = vself_discrete(&b, 0.05, 3);
        let c = schedule::vself(s.sigma(3), 1.5, 0.05).unwrap();
        let err = (d - c).abs() / c.abs();
        assert!(err < prev);
        prev = err;
    }
    assert!(prev < 1e-3);
}

proptest! {
    #[test]
    fn gross_comparison_small_grid(px in -0.25f64..0.25, g in 0.0f64..0.06) {
        let (_, b) = setup(1, 1, 2);
        let cfg = SolverConfig::default();
        let p = [px * 0.6, px * 0.8, 0.0];
        let ep = ground_state(&assemble_bare(&b, &cut(p, g, 1, 1)).unwrap().op, &cfg).unwrap().e0;
        let e0 = ground_state(&assemble_bare(&b, &cut([0.0; 3], g, 1, 1)).unwrap().op, &cfg).unwrap().e0;
        prop_assert!(e0 <= ep + 1e-12);
    }

    #[test]
    fn energy_below_free_value(px in 0.0f64..0.25, g in 0.0f64..0.06) {
        let (_, b) = setup(1, 1, 2);
        let p = [px, 0.0, 0.0];
        let e = ground_state(&assemble_gross(&b, &cut(p, g, 1, 1)).unwrap().op, &SolverConfig::default()).unwrap().e0;
        prop_assert!(e <= 0.5 * px * px + 1e-14);
    }
}
