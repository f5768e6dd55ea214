use nelson_core::multiscale::{Check, GroundStateRecord, Stage};
use nelson_core::verify::*;
use proptest::prelude::*;

#[test]
fn closed_forms_match_quadrature() {
    for kappa in [1.1, 1.5, 1.9] {
        let c = appendix_constants(kappa, 1e-12).unwrap();
        let (c2, c3) = c2_c3_closed(kappa);
        assert!((c.c2 - c2).abs() < 1e-10 * c2, "kappa={kappa}");
        assert!((c.c3 - c3).abs() < 1e-10 * c3, "kappa={kappa}");
        assert!(c.tail_c1_quadrature <= c.tail_c1_bound);
        assert!(c.tail_c2_quadrature <= c.tail_c2_bound);
        let ca = c.c1 * c.c1 * (1.0 + 1.0 / kappa) / 2.0 + c.c2 * c.c2 + 2.0 * 2f64.sqrt() * c.c2 + c.c3;
        assert!((c.c_a - ca).abs() < 1e-14);
        assert!((c.c_b - (1.5 * c.c1 * c.c1 + c.c3)).abs() < 1e-14);
    }
    assert!(appendix_constants(-1.0, 1e-12).is_err());
}

#[test]
fn reference_constants() {
    let c = appendix_constants(1.5, 1e-12).unwrap();
    assert!((c.c1 - 0.31122).abs() < 1e-5);
    assert!((c.c_a - 0.78583).abs() < 1e-5);
    assert!((c.c_b - 0.34021).abs() < 1e-5);
}

#[test]
fn empty_fit_is_vacuous() {
    let f = fit_rate("x", "", &[(1, 0.0, 1.0)], 0.5);
    assert!(f.passed && f.points.is_empty());
}

fn record(p: [f64; 3], g: f64, e: f64) -> GroundStateRecord {
    GroundStateRecord {
        stage: Stage::Uv,
        n: 1,
        m: 0,
        p,
        g,
        dim: 1,
        e_prime: e,
        vself: 0.0,
        grad_e: [0.0; 3],
        gap: None,
        gap_bound: None,
        norm: 1.0,
        vacuum_overlap: 1.0,
        diff_prev_uv: None,
        diff_prev_ir: None,
        energy_shift: None,
        neumann_value: None,
        projector_defect: None,
        contour: None,
        method: nelson_core::spectral::Method::Dense,
        residual: 0.0,
        dressing: None,
        phi_diff_joint: None,
        eta_diff_uv: None,
        joint_envelope: None,
        checks: Vec::<Check>::new(),
        state: Vec::new(),
        basis: None,
    }
}

#[test]
fn gross_suite_flags_violation() {
    let cfg = VerifyConfig::default();
    let good = [record([0.0; 3], 0.05, -0.001), record([0.1, 0.0, 0.0], 0.05, 0.004)];
    assert!(check_gross(&good, &cfg).passed);
    let bad = [record([0.0; 3], 0.05, 0.01), record([0.1, 0.0, 0.0], 0.05, 0.004)];
    assert!(!check_gross(&bad, &cfg).passed);
}

#[test]
fn window_suite() {
    let cfg = VerifyConfig::default();
    assert!(check_energy_window(&[record([0.2, 0.0, 0.0], 0.05, 0.019)], 0.34, &cfg).passed);
    assert!(!check_energy_window(&[record([0.2, 0.0, 0.0], 0.05, 0.021)], 0.34, &cfg).passed);
    assert!(!check_energy_window(&[record([0.0; 3], 0.05, -0.1)], 0.34, &cfg).passed);
}

#[test]
fn csv_has_one_row_per_check() {
    let mut r = VerificationReport::default();
    let mut s = SuiteReport::new("window");
    s.push(CheckResult::le("a", "x <= y", 1.0, 2.0, 0.0));
    s.push(CheckResult::ge("b", "x >= y", 1.0, 2.0, 0.0));
    r.push(s);
    let csv = r.to_csv();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("suite,check,value,bound,tol,pass"));
    assert!(!r.passed);
}

proptest! {
    #[test]
    fn exact_power_law_fits(c in 1e-6f64..1e3, rate in 0.1f64..0.9, n0 in 1usize..4) {
        let pts: Vec<(usize, f64, f64)> = (n0..n0 + 5).map(|n| (n, c * rate.powi(n as i32), rate.powi(n as i32))).collect();
        let f = fit_rate("law", "", &pts, 0.5);
        prop_assert!(f.passed);
        prop_assert!((f.prefactor - c).abs() < 1e-9 * c);
        prop_assert!(f.max_log_dev < 1e-9);
        prop_assert!((f.slope_measured - f.slope_envelope).abs() < 1e-9);
    }

    #[test]
    fn wrong_rate_fails(rate in 0.1f64..0.5) {
        let pts: Vec<(usize, f64, f64)> = (1..7).map(|n| (n, rate.powi(n as i32), (2.0 * rate).powi(n as i32))).collect();
        prop_assert!(!fit_rate("law", "", &pts, 0.5).passed);
    }

    #[test]
    fn free_lipschitz_margin_nonnegative(p in 0.0f64..0.25, k in 0.0f64..10.0) {
        prop_assert!(free_lipschitz_margin(p, k) >= 0.0);
    }
}
