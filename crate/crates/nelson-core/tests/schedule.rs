use nelson_core::schedule::*;
use proptest::prelude::*;

fn params(beta: f64) -> ModelParams {
    ModelParams { beta, ..ModelParams::default() }
}

/// sum_{j>n} j x^j with x = 1/beta.
fn tail(beta: f64, n: usize) -> f64 {
    let x = 1.0 / beta;
    let nf = n as f64;
    x.powi(n as i32 + 1) * ((nf + 1.0) - nf * x) / ((1.0 - x) * (1.0 - x))
}

#[test]
fn xi_increments_telescope() {
    for beta in [1.1, 1.5, 1.9] {
        let s = CutoffSchedule::new(&params(beta), &ScheduleConfig::default());
        let sum: f64 = (1..=200).map(|j| gap_decrement(beta, j)).sum();
        let rest = (beta - 1.0).powi(2) / (2.0 * beta) * tail(beta, 200);
        assert!((sum + rest - 0.5).abs() < 1e-12, "beta={beta} sum={sum}");
        let k = s.kappa;
        for n in [1, 7, 50, 200] {
            let direct = k / 8.0 * (1.0 - (1..=n).map(|j| gap_decrement(beta, j)).sum::<f64>());
            assert!((s.xi(n) - direct).abs() < 1e-13);
        }
    }
    let long: f64 = (1..=400).map(|j| gap_decrement(1.1, j)).sum();
    assert!((long - 0.5).abs() < 1e-10);
}

#[test]
fn schedule_table_rows() {
    let p = ModelParams::default();
    let s = CutoffSchedule::new(&p, &ScheduleConfig::default());
    let t = s.table(4, 3);
    assert_eq!(t.uv.len(), 5);
    assert_eq!(t.ir.len(), 4);
    for r in &t.uv {
        assert_eq!(r.sigma, p.kappa * p.beta.powi(r.n as i32));
        assert_eq!(r.xi, s.xi(r.n));
    }
    for r in &t.ir {
        assert!((r.tau - p.kappa * p.gamma.powi(r.m as i32)).abs() < 1e-15);
        assert!((r.gap_bound - p.zeta * r.tau).abs() < 1e-15);
    }
    assert_eq!(t.joint_n, vec![0, 2, 4, 6]);
}

#[test]
fn reference_params_admissible() {
    let r = validate_params(&ModelParams::default(), &ScheduleConfig::default()).unwrap();
    assert!(r.admissible(), "{}", r.render());
}

#[test]
fn large_coupling_rejected_by_name() {
    let p = ModelParams { g: 0.3, ..ModelParams::default() };
    let r = validate_params(&p, &ScheduleConfig::default()).unwrap();
    assert!(!r.admissible());
    assert!(!r.get("|g| <= beta - 1").unwrap().passed);
}

#[test]
fn non_finite_input_is_an_error() {
    let p = ModelParams { g: f64::NAN, ..ModelParams::default() };
    assert!(validate_params(&p, &ScheduleConfig::default()).is_err());
}

#[test]
fn ir_series_matches_partial_sum() {
    for gamma in [0.01, 0.1, 0.25, 0.4] {
        let c = ir_series_closed(gamma);
        assert!((c - ir_series_partial(gamma, 5000)).abs() < 1e-12 * c.max(1.0));
    }
}

#[test]
fn alpha_min_reference() {
    let a = alpha_min_first_term(1.2, 0.25, 5.0);
    let expect = (6.0 * 5f64.ln() - 0.25f64.ln()).abs() / 1.2f64.ln();
    assert!((a - expect).abs() < 1e-12);
    assert_eq!(alpha_min(1.2, 0.25, 5.0, None), expect.ceil() as u64);
}

#[test]
fn contour_nodes_on_circle() {
    let c = Contour::new(0.3, 0.1, 0.02, 16).unwrap();
    for z in c.nodes() {
        let d = ((z.re - 0.32).powi(2) + z.im * z.im).sqrt();
        assert!((d - 0.1).abs() < 1e-15);
    }
    assert!(c.encloses(0.35));
    assert!(!c.encloses(0.2));
    assert!(Contour::new(0.0, -1.0, 0.0, 16).is_err());
}

proptest! {
    #[test]
    fn xi_stays_in_gap_window(beta in 1.01f64..1.99, n in 0usize..10_000) {
        let s = CutoffSchedule::new(&params(beta), &ScheduleConfig::default());
        let xi = s.xi(n);
        prop_assume!(n > 0);
        prop_assert!(xi >= s.kappa / 16.0 && xi <= s.kappa / 8.0);
    }

    #[test]
    fn xi_non_increasing(beta in 1.01f64..1.99, n in 0usize..2000) {
        let s = CutoffSchedule::new(&params(beta), &ScheduleConfig::default());
        prop_assert!(s.xi(n + 1) <= s.xi(n));
    }

    #[test]
    fn vself_closed_form_matches_quadrature(kappa in 1.0001f64..1.9999, lam in 2.0f64..1000.0) {
        let a = vself(lam, kappa, 0.1).unwrap();
        let b = vself_quadrature(lam, kappa, 0.1, 1e-13).unwrap();
        prop_assert!(((a - b) / a).abs() < 1e-10, "{} vs {}", a, b);
    }

    #[test]
    fn vself_monotone_in_cutoff(kappa in 1.0f64..2.0, lam in 2.0f64..100.0, dl in 0.0f64..100.0) {
        prop_assert!(vself(lam + dl, kappa, 0.05).unwrap() <= vself(lam, kappa, 0.05).unwrap());
    }
}
