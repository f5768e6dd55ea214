use nelson_core::multiscale::*;
use nelson_core::schedule::{ModelParams, ScheduleConfig};

fn ctx(g: f64, n: usize, m: usize) -> Context {
    let p = ModelParams { g, ..ModelParams::default() };
    let cfg = ScheduleConfig { n_max: n, m_max: m, ..ScheduleConfig::default() };
    Context::new(&p, &cfg, &SweepSettings::default(), n, m).unwrap()
}

#[test]
fn free_sweep_is_exact() {
    let c = ctx(0.0, 2, 1);
    let p = [0.2, 0.0, 0.0];
    let uv = uv_sweep(&c, p, 0.0, 2);
    assert!(uv.passed, "{:?}", uv.abort);
    let ir = ir_sweep(&c, uv.last().unwrap(), 1, false);
    for r in uv.records.iter().chain(&ir.records) {
        assert!((r.e_prime - 0.02).abs() < 1e-12);
        assert!((r.vacuum_overlap - 1.0).abs() < 1e-12);
        for a in 0..3 {
            assert!((r.grad_e[a] - p[a]).abs() < 1e-10);
        }
        for d in [r.diff_prev_uv, r.diff_prev_ir, r.energy_shift].into_iter().flatten() {
            assert!(d.abs() < 1e-12);
        }
    }
}

#[test]
fn coupled_uv_sweep_monotone() {
    let c = ctx(0.05, 3, 1);
    let uv = uv_sweep(&c, [0.2, 0.0, 0.0], 0.05, 3);
    assert!(uv.passed);
    assert_eq!(uv.records.len(), 4);
    for w in uv.records.windows(2) {
        assert!(w[1].e_prime <= w[0].e_prime + 1e-12);
        assert_eq!(w[1].n, w[0].n + 1);
    }
    for r in uv.stage(Stage::Uv) {
        assert!(r.gap.unwrap() >= r.gap_bound.unwrap());
    }
}

#[test]
fn ir_sweep_records_dressing() {
    let c = ctx(0.05, 1, 2);
    let uv = uv_sweep(&c, [0.2, 0.0, 0.0], 0.05, 1);
    let ir = ir_sweep(&c, uv.last().unwrap(), 2, true);
    assert!(ir.passed, "{:?}", ir.abort);
    let ms: Vec<usize> = ir.records.iter().map(|r| r.m).collect();
    assert_eq!(ms, vec![0, 1, 2]);
    for r in ir.stage(Stage::Ir) {
        let d = r.dressing.as_ref().unwrap();
        assert!(d.gamma_centered < 1e-8);
        assert!(d.exp_pi_defect < 1e-9);
    }
}

#[test]
fn joint_sweep_follows_scaling() {
    let c = ctx(0.05, 2, 1);
    let t = joint_sweep(&c, [0.2, 0.0, 0.0], 0.05, 1);
    assert!(t.abort.is_none(), "{:?}", t.abort);
    for r in t.stage(Stage::JointIr) {
        assert_eq!(r.n, 2 * r.m);
    }
}

#[test]
fn gradient_bounded() {
    let c = ctx(0.05, 2, 0);
    let uv = uv_sweep(&c, [0.25, 0.0, 0.0], 0.05, 2);
    for r in &uv.records {
        let n = (r.grad_e[0].powi(2) + r.grad_e[1].powi(2) + r.grad_e[2].powi(2)).sqrt();
        assert!(n <= 0.75);
    }
}

#[test]
fn joint_envelope_formula() {
    let (k, beta, gamma) = (5.0f64, 1.2f64, 0.25f64);
    let want = 2.0 * k.powi(7) * (4.0 / (beta.powi(4) * gamma * gamma)).sqrt();
    assert!((joint_envelope(2, 4, k, beta, gamma) - want).abs() < 1e-12 * want);
    assert_eq!(joint_envelope(0, 0, k, beta, gamma), 0.0);
    let a = nelson_core::schedule::alpha_min(beta, gamma, k, None) as i32;
    assert!(k.powi(3) / (beta.powi(a) * gamma).sqrt() <= 1.0);
    assert!(k.powi(3) / (beta.powi(a - 1) * gamma).sqrt() > 1.0);
}
