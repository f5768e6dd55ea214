use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nelson-lab"))
}

fn write_config(dir: &Path, g: f64) -> std::path::PathBuf {
    let path = dir.join("cfg.toml");
    std::fs::write(
        &path,
        format!(
            r#"
P_grid = [[0.0, 0.0, 0.0], [0.2, 0.0, 0.0]]
g_list = [{g}]
suites = ["gross", "window", "lipschitz", "gaps", "monotone", "infrared", "dressed"]

[model]
g = {g}

[schedule]
n_max = 2
m_max = 1
"#
        ),
    )
    .unwrap();
    path
}

fn code(c: &mut Command) -> i32 {
    c.output().unwrap().status.code().unwrap()
}

#[test]
fn plan_accepts_reference_config() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), 0.05);
    let out = bin().args(["plan", "--config"]).arg(&cfg).arg("--out").arg(d.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("sigma_n"));
    assert!(d.path().join("plan.json").exists());
}

#[test]
fn plan_rejects_large_coupling() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), 0.3);
    let out = bin().args(["plan", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL |g| <= beta - 1"));
    assert_eq!(code(bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(d.path().join("a"))), 2);
}

#[test]
fn malformed_config_is_invalid_input() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path().join("bad.toml");
    std::fs::write(&p, "nonsense = [").unwrap();
    assert_eq!(code(bin().args(["plan", "--config"]).arg(&p)), 2);
    assert_eq!(code(bin().args(["plan", "--config"]).arg(d.path().join("missing.toml"))), 2);
    assert_eq!(code(bin().args(["frobnicate"])), 2);
}

#[test]
fn run_verify_report_cycle() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), 0.05);
    let art = d.path().join("art");
    let run = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&art).env("NELSON_LAB_THREADS", "2").output().unwrap();
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stdout));
    for f in ["records.jsonl", "report.json", "mass_shell.csv", "config.json"] {
        assert!(art.join(f).exists(), "{f}");
    }
    assert_eq!(code(bin().arg("verify").arg("--out").arg(&art)), 0);
    assert!(art.join("verification.csv").exists());
    assert_eq!(code(bin().arg("verify").arg("--out").arg(&art).args(["--suites", "negative"])), 1);
    assert_eq!(code(bin().arg("verify").arg("--out").arg(&art).args(["--suites", "nope"])), 2);
    let rep = bin().arg("report").arg("--out").arg(&art).output().unwrap();
    assert_eq!(rep.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&rep.stdout).lines().count() >= 3);
}

#[test]
fn verify_missing_records() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(bin().arg("verify").arg("--out").arg(d.path())), 2);
    assert_eq!(code(bin().arg("verify")), 2);
}

#[test]
fn free_run_mass_shell() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), 0.0);
    let art = d.path().join("art");
    assert_eq!(code(bin().args(["run", "--threads", "1", "--seed", "11", "--config"]).arg(&cfg).arg("--out").arg(&art)), 0);
    let csv = std::fs::read_to_string(art.join("mass_shell.csv")).unwrap();
    for l in csv.lines().skip(1) {
        let f: Vec<f64> = l.split(',').take(7).map(|x| x.parse().unwrap()).collect();
        assert!((f[6] - 0.5 * (f[0] * f[0] + f[1] * f[1] + f[2] * f[2])).abs() < 1e-12);
    }
}
