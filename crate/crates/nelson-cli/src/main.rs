use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nelson_core::experiment::{self, ExperimentConfig};
use nelson_core::{LabError, Result};

#[derive(Parser)]
#[command(name = "nelson-lab", version, about = "Multiscale mass-shell laboratory for the Nelson model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct Common {
    /// Experiment configuration (TOML, or JSON by extension)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Artifact directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated suite list
    #[arg(long, value_delimiter = ',')]
    suites: Option<Vec<String>>,
    /// Worker threads over the (P, g) grid
    #[arg(long, env = "NELSON_LAB_THREADS")]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the configuration and print the cutoff schedule
    Plan(Common),
    /// Run the sweeps over the (P, g) grid
    Run(Common),
    /// Check an artifact directory
    Verify(Common),
    /// Emit plot-data CSVs for an artifact directory
    Report(Common),
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
        cfg.verify.seed = s;
    }
    if let Some(s) = &c.suites {
        cfg.suites = s.clone();
    }
    Ok(cfg)
}

fn out_dir(c: &Common, cfg: Option<&ExperimentConfig>) -> Result<PathBuf> {
    c.out
        .clone()
        .or_else(|| cfg.and_then(|x| x.output.clone()))
        .ok_or_else(|| LabError::Input("no output directory: pass --out".into()))
}

fn plan(c: &Common) -> Result<i32> {
    let cfg = load_config(c)?;
    let report = experiment::cmd_plan(&cfg)?;
    for r in &report.constraints {
        println!("{}", r.render());
    }
    println!("{:>4} {:>14} {:>14}", "n", "sigma_n", "xi_n");
    for row in &report.table.uv {
        println!("{:>4} {:>14.6e} {:>14.6e}", row.n, row.sigma, row.xi);
    }
    println!("{:>4} {:>14} {:>14}", "m", "tau_m", "zeta*tau_m");
    for row in &report.table.ir {
        println!("{:>4} {:>14.6e} {:>14.6e}", row.m, row.tau, row.gap_bound);
    }
    let json = serde_json::to_string_pretty(&report)?;
    match out_dir(c, Some(&cfg)) {
        Ok(dir) => {
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join("plan.json"), json)?;
        }
        Err(_) => println!("{json}"),
    }
    Ok(if report.admissible { 0 } else { 2 })
}

fn run(c: &Common) -> Result<i32> {
    let cfg = load_config(c)?;
    let dir = out_dir(c, Some(&cfg))?;
    let threads = experiment::resolve_threads(c.threads);
    let report = experiment::cmd_run(&cfg, &dir, threads)?;
    for p in &report.points {
        for t in &p.traces {
            let status = if t.passed { "ok" } else { "FAILED" };
            println!("point {} P={:?} g={} {:?}: {} records, {status}", p.point, p.p, p.g, t.kind, t.records);
            if let Some(a) = &t.abort {
                println!("  abort: {a}");
            }
            for f in &t.failed_checks {
                println!("  failed: {f}");
            }
        }
    }
    println!("artifact: {}", dir.display());
    Ok(if report.passed { 0 } else { 1 })
}

fn artifact_dir(c: &Common) -> Result<PathBuf> {
    let dir = out_dir(c, None).or_else(|_| {
        c.config.as_ref().map(|p| ExperimentConfig::load(p)).transpose()?.and_then(|x| x.output).ok_or_else(|| {
            LabError::Input("no artifact directory: pass --out".into())
        })
    })?;
    if !Path::new(&dir).join("records.jsonl").exists() {
        return Err(LabError::Input(format!("{} holds no records.jsonl", dir.display())));
    }
    Ok(dir)
}

fn verify(c: &Common) -> Result<i32> {
    let art = experiment::load_artifact(&artifact_dir(c)?)?;
    let suites = c.suites.clone().unwrap_or_else(|| art.config.suites.clone());
    let report = experiment::cmd_verify(&art, &suites, c.seed)?;
    for s in &report.suites {
        println!("{:<12} {}", s.suite, if s.passed { "PASS" } else { "FAIL" });
        for f in s.failures() {
            println!("  {}: value {:e} bound {:e}", f.name, f.value, f.bound);
        }
        for w in &s.warnings {
            println!("  warning: {w}");
        }
    }
    Ok(if report.passed { 0 } else { 1 })
}

fn report(c: &Common) -> Result<i32> {
    let art = experiment::load_artifact(&artifact_dir(c)?)?;
    for p in experiment::cmd_report(&art)? {
        println!("{}", p.display());
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let out = match &cli.command {
        Command::Plan(c) => plan(c),
        Command::Run(c) => run(c),
        Command::Verify(c) => verify(c),
        Command::Report(c) => report(c),
    };
    match out {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(experiment::exit_code(&e) as u8)
        }
    }
}
