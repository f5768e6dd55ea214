//! Experiment plumbing: configuration, orchestration over the (P, g) grid,
//! the record stream, vector files and the report emitters.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};
use crate::multiscale::{self, Context, GroundStateRecord, Stage, SweepKind, SweepSettings, SweepTrace};
use crate::schedule::{self, ModelParams, ScheduleConfig};
use crate::verify::{self, SuiteReport, VerificationReport, VerifyConfig};

pub const RECORD_SCHEMA: &str = "gsr/1";
pub const NMV_MAGIC: [u8; 4] = [0x4E, 0x4D, 0x53, 0x56];
pub const NMV_VERSION: u32 = 1;

/// Suites that only read the record stream.
pub const RECORD_SUITES: &[&str] = &["gross", "window", "lipschitz", "rates", "gaps", "monotone", "infrared", "dressed"];
/// Suites that recompute states from the stored configuration.
pub const STATE_SUITES: &[&str] = &["apriori", "froehlich", "gradient", "contour", "identities"];
pub const NEGATIVE_SUITE: &str = "negative";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSelection {
    pub uv: bool,
    pub ir: bool,
    pub dressed: bool,
    pub joint: bool,
}

impl Default for SweepSelection {
    fn default() -> Self {
        Self { uv: true, ir: true, dressed: true, joint: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub model: ModelParams,
    pub schedule: ScheduleConfig,
    pub sweep: SweepSettings,
    pub sweeps: SweepSelection,
    #[serde(rename = "P_grid")]
    pub p_grid: Vec<[f64; 3]>,
    pub g_list: Vec<f64>,
    pub suites: Vec<String>,
    pub verify: VerifyConfig,
    pub write_vectors: bool,
    pub seed: u64,
    /// Block cut of the identity suite and its N_max values.
    pub identity_n_occ: Vec<usize>,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let model = ModelParams::default();
        Self {
            p_grid: vec![model.p],
            g_list: vec![model.g],
            model,
            schedule: ScheduleConfig::default(),
            sweep: SweepSettings::default(),
            sweeps: SweepSelection::default(),
            suites: RECORD_SUITES.iter().map(|s| s.to_string()).collect(),
            verify: VerifyConfig::default(),
            write_vectors: false,
            seed: 7,
            identity_n_occ: vec![2, 3, 4],
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_str_guess(text: &str, path_hint: Option<&Path>) -> Result<Self> {
        let json = path_hint.and_then(|p| p.extension()).is_some_and(|e| e == "json")
            || text.trim_start().starts_with('{');
        if json {
            serde_json::from_str(text).map_err(|e| LabError::Config(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| LabError::Input(format!("{}: {e}", path.display())))?;
        Self::from_str_guess(&text, Some(path))
    }

    /// SHA-256 over the canonical JSON form, output location excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn points(&self) -> Vec<([f64; 3], f64)> {
        let mut out = Vec::new();
        for &g in &self.g_list {
            for &p in &self.p_grid {
                out.push((p, g));
            }
        }
        out
    }

    pub fn params_at(&self, p: [f64; 3], g: f64) -> ModelParams {
        self.model.with_p(p).with_g(g)
    }

    /// Grid extent needed by the selected sweeps.
    pub fn grid_extent(&self) -> (usize, usize) {
        let joint_n = if self.sweeps.joint { schedule::joint_scaling(self.schedule.m_max, self.schedule.alpha_prime) } else { 0 };
        (self.schedule.n_max.max(joint_n).max(1), self.schedule.m_max.max(1))
    }

    /// Every constraint at every grid point; the first hard violation is an error.
    pub fn validate(&self) -> Result<Vec<schedule::ConstraintReport>> {
        if self.p_grid.is_empty() || self.g_list.is_empty() {
            return Err(LabError::Config("P_grid and g_list must be non-empty".into()));
        }
        if self.sweep.grid.n_occ == 0 {
            return Err(LabError::Config("grid.n_occ must be at least 1".into()));
        }
        let mut reports = Vec::new();
        for (p, g) in self.points() {
            let r = schedule::validate_params(&self.params_at(p, g), &self.schedule)?;
            if let Some(c) = r.constraints.iter().find(|c| !c.passed && c.severity == schedule::Severity::Hard) {
                return Err(LabError::Config(format!(
                    "constraint `{}` violated at P={p:?}, g={g}: {} {} {}",
                    c.name, c.lhs, c.relation, c.rhs
                )));
            }
            reports.push(r);
        }
        for s in &self.suites {
            if !RECORD_SUITES.contains(&s.as_str()) && !STATE_SUITES.contains(&s.as_str()) && s != NEGATIVE_SUITE {
                return Err(LabError::Config(format!("unknown suite `{s}`")));
            }
        }
        Ok(reports)
    }
}

/// Keeps dense kernels single-threaded so outputs do not depend on scheduling.
pub fn init_numerics() {
    faer::set_global_parallelism(faer::Par::Seq);
}

pub fn resolve_threads(flag: Option<usize>) -> usize {
    flag.or_else(|| std::env::var("NELSON_LAB_THREADS").ok().and_then(|v| v.trim().parse().ok()))
        .unwrap_or(1)
        .max(1)
}

/// Exit code for an error: invalid input is 2, everything else 1.
pub fn exit_code(e: &LabError) -> i32 {
    match e {
        LabError::Config(_) | LabError::Input(_) | LabError::NonFinite(_) | LabError::Domain(_) | LabError::Json(_) => 2,
        _ => 1,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecordLine {
    pub schema: String,
    pub config_hash: String,
    pub point: usize,
    pub sweep: SweepKind,
    pub index: usize,
    #[serde(flatten)]
    pub record: GroundStateRecord,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceSummary {
    pub kind: SweepKind,
    pub passed: bool,
    pub abort: Option<String>,
    pub records: usize,
    pub failed_checks: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointSummary {
    pub point: usize,
    #[serde(rename = "P")]
    pub p: [f64; 3],
    pub g: f64,
    pub traces: Vec<TraceSummary>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    pub config_hash: String,
    pub points: Vec<PointSummary>,
    pub passed: bool,
}

pub struct PointResult {
    pub point: usize,
    pub p: [f64; 3],
    pub g: f64,
    pub traces: Vec<SweepTrace>,
}

pub fn context_for(cfg: &ExperimentConfig, p: [f64; 3], g: f64) -> Result<Context> {
    let (n_uv, m_ir) = cfg.grid_extent();
    Context::new(&cfg.params_at(p, g), &cfg.schedule, &cfg.sweep, n_uv, m_ir)
}

/// All selected sweeps at one grid point.
pub fn run_point(cfg: &ExperimentConfig, point: usize, p: [f64; 3], g: f64) -> Result<PointResult> {
    let ctx = context_for(cfg, p, g)?;
    let mut traces = Vec::new();
    if cfg.sweeps.uv || cfg.sweeps.ir {
        let uv = multiscale::uv_sweep(&ctx, p, g, cfg.schedule.n_max);
        let ir = if cfg.sweeps.ir && uv.abort.is_none() {
            uv.last().map(|last| multiscale::ir_sweep(&ctx, last, cfg.schedule.m_max, cfg.sweeps.dressed))
        } else {
            None
        };
        traces.push(uv);
        traces.extend(ir);
    }
    if cfg.sweeps.joint {
        traces.push(multiscale::joint_sweep(&ctx, p, g, cfg.schedule.m_max));
    }
    Ok(PointResult { point, p, g, traces })
}

/// Runs `points` on a worker pool; `sink` sees results in point order.
pub fn run_points<F>(cfg: &ExperimentConfig, threads: usize, mut sink: F) -> Result<()>
where
    F: FnMut(PointResult) -> Result<()>,
{
    let points = cfg.points();
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, Result<PointResult>)>();
    std::thread::scope(|scope| -> Result<()> {
        for _ in 0..threads.min(points.len()).max(1) {
            let tx = tx.clone();
            let next = &next;
            let points = &points;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= points.len() {
                    break;
                }
                let (p, g) = points[i];
                if tx.send((i, run_point(cfg, i, p, g))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut pending: BTreeMap<usize, Result<PointResult>> = BTreeMap::new();
        let mut want = 0;
        for (i, r) in rx {
            pending.insert(i, r);
            while let Some(r) = pending.remove(&want) {
                sink(r?)?;
                want += 1;
            }
        }
        Ok(())
    })
}

fn summarize(pr: &PointResult) -> PointSummary {
    PointSummary {
        point: pr.point,
        p: pr.p,
        g: pr.g,
        traces: pr
            .traces
            .iter()
            .map(|t| TraceSummary {
                kind: t.kind,
                passed: t.passed,
                abort: t.abort.clone(),
                records: t.records.len(),
                failed_checks: t
                    .records
                    .iter()
                    .flat_map(|r| {
                        r.checks
                            .iter()
                            .filter(|c| !c.passed)
                            .map(move |c| format!("{:?} n={} m={}: {}", r.stage, r.n, r.m, c.name))
                    })
                    .collect(),
            })
            .collect(),
    }
}

fn trace_records(pr: &PointResult) -> impl Iterator<Item = (SweepKind, usize, &GroundStateRecord)> {
    pr.traces.iter().flat_map(|t| {
        let skip = usize::from(t.kind == SweepKind::Ir);
        t.records.iter().enumerate().skip(skip).map(move |(i, r)| (t.kind, i, r))
    })
}

pub const MASS_SHELL_HEADER: &str = "P_x,P_y,P_z,g,n,m,E_prime,gradE_x,gradE_y,gradE_z,gap,norm,config_hash";

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

/// Runs every point, streaming records.jsonl and mass_shell.csv in point order.
pub fn cmd_run(cfg: &ExperimentConfig, out: &Path, threads: usize) -> Result<RunReport> {
    cfg.validate()?;
    init_numerics();
    fs::create_dir_all(out)?;
    let hash = cfg.hash();
    fs::write(out.join("config.json"), serde_json::to_vec_pretty(cfg)?)?;
    let mut records = std::io::BufWriter::new(fs::File::create(out.join("records.jsonl"))?);
    let mut shell = std::io::BufWriter::new(fs::File::create(out.join("mass_shell.csv"))?);
    writeln!(shell, "{MASS_SHELL_HEADER}")?;
    if cfg.write_vectors {
        fs::create_dir_all(out.join("vectors"))?;
    }
    let mut summaries = Vec::new();
    run_points(cfg, threads, |pr| {
        for (kind, idx, r) in trace_records(&pr) {
            let line = RecordLine {
                schema: RECORD_SCHEMA.into(),
                config_hash: hash.clone(),
                point: pr.point,
                sweep: kind,
                index: idx,
                record: r.clone(),
            };
            serde_json::to_writer(&mut records, &line)?;
            records.write_all(b"\n")?;
            if kind != SweepKind::Joint {
                writeln!(
                    shell,
                    "{:e},{:e},{:e},{:e},{},{},{:e},{:e},{:e},{:e},{},{:e},{}",
                    r.p[0], r.p[1], r.p[2], r.g, r.n, r.m, r.e_prime, r.grad_e[0], r.grad_e[1], r.grad_e[2],
                    fmt_opt(r.gap), r.norm, hash
                )?;
            }
            if cfg.write_vectors && !r.state.is_empty() {
                let name = format!("p{:04}_{}_{:03}.nmv", pr.point, kind_name(kind), idx);
                write_nmv(&out.join("vectors").join(name), &NmvPayload::Real(r.state.clone()))?;
            }
        }
        summaries.push(summarize(&pr));
        Ok(())
    })?;
    records.flush()?;
    shell.flush()?;
    let passed = summaries.iter().all(|s| s.traces.iter().all(|t| t.passed));
    let report = RunReport { schema: "run/1".into(), config_hash: hash, points: summaries, passed };
    fs::write(out.join("report.json"), serde_json::to_vec_pretty(&report)?)?;
    Ok(report)
}

pub fn kind_name(k: SweepKind) -> &'static str {
    match k {
        SweepKind::Uv => "uv",
        SweepKind::Ir => "ir",
        SweepKind::Joint => "joint",
    }
}

pub fn read_records(path: &Path) -> Result<Vec<RecordLine>> {
    let f = fs::File::open(path).map_err(|e| LabError::Input(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RecordLine =
            serde_json::from_str(&line).map_err(|e| LabError::Input(format!("records.jsonl line {}: {e}", i + 1)))?;
        if rec.schema != RECORD_SCHEMA {
            return Err(LabError::Input(format!("unsupported record schema `{}`", rec.schema)));
        }
        out.push(rec);
    }
    if out.is_empty() {
        return Err(LabError::Input(format!("{} holds no records", path.display())));
    }
    Ok(out)
}

/// Rebuilds traces from the stream; IR traces regain their UV anchor record.
pub fn traces_from_lines(lines: &[RecordLine]) -> BTreeMap<(usize, String), SweepTrace> {
    let mut out: BTreeMap<(usize, String), SweepTrace> = BTreeMap::new();
    for l in lines {
        let t = out.entry((l.point, kind_name(l.sweep).to_string())).or_insert_with(|| SweepTrace {
            kind: l.sweep,
            p: l.record.p,
            g: l.record.g,
            records: Vec::new(),
            abort: None,
            passed: true,
        });
        t.passed &= l.record.passed();
        t.records.push(l.record.clone());
    }
    let anchors: Vec<(usize, GroundStateRecord)> = out
        .iter()
        .filter(|((_, k), _)| k == "uv")
        .filter_map(|((p, _), t)| t.records.last().map(|r| (*p, r.clone())))
        .collect();
    for (p, anchor) in anchors {
        if let Some(t) = out.get_mut(&(p, "ir".to_string())) {
            t.records.insert(0, anchor);
        }
    }
    out
}

pub struct Artifact {
    pub dir: PathBuf,
    pub config: ExperimentConfig,
    pub lines: Vec<RecordLine>,
}

pub fn load_artifact(dir: &Path) -> Result<Artifact> {
    let cfg_path = dir.join("config.json");
    if !cfg_path.exists() {
        return Err(LabError::Input(format!("{} has no config.json", dir.display())));
    }
    let config = ExperimentConfig::load(&cfg_path)?;
    let lines = read_records(&dir.join("records.jsonl"))?;
    let hash = config.hash();
    if let Some(l) = lines.iter().find(|l| l.config_hash != hash) {
        return Err(LabError::Input(format!("record config hash {} differs from config {hash}", l.config_hash)));
    }
    Ok(Artifact { dir: dir.to_path_buf(), config, lines })
}

fn combined_trace(traces: &BTreeMap<(usize, String), SweepTrace>, point: usize) -> Option<SweepTrace> {
    let uv = traces.get(&(point, "uv".to_string()))?;
    let mut t = uv.clone();
    if let Some(ir) = traces.get(&(point, "ir".to_string())) {
        t.records.extend(ir.records.iter().skip(1).cloned());
    }
    Some(t)
}

fn recomputed_states<'a>(cfg: &ExperimentConfig, cache: &'a mut Option<Vec<PointResult>>) -> Result<&'a Vec<PointResult>> {
    if cache.is_none() {
        let mut v = Vec::new();
        run_points(cfg, 1, |pr| {
            v.push(pr);
            Ok(())
        })?;
        *cache = Some(v);
    }
    Ok(cache.as_ref().unwrap())
}

/// Runs the requested suites over an artifact.
pub fn cmd_verify(art: &Artifact, suites: &[String], seed: Option<u64>) -> Result<VerificationReport> {
    init_numerics();
    let cfg = &art.config;
    let mut vcfg = cfg.verify.clone();
    if let Some(s) = seed {
        vcfg.seed = s;
    }
    for s in suites {
        if !RECORD_SUITES.contains(&s.as_str()) && !STATE_SUITES.contains(&s.as_str()) && s != NEGATIVE_SUITE {
            return Err(LabError::Input(format!("unknown suite `{s}`")));
        }
    }
    let consts = verify::appendix_constants(cfg.model.kappa, vcfg.quad_tol)?;
    let mut report = VerificationReport { config_hash: cfg.hash(), constants: Some(consts), ..Default::default() };
    let traces = traces_from_lines(&art.lines);
    let all: Vec<GroundStateRecord> = art.lines.iter().map(|l| l.record.clone()).collect();
    let uv_ir: Vec<GroundStateRecord> =
        art.lines.iter().filter(|l| l.sweep != SweepKind::Joint).map(|l| l.record.clone()).collect();
    let points: Vec<usize> = {
        let mut v: Vec<usize> = art.lines.iter().map(|l| l.point).collect();
        v.dedup();
        v
    };
    let beta = cfg.model.beta;
    let gamma = cfg.model.gamma;
    let kappa = cfg.model.kappa;
    let mut recomputed: Option<Vec<PointResult>> = None;
    for suite in suites {
        let rep = match suite.as_str() {
            "gross" => verify::check_gross(&uv_ir, &vcfg),
            "window" => verify::check_energy_window(&all, consts.c_b, &vcfg),
            "lipschitz" => verify::check_lipschitz(&uv_ir, &vcfg),
            "rates" | "gaps" | "monotone" | "infrared" | "dressed" => {
                let mut rep = SuiteReport::new(suite);
                for &p in &points {
                    let Some(t) = combined_trace(&traces, p) else { continue };
                    let sub = match suite.as_str() {
                        "rates" => verify::check_rate_envelopes(&t, beta, gamma, kappa, &vcfg),
                        "gaps" => verify::check_gaps(&t, kappa),
                        "monotone" => verify::check_monotone(&t, &vcfg),
                        "infrared" => match traces.get(&(p, "ir".to_string())) {
                            Some(ir) if ir.g != 0.0 => verify::check_infrared_trend(ir),
                            _ => SuiteReport::new(suite),
                        },
                        _ => match traces.get(&(p, "ir".to_string())) {
                            Some(ir) => verify::check_dressed_records(ir),
                            None => SuiteReport::new(suite),
                        },
                    };
                    rep.merge(sub);
                }
                if suite == "rates" || suite == "dressed" {
                    for t in traces.values().filter(|t| t.kind == SweepKind::Joint) {
                        let sub = if suite == "rates" {
                            verify::check_rate_envelopes(t, beta, gamma, kappa, &vcfg)
                        } else {
                            verify::check_dressed_records(t)
                        };
                        rep.merge(sub);
                    }
                }
                rep
            }
            "negative" => {
                let mut rep = SuiteReport::new(suite);
                for &p in &points {
                    let Some(t) = combined_trace(&traces, p) else { continue };
                    if t.g == 0.0 {
                        continue;
                    }
                    rep.push_fit(verify::negative_rate_control(&t, beta, &vcfg));
                }
                let prs = recomputed_states(cfg, &mut recomputed)?;
                for pr in prs.iter().filter(|pr| pr.g != 0.0) {
                    let ctx = context_for(cfg, pr.p, pr.g)?;
                    if let Some(r) = pr.traces.first().and_then(|t| t.records.last()) {
                        let mut sub = verify::check_apriori(&ctx, r, &consts, consts.c_a / 2.0, &vcfg)?;
                        sub.checks.iter_mut().for_each(|c| c.name = format!("halved c_a {}", c.name));
                        rep.merge(sub);
                    }
                }
                rep
            }
            "apriori" | "froehlich" | "gradient" | "contour" => {
                let mut rep = SuiteReport::new(suite);
                let prs = recomputed_states(cfg, &mut recomputed)?;
                for pr in prs {
                    let ctx = context_for(cfg, pr.p, pr.g)?;
                    let mut t = pr.traces.first().cloned().unwrap_or_else(|| SweepTrace {
                        kind: SweepKind::Uv,
                        p: pr.p,
                        g: pr.g,
                        records: Vec::new(),
                        abort: None,
                        passed: true,
                    });
                    if let Some(ir) = pr.traces.iter().find(|t| t.kind == SweepKind::Ir) {
                        t.records.extend(ir.records.iter().skip(1).cloned());
                    }
                    let sub = match suite.as_str() {
                        "apriori" => {
                            let mut s = SuiteReport::new(suite);
                            for r in &t.records {
                                s.merge(verify::check_apriori(&ctx, r, &consts, consts.c_a, &vcfg)?);
                            }
                            s
                        }
                        "froehlich" => match t.records.last() {
                            Some(r) => verify::check_froehlich(&ctx, r, &vcfg)?,
                            None => SuiteReport::new(suite),
                        },
                        "gradient" => {
                            let recs: Vec<&GroundStateRecord> = t.records.iter().filter(|r| r.stage != Stage::Base).collect();
                            verify::check_gradient(&ctx, &recs, &vcfg)?
                        }
                        _ => verify::check_contour_projector(&ctx, &t, &vcfg)?,
                    };
                    rep.merge(sub);
                }
                rep
            }
            "identities" => {
                let mut rep = SuiteReport::new(suite);
                for &g in &cfg.g_list {
                    let params = cfg.params_at(cfg.p_grid[0], g);
                    let sched = schedule::CutoffSchedule::new(&params, &cfg.schedule);
                    let grid = crate::fock::build_mode_grid(&sched, 1, 1, 1, cfg.sweep.grid.angular)?;
                    let active = grid.active(1, 1)?;
                    let cut = crate::hamiltonian::Cutoffs {
                        p: params.p,
                        g,
                        kappa: params.kappa,
                        beta: params.beta,
                        uv_n: 1,
                        ir_m: 1,
                    };
                    rep.merge(verify::check_dressing_identities(&grid, &active, &cut, &cfg.identity_n_occ, &cfg.sweep.solver)?);
                }
                rep
            }
            _ => unreachable!(),
        };
        report.push(rep);
    }
    fs::write(art.dir.join("verification.json"), serde_json::to_vec_pretty(&report)?)?;
    fs::write(art.dir.join("verification.csv"), report.to_csv())?;
    Ok(report)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlanReport {
    pub config_hash: String,
    pub constraints: Vec<schedule::ConstraintReport>,
    pub table: schedule::ScheduleTable,
    pub admissible: bool,
}

/// Validates every grid point and tabulates the schedule.
pub fn cmd_plan(cfg: &ExperimentConfig) -> Result<PlanReport> {
    let mut constraints = Vec::new();
    let mut admissible = true;
    for (p, g) in cfg.points() {
        let r = schedule::validate_params(&cfg.params_at(p, g), &cfg.schedule)?;
        admissible &= r.admissible();
        constraints.push(r);
    }
    let sched = schedule::CutoffSchedule::new(&cfg.model, &cfg.schedule);
    let (n, m) = cfg.grid_extent();
    Ok(PlanReport { config_hash: cfg.hash(), constraints, table: sched.table(n, m), admissible })
}

/// Writes the plot-data CSVs for an artifact and returns their paths.
pub fn cmd_report(art: &Artifact) -> Result<Vec<PathBuf>> {
    let cfg = &art.config;
    let hash = cfg.hash();
    let traces = traces_from_lines(&art.lines);
    let sched = schedule::CutoffSchedule::new(&cfg.model, &cfg.schedule);
    let mut written = Vec::new();
    let mut emit = |name: &str, body: String| -> Result<()> {
        let p = art.dir.join(name);
        fs::write(&p, body)?;
        written.push(p);
        Ok(())
    };

    let mut curve = String::from("g,P_x,P_y,P_z,P_norm,n,m,E_prime,E,config_hash\n");
    let mut gaps = String::from("point,g,n,gap,xi_n,config_hash\n");
    let mut cat = String::from("point,g,m,vacuum_overlap,config_hash\n");
    let mut phi = String::from("point,sweep,g,m,phi_increment,config_hash\n");
    let mut rates = String::from("point,law,prefactor,max_log_dev,band,slope_measured,slope_envelope,passed,config_hash\n");
    let mut finals: Vec<&GroundStateRecord> = Vec::new();
    for ((point, kind), t) in &traces {
        match kind.as_str() {
            "uv" => {
                for r in t.records.iter().filter(|r| r.stage == Stage::Uv) {
                    gaps.push_str(&format!("{point},{:e},{},{},{:e},{hash}\n", r.g, r.n, fmt_opt(r.gap), sched.xi(r.n)));
                }
                if !traces.contains_key(&(*point, "ir".to_string())) {
                    finals.extend(t.records.last());
                }
            }
            "ir" => {
                for r in &t.records {
                    cat.push_str(&format!("{point},{:e},{},{:e},{hash}\n", r.g, r.m, r.vacuum_overlap));
                    if let Some(d) = &r.dressing {
                        phi.push_str(&format!("{point},ir,{:e},{},{:e},{hash}\n", r.g, r.m, d.diff_phi_prev));
                    }
                }
                finals.extend(t.records.last());
            }
            _ => {
                for r in &t.records {
                    if let Some(v) = r.phi_diff_joint {
                        phi.push_str(&format!("{point},joint,{:e},{},{:e},{hash}\n", r.g, r.m, v));
                    }
                }
            }
        }
    }
    for &p in traces.keys().map(|(p, _)| p).collect::<std::collections::BTreeSet<_>>() {
        if let Some(t) = combined_trace(&traces, p) {
            for f in verify::check_rate_envelopes(&t, cfg.model.beta, cfg.model.gamma, cfg.model.kappa, &cfg.verify).fits {
                rates.push_str(&format!(
                    "{p},{},{:e},{:e},{},{:e},{:e},{},{hash}\n",
                    f.law, f.prefactor, f.max_log_dev, f.band, f.slope_measured, f.slope_envelope, f.passed
                ));
            }
        }
    }
    finals.sort_by(|a, b| a.g.total_cmp(&b.g).then(schedule::norm3(&a.p).total_cmp(&schedule::norm3(&b.p))));
    for r in finals {
        curve.push_str(&format!(
            "{:e},{:e},{:e},{:e},{:e},{},{},{:e},{:e},{hash}\n",
            r.g, r.p[0], r.p[1], r.p[2], schedule::norm3(&r.p), r.n, r.m, r.e_prime, r.e_bare()
        ));
    }
    emit("mass_shell_curve.csv", curve)?;
    emit("gap_vs_n.csv", gaps)?;
    emit("infrared_overlap.csv", cat)?;
    emit("phi_increments.csv", phi)?;
    emit("rate_fits.csv", rates)?;
    Ok(written)
}

#[derive(Clone, Debug, PartialEq)]
pub enum NmvPayload {
    Real(Vec<f64>),
    Complex(Vec<faer::c64>),
}

impl NmvPayload {
    pub fn len(&self) -> usize {
        match self {
            NmvPayload::Real(v) => v.len(),
            NmvPayload::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn encode_nmv(v: &NmvPayload) -> Vec<u8> {
    let mut out = Vec::with_capacity(17 + 16 * v.len());
    out.extend_from_slice(&NMV_MAGIC);
    out.extend_from_slice(&NMV_VERSION.to_le_bytes());
    out.extend_from_slice(&(v.len() as u64).to_le_bytes());
    match v {
        NmvPayload::Real(x) => {
            out.push(0);
            x.iter().for_each(|a| out.extend_from_slice(&a.to_le_bytes()));
        }
        NmvPayload::Complex(x) => {
            out.push(1);
            x.iter().for_each(|a| {
                out.extend_from_slice(&a.re.to_le_bytes());
                out.extend_from_slice(&a.im.to_le_bytes());
            });
        }
    }
    out
}

pub fn decode_nmv(bytes: &[u8]) -> Result<NmvPayload> {
    let bad = |m: &str| LabError::Input(format!("nmv: {m}"));
    if bytes.len() < 17 || bytes[..4] != NMV_MAGIC {
        return Err(bad("bad magic"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != NMV_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let dim = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let kind = bytes[16];
    let body = &bytes[17..];
    let f = |c: &[u8]| f64::from_le_bytes(c.try_into().unwrap());
    match kind {
        0 if body.len() == 8 * dim => Ok(NmvPayload::Real(body.chunks_exact(8).map(f).collect())),
        1 if body.len() == 16 * dim => Ok(NmvPayload::Complex(
            body.chunks_exact(16).map(|c| faer::c64::new(f(&c[..8]), f(&c[8..]))).collect(),
        )),
        0 | 1 => Err(bad("payload length does not match dimension")),
        k => Err(bad(&format!("unknown scalar kind {k}"))),
    }
}

pub fn write_nmv(path: &Path, v: &NmvPayload) -> Result<()> {
    fs::write(path, encode_nmv(v))?;
    Ok(())
}

pub fn read_nmv(path: &Path) -> Result<NmvPayload> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_nmv(&bytes)
}
