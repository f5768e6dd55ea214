//! The multiscale induction as an algorithm: UV sweep, IR sweep, the joint
//! sweep with n(m) = alpha' m, and per-step diagnostics.

use std::sync::Arc;

use faer::c64;
use serde::{Deserialize, Serialize};

use crate::dressing::{self, DressedDiag, DressedState, StepInput};
use crate::error::{LabError, Result};
use crate::fock::{self, AngularSet, FockBasis, ModeGrid};
use crate::hamiltonian::{self, Cutoffs, GrossData};
use crate::linalg::{self, LinearOperator};
use crate::schedule::{self, Contour, CutoffSchedule, ModelParams, ScheduleConfig};
use crate::spectral::{self, Method, NeumannDiagnostic, SolverConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub radial_per_slice: usize,
    pub angular: AngularSet,
    /// Maximal total boson occupation N_max.
    pub n_occ: usize,
    pub basis_limit: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            radial_per_slice: 1,
            angular: AngularSet::Axes6,
            n_occ: 2,
            basis_limit: fock::BASIS_HARD_LIMIT,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSettings {
    pub grid: GridSpec,
    pub solver: SolverConfig,
    pub norm_floor: f64,
    /// Largest dimension for the dense Neumann and contraction diagnostics.
    pub neumann_max_dim: usize,
    /// Contour nodes sampled by the diagnostics.
    pub diagnostic_nodes: usize,
    pub tol: f64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            solver: SolverConfig::default(),
            norm_floor: 0.1,
            neumann_max_dim: 600,
            diagnostic_nodes: 8,
            tol: 1e-9,
        }
    }
}

/// Everything a sweep needs: parameters, schedule and the mode grid.
#[derive(Clone, Debug)]
pub struct Context {
    pub params: ModelParams,
    pub schedule_cfg: ScheduleConfig,
    pub schedule: CutoffSchedule,
    pub settings: SweepSettings,
    pub grid: ModeGrid,
}

impl Context {
    pub fn new(
        params: &ModelParams,
        schedule_cfg: &ScheduleConfig,
        settings: &SweepSettings,
        n_uv: usize,
        m_ir: usize,
    ) -> Result<Self> {
        params.check_finite()?;
        let schedule = CutoffSchedule::new(params, schedule_cfg);
        let grid = fock::build_mode_grid(
            &schedule,
            n_uv,
            m_ir,
            settings.grid.radial_per_slice,
            settings.grid.angular,
        )?;
        Ok(Self {
            params: params.clone(),
            schedule_cfg: schedule_cfg.clone(),
            schedule,
            settings: settings.clone(),
            grid,
        })
    }

    pub fn basis(&self, n: usize, m: usize) -> Result<Arc<FockBasis>> {
        let active = self.grid.active(n, m)?;
        Ok(Arc::new(fock::enumerate_basis_capped(
            &self.grid,
            &active,
            self.settings.grid.n_occ,
            None,
            self.settings.grid.basis_limit,
        )?))
    }

    pub fn cutoffs(&self, p: [f64; 3], g: f64, n: usize, m: usize) -> Cutoffs {
        Cutoffs { p, g, kappa: self.params.kappa, beta: self.params.beta, uv_n: n, ir_m: m }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Base,
    Uv,
    Ir,
    JointUv,
    JointIr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Uv,
    Ir,
    Joint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
}

impl Check {
    fn le(name: &str, value: f64, bound: f64, tol: f64) -> Self {
        Self { name: name.into(), value, bound, passed: value <= bound + tol }
    }

    fn ge(name: &str, value: f64, bound: f64, tol: f64) -> Self {
        Self { name: name.into(), value, bound, passed: value + tol >= bound }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroundStateRecord {
    pub stage: Stage,
    pub n: usize,
    pub m: usize,
    #[serde(rename = "P")]
    pub p: [f64; 3],
    pub g: f64,
    pub dim: usize,
    pub e_prime: f64,
    pub vself: f64,
    pub grad_e: [f64; 3],
    pub gap: Option<f64>,
    pub gap_bound: Option<f64>,
    pub norm: f64,
    pub vacuum_overlap: f64,
    pub diff_prev_uv: Option<f64>,
    pub diff_prev_ir: Option<f64>,
    pub energy_shift: Option<f64>,
    pub neumann_value: Option<f64>,
    pub projector_defect: Option<f64>,
    pub contour: Option<Contour>,
    pub method: Method,
    pub residual: f64,
    pub dressing: Option<DressedDiag>,
    pub phi_diff_joint: Option<f64>,
    pub eta_diff_uv: Option<f64>,
    pub joint_envelope: Option<f64>,
    pub checks: Vec<Check>,
    #[serde(skip)]
    pub state: Vec<f64>,
    #[serde(skip)]
    pub basis: Option<Arc<FockBasis>>,
}

impl GroundStateRecord {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed) && self.dressing.as_ref().is_none_or(|d| d.passed)
    }

    /// E = E' + V_self.
    pub fn e_bare(&self) -> f64 {
        self.e_prime + self.vself
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepTrace {
    pub kind: SweepKind,
    #[serde(rename = "P")]
    pub p: [f64; 3],
    pub g: f64,
    pub records: Vec<GroundStateRecord>,
    pub abort: Option<String>,
    pub passed: bool,
}

impl SweepTrace {
    fn new(kind: SweepKind, p: [f64; 3], g: f64) -> Self {
        Self { kind, p, g, records: Vec::new(), abort: None, passed: true }
    }

    fn finish(mut self, res: Result<()>) -> Self {
        if let Err(e) = res {
            self.abort = Some(e.to_string());
        }
        self.passed = self.abort.is_none() && self.records.iter().all(|r| r.passed());
        self
    }

    pub fn last(&self) -> Option<&GroundStateRecord> {
        self.records.last()
    }

    pub fn stage(&self, stage: Stage) -> impl Iterator<Item = &GroundStateRecord> {
        self.records.iter().filter(move |r| r.stage == stage)
    }
}

/// grad E' = P - <Pf + B + B*>_psi with psi normalized.
pub fn grad_e(basis: &FockBasis, p: [f64; 3], g: f64, uv_n: usize, psi: &[f64]) -> Result<[f64; 3]> {
    let n2 = linalg::dot(psi, psi);
    if !(n2 > 0.0) {
        return Err(LabError::ZeroState("grad_e"));
    }
    let ff = fock::free_field_ops(basis);
    let uv = |s: fock::ShellLabel| s.is_uv() && s.within(uv_n, 0);
    let mut out = [0.0; 3];
    for a in 0..3 {
        let b = fock::lowering_op(basis, |md| md.k[a] * hamiltonian::gross_beta(md, g), uv);
        let eb = linalg::dot(psi, &b.apply(psi));
        out[a] = p[a] - (ff.pf[a].expectation(psi) + 2.0 * eb) / n2;
    }
    Ok(out)
}

/// Psi = e^{-T} Psi'.
pub fn gross_backtransform(state: &[f64], gross: &GrossData) -> Vec<f64> {
    if gross.t.nnz() == 0 {
        return state.to_vec();
    }
    gross.t.expm_apply(state, -1.0)
}

fn p2(p: [f64; 3]) -> f64 {
    0.5 * (p[0] * p[0] + p[1] * p[1] + p[2] * p[2])
}

struct StepSpec<'a> {
    stage: Stage,
    n: usize,
    m: usize,
    contour: Contour,
    /// Cutoffs of the previous operator, for the Neumann diagnostic.
    prev_cutoffs: (usize, usize),
    gap_bound: f64,
    prev: &'a GroundStateRecord,
}

fn base_record(ctx: &Context, p: [f64; 3], g: f64) -> Result<GroundStateRecord> {
    let basis = ctx.basis(0, 0)?;
    let h = hamiltonian::assemble_gross(&basis, &ctx.cutoffs(p, g, 0, 0))?;
    let psi = basis.vacuum();
    let e = h.op.expectation(&psi);
    let grad = grad_e(&basis, p, g, 0, &psi)?;
    let mut checks = vec![Check::le("window_upper", e, p2(p), ctx.settings.tol)];
    checks.push(Check::le("grad_norm", schedule::norm3(&grad), 0.75, 0.0));
    Ok(GroundStateRecord {
        stage: Stage::Base,
        n: 0,
        m: 0,
        p,
        g,
        dim: basis.dim(),
        e_prime: e,
        vself: h.vself,
        grad_e: grad,
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
        method: Method::Dense,
        residual: 0.0,
        dressing: None,
        phi_diff_joint: None,
        eta_diff_uv: None,
        joint_envelope: None,
        checks,
        state: psi,
        basis: Some(basis),
    })
}

fn neumann_max(
    ctx: &Context,
    basis: &FockBasis,
    p: [f64; 3],
    g: f64,
    spec: &StepSpec<'_>,
    slice: &LinearOperator,
) -> Result<Option<f64>> {
    if basis.dim() > ctx.settings.neumann_max_dim {
        return Ok(None);
    }
    let (pn, pm) = spec.prev_cutoffs;
    let h_prev = hamiltonian::assemble_gross(basis, &ctx.cutoffs(p, g, pn, pm))?;
    let diag = NeumannDiagnostic::new(&h_prev.op, slice)?;
    let nodes = spec.contour.nodes();
    let stride = (nodes.len() / ctx.settings.diagnostic_nodes.max(1)).max(1);
    let mut worst = 0.0f64;
    for z in nodes.iter().step_by(stride) {
        worst = worst.max(diag.value(*z)?.value);
    }
    Ok(Some(worst))
}

fn run_step(ctx: &Context, p: [f64; 3], g: f64, spec: StepSpec<'_>) -> Result<(GroundStateRecord, hamiltonian::FiberHamiltonian)> {
    let basis = ctx.basis(spec.n, spec.m)?;
    let h = hamiltonian::assemble_gross(&basis, &ctx.cutoffs(p, g, spec.n, spec.m))?;
    let prev_basis = spec.prev.basis.as_ref().ok_or(LabError::ZeroState("previous record"))?;
    let psi_prev = fock::transfer(prev_basis, &basis, &spec.prev.state);
    let sol = spectral::ground_state(&h.op, &ctx.settings.solver)?;
    let psi = spectral::contour_project(&h.op, &spec.contour, &psi_prev, &ctx.settings.solver)?;
    let norm = linalg::norm2(&psi);
    let label = format!("{:?} step n={} m={}", spec.stage, spec.n, spec.m);
    if norm < ctx.settings.norm_floor {
        return Err(LabError::NormFloor { step: label, norm, floor: ctx.settings.norm_floor });
    }
    let grad = grad_e(&basis, p, g, spec.n, &psi)?;
    let tol = ctx.settings.tol;
    let diff = linalg::norm2(&linalg::sub(&psi, &psi_prev));
    let projector_defect = (sol.method == Method::Dense).then(|| {
        let q = spectral::eigenprojector_apply(&sol.ground, &psi_prev);
        linalg::norm2(&linalg::sub(&psi, &q))
    });
    let slice = match spec.stage {
        Stage::Ir | Stage::JointIr => hamiltonian::ir_slice_op(&basis, g, spec.m)?,
        _ => hamiltonian::uv_slice_op(&basis, p, g, spec.n)?,
    };
    let neumann_value = neumann_max(ctx, &basis, p, g, &spec, &slice)?;
    let e = sol.e0;
    let mut checks = vec![
        Check::ge("gap", sol.gap, spec.gap_bound, 0.0),
        Check::le("energy_monotone", e, spec.prev.e_prime, tol),
        Check::le("window_upper", e, p2(p), tol),
        Check::le("norm_nonexpanding", norm, spec.prev.norm, 1e-12),
        Check::le("grad_norm", schedule::norm3(&grad), 0.75, 0.0),
        Check::le("contour_encloses", (e - spec.contour.effective_center()).abs(), spec.contour.radius, 0.0),
    ];
    if matches!(spec.stage, Stage::Uv) {
        checks.push(Check::ge("gap_floor", sol.gap, ctx.params.kappa / 16.0, 0.0));
    }
    if let Some(v) = neumann_value {
        checks.push(Check { name: "neumann".into(), value: v, bound: 1.0, passed: v < 1.0 });
    }
    let is_ir = matches!(spec.stage, Stage::Ir | Stage::JointIr);
    let rec = GroundStateRecord {
        stage: spec.stage,
        n: spec.n,
        m: spec.m,
        p,
        g,
        dim: basis.dim(),
        e_prime: e,
        vself: h.vself,
        grad_e: grad,
        gap: Some(sol.gap),
        gap_bound: Some(spec.gap_bound),
        norm,
        vacuum_overlap: psi[0].abs() / norm,
        diff_prev_uv: (!is_ir).then_some(diff),
        diff_prev_ir: is_ir.then_some(diff),
        energy_shift: Some(spec.prev.e_prime - e),
        neumann_value,
        projector_defect,
        contour: Some(spec.contour),
        method: sol.method,
        residual: sol.residual,
        dressing: None,
        phi_diff_joint: None,
        eta_diff_uv: None,
        joint_envelope: None,
        checks,
        state: psi,
        basis: Some(basis),
    };
    Ok((rec, h))
}

/// UV induction at m = 0, starting from the vacuum.
pub fn uv_sweep(ctx: &Context, p: [f64; 3], g: f64, n_max: usize) -> SweepTrace {
    let mut trace = SweepTrace::new(SweepKind::Uv, p, g);
    let res = (|| -> Result<()> {
        trace.records.push(base_record(ctx, p, g)?);
        for n in 1..=n_max {
            let prev = trace.records.last().unwrap();
            let contour = ctx.schedule.contour_uv(n, prev.e_prime, ctx.schedule_cfg.n_quad)?;
            let spec = StepSpec {
                stage: Stage::Uv,
                n,
                m: 0,
                contour,
                prev_cutoffs: (n - 1, 0),
                gap_bound: ctx.schedule.xi(n),
                prev,
            };
            let (rec, _) = run_step(ctx, p, g, spec)?;
            trace.records.push(rec);
        }
        Ok(())
    })();
    trace.finish(res)
}

/// IR induction at fixed UV index from a finished UV record; with `dressed`
/// the phi chain is carried along and its diagnostics attached.
pub fn ir_sweep(ctx: &Context, uv_record: &GroundStateRecord, m_max: usize, dressed: bool) -> SweepTrace {
    let (p, g, n) = (uv_record.p, uv_record.g, uv_record.n);
    let mut trace = SweepTrace::new(SweepKind::Ir, p, g);
    let res = (|| -> Result<()> {
        trace.records.push(uv_record.clone());
        let mut link = if dressed { Some(initial_link(ctx, uv_record)?) } else { None };
        for m in 1..=m_max {
            let prev = trace.records.last().unwrap();
            let contour = ctx.schedule.contour_ir(m, prev.e_prime, ctx.schedule_cfg.n_quad)?;
            let spec = StepSpec {
                stage: Stage::Ir,
                n,
                m,
                contour: contour.clone(),
                prev_cutoffs: (n, m - 1),
                gap_bound: ctx.schedule.ir_gap_bound(m),
                prev,
            };
            let (mut rec, h) = run_step(ctx, p, g, spec)?;
            if let Some(prev_link) = link.take() {
                let (next, diag) = dressed_ir(ctx, &prev_link, &rec, &h, contour)?;
                rec.dressing = Some(diag);
                link = Some(next);
            }
            trace.records.push(rec);
        }
        Ok(())
    })();
    trace.finish(res)
}

fn initial_link(ctx: &Context, rec: &GroundStateRecord) -> Result<DressedState> {
    let basis = rec.basis.clone().ok_or(LabError::ZeroState("record basis"))?;
    let gross = hamiltonian::assemble_gross_data(&basis, rec.g, ctx.params.kappa, ctx.params.beta, rec.n)?;
    DressedState::initial(rec.n, basis, &rec.state, rec.grad_e, &gross)
}

fn dressed_ir(
    ctx: &Context,
    prev: &DressedState,
    rec: &GroundStateRecord,
    h: &hamiltonian::FiberHamiltonian,
    contour: Contour,
) -> Result<(DressedState, DressedDiag)> {
    let basis = rec.basis.clone().ok_or(LabError::ZeroState("record basis"))?;
    let gross = hamiltonian::assemble_gross_data(&basis, rec.g, ctx.params.kappa, ctx.params.beta, rec.n)?;
    let h_prev = if basis.dim() <= ctx.settings.neumann_max_dim {
        Some(hamiltonian::assemble_gross(&basis, &ctx.cutoffs(rec.p, rec.g, rec.n, rec.m - 1))?.op)
    } else {
        None
    };
    let input = StepInput {
        basis,
        h_prime: &h.op,
        gross: &gross,
        grad_e: rec.grad_e,
        p: rec.p,
        g: rec.g,
        gamma: ctx.params.gamma,
        contour,
        solver: &ctx.settings.solver,
        h_prev: h_prev.as_ref(),
        diagnostic_nodes: ctx.settings.diagnostic_nodes,
    };
    dressing::dressed_step(prev, &input)
}

/// m K^{3m+1} sqrt(n / (beta^n gamma^m)).
pub fn joint_envelope(m: usize, n: usize, k: f64, beta: f64, gamma: f64) -> f64 {
    m as f64 * k.powi(3 * m as i32 + 1) * (n as f64 / (beta.powi(n as i32) * gamma.powi(m as i32))).sqrt()
}

/// Joint removal of both cutoffs along n(m) = alpha' m: UV steps at fixed
/// IR depth m-1 up to n(m), then one IR step, with the dressed chain.
pub fn joint_sweep(ctx: &Context, p: [f64; 3], g: f64, m_max: usize) -> SweepTrace {
    let mut trace = SweepTrace::new(SweepKind::Joint, p, g);
    let alpha_p = ctx.schedule.alpha_prime;
    let res = (|| -> Result<()> {
        let base = base_record(ctx, p, g)?;
        let mut link = initial_link(ctx, &base)?;
        trace.records.push(base);
        let mut anchor_phi: (Arc<FockBasis>, Vec<f64>) = (link.basis.clone(), link.phi.clone());
        for m in 1..=m_max {
            let depth = m - 1;
            let n_from = ctx.schedule.joint_n(m - 1);
            let n_to = ctx.schedule.joint_n(m);
            for n in n_from + 1..=n_to {
                let prev = trace.records.last().unwrap();
                let (contour, bound) = if depth == 0 {
                    (ctx.schedule.contour_uv(n, prev.e_prime, ctx.schedule_cfg.n_quad)?, ctx.schedule.xi(n))
                } else {
                    (
                        Contour::new(prev.e_prime, ctx.schedule.ir_gap_bound(depth) / 2.0, 0.0, ctx.schedule_cfg.n_quad)?,
                        ctx.schedule.ir_gap_bound(depth),
                    )
                };
                let spec = StepSpec {
                    stage: Stage::JointUv,
                    n,
                    m: depth,
                    contour: contour.clone(),
                    prev_cutoffs: (n - 1, depth),
                    gap_bound: bound,
                    prev,
                };
                let (mut rec, h) = run_step(ctx, p, g, spec)?;
                let basis = rec.basis.clone().unwrap();
                let gross = hamiltonian::assemble_gross_data(&basis, g, ctx.params.kappa, ctx.params.beta, n)?;
                let next = if depth == 0 {
                    DressedState::initial(n, basis.clone(), &rec.state, rec.grad_e, &gross)?
                } else {
                    dressing::uv_extend(&link, basis.clone(), &h.op, &gross, rec.grad_e, p, g, &contour, &ctx.settings.solver)?
                };
                let eta_prev = fock::transfer(&link.basis, &basis, &link.eta);
                rec.eta_diff_uv = Some(linalg::norm2(&linalg::sub(&next.eta, &eta_prev)));
                link = next;
                trace.records.push(rec);
            }
            let prev = trace.records.last().unwrap();
            let contour = ctx.schedule.contour_ir(m, prev.e_prime, ctx.schedule_cfg.n_quad)?;
            let spec = StepSpec {
                stage: Stage::JointIr,
                n: n_to,
                m,
                contour: contour.clone(),
                prev_cutoffs: (n_to, m - 1),
                gap_bound: ctx.schedule.ir_gap_bound(m),
                prev,
            };
            let (mut rec, h) = run_step(ctx, p, g, spec)?;
            let (next, diag) = dressed_ir(ctx, &link, &rec, &h, contour)?;
            let basis = rec.basis.clone().unwrap();
            let anchor = fock::transfer(&anchor_phi.0, &basis, &anchor_phi.1);
            rec.phi_diff_joint = Some(linalg::norm2(&linalg::sub(&next.phi, &anchor)));
            rec.joint_envelope = Some(joint_envelope(m, n_to, ctx.schedule.k_rate, ctx.params.beta, ctx.params.gamma));
            rec.dressing = Some(diag);
            if alpha_p as u64 >= ctx.schedule.alpha_min {
                let env = rec.joint_envelope.unwrap();
                rec.checks.push(Check::le("joint_envelope", rec.phi_diff_joint.unwrap(), env, 0.0));
            }
            anchor_phi = (basis, next.phi.clone());
            link = next;
            trace.records.push(rec);
        }
        Ok(())
    })();
    trace.finish(res)
}

/// Ground-state energy at cutoffs (n, m) and momentum p on the given basis.
pub fn energy_at(ctx: &Context, basis: &FockBasis, p: [f64; 3], g: f64, n: usize, m: usize) -> Result<f64> {
    let h = hamiltonian::assemble_gross(basis, &ctx.cutoffs(p, g, n, m))?;
    Ok(spectral::ground_state(&h.op, &ctx.settings.solver)?.e0)
}

/// Hellmann-Feynman gradient from the exact ground vector.
pub fn grad_e_exact(ctx: &Context, basis: &FockBasis, p: [f64; 3], g: f64, n: usize, m: usize) -> Result<[f64; 3]> {
    let h = hamiltonian::assemble_gross(basis, &ctx.cutoffs(p, g, n, m))?;
    let sol = spectral::ground_state(&h.op, &ctx.settings.solver)?;
    grad_e(basis, p, g, n, &sol.ground)
}

/// Resolvent distance of the contour nodes to the spectrum, dense path.
pub fn contour_clearance(op: &LinearOperator, contour: &Contour) -> Result<f64> {
    let (vals, _) = spectral::dense_eigen(op)?;
    let mut best = f64::INFINITY;
    for z in contour.nodes() {
        for &l in &vals {
            best = best.min((c64::new(l, 0.0) - z).norm());
        }
    }
    Ok(best)
}
