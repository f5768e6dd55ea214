//! Invariant suites that confront computed records with the checkable
//! inequalities of the construction.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use faer::c64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dressing;
use crate::error::{LabError, Result};
use crate::fock::{self, FockBasis, ModeGrid};
use crate::hamiltonian::{self, Cutoffs};
use crate::linalg::{self, LinearOperator};
use crate::multiscale::{self, Context, GroundStateRecord, Stage, SweepTrace};
use crate::quad;
use crate::spectral::{self, SolverConfig};

/// Gradient bound C_grad.
pub const GRAD_BOUND: f64 = 0.75;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    /// The inequality or identity being confronted.
    pub anchor: String,
    pub value: f64,
    pub bound: f64,
    pub tol: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<serde_json::Value>,
}

impl CheckResult {
    pub fn le(name: impl Into<String>, anchor: &str, value: f64, bound: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            anchor: anchor.into(),
            value,
            bound,
            tol,
            passed: value <= bound + tol,
            detail: None,
        }
    }

    pub fn ge(name: impl Into<String>, anchor: &str, value: f64, bound: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            anchor: anchor.into(),
            value,
            bound,
            tol,
            passed: value + tol >= bound,
            detail: None,
        }
    }

    pub fn with_detail(mut self, d: serde_json::Value) -> Self {
        self.detail = Some(d);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub law: String,
    pub anchor: String,
    /// (index, measured, envelope shape) per point used in the fit.
    pub points: Vec<(usize, f64, f64)>,
    pub prefactor: f64,
    pub max_log_dev: f64,
    pub band: f64,
    /// Least-squares slopes of ln(measured) and ln(envelope) against the index.
    pub slope_measured: f64,
    pub slope_envelope: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<CheckResult>,
    pub fits: Vec<RateFit>,
    pub warnings: Vec<String>,
    pub passed: bool,
}

impl SuiteReport {
    pub fn new(suite: &str) -> Self {
        Self { suite: suite.into(), passed: true, ..Default::default() }
    }

    pub fn push(&mut self, c: CheckResult) {
        self.passed &= c.passed;
        self.checks.push(c);
    }

    pub fn push_fit(&mut self, f: RateFit) {
        let mut c = CheckResult::le(
            format!("fit:{}", f.law),
            &f.anchor,
            f.max_log_dev,
            (1.0 + f.band).ln(),
            0.0,
        );
        c.passed &= f.passed;
        self.push(c);
        self.fits.push(f);
    }

    pub fn merge(&mut self, other: SuiteReport) {
        self.passed &= other.passed;
        self.checks.extend(other.checks);
        self.fits.extend(other.fits);
        self.warnings.extend(other.warnings);
    }

    pub fn failures(&self) -> Vec<&CheckResult> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub config_hash: String,
    pub constants: Option<AppendixConstants>,
    pub suites: Vec<SuiteReport>,
    pub passed: bool,
}

impl VerificationReport {
    pub fn push(&mut self, s: SuiteReport) {
        self.suites.push(s);
        self.passed = self.suites.iter().all(|s| s.passed);
    }

    /// Flat rows (suite, check, value, bound, pass).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("suite,check,value,bound,tol,pass\n");
        for s in &self.suites {
            for c in &s.checks {
                out.push_str(&format!(
                    "{},{},{:e},{:e},{:e},{}\n",
                    s.suite,
                    c.name.replace(',', ";"),
                    c.value,
                    c.bound,
                    c.tol,
                    c.passed
                ));
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppendixConstants {
    pub kappa: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c_a: f64,
    pub c_b: f64,
    /// Radius beyond which the tails were bounded analytically.
    pub tail_radius: f64,
    pub tail_c1_quadrature: f64,
    pub tail_c1_bound: f64,
    pub tail_c2_quadrature: f64,
    pub tail_c2_bound: f64,
}

fn rho_sq(r: f64) -> f64 {
    let rho = fock::rho(r);
    rho * rho
}

/// Radial integrand of c1^2: 4 pi r^2 |k rho / (k^2/2 + |k|)|^2 / |k|^{1/2}.
pub fn c1_integrand(r: f64) -> f64 {
    let d = 0.5 * r * r + r;
    4.0 * PI * r * r * r * r * rho_sq(r) / (d * d) / r.sqrt()
}

/// Radial integrand of c2^2: as c1 with |k|^{-1} in place of |k|^{-1/2}.
pub fn c2_integrand(r: f64) -> f64 {
    let d = 0.5 * r * r + r;
    4.0 * PI * r * r * r * r * rho_sq(r) / (d * d) / r
}

/// Radial integrand of c3^2: 4 pi r^2 rho^2 / |k|.
pub fn c3_integrand(r: f64) -> f64 {
    4.0 * PI * r * r * rho_sq(r) / r
}

/// c1, c2 over [kappa, inf), c3 over [0, kappa), and the assembled
/// c_a = c1^2 (1 + 1/kappa)/2 + c2^2 + 2 sqrt2 c2 + c3, c_b = 3 c1^2/2 + c3.
pub fn appendix_constants(kappa: f64, tol: f64) -> Result<AppendixConstants> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(LabError::Domain(format!("kappa must be positive, got {kappa}")));
    }
    let c1sq = quad::integrate_to_infinity(c1_integrand, kappa, tol)?;
    let c2sq = quad::integrate_to_infinity(c2_integrand, kappa, tol)?;
    let c3sq = quad::integrate(c3_integrand, 0.0, kappa, tol)?;
    let (c1, c2, c3) = (c1sq.sqrt(), c2sq.sqrt(), c3sq.sqrt());
    let r = 1e3 * kappa.max(1.0);
    // c1 integrand <= (2pi)^{-2} 4 r^{-3/2}, c2 integrand <= (2pi)^{-2} 4 r^{-2}.
    let pref = (2.0 * PI).powi(-2);
    Ok(AppendixConstants {
        kappa,
        c1,
        c2,
        c3,
        c_a: c1sq * (1.0 + 1.0 / kappa) / 2.0 + c2sq + 2.0 * 2f64.sqrt() * c2 + c3,
        c_b: 1.5 * c1sq + c3,
        tail_radius: r,
        tail_c1_quadrature: quad::integrate_to_infinity(c1_integrand, r, tol)?,
        tail_c1_bound: 8.0 * pref / r.sqrt(),
        tail_c2_quadrature: quad::integrate_to_infinity(c2_integrand, r, tol)?,
        tail_c2_bound: 4.0 * pref / r,
    })
}

/// Closed forms: c2^2 = 2 (2pi)^{-2} / (kappa/2 + 1), c3^2 = kappa / (4 pi^2).
pub fn c2_c3_closed(kappa: f64) -> (f64, f64) {
    let pref = (2.0 * PI).powi(-2);
    ((2.0 * pref / (0.5 * kappa + 1.0)).sqrt(), (kappa / (4.0 * PI * PI)).sqrt())
}

/// Least-squares prefactor of measured ~ c * envelope in log space and the
/// widest log deviation from the fit; points with zero measurement are dropped.
pub fn fit_rate(law: &str, anchor: &str, points: &[(usize, f64, f64)], band: f64) -> RateFit {
    let used: Vec<(usize, f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(_, m, e)| m > 0.0 && e > 0.0 && m.is_finite() && e.is_finite())
        .collect();
    if used.is_empty() {
        return RateFit {
            law: law.into(),
            anchor: anchor.into(),
            points: used,
            prefactor: 0.0,
            max_log_dev: 0.0,
            band,
            slope_measured: 0.0,
            slope_envelope: 0.0,
            passed: true,
        };
    }
    let logs: Vec<f64> = used.iter().map(|&(_, m, e)| (m / e).ln()).collect();
    let lc = logs.iter().sum::<f64>() / logs.len() as f64;
    let dev = logs.iter().map(|l| (l - lc).abs()).fold(0.0, f64::max);
    let slope = |f: &dyn Fn(&(usize, f64, f64)) -> f64| {
        if used.len() < 2 {
            return 0.0;
        }
        let xs: Vec<f64> = used.iter().map(|p| p.0 as f64).collect();
        let ys: Vec<f64> = used.iter().map(f).collect();
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        num / den
    };
    RateFit {
        law: law.into(),
        anchor: anchor.into(),
        prefactor: lc.exp(),
        max_log_dev: dev,
        band,
        slope_measured: slope(&|p| p.1.ln()),
        slope_envelope: slope(&|p| p.2.ln()),
        passed: dev <= (1.0 + band).ln(),
        points: used,
    }
}

/// Tolerances and knobs shared by the suites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub energy_tol: f64,
    pub lipschitz_tol: f64,
    pub froehlich_rel_tol: f64,
    pub rate_band: f64,
    pub min_rate_points: usize,
    pub fd_step: f64,
    pub fd_rel_tol: f64,
    pub contour_tol: f64,
    pub contour_vectors: usize,
    pub random_states: usize,
    pub quad_tol: f64,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            energy_tol: 1e-9,
            lipschitz_tol: 1e-9,
            froehlich_rel_tol: 1e-6,
            rate_band: 0.5,
            min_rate_points: 4,
            fd_step: 1e-4,
            fd_rel_tol: 1e-4,
            contour_tol: 1e-8,
            contour_vectors: 50,
            random_states: 20,
            quad_tol: 1e-12,
            seed: 7,
        }
    }
}

fn p2(p: [f64; 3]) -> f64 {
    0.5 * (p[0] * p[0] + p[1] * p[1] + p[2] * p[2])
}

fn key(r: &GroundStateRecord) -> (u64, usize, usize) {
    (r.g.to_bits(), r.n, r.m)
}

/// E_0 <= E_P for every record pair at identical (g, n, m).
pub fn check_gross(records: &[GroundStateRecord], cfg: &VerifyConfig) -> SuiteReport {
    let mut rep = SuiteReport::new("gross");
    let mut groups: BTreeMap<(u64, usize, usize), Vec<&GroundStateRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(key(r)).or_default().push(r);
    }
    for ((_, n, m), rs) in groups {
        let zero = rs.iter().find(|r| r.p == [0.0; 3]);
        let Some(zero) = zero else { continue };
        for r in &rs {
            rep.push(CheckResult::le(
                format!("E0<=EP g={} n={n} m={m} P={:?}", r.g, r.p),
                "E_0 <= E_P",
                zero.e_bare(),
                r.e_bare(),
                cfg.energy_tol,
            ));
        }
    }
    rep
}

/// -|g| c_b <= E' <= P^2/2 on every record.
pub fn check_energy_window(records: &[GroundStateRecord], c_b: f64, cfg: &VerifyConfig) -> SuiteReport {
    let mut rep = SuiteReport::new("window");
    for r in records {
        let tag = format!("g={} n={} m={} P={:?}", r.g, r.n, r.m, r.p);
        rep.push(CheckResult::le(format!("upper {tag}"), "E' <= P^2/2", r.e_prime, p2(r.p), cfg.energy_tol));
        rep.push(CheckResult::ge(format!("lower {tag}"), "E' >= -|g| c_b", r.e_prime, -r.g.abs() * c_b, cfg.energy_tol));
    }
    rep
}

/// E'_{P-k} - E'_P >= -(3/4)|k| for every pair at identical (g, n, m).
pub fn check_lipschitz(records: &[GroundStateRecord], cfg: &VerifyConfig) -> SuiteReport {
    let mut rep = SuiteReport::new("lipschitz");
    let mut groups: BTreeMap<(u64, usize, usize), Vec<&GroundStateRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(key(r)).or_default().push(r);
    }
    for rs in groups.values() {
        for a in rs {
            for b in rs {
                let k = [a.p[0] - b.p[0], a.p[1] - b.p[1], a.p[2] - b.p[2]];
                let kn = crate::schedule::norm3(&k);
                rep.push(CheckResult::ge(
                    format!("g={} n={} m={} P={:?} P-k={:?}", a.g, a.n, a.m, a.p, b.p),
                    "E'_{P-k} - E'_P >= -(3/4)|k|",
                    b.e_prime - a.e_prime,
                    -GRAD_BOUND * kn,
                    cfg.lipschitz_tol,
                ));
            }
        }
        for r in rs {
            rep.push(CheckResult::le(
                format!("|gradE| g={} n={} m={} P={:?}", r.g, r.n, r.m, r.p),
                "|grad E'| <= 3/4",
                crate::schedule::norm3(&r.grad_e),
                GRAD_BOUND,
                0.0,
            ));
        }
    }
    rep
}

/// Worst case of the free Lipschitz bound at g = 0 over unit directions:
/// min_k [(P-k)^2/2 - P^2/2 + (3/4)|k|] = min_s [s^2/2 - |P| s + (3/4) s] >= 0.
pub fn free_lipschitz_margin(p_norm: f64, k_norm: f64) -> f64 {
    0.5 * k_norm * k_norm - p_norm * k_norm + GRAD_BOUND * k_norm
}

/// Both sides of the a priori bound for one state.
pub fn apriori_sides(h0: &LinearOperator, hp: &LinearOperator, psi: &[f64], g: f64, c_a: f64, c_b: f64) -> (f64, f64) {
    let nsq = linalg::dot(psi, psi);
    let lhs = h0.expectation(psi);
    let rhs = (hp.expectation(psi) + g.abs() * c_b * nsq) / (1.0 - g.abs() * c_a);
    (lhs, rhs)
}

/// Largest value of <H0> - RHS over unit states: top eigenvalue of
/// H0 - (H' + |g| c_b) / (1 - |g| c_a).
pub fn apriori_worst(h0: &LinearOperator, hp: &LinearOperator, g: f64, c_a: f64, c_b: f64) -> Result<f64> {
    let s = 1.0 / (1.0 - g.abs() * c_a);
    let dim = h0.dim();
    let d = LinearOperator::sum(dim, &[(hp, s), (h0, -1.0), (&LinearOperator::identity(dim), s * g.abs() * c_b)]);
    let (vals, _) = spectral::dense_eigen(&d)?;
    Ok(-vals[0])
}

/// A priori bound on the record state, on seeded random states, and for the
/// worst state of the instance when it is small enough for dense algebra.
pub fn check_apriori(
    ctx: &Context,
    rec: &GroundStateRecord,
    consts: &AppendixConstants,
    c_a: f64,
    cfg: &VerifyConfig,
) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("apriori");
    let anchor = "<H0> <= (1-|g|c_a)^{-1} (<H'> + |g| c_b)";
    let g = rec.g;
    if g.abs() > 1.0f64.min(1.0 / c_a) {
        rep.warnings.push(format!("|g|={g} outside the admissible range for c_a={c_a}"));
        return Ok(rep);
    }
    let basis = rec.basis.clone().ok_or(LabError::ZeroState("record basis"))?;
    let c = ctx.cutoffs(rec.p, g, rec.n, rec.m);
    let h0 = hamiltonian::assemble_free(&basis, &c)?.op;
    let hp = hamiltonian::assemble_gross(&basis, &c)?.op;
    let tag = format!("n={} m={} g={}", rec.n, rec.m, g);
    let (l, r) = apriori_sides(&h0, &hp, &rec.state, g, c_a, consts.c_b);
    rep.push(CheckResult::le(format!("record {tag}"), anchor, l, r, 1e-12));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for i in 0..cfg.random_states {
        let v: Vec<f64> = (0..basis.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (l, r) = apriori_sides(&h0, &hp, &v, g, c_a, consts.c_b);
        rep.push(CheckResult::le(format!("random#{i} {tag}"), anchor, l, r, 1e-12 * r.abs()));
    }
    if basis.dim() <= ctx.settings.neumann_max_dim {
        let worst = apriori_worst(&h0, &hp, g, c_a, consts.c_b)?;
        rep.push(CheckResult::le(format!("worst state {tag}"), anchor, worst, 0.0, 1e-10));
    }
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeResidual {
    pub mode: usize,
    pub shell: String,
    pub omega: f64,
    pub residual: f64,
    pub norm_b_psi: f64,
    /// <b_i>/sqrt(w_i) divided by alpha_m(grad E, k_i) for IR modes.
    pub coherence_ratio: Option<f64>,
}

/// Pull-through identity on the occupation block <= N_max - 1:
/// (E' - w_i - H'_{P-k_i}) b_i Psi' = R_i Psi' with R_i = g sqrt(w_i) rho_i for
/// IR modes and R_i = c_i.(B + B* - (P - Pf)) for Gross-transformed UV modes.
pub fn froehlich_residuals(
    grid: &ModeGrid,
    basis: &FockBasis,
    cut: &Cutoffs,
    psi: &[f64],
    e_prime: f64,
    solver: &SolverConfig,
    warnings: &mut Vec<String>,
) -> Result<Vec<ModeResidual>> {
    if basis.n_max == 0 {
        return Ok(Vec::new());
    }
    let block = fock::enumerate_basis(grid, &basis.grid_index, basis.n_max - 1)?;
    let gross = hamiltonian::assemble_gross_data(basis, cut.g, cut.kappa, cut.beta, cut.uv_n)?;
    let ff = fock::free_field_ops(basis);
    let bb: [LinearOperator; 3] = [0, 1, 2].map(|a| gross.b_plus_bdag(a));
    let norm = linalg::norm2(psi);
    let grad = multiscale::grad_e(basis, cut.p, cut.g, cut.uv_n, psi)?;
    let mut out = Vec::new();
    for (i, md) in basis.modes.iter().enumerate() {
        if !md.shell.within(cut.uv_n, cut.ir_m) {
            continue;
        }
        let b = fock::annihilation(basis, i);
        let b_psi = fock::transfer(basis, &block, &b.apply(psi));
        let src_full: Vec<f64> = if md.shell.is_ir() {
            linalg::scale(psi, cut.g * md.w.sqrt() * md.rho())
        } else {
            let beta = hamiltonian::gross_beta(md, cut.g);
            let ci = [0, 1, 2].map(|a| md.w.sqrt() * md.k[a] * beta);
            let mut s = vec![0.0; psi.len()];
            for a in 0..3 {
                let y = bb[a].apply(psi);
                let pf = ff.pf[a].apply(psi);
                for t in 0..s.len() {
                    s[t] += ci[a] * (y[t] - (cut.p[a] * psi[t] - pf[t]));
                }
            }
            s
        };
        let src = fock::transfer(basis, &block, &src_full);
        let shifted = Cutoffs { p: [cut.p[0] - md.k[0], cut.p[1] - md.k[1], cut.p[2] - md.k[2]], ..*cut };
        let h = hamiltonian::assemble_gross(&block, &shifted)?.op;
        let z = e_prime - md.omega();
        let (vals, _) = spectral::dense_eigen(&h)?;
        if vals[0] - z <= 1e3 * f64::EPSILON * vals[0].abs().max(1.0) {
            warnings.push(format!("mode {i}: E'-omega={z} inside the spectrum of the shifted operator"));
            continue;
        }
        let srcc: Vec<c64> = src.iter().map(|&x| c64::new(-x, 0.0)).collect();
        let x = spectral::resolve(&h, c64::new(z, 0.0), &srcc, solver)?;
        let res: f64 = b_psi.iter().zip(&x).map(|(a, b)| (a - b.re).powi(2)).sum::<f64>().sqrt();
        let coherence_ratio = if md.shell.is_ir() && norm > 0.0 {
            let expect = linalg::dot(psi, &b.apply(psi)) / (norm * norm) / md.w.sqrt();
            let alpha = dressing::alpha_value(md, grad, cut.ir_m, cut.g);
            (alpha != 0.0).then(|| expect / alpha)
        } else {
            None
        };
        out.push(ModeResidual {
            mode: i,
            shell: md.shell.to_string(),
            omega: md.omega(),
            residual: res,
            norm_b_psi: linalg::norm2(&b_psi),
            coherence_ratio,
        });
    }
    Ok(out)
}

pub fn check_froehlich(ctx: &Context, rec: &GroundStateRecord, cfg: &VerifyConfig) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("froehlich");
    let basis = rec.basis.clone().ok_or(LabError::ZeroState("record basis"))?;
    let cut = ctx.cutoffs(rec.p, rec.g, rec.n, rec.m);
    let h = hamiltonian::assemble_gross(&basis, &cut)?;
    let e = spectral::ground_state(&h.op, &ctx.settings.solver)?.e0;
    let mut warnings = Vec::new();
    let modes = froehlich_residuals(&ctx.grid, &basis, &cut, &rec.state, e, &ctx.settings.solver, &mut warnings)?;
    let tol = cfg.froehlich_rel_tol * linalg::norm2(&rec.state);
    for m in &modes {
        rep.push(
            CheckResult::le(
                format!("mode {} {} n={} m={}", m.mode, m.shell, rec.n, rec.m),
                "b_i Psi' = (E' - w_i - H'_{P-k_i})^{-1} R_i Psi'",
                m.residual,
                tol,
                0.0,
            )
            .with_detail(serde_json::to_value(m)?),
        );
    }
    if let Some(soft) = modes
        .iter()
        .filter(|m| m.coherence_ratio.is_some())
        .min_by(|a, b| a.omega.total_cmp(&b.omega))
    {
        rep.warnings.push(format!(
            "coherence ratio <b>/alpha at the softest IR mode {}: {:.6}",
            soft.mode,
            soft.coherence_ratio.unwrap()
        ));
    }
    rep.warnings.extend(warnings);
    Ok(rep)
}

/// Envelope shapes of the monitored rate laws.
pub fn uv_diff_envelope(g: f64, beta: f64, n: usize) -> f64 {
    g.abs() * ((beta - 1.0) * n as f64 / beta.powi(n as i32)).sqrt()
}

pub fn uv_shift_envelope(g: f64, beta: f64, n: usize) -> f64 {
    g * g * (beta - 1.0) * n as f64 / beta.powi(n as i32)
}

pub fn ir_shift_envelope(g: f64, gamma: f64, m: usize) -> f64 {
    g * g * gamma.powi(m as i32 - 1)
}

/// Fitted-prefactor checks over a trace plus the explicit dressed bounds.
pub fn check_rate_envelopes(trace: &SweepTrace, beta: f64, gamma: f64, kappa: f64, cfg: &VerifyConfig) -> SuiteReport {
    let mut rep = SuiteReport::new("rates");
    let g = trace.g;
    let uv: Vec<&GroundStateRecord> = trace.records.iter().filter(|r| r.stage == Stage::Uv).collect();
    let ir: Vec<&GroundStateRecord> = trace.records.iter().filter(|r| r.stage == Stage::Ir).collect();
    let fit = |rep: &mut SuiteReport, law: &str, anchor: &str, pts: Vec<(usize, f64, f64)>| {
        if pts.len() + 1 < cfg.min_rate_points {
            rep.warnings.push(format!("{law}: {} points, fit skipped", pts.len()));
            return;
        }
        rep.push_fit(fit_rate(law, anchor, &pts, cfg.rate_band));
    };
    fit(
        &mut rep,
        "diff_uv",
        "|Psi'_n - Psi'_{n-1}| <= C|g| sqrt((beta-1) n / beta^n)",
        uv.iter().filter_map(|r| Some((r.n, r.diff_prev_uv?, uv_diff_envelope(g, beta, r.n)))).collect(),
    );
    fit(
        &mut rep,
        "energy_shift_uv",
        "|E'_n - E'_{n-1}| <= C g^2 (beta-1) n / beta^n",
        uv.iter().filter_map(|r| Some((r.n, r.energy_shift?.abs(), uv_shift_envelope(g, beta, r.n)))).collect(),
    );
    fit(
        &mut rep,
        "energy_shift_ir",
        "|E'_m - E'_{m-1}| <= C g^2 gamma^(m-1)",
        ir.iter().filter_map(|r| Some((r.m, r.energy_shift?.abs(), ir_shift_envelope(g, gamma, r.m)))).collect(),
    );
    let mut c_shift = Vec::new();
    for r in &ir {
        let Some(d) = &r.dressing else { continue };
        let m = d.m as f64;
        rep.push(CheckResult::le(
            format!("phi_tilde-phi_prev m={}", d.m),
            "|phi~_m - phi_{m-1}| <= gamma^(m/4)",
            d.diff_tilde_prev,
            gamma.powf(m / 4.0),
            0.0,
        ));
        rep.push(CheckResult::le(
            format!("phi-phi_tilde m={}", d.m),
            "|phi_m - phi~_m| <= m gamma^(m/4)",
            d.diff_phi_tilde,
            m * gamma.powf(m / 4.0),
            0.0,
        ));
        c_shift.push((d.m, d.c_shift.abs(), g * g * crate::schedule::tau(kappa, gamma, d.m - 1)));
    }
    if !c_shift.is_empty() {
        let f = fit_rate("c_tilde_shift", "|C~_{P,m} - C_{P,m-1}| <= c g^2 tau_{m-1}", &c_shift, cfg.rate_band);
        rep.warnings.push(format!(
            "c_tilde_shift prefactor {:.4e}, log deviation {:.3} (recorded)",
            f.prefactor, f.max_log_dev
        ));
        rep.fits.push(f);
    }
    let joint: Vec<(usize, f64, f64)> = trace
        .records
        .iter()
        .filter_map(|r| Some((r.m, r.phi_diff_joint?, r.joint_envelope?)))
        .collect();
    for &(m, v, env) in &joint {
        rep.push(CheckResult::le(
            format!("joint phi m={m}"),
            "|phi^{n(m)}_m - phi^{n(m-1)}_{m-1}| <= m K^(3m+1) sqrt(n/(beta^n gamma^m))",
            v,
            env,
            0.0,
        ));
    }
    let eta: Vec<(usize, f64, f64)> = trace
        .records
        .iter()
        .filter(|r| r.stage == Stage::JointUv && r.m > 0)
        .filter_map(|r| Some((r.n, r.eta_diff_uv?, uv_diff_envelope(g, beta, r.n))))
        .collect();
    if eta.len() >= 2 {
        let f = fit_rate("eta_uv", "|eta^n_j - eta^{n-1}_j| ~ C|g| sqrt((beta-1) n / beta^n)", &eta, cfg.rate_band);
        rep.warnings.push(format!("eta_uv prefactor {:.4e}, log deviation {:.3} (recorded)", f.prefactor, f.max_log_dev));
        rep.fits.push(f);
    }
    rep
}

/// The UV law with beta^n replaced by beta^(n/2); a correct suite rejects it.
/// Too few points to discriminate also counts as a rejection.
pub fn negative_rate_control(trace: &SweepTrace, beta: f64, cfg: &VerifyConfig) -> RateFit {
    let g = trace.g;
    let pts: Vec<(usize, f64, f64)> = trace
        .stage(Stage::Uv)
        .filter_map(|r| {
            let env = g.abs() * ((beta - 1.0) * r.n as f64 / beta.powf(r.n as f64 / 2.0)).sqrt();
            Some((r.n, r.diff_prev_uv?, env))
        })
        .collect();
    let mut f = fit_rate("diff_uv_misscaled", "mis-scaled envelope beta^(n/2)", &pts, cfg.rate_band);
    if f.points.len() + 1 < cfg.min_rate_points {
        f.passed = false;
    }
    f
}

/// Gap bounds recorded on each step, and the kappa/16 floor over the UV trace.
pub fn check_gaps(trace: &SweepTrace, kappa: f64) -> SuiteReport {
    let mut rep = SuiteReport::new("gaps");
    for r in &trace.records {
        let (Some(gap), Some(bound)) = (r.gap, r.gap_bound) else { continue };
        let anchor = match r.stage {
            Stage::Uv => "gap >= xi_n",
            Stage::JointUv if r.m == 0 => "gap >= xi_n",
            _ => "gap >= zeta tau_m",
        };
        rep.push(CheckResult::ge(format!("{:?} n={} m={}", r.stage, r.n, r.m), anchor, gap, bound, 0.0));
        if matches!(r.stage, Stage::Uv) {
            rep.push(CheckResult::ge(format!("floor n={}", r.n), "gap >= kappa/16", gap, kappa / 16.0, 0.0));
        }
    }
    rep
}

/// Free gap at P = 0: the smallest one-boson energy k^2/2 + |k| on the basis.
pub fn free_gap_oracle(basis: &FockBasis) -> f64 {
    basis
        .modes
        .iter()
        .map(|m| 0.5 * m.omega() * m.omega() + m.omega())
        .fold(f64::INFINITY, f64::min)
}

/// Hellmann-Feynman gradient against central differences of E' in P.
pub fn check_gradient(ctx: &Context, records: &[&GroundStateRecord], cfg: &VerifyConfig) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("gradient");
    let h = cfg.fd_step;
    for r in records {
        let basis = r.basis.clone().ok_or(LabError::ZeroState("record basis"))?;
        let mut fd = [0.0; 3];
        for a in 0..3 {
            let mut pp = r.p;
            let mut pm = r.p;
            pp[a] += h;
            pm[a] -= h;
            let ep = multiscale::energy_at(ctx, &basis, pp, r.g, r.n, r.m)?;
            let em = multiscale::energy_at(ctx, &basis, pm, r.g, r.n, r.m)?;
            fd[a] = (ep - em) / (2.0 * h);
        }
        let diff = [r.grad_e[0] - fd[0], r.grad_e[1] - fd[1], r.grad_e[2] - fd[2]];
        let rel = crate::schedule::norm3(&diff) / crate::schedule::norm3(&r.grad_e).max(1e-300);
        rep.push(
            CheckResult::le(
                format!("{:?} n={} m={} P={:?}", r.stage, r.n, r.m, r.p),
                "grad E' = P - <Pf + B + B*> matches d E'/dP",
                rel,
                cfg.fd_rel_tol,
                0.0,
            )
            .with_detail(serde_json::json!({"hf": r.grad_e, "fd": fd})),
        );
        rep.push(CheckResult::le(
            format!("|gradE| n={} m={}", r.n, r.m),
            "|grad E'| <= 3/4",
            crate::schedule::norm3(&r.grad_e),
            GRAD_BOUND,
            0.0,
        ));
    }
    Ok(rep)
}

/// Contour projector against the dense eigenprojector on seeded random vectors.
pub fn check_contour_projector(ctx: &Context, trace: &SweepTrace, cfg: &VerifyConfig) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("contour");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for r in &trace.records {
        let Some(contour) = &r.contour else { continue };
        let basis = r.basis.clone().ok_or(LabError::ZeroState("record basis"))?;
        let h = hamiltonian::assemble_gross(&basis, &ctx.cutoffs(r.p, r.g, r.n, r.m))?.op;
        let (_, vecs) = spectral::dense_eigen(&h)?;
        let u0: Vec<f64> = (0..basis.dim()).map(|i| vecs[(i, 0)]).collect();
        let vs: Vec<Vec<f64>> = (0..cfg.contour_vectors)
            .map(|_| {
                let v: Vec<f64> = (0..basis.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
                linalg::normalized(&v).unwrap()
            })
            .collect();
        let qs = spectral::contour_project_many(&h, contour, &vs, &ctx.settings.solver)?;
        let worst = vs
            .iter()
            .zip(&qs)
            .map(|(v, q)| linalg::norm2(&linalg::sub(q, &spectral::eigenprojector_apply(&u0, v))))
            .fold(0.0, f64::max);
        rep.push(CheckResult::le(
            format!("{:?} n={} m={} dim={}", r.stage, r.n, r.m, basis.dim()),
            "contour projector = spectral projector",
            worst,
            cfg.contour_tol,
            0.0,
        ));
    }
    Ok(rep)
}

/// Monotone energies along each trace, and non-expanding chain norms.
pub fn check_monotone(trace: &SweepTrace, cfg: &VerifyConfig) -> SuiteReport {
    let mut rep = SuiteReport::new("monotone");
    for w in trace.records.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        rep.push(CheckResult::le(
            format!("E' {:?} n={} m={}", b.stage, b.n, b.m),
            "E' non-increasing as cutoffs are removed",
            b.e_prime,
            a.e_prime,
            cfg.energy_tol,
        ));
        rep.push(CheckResult::le(
            format!("norm {:?} n={} m={}", b.stage, b.n, b.m),
            "|Psi'| non-increasing along the chain",
            b.norm,
            a.norm,
            1e-12,
        ));
    }
    rep
}

/// Strictly decreasing vacuum overlap, decreasing phi increments.
pub fn check_infrared_trend(trace: &SweepTrace) -> SuiteReport {
    let mut rep = SuiteReport::new("infrared");
    let ir: Vec<&GroundStateRecord> = trace.records.iter().filter(|r| r.stage == Stage::Ir).collect();
    for w in ir.windows(2) {
        rep.push(CheckResult {
            name: format!("overlap m={}", w[1].m),
            anchor: "|<Omega, Psi'_m>|/|Psi'_m| strictly decreasing".into(),
            value: w[1].vacuum_overlap,
            bound: w[0].vacuum_overlap,
            tol: 0.0,
            passed: w[1].vacuum_overlap < w[0].vacuum_overlap,
            detail: None,
        });
    }
    let first_ir = ir.first().map(|r| (r.vacuum_overlap, trace.records.iter().find(|x| x.stage != Stage::Ir)));
    if let Some((ov, Some(base))) = first_ir {
        rep.push(CheckResult {
            name: "overlap m=1".into(),
            anchor: "|<Omega, Psi'_m>|/|Psi'_m| strictly decreasing".into(),
            value: ov,
            bound: base.vacuum_overlap,
            tol: 0.0,
            passed: ov < base.vacuum_overlap,
            detail: None,
        });
    }
    let diffs: Vec<(usize, f64)> = ir.iter().filter_map(|r| Some((r.m, r.dressing.as_ref()?.diff_phi_prev))).collect();
    for w in diffs.windows(2) {
        rep.push(CheckResult {
            name: format!("phi increment m={}", w[1].0),
            anchor: "|phi_m - phi_{m-1}| decreasing".into(),
            value: w[1].1,
            bound: w[0].1,
            tol: 0.0,
            passed: w[1].1 < w[0].1,
            detail: None,
        });
    }
    rep
}

/// Dressing-layer identities on the records' dressed diagnostics.
pub fn check_dressed_records(trace: &SweepTrace) -> SuiteReport {
    let mut rep = SuiteReport::new("dressed");
    for r in &trace.records {
        let Some(d) = &r.dressing else { continue };
        let tag = format!("n={} m={}", r.n, r.m);
        rep.push(CheckResult::le(format!("centered {tag}"), "<phi, Gamma phi> = 0", d.gamma_centered, 0.0, 1e-8));
        rep.push(CheckResult::le(
            format!("exp pi {tag}"),
            "<Pi>_phi = P - grad E - C^(k)",
            d.exp_pi_defect,
            0.0,
            1e-8,
        ));
        rep.push(CheckResult::le(
            format!("gamma diff {tag}"),
            "Gamma~ - Gamma_prev = d gradE + (A~ - A) + (C~ - C)",
            d.gamma_diff_residual,
            0.0,
            1e-9,
        ));
        rep.push(CheckResult::le(
            format!("norm chain {tag}"),
            "|phi| = |phi~| = |eta|",
            (d.norm_phi - d.norm_phi_tilde).abs().max((d.norm_phi - d.norm_eta).abs()),
            0.0,
            1e-12,
        ));
        if let (Some(s), Some(b)) = (d.sandwich, d.sandwich_bound) {
            rep.push(CheckResult::le(format!("sandwich {tag}"), "|g|^(1/2) |<Gamma phi, R Gamma phi>| <= gamma^(-(m-1)/2)", s, b, 0.0));
        }
        if let Some(c) = d.contraction {
            rep.push(CheckResult::le(format!("contraction {tag}"), "shifted k.Gamma sandwich < 1", c, 1.0, 0.0));
        }
    }
    rep
}

/// Appendix-B identity residuals for one N_max on a grid, measured on the
/// fixed occupation block <= `block`.
pub fn identity_residual(
    grid: &ModeGrid,
    active: &[usize],
    n_occ: usize,
    cut: &Cutoffs,
    block: usize,
    solver: &SolverConfig,
) -> Result<IdentityReport> {
    let basis = fock::enumerate_basis(grid, active, n_occ)?;
    let h = hamiltonian::assemble_gross(&basis, cut)?;
    let sol = spectral::ground_state(&h.op, solver)?;
    let grad = multiscale::grad_e(&basis, cut.p, cut.g, cut.uv_n, &sol.ground)?;
    let coeffs = dressing::alpha_coeffs(&basis.modes, grad, cut.ir_m, cut.g)?;
    let gross = hamiltonian::assemble_gross_data(&basis, cut.g, cut.kappa, cut.beta, cut.uv_n)?;
    let consts = dressing::dressing_constants(&basis.modes, &coeffs, cut.g);
    let center = [0, 1, 2].map(|a| cut.p[a] - grad[a] - consts.c_k[a]);
    let d = dressing::assemble_dressed(
        &basis,
        &h.op,
        &gross,
        &coeffs,
        cut.p,
        center,
        consts.c_k,
        dressing::DressedVariant::Current,
        block,
    );
    let w = dressing::bogolyubov_w(&basis, &coeffs);
    let cancel = dressing::cancellation_operator(&basis, &coeffs).max_abs();
    Ok(IdentityReport {
        n_occ,
        dim: basis.dim(),
        block,
        residual: d.residual,
        unitarity: w.unitarity_defect(),
        cancellation: cancel,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub n_occ: usize,
    pub dim: usize,
    pub block: usize,
    pub residual: f64,
    pub unitarity: f64,
    pub cancellation: f64,
}

/// Unitarity, cancellation and the identity residual trend over N_max.
pub fn check_dressing_identities(
    grid: &ModeGrid,
    active: &[usize],
    cut: &Cutoffs,
    n_occ: &[usize],
    solver: &SolverConfig,
) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("identities");
    let block = n_occ.iter().copied().min().unwrap_or(1).saturating_sub(1);
    let mut prev: Option<IdentityReport> = None;
    for &n in n_occ {
        let r = identity_residual(grid, active, n, cut, block, solver)?;
        rep.push(CheckResult::le(format!("unitarity N={n}"), "|W*W - Id| <= 1e-10", r.unitarity, 1e-10, 0.0));
        rep.push(CheckResult::le(
            format!("cancellation N={n}"),
            "-grad E.A + L + g Phi_IR = 0",
            r.cancellation,
            1e-10,
            0.0,
        ));
        if let Some(p) = &prev {
            rep.push(
                CheckResult {
                    name: format!("identity residual N={n} block<={block}"),
                    anchor: "W H' W* = structured normal form, defect shrinking with N_max".into(),
                    value: r.residual,
                    bound: p.residual,
                    tol: 0.0,
                    passed: r.residual < p.residual,
                    detail: None,
                }
                .with_detail(serde_json::to_value(&r)?),
            );
        }
        prev = Some(r);
    }
    Ok(rep)
}
