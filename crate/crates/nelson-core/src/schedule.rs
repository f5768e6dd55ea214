//! Model parameters, cutoff sequences, gap bounds and integration contours.

use std::f64::consts::PI;

use faer::c64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::quad;

/// Upper bound on |P|.
pub const P_MAX: f64 = 0.25;
/// Exponent of the Gamma-sandwich bound in the dressed induction.
pub const DELTA: f64 = 0.5;
/// Default number of trapezoid nodes on a contour.
pub const DEFAULT_NODES: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    pub g: f64,
    pub kappa: f64,
    pub beta: f64,
    pub gamma: f64,
    pub zeta: f64,
    pub theta: f64,
    #[serde(rename = "P")]
    pub p: [f64; 3],
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            g: 0.05,
            kappa: 1.5,
            beta: 1.2,
            gamma: 0.25,
            zeta: 0.05,
            theta: 0.05,
            p: [0.2, 0.0, 0.0],
        }
    }
}

impl ModelParams {
    pub fn p_max(&self) -> f64 {
        P_MAX
    }

    pub fn delta(&self) -> f64 {
        DELTA
    }

    pub fn p_norm(&self) -> f64 {
        norm3(&self.p)
    }

    pub fn with_p(&self, p: [f64; 3]) -> Self {
        Self { p, ..self.clone() }
    }

    pub fn with_g(&self, g: f64) -> Self {
        Self { g, ..self.clone() }
    }

    pub fn check_finite(&self) -> Result<()> {
        let fields = [
            ("g", self.g),
            ("kappa", self.kappa),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("zeta", self.zeta),
            ("theta", self.theta),
            ("P[0]", self.p[0]),
            ("P[1]", self.p[1]),
            ("P[2]", self.p[2]),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(LabError::NonFinite(name.to_string()));
            }
        }
        Ok(())
    }
}

pub fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Scaling choices that sit on top of the model parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub n_max: usize,
    pub m_max: usize,
    pub alpha_prime: usize,
    #[serde(rename = "K")]
    pub k_rate: f64,
    pub alpha_bar: Option<f64>,
    pub n_quad: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            n_max: 5,
            m_max: 3,
            alpha_prime: 2,
            k_rate: 5.0,
            alpha_bar: None,
            n_quad: DEFAULT_NODES,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Hard,
    Advisory,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub lhs: f64,
    pub relation: String,
    pub rhs: f64,
    pub passed: bool,
    pub severity: Severity,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub constraints: Vec<Constraint>,
}

impl ConstraintReport {
    fn push(&mut self, name: &str, lhs: f64, relation: &str, rhs: f64, severity: Severity) {
        let passed = match relation {
            "<=" => lhs <= rhs,
            "<" => lhs < rhs,
            ">=" => lhs >= rhs,
            ">" => lhs > rhs,
            _ => unreachable!("unknown relation {relation}"),
        };
        self.constraints.push(Constraint {
            name: name.to_string(),
            lhs,
            relation: relation.to_string(),
            rhs,
            passed,
            severity,
        });
    }

    /// True when every constraint holds.
    pub fn passed(&self) -> bool {
        self.constraints.iter().all(|c| c.passed)
    }

    /// True when every hard constraint holds; advisory failures are tolerated.
    pub fn admissible(&self) -> bool {
        self.constraints
            .iter()
            .all(|c| c.passed || c.severity == Severity::Advisory)
    }

    pub fn violations(&self) -> Vec<&Constraint> {
        self.constraints.iter().filter(|c| !c.passed).collect()
    }

    pub fn get(&self, name: &str) -> Option<&Constraint> {
        self.constraints.iter().find(|c| c.name == name)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.constraints {
            let tag = match (c.passed, c.severity) {
                (true, _) => "ok  ",
                (false, Severity::Hard) => "FAIL",
                (false, Severity::Advisory) => "warn",
            };
            out.push_str(&format!(
                "{tag} {:<28} {:.6e} {} {:.6e}\n",
                c.name, c.lhs, c.relation, c.rhs
            ));
        }
        out
    }
}

/// Closed form of sum_{j>=1} gamma^{j/4} (1 + j).
pub fn ir_series_closed(gamma: f64) -> f64 {
    let x = gamma.powf(0.25);
    x / (1.0 - x) + x / ((1.0 - x) * (1.0 - x))
}

/// Partial sum of the same series up to `terms`.
pub fn ir_series_partial(gamma: f64, terms: usize) -> f64 {
    (1..=terms)
        .map(|j| gamma.powf(j as f64 / 4.0) * (1.0 + j as f64))
        .sum()
}

pub fn validate_params(params: &ModelParams, cfg: &ScheduleConfig) -> Result<ConstraintReport> {
    params.check_finite()?;
    if !cfg.k_rate.is_finite() {
        return Err(LabError::NonFinite("K".into()));
    }
    if let Some(a) = cfg.alpha_bar {
        if !a.is_finite() {
            return Err(LabError::NonFinite("alpha_bar".into()));
        }
    }
    let p = params;
    let mut r = ConstraintReport::default();
    r.push("|g| <= beta - 1", p.g.abs(), "<=", p.beta - 1.0, Severity::Hard);
    r.push("beta > 1", p.beta, ">", 1.0, Severity::Hard);
    r.push("beta < 2", p.beta, "<", 2.0, Severity::Hard);
    r.push("gamma > 0", p.gamma, ">", 0.0, Severity::Hard);
    r.push("gamma < 1/2", p.gamma, "<", 0.5, Severity::Hard);
    r.push("|g| <= gamma^2", p.g.abs(), "<=", p.gamma * p.gamma, Severity::Hard);
    let series = if p.gamma > 0.0 && p.gamma < 1.0 {
        let closed = ir_series_closed(p.gamma);
        let partial = ir_series_partial(p.gamma, 4000);
        if (closed - partial).abs() > 1e-12 * closed.max(1.0) && p.gamma < 0.5 {
            return Err(LabError::Domain(format!(
                "infrared series closed form {closed} disagrees with partial sum {partial}"
            )));
        }
        closed
    } else {
        f64::INFINITY
    };
    r.push("sum gamma^(j/4)(1+j) <= 1/2", series, "<=", 0.5, Severity::Advisory);
    r.push("kappa > 1", p.kappa, ">", 1.0, Severity::Hard);
    r.push("kappa < 2", p.kappa, "<", 2.0, Severity::Hard);
    r.push("|P| <= 1/4", p.p_norm(), "<=", P_MAX, Severity::Hard);
    r.push("theta > 0", p.theta, ">", 0.0, Severity::Hard);
    r.push("theta < 1/8", p.theta, "<", 0.125, Severity::Hard);
    r.push("zeta > 0", p.zeta, ">", 0.0, Severity::Hard);
    r.push("zeta < 1/16", p.zeta, "<", 1.0 / 16.0, Severity::Hard);
    r.push(
        "1 - theta - 3/4 >= 2 zeta",
        1.0 - p.theta - 0.75,
        ">=",
        2.0 * p.zeta,
        Severity::Hard,
    );
    r.push("K >= 5", cfg.k_rate, ">=", 5.0, Severity::Hard);
    r.push("alpha_prime >= 1", cfg.alpha_prime as f64, ">=", 1.0, Severity::Hard);
    r.push("n_quad >= 4", cfg.n_quad as f64, ">=", 4.0, Severity::Hard);
    if p.beta > 1.0 && p.gamma > 0.0 && p.gamma < 0.5 && cfg.k_rate >= 5.0 {
        let amin = alpha_min(p.beta, p.gamma, cfg.k_rate, cfg.alpha_bar);
        r.push(
            "alpha_prime >= alpha_min",
            cfg.alpha_prime as f64,
            ">=",
            amin as f64,
            Severity::Advisory,
        );
    }
    Ok(r)
}

/// First term of the minimal joint scaling, |6 ln K - ln gamma| / ln beta.
pub fn alpha_min_first_term(beta: f64, gamma: f64, k: f64) -> f64 {
    (6.0 * k.ln() - gamma.ln()).abs() / beta.ln()
}

pub fn alpha_min(beta: f64, gamma: f64, k: f64, alpha_bar: Option<f64>) -> u64 {
    let first = alpha_min_first_term(beta, gamma, k);
    let bar = alpha_bar.unwrap_or(first);
    first.max(bar).ceil() as u64
}

pub fn joint_scaling(m: usize, alpha_prime: usize) -> usize {
    alpha_prime * m
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffSchedule {
    pub kappa: f64,
    pub beta: f64,
    pub gamma: f64,
    pub zeta: f64,
    pub alpha: f64,
    pub alpha_prime: usize,
    pub alpha_bar: f64,
    pub alpha_min: u64,
    #[serde(rename = "K")]
    pub k_rate: f64,
}

impl CutoffSchedule {
    pub fn new(params: &ModelParams, cfg: &ScheduleConfig) -> Self {
        let first = alpha_min_first_term(params.beta, params.gamma, cfg.k_rate);
        let alpha_bar = cfg.alpha_bar.unwrap_or(first);
        Self {
            kappa: params.kappa,
            beta: params.beta,
            gamma: params.gamma,
            zeta: params.zeta,
            alpha: -params.gamma.ln() / params.beta.ln(),
            alpha_prime: cfg.alpha_prime,
            alpha_bar,
            alpha_min: alpha_min(params.beta, params.gamma, cfg.k_rate, Some(alpha_bar)),
            k_rate: cfg.k_rate,
        }
    }

    pub fn sigma(&self, n: usize) -> f64 {
        sigma(self.kappa, self.beta, n)
    }

    pub fn tau(&self, m: usize) -> f64 {
        tau(self.kappa, self.gamma, m)
    }

    pub fn delta_xi(&self, n: usize) -> f64 {
        gap_decrement(self.beta, n)
    }

    pub fn xi(&self, n: usize) -> f64 {
        gap_bound_uv(self.kappa, self.beta, n)
    }

    pub fn ir_gap_bound(&self, m: usize) -> f64 {
        self.zeta * self.tau(m)
    }

    pub fn joint_n(&self, m: usize) -> usize {
        joint_scaling(m, self.alpha_prime)
    }

    pub fn admissible_scaling(&self) -> bool {
        self.alpha_prime as u64 >= self.alpha_min
    }

    pub fn contour_uv(&self, n: usize, e_prev: f64, n_quad: usize) -> Result<Contour> {
        Contour::new(e_prev, self.xi(n) / 2.0, 0.0, n_quad)
            .map_err(|_| LabError::ScheduleExhausted(format!("UV contour {n}")))
    }

    pub fn contour_ir(&self, m: usize, e_prev: f64, n_quad: usize) -> Result<Contour> {
        self.contour_ir_shifted(m, e_prev, 0.0, n_quad)
    }

    pub fn contour_ir_shifted(
        &self,
        m: usize,
        e_prev: f64,
        c_shift: f64,
        n_quad: usize,
    ) -> Result<Contour> {
        if m == 0 {
            return Err(LabError::ScheduleExhausted("IR contour index 0".into()));
        }
        Contour::new(e_prev, self.ir_gap_bound(m) / 2.0, c_shift, n_quad)
            .map_err(|_| LabError::ScheduleExhausted(format!("IR contour {m}")))
    }

    pub fn table(&self, n_max: usize, m_max: usize) -> ScheduleTable {
        ScheduleTable {
            uv: (0..=n_max)
                .map(|n| UvRow {
                    n,
                    sigma: self.sigma(n),
                    xi: self.xi(n),
                    delta_xi: if n == 0 { 0.0 } else { self.delta_xi(n) },
                })
                .collect(),
            ir: (0..=m_max)
                .map(|m| IrRow {
                    m,
                    tau: self.tau(m),
                    gap_bound: self.ir_gap_bound(m),
                })
                .collect(),
            alpha: self.alpha,
            alpha_prime: self.alpha_prime,
            alpha_bar: self.alpha_bar,
            alpha_min: self.alpha_min,
            joint_n: (0..=m_max).map(|m| self.joint_n(m)).collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UvRow {
    pub n: usize,
    pub sigma: f64,
    pub xi: f64,
    pub delta_xi: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IrRow {
    pub m: usize,
    pub tau: f64,
    pub gap_bound: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScheduleTable {
    pub uv: Vec<UvRow>,
    pub ir: Vec<IrRow>,
    pub alpha: f64,
    pub alpha_prime: usize,
    pub alpha_bar: f64,
    pub alpha_min: u64,
    pub joint_n: Vec<usize>,
}

pub fn sigma(kappa: f64, beta: f64, n: usize) -> f64 {
    kappa * beta.powi(n as i32)
}

pub fn tau(kappa: f64, gamma: f64, m: usize) -> f64 {
    kappa * gamma.powi(m as i32)
}

/// Delta xi_n = ((beta-1)^2 / (2 beta)) n / beta^n.
pub fn gap_decrement(beta: f64, n: usize) -> f64 {
    (beta - 1.0).powi(2) / (2.0 * beta) * n as f64 / beta.powi(n as i32)
}

/// xi_n = (kappa/8)(1 - sum_{j<=n} Delta xi_j), with xi_0 = kappa/2.
/// Since the full series sums to 1/2 this is kappa/16 + (kappa/8) sum_{j>n} Delta xi_j.
pub fn gap_bound_uv(kappa: f64, beta: f64, n: usize) -> f64 {
    if n == 0 {
        return kappa / 2.0;
    }
    let x = 1.0 / beta;
    let nf = n as f64;
    let tail = x.powi(n as i32 + 1) * ((nf + 1.0) - nf * x) / ((1.0 - x) * (1.0 - x));
    kappa / 16.0 + kappa / 8.0 * (beta - 1.0).powi(2) / (2.0 * beta) * tail
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub center: f64,
    pub radius: f64,
    pub shift: f64,
    pub n_quad: usize,
}

impl Contour {
    pub fn new(center: f64, radius: f64, shift: f64, n_quad: usize) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(LabError::Domain(format!("contour radius {radius}")));
        }
        if !center.is_finite() || !shift.is_finite() {
            return Err(LabError::NonFinite("contour center".into()));
        }
        if n_quad < 2 {
            return Err(LabError::Domain(format!("contour with {n_quad} nodes")));
        }
        Ok(Self { center, radius, shift, n_quad })
    }

    pub fn effective_center(&self) -> f64 {
        self.center + self.shift
    }

    /// Unit phases e^{i theta_j}, theta_j = 2 pi (j + 1/2) / N.
    pub fn phases(&self) -> Vec<c64> {
        (0..self.n_quad)
            .map(|j| {
                let t = 2.0 * PI * (j as f64 + 0.5) / self.n_quad as f64;
                c64::new(t.cos(), t.sin())
            })
            .collect()
    }

    pub fn nodes(&self) -> Vec<c64> {
        let c = self.effective_center();
        self.phases()
            .into_iter()
            .map(|e| c64::new(c + self.radius * e.re, self.radius * e.im))
            .collect()
    }

    pub fn encloses(&self, e: f64) -> bool {
        (e - self.effective_center()).abs() < self.radius
    }

    /// Distance from the circle to a real point.
    pub fn distance_to(&self, e: f64) -> f64 {
        ((e - self.effective_center()).abs() - self.radius).abs()
    }
}

/// Continuum self-energy -(g^2/(2(2 pi)^3)) int_{kappa<|k|<Lambda} dk / (|k|(k^2/2+|k|)).
pub fn vself(lambda: f64, kappa: f64, g: f64) -> Result<f64> {
    if !(lambda.is_finite() && kappa.is_finite() && g.is_finite()) {
        return Err(LabError::NonFinite("vself arguments".into()));
    }
    if lambda < kappa || kappa < 0.0 {
        return Err(LabError::Domain(format!("vself needs 0 <= kappa <= Lambda, got kappa={kappa}, Lambda={lambda}")));
    }
    Ok(-g * g / (2.0 * PI * PI) * ((lambda + 2.0) / (kappa + 2.0)).ln())
}

/// Same integral evaluated by adaptive radial quadrature.
pub fn vself_quadrature(lambda: f64, kappa: f64, g: f64, tol: f64) -> Result<f64> {
    if lambda < kappa || kappa < 0.0 {
        return Err(LabError::Domain(format!("vself needs 0 <= kappa <= Lambda, got kappa={kappa}, Lambda={lambda}")));
    }
    let radial = |r: f64| 4.0 * PI * r * r / (r * (r * r / 2.0 + r));
    let integral = quad::integrate(radial, kappa, lambda, tol)?;
    Ok(-g * g / (2.0 * (2.0 * PI).powi(3)) * integral)
}
