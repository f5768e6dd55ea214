//! Infrared Bogolyubov dressing: coherent coefficients, the transformations
//! W_m(Q), dressed Hamiltonians, the Pi/Gamma operators and the phi/eta chain.

use std::sync::Arc;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::fock::{self, FockBasis, Mode, ShellLabel};
use crate::hamiltonian::GrossData;
use crate::linalg::{self, LinearOperator};
use crate::schedule::Contour;
use crate::spectral::{self, NeumannDiagnostic, SolverConfig};

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn sub3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm3(a: &[f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

/// alpha_m(Q, k) = -g rho(k) / (omega(k) (1 - khat . Q)) on IR shells 1..=m.
pub fn alpha_value(mode: &Mode, q: [f64; 3], m: usize, g: f64) -> f64 {
    match mode.shell {
        ShellLabel::Ir(j) if j >= 1 && j <= m => {
            let kh = mode.khat();
            -g * mode.rho() / (mode.omega() * (1.0 - dot3(&kh, &q)))
        }
        _ => 0.0,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DressingCoefficients {
    pub q: [f64; 3],
    pub m: usize,
    pub g: f64,
    /// alpha_m(Q, k_i) for every mode of the basis.
    pub alpha: Vec<f64>,
    pub weights: Vec<f64>,
}

pub fn alpha_coeffs(modes: &[Mode], q: [f64; 3], m: usize, g: f64) -> Result<DressingCoefficients> {
    if !(norm3(&q) < 1.0) {
        return Err(LabError::Domain(format!("|Q| = {} must be below 1", norm3(&q))));
    }
    Ok(DressingCoefficients {
        q,
        m,
        g,
        alpha: modes.iter().map(|md| alpha_value(md, q, m, g)).collect(),
        weights: modes.iter().map(|md| md.w).collect(),
    })
}

impl DressingCoefficients {
    fn coef_op(&self, basis: &FockBasis, f: impl Fn(usize, &Mode) -> f64, sign: f64) -> LinearOperator {
        assert_eq!(basis.mode_count(), self.alpha.len());
        let vals: Vec<f64> = basis.modes.iter().enumerate().map(|(i, m)| f(i, m)).collect();
        let op = fock::indexed_linear_op(basis, &vals, sign);
        if sign > 0.0 {
            op
        } else {
            op.with_hermitian_flag(false)
        }
    }

    /// Skew generator G = sum sqrt(w) alpha (b - b*), W = exp(G).
    pub fn generator(&self, basis: &FockBasis) -> LinearOperator {
        self.coef_op(basis, |i, _| self.alpha[i], -1.0)
    }

    /// A^(a) = sum sqrt(w) k^a alpha (b + b*).
    pub fn a_ops(&self, basis: &FockBasis) -> [LinearOperator; 3] {
        [0, 1, 2].map(|a| self.coef_op(basis, |i, m| m.k[a] * self.alpha[i], 1.0))
    }

    /// L = sum sqrt(w) omega alpha (b + b*).
    pub fn l_op(&self, basis: &FockBasis) -> LinearOperator {
        self.coef_op(basis, |i, m| m.omega() * self.alpha[i], 1.0)
    }

    pub fn is_zero(&self) -> bool {
        self.alpha.iter().all(|&a| a == 0.0)
    }
}

/// W_m(Q) on a truncated basis, applied through its skew generator.
#[derive(Clone, Debug)]
pub struct BogolyubovW {
    pub generator: LinearOperator,
}

pub fn bogolyubov_w(basis: &FockBasis, coeffs: &DressingCoefficients) -> BogolyubovW {
    BogolyubovW { generator: coeffs.generator(basis) }
}

impl BogolyubovW {
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        if self.generator.nnz() == 0 {
            return v.to_vec();
        }
        self.generator.expm_apply(v, 1.0)
    }

    pub fn apply_adjoint(&self, v: &[f64]) -> Vec<f64> {
        if self.generator.nnz() == 0 {
            return v.to_vec();
        }
        self.generator.expm_apply(v, -1.0)
    }

    pub fn dense(&self) -> Mat<f64> {
        linalg::expm_dense(self.generator.to_dense().as_ref())
    }

    pub fn to_operator(&self) -> LinearOperator {
        LinearOperator::from_dense(self.dense().as_ref(), false)
    }

    /// max |(W* W - Id)_ij| from the dense exponential.
    pub fn unitarity_defect(&self) -> f64 {
        let w = self.dense();
        let mut p = w.transpose() * &w;
        for i in 0..p.nrows() {
            p[(i, i)] -= 1.0;
        }
        linalg::dense_max_abs(p.as_ref())
    }

    /// W X W* applied column by column on the given basis indices.
    pub fn conjugate_columns(&self, x: &LinearOperator, cols: &[usize]) -> Vec<Vec<f64>> {
        let n = x.dim();
        cols.iter()
            .map(|&c| {
                let mut e = vec![0.0; n];
                e[c] = 1.0;
                self.apply(&x.apply(&self.apply_adjoint(&e)))
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DressingConstants {
    pub c_k: [f64; 3],
    pub c_omega: f64,
    pub c_rho: f64,
}

/// C^(k) = sum w k alpha^2, C^(omega) = sum w omega alpha^2, C^(rho) = 2g sum w rho alpha.
pub fn dressing_constants(modes: &[Mode], coeffs: &DressingCoefficients, g: f64) -> DressingConstants {
    let mut c_k = [0.0; 3];
    let mut c_omega = 0.0;
    let mut c_rho = 0.0;
    for (m, &a) in modes.iter().zip(&coeffs.alpha) {
        if a == 0.0 {
            continue;
        }
        for j in 0..3 {
            c_k[j] += m.w * m.k[j] * a * a;
        }
        c_omega += m.w * m.omega() * a * a;
        c_rho += 2.0 * g * m.w * m.rho() * a;
    }
    DressingConstants { c_k, c_omega, c_rho }
}

/// C_{P}(Q) = P^2/2 - (P-Q)^2/2 - Q . c_k + C^(omega) + C^(rho).
pub fn c_scalar(p: [f64; 3], q: [f64; 3], c_k: [f64; 3], c: &DressingConstants) -> f64 {
    let d = sub3(&p, &q);
    0.5 * dot3(&p, &p) - 0.5 * dot3(&d, &d) - dot3(&q, &c_k) + c.c_omega + c.c_rho
}

/// f_{P,m-1}(k) = k^2/2 + |k| (1 - grad . khat).
pub fn f_shift(k: [f64; 3], grad: [f64; 3]) -> f64 {
    let r = norm3(&k);
    if r == 0.0 {
        return 0.0;
    }
    let kh = [k[0] / r, k[1] / r, k[2] / r];
    0.5 * r * r + r * (1.0 - dot3(&grad, &kh))
}

/// Pi = Pf + A + B + B*, its expectation in phi and Gamma = Pi - <Pi>.
#[derive(Clone, Debug)]
pub struct GammaOps {
    pub pi: [LinearOperator; 3],
    pub expectation: [f64; 3],
    pub gamma: [LinearOperator; 3],
}

impl GammaOps {
    /// max_a |<phi, Gamma_a phi>| / |phi|^2.
    pub fn centered_defect(&self, phi: &[f64]) -> f64 {
        let n2 = linalg::dot(phi, phi);
        self.gamma
            .iter()
            .map(|g| (g.expectation(phi) / n2).abs())
            .fold(0.0, f64::max)
    }
}

pub fn pi_ops(basis: &FockBasis, a_ops: &[LinearOperator; 3], gross: &GrossData) -> [LinearOperator; 3] {
    let ff = fock::free_field_ops(basis);
    [0, 1, 2].map(|a| {
        LinearOperator::sum(basis.dim(), &[(&ff.pf[a], 1.0), (&a_ops[a], 1.0), (&gross.b_plus_bdag(a), 1.0)])
            .with_hermitian_flag(true)
    })
}

pub fn gamma_ops(basis: &FockBasis, coeffs: &DressingCoefficients, gross: &GrossData, phi: &[f64]) -> Result<GammaOps> {
    let n2 = linalg::dot(phi, phi);
    if !(n2 > 0.0) {
        return Err(LabError::ZeroState("gamma_ops"));
    }
    let pi = pi_ops(basis, &coeffs.a_ops(basis), gross);
    let expectation = [0, 1, 2].map(|a| pi[a].expectation(phi) / n2);
    Ok(centered(basis, pi, expectation))
}

fn centered(basis: &FockBasis, pi: [LinearOperator; 3], expectation: [f64; 3]) -> GammaOps {
    let id = LinearOperator::identity(basis.dim());
    let gamma = [0, 1, 2].map(|a| pi[a].add_scaled(&id, -expectation[a]).with_hermitian_flag(true));
    GammaOps { pi, expectation, gamma }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DressedVariant {
    Current,
    Tilde,
}

/// The structured normal form (1/2) Y^2 + Hf - Q.Pf + C + R with
/// Y = Pf + A + B + B* - center and R = -Q.(B + B*) + S.
pub fn structured_form(
    basis: &FockBasis,
    gross: &GrossData,
    a_ops: &[LinearOperator; 3],
    center: [f64; 3],
    q: [f64; 3],
    c: f64,
) -> LinearOperator {
    let ff = fock::free_field_ops(basis);
    let dim = basis.dim();
    let id = LinearOperator::identity(dim);
    let mut terms: Vec<LinearOperator> = Vec::new();
    let mut scales: Vec<f64> = Vec::new();
    for a in 0..3 {
        let bb = gross.b_plus_bdag(a);
        let y = LinearOperator::sum(dim, &[(&ff.pf[a], 1.0), (&a_ops[a], 1.0), (&bb, 1.0), (&id, -center[a])]);
        terms.push(y.matmul(&y));
        scales.push(0.5);
        terms.push(ff.pf[a].clone());
        scales.push(-q[a]);
        terms.push(bb);
        scales.push(-q[a]);
    }
    terms.push(ff.hf.clone());
    scales.push(1.0);
    terms.push(id);
    scales.push(c);
    terms.push(gross.s.clone());
    scales.push(1.0);
    let refs: Vec<(&LinearOperator, f64)> = terms.iter().zip(&scales).map(|(t, &s)| (t, s)).collect();
    LinearOperator::sum(dim, &refs).with_hermitian_flag(true)
}

#[derive(Clone, Debug)]
pub struct DressedHamiltonian {
    pub variant: DressedVariant,
    /// W H' W* restricted to the requested columns.
    pub direct_columns: Vec<Vec<f64>>,
    pub columns: Vec<usize>,
    pub structured: LinearOperator,
    pub constants: DressingConstants,
    pub c_pm: f64,
    /// max |(direct - structured)_ij| over rows and columns in the block.
    pub residual: f64,
}

/// Builds W H' W* by direct conjugation and the structured identity
/// independently, and compares them on the occupation block <= `block`.
#[allow(clippy::too_many_arguments)]
pub fn assemble_dressed(
    basis: &FockBasis,
    h_prime: &LinearOperator,
    gross: &GrossData,
    coeffs: &DressingCoefficients,
    p: [f64; 3],
    center: [f64; 3],
    c_k_for_c: [f64; 3],
    variant: DressedVariant,
    block: usize,
) -> DressedHamiltonian {
    let w = bogolyubov_w(basis, coeffs);
    let constants = dressing_constants(&basis.modes, coeffs, coeffs.g);
    let c_pm = c_scalar(p, coeffs.q, c_k_for_c, &constants);
    let a = coeffs.a_ops(basis);
    let structured = structured_form(basis, gross, &a, center, coeffs.q, c_pm);
    let columns = basis.block(block);
    let direct_columns = w.conjugate_columns(h_prime, &columns);
    let in_block: Vec<bool> = {
        let mut f = vec![false; basis.dim()];
        columns.iter().for_each(|&c| f[c] = true);
        f
    };
    let mut residual = 0.0f64;
    for (col, &c) in direct_columns.iter().zip(&columns) {
        for r in 0..basis.dim() {
            if in_block[r] {
                residual = residual.max((col[r] - structured.get(r, c)).abs());
            }
        }
    }
    DressedHamiltonian { variant, direct_columns, columns, structured, constants, c_pm, residual }
}

/// The cancellation operator -Q.A + L + g Phi_IR for the coefficients' support.
pub fn cancellation_operator(basis: &FockBasis, coeffs: &DressingCoefficients) -> LinearOperator {
    let a = coeffs.a_ops(basis);
    let l = coeffs.l_op(basis);
    let m = coeffs.m;
    let g = coeffs.g;
    let phi = fock::field_op(basis, |md| g * md.rho(), |s| s.is_ir() && s.within(0, m));
    LinearOperator::sum(
        basis.dim(),
        &[(&a[0], -coeffs.q[0]), (&a[1], -coeffs.q[1]), (&a[2], -coeffs.q[2]), (&l, 1.0), (&phi, 1.0)],
    )
}

/// One link of the dressed chain, living on the basis of its IR depth.
#[derive(Clone, Debug)]
pub struct DressedState {
    pub n: usize,
    pub m: usize,
    pub basis: Arc<FockBasis>,
    pub phi: Vec<f64>,
    pub phi_tilde: Vec<f64>,
    pub eta: Vec<f64>,
    pub grad_e: [f64; 3],
    /// <Pi_m>_phi.
    pub pi_expectation: [f64; 3],
    pub c_k: [f64; 3],
    pub c_pm: f64,
}

impl DressedState {
    /// phi_0 = eta_0 = Psi' / |Psi'|.
    pub fn initial(n: usize, basis: Arc<FockBasis>, psi: &[f64], grad_e: [f64; 3], gross: &GrossData) -> Result<Self> {
        let phi = linalg::normalized(psi).ok_or(LabError::ZeroState("initial dressed state"))?;
        let pi = pi_ops(&basis, &[0, 1, 2].map(|_| LinearOperator::zeros(basis.dim())), gross);
        let pi_expectation = [0, 1, 2].map(|a| pi[a].expectation(&phi));
        Ok(Self {
            n,
            m: 0,
            basis,
            phi_tilde: phi.clone(),
            eta: phi.clone(),
            phi,
            grad_e,
            pi_expectation,
            c_k: [0.0; 3],
            c_pm: 0.0,
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DressedDiag {
    pub m: usize,
    pub norm_phi: f64,
    pub norm_eta: f64,
    pub norm_phi_tilde: f64,
    /// |phi~_m - phi_{m-1}|.
    pub diff_tilde_prev: f64,
    /// |phi_m - phi~_m|.
    pub diff_phi_tilde: f64,
    /// |phi_m - phi_{m-1}|.
    pub diff_phi_prev: f64,
    pub bound_tilde_prev: f64,
    pub bound_phi_tilde: f64,
    pub norm_floor: f64,
    pub gamma_centered: f64,
    /// |<Pi>_phi + grad E + C^(k) - P|.
    pub exp_pi_defect: f64,
    /// Entry-wise max of (Gamma~ - Gamma_prev) - (dgrad + (A~ - A_prev) + (C~k - Ck_prev)).
    pub gamma_diff_residual: f64,
    /// C~_{P,m} - C_{P,m-1}.
    pub c_shift: f64,
    pub c_k: [f64; 3],
    pub c_pm: f64,
    pub sandwich: Option<f64>,
    pub sandwich_bound: Option<f64>,
    pub contraction: Option<f64>,
    pub passed: bool,
}

/// Inputs for one IR step of the dressed chain at fixed UV index.
pub struct StepInput<'a> {
    pub basis: Arc<FockBasis>,
    pub h_prime: &'a LinearOperator,
    pub gross: &'a GrossData,
    pub grad_e: [f64; 3],
    pub p: [f64; 3],
    pub g: f64,
    pub gamma: f64,
    pub contour: Contour,
    pub solver: &'a SolverConfig,
    /// H'_{m-1} on the basis of depth m, for the dense diagnostics.
    pub h_prev: Option<&'a LinearOperator>,
    pub diagnostic_nodes: usize,
}

pub fn dressed_step(prev: &DressedState, input: &StepInput<'_>) -> Result<(DressedState, DressedDiag)> {
    let basis = &input.basis;
    let m = prev.m + 1;
    let g = input.g;
    let phi_prev = fock::transfer(&prev.basis, basis, &prev.phi);
    let coeff_tilde = alpha_coeffs(&basis.modes, prev.grad_e, m, g)?;
    let coeff_new = alpha_coeffs(&basis.modes, input.grad_e, m, g)?;
    let coeff_prev = alpha_coeffs(&basis.modes, prev.grad_e, m - 1, g)?;
    let w_tilde = bogolyubov_w(basis, &coeff_tilde);
    let w_new = bogolyubov_w(basis, &coeff_new);
    let x = w_tilde.apply_adjoint(&phi_prev);
    let eta = spectral::contour_project(input.h_prime, &input.contour, &x, input.solver)?;
    let phi_tilde = w_tilde.apply(&eta);
    let phi = w_new.apply(&eta);

    let k_new = dressing_constants(&basis.modes, &coeff_new, g);
    let k_tilde = dressing_constants(&basis.modes, &coeff_tilde, g);
    let c_pm = c_scalar(input.p, input.grad_e, k_new.c_k, &k_new);
    let c_tilde = c_scalar(input.p, prev.grad_e, k_tilde.c_k, &k_tilde);

    let gops = gamma_ops(basis, &coeff_new, input.gross, &phi)?;
    let exp_pi_defect = (0..3)
        .map(|a| (gops.expectation[a] + input.grad_e[a] + k_new.c_k[a] - input.p[a]).abs())
        .fold(0.0, f64::max);
    let gamma_centered = gops.centered_defect(&phi);

    // Gamma~_m - Gamma_{m-1} against the right-hand side, by operator arithmetic.
    let a_tilde = coeff_tilde.a_ops(basis);
    let a_prev = coeff_prev.a_ops(basis);
    let pi_tilde = pi_ops(basis, &a_tilde, input.gross);
    let n2t = linalg::dot(&phi_tilde, &phi_tilde);
    let exp_tilde = [0, 1, 2].map(|a| pi_tilde[a].expectation(&phi_tilde) / n2t);
    let gamma_tilde = centered(basis, pi_tilde, exp_tilde);
    let pi_prev = pi_ops(basis, &a_prev, input.gross);
    let gamma_prev = centered(basis, pi_prev, prev.pi_expectation);
    let id = LinearOperator::identity(basis.dim());
    let mut gamma_diff_residual = 0.0f64;
    for a in 0..3 {
        let rhs_scalar = input.grad_e[a] - prev.grad_e[a] + k_tilde.c_k[a] - prev.c_k[a];
        let lhs = gamma_tilde.gamma[a].add_scaled(&gamma_prev.gamma[a], -1.0);
        let rhs = a_tilde[a].add_scaled(&a_prev[a], -1.0).add_scaled(&id, rhs_scalar);
        gamma_diff_residual = gamma_diff_residual.max(lhs.max_abs_diff(&rhs));
    }

    let norm_phi = linalg::norm2(&phi);
    let norm_eta = linalg::norm2(&eta);
    let norm_phi_tilde = linalg::norm2(&phi_tilde);
    let diff_tilde_prev = linalg::norm2(&linalg::sub(&phi_tilde, &phi_prev));
    let diff_phi_tilde = linalg::norm2(&linalg::sub(&phi, &phi_tilde));
    let diff_phi_prev = linalg::norm2(&linalg::sub(&phi, &phi_prev));
    let bound_tilde_prev = input.gamma.powf(m as f64 / 4.0);
    let bound_phi_tilde = m as f64 * bound_tilde_prev;
    let norm_floor = 1.0 - crate::schedule::ir_series_partial(input.gamma, m);

    let (sandwich, sandwich_bound, contraction) = match input.h_prev {
        Some(h_prev) => {
            let c_shift = c_tilde - prev.c_pm;
            let diag = prev_diagnostics(prev, basis, h_prev, input, &phi_prev, c_shift, m)?;
            (Some(diag.0), Some(input.gamma.powf(-(prev.m as f64) / 2.0)), diag.1)
        }
        _ => (None, None, None),
    };

    let mut passed = diff_tilde_prev <= bound_tilde_prev && diff_phi_tilde <= bound_phi_tilde && norm_phi >= norm_floor;
    if let (Some(s), Some(b)) = (sandwich, sandwich_bound) {
        passed &= s <= b;
    }
    if let Some(c) = contraction {
        passed &= c < 1.0;
    }
    let diag = DressedDiag {
        m,
        norm_phi,
        norm_eta,
        norm_phi_tilde,
        diff_tilde_prev,
        diff_phi_tilde,
        diff_phi_prev,
        bound_tilde_prev,
        bound_phi_tilde,
        norm_floor,
        gamma_centered,
        exp_pi_defect,
        gamma_diff_residual,
        c_shift: c_tilde - prev.c_pm,
        c_k: k_new.c_k,
        c_pm,
        sandwich,
        sandwich_bound,
        contraction,
        passed,
    };
    let state = DressedState {
        n: prev.n,
        m,
        basis: input.basis.clone(),
        phi,
        phi_tilde,
        eta,
        grad_e: input.grad_e,
        pi_expectation: gops.expectation,
        c_k: k_new.c_k,
        c_pm,
    };
    Ok((state, diag))
}

/// Gamma-sandwich of the previous link on the shifted contour and the
/// largest k.Gamma contraction over the new slice (dense path only).
fn prev_diagnostics(
    prev: &DressedState,
    basis: &FockBasis,
    h_prev: &LinearOperator,
    input: &StepInput<'_>,
    phi_prev: &[f64],
    c_shift: f64,
    m: usize,
) -> Result<(f64, Option<f64>)> {
    let contour = Contour::new(input.contour.center, input.contour.radius, c_shift, input.contour.n_quad)?;
    let nodes = contour.nodes();
    let stride = (nodes.len() / input.diagnostic_nodes.max(1)).max(1);
    let picked: Vec<c64> = nodes.iter().step_by(stride).copied().collect();
    let coeff_prev = alpha_coeffs(&basis.modes, prev.grad_e, prev.m, input.g)?;
    let w_prev = bogolyubov_w(basis, &coeff_prev);
    let pi_prev = pi_ops(basis, &coeff_prev.a_ops(basis), input.gross);
    let gamma_prev = centered(basis, pi_prev, prev.pi_expectation);
    let mut sandwich = 0.0f64;
    for a in 0..3 {
        let x = w_prev.apply_adjoint(&gamma_prev.gamma[a].apply(phi_prev));
        let xc: Vec<c64> = x.iter().map(|&v| c64::new(v, 0.0)).collect();
        for &z in &picked {
            let y = spectral::resolve(h_prev, z, &xc, input.solver)?;
            let s = xc.iter().zip(&y).fold(c64::new(0.0, 0.0), |acc, (u, v)| acc + u * v);
            sandwich = sandwich.max(input.g.abs().sqrt() * s.norm());
        }
    }
    let contraction = if basis.dim() <= input.solver.dense_max.min(800) {
        let w = w_prev.dense();
        let mut worst = 0.0f64;
        let slice: Vec<&Mode> = basis.modes.iter().filter(|md| md.shell == ShellLabel::Ir(m)).collect();
        let gdense: [Mat<f64>; 3] = [0, 1, 2].map(|a| {
            let gm = gamma_prev.gamma[a].to_dense();
            w.transpose() * &gm * &w
        });
        let (vals, u) = spectral::dense_eigen(h_prev)?;
        for md in slice {
            let mut kg = Mat::<f64>::zeros(basis.dim(), basis.dim());
            for a in 0..3 {
                kg += &gdense[a] * md.k[a];
            }
            let diag = NeumannDiagnostic::from_eigen(&vals, &u, &kg);
            let f = f_shift(md.k, prev.grad_e);
            for &z in &picked {
                worst = worst.max(diag.value(z - c64::new(f, 0.0))?.value);
            }
        }
        Some(worst)
    } else {
        None
    };
    Ok((sandwich, contraction))
}

/// Norm of the sandwiched k.Gamma resolvent operator of Lemma-type
/// expansions at the shift f_{P,m-1}(k), evaluated densely.
pub fn contraction_diagnostic(
    h_w_prev: &LinearOperator,
    gamma: &[LinearOperator; 3],
    k: [f64; 3],
    grad_prev: [f64; 3],
    z: c64,
) -> Result<f64> {
    let dim = h_w_prev.dim();
    let mut kg = Mat::<f64>::zeros(dim, dim);
    for a in 0..3 {
        kg += gamma[a].to_dense() * k[a];
    }
    let (vals, u) = spectral::dense_eigen(h_w_prev)?;
    let diag = NeumannDiagnostic::from_eigen(&vals, &u, &kg);
    Ok(diag.value(z - c64::new(f_shift(k, grad_prev), 0.0))?.value)
}

/// The UV extension of a dressed link at fixed IR depth: undress with the
/// old gradient, project with the new Hamiltonian, redress with the new gradient.
#[allow(clippy::too_many_arguments)]
pub fn uv_extend(
    prev: &DressedState,
    basis: Arc<FockBasis>,
    h_prime: &LinearOperator,
    gross: &GrossData,
    grad_e: [f64; 3],
    p: [f64; 3],
    g: f64,
    contour: &Contour,
    solver: &SolverConfig,
) -> Result<DressedState> {
    let m = prev.m;
    let phi_prev = fock::transfer(&prev.basis, &basis, &prev.phi);
    let c_old = alpha_coeffs(&basis.modes, prev.grad_e, m, g)?;
    let c_new = alpha_coeffs(&basis.modes, grad_e, m, g)?;
    let x = bogolyubov_w(&basis, &c_old).apply_adjoint(&phi_prev);
    let eta = spectral::contour_project(h_prime, contour, &x, solver)?;
    let phi = bogolyubov_w(&basis, &c_new).apply(&eta);
    let k_new = dressing_constants(&basis.modes, &c_new, g);
    let gops = gamma_ops(&basis, &c_new, gross, &phi)?;
    Ok(DressedState {
        n: prev.n + 1,
        m,
        basis,
        phi_tilde: phi.clone(),
        phi,
        eta,
        grad_e,
        pi_expectation: gops.expectation,
        c_k: k_new.c_k,
        c_pm: c_scalar(p, grad_e, k_new.c_k, &k_new),
    })
}
