//! Ground states, gaps, resolvents and contour-integral spectral projectors.

use faer::linalg::solvers::Solve;
use faer::{c64, Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::linalg::{self, LinearOperator};
use crate::schedule::Contour;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dense,
    Iterative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Residual tolerance for eigenpairs and linear solves.
    pub tol: f64,
    /// Largest dimension handled by dense factorizations.
    pub dense_max: usize,
    /// Subspace size of the restarted Krylov eigensolver.
    pub krylov_dim: usize,
    pub max_restarts: usize,
    pub max_linear_iter: usize,
    /// Gaps below this are treated as degeneracies.
    pub degeneracy_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            dense_max: 2000,
            krylov_dim: 48,
            max_restarts: 400,
            max_linear_iter: 20_000,
            degeneracy_tol: 1e-12,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SpectralResult {
    pub e0: f64,
    pub e1: f64,
    pub gap: f64,
    pub ground: Vec<f64>,
    pub residual: f64,
    pub method: Method,
    pub iterations: usize,
}

fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for i in 0..v.len() {
        if v[i].abs() > v[best].abs() * (1.0 + 1e-9) {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn residual(op: &LinearOperator, e: f64, v: &[f64]) -> f64 {
    let mut r = op.apply(v);
    linalg::axpy(-e, v, &mut r);
    linalg::norm2(&r)
}

/// All eigenpairs of a symmetric operator, eigenvalues ascending.
pub fn dense_eigen(op: &LinearOperator) -> Result<(Vec<f64>, Mat<f64>)> {
    let a = op.to_dense();
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| LabError::NoConvergence(f64::NAN))?;
    let s = evd.S().column_vector();
    let vals: Vec<f64> = (0..op.dim()).map(|i| s[i]).collect();
    Ok((vals, evd.U().to_owned()))
}

pub fn ground_state(op: &LinearOperator, cfg: &SolverConfig) -> Result<SpectralResult> {
    if op.dim() <= cfg.dense_max {
        ground_state_dense(op, cfg)
    } else {
        ground_state_iterative(op, cfg, None)
    }
}

pub fn ground_state_dense(op: &LinearOperator, cfg: &SolverConfig) -> Result<SpectralResult> {
    let (vals, vecs) = dense_eigen(op)?;
    let mut ground: Vec<f64> = (0..op.dim()).map(|i| vecs[(i, 0)]).collect();
    fix_sign(&mut ground);
    let e0 = vals[0];
    let e1 = vals.get(1).copied().unwrap_or(f64::INFINITY);
    let res = residual(op, e0, &ground);
    finish(e0, e1, ground, res, Method::Dense, 1, cfg)
}

fn finish(
    e0: f64,
    e1: f64,
    ground: Vec<f64>,
    residual: f64,
    method: Method,
    iterations: usize,
    cfg: &SolverConfig,
) -> Result<SpectralResult> {
    let gap = e1 - e0;
    if gap < cfg.degeneracy_tol {
        return Err(LabError::Degenerate(gap));
    }
    Ok(SpectralResult { e0, e1, gap, ground, residual, method, iterations })
}

/// Restarted Rayleigh-Ritz on a Krylov space with full reorthogonalization;
/// iterates until both lowest Ritz pairs meet the residual tolerance.
pub fn ground_state_iterative(
    op: &LinearOperator,
    cfg: &SolverConfig,
    start: Option<&[f64]>,
) -> Result<SpectralResult> {
    let n = op.dim();
    if n < 3 {
        return ground_state_dense(op, cfg);
    }
    let kmax = cfg.krylov_dim.clamp(6, n);
    let keep = 3.min(kmax - 2);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let scale = op.inf_norm().max(1.0);
    let tol = cfg.tol * scale.max(1.0);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut images: Vec<Vec<f64>> = Vec::new();
    let mut v0: Vec<f64> = match start {
        Some(s) => s.to_vec(),
        None => {
            let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
            v[0] += 1.0;
            v
        }
    };
    orthonormalize_against(&basis, &mut v0);
    images.push(op.apply(&v0));
    basis.push(v0);
    let mut best = f64::INFINITY;
    let mut pending: Option<Vec<f64>> = None;
    for it in 0..cfg.max_restarts {
        while basis.len() < kmax {
            let mut w = match pending.take() {
                Some(r) => r,
                None => images.last().unwrap().clone(),
            };
            let nrm = orthonormalize_against(&basis, &mut w);
            if nrm < 1e-13 {
                w = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
                if orthonormalize_against(&basis, &mut w) < 1e-13 {
                    break;
                }
            }
            images.push(op.apply(&w));
            basis.push(w);
        }
        let k = basis.len();
        let t = Mat::<f64>::from_fn(k, k, |i, j| {
            0.5 * (linalg::dot(&basis[i], &images[j]) + linalg::dot(&basis[j], &images[i]))
        });
        let evd = t
            .self_adjoint_eigen(Side::Lower)
            .map_err(|_| LabError::NoConvergence(best))?;
        let theta = evd.S().column_vector();
        let y = evd.U();
        let nk = keep.min(k);
        let mut ritz = Vec::with_capacity(nk);
        let mut ritz_img = Vec::with_capacity(nk);
        for c in 0..nk {
            let mut x = vec![0.0; n];
            let mut ax = vec![0.0; n];
            for j in 0..k {
                let yj = y[(j, c)];
                linalg::axpy(yj, &basis[j], &mut x);
                linalg::axpy(yj, &images[j], &mut ax);
            }
            ritz.push(x);
            ritz_img.push(ax);
        }
        let res: Vec<Vec<f64>> = (0..nk.min(2))
            .map(|c| {
                let mut r = ritz_img[c].clone();
                linalg::axpy(-theta[c], &ritz[c], &mut r);
                r
            })
            .collect();
        let r0 = linalg::norm2(&res[0]);
        let r1 = res.get(1).map(|r| linalg::norm2(r)).unwrap_or(0.0);
        best = best.min(r0.max(r1));
        if (r0 <= tol && r1 <= tol) || k == n {
            let mut ground = ritz[0].clone();
            let nrm = linalg::norm2(&ground);
            ground.iter_mut().for_each(|x| *x /= nrm);
            fix_sign(&mut ground);
            let e1 = if k > 1 { theta[1] } else { f64::INFINITY };
            let rr = residual(op, theta[0], &ground);
            return finish(theta[0], e1, ground, rr, Method::Iterative, it + 1, cfg);
        }
        pending = Some(if r0 > tol { res[0].clone() } else { res[1].clone() });
        basis = ritz;
        images = ritz_img;
        for i in 0..basis.len() {
            let nrm = linalg::norm2(&basis[i]);
            basis[i].iter_mut().for_each(|x| *x /= nrm);
            images[i].iter_mut().for_each(|x| *x /= nrm);
        }
    }
    Err(LabError::NoConvergence(best))
}

fn orthonormalize_against(basis: &[Vec<f64>], w: &mut [f64]) -> f64 {
    for _ in 0..2 {
        for b in basis {
            let c = linalg::dot(b, w);
            linalg::axpy(-c, b, w);
        }
    }
    let nrm = linalg::norm2(w);
    if nrm > 0.0 {
        w.iter_mut().for_each(|x| *x /= nrm);
    }
    nrm
}

fn shifted_dense(op: &LinearOperator, z: c64) -> Mat<c64> {
    let n = op.dim();
    let mut a = Mat::<c64>::zeros(n, n);
    for r in 0..n {
        for (c, v) in op.row(r) {
            a[(r, c)] += c64::new(v, 0.0);
        }
        a[(r, r)] -= z;
    }
    a
}

fn check_solution(op: &LinearOperator, z: c64, x: &[c64], b: &[c64], tol: f64) -> Result<()> {
    let mut r = op.apply_complex(x);
    for i in 0..r.len() {
        r[i] = r[i] - z * x[i] - b[i];
    }
    let bn = linalg::cnorm2(b);
    let xn = linalg::cnorm2(x);
    let rel = linalg::cnorm2(&r) / bn.max(f64::MIN_POSITIVE);
    if !(rel <= tol) || !xn.is_finite() {
        let distance = if xn > 0.0 && xn.is_finite() { bn / xn } else { 0.0 };
        return Err(LabError::NearSingular { z: format!("{z}"), distance });
    }
    Ok(())
}

/// Solves (op - z) x = v.
pub fn resolve(op: &LinearOperator, z: c64, v: &[c64], cfg: &SolverConfig) -> Result<Vec<c64>> {
    let mut out = resolve_many(op, z, &[v.to_vec()], cfg)?;
    Ok(out.pop().unwrap())
}

pub fn resolve_many(op: &LinearOperator, z: c64, vs: &[Vec<c64>], cfg: &SolverConfig) -> Result<Vec<Vec<c64>>> {
    let n = op.dim();
    let xs: Vec<Vec<c64>> = if n <= cfg.dense_max {
        let lu = shifted_dense(op, z).partial_piv_lu();
        let b = Mat::<c64>::from_fn(n, vs.len(), |i, j| vs[j][i]);
        let x = lu.solve(&b);
        (0..vs.len()).map(|j| (0..n).map(|i| x[(i, j)]).collect()).collect()
    } else {
        vs.iter()
            .map(|v| cocg(op, z, v, cfg))
            .collect::<Result<Vec<_>>>()?
    };
    for (x, v) in xs.iter().zip(vs) {
        check_solution(op, z, x, v, 1e3 * cfg.tol.max(1e-13))?;
    }
    Ok(xs)
}

/// Conjugate orthogonal CG for the complex-symmetric system (op - z) x = b.
fn cocg(op: &LinearOperator, z: c64, b: &[c64], cfg: &SolverConfig) -> Result<Vec<c64>> {
    let n = b.len();
    let zero = c64::new(0.0, 0.0);
    let bn = linalg::cnorm2(b);
    if bn == 0.0 {
        return Ok(vec![zero; n]);
    }
    let mut x = vec![zero; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let udot = |a: &[c64], b: &[c64]| a.iter().zip(b).fold(zero, |acc, (x, y)| acc + x * y);
    let mut rho = udot(&r, &r);
    for _ in 0..cfg.max_linear_iter {
        let mut q = op.apply_complex(&p);
        for i in 0..n {
            q[i] -= z * p[i];
        }
        let pq = udot(&p, &q);
        if pq.norm() == 0.0 {
            break;
        }
        let alpha = rho / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        if linalg::cnorm2(&r) <= 0.1 * cfg.tol * bn {
            return Ok(x);
        }
        let rho_new = udot(&r, &r);
        let beta = rho_new / rho;
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    let distance = bn / linalg::cnorm2(&x).max(f64::MIN_POSITIVE);
    Err(LabError::NearSingular { z: format!("{z}"), distance })
}

/// Q v = -(1/2 pi i) \oint (op - z)^{-1} v dz by the trapezoid rule.
pub fn contour_project(op: &LinearOperator, contour: &Contour, v: &[f64], cfg: &SolverConfig) -> Result<Vec<f64>> {
    Ok(contour_project_many(op, contour, &[v.to_vec()], cfg)?.pop().unwrap())
}

/// Projects several real vectors, pairing conjugate nodes when N is even.
pub fn contour_project_many(
    op: &LinearOperator,
    contour: &Contour,
    vs: &[Vec<f64>],
    cfg: &SolverConfig,
) -> Result<Vec<Vec<f64>>> {
    let n = op.dim();
    let nodes = contour.nodes();
    let phases = contour.phases();
    let nq = contour.n_quad;
    if nq % 2 != 0 {
        let full = contour_project_complex(op, contour, vs, cfg)?;
        return Ok(full.into_iter().map(|x| x.into_iter().map(|z| z.re).collect()).collect());
    }
    let rhs: Vec<Vec<c64>> = vs
        .iter()
        .map(|v| v.iter().map(|&x| c64::new(x, 0.0)).collect())
        .collect();
    let mut acc = vec![vec![0.0; n]; vs.len()];
    for j in 0..nq / 2 {
        let xs = resolve_many(op, nodes[j], &rhs, cfg)?;
        let e = phases[j];
        for (a, x) in acc.iter_mut().zip(&xs) {
            for i in 0..n {
                a[i] += 2.0 * (e * x[i]).re;
            }
        }
    }
    let s = -contour.radius / nq as f64;
    Ok(acc.into_iter().map(|a| a.into_iter().map(|x| s * x).collect()).collect())
}

/// Full complex quadrature over every node, without exploiting symmetry.
pub fn contour_project_complex(
    op: &LinearOperator,
    contour: &Contour,
    vs: &[Vec<f64>],
    cfg: &SolverConfig,
) -> Result<Vec<Vec<c64>>> {
    let n = op.dim();
    let rhs: Vec<Vec<c64>> = vs
        .iter()
        .map(|v| v.iter().map(|&x| c64::new(x, 0.0)).collect())
        .collect();
    let mut acc = vec![vec![c64::new(0.0, 0.0); n]; vs.len()];
    for (z, e) in contour.nodes().into_iter().zip(contour.phases()) {
        let xs = resolve_many(op, z, &rhs, cfg)?;
        for (a, x) in acc.iter_mut().zip(&xs) {
            for i in 0..n {
                a[i] += e * x[i];
            }
        }
    }
    let s = -contour.radius / contour.n_quad as f64;
    Ok(acc
        .into_iter()
        .map(|a| a.into_iter().map(|x| x * s).collect())
        .collect())
}

/// Rank-one eigenprojector u0 <u0, v>.
pub fn eigenprojector_apply(u0: &[f64], v: &[f64]) -> Vec<f64> {
    let c = linalg::dot(u0, v);
    u0.iter().map(|x| c * x).collect()
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct NeumannValue {
    pub value: f64,
    pub contracts: bool,
}

/// Dense evaluation of || R^{1/2} V R^{1/2} || with R = (op_prev - z)^{-1}.
pub struct NeumannDiagnostic {
    eigenvalues: Vec<f64>,
    slice_eig: Mat<f64>,
}

impl NeumannDiagnostic {
    pub fn new(op_prev: &LinearOperator, slice_op: &LinearOperator) -> Result<Self> {
        let (vals, u) = dense_eigen(op_prev)?;
        let s = slice_op.to_dense();
        let slice_eig = u.transpose() * &s * &u;
        Ok(Self { eigenvalues: vals, slice_eig })
    }

    /// From a precomputed eigendecomposition of op_prev and a dense slice.
    pub fn from_eigen(eigenvalues: &[f64], u: &Mat<f64>, slice: &Mat<f64>) -> Self {
        Self { eigenvalues: eigenvalues.to_vec(), slice_eig: u.transpose() * slice * u }
    }

    pub fn value(&self, z: c64) -> Result<NeumannValue> {
        let n = self.eigenvalues.len();
        let mut d = Vec::with_capacity(n);
        for &l in &self.eigenvalues {
            let w = c64::new(l, 0.0) - z;
            if w.norm() < 1e-12 {
                return Err(LabError::NearSingular { z: format!("{z}"), distance: w.norm() });
            }
            d.push(w.inv().sqrt());
        }
        let m = Mat::<c64>::from_fn(n, n, |i, j| d[i] * self.slice_eig[(i, j)] * d[j]);
        let sv = m
            .singular_values()
            .map_err(|_| LabError::NoConvergence(f64::NAN))?;
        let value = sv.first().copied().unwrap_or(0.0);
        Ok(NeumannValue { value, contracts: value < 1.0 })
    }
}

pub fn neumann_contraction(op_prev: &LinearOperator, slice_op: &LinearOperator, z: c64) -> Result<NeumannValue> {
    NeumannDiagnostic::new(op_prev, slice_op)?.value(z)
}
