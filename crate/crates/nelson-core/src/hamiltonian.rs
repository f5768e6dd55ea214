//! Fiber Hamiltonians in the bare, free and Gross-transformed forms, their
//! cutoff slices, and the Gross generator data.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::fock::{self, Cursor, FockBasis, Mode, ShellLabel};
use crate::linalg::LinearOperator;
use crate::schedule;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Bare,
    Free,
    Gross,
}

#[derive(Clone, Debug)]
pub struct FiberHamiltonian {
    pub p: [f64; 3],
    pub uv_n: usize,
    pub ir_m: usize,
    pub g: f64,
    pub kappa: f64,
    pub variant: Variant,
    pub op: LinearOperator,
    /// Continuum self-energy for the UV cutoff in force.
    pub vself: f64,
    /// Quadrature self-energy over the grid's UV modes.
    pub vself_discrete: f64,
}

/// beta(k) = -g rho(k) / (k^2/2 + |k|).
pub fn gross_beta(mode: &Mode, g: f64) -> f64 {
    let w = mode.omega();
    -g * mode.rho() / (0.5 * w * w + w)
}

/// Per-mode coupling vectors c_i = sqrt(w_i) k_i beta(k_i) for the selected modes.
fn couplings<S: Fn(ShellLabel) -> bool>(basis: &FockBasis, g: f64, select: S) -> Vec<(usize, [f64; 3])> {
    basis
        .modes
        .iter()
        .enumerate()
        .filter(|(_, m)| select(m.shell))
        .map(|(i, m)| {
            let s = m.w.sqrt() * gross_beta(m, g);
            (i, [s * m.k[0], s * m.k[1], s * m.k[2]])
        })
        .filter(|(_, c)| c.iter().any(|&x| x != 0.0))
        .collect()
}

fn ir_field<S: Fn(ShellLabel) -> bool>(basis: &FockBasis, g: f64, select: S) -> Vec<(usize, f64)> {
    basis
        .modes
        .iter()
        .enumerate()
        .filter(|(_, m)| m.shell.is_ir() && select(m.shell))
        .map(|(i, m)| (i, g * m.w.sqrt() * m.rho()))
        .filter(|&(_, c)| c != 0.0)
        .collect()
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn field_momentum(basis: &FockBasis, occ: &[u8]) -> [f64; 3] {
    let mut pf = [0.0; 3];
    for (i, &n) in occ.iter().enumerate() {
        if n > 0 {
            let k = basis.modes[i].k;
            for a in 0..3 {
                pf[a] += n as f64 * k[a];
            }
        }
    }
    pf
}

/// Term generators acting on one basis column.
struct Terms<'b> {
    basis: &'b FockBasis,
    p: [f64; 3],
}

impl Terms<'_> {
    fn push(cur: &Cursor<'_>, out: &mut Vec<(usize, f64)>, v: f64) {
        if let Some(r) = cur.rank() {
            if v != 0.0 {
                out.push((r, v));
            }
        }
    }

    fn x_of(&self, occ: &[u8]) -> [f64; 3] {
        let pf = field_momentum(self.basis, occ);
        [self.p[0] - pf[0], self.p[1] - pf[1], self.p[2] - pf[2]]
    }

    /// (1/2)(P - Pf)^2 + Hf.
    fn free_diag(&self, occ: &[u8], cur: &Cursor<'_>, out: &mut Vec<(usize, f64)>) {
        let x = self.x_of(occ);
        let mut hf = 0.0;
        for (i, &n) in occ.iter().enumerate() {
            hf += n as f64 * self.basis.modes[i].omega();
        }
        Self::push(cur, out, 0.5 * dot3(&x, &x) + hf);
    }

    /// coef * sum_{i in a, j in b} (c_i . c_j) b_i b_j.
    fn bb(&self, a: &[(usize, [f64; 3])], b: &[(usize, [f64; 3])], coef: f64, cur: &mut Cursor<'_>, out: &mut Vec<(usize, f64)>) {
        for &(i, ci) in a {
            let Some(a1) = cur.lower(i) else { continue };
            for &(j, cj) in b {
                if let Some(a2) = cur.lower(j) {
                    Self::push(cur, out, coef * dot3(&ci, &cj) * a1 * a2);
                    cur.undo_lower(j);
                }
            }
            cur.undo_lower(i);
        }
    }

    /// coef * sum (c_i . c_j) b_i^dagger b_j^dagger.
    fn bdbd(&self, a: &[(usize, [f64; 3])], b: &[(usize, [f64; 3])], coef: f64, cur: &mut Cursor<'_>, out: &mut Vec<(usize, f64)>) {
        for &(j, cj) in b {
            let a1 = cur.raise(j);
            for &(i, ci) in a {
                let a2 = cur.raise(i);
                Self::push(cur, out, coef * dot3(&ci, &cj) * a1 * a2);
                cur.undo_raise(i);
            }
            cur.undo_raise(j);
        }
    }

    /// coef * sum (c_i . c_j) b_i^dagger b_j.
    fn bdb(&self, a: &[(usize, [f64; 3])], b: &[(usize, [f64; 3])], coef: f64, cur: &mut Cursor<'_>, out: &mut Vec<(usize, f64)>) {
        for &(j, cj) in b {
            let Some(a1) = cur.lower(j) else { continue };
            for &(i, ci) in a {
                let a2 = cur.raise(i);
                Self::push(cur, out, coef * dot3(&ci, &cj) * a1 * a2);
                cur.undo_raise(i);
            }
            cur.undo_lower(j);
        }
    }

    /// coef * (P - Pf) . B with B = sum c_j b_j.
    fn xb(&self, occ: &[u8], c: &[(usize, [f64; 3])], coef: f64, cur: &mut Cursor<'_>, out: &mut Vec<(usize, f64)>) {
        let x = self.x_of(occ);
        for &(j, cj) in c {
            let Some(a) = cur.lower(j) else { continue };
            let k = self.basis.modes[j].k;
            let xs = [x[0] + k[0], x[1] + k[1], x[2] + k[2]];
            Self::push(cur, out, coef * dot3(&xs, &cj) * a);
            cur.undo_lower(j);
        }
    }

    /// coef * B^dagger . (P - Pf).
    fn bdx(&self, occ: &[u8], c: &[(usize, [f64; 3])], coef: f64, cur: &mut Cursor<'_>, out: &mut Vec<(usize, f64)>) {
        let x = self.x_of(occ);
        for &(j, cj) in c {
            let a = cur.raise(j);
            Self::push(cur, out, coef * dot3(&x, &cj) * a);
            cur.undo_raise(j);
        }
    }

    /// sum f_i (b_i + b_i^dagger).
    fn phi(&self, f: &[(usize, f64)], cur: &mut Cursor<'_>, out: &mut Vec<(usize, f64)>) {
        for &(i, c) in f {
            if let Some(a) = cur.lower(i) {
                Self::push(cur, out, c * a);
                cur.undo_lower(i);
            }
            let a = cur.raise(i);
            Self::push(cur, out, c * a);
            cur.undo_raise(i);
        }
    }
}

fn check_shells(basis: &FockBasis, uv_n: usize, ir_m: usize) -> Result<()> {
    for n in 1..=uv_n {
        if !basis.modes.iter().any(|m| m.shell == ShellLabel::Uv(n)) {
            return Err(LabError::MissingShell(format!("UV{n} is not active in the basis")));
        }
    }
    for m in 1..=ir_m {
        if !basis.modes.iter().any(|md| md.shell == ShellLabel::Ir(m)) {
            return Err(LabError::MissingShell(format!("IR{m} is not active in the basis")));
        }
    }
    Ok(())
}

/// Discrete self-energy -(g^2/(2(2pi)^3)) sum_i w_i / (omega_i (omega_i^2/2 + omega_i)) over UV modes up to slice n.
pub fn vself_discrete(basis: &FockBasis, g: f64, uv_n: usize) -> f64 {
    let s: f64 = basis
        .modes
        .iter()
        .filter(|m| m.shell.is_uv() && m.shell.within(uv_n, 0))
        .map(|m| {
            let w = m.omega();
            m.w / (w * (0.5 * w * w + w))
        })
        .sum();
    -g * g / (2.0 * (2.0 * PI).powi(3)) * s
}

fn vself_for(kappa: f64, beta: f64, g: f64, uv_n: usize) -> f64 {
    schedule::vself(schedule::sigma(kappa, beta, uv_n), kappa, g).unwrap_or(f64::NAN)
}

/// Cutoff and coupling data shared by the assemblers.
#[derive(Clone, Copy, Debug)]
pub struct Cutoffs {
    pub p: [f64; 3],
    pub g: f64,
    pub kappa: f64,
    pub beta: f64,
    pub uv_n: usize,
    pub ir_m: usize,
}

pub fn assemble(basis: &FockBasis, c: &Cutoffs, variant: Variant) -> Result<FiberHamiltonian> {
    match variant {
        Variant::Bare => assemble_bare(basis, c),
        Variant::Free => assemble_free(basis, c),
        Variant::Gross => assemble_gross(basis, c),
    }
}

fn wrap(basis: &FockBasis, c: &Cutoffs, variant: Variant, op: LinearOperator) -> FiberHamiltonian {
    FiberHamiltonian {
        p: c.p,
        uv_n: c.uv_n,
        ir_m: c.ir_m,
        g: c.g,
        kappa: c.kappa,
        variant,
        op,
        vself: vself_for(c.kappa, c.beta, c.g, c.uv_n),
        vself_discrete: vself_discrete(basis, c.g, c.uv_n),
    }
}

/// H_{P,0} = (1/2)(P - Pf)^2 + Hf.
pub fn assemble_free(basis: &FockBasis, c: &Cutoffs) -> Result<FiberHamiltonian> {
    check_shells(basis, c.uv_n, c.ir_m)?;
    let t = Terms { basis, p: c.p };
    let op = basis.build(true, |occ, cur, out| t.free_diag(occ, cur, out));
    Ok(wrap(basis, c, Variant::Free, op))
}

/// H_P = (1/2)(P - Pf)^2 + Hf + g Phi over all switched-on slices.
pub fn assemble_bare(basis: &FockBasis, c: &Cutoffs) -> Result<FiberHamiltonian> {
    check_shells(basis, c.uv_n, c.ir_m)?;
    let t = Terms { basis, p: c.p };
    let f: Vec<(usize, f64)> = basis
        .modes
        .iter()
        .enumerate()
        .filter(|(_, m)| m.shell.within(c.uv_n, c.ir_m))
        .map(|(i, m)| (i, c.g * m.w.sqrt() * m.rho()))
        .filter(|&(_, v)| v != 0.0)
        .collect();
    let op = basis.build(true, |occ, cur, out| {
        t.free_diag(occ, cur, out);
        t.phi(&f, cur, out);
    });
    Ok(wrap(basis, c, Variant::Bare, op))
}

/// H'_P = (1/2)(P-Pf)^2 + Hf + (1/2)(B^2 + B*^2) + B*.B - (P-Pf).B - B*.(P-Pf) + g Phi_IR.
pub fn assemble_gross(basis: &FockBasis, c: &Cutoffs) -> Result<FiberHamiltonian> {
    check_shells(basis, c.uv_n, c.ir_m)?;
    let t = Terms { basis, p: c.p };
    let uv = couplings(basis, c.g, |s| s.is_uv() && s.within(c.uv_n, 0));
    let ir = ir_field(basis, c.g, |s| s.within(0, c.ir_m));
    let op = basis.build(true, |occ, cur, out| {
        t.free_diag(occ, cur, out);
        t.bb(&uv, &uv, 0.5, cur, out);
        t.bdbd(&uv, &uv, 0.5, cur, out);
        t.bdb(&uv, &uv, 1.0, cur, out);
        t.xb(occ, &uv, -1.0, cur, out);
        t.bdx(occ, &uv, -1.0, cur, out);
        t.phi(&ir, cur, out);
    });
    Ok(wrap(basis, c, Variant::Gross, op))
}

/// Delta H' between UV cutoffs n-1 and n, from the nine normal-ordered terms
/// in B_new = B over slice n and B_old = B over slices below n.
pub fn uv_slice_op(basis: &FockBasis, p: [f64; 3], g: f64, n: usize) -> Result<LinearOperator> {
    if n == 0 {
        return Err(LabError::Domain("UV slice index starts at 1".into()));
    }
    check_shells(basis, n, 0)?;
    let t = Terms { basis, p };
    let new = couplings(basis, g, |s| s == ShellLabel::Uv(n));
    let old = couplings(basis, g, |s| s.is_uv() && s.within(n - 1, 0));
    Ok(basis.build(true, |occ, cur, out| {
        t.bb(&new, &new, 0.5, cur, out);
        t.bdbd(&new, &new, 0.5, cur, out);
        t.bb(&old, &new, 1.0, cur, out);
        t.bdbd(&new, &old, 1.0, cur, out);
        t.xb(occ, &new, -1.0, cur, out);
        t.bdx(occ, &new, -1.0, cur, out);
        t.bdb(&new, &new, 1.0, cur, out);
        t.bdb(&old, &new, 1.0, cur, out);
        t.bdb(&new, &old, 1.0, cur, out);
    }))
}

/// g Phi restricted to IR slice m.
pub fn ir_slice_op(basis: &FockBasis, g: f64, m: usize) -> Result<LinearOperator> {
    if m == 0 {
        return Err(LabError::Domain("IR slice index starts at 1".into()));
    }
    check_shells(basis, 0, m)?;
    let f = ir_field(basis, g, |s| s == ShellLabel::Ir(m));
    let t = Terms { basis, p: [0.0; 3] };
    Ok(basis.build(true, |_, cur, out| t.phi(&f, cur, out)))
}

/// Reassembles `h` at total momentum P - k on the same basis.
pub fn shift_momentum(basis: &FockBasis, h: &FiberHamiltonian, k: [f64; 3], beta: f64) -> Result<FiberHamiltonian> {
    let c = Cutoffs {
        p: [h.p[0] - k[0], h.p[1] - k[1], h.p[2] - k[2]],
        g: h.g,
        kappa: h.kappa,
        beta,
        uv_n: h.uv_n,
        ir_m: h.ir_m,
    };
    assemble(basis, &c, h.variant)
}

#[derive(Clone, Debug)]
pub struct GrossData {
    /// beta(k_i) per active mode, zero outside the UV slices in force.
    pub beta_coeff: Vec<f64>,
    /// Skew generator T = sum sqrt(w) beta (b - b*).
    pub t: LinearOperator,
    /// Annihilation parts B^(a) = sum sqrt(w) k^a beta b.
    pub b: [LinearOperator; 3],
    pub vself: f64,
    pub vself_discrete: f64,
    /// S = (1/2)([B, P-Pf] + [P-Pf, B*] - [B, B*]), normal ordered.
    pub s: LinearOperator,
}

pub fn assemble_gross_data(basis: &FockBasis, g: f64, kappa: f64, beta: f64, uv_n: usize) -> Result<GrossData> {
    check_shells(basis, uv_n, 0)?;
    let uv = |s: ShellLabel| s.is_uv() && s.within(uv_n, 0);
    let beta_coeff = basis
        .modes
        .iter()
        .map(|m| if uv(m.shell) { gross_beta(m, g) } else { 0.0 })
        .collect();
    let t = fock::field_op_antisymmetric(basis, |m| gross_beta(m, g), uv);
    let b = [0, 1, 2].map(|a| fock::lowering_op(basis, |m| m.k[a] * gross_beta(m, g), uv));
    let cs = couplings(basis, g, uv);
    let constant: f64 = -0.5 * cs.iter().map(|(_, c)| dot3(c, c)).sum::<f64>();
    let lin: Vec<(usize, f64)> = cs
        .iter()
        .map(|&(i, c)| (i, -0.5 * dot3(&c, &basis.modes[i].k)))
        .collect();
    let tt = Terms { basis, p: [0.0; 3] };
    let s = basis.build(true, |_, cur, out| {
        Terms::push(cur, out, constant);
        tt.phi(&lin, cur, out);
    });
    Ok(GrossData {
        beta_coeff,
        t,
        b,
        vself: vself_for(kappa, beta, g, uv_n),
        vself_discrete: vself_discrete(basis, g, uv_n),
        s,
    })
}

impl GrossData {
    /// B + B* for component a.
    pub fn b_plus_bdag(&self, a: usize) -> LinearOperator {
        self.b[a].add_scaled(&self.b[a].transpose(), 1.0).with_hermitian_flag(true)
    }
}
