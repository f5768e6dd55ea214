//! Momentum grids organised into cutoff shells, truncated occupation bases
//! and the elementary second-quantised operators on them.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::linalg::LinearOperator;
use crate::schedule::CutoffSchedule;

/// Default refusal threshold for basis enumeration.
pub const BASIS_HARD_LIMIT: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ShellLabel {
    /// UV slice n, momenta in [sigma_{n-1}, sigma_n).
    Uv(usize),
    /// IR slice m, momenta in (tau_m, tau_{m-1}].
    Ir(usize),
}

impl ShellLabel {
    /// Signed encoding used on disk: +n for UV slices, -m for IR slices.
    pub fn code(self) -> i64 {
        match self {
            ShellLabel::Uv(n) => n as i64,
            ShellLabel::Ir(m) => -(m as i64),
        }
    }

    pub fn from_code(c: i64) -> Result<Self> {
        match c {
            c if c > 0 => Ok(ShellLabel::Uv(c as usize)),
            c if c < 0 => Ok(ShellLabel::Ir((-c) as usize)),
            _ => Err(LabError::Input("shell code 0 is not a valid slice".into())),
        }
    }

    pub fn is_uv(self) -> bool {
        matches!(self, ShellLabel::Uv(_))
    }

    pub fn is_ir(self) -> bool {
        matches!(self, ShellLabel::Ir(_))
    }

    /// Whether the slice is switched on at cutoffs (n, m).
    pub fn within(self, uv_n: usize, ir_m: usize) -> bool {
        match self {
            ShellLabel::Uv(n) => n <= uv_n,
            ShellLabel::Ir(m) => m <= ir_m,
        }
    }
}

impl fmt::Display for ShellLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShellLabel::Uv(n) => write!(f, "UV{n}"),
            ShellLabel::Ir(m) => write!(f, "IR{m}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AngularSet {
    #[serde(rename = "axes6")]
    Axes6,
    #[serde(rename = "cube8+axes6")]
    Cube8Axes6,
}

impl AngularSet {
    /// Unit directions with weights summing to one.
    pub fn directions(self) -> Vec<([f64; 3], f64)> {
        let mut out = Vec::new();
        let axis_w = match self {
            AngularSet::Axes6 => 1.0 / 6.0,
            AngularSet::Cube8Axes6 => 1.0 / 15.0,
        };
        for a in 0..3 {
            for s in [1.0, -1.0] {
                let mut d = [0.0; 3];
                d[a] = s;
                out.push((d, axis_w));
            }
        }
        if self == AngularSet::Cube8Axes6 {
            let c = 1.0 / 3f64.sqrt();
            for sx in [1.0, -1.0] {
                for sy in [1.0, -1.0] {
                    for sz in [1.0, -1.0] {
                        out.push(([sx * c, sy * c, sz * c], 3.0 / 40.0));
                    }
                }
            }
        }
        out
    }

    pub fn len(self) -> usize {
        match self {
            AngularSet::Axes6 => 6,
            AngularSet::Cube8Axes6 => 14,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mode {
    pub k: [f64; 3],
    /// Momentum-space volume carried by the node.
    pub w: f64,
    pub shell: ShellLabel,
}

impl Mode {
    pub fn omega(&self) -> f64 {
        (self.k[0] * self.k[0] + self.k[1] * self.k[1] + self.k[2] * self.k[2]).sqrt()
    }

    pub fn rho(&self) -> f64 {
        rho(self.omega())
    }

    pub fn khat(&self) -> [f64; 3] {
        let w = self.omega();
        [self.k[0] / w, self.k[1] / w, self.k[2] / w]
    }
}

/// rho(k) = (2 pi)^{-3/2} (2 |k|)^{-1/2}.
pub fn rho(omega: f64) -> f64 {
    (2.0 * PI).powf(-1.5) / (2.0 * omega).sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModeGrid {
    pub modes: Vec<Mode>,
    pub n_uv: usize,
    pub m_ir: usize,
    pub radial_per_slice: usize,
    pub angular: AngularSet,
    /// Shell boundaries [r_lo, r_hi] in slice order.
    pub bounds: Vec<(ShellLabel, f64, f64)>,
}

impl ModeGrid {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn shells(&self) -> Vec<ShellLabel> {
        self.bounds.iter().map(|b| b.0).collect()
    }

    pub fn shell_indices(&self, label: ShellLabel) -> Vec<usize> {
        (0..self.modes.len()).filter(|&i| self.modes[i].shell == label).collect()
    }

    pub fn counts(&self) -> Vec<(ShellLabel, usize)> {
        self.shells()
            .into_iter()
            .map(|s| (s, self.shell_indices(s).len()))
            .collect()
    }

    pub fn shell_volume(&self, label: ShellLabel) -> Option<f64> {
        self.bounds
            .iter()
            .find(|b| b.0 == label)
            .map(|&(_, lo, hi)| 4.0 * PI / 3.0 * (hi.powi(3) - lo.powi(3)))
    }

    /// Modes active at cutoffs (n, m).
    pub fn active(&self, uv_n: usize, ir_m: usize) -> Result<Vec<usize>> {
        if uv_n > self.n_uv {
            return Err(LabError::MissingShell(format!("UV{uv_n} (grid has {})", self.n_uv)));
        }
        if ir_m > self.m_ir {
            return Err(LabError::MissingShell(format!("IR{ir_m} (grid has {})", self.m_ir)));
        }
        Ok((0..self.modes.len())
            .filter(|&i| self.modes[i].shell.within(uv_n, ir_m))
            .collect())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let modes: Vec<serde_json::Value> = self
            .modes
            .iter()
            .map(|m| serde_json::json!([m.k[0], m.k[1], m.k[2], m.w, m.shell.code()]))
            .collect();
        serde_json::json!({
            "n_uv": self.n_uv,
            "m_ir": self.m_ir,
            "radial_per_slice": self.radial_per_slice,
            "angular": self.angular,
            "modes": modes,
        })
    }
}

pub fn build_mode_grid(
    schedule: &CutoffSchedule,
    n_uv: usize,
    m_ir: usize,
    radial_per_slice: usize,
    angular: AngularSet,
) -> Result<ModeGrid> {
    if radial_per_slice == 0 {
        return Err(LabError::Domain("radial_per_slice must be at least 1".into()));
    }
    let mut bounds = Vec::new();
    for n in 1..=n_uv {
        bounds.push((ShellLabel::Uv(n), schedule.sigma(n - 1), schedule.sigma(n)));
    }
    for m in 1..=m_ir {
        bounds.push((ShellLabel::Ir(m), schedule.tau(m), schedule.tau(m - 1)));
    }
    let dirs = angular.directions();
    let mut modes = Vec::new();
    for &(label, lo, hi) in &bounds {
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() || lo <= 0.0 {
            return Err(LabError::EmptyShell(format!("{label} with bounds [{lo}, {hi}]")));
        }
        let (u0, u1) = (lo.powi(3), hi.powi(3));
        let du = (u1 - u0) / radial_per_slice as f64;
        for j in 0..radial_per_slice {
            let ua = u0 + du * j as f64;
            let ub = if j + 1 == radial_per_slice { u1 } else { ua + du };
            let r = (0.5 * (ua + ub)).cbrt();
            let vol = 4.0 * PI / 3.0 * (ub - ua);
            for &(d, aw) in &dirs {
                modes.push(Mode {
                    k: [r * d[0], r * d[1], r * d[2]],
                    w: vol * aw,
                    shell: label,
                });
            }
        }
    }
    Ok(ModeGrid { modes, n_uv, m_ir, radial_per_slice, angular, bounds })
}

/// Number of occupation vectors over `m` modes with total at most `n`.
pub fn basis_dimension(m: usize, n: usize) -> u128 {
    let mut c: u128 = 1;
    for j in 1..=n as u128 {
        c = c * (m as u128 + j) / j;
    }
    c
}

/// Truncated occupation-number basis over a list of active modes.
#[derive(Clone, Debug)]
pub struct FockBasis {
    pub modes: Vec<Mode>,
    /// Grid index of each active mode.
    pub grid_index: Vec<usize>,
    pub n_max: usize,
    pub per_mode_cap: Option<usize>,
    states: Vec<u8>,
    dim: usize,
    /// completions[p][r]: vectors over modes p.. with total at most r.
    completions: Vec<Vec<u64>>,
}

impl FockBasis {
    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn occupation(&self, idx: usize) -> &[u8] {
        let m = self.modes.len();
        &self.states[idx * m..(idx + 1) * m]
    }

    pub fn total(&self, idx: usize) -> usize {
        self.occupation(idx).iter().map(|&x| x as usize).sum()
    }

    fn cap(&self) -> usize {
        self.per_mode_cap.unwrap_or(self.n_max).min(self.n_max)
    }

    /// Lexicographic rank of an occupation vector, or None outside the basis.
    pub fn rank(&self, occ: &[u8]) -> Option<usize> {
        let m = self.modes.len();
        if occ.len() != m {
            return None;
        }
        let cap = self.cap();
        let mut remaining = self.n_max;
        let mut idx: u64 = 0;
        for (p, &v) in occ.iter().enumerate() {
            let v = v as usize;
            if v > remaining || v > cap {
                return None;
            }
            for u in 0..v {
                idx += self.completions[p + 1][remaining - u];
            }
            remaining -= v;
        }
        Some(idx as usize)
    }

    pub fn unrank(&self, idx: usize) -> Option<Vec<u8>> {
        (idx < self.dim).then(|| self.occupation(idx).to_vec())
    }

    pub fn vacuum(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        v[0] = 1.0;
        v
    }

    /// Local position of a grid mode, if active.
    pub fn local(&self, grid_idx: usize) -> Option<usize> {
        self.grid_index.iter().position(|&g| g == grid_idx)
    }

    /// Indices of basis states with total occupation at most `n`.
    pub fn block(&self, n: usize) -> Vec<usize> {
        (0..self.dim).filter(|&i| self.total(i) <= n).collect()
    }

    /// Builds an operator column by column: `f(occ, cursor, out)` pushes
    /// (row, value) pairs for the image of basis state `occ`.
    pub fn build<F>(&self, hermitian: bool, mut f: F) -> LinearOperator
    where
        F: FnMut(&[u8], &mut Cursor<'_>, &mut Vec<(usize, f64)>),
    {
        let mut triplets = Vec::new();
        let mut cursor = Cursor { basis: self, scratch: vec![0; self.modes.len()] };
        let mut out = Vec::new();
        for col in 0..self.dim {
            out.clear();
            let occ = self.occupation(col);
            cursor.scratch.copy_from_slice(occ);
            f(occ, &mut cursor, &mut out);
            for &(row, v) in &out {
                triplets.push((row, col, v));
            }
        }
        LinearOperator::from_triplets(self.dim, triplets, hermitian)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "grid_index": self.grid_index,
            "n_max": self.n_max,
            "per_mode_cap": self.per_mode_cap,
            "dim": self.dim,
        })
    }
}

/// Scratch occupation vector used while generating matrix elements.
pub struct Cursor<'a> {
    basis: &'a FockBasis,
    pub scratch: Vec<u8>,
}

impl Cursor<'_> {
    /// Applies b_i (amplitude sqrt(n_i)) to the scratch state.
    pub fn lower(&mut self, i: usize) -> Option<f64> {
        let n = self.scratch[i];
        if n == 0 {
            return None;
        }
        self.scratch[i] = n - 1;
        Some((n as f64).sqrt())
    }

    /// Applies b_i^dagger (amplitude sqrt(n_i + 1)) to the scratch state.
    pub fn raise(&mut self, i: usize) -> f64 {
        self.scratch[i] += 1;
        (self.scratch[i] as f64).sqrt()
    }

    pub fn undo_lower(&mut self, i: usize) {
        self.scratch[i] += 1;
    }

    pub fn undo_raise(&mut self, i: usize) {
        self.scratch[i] -= 1;
    }

    /// Rank of the scratch state, None if it left the truncated space.
    pub fn rank(&self) -> Option<usize> {
        self.basis.rank(&self.scratch)
    }
}

pub fn enumerate_basis(grid: &ModeGrid, active: &[usize], n_max: usize) -> Result<FockBasis> {
    enumerate_basis_capped(grid, active, n_max, None, BASIS_HARD_LIMIT)
}

pub fn enumerate_basis_capped(
    grid: &ModeGrid,
    active: &[usize],
    n_max: usize,
    per_mode_cap: Option<usize>,
    limit: usize,
) -> Result<FockBasis> {
    if n_max > u8::MAX as usize {
        return Err(LabError::Domain(format!("N_max {n_max} exceeds 255")));
    }
    for &i in active {
        if i >= grid.len() {
            return Err(LabError::Domain(format!("mode {i} outside grid of {}", grid.len())));
        }
    }
    let m = active.len();
    let cap = per_mode_cap.unwrap_or(n_max).min(n_max);
    let mut completions = vec![vec![0u64; n_max + 1]; m + 1];
    for r in 0..=n_max {
        completions[m][r] = 1;
    }
    for p in (0..m).rev() {
        for r in 0..=n_max {
            let mut acc: u64 = 0;
            for v in 0..=cap.min(r) {
                acc = acc.saturating_add(completions[p + 1][r - v]);
            }
            completions[p][r] = acc;
        }
    }
    let dim = completions[0][n_max];
    if dim > limit as u64 {
        return Err(LabError::BasisTooLarge { dim: dim as usize, limit });
    }
    let dim = dim as usize;
    let mut states = Vec::with_capacity(dim * m);
    let mut cur = vec![0u8; m];
    enumerate_rec(0, n_max, cap, &mut cur, &mut states);
    debug_assert_eq!(states.len(), dim * m);
    Ok(FockBasis {
        modes: active.iter().map(|&i| grid.modes[i]).collect(),
        grid_index: active.to_vec(),
        n_max,
        per_mode_cap,
        states,
        dim,
        completions,
    })
}

fn enumerate_rec(p: usize, remaining: usize, cap: usize, cur: &mut Vec<u8>, out: &mut Vec<u8>) {
    if p == cur.len() {
        out.extend_from_slice(cur);
        return;
    }
    for v in 0..=cap.min(remaining) {
        cur[p] = v as u8;
        enumerate_rec(p + 1, remaining - v, cap, cur, out);
    }
    cur[p] = 0;
}

/// Moves a vector between bases over nested mode sets: components whose
/// occupation pattern exists in `to` are copied, all others are dropped.
pub fn transfer(from: &FockBasis, to: &FockBasis, v: &[f64]) -> Vec<f64> {
    assert_eq!(v.len(), from.dim());
    let pos: HashMap<usize, usize> =
        to.grid_index.iter().enumerate().map(|(p, &g)| (g, p)).collect();
    let map: Vec<Option<usize>> = from.grid_index.iter().map(|g| pos.get(g).copied()).collect();
    let mut out = vec![0.0; to.dim()];
    let mut occ = vec![0u8; to.mode_count()];
    'states: for (idx, &val) in v.iter().enumerate() {
        if val == 0.0 {
            continue;
        }
        occ.iter_mut().for_each(|x| *x = 0);
        for (p, &n) in from.occupation(idx).iter().enumerate() {
            if n == 0 {
                continue;
            }
            match map[p] {
                Some(q) => occ[q] = n,
                None => continue 'states,
            }
        }
        if let Some(r) = to.rank(&occ) {
            out[r] += val;
        }
    }
    out
}

pub fn annihilation(basis: &FockBasis, i: usize) -> LinearOperator {
    assert!(i < basis.mode_count());
    basis.build(false, |_, cur, out| {
        if let Some(a) = cur.lower(i) {
            if let Some(r) = cur.rank() {
                out.push((r, a));
            }
            cur.undo_lower(i);
        }
    })
}

pub fn creation(basis: &FockBasis, i: usize) -> LinearOperator {
    annihilation(basis, i).transpose()
}

pub fn number(basis: &FockBasis, i: usize) -> LinearOperator {
    let d: Vec<f64> = (0..basis.dim()).map(|s| basis.occupation(s)[i] as f64).collect();
    LinearOperator::diagonal(&d)
}

pub struct FreeFieldOps {
    pub hf: LinearOperator,
    pub pf: [LinearOperator; 3],
    pub n_shell: Vec<(ShellLabel, LinearOperator)>,
}

pub fn free_field_ops(basis: &FockBasis) -> FreeFieldOps {
    let dim = basis.dim();
    let mut hf = vec![0.0; dim];
    let mut pf = [vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]];
    let mut labels: Vec<ShellLabel> = basis.modes.iter().map(|m| m.shell).collect();
    labels.sort();
    labels.dedup();
    let mut ns = vec![vec![0.0; dim]; labels.len()];
    for s in 0..dim {
        for (p, &n) in basis.occupation(s).iter().enumerate() {
            if n == 0 {
                continue;
            }
            let mode = &basis.modes[p];
            let n = n as f64;
            hf[s] += n * mode.omega();
            for a in 0..3 {
                pf[a][s] += n * mode.k[a];
            }
            let li = labels.binary_search(&mode.shell).unwrap();
            ns[li][s] += n;
        }
    }
    FreeFieldOps {
        hf: LinearOperator::diagonal(&hf),
        pf: pf.map(|d| LinearOperator::diagonal(&d)),
        n_shell: labels
            .into_iter()
            .zip(ns)
            .map(|(l, d)| (l, LinearOperator::diagonal(&d)))
            .collect(),
    }
}

/// Sum over selected modes of sqrt(w_i) f(k_i) (b_i + b_i^dagger).
pub fn field_op<F, S>(basis: &FockBasis, coefficient: F, select: S) -> LinearOperator
where
    F: Fn(&Mode) -> f64,
    S: Fn(ShellLabel) -> bool,
{
    linear_op(basis, coefficient, select, 1.0)
}

/// Sum over selected modes of sqrt(w_i) f(k_i) (b_i - b_i^dagger).
pub fn field_op_antisymmetric<F, S>(basis: &FockBasis, coefficient: F, select: S) -> LinearOperator
where
    F: Fn(&Mode) -> f64,
    S: Fn(ShellLabel) -> bool,
{
    linear_op(basis, coefficient, select, -1.0).with_hermitian_flag(false)
}

/// Sum over selected modes of sqrt(w_i) f(k_i) b_i.
pub fn lowering_op<F, S>(basis: &FockBasis, coefficient: F, select: S) -> LinearOperator
where
    F: Fn(&Mode) -> f64,
    S: Fn(ShellLabel) -> bool,
{
    linear_op(basis, coefficient, select, 0.0).with_hermitian_flag(false)
}

fn linear_op<F, S>(basis: &FockBasis, coefficient: F, select: S, raise_sign: f64) -> LinearOperator
where
    F: Fn(&Mode) -> f64,
    S: Fn(ShellLabel) -> bool,
{
    let coef: Vec<f64> = basis
        .modes
        .iter()
        .map(|m| if select(m.shell) { coefficient(m) } else { 0.0 })
        .collect();
    indexed_linear_op(basis, &coef, raise_sign)
}

/// Sum over modes of sqrt(w_i) f_i (b_i + s b_i^dagger) for per-mode values f_i;
/// s = 1 is hermitian, s = -1 skew, s = 0 keeps the lowering part only.
pub fn indexed_linear_op(basis: &FockBasis, f: &[f64], raise_sign: f64) -> LinearOperator {
    assert_eq!(f.len(), basis.mode_count());
    let coef: Vec<(usize, f64)> = basis
        .modes
        .iter()
        .zip(f)
        .enumerate()
        .map(|(i, (m, &v))| (i, m.w.sqrt() * v))
        .filter(|&(_, c)| c != 0.0)
        .collect();
    basis.build(raise_sign == 1.0, |_, cur, out| {
        for &(i, c) in &coef {
            if let Some(a) = cur.lower(i) {
                if let Some(r) = cur.rank() {
                    out.push((r, c * a));
                }
                cur.undo_lower(i);
            }
            if raise_sign != 0.0 {
                let a = cur.raise(i);
                if let Some(r) = cur.rank() {
                    out.push((r, raise_sign * c * a));
                }
                cur.undo_raise(i);
            }
        }
    })
}
