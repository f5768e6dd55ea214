//! Sparse real operators and small dense helpers.

use faer::{c64, Mat, MatRef};

/// Real sparse matrix in compressed-row form.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearOperator {
    dim: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    hermitian: bool,
}

impl LinearOperator {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            indptr: vec![0; dim + 1],
            indices: Vec::new(),
            values: Vec::new(),
            hermitian: true,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut t = Vec::with_capacity(d.len());
        for (i, &v) in d.iter().enumerate() {
            t.push((i, i, v));
        }
        Self::from_triplets(d.len(), t, true)
    }

    /// Builds an operator from (row, col, value) entries; duplicates are summed
    /// and exact zeros dropped.
    pub fn from_triplets(dim: usize, mut t: Vec<(usize, usize, f64)>, hermitian: bool) -> Self {
        t.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; dim + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut values: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            assert!(r < dim && c < dim, "entry ({r},{c}) outside dimension {dim}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..dim {
            indptr[i + 1] += indptr[i];
        }
        let mut op = Self { dim, indptr, indices, values, hermitian };
        op.prune();
        op
    }

    fn prune(&mut self) {
        if self.values.iter().all(|&v| v != 0.0) {
            return;
        }
        let mut indptr = vec![0usize; self.dim + 1];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut values = Vec::with_capacity(self.values.len());
        for r in 0..self.dim {
            for k in self.indptr[r]..self.indptr[r + 1] {
                if self.values[k] != 0.0 {
                    indices.push(self.indices[k]);
                    values.push(self.values[k]);
                }
            }
            indptr[r + 1] = indices.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.values = values;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_hermitian_flagged(&self) -> bool {
        self.hermitian
    }

    pub fn with_hermitian_flag(mut self, flag: bool) -> Self {
        self.hermitian = flag;
        self
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.indptr[r]..self.indptr[r + 1]).map(move |k| (self.indices[k], self.values[k]))
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut t = Vec::with_capacity(self.nnz());
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                t.push((r, c, v));
            }
        }
        t
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let slice = &self.indices[self.indptr[r]..self.indptr[r + 1]];
        match slice.binary_search(&c) {
            Ok(k) => self.values[self.indptr[r] + k],
            Err(_) => 0.0,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.apply_into(x, &mut y);
        y
    }

    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        for r in 0..self.dim {
            let mut acc = 0.0;
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            y[r] = acc;
        }
    }

    pub fn apply_complex(&self, x: &[c64]) -> Vec<c64> {
        assert_eq!(x.len(), self.dim);
        let mut y = vec![c64::new(0.0, 0.0); self.dim];
        for r in 0..self.dim {
            let mut acc = c64::new(0.0, 0.0);
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += x[self.indices[k]] * self.values[k];
            }
            y[r] = acc;
        }
        y
    }

    pub fn expectation(&self, x: &[f64]) -> f64 {
        dot(x, &self.apply(x))
    }

    pub fn transpose(&self) -> Self {
        let t = self.triplets().into_iter().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.dim, t, self.hermitian)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= s;
        }
        out.prune();
        out
    }

    /// Returns `self + s * other`.
    pub fn add_scaled(&self, other: &Self, s: f64) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut t = self.triplets();
        t.extend(other.triplets().into_iter().map(|(r, c, v)| (r, c, s * v)));
        Self::from_triplets(self.dim, t, self.hermitian && other.hermitian)
    }

    pub fn sum(dim: usize, terms: &[(&Self, f64)]) -> Self {
        let mut t = Vec::new();
        let mut herm = true;
        for (op, s) in terms {
            assert_eq!(op.dim, dim);
            herm &= op.hermitian;
            t.extend(op.triplets().into_iter().map(|(r, c, v)| (r, c, s * v)));
        }
        Self::from_triplets(dim, t, herm)
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut t = Vec::new();
        let mut acc = vec![0.0; self.dim];
        let mut seen = vec![false; self.dim];
        let mut touched: Vec<usize> = Vec::new();
        for r in 0..self.dim {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if !seen[c] {
                        seen[c] = true;
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                t.push((r, c, acc[c]));
                acc[c] = 0.0;
                seen[c] = false;
            }
            touched.clear();
        }
        Self::from_triplets(self.dim, t, false)
    }

    /// Commutator `[self, other]`.
    pub fn commutator(&self, other: &Self) -> Self {
        self.matmul(other).add_scaled(&other.matmul(self), -1.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.add_scaled(other, -1.0).max_abs()
    }

    pub fn frobenius(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest absolute row sum, an upper bound on the spectral norm for
    /// symmetric operators.
    pub fn inf_norm(&self) -> f64 {
        (0..self.dim)
            .map(|r| self.row(r).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest deviation from symmetry, max |A_ij - A_ji|.
    pub fn symmetry_defect(&self) -> f64 {
        self.max_abs_diff(&self.transpose())
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::<f64>::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }

    pub fn from_dense(m: MatRef<'_, f64>, hermitian: bool) -> Self {
        let mut t = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let v = m[(r, c)];
                if v != 0.0 {
                    t.push((r, c, v));
                }
            }
        }
        Self::from_triplets(m.nrows(), t, hermitian)
    }

    /// Applies exp(t * self) to `v` by a scaled Taylor series.
    pub fn expm_apply(&self, v: &[f64], t: f64) -> Vec<f64> {
        let norm = self.inf_norm() * t.abs();
        let steps = (norm / 0.5).ceil().max(1.0) as usize;
        let h = t / steps as f64;
        let mut x = v.to_vec();
        for _ in 0..steps {
            let mut term = x.clone();
            let mut out = x.clone();
            let base = norm2(&x).max(f64::MIN_POSITIVE);
            for k in 1..200 {
                let next = self.apply(&term);
                term = next.into_iter().map(|y| y * h / k as f64).collect();
                axpy(1.0, &term, &mut out);
                if norm2(&term) <= 1e-18 * base {
                    break;
                }
            }
            x = out;
        }
        x
    }
}

/// Dense matrix exponential by scaling and squaring of a Taylor polynomial.
pub fn expm_dense(a: MatRef<'_, f64>) -> Mat<f64> {
    let n = a.nrows();
    let norm1 = (0..n)
        .map(|c| (0..n).map(|r| a[(r, c)].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut s = 0u32;
    while norm1 / 2f64.powi(s as i32) > 0.5 {
        s += 1;
    }
    let scale = 1.0 / 2f64.powi(s as i32);
    let x = Mat::<f64>::from_fn(n, n, |i, j| a[(i, j)] * scale);
    let mut result = Mat::<f64>::identity(n, n);
    let mut term = Mat::<f64>::identity(n, n);
    for k in 1..40 {
        term = &term * &x;
        let inv = 1.0 / k as f64;
        let mut tmax = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                term[(i, j)] *= inv;
                tmax = tmax.max(term[(i, j)].abs());
            }
        }
        result += &term;
        if tmax < 1e-18 {
            break;
        }
    }
    for _ in 0..s {
        result = &result * &result;
    }
    result
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(s: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub fn normalized(a: &[f64]) -> Option<Vec<f64>> {
    let n = norm2(a);
    (n > 0.0).then(|| scale(a, 1.0 / n))
}

pub fn cnorm2(a: &[c64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn dense_max_abs(m: MatRef<'_, f64>) -> f64 {
    let mut out = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out = out.max(m[(i, j)].abs());
        }
    }
    out
}

pub fn dense_apply(m: MatRef<'_, f64>, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; m.nrows()];
    for j in 0..m.ncols() {
        let xj = x[j];
        if xj == 0.0 {
            continue;
        }
        for i in 0..m.nrows() {
            y[i] += m[(i, j)] * xj;
        }
    }
    y
}
