//! Sparse storage, dense helpers and Lanczos eigensolvers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type DMat = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).fold(ZERO, |acc, (x, y)| acc + x.conj() * y)
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: C64, x: &mut [C64]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

pub fn normalize(x: &mut [C64]) -> f64 {
    let n = norm(x);
    if n > 0.0 {
        scale(C64::from(1.0 / n), x);
    }
    n
}

/// Compressed sparse row matrix with complex entries.
///
/// Column indices are sorted within each row and duplicates are summed at
/// construction, so equality of two matrices is equality of their arrays.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub rows: usize,
    pub cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<C64>,
}

impl CsrMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CsrMatrix { rows, cols, indptr: vec![0; rows + 1], indices: vec![], data: vec![] }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    /// Diagonal matrix; zero entries are not stored.
    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self::from_triplets(n, n, d.iter().enumerate().map(|(i, &x)| (i, i, C64::from(x))).collect())
    }

    /// Builds from (row, col, value) triplets; duplicates are summed in
    /// insertion order and exact zeros are dropped.
    pub fn from_triplets(rows: usize, cols: usize, mut t: Vec<(usize, usize, C64)>) -> Self {
        t.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut data: Vec<C64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        let mut row_of = Vec::with_capacity(t.len());
        for (r, c, v) in t {
            debug_assert!(r < rows && c < cols);
            if last == Some((r, c)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                data.push(v);
                row_of.push(r);
                last = Some((r, c));
            }
        }
        let mut keep_idx = Vec::with_capacity(indices.len());
        let mut keep_dat = Vec::with_capacity(indices.len());
        for ((c, v), r) in indices.into_iter().zip(data).zip(row_of) {
            if v != ZERO {
                indptr[r + 1] += 1;
                keep_idx.push(c);
                keep_dat.push(v);
            }
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        CsrMatrix { rows, cols, indptr, indices: keep_idx, data: keep_dat }
    }

    /// Hermitian matrix from its upper triangle (row <= col); the lower
    /// triangle is the exact conjugate mirror and the diagonal keeps only its
    /// real part.
    pub fn hermitian_from_upper(n: usize, upper: Vec<(usize, usize, C64)>) -> Self {
        let mut t = Vec::with_capacity(2 * upper.len());
        for (r, c, v) in upper {
            assert!(r <= c, "hermitian_from_upper expects row <= col");
            if r == c {
                t.push((r, c, C64::from(v.re)));
            } else {
                t.push((r, c, v));
                t.push((c, r, v.conj()));
            }
        }
        Self::from_triplets(n, n, t)
    }

    pub fn from_dense(m: &DMat, drop_below: f64) -> Self {
        let mut t = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let v = m[(r, c)];
                if v.norm() > drop_below {
                    t.push((r, c, v));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), t)
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        self.indices[a..b].iter().copied().zip(self.data[a..b].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        match self.indices[a..b].binary_search(&c) {
            Ok(p) => self.data[a + p],
            Err(_) => ZERO,
        }
    }

    pub fn triplets(&self) -> Vec<(usize, usize, C64)> {
        let mut t = Vec::with_capacity(self.nnz());
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                t.push((r, c, v));
            }
        }
        t
    }

    /// Coordinate-list text, one `row col re im` line per stored entry with
    /// 17 significant digits.
    pub fn write_coo(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                writeln!(w, "{r} {c} {:.16e} {:.16e}", v.re, v.im)?;
            }
        }
        Ok(())
    }

    pub fn matvec(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(y.len(), self.rows);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = ZERO;
            for p in self.indptr[r]..self.indptr[r + 1] {
                acc += self.data[p] * x[self.indices[p]];
            }
            *yr = acc;
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.rows];
        self.matvec(x, &mut y);
        y
    }

    pub fn adjoint(&self) -> Self {
        let mut t = Vec::with_capacity(self.nnz());
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                t.push((c, r, v.conj()));
            }
        }
        Self::from_triplets(self.cols, self.rows, t)
    }

    /// Largest |A_rc - conj(A_cr)| over stored entries.
    pub fn hermitian_deviation(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        let mut dev = 0.0f64;
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                dev = dev.max((v - self.get(c, r).conj()).norm());
            }
        }
        dev
    }

    pub fn is_hermitian(&self) -> bool {
        *self == self.adjoint()
    }

    pub fn scaled(&self, a: C64) -> Self {
        let mut m = self.clone();
        for v in m.data.iter_mut() {
            *v *= a;
        }
        m
    }

    /// a·self + b·other.
    pub fn lincomb(&self, a: C64, other: &Self, b: C64) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut t = Vec::with_capacity(self.nnz() + other.nnz());
        for (r, c, v) in self.triplets() {
            t.push((r, c, a * v));
        }
        for (r, c, v) in other.triplets() {
            t.push((r, c, b * v));
        }
        Self::from_triplets(self.rows, self.cols, t)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.lincomb(ONE, other, ONE)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.lincomb(ONE, other, -ONE)
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut acc = vec![ZERO; other.cols];
        let mut mark = vec![usize::MAX; other.cols];
        let mut t = Vec::new();
        for r in 0..self.rows {
            let mut touched = Vec::new();
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if mark[c] != r {
                        mark[c] = r;
                        acc[c] = ZERO;
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            touched.sort_unstable();
            for c in touched {
                t.push((r, c, acc[c]));
            }
        }
        Self::from_triplets(self.rows, other.cols, t)
    }

    /// Product A·B known to be Hermitian: the upper triangle is computed and
    /// mirrored, which makes the result Hermitian bit for bit.
    pub fn hermitian_product(&self, other: &Self) -> Self {
        let p = self.matmul(other);
        let upper = p.triplets().into_iter().filter(|&(r, c, _)| r <= c).collect();
        Self::hermitian_from_upper(self.rows, upper)
    }

    pub fn to_dense(&self) -> DMat {
        let mut m = DMat::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }

    pub fn diag(&self) -> Vec<C64> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }

    /// Restriction to the rows and columns in `keep` (in that order).
    pub fn compress(&self, keep: &[usize]) -> Self {
        let mut pos = vec![usize::MAX; self.rows.max(self.cols)];
        for (i, &k) in keep.iter().enumerate() {
            pos[k] = i;
        }
        let mut t = Vec::new();
        for (i, &r) in keep.iter().enumerate() {
            for (c, v) in self.row(r) {
                if pos[c] != usize::MAX {
                    t.push((i, pos[c], v));
                }
            }
        }
        Self::from_triplets(keep.len(), keep.len(), t)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Eigen-decomposition of a dense Hermitian matrix, eigenvalues ascending.
pub fn herm_eig(m: &DMat) -> (Vec<f64>, DMat) {
    let n = m.nrows();
    let sym = (m + m.adjoint()) * C64::from(0.5);
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMat::zeros(n, n);
    for (j, &i) in order.iter().enumerate() {
        vecs.set_column(j, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// f(A) for Hermitian A by diagonalization.
pub fn herm_fn(m: &DMat, f: impl Fn(f64) -> C64) -> DMat {
    let (vals, vecs) = herm_eig(m);
    let mut scaled = vecs.clone();
    for (j, &l) in vals.iter().enumerate() {
        let fj = f(l);
        for i in 0..scaled.nrows() {
            scaled[(i, j)] *= fj;
        }
    }
    &scaled * vecs.adjoint()
}

/// Spectral norm of a dense matrix.
pub fn op_norm(m: &DMat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().singular_values().iter().copied().fold(0.0, f64::max)
}

pub fn to_dvec(x: &[C64]) -> DVector<C64> {
    DVector::from_column_slice(x)
}

/// Deterministic pseudo-random start vector.
pub fn start_vector(n: usize, seed: u64) -> Vec<C64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<C64> =
        (0..n).map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
    normalize(&mut v);
    v
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Which {
    Lowest,
    Highest,
}

#[derive(Clone, Debug)]
pub struct EigenResult {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<C64>>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

/// Block Krylov Rayleigh-Ritz with full reorthogonalization for a few
/// extremal eigenpairs of a Hermitian operator given by its action. The block
/// has `count + 2` vectors, so degenerate levels up to that multiplicity are
/// resolved. `max_iter` bounds the basis size.
pub fn lanczos_eigs(
    apply: &dyn Fn(&[C64], &mut [C64]),
    n: usize,
    count: usize,
    which: Which,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<EigenResult> {
    let count = count.min(n);
    let block = (count + 2).min(n);
    let max_basis = max_iter.min(n).max(block);
    let mut q: Vec<Vec<C64>> = Vec::with_capacity(max_basis);
    let mut aq: Vec<Vec<C64>> = Vec::with_capacity(max_basis);
    // projected matrix, column-major growth
    let mut t: Vec<Vec<C64>> = Vec::new();
    let mut pending: Vec<Vec<C64>> = (0..block).map(|j| start_vector(n, seed + j as u64)).collect();
    let mut last_check = 0usize;
    let mut result: Option<(Vec<f64>, Vec<Vec<C64>>, Vec<f64>)> = None;
    loop {
        let mut added = 0;
        for mut w in pending.drain(..) {
            if q.len() >= max_basis {
                break;
            }
            let w0 = norm(&w);
            for _ in 0..2 {
                for b in &q {
                    let c = dot(b, &w);
                    axpy(-c, b, &mut w);
                }
            }
            let wn = norm(&w);
            if wn <= 1e-10 * w0 || wn == 0.0 {
                continue;
            }
            scale(C64::from(1.0 / wn), &mut w);
            let mut y = vec![ZERO; n];
            apply(&w, &mut y);
            let col: Vec<C64> = q.iter().map(|b| dot(b, &y)).collect();
            t.push(col);
            q.push(w);
            aq.push(y);
            added += 1;
        }
        let m = q.len();
        let exhausted = added == 0 || m >= max_basis;
        if m >= count && (exhausted || m - last_check >= (m / 8).max(block)) {
            last_check = m;
            let mut tm = DMat::zeros(m, m);
            for j in 0..m {
                for i in 0..j {
                    tm[(i, j)] = t[j][i];
                    tm[(j, i)] = t[j][i].conj();
                }
                tm[(j, j)] = C64::from(dot(&q[j], &aq[j]).re);
            }
            let (vals, vecs) = herm_eig(&tm);
            let order: Vec<usize> = match which {
                Which::Lowest => (0..count).collect(),
                Which::Highest => (0..count).map(|i| m - 1 - i).collect(),
            };
            let mut values = Vec::with_capacity(count);
            let mut vectors = Vec::with_capacity(count);
            let mut residuals = Vec::with_capacity(count);
            for &i in &order {
                let mut x = vec![ZERO; n];
                let mut ax = vec![ZERO; n];
                for k in 0..m {
                    let c = vecs[(k, i)];
                    axpy(c, &q[k], &mut x);
                    axpy(c, &aq[k], &mut ax);
                }
                axpy(C64::from(-vals[i]), &x, &mut ax);
                residuals.push(norm(&ax));
                values.push(vals[i]);
                vectors.push(x);
            }
            let scale_ref = vals.iter().map(|x| x.abs()).fold(1.0, f64::max);
            let done = residuals.iter().all(|&r| r <= tol * scale_ref);
            result = Some((values, vectors, residuals));
            if done || exhausted {
                let (values, vectors, residuals) = result.take().unwrap();
                if !done && m < n && residuals.iter().any(|&r| r > 1e3 * tol.max(1e-12) * scale_ref) {
                    return Err(Error::NoConvergence(format!(
                        "block lanczos residuals {residuals:?} with basis {m}"
                    )));
                }
                return Ok(EigenResult { values, vectors, residuals, iterations: m });
            }
        }
        if exhausted {
            let (values, vectors, residuals) =
                result.ok_or_else(|| Error::NoConvergence("block lanczos produced no Ritz values".into()))?;
            return Ok(EigenResult { values, vectors, residuals, iterations: m });
        }
        pending = aq[m - added..].to_vec();
    }
}

fn orthonormalize_against(basis: &mut Vec<Vec<C64>>, mut w: Vec<C64>) -> bool {
    let w0 = norm(&w);
    if w0 == 0.0 {
        return false;
    }
    for _ in 0..2 {
        for b in basis.iter() {
            let c = dot(b, &w);
            axpy(-c, b, &mut w);
        }
    }
    let wn = norm(&w);
    if wn <= 1e-10 * w0 {
        return false;
    }
    scale(C64::from(1.0 / wn), &mut w);
    basis.push(w);
    true
}

/// Preconditioned block eigensolver (LOBPCG) for the lowest `count`
/// eigenpairs. `precond` should approximate (A - θ)^{-1} on the low end.
pub fn lobpcg_lowest(
    apply: &dyn Fn(&[C64], &mut [C64]),
    precond: &dyn Fn(&[C64], &mut [C64]),
    n: usize,
    count: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<EigenResult> {
    let count = count.min(n);
    let block = (count + 2).min(n);
    let mut x: Vec<Vec<C64>> = Vec::new();
    for j in 0..block {
        orthonormalize_against(&mut x, start_vector(n, seed + j as u64));
    }
    let mut w: Vec<Vec<C64>> = Vec::new();
    let mut p: Vec<Vec<C64>> = Vec::new();
    let mut last_res = Vec::new();
    for it in 0..max_iter {
        let mut s: Vec<Vec<C64>> = Vec::new();
        for v in x.iter().cloned() {
            orthonormalize_against(&mut s, v);
        }
        let nx = s.len();
        for v in w.drain(..).chain(p.drain(..)) {
            orthonormalize_against(&mut s, v);
        }
        let m = s.len();
        let a_s: Vec<Vec<C64>> = s
            .iter()
            .map(|v| {
                let mut y = vec![ZERO; n];
                apply(v, &mut y);
                y
            })
            .collect();
        let mut tm = DMat::zeros(m, m);
        for j in 0..m {
            for i in 0..=j {
                let v = dot(&s[i], &a_s[j]);
                tm[(i, j)] = v;
                tm[(j, i)] = v.conj();
            }
        }
        let (vals, vecs) = herm_eig(&tm);
        let b = block.min(m);
        let mut new_x = Vec::with_capacity(b);
        let mut new_p = Vec::with_capacity(b);
        let mut residuals = Vec::with_capacity(b);
        let mut r_vecs = Vec::with_capacity(b);
        for j in 0..b {
            let mut xv = vec![ZERO; n];
            let mut axv = vec![ZERO; n];
            let mut pv = vec![ZERO; n];
            for k in 0..m {
                let c = vecs[(k, j)];
                axpy(c, &s[k], &mut xv);
                axpy(c, &a_s[k], &mut axv);
                if k >= nx {
                    axpy(c, &s[k], &mut pv);
                }
            }
            axpy(C64::from(-vals[j]), &xv, &mut axv);
            residuals.push(norm(&axv));
            r_vecs.push(axv);
            new_x.push(xv);
            new_p.push(pv);
        }
        let scale_ref = vals[..b].iter().map(|v| v.abs()).fold(1.0, f64::max);
        let done = residuals[..count].iter().all(|&r| r <= tol * scale_ref);
        if done || m == n {
            return Ok(EigenResult {
                values: vals[..count].to_vec(),
                vectors: new_x.into_iter().take(count).collect(),
                residuals: residuals[..count].to_vec(),
                iterations: it + 1,
            });
        }
        last_res = residuals;
        x = new_x;
        if it > 0 {
            p = new_p;
        }
        w = r_vecs
            .iter()
            .map(|r| {
                let mut y = vec![ZERO; n];
                precond(r, &mut y);
                y
            })
            .collect();
    }
    Err(Error::NoConvergence(format!("lobpcg residuals {last_res:?} after {max_iter} iterations")))
}

/// Spectral norm of an operator B given by actions of B and B†, through the
/// largest eigenvalue of B†B.
pub fn lanczos_op_norm(
    apply: &dyn Fn(&[C64], &mut [C64]),
    apply_adj: &dyn Fn(&[C64], &mut [C64]),
    n_in: usize,
    n_out: usize,
    tol: f64,
    seed: u64,
) -> Result<f64> {
    let gram = |x: &[C64], y: &mut [C64]| {
        let mut t = vec![ZERO; n_out];
        apply(x, &mut t);
        apply_adj(&t, y);
    };
    let r = lanczos_eigs(&gram, n_in, 1, Which::Highest, tol, 400, seed)?;
    Ok(r.values[0].max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lobpcg_matches_dense_with_degeneracy() {
        let n = 150;
        let mut d: Vec<f64> = (0..n).map(|i| (i as f64).powi(2) * 0.1).collect();
        d[1] = d[2];
        let base = random_herm(n, 9) * C64::from(0.05);
        let mut a = base.clone();
        for i in 0..n {
            a[(i, i)] += C64::from(d[i]);
        }
        let s = CsrMatrix::from_dense(&a, 0.0);
        let pre = |x: &[C64], y: &mut [C64]| {
            for i in 0..n {
                y[i] = x[i] / (d[i] + 1.0);
            }
        };
        let r = lobpcg_lowest(&|x, y| s.matvec(x, y), &pre, n, 4, 1e-10, 300, 2).unwrap();
        let (vals, _) = herm_eig(&a);
        for j in 0..4 {
            assert!((r.values[j] - vals[j]).abs() < 1e-8, "{} {}", r.values[j], vals[j]);
        }
    }

    fn random_herm(n: usize, seed: u64) -> DMat {
        let v = start_vector(n * n, seed);
        let a = DMat::from_column_slice(n, n, &v);
        (&a + a.adjoint()) * C64::from(0.5)
    }

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let m = CsrMatrix::from_triplets(
            2,
            2,
            vec![(0, 1, ONE), (0, 1, ONE), (1, 0, ONE), (1, 0, -ONE)],
        );
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 1), C64::from(2.0));
    }

    #[test]
    fn hermitian_product_is_exact() {
        let a = CsrMatrix::from_dense(&random_herm(7, 3), 0.0);
        let p = a.hermitian_product(&a);
        assert!(p.is_hermitian());
        let d = p.to_dense() - a.to_dense() * a.to_dense();
        assert!(op_norm(&d) < 1e-12);
    }

    #[test]
    fn matmul_matches_dense() {
        let a = CsrMatrix::from_dense(&random_herm(6, 1), 0.0);
        let b = CsrMatrix::from_dense(&random_herm(6, 2), 0.0);
        let d = a.matmul(&b).to_dense() - a.to_dense() * b.to_dense();
        assert!(op_norm(&d) < 1e-12);
    }

    #[test]
    fn lanczos_finds_lowest_eigenvalues() {
        let m = random_herm(60, 9);
        let (vals, _) = herm_eig(&m);
        let s = CsrMatrix::from_dense(&m, 0.0);
        let r = lanczos_eigs(&|x, y| s.matvec(x, y), 60, 3, Which::Lowest, 1e-12, 200, 4).unwrap();
        for i in 0..3 {
            assert!((r.values[i] - vals[i]).abs() < 1e-9, "{} vs {}", r.values[i], vals[i]);
        }
    }

    #[test]
    fn lanczos_norm_matches_svd() {
        let m = random_herm(40, 5) * C64::new(0.3, 0.7);
        let s = CsrMatrix::from_dense(&m, 0.0);
        let sa = s.adjoint();
        let nrm = lanczos_op_norm(&|x, y| s.matvec(x, y), &|x, y| sa.matvec(x, y), 40, 40, 1e-12, 1)
            .unwrap();
        assert!((nrm - op_norm(&m)).abs() < 1e-8);
    }

    #[test]
    fn herm_fn_of_identity_function() {
        let m = random_herm(5, 11);
        let f = herm_fn(&m, C64::from);
        assert!(op_norm(&(f - &m)) < 1e-12);
    }
}
