//! Dense reference operators built on explicit symmetric tensors in
//! (ℂⁿ)^{⊗k}, independent of the occupation-number code paths. Only for
//! tiny spaces.

use num_complex::Complex64 as C64;

use crate::error::{invalid, Result};
use crate::fock::FockBasis;
use crate::linalg::{dot, DMat, ZERO};

const MAX_TENSOR: usize = 1 << 16;

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

fn digits(mut idx: usize, n: usize, k: usize) -> Vec<usize> {
    let mut d = vec![0; k];
    for a in (0..k).rev() {
        d[a] = idx % n;
        idx /= n;
    }
    d
}

fn index(d: &[usize], n: usize) -> usize {
    d.iter().fold(0, |acc, &x| acc * n + x)
}

/// Orthogonal projection onto the symmetric subspace.
fn symmetrize(v: &[C64], n: usize, k: usize) -> Vec<C64> {
    let perms = permutations(k);
    let mut out = vec![ZERO; v.len()];
    for (i, &a) in v.iter().enumerate() {
        if a == ZERO {
            continue;
        }
        let d = digits(i, n, k);
        for p in &perms {
            let e: Vec<usize> = p.iter().map(|&j| d[j]).collect();
            out[index(&e, n)] += a;
        }
    }
    let s = 1.0 / perms.len() as f64;
    out.iter_mut().for_each(|x| *x *= s);
    out
}

/// Normalized symmetric tensor of each occupation basis vector.
pub struct TensorFock {
    pub n: usize,
    pub n_max: usize,
    pub sector: Vec<usize>,
    pub tensors: Vec<Vec<C64>>,
}

impl TensorFock {
    pub fn new(basis: &FockBasis) -> Result<Self> {
        let n = basis.n_modes;
        if n.pow(basis.n_max as u32 + 1) > MAX_TENSOR {
            return Err(invalid("basis", "too large for the tensor oracle"));
        }
        let mut sector = Vec::with_capacity(basis.dim());
        let mut tensors = Vec::with_capacity(basis.dim());
        for s in &basis.states {
            let k = s.len();
            let mut v = vec![ZERO; n.pow(k as u32)];
            let d: Vec<usize> = s.iter().map(|&m| m as usize).collect();
            v[index(&d, n)] = C64::from(1.0);
            let mut w = symmetrize(&v, n, k);
            let nrm = crate::linalg::norm(&w);
            w.iter_mut().for_each(|x| *x /= nrm);
            sector.push(k);
            tensors.push(w);
        }
        Ok(TensorFock { n, n_max: basis.n_max, sector, tensors })
    }

    fn dim(&self) -> usize {
        self.tensors.len()
    }

    /// a*(f): √(k+1) S(f ⊗ ψ), dropped above the top sector.
    pub fn creator(&self, f: &[C64]) -> DMat {
        let n = self.n;
        let mut m = DMat::zeros(self.dim(), self.dim());
        for col in 0..self.dim() {
            let k = self.sector[col];
            if k == self.n_max {
                continue;
            }
            let src = &self.tensors[col];
            let mut w = vec![ZERO; n * src.len()];
            for (i, &fi) in f.iter().enumerate() {
                for (r, &a) in src.iter().enumerate() {
                    w[i * src.len() + r] = fi * a;
                }
            }
            let w = symmetrize(&w, n, k + 1);
            let scale = ((k + 1) as f64).sqrt();
            for row in 0..self.dim() {
                if self.sector[row] == k + 1 {
                    m[(row, col)] = dot(&self.tensors[row], &w) * scale;
                }
            }
        }
        m
    }

    pub fn annihilator(&self, f: &[C64]) -> DMat {
        self.creator(f).adjoint()
    }

    pub fn field(&self, h: &[C64]) -> DMat {
        (self.creator(h) + self.annihilator(h)) * C64::from(std::f64::consts::FRAC_1_SQRT_2)
    }

    /// dΓ(t) = Σ_a 1 ⊗ … ⊗ t ⊗ … ⊗ 1 on each sector.
    pub fn second_quantize(&self, t: &DMat) -> DMat {
        let n = self.n;
        let mut m = DMat::zeros(self.dim(), self.dim());
        for col in 0..self.dim() {
            let k = self.sector[col];
            let src = &self.tensors[col];
            let mut w = vec![ZERO; src.len()];
            for (idx, &a) in src.iter().enumerate() {
                if a == ZERO {
                    continue;
                }
                let d = digits(idx, n, k);
                for slot in 0..k {
                    let mut e = d.clone();
                    for i in 0..n {
                        e[slot] = i;
                        w[index(&e, n)] += t[(i, d[slot])] * a;
                    }
                }
            }
            for row in 0..self.dim() {
                if self.sector[row] == k {
                    m[(row, col)] = dot(&self.tensors[row], &w);
                }
            }
        }
        m
    }
}
