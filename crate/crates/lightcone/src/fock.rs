//! Truncated bosonic Fock space over the photon modes.
//!
//! A basis vector is the sorted multiset of occupied mode indices. Vectors are
//! grouped by photon number (sector-major) and ordered lexicographically
//! within a sector, so sector n starts at `sector_offsets[n]`.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::error::{invalid, Error, Result};
use crate::grid::PhotonGrid;
use crate::linalg::{dot, lanczos_op_norm, norm, op_norm, start_vector, CsrMatrix, DMat, ZERO};

#[derive(Clone, Debug)]
pub struct FockBasis {
    pub grid: Arc<PhotonGrid>,
    pub n_modes: usize,
    pub n_max: usize,
    pub states: Vec<Vec<u32>>,
    pub sector_offsets: Vec<usize>,
    index: HashMap<Vec<u32>, usize>,
}

/// C(n + k - 1, k) as f64, the number of k-photon states over n modes.
pub fn sector_dim(n_modes: usize, k: usize) -> f64 {
    let mut c = 1.0f64;
    for i in 0..k {
        c *= (n_modes + i) as f64 / (i + 1) as f64;
    }
    c.round()
}

pub fn fock_dim(n_modes: usize, n_max: usize) -> f64 {
    (0..=n_max).map(|k| sector_dim(n_modes, k)).sum()
}

fn bytes_per_state(n_max: usize) -> usize {
    // occupation tuple, hash entry, and room for a few dozen work vectors
    4 * n_max + 64 + 16 * 48
}

fn push_sector(states: &mut Vec<Vec<u32>>, cur: &mut Vec<u32>, start: u32, left: usize, n_modes: u32) {
    if left == 0 {
        states.push(cur.clone());
        return;
    }
    for j in start..n_modes {
        cur.push(j);
        push_sector(states, cur, j, left - 1, n_modes);
        cur.pop();
    }
}

pub fn build_fock_basis(grid: Arc<PhotonGrid>, n_max: usize, budget_mb: usize) -> Result<FockBasis> {
    if n_max < 1 {
        return Err(invalid("n_max", format!("{n_max} must be at least 1")));
    }
    let n_modes = grid.n_modes();
    let dim = fock_dim(n_modes, n_max);
    if dim * bytes_per_state(n_max) as f64 > budget_mb as f64 * 1024.0 * 1024.0 {
        return Err(Error::BudgetExceeded { dim: dim.min(usize::MAX as f64) as usize, budget_mb });
    }
    let mut states = Vec::with_capacity(dim as usize);
    let mut sector_offsets = Vec::with_capacity(n_max + 2);
    for k in 0..=n_max {
        sector_offsets.push(states.len());
        push_sector(&mut states, &mut Vec::with_capacity(k), 0, k, n_modes as u32);
    }
    sector_offsets.push(states.len());
    let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
    Ok(FockBasis { grid, n_modes, n_max, states, sector_offsets, index })
}

fn occupation(s: &[u32], j: u32) -> usize {
    s.iter().filter(|&&m| m == j).count()
}

fn remove_one(s: &[u32], j: u32) -> Vec<u32> {
    let mut out = s.to_vec();
    let p = out.iter().position(|&m| m == j).expect("mode not occupied");
    out.remove(p);
    out
}

fn insert_one(s: &[u32], i: u32) -> Vec<u32> {
    let mut out = s.to_vec();
    let p = out.partition_point(|&m| m <= i);
    out.insert(p, i);
    out
}

fn distinct(s: &[u32]) -> impl Iterator<Item = (u32, usize)> + '_ {
    let mut k = 0;
    std::iter::from_fn(move || {
        if k >= s.len() {
            return None;
        }
        let j = s[k];
        let mut n = 0;
        while k < s.len() && s[k] == j {
            k += 1;
            n += 1;
        }
        Some((j, n))
    })
}

impl FockBasis {
    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn index_of(&self, s: &[u32]) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn sector_of(&self, i: usize) -> usize {
        self.states[i].len()
    }

    pub fn sector_range(&self, n: usize) -> std::ops::Range<usize> {
        self.sector_offsets[n]..self.sector_offsets[n + 1]
    }

    /// (mode j, index of a_j|i⟩ / √n_j, √n_j) for every occupied mode of
    /// basis vector i.
    pub fn lowerings(&self, i: usize) -> Vec<(u32, usize, f64)> {
        let s = &self.states[i];
        distinct(s)
            .map(|(j, n)| (j, self.index[&remove_one(s, j)], (n as f64).sqrt()))
            .collect()
    }

    /// Occupation numbers of basis vector i.
    pub fn occupations(&self, i: usize) -> Vec<usize> {
        let mut occ = vec![0; self.n_modes];
        for &m in &self.states[i] {
            occ[m as usize] += 1;
        }
        occ
    }

    pub fn vacuum(&self) -> Vec<C64> {
        let mut v = vec![ZERO; self.dim()];
        v[0] = C64::from(1.0);
        v
    }

    /// a*(f)Ω, the one-photon state with wavefunction f.
    pub fn one_photon(&self, f: &[C64]) -> Vec<C64> {
        let mut v = vec![ZERO; self.dim()];
        for (j, &a) in f.iter().enumerate() {
            v[self.sector_offsets[1] + j] = a;
        }
        v
    }

    /// Total photon number of each basis vector.
    pub fn numbers(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.len() as f64).collect()
    }

    /// Keeps only the components in sectors ≤ n.
    pub fn project_sectors(&self, v: &[C64], n: usize) -> Vec<C64> {
        let end = self.sector_offsets[(n + 1).min(self.n_max + 1)];
        v.iter().enumerate().map(|(i, &a)| if i < end { a } else { ZERO }).collect()
    }

    fn check_vec(&self, f: &[C64]) -> Result<()> {
        if f.len() != self.n_modes {
            return Err(Error::BasisMismatch { expected: self.n_modes, got: f.len() });
        }
        Ok(())
    }
}

/// a(f) = Σ_j conj(f_j) a_j.
pub fn annihilator(basis: &FockBasis, f: &[C64]) -> Result<CsrMatrix> {
    basis.check_vec(f)?;
    let mut t = Vec::new();
    for (col, s) in basis.states.iter().enumerate() {
        for (j, n) in distinct(s) {
            let a = f[j as usize].conj();
            if a != ZERO {
                let row = basis.index_of(&remove_one(s, j)).expect("lower sector present");
                t.push((row, col, a * (n as f64).sqrt()));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(basis.dim(), basis.dim(), t))
}

/// a*(f), the adjoint of a(f) inside the truncation.
pub fn creator(basis: &FockBasis, f: &[C64]) -> Result<CsrMatrix> {
    Ok(annihilator(basis, f)?.adjoint())
}

/// Φ(h) = (a*(h) + a(h))/√2, inserted symmetrically.
pub fn field_operator(basis: &FockBasis, h: &[C64]) -> Result<CsrMatrix> {
    basis.check_vec(h)?;
    let r2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut upper = Vec::new();
    for (col, s) in basis.states.iter().enumerate() {
        for (j, n) in distinct(s) {
            let a = h[j as usize].conj();
            if a != ZERO {
                let row = basis.index_of(&remove_one(s, j)).expect("lower sector present");
                upper.push((row, col, a * ((n as f64).sqrt() * r2)));
            }
        }
    }
    Ok(CsrMatrix::hermitian_from_upper(basis.dim(), upper))
}

/// dΓ(t) for a Hermitian one-photon matrix t.
pub fn second_quantize(basis: &FockBasis, t: &DMat) -> Result<CsrMatrix> {
    if t.nrows() != basis.n_modes || t.ncols() != basis.n_modes {
        return Err(Error::BasisMismatch { expected: basis.n_modes, got: t.nrows() });
    }
    let dev = (t - t.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if dev > 1e-12 * (1.0 + t.iter().map(|z| z.norm()).fold(0.0, f64::max)) {
        return Err(Error::NotHermitian(dev));
    }
    let m = basis.n_modes;
    let mut upper = Vec::new();
    for (col, s) in basis.states.iter().enumerate() {
        let mut diag = 0.0;
        for (j, nj) in distinct(s) {
            diag += t[(j as usize, j as usize)].re * nj as f64;
            let lowered = remove_one(s, j);
            for i in 0..m as u32 {
                if i == j {
                    continue;
                }
                let a = t[(i as usize, j as usize)];
                if a == ZERO {
                    continue;
                }
                let raised = insert_one(&lowered, i);
                let row = basis.index_of(&raised).expect("same sector present");
                if row < col {
                    let ni = occupation(&raised, i);
                    upper.push((row, col, a * ((nj as f64).sqrt() * (ni as f64).sqrt())));
                }
            }
        }
        upper.push((col, col, C64::from(diag)));
    }
    Ok(CsrMatrix::hermitian_from_upper(basis.dim(), upper))
}

/// dΓ(diag(d)), the fast path for one-photon operators diagonal in modes.
pub fn second_quantize_diag(basis: &FockBasis, d: &[f64]) -> Result<CsrMatrix> {
    if d.len() != basis.n_modes {
        return Err(Error::BasisMismatch { expected: basis.n_modes, got: d.len() });
    }
    Ok(CsrMatrix::diagonal(&second_quantize_diag_values(basis, d)))
}

pub fn second_quantize_diag_values(basis: &FockBasis, d: &[f64]) -> Vec<f64> {
    basis.states.iter().map(|s| s.iter().map(|&m| d[m as usize]).sum()).collect()
}

pub fn number_operator(basis: &FockBasis) -> CsrMatrix {
    CsrMatrix::diagonal(&basis.numbers())
}

/// H_f = dΓ(ω).
pub fn free_field(basis: &FockBasis) -> CsrMatrix {
    CsrMatrix::diagonal(&second_quantize_diag_values(basis, &basis.grid.omega_modes()))
}

/// [a(f), a*(g)] - ⟨f, g⟩.
pub fn ccr_defect(basis: &FockBasis, f: &[C64], g: &[C64]) -> Result<CsrMatrix> {
    let a = annihilator(basis, f)?;
    let c = creator(basis, g)?;
    let comm = a.matmul(&c).sub(&c.matmul(&a));
    let id = CsrMatrix::identity(basis.dim()).scaled(dot(f, g));
    Ok(comm.sub(&id))
}

/// Largest ‖([a(f), a*(g)] - ⟨f,g⟩)ψ‖/‖ψ‖ over the given probes.
pub fn ccr_residual_on(basis: &FockBasis, f: &[C64], g: &[C64], probes: &[Vec<C64>]) -> Result<f64> {
    let d = ccr_defect(basis, f, g)?;
    let mut worst = 0.0f64;
    for p in probes {
        let n = norm(p);
        if n > 0.0 {
            worst = worst.max(norm(&d.apply(p)) / n);
        }
    }
    Ok(worst)
}

/// Deterministic probes supported in sectors ≤ n: every basis vector there
/// plus a few seeded random combinations.
pub fn sector_probes(basis: &FockBasis, n: usize, extra: usize, seed: u64) -> Vec<Vec<C64>> {
    let end = basis.sector_offsets[n + 1];
    let mut probes = Vec::new();
    for i in 0..end {
        let mut v = vec![ZERO; basis.dim()];
        v[i] = C64::from(1.0);
        probes.push(v);
    }
    for r in 0..extra {
        let mut v = start_vector(basis.dim(), seed + r as u64);
        v = basis.project_sectors(&v, n);
        probes.push(v);
    }
    probes
}

/// CCR residual over the sectors where it holds exactly (≤ n_max - 1).
pub fn ccr_residual(basis: &FockBasis, f: &[C64], g: &[C64]) -> Result<f64> {
    let probes = sector_probes(basis, basis.n_max - 1, 4, 7);
    ccr_residual_on(basis, f, g, &probes)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub annihilator_norm: f64,
    pub annihilator_bound: f64,
    pub creator_norm: f64,
    pub creator_bound: f64,
}

impl BoundReport {
    pub fn holds(&self) -> bool {
        self.annihilator_norm <= self.annihilator_bound * (1.0 + 1e-12) + 1e-14
            && self.creator_norm <= self.creator_bound * (1.0 + 1e-12) + 1e-14
    }
}

/// ‖B D‖ for sparse B and diagonal D.
fn norm_times_diag(b: &CsrMatrix, d: &[f64]) -> Result<f64> {
    let n = b.rows;
    if n <= 600 {
        let mut m = b.to_dense();
        for c in 0..n {
            for r in 0..n {
                m[(r, c)] *= d[c];
            }
        }
        return Ok(op_norm(&m));
    }
    let bt = b.adjoint();
    let apply = |x: &[C64], y: &mut [C64]| {
        let xs: Vec<C64> = x.iter().zip(d).map(|(a, w)| a * w).collect();
        b.matvec(&xs, y);
    };
    let apply_adj = |x: &[C64], y: &mut [C64]| {
        bt.matvec(x, y);
        for (a, w) in y.iter_mut().zip(d) {
            *a *= w;
        }
    };
    lanczos_op_norm(&apply, &apply_adj, n, n, 1e-13, 3)
}

fn report(basis: &FockBasis, f: &[C64], weight: &[f64], ab: f64, cb: f64) -> Result<BoundReport> {
    let a = annihilator(basis, f)?;
    let c = a.adjoint();
    let r = BoundReport {
        annihilator_norm: norm_times_diag(&a, weight)?,
        annihilator_bound: ab,
        creator_norm: norm_times_diag(&c, weight)?,
        creator_bound: cb,
    };
    if !r.holds() {
        return Err(Error::EstimateViolation {
            x: f64::NAN,
            mode: 0,
            what: format!("creation/annihilation bound violated: {r:?}"),
        });
    }
    Ok(r)
}

/// ‖a(f)(N+1)^{-1/2}‖ ≤ ‖f‖ and ‖a*(f)(N+1)^{-1/2}‖ ≤ √2‖f‖.
pub fn bound_check_numbers(basis: &FockBasis, f: &[C64]) -> Result<BoundReport> {
    basis.check_vec(f)?;
    let w: Vec<f64> = basis.numbers().iter().map(|n| (n + 1.0).powf(-0.5)).collect();
    let nf = norm(f);
    report(basis, f, &w, nf, 2f64.sqrt() * nf)
}

/// ‖a(f)(H_f+1)^{-1/2}‖ ≤ ‖|k|^{-1/2}f‖ and
/// ‖a*(f)(H_f+1)^{-1/2}‖ ≤ ‖|k|^{-1/2}f‖ + ‖f‖.
pub fn bound_check_field_energy(basis: &FockBasis, f: &[C64]) -> Result<BoundReport> {
    basis.check_vec(f)?;
    let omega = basis.grid.omega_modes();
    let hf = second_quantize_diag_values(basis, &omega);
    let w: Vec<f64> = hf.iter().map(|e| (e + 1.0).powf(-0.5)).collect();
    let weighted: Vec<C64> = f.iter().zip(&omega).map(|(a, w)| a * w.powf(-0.5)).collect();
    let nw = norm(&weighted);
    report(basis, f, &w, nw, nw + norm(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_photon_grid, Mode};

    fn basis(m: usize, mode: Mode, n_max: usize) -> FockBasis {
        let dim = mode.dim();
        let g = build_photon_grid(dim, m, 0.5, mode).unwrap();
        build_fock_basis(Arc::new(g), n_max, 64).unwrap()
    }

    #[test]
    fn dimensions_by_stars_and_bars() {
        assert_eq!(basis(4, Mode::Scalar1d, 2).dim(), 15);
        assert_eq!(basis(6, Mode::Scalar1d, 3).dim(), 84);
        assert_eq!(fock_dim(4, 1), 5.0);
        assert_eq!(basis(2, Mode::Scalar1d, 1).sector_offsets, vec![0, 1, 3]);
    }

    #[test]
    fn enumeration_matches_brute_force_count() {
        let b = basis(6, Mode::Scalar1d, 3);
        let mut count = 0;
        for a in 0..4usize {
            for c in 0..4usize {
                for d in 0..4usize {
                    for e in 0..4usize {
                        for f in 0..4usize {
                            for g in 0..4usize {
                                if a + c + d + e + f + g <= 3 {
                                    count += 1;
                                }
                            }
                        }
                    }
                }
            }
        }
        assert_eq!(b.dim(), count);
        for i in 0..b.dim() {
            assert_eq!(b.index_of(&b.states[i]), Some(i));
        }
    }

    #[test]
    fn rejects_zero_truncation_and_budget() {
        let g = Arc::new(build_photon_grid(1, 4, 0.5, Mode::Scalar1d).unwrap());
        assert!(build_fock_basis(g.clone(), 0, 64).is_err());
        let big = Arc::new(build_photon_grid(1, 64, 0.5, Mode::Scalar1d).unwrap());
        assert!(matches!(build_fock_basis(big, 6, 16), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn vacuum_identities() {
        let b = basis(4, Mode::Scalar1d, 3);
        let f = start_vector(4, 1);
        let g = start_vector(4, 2);
        let om = b.vacuum();
        let a = annihilator(&b, &f).unwrap();
        assert!(norm(&a.apply(&om)) == 0.0);
        let ad = creator(&b, &f).unwrap();
        let back = a.apply(&ad.apply(&om));
        assert!((back[0] - C64::from(dot(&f, &f).re)).norm() < 1e-14);
        let ov = dot(&creator(&b, &g).unwrap().apply(&om), &ad.apply(&om));
        assert!((ov - dot(&g, &f)).norm() < 1e-14);
    }

    #[test]
    fn field_vacuum_moments() {
        let b = basis(4, Mode::Scalar1d, 2);
        let h = start_vector(4, 5);
        let phi = field_operator(&b, &h).unwrap();
        assert!(phi.is_hermitian());
        let om = b.vacuum();
        let p1 = phi.apply(&om);
        assert_eq!(p1[0], ZERO);
        let second = dot(&p1, &p1).re;
        assert!((second - 0.5 * dot(&h, &h).re).abs() < 1e-14);
    }

    #[test]
    fn number_operator_eigenvalue() {
        let b = basis(4, Mode::Scalar1d, 3);
        let i = b.index_of(&[0, 0, 2]).unwrap();
        let d = DMat::identity(4, 4);
        let n = second_quantize(&b, &d).unwrap();
        assert_eq!(n.get(i, i), C64::from(3.0));
        assert_eq!(n, number_operator(&b));
    }

    #[test]
    fn free_field_one_photon_energy() {
        let b = basis(4, Mode::Scalar1d, 2);
        let hf = free_field(&b);
        let i = b.index_of(&[2]).unwrap();
        assert_eq!(hf.get(i, i).re, 0.25);
    }

    #[test]
    fn second_quantize_rejects_non_hermitian() {
        let b = basis(4, Mode::Scalar1d, 2);
        let mut t = DMat::zeros(4, 4);
        t[(0, 1)] = C64::from(1.0);
        assert!(matches!(second_quantize(&b, &t), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn ccr_below_top_sector() {
        let b = basis(4, Mode::Scalar1d, 3);
        let mut f = start_vector(4, 3);
        crate::linalg::normalize(&mut f);
        assert!(ccr_residual(&b, &f, &f).unwrap() < 1e-12);
        let e0 = vec![C64::from(1.0), ZERO, ZERO, ZERO];
        let e1 = vec![ZERO, C64::from(1.0), ZERO, ZERO];
        assert!(ccr_residual(&b, &e0, &e1).unwrap() == 0.0);
    }

    #[test]
    fn single_mode_number_bound_value() {
        let b = basis(2, Mode::Scalar1d, 3);
        let f = vec![C64::from(1.0), ZERO];
        let r = bound_check_numbers(&b, &f).unwrap();
        assert!((r.annihilator_norm - 0.75f64.sqrt()).abs() < 1e-12);
        assert!(r.holds());
    }

    #[test]
    fn zero_function_bounds() {
        let b = basis(4, Mode::Scalar1d, 2);
        let f = vec![ZERO; 4];
        let r = bound_check_field_energy(&b, &f).unwrap();
        assert_eq!(r.annihilator_norm, 0.0);
        assert_eq!(r.creator_norm, 0.0);
    }
}
