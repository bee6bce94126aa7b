//! Single particle on a periodic line coupled to the photon field:
//! H = (p + A(x))² + H_f + V(x) and its dressed form H̃ = U H U*.
//!
//! States are x-major: index = m·D + i for particle site m and Fock index i.
//! The dressing is U = e^{iΦ(q_x)}; with this sign the transformed
//! Hamiltonian reads (p + Φ(g̃_x))² - Φ(e_x) + H_f + Ṽ(x).

use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64 as C64;

use crate::error::{invalid, Error, Result};
use crate::fock::{build_fock_basis, field_operator, free_field, second_quantize_diag_values, FockBasis};
use crate::grid::{bump, Mode, PhotonGrid};
use crate::linalg::{
    dot, herm_eig, herm_fn, lanczos_op_norm, lobpcg_lowest, norm, CsrMatrix, DMat, EigenResult, I,
    ONE, ZERO,
};

#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub grid: Arc<PhotonGrid>,
    /// Particle sites (even).
    pub nx: usize,
    pub dx: f64,
    /// V(x) = -v0 exp(-x²/σ²).
    pub v0: f64,
    pub sigma: f64,
    /// κ vanishes for |k| ≥ uv_radius.
    pub uv_radius: f64,
    pub coupling_scale: f64,
    pub mu: f64,
    pub n_max: usize,
    pub budget_mb: usize,
}

impl ModelSpec {
    /// Defaults: V0 = 3, σ = 1, K = MΔk/2, coupling 0.1, μ = 1/4.
    pub fn new(grid: Arc<PhotonGrid>, nx: usize, dx: f64, n_max: usize) -> Self {
        let uv_radius = 0.5 * grid.modes_per_axis as f64 * grid.spacing;
        ModelSpec {
            grid,
            nx,
            dx,
            v0: 3.0,
            sigma: 1.0,
            uv_radius,
            coupling_scale: 0.1,
            mu: 0.25,
            n_max,
            budget_mb: crate::DEFAULT_BUDGET_MB,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.nx % 2 != 0 {
            return Err(invalid("nx", format!("{} must be even and at least 2", self.nx)));
        }
        if !(self.dx > 0.0) {
            return Err(invalid("dx", format!("{} must be positive", self.dx)));
        }
        if !(self.mu > 0.0 && self.mu < 0.5) {
            return Err(invalid("mu", format!("{} outside (0, 1/2)", self.mu)));
        }
        if !(self.sigma > 0.0) {
            return Err(invalid("sigma", format!("{} must be positive", self.sigma)));
        }
        if !(self.uv_radius > 0.0) {
            return Err(invalid("uv_radius", format!("{} must be positive", self.uv_radius)));
        }
        if !self.coupling_scale.is_finite() || !self.v0.is_finite() {
            return Err(invalid("coupling_scale", "must be finite"));
        }
        if self.n_max < 1 {
            return Err(invalid("n_max", format!("{} must be at least 1", self.n_max)));
        }
        Ok(())
    }

    pub fn x_points(&self) -> Vec<f64> {
        (0..self.nx).map(|m| (m as f64 - 0.5 * self.nx as f64) * self.dx).collect()
    }

    pub fn box_length(&self) -> f64 {
        self.nx as f64 * self.dx
    }

    pub fn potential(&self) -> Vec<f64> {
        self.x_points().iter().map(|x| -self.v0 * (-(x * x) / (self.sigma * self.sigma)).exp()).collect()
    }

    /// κ(k) = scale · h(2|k|/K): flat up to K/2, zero from K on.
    pub fn kappa(&self, k: f64) -> f64 {
        self.coupling_scale * bump::h(2.0 * k.abs() / self.uv_radius)
    }

    /// Surrogate for relative boundedness: V ≥ -b and |V| ≤ a p² + b with
    /// a = 0 and b = max |V|.
    pub fn potential_bound(&self) -> (f64, f64) {
        let b = self.potential().iter().map(|v| v.abs()).fold(0.0, f64::max);
        (0.0, b)
    }

    pub fn fock_basis(&self) -> Result<FockBasis> {
        build_fock_basis(self.grid.clone(), self.n_max, self.budget_mb)
    }
}

/// Momenta 2πn/L with n = -Nx/2, …, Nx/2 - 1 in FFT order of the sites.
fn particle_momenta(spec: &ModelSpec) -> Vec<f64> {
    let l = spec.box_length();
    let n = spec.nx as i64;
    (0..n).map(|j| {
        let s = if j < n / 2 { j } else { j - n };
        2.0 * std::f64::consts::PI * s as f64 / l
    })
    .collect()
}

/// Dense p^power on the particle grid, with the Nyquist momentum at -π/Δx.
pub fn particle_momentum_matrix(spec: &ModelSpec, power: i32) -> DMat {
    let n = spec.nx;
    let xs = spec.x_points();
    let ps = particle_momenta(spec);
    let mut m = DMat::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            let mut acc = ZERO;
            for &p in &ps {
                acc += C64::from_polar(p.powi(power), p * (xs[a] - xs[b]));
            }
            m[(a, b)] = acc / n as f64;
        }
    }
    (&m + m.adjoint()) * C64::from(0.5)
}

/// p² + V on the particle grid.
pub fn particle_hamiltonian(spec: &ModelSpec) -> DMat {
    let mut h = particle_momentum_matrix(spec, 2);
    for (m, v) in spec.potential().iter().enumerate() {
        h[(m, m)] += v;
    }
    h
}

/// Constants of the coupling estimates at m = 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateConstants {
    pub q: f64,
    pub g_tilde: f64,
    pub e: f64,
}

impl EstimateConstants {
    /// Guards derived from the profile: |φ(r)| ≤ R|r| and |1 - φ'| ≤ D give
    /// C_q = C_e = R and C_g̃ = 1 + D·2^{1/μ}. R and D come from a dense
    /// sample of φ and are frozen here.
    pub fn frozen(mu: f64) -> Self {
        let (r, d) = phi_constants();
        EstimateConstants { q: r * (1.0 + 1e-9), g_tilde: (1.0 + d * 2f64.powf(1.0 / mu)) * (1.0 + 1e-9), e: r * (1.0 + 1e-9) }
    }
}

fn phi_constants() -> (f64, f64) {
    let mut r = 1.0f64;
    let mut d = 0.0f64;
    for i in 1..=4000 {
        let x = 1.5 * i as f64 / 4000.0;
        r = r.max(bump::phi(x).abs() / x);
        d = d.max((1.0 - bump::phi_prime(x)).abs());
    }
    (r, d.max(1.0))
}

/// Coupling functions per particle position, as lattice vectors over the
/// photon modes already carrying the quadrature weight Δk^{d/2}.
#[derive(Clone, Debug)]
pub struct CouplingSet {
    pub xs: Vec<[f64; 3]>,
    /// Vector components of g and g̃ (1 in scalar mode, 3 in vector mode).
    pub components: usize,
    /// [x][component][mode]
    pub g: Vec<Vec<Vec<C64>>>,
    pub q: Vec<Vec<C64>>,
    pub g_tilde: Vec<Vec<Vec<C64>>>,
    pub e: Vec<Vec<C64>>,
    pub v: Vec<f64>,
    pub v_tilde: Vec<f64>,
    /// Largest observed ratios against the estimate envelopes.
    pub observed: EstimateConstants,
    pub frozen: EstimateConstants,
}

/// Couplings at the particle grid points (placed on the first axis in
/// vector mode).
pub fn build_couplings(spec: &ModelSpec) -> Result<CouplingSet> {
    let xs: Vec<[f64; 3]> = spec.x_points().iter().map(|&x| [x, 0.0, 0.0]).collect();
    let v = spec.potential();
    couplings_at(spec, &xs, &v)
}

/// Couplings at arbitrary positions with the given potential samples.
pub fn couplings_at(spec: &ModelSpec, xs: &[[f64; 3]], v: &[f64]) -> Result<CouplingSet> {
    spec.validate()?;
    let grid = &spec.grid;
    let dim = grid.dim;
    let pol = grid.polarizations;
    let n = grid.n_modes();
    let comps = if grid.mode == Mode::Vector3d { 3 } else { 1 };
    let w = grid.spacing.powf(0.5 * dim as f64);
    let mu = spec.mu;
    let frozen = EstimateConstants::frozen(mu);
    let mut observed = EstimateConstants { q: 0.0, g_tilde: 0.0, e: 0.0 };
    let mut set = CouplingSet {
        xs: xs.to_vec(),
        components: comps,
        g: Vec::with_capacity(xs.len()),
        q: Vec::with_capacity(xs.len()),
        g_tilde: Vec::with_capacity(xs.len()),
        e: Vec::with_capacity(xs.len()),
        v: v.to_vec(),
        v_tilde: Vec::with_capacity(xs.len()),
        observed,
        frozen,
    };
    for (xi, x) in xs.iter().enumerate() {
        let bx = (1.0 + x.iter().map(|a| a * a).sum::<f64>()).sqrt();
        let mut g = vec![vec![ZERO; n]; comps];
        let mut gt = vec![vec![ZERO; n]; comps];
        let mut q = vec![ZERO; n];
        let mut e = vec![ZERO; n];
        let mut shift = 0.0;
        for j in 0..n {
            let s = grid.site_of(j);
            let lam = j % pol;
            let k = grid.k_points[s];
            let om = grid.omega[s];
            let kap = spec.kappa(om);
            let (eps, proj) = if comps == 3 {
                let ep = grid.eps[s][lam];
                (ep, ep[0] * x[0] + ep[1] * x[1] + ep[2] * x[2])
            } else {
                ([1.0, 0.0, 0.0], x[0])
            };
            let kx: f64 = (0..dim).map(|a| k[a] * x[a]).sum();
            let phase = C64::from_polar(1.0, kx);
            let r = om.powf(mu) * proj;
            let amp = kap * om.powf(-0.5);
            let qj = kap * om.powf(-0.5 - mu) * bump::phi(r);
            let dphi = bump::phi_prime(r);
            q[j] = C64::from(w * qj);
            e[j] = I * (om * q[j].re);
            for c in 0..comps {
                g[c][j] = phase * (w * amp * eps[c]);
                gt[c][j] = (phase - dphi) * (w * amp * eps[c]);
            }
            shift += 0.5 * om * q[j].norm_sqr();
            if kap != 0.0 {
                let env_q = kap * om.powf(-0.5) * bx;
                let env_g = kap * om.powf(0.5) * bx.powf(1.0 / mu);
                let env_e = kap * om.powf(0.5) * bx;
                let rq = qj.abs() / env_q;
                let rg = (amp * (phase - dphi).norm()) / env_g;
                let re = (om * qj).abs() / env_e;
                observed.q = observed.q.max(rq);
                observed.g_tilde = observed.g_tilde.max(rg);
                observed.e = observed.e.max(re);
                let bad = if rq > frozen.q {
                    Some(("q", rq, frozen.q))
                } else if rg > frozen.g_tilde {
                    Some(("g_tilde", rg, frozen.g_tilde))
                } else if re > frozen.e {
                    Some(("e", re, frozen.e))
                } else {
                    None
                };
                if let Some((what, val, bound)) = bad {
                    return Err(Error::EstimateViolation {
                        x: x[0],
                        mode: j,
                        what: format!("{what} ratio {val} above {bound} (x index {xi}, polarization {lam})"),
                    });
                }
            }
        }
        set.g.push(g);
        set.g_tilde.push(gt);
        set.q.push(q);
        set.e.push(e);
        set.v_tilde.push(v[xi] + shift);
    }
    set.observed = observed;
    Ok(set)
}

fn require_scalar(spec: &ModelSpec) -> Result<()> {
    if spec.grid.mode != Mode::Scalar1d {
        return Err(invalid("mode", "Hamiltonian assembly needs the scalar 1D grid"));
    }
    Ok(())
}

/// (p + A)² + W + H_f + U(x) on particle ⊗ Fock, with A(x) = Φ(a_x),
/// W(x) = Φ(w_x) and U(x) scalar.
fn assemble(
    spec: &ModelSpec,
    basis: &FockBasis,
    a: &[Vec<C64>],
    w: Option<&[Vec<C64>]>,
    scalar: &[f64],
) -> Result<CsrMatrix> {
    let d = basis.dim();
    let nx = spec.nx;
    let total = nx * d;
    let bytes = total as f64 * (d.min(64) as f64) * 24.0 * nx as f64;
    if bytes > spec.budget_mb as f64 * 1024.0 * 1024.0 {
        return Err(Error::BudgetExceeded { dim: total, budget_mb: spec.budget_mb });
    }
    let p = particle_momentum_matrix(spec, 1);
    let p2 = particle_momentum_matrix(spec, 2);
    let hf = free_field(basis);
    let fields: Vec<CsrMatrix> = a.iter().map(|v| field_operator(basis, v)).collect::<Result<_>>()?;
    let mut upper = Vec::new();
    for m in 0..nx {
        let off = m * d;
        let mut block = fields[m].hermitian_product(&fields[m]).lincomb(ONE, &fields[m], p[(m, m)] * 2.0);
        block = block.add(&hf);
        if let Some(w) = w {
            block = block.add(&field_operator(basis, &w[m])?);
        }
        let diag_shift = p2[(m, m)].re + scalar[m];
        let block = block.add(&CsrMatrix::identity(d).scaled(C64::from(diag_shift)));
        for (r, c, v) in block.triplets() {
            if r <= c {
                upper.push((off + r, off + c, v));
            }
        }
        for m2 in m + 1..nx {
            let off2 = m2 * d;
            let sum = fields[m].add(&fields[m2]).scaled(p[(m, m2)]);
            for (r, c, v) in sum.triplets() {
                upper.push((off + r, off2 + c, v));
            }
            let k2 = p2[(m, m2)];
            if k2 != ZERO {
                for i in 0..d {
                    upper.push((off + i, off2 + i, k2));
                }
            }
        }
    }
    Ok(CsrMatrix::hermitian_from_upper(total, upper))
}

/// H = (p + Φ(g_x))² + H_f + V(x).
pub fn assemble_hamiltonian(spec: &ModelSpec, basis: &FockBasis, c: &CouplingSet) -> Result<CsrMatrix> {
    require_scalar(spec)?;
    let a: Vec<Vec<C64>> = c.g.iter().map(|g| g[0].clone()).collect();
    assemble(spec, basis, &a, None, &c.v)
}

/// H̃ from the explicit formula (p + Φ(g̃_x))² - Φ(e_x) + H_f + Ṽ(x).
pub fn assemble_transformed(spec: &ModelSpec, basis: &FockBasis, c: &CouplingSet) -> Result<CsrMatrix> {
    require_scalar(spec)?;
    let a: Vec<Vec<C64>> = c.g_tilde.iter().map(|g| g[0].clone()).collect();
    let w: Vec<Vec<C64>> = c.e.iter().map(|e| e.iter().map(|z| -z).collect()).collect();
    assemble(spec, basis, &a, Some(&w), &c.v_tilde)
}

/// Block-diagonal unitary U = e^{iΦ(q_x)}, one dense Fock block per site.
#[derive(Clone, Debug)]
pub struct PauliFierz {
    pub blocks: Vec<DMat>,
}

pub fn pauli_fierz_unitary(spec: &ModelSpec, basis: &FockBasis, c: &CouplingSet) -> Result<PauliFierz> {
    require_scalar(spec)?;
    let mut blocks = Vec::with_capacity(spec.nx);
    for q in &c.q {
        let phi = field_operator(basis, q)?.to_dense();
        blocks.push(herm_fn(&phi, |l| C64::from_polar(1.0, l)));
    }
    Ok(PauliFierz { blocks })
}

impl PauliFierz {
    fn apply_with(&self, v: &[C64], adjoint: bool) -> Vec<C64> {
        let d = self.blocks[0].nrows();
        let mut out = vec![ZERO; v.len()];
        for (m, u) in self.blocks.iter().enumerate() {
            let x = DVector::from_column_slice(&v[m * d..(m + 1) * d]);
            let y = if adjoint { u.ad_mul(&x) } else { u * x };
            out[m * d..(m + 1) * d].copy_from_slice(y.as_slice());
        }
        out
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        self.apply_with(v, false)
    }

    pub fn apply_adjoint(&self, v: &[C64]) -> Vec<C64> {
        self.apply_with(v, true)
    }

    /// max_x ‖U_x U_x† - I‖.
    pub fn unitarity_defect(&self) -> f64 {
        self.blocks
            .iter()
            .map(|u| {
                let n = u.nrows();
                crate::linalg::op_norm(&(u * u.adjoint() - DMat::identity(n, n)))
            })
            .fold(0.0, f64::max)
    }

    /// U H U* v.
    pub fn conjugate_apply(&self, h: &CsrMatrix, v: &[C64]) -> Vec<C64> {
        self.apply(&h.apply(&self.apply_adjoint(v)))
    }

    /// U H U* as a dense matrix (small dimensions only).
    pub fn conjugate_dense(&self, h: &CsrMatrix) -> DMat {
        let n = h.rows;
        let mut out = DMat::zeros(n, n);
        let mut e = vec![ZERO; n];
        for j in 0..n {
            e[j] = ONE;
            let col = self.conjugate_apply(h, &e);
            e[j] = ZERO;
            for i in 0..n {
                out[(i, j)] = col[i];
            }
        }
        out
    }
}

/// Lowest `count` particle eigenvectors of p² + V.
pub fn particle_ground_states(spec: &ModelSpec, count: usize) -> (Vec<f64>, Vec<Vec<C64>>) {
    let (vals, vecs) = herm_eig(&particle_hamiltonian(spec));
    let count = count.min(spec.nx);
    let vs = (0..count).map(|j| vecs.column(j).iter().copied().collect()).collect();
    (vals[..count].to_vec(), vs)
}

/// ‖Π (U H U* - H̃) Π‖ where Π projects onto the lowest `n_particle`
/// eigenstates of p² + V tensored with Fock sectors ≤ `sector_cap`.
pub fn restricted_leak(
    spec: &ModelSpec,
    basis: &FockBasis,
    u: &PauliFierz,
    h: &CsrMatrix,
    h_tilde: &CsrMatrix,
    n_particle: usize,
    sector_cap: usize,
) -> Result<f64> {
    let d = basis.dim();
    let (_, phis) = particle_ground_states(spec, n_particle);
    let fock_end = basis.sector_offsets[(sector_cap + 1).min(basis.n_max + 1)];
    let mut cols: Vec<Vec<C64>> = Vec::new();
    for phi in &phis {
        for i in 0..fock_end {
            let mut v = vec![ZERO; spec.nx * d];
            for (m, a) in phi.iter().enumerate() {
                v[m * d + i] = *a;
            }
            cols.push(v);
        }
    }
    let k = cols.len();
    // compress the difference onto the orthonormal set `cols`
    let mut small = DMat::zeros(k, k);
    for (j, cj) in cols.iter().enumerate() {
        let a = u.conjugate_apply(h, cj);
        let b = h_tilde.apply(cj);
        let diff: Vec<C64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        for (i, ci) in cols.iter().enumerate() {
            small[(i, j)] = dot(ci, &diff);
        }
    }
    Ok(crate::linalg::op_norm(&small))
}

/// (p² + H_f + v0 + 1)^{-1}, exact in the plane-wave ⊗ Fock basis; used to
/// precondition the eigensolver. With `sites` set it acts on the
/// compression to those particle sites.
pub struct KineticPreconditioner {
    waves: DMat,
    denom: Vec<f64>,
    d: usize,
    sites: Option<Vec<usize>>,
}

impl KineticPreconditioner {
    pub fn new(spec: &ModelSpec, basis: &FockBasis) -> Self {
        let n = spec.nx;
        let xs = spec.x_points();
        let ps = particle_momenta(spec);
        let s = 1.0 / (n as f64).sqrt();
        let waves = DMat::from_fn(n, n, |a, j| C64::from_polar(s, ps[j] * xs[a]));
        let hf = second_quantize_diag_values(basis, &spec.grid.omega_modes());
        let shift = spec.v0.abs() + 1.0;
        let d = basis.dim();
        let mut denom = Vec::with_capacity(n * d);
        for p in &ps {
            for e in &hf {
                denom.push(p * p + e + shift);
            }
        }
        KineticPreconditioner { waves, denom, d, sites: None }
    }

    pub fn restricted(mut self, sites: Vec<usize>) -> Self {
        self.sites = Some(sites);
        self
    }

    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        let n = self.waves.nrows();
        let d = self.d;
        let mut full = DMat::zeros(n, d);
        match &self.sites {
            None => full.copy_from(&DMat::from_row_slice(n, d, x)),
            Some(s) => {
                for (r, &m) in s.iter().enumerate() {
                    for i in 0..d {
                        full[(m, i)] = x[r * d + i];
                    }
                }
            }
        }
        let mut k = self.waves.adjoint() * full;
        for j in 0..n {
            for i in 0..d {
                k[(j, i)] /= self.denom[j * d + i];
            }
        }
        let back = &self.waves * k;
        match &self.sites {
            None => {
                for m in 0..n {
                    for i in 0..d {
                        y[m * d + i] = back[(m, i)];
                    }
                }
            }
            Some(s) => {
                for (r, &m) in s.iter().enumerate() {
                    for i in 0..d {
                        y[r * d + i] = back[(m, i)];
                    }
                }
            }
        }
    }
}

/// Lowest `count` eigenpairs of H: dense for small matrices, otherwise
/// preconditioned block iteration.
pub fn lowest_eigenvalues_with(
    h: &CsrMatrix,
    pre: &KineticPreconditioner,
    count: usize,
    tol: f64,
) -> Result<EigenResult> {
    if h.rows <= 400 {
        return dense_lowest(h, count);
    }
    let apply = |x: &[C64], y: &mut [C64]| h.matvec(x, y);
    let prec = |x: &[C64], y: &mut [C64]| pre.apply(x, y);
    lobpcg_lowest(&apply, &prec, h.rows, count, tol, 2000, 11)
}

fn dense_lowest(h: &CsrMatrix, count: usize) -> Result<EigenResult> {
    let (vals, vecs) = herm_eig(&h.to_dense());
    let count = count.min(h.rows);
    Ok(EigenResult {
        values: vals[..count].to_vec(),
        vectors: (0..count).map(|j| vecs.column(j).iter().copied().collect()).collect(),
        residuals: vec![0.0; count],
        iterations: h.rows,
    })
}

/// Lowest `count` eigenpairs of a Hamiltonian built on `spec` and `basis`.
pub fn lowest_eigenvalues(
    spec: &ModelSpec,
    basis: &FockBasis,
    h: &CsrMatrix,
    count: usize,
    tol: f64,
) -> Result<EigenResult> {
    if h.rows != spec.nx * basis.dim() {
        return Err(Error::BasisMismatch { expected: spec.nx * basis.dim(), got: h.rows });
    }
    lowest_eigenvalues_with(h, &KineticPreconditioner::new(spec, basis), count, tol)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdReport {
    pub radii: Vec<f64>,
    pub minima: Vec<f64>,
    pub sigma_hat: f64,
    pub monotone: bool,
}

/// Lowest energy of H compressed to states supported in |x| ≥ R, for each
/// R; the estimate is the value at the largest R.
pub fn estimate_ionization_threshold(
    spec: &ModelSpec,
    basis: &FockBasis,
    h: &CsrMatrix,
    radii: &[f64],
) -> Result<ThresholdReport> {
    if radii.is_empty() {
        return Err(invalid("radii", "empty"));
    }
    let half = 0.5 * spec.box_length();
    let d = basis.dim();
    let xs = spec.x_points();
    let mut minima = Vec::with_capacity(radii.len());
    for &r in radii {
        if !(r >= 0.0 && r < half) {
            return Err(invalid("radii", format!("{r} not in [0, {half})")));
        }
        let keep: Vec<usize> = xs
            .iter()
            .enumerate()
            .filter(|(_, x)| x.abs() >= r)
            .flat_map(|(m, _)| m * d..(m + 1) * d)
            .collect();
        let sites: Vec<usize> = (0..spec.nx).filter(|&m| xs[m].abs() >= r).collect();
        let hr = h.compress(&keep);
        let pre = KineticPreconditioner::new(spec, basis).restricted(sites);
        minima.push(lowest_eigenvalues_with(&hr, &pre, 1, 1e-10)?.values[0]);
    }
    let mut order: Vec<usize> = (0..radii.len()).collect();
    order.sort_by(|&a, &b| radii[a].partial_cmp(&radii[b]).unwrap());
    let monotone = order.windows(2).all(|w| minima[w[1]] >= minima[w[0]] - 1e-8);
    let sigma_hat = minima[*order.last().unwrap()];
    Ok(ThresholdReport { radii: radii.to_vec(), minima, sigma_hat, monotone })
}

/// Smooth window equal to 1 on [lo, hi] and 0 outside [lo - ramp, hi + ramp].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterProfile {
    pub lo: f64,
    pub hi: f64,
    pub ramp: f64,
}

impl FilterProfile {
    pub fn eval(&self, e: f64) -> f64 {
        let out = (self.lo - e).max(e - self.hi).max(0.0);
        bump::h(1.0 + out / self.ramp)
    }

    pub fn support_top(&self) -> f64 {
        self.hi + self.ramp
    }

    pub fn zero() -> Self {
        FilterProfile { lo: 0.0, hi: -1.0, ramp: f64::MIN_POSITIVE }
    }

    fn is_zero(&self) -> bool {
        self.hi < self.lo
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FilterMethod {
    Dense,
    Chebyshev { degree: usize },
}

/// χ(H) in one of two realizations.
#[derive(Clone, Debug)]
pub enum SpectralFilter {
    Dense(DMat),
    Chebyshev { h: CsrMatrix, center: f64, half_width: f64, coeffs: Vec<f64>, tail: f64 },
}

pub fn spectral_filter(
    h: &CsrMatrix,
    chi: &FilterProfile,
    sigma_hat: f64,
    margin: f64,
    method: FilterMethod,
) -> Result<SpectralFilter> {
    if !chi.is_zero() && chi.support_top() >= sigma_hat - margin {
        return Err(Error::SupportAboveThreshold { top: chi.support_top(), threshold: sigma_hat, margin });
    }
    let f = |e: f64| if chi.is_zero() { 0.0 } else { chi.eval(e) };
    match method {
        FilterMethod::Dense => Ok(SpectralFilter::Dense(herm_fn(&h.to_dense(), |e| C64::from(f(e))))),
        FilterMethod::Chebyshev { degree } => {
            let (lo, hi) = gershgorin(h);
            let center = 0.5 * (lo + hi);
            let half_width = 0.5 * (hi - lo) * 1.01 + 1e-12;
            let n = 4 * degree.max(1) + 64;
            let samples: Vec<f64> = (0..n)
                .map(|k| f(center + half_width * (std::f64::consts::PI * (k as f64 + 0.5) / n as f64).cos()))
                .collect();
            let all: Vec<f64> = (0..n)
                .map(|j| {
                    let s: f64 = samples
                        .iter()
                        .enumerate()
                        .map(|(k, v)| v * (std::f64::consts::PI * j as f64 * (k as f64 + 0.5) / n as f64).cos())
                        .sum();
                    2.0 * s / n as f64 * if j == 0 { 0.5 } else { 1.0 }
                })
                .collect();
            let coeffs = all[..=degree].to_vec();
            let tail = all[degree + 1..].iter().map(|c| c.abs()).sum();
            Ok(SpectralFilter::Chebyshev { h: h.clone(), center, half_width, coeffs, tail })
        }
    }
}

fn gershgorin(h: &CsrMatrix) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for r in 0..h.rows {
        let mut d = 0.0;
        let mut off = 0.0;
        for (c, v) in h.row(r) {
            if c == r {
                d = v.re;
            } else {
                off += v.norm();
            }
        }
        lo = lo.min(d - off);
        hi = hi.max(d + off);
    }
    (lo, hi)
}

impl SpectralFilter {
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        match self {
            SpectralFilter::Dense(m) => (m * DVector::from_column_slice(v)).as_slice().to_vec(),
            SpectralFilter::Chebyshev { h, center, half_width, coeffs, .. } => {
                let scaled = |x: &[C64]| -> Vec<C64> {
                    let hx = h.apply(x);
                    hx.iter().zip(x).map(|(a, b)| (a - b * *center) / *half_width).collect()
                };
                let mut t0 = v.to_vec();
                let mut out: Vec<C64> = t0.iter().map(|a| a * coeffs[0]).collect();
                if coeffs.len() == 1 {
                    return out;
                }
                let mut t1 = scaled(&t0);
                for (o, a) in out.iter_mut().zip(&t1) {
                    *o += a * coeffs[1];
                }
                for &c in &coeffs[2..] {
                    let s = scaled(&t1);
                    let t2: Vec<C64> = s.iter().zip(&t0).map(|(a, b)| a * 2.0 - b).collect();
                    for (o, a) in out.iter_mut().zip(&t2) {
                        *o += a * c;
                    }
                    t0 = t1;
                    t1 = t2;
                }
                out
            }
        }
    }

    /// Tail bound of the truncated series (0 for the dense realization).
    pub fn tail(&self) -> f64 {
        match self {
            SpectralFilter::Dense(_) => 0.0,
            SpectralFilter::Chebyshev { tail, .. } => *tail,
        }
    }

    pub fn norm(&self) -> Result<f64> {
        match self {
            SpectralFilter::Dense(m) => Ok(crate::linalg::op_norm(m)),
            SpectralFilter::Chebyshev { h, .. } => {
                let a = |x: &[C64], y: &mut [C64]| y.copy_from_slice(&self.apply(x));
                lanczos_op_norm(&a, &a, h.rows, h.rows, 1e-10, 5)
            }
        }
    }
}

/// Particle marginal |ψ|(x_m) = (Σ_i |ψ(m, i)|²)^{1/2}.
pub fn particle_marginal(spec: &ModelSpec, psi: &[C64]) -> Vec<f64> {
    let d = psi.len() / spec.nx;
    (0..spec.nx).map(|m| norm(&psi[m * d..(m + 1) * d])).collect()
}

/// Fraction of ‖ψ‖² on particle sites within `width` of the periodic edge.
pub fn particle_boundary_mass(spec: &ModelSpec, psi: &[C64], width: f64) -> f64 {
    let half = 0.5 * spec.box_length();
    let marg = particle_marginal(spec, psi);
    let total: f64 = marg.iter().map(|a| a * a).sum();
    let edge: f64 = marg
        .iter()
        .zip(spec.x_points())
        .filter(|(_, x)| x.abs() >= half - width)
        .map(|(a, _)| a * a)
        .sum();
    if total > 0.0 { edge / total } else { 0.0 }
}

/// ‖e^{δ|x|}ψ‖ / ‖ψ‖.
pub fn exponential_weight_ratio(spec: &ModelSpec, psi: &[C64], delta: f64) -> f64 {
    let marg = particle_marginal(spec, psi);
    let xs = spec.x_points();
    let num: f64 = marg.iter().zip(&xs).map(|(a, x)| (a * (delta * x.abs()).exp()).powi(2)).sum();
    num.sqrt() / norm(psi)
}

/// Least-squares slope of log |ψ|(x) against |x| over r_min ≤ |x| ≤ r_max.
pub fn tail_decay_slope(spec: &ModelSpec, psi: &[C64], r_min: f64, r_max: f64) -> Result<f64> {
    let marg = particle_marginal(spec, psi);
    let pts: Vec<(f64, f64)> = spec
        .x_points()
        .iter()
        .zip(&marg)
        .filter(|(x, a)| x.abs() >= r_min && x.abs() <= r_max && **a > 0.0)
        .map(|(x, a)| (x.abs(), a.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::ShortWindow { got: pts.len(), need: 3 });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_photon_grid;

    fn spec(m: usize, nx: usize, n_max: usize, scale: f64) -> ModelSpec {
        let g = build_photon_grid(1, m, 0.5, Mode::Scalar1d).unwrap();
        let mut s = ModelSpec::new(Arc::new(g), nx, 0.5, n_max);
        s.coupling_scale = scale;
        s
    }

    #[test]
    fn origin_has_trivial_dressing() {
        let s = spec(8, 8, 1, 0.3);
        let c = couplings_at(&s, &[[0.0; 3]], &[0.0]).unwrap();
        assert!(c.q[0].iter().all(|z| *z == ZERO));
        assert!(c.e[0].iter().all(|z| *z == ZERO));
        for j in 0..8 {
            let expect = c.g[0][0][j] - C64::from(bump::phi_prime(0.0)) * c.g[0][0][j];
            assert!((c.g_tilde[0][0][j] - expect).norm() < 1e-15);
        }
        assert_eq!(c.v_tilde[0], 0.0);
    }

    #[test]
    fn e_is_exactly_i_omega_q() {
        let s = spec(8, 8, 1, 0.3);
        let c = build_couplings(&s).unwrap();
        for (q, e) in c.q.iter().zip(&c.e) {
            for (j, (a, b)) in q.iter().zip(e).enumerate() {
                assert_eq!(*b, I * (s.grid.omega[j] * a.re));
            }
        }
        for (v, vt) in c.v.iter().zip(&c.v_tilde) {
            assert!(vt >= v);
        }
    }

    #[test]
    fn plateau_region_has_no_subtraction() {
        let s = spec(16, 8, 1, 0.3);
        let x = 40.0;
        let c = couplings_at(&s, &[[x, 0.0, 0.0]], &[0.0]).unwrap();
        for j in 0..16 {
            if s.grid.omega[j].powf(s.mu) * x >= 1.0 {
                assert_eq!(c.g_tilde[0][0][j], c.g[0][0][j]);
            }
        }
    }

    #[test]
    fn zero_coupling_is_decoupled_sum() {
        let s = spec(4, 6, 2, 0.0);
        let b = s.fock_basis().unwrap();
        let c = build_couplings(&s).unwrap();
        let h = assemble_hamiltonian(&s, &b, &c).unwrap();
        assert!(h.is_hermitian());
        let (pe, _) = herm_eig(&particle_hamiltonian(&s));
        let hf: Vec<f64> = free_field(&b).diag().iter().map(|z| z.re).collect();
        let mut want: Vec<f64> = pe.iter().flat_map(|a| hf.iter().map(move |b| a + b)).collect();
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let (got, _) = herm_eig(&h.to_dense());
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        let u = pauli_fierz_unitary(&s, &b, &c).unwrap();
        assert!(u.unitarity_defect() < 1e-14);
        let ht = assemble_transformed(&s, &b, &c).unwrap();
        assert_eq!(ht, h);
    }

    #[test]
    fn threshold_is_monotone_in_radius() {
        let s = spec(4, 16, 1, 0.05);
        let b = s.fock_basis().unwrap();
        let c = build_couplings(&s).unwrap();
        let h = assemble_hamiltonian(&s, &b, &c).unwrap();
        let r = estimate_ionization_threshold(&s, &b, &h, &[0.5, 1.5, 2.5]).unwrap();
        assert!(r.monotone, "{r:?}");
        let e0 = lowest_eigenvalues(&s, &b, &h, 1, 1e-10).unwrap().values[0];
        assert!(r.sigma_hat > e0);
    }

    #[test]
    fn filter_rejects_support_above_threshold() {
        let s = spec(4, 6, 1, 0.0);
        let b = s.fock_basis().unwrap();
        let h = assemble_hamiltonian(&s, &b, &build_couplings(&s).unwrap()).unwrap();
        let chi = FilterProfile { lo: -5.0, hi: 0.0, ramp: 0.5 };
        assert!(spectral_filter(&h, &chi, 0.2, 0.1, FilterMethod::Dense).is_err());
        let z = spectral_filter(&h, &FilterProfile::zero(), 0.2, 0.1, FilterMethod::Dense).unwrap();
        assert_eq!(z.norm().unwrap(), 0.0);
    }

    #[test]
    fn chebyshev_matches_dense_filter() {
        let s = spec(4, 8, 1, 0.1);
        let b = s.fock_basis().unwrap();
        let h = assemble_hamiltonian(&s, &b, &build_couplings(&s).unwrap()).unwrap();
        let chi = FilterProfile { lo: -4.0, hi: -1.0, ramp: 1.0 };
        let d = spectral_filter(&h, &chi, 10.0, 0.1, FilterMethod::Dense).unwrap();
        let c = spectral_filter(&h, &chi, 10.0, 0.1, FilterMethod::Chebyshev { degree: 200 }).unwrap();
        let v = crate::linalg::start_vector(h.rows, 3);
        let diff: Vec<C64> = d.apply(&v).iter().zip(c.apply(&v)).map(|(a, b)| a - b).collect();
        assert!(norm(&diff) < 1e-6 + 2.0 * c.tail(), "{} tail {}", norm(&diff), c.tail());
    }

    fn well(m: usize, nx: usize, dx: f64, n_max: usize, scale: f64) -> ModelSpec {
        let g = build_photon_grid(1, m, 0.5, Mode::Scalar1d).unwrap();
        let mut s = ModelSpec::new(Arc::new(g), nx, dx, n_max);
        s.coupling_scale = scale;
        s.v0 = 6.0;
        s
    }

    #[test]
    fn vacuum_dressing_raises_energy() {
        let s = spec(4, 16, 2, 0.3);
        let b = s.fock_basis().unwrap();
        let h = assemble_hamiltonian(&s, &b, &build_couplings(&s).unwrap()).unwrap();
        let (e, phis) = particle_ground_states(&s, 1);
        let d = b.dim();
        let mut v = vec![ZERO; h.rows];
        for (m, a) in phis[0].iter().enumerate() {
            v[m * d] = *a;
        }
        let energy = dot(&v, &h.apply(&v)).re;
        assert!(energy >= e[0] - 1e-12, "{energy} < {}", e[0]);
    }

    #[test]
    fn free_threshold_is_small_and_nonnegative() {
        let mut s = spec(4, 24, 1, 0.0);
        s.v0 = 0.0;
        let b = s.fock_basis().unwrap();
        let h = assemble_hamiltonian(&s, &b, &build_couplings(&s).unwrap()).unwrap();
        let r = estimate_ionization_threshold(&s, &b, &h, &[1.0, 2.0]).unwrap();
        let free_len = s.box_length() - 4.0;
        assert!(r.sigma_hat > -1e-10);
        assert!(r.sigma_hat <= 1.5 * (std::f64::consts::PI / free_len).powi(2), "{r:?}");
    }

    #[test]
    fn deep_well_leaves_an_energy_window() {
        let s = well(2, 48, 0.25, 2, 0.1);
        let b = s.fock_basis().unwrap();
        let h = assemble_hamiltonian(&s, &b, &build_couplings(&s).unwrap()).unwrap();
        let r = estimate_ionization_threshold(&s, &b, &h, &[2.0, 3.0, 4.0]).unwrap();
        let e0 = lowest_eigenvalues(&s, &b, &h, 1, 1e-9).unwrap().values[0];
        assert!(r.monotone, "{r:?}");
        assert!(r.sigma_hat > e0 + 1.0, "{} vs {e0}", r.sigma_hat);
    }

    #[test]
    fn lobpcg_agrees_with_dense() {
        let s = well(2, 48, 0.25, 3, 0.2);
        let b = s.fock_basis().unwrap();
        let h = assemble_hamiltonian(&s, &b, &build_couplings(&s).unwrap()).unwrap();
        assert!(h.rows > 400);
        let it = lowest_eigenvalues(&s, &b, &h, 5, 1e-10).unwrap();
        let (dense, _) = herm_eig(&h.to_dense());
        for j in 0..5 {
            assert!((it.values[j] - dense[j]).abs() < 1e-8, "{j}: {} vs {}", it.values[j], dense[j]);
        }
    }

    #[test]
    fn isolated_level_filter_is_rank_one_projector() {
        let s = well(2, 24, 0.5, 1, 0.1);
        let b = s.fock_basis().unwrap();
        let h = assemble_hamiltonian(&s, &b, &build_couplings(&s).unwrap()).unwrap();
        let (vals, _) = herm_eig(&h.to_dense());
        let gap = vals[1] - vals[0];
        let chi = FilterProfile { lo: vals[0] - 1.0, hi: vals[0] + 0.1 * gap, ramp: 0.5 * gap };
        let f = spectral_filter(&h, &chi, vals[1] + 1.0, 0.1, FilterMethod::Dense).unwrap();
        let SpectralFilter::Dense(m) = f else { unreachable!() };
        let tr: f64 = (0..m.nrows()).map(|i| m[(i, i)].re).sum();
        assert!((tr - 1.0).abs() < 1e-10);
        assert!(crate::linalg::op_norm(&(&m * &m - &m)) < 1e-10);
    }

    #[test]
    fn filtered_ground_state_decays_exponentially() {
        let s = well(2, 48, 0.25, 1, 0.1);
        let b = s.fock_basis().unwrap();
        let h = assemble_hamiltonian(&s, &b, &build_couplings(&s).unwrap()).unwrap();
        let r = estimate_ionization_threshold(&s, &b, &h, &[3.0, 4.0]).unwrap();
        let (vals, _) = herm_eig(&h.to_dense());
        let chi = FilterProfile { lo: vals[0] - 1.0, hi: vals[0] + 0.2, ramp: 0.3 };
        let delta = (r.sigma_hat - chi.support_top()).max(0.0).sqrt() * 0.9;
        assert!(delta > 0.5);
        let f = spectral_filter(&h, &chi, r.sigma_hat, 0.1, FilterMethod::Dense).unwrap();
        let psi = f.apply(&crate::linalg::start_vector(h.rows, 8));
        let ratio = exponential_weight_ratio(&s, &psi, delta);
        assert!(ratio.is_finite() && ratio < 1e3, "{ratio}");
        assert!(tail_decay_slope(&s, &psi, 1.5, 5.0).unwrap() < -delta);
        assert!(particle_boundary_mass(&s, &psi, 1.0) < 1e-6);
    }
}
