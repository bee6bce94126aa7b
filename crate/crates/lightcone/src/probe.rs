//! Light-cone observables and the rate fits built on them.
//!
//! Photon observables diagonal in position, dΓ(f(|y|)), are evaluated from
//! the one-photon position density n(y) = Σ |(U† a ψ)(y)|², which avoids
//! forming dΓ as a matrix on large grids.

use num_complex::Complex64 as C64;

use crate::error::{invalid, Error, Result};
use crate::fock::{field_operator, second_quantize, second_quantize_diag_values, FockBasis};
use crate::grid::{bump, PhotonGrid};
use crate::linalg::{norm, CsrMatrix, ZERO};
use crate::model::{couplings_at, ModelSpec};

/// Minimum number of samples in any fit window.
pub const MIN_FIT_SAMPLES: usize = 8;
/// Tolerance on the Theil-Sen slope for the boundedness verdict.
pub const TREND_TOLERANCE: f64 = 0.02;

/// Exponent allowed for speed c: min(½(1 - 1/c), 1/10), and 0 for c ≤ 1
/// where no decay is claimed.
pub fn gamma_ceiling(c: f64) -> f64 {
    (0.5 * (1.0 - 1.0 / c)).clamp(0.0, 0.1)
}

/// θ = 2((1 - 1/c)β - γ).
pub fn theta(c: f64, beta: f64, gamma: f64) -> f64 {
    2.0 * ((1.0 - 1.0 / c) * beta - gamma)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeSpec {
    pub c: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub epsilon: f64,
    /// Low-pass exponent of the small-momentum estimate.
    pub nu: f64,
}

impl ProbeSpec {
    /// ε defaults to the midpoint (1/2 - 2γ)/2 and ν to 2/5.
    pub fn new(c: f64, beta: f64, gamma: f64, delta: f64) -> Result<Self> {
        let s = ProbeSpec { c, beta, gamma, delta, epsilon: 0.25 - gamma, nu: 0.4 };
        s.validate()?;
        Ok(s)
    }

    pub fn theta(&self) -> f64 {
        theta(self.c, self.beta, self.gamma)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 1.0) {
            return Err(invalid("c", format!("{} must exceed 1", self.c)));
        }
        if !(0.0 <= self.beta && self.beta < self.delta && self.delta < 1.0) {
            return Err(invalid(
                "delta",
                format!("need 0 <= beta < delta < 1, got beta {} delta {}", self.beta, self.delta),
            ));
        }
        let g_max = ((1.0 - 1.0 / self.c) * self.beta).min((3.0 * self.delta - 2.0) / 10.0);
        if !(self.gamma >= 0.0 && self.gamma < g_max) {
            return Err(invalid("gamma", format!("{} outside [0, {g_max})", self.gamma)));
        }
        if !(self.gamma < gamma_ceiling(self.c)) {
            return Err(invalid("gamma", format!("{} not below {}", self.gamma, gamma_ceiling(self.c))));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5 - 2.0 * self.gamma) {
            return Err(invalid("epsilon", format!("{} outside (0, {})", self.epsilon, 0.5 - 2.0 * self.gamma)));
        }
        if !(self.theta() > 0.0) {
            return Err(invalid("gamma", format!("theta = {} must be positive", self.theta())));
        }
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return Err(invalid("nu", format!("{} outside (0, 1)", self.nu)));
        }
        Ok(())
    }
}

/// Photon number density over position sites (summed over polarizations)
/// for a particle ⊗ Fock state in x-major order.
pub fn photon_position_density(basis: &FockBasis, psi: &[C64]) -> Result<Vec<f64>> {
    let d = basis.dim();
    if d == 0 || psi.len() % d != 0 {
        return Err(Error::BasisMismatch { expected: d, got: psi.len() });
    }
    let grid = &basis.grid;
    let pol = grid.polarizations;
    let sites = grid.sites();
    let lower_end = basis.sector_offsets[basis.n_max];
    let mut targets: Vec<Vec<(u32, usize, f64)>> = vec![Vec::new(); lower_end];
    for i in basis.sector_offsets[1]..d {
        for (j, c, w) in basis.lowerings(i) {
            targets[c].push((j, i, w));
        }
    }
    let mut dens = vec![0.0; sites];
    let mut buf = vec![ZERO; sites];
    for block in psi.chunks(d) {
        for ups in &targets {
            if ups.is_empty() {
                continue;
            }
            // (a_j ψ)(c) = √n_j ψ(i) over all i with a_j|i⟩ ∝ |c⟩
            for lam in 0..pol {
                buf.iter_mut().for_each(|b| *b = ZERO);
                let mut any = false;
                for &(j, i, w) in ups {
                    if j as usize % pol == lam && block[i] != ZERO {
                        buf[j as usize / pol] += block[i] * w;
                        any = true;
                    }
                }
                if !any {
                    continue;
                }
                grid.transform_sites(&mut buf, true);
                for (n, b) in dens.iter_mut().zip(&buf) {
                    *n += b.norm_sqr();
                }
            }
        }
    }
    Ok(dens)
}

/// ⟨dΓ(f(|y|))⟩ from a position density.
pub fn position_expectation(grid: &PhotonGrid, density: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    grid.y_norms().iter().zip(density).map(|(&r, n)| f(r) * n).sum()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConeMass {
    /// ⟨dΓ(F(|y|/ct))⟩.
    pub smooth: f64,
    /// ⟨dΓ(1_{|y| ≥ ct})⟩.
    pub sharp: f64,
    pub radius: f64,
    /// The cone radius reaches the box edge; the value is then meaningless.
    pub outside_box: bool,
}

pub fn cone_mass_from_density(grid: &PhotonGrid, density: &[f64], c: f64, t: f64) -> Result<ConeMass> {
    if !(t >= 1.0) {
        return Err(invalid("t", format!("{t} must be at least 1")));
    }
    if !(c > 0.0) {
        return Err(invalid("c", format!("{c} must be positive")));
    }
    let ct = c * t;
    Ok(ConeMass {
        smooth: position_expectation(grid, density, |r| bump::big_f(r / ct)),
        sharp: position_expectation(grid, density, |r| if r >= ct { 1.0 } else { 0.0 }),
        radius: ct,
        outside_box: ct >= grid.box_half_length(),
    })
}

pub fn outside_cone_mass(basis: &FockBasis, psi: &[C64], c: f64, t: f64) -> Result<ConeMass> {
    let dens = photon_position_density(basis, psi)?;
    cone_mass_from_density(&basis.grid, &dens, c, t)
}

/// Per-site values t^{2γ} J_β(|y|²/(ct)²) of the propagation observable.
pub fn propagation_values(grid: &PhotonGrid, spec: &ProbeSpec, t: f64) -> Result<Vec<f64>> {
    spec.validate()?;
    if !(t >= 1.0) {
        return Err(invalid("t", format!("{t} must be at least 1")));
    }
    let ct = spec.c * t;
    let pre = t.powf(2.0 * spec.gamma);
    Ok(grid.y_norms().iter().map(|&r| pre * bump::j_beta(spec.beta, (r / ct).powi(2))).collect())
}

/// Φ_t = t^{2γ} dΓ(J_β(v²)) as a Fock-space matrix.
pub fn propagation_observable(basis: &FockBasis, spec: &ProbeSpec, t: f64) -> Result<CsrMatrix> {
    let vals = propagation_values(&basis.grid, spec, t)?;
    second_quantize(basis, &basis.grid.position_matrix(&vals))
}

pub fn propagation_expectation(grid: &PhotonGrid, density: &[f64], spec: &ProbeSpec, t: f64) -> Result<f64> {
    let vals = propagation_values(grid, spec, t)?;
    Ok(vals.iter().zip(density).map(|(v, n)| v * n).sum())
}

/// Diagonal of dΓ(|k|^{-δ}) over the Fock basis.
pub fn small_momentum_diagonal(basis: &FockBasis, delta: f64) -> Result<Vec<f64>> {
    if !(delta > -1.0 && delta < 1.5) {
        return Err(invalid("delta", format!("{delta} outside (-1, 3/2)")));
    }
    let w: Vec<f64> = basis.grid.omega_modes().iter().map(|k| k.powf(-delta)).collect();
    Ok(second_quantize_diag_values(basis, &w))
}

/// ⟨ψ, dΓ(d) ψ⟩ for a Fock-diagonal dΓ given by its diagonal.
pub fn diagonal_expectation(diag: &[f64], psi: &[C64]) -> Result<f64> {
    let d = diag.len();
    if d == 0 || psi.len() % d != 0 {
        return Err(Error::BasisMismatch { expected: d, got: psi.len() });
    }
    Ok(psi.chunks(d).map(|b| b.iter().zip(diag).map(|(a, w)| a.norm_sqr() * w).sum::<f64>()).sum())
}

pub fn least_squares_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Median of pairwise slopes.
pub fn theil_sen_slope(x: &[f64], y: &[f64]) -> f64 {
    let mut s = Vec::with_capacity(x.len() * x.len() / 2);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            if x[j] != x[i] {
                s.push((y[j] - y[i]) / (x[j] - x[i]));
            }
        }
    }
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Indices of samples in the trailing half of [t0, t_end].
pub fn trailing_half(times: &[f64], t0: f64, t_end: f64) -> Result<Vec<usize>> {
    let start = t0 + 0.5 * (t_end - t0);
    let idx: Vec<usize> = (0..times.len()).filter(|&i| times[i] >= start && times[i] <= t_end).collect();
    if idx.len() < MIN_FIT_SAMPLES {
        return Err(Error::ShortWindow { got: idx.len(), need: MIN_FIT_SAMPLES });
    }
    Ok(idx)
}

fn log_series(times: &[f64], ys: &[f64], idx: &[usize]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut lx = Vec::with_capacity(idx.len());
    let mut ly = Vec::with_capacity(idx.len());
    for &i in idx {
        if !(ys[i] > 0.0) {
            return Err(invalid("series", format!("non-positive sample {} at t = {}", ys[i], times[i])));
        }
        lx.push(times[i].ln());
        ly.push(ys[i].ln());
    }
    Ok((lx, ly))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayFit {
    pub c: f64,
    pub gamma_ceiling: f64,
    /// Minus the least-squares slope of log mass against log t.
    pub gamma_hat: f64,
    pub slope: f64,
    /// Theil-Sen slope of log(t^{2γ} mass).
    pub trend: f64,
    /// slope ≤ -2 γ_ceiling.
    pub decays: bool,
    /// trend ≤ TREND_TOLERANCE.
    pub bounded: bool,
    pub window: (f64, f64),
    pub residuals: Vec<f64>,
}

/// Fits the outside-cone mass over the trailing half of [times[0], t_box]
/// where t_box = (box half-length)/(2c).
pub fn lightcone_decay_fit(times: &[f64], mass: &[f64], c: f64, gamma: f64, box_half: f64) -> Result<DecayFit> {
    if times.len() != mass.len() {
        return Err(Error::BasisMismatch { expected: times.len(), got: mass.len() });
    }
    if times.is_empty() {
        return Err(Error::ShortWindow { got: 0, need: MIN_FIT_SAMPLES });
    }
    let t_box = box_half / (2.0 * c);
    let idx = trailing_half(times, times[0], t_box.min(*times.last().unwrap()))?;
    let (lx, ly) = log_series(times, mass, &idx)?;
    let (slope, icpt) = least_squares_slope(&lx, &ly);
    let residuals = lx.iter().zip(&ly).map(|(x, y)| y - (icpt + slope * x)).collect();
    let weighted: Vec<f64> = lx.iter().zip(&ly).map(|(x, y)| y + 2.0 * gamma * x).collect();
    let trend = theil_sen_slope(&lx, &weighted);
    let gp = gamma_ceiling(c);
    Ok(DecayFit {
        c,
        gamma_ceiling: gp,
        gamma_hat: -slope,
        slope,
        trend,
        decays: slope <= -2.0 * gp,
        bounded: trend <= TREND_TOLERANCE,
        window: (times[idx[0]], times[*idx.last().unwrap()]),
        residuals,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrowthFit {
    pub delta: f64,
    pub slope: f64,
    /// 2(1 + δ)/5.
    pub bound: f64,
    pub pass: bool,
    pub window: (f64, f64),
}

/// Log-log slope of ⟨dΓ(|k|^{-δ})⟩_t over the trailing half of the run;
/// passes when it is at most 2(1 + δ)/5 + 0.1.
pub fn small_momentum_growth(times: &[f64], series: &[f64], delta: f64) -> Result<GrowthFit> {
    if !(delta > -1.0 && delta < 1.5) {
        return Err(invalid("delta", format!("{delta} outside (-1, 3/2)")));
    }
    if times.len() != series.len() || times.is_empty() {
        return Err(Error::BasisMismatch { expected: times.len(), got: series.len() });
    }
    let idx = trailing_half(times, times[0], *times.last().unwrap())?;
    let (lx, ly) = log_series(times, series, &idx)?;
    let (slope, _) = least_squares_slope(&lx, &ly);
    let bound = 2.0 * (1.0 + delta) / 5.0;
    Ok(GrowthFit {
        delta,
        slope,
        bound,
        pass: slope <= bound + 0.1,
        window: (times[idx[0]], times[*idx.last().unwrap()]),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditReport {
    pub theta: f64,
    pub c1: f64,
    pub c2: f64,
    /// Fraction of times after the first quartile with L(t) ≤ slack.
    pub fraction_ok: f64,
    pub checked: usize,
    pub slack: f64,
    pub margins: Vec<f64>,
}

/// Smallest C1 + C2 with C1, C2 ≥ 0 and a_i C1 + b_i C2 ≥ r_i for all i.
fn fit_constants(a: &[f64], b: &[f64], r: &[f64]) -> (f64, f64) {
    let feasible = |c1: f64, c2: f64| {
        c1 >= 0.0 && c2 >= 0.0 && (0..r.len()).all(|i| a[i] * c1 + b[i] * c2 >= r[i] - 1e-12 * r[i].abs().max(1e-300))
    };
    let mut cands: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    for i in 0..r.len() {
        if a[i] > 0.0 {
            cands.push((r[i] / a[i], 0.0));
        }
        if b[i] > 0.0 {
            cands.push((0.0, r[i] / b[i]));
        }
        for j in i + 1..r.len() {
            let det = a[i] * b[j] - a[j] * b[i];
            if det.abs() > 1e-300 {
                cands.push(((r[i] * b[j] - r[j] * b[i]) / det, (a[i] * r[j] - a[j] * r[i]) / det));
            }
        }
    }
    cands
        .into_iter()
        .filter(|&(x, y)| feasible(x, y))
        .min_by(|p, q| (p.0 + p.1).partial_cmp(&(q.0 + q.1)).unwrap())
        .unwrap_or((f64::INFINITY, f64::INFINITY))
}

/// Checks L(t) = ⟨DΦ_t⟩ + (θ/t)⟨Φ_t⟩ - C1 t^{-1-δ+2γ}⟨dΓ(|k|^{-δ})⟩ - C2 t^{-1-ε}
/// with C1, C2 fitted on the first quartile. ⟨DΦ_t⟩ is the derivative of
/// the recorded ⟨Φ_t⟩ series along the trajectory. Report only.
pub fn heisenberg_inequality_audit(
    times: &[f64],
    phi: &[f64],
    small_momentum: &[f64],
    spec: &ProbeSpec,
    slack: f64,
) -> Result<AuditReport> {
    spec.validate()?;
    let n = times.len();
    if phi.len() != n || small_momentum.len() != n {
        return Err(Error::BasisMismatch { expected: n, got: phi.len().min(small_momentum.len()) });
    }
    if n < MIN_FIT_SAMPLES {
        return Err(Error::ShortWindow { got: n, need: MIN_FIT_SAMPLES });
    }
    let theta = spec.theta();
    let deriv: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = if i == 0 { (0, 1) } else if i + 1 == n { (n - 2, n - 1) } else { (i - 1, i + 1) };
            (phi[b] - phi[a]) / (times[b] - times[a])
        })
        .collect();
    let r: Vec<f64> = (0..n).map(|i| deriv[i] + theta / times[i] * phi[i]).collect();
    let a: Vec<f64> =
        (0..n).map(|i| times[i].powf(-1.0 - spec.delta + 2.0 * spec.gamma) * small_momentum[i]).collect();
    let b: Vec<f64> = times.iter().map(|t| t.powf(-1.0 - spec.epsilon)).collect();
    let q = (n / 4).max(2);
    let (c1, c2) = fit_constants(&a[..q], &b[..q], &r[..q]);
    let margins: Vec<f64> = (q..n).map(|i| r[i] - c1 * a[i] - c2 * b[i]).collect();
    let ok = margins.iter().filter(|&&m| m <= slack).count();
    Ok(AuditReport {
        theta,
        c1,
        c2,
        fraction_ok: if margins.is_empty() { 1.0 } else { ok as f64 / margins.len() as f64 },
        checked: margins.len(),
        slack,
        margins,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InteractionVariant {
    /// Φ(iF(|v|) q_x) ⟨x⟩^{-τ₁}, τ₁ = 3/2 + d.
    Q,
    /// Φ(i|y|^{2β} F(|v|) g̃_x) ⟨x⟩^{-τ₂}, τ₂ = 1/2 + 1/μ + 2β + d.
    GTilde,
    /// Φ(i|y|^{2β} F(|v|) e_x) ⟨x⟩^{-τ₃}, τ₃ = 3/2 + 2β + d.
    E,
}

impl InteractionVariant {
    pub fn tau(self, d: f64, beta: f64, mu: f64) -> f64 {
        match self {
            InteractionVariant::Q => 1.5 + d,
            InteractionVariant::GTilde => 0.5 + 1.0 / mu + 2.0 * beta + d,
            InteractionVariant::E => 1.5 + 2.0 * beta + d,
        }
    }

    pub fn d_limit(self, beta: f64) -> f64 {
        match self {
            InteractionVariant::Q => 0.5,
            _ => 1.5 - 2.0 * beta,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InteractionDecay {
    pub variant: InteractionVariant,
    pub d: f64,
    pub tau: f64,
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    /// Least-squares log-log slope over the samples with positive norm.
    pub slope: f64,
}

/// The one-photon functions whose field operators enter the weighted norm,
/// one per vector component, at particle position x and time t.
pub fn weighted_interaction_functions(
    spec: &ModelSpec,
    variant: InteractionVariant,
    beta: f64,
    c: f64,
    x: [f64; 3],
    t: f64,
) -> Result<Vec<Vec<C64>>> {
    let cs = couplings_at(spec, &[x], &[0.0])?;
    let grid = &spec.grid;
    let ct = c * t;
    let power = if variant == InteractionVariant::Q { 0.0 } else { 2.0 * beta };
    let vals: Vec<f64> = grid.y_norms().iter().map(|&r| r.powf(power) * bump::big_f(r / ct)).collect();
    let raw: Vec<Vec<C64>> = match variant {
        InteractionVariant::Q => vec![cs.q[0].clone()],
        InteractionVariant::GTilde => cs.g_tilde[0].clone(),
        InteractionVariant::E => vec![cs.e[0].clone()],
    };
    Ok(raw
        .iter()
        .map(|f| grid.position_multiply(&vals, f).into_iter().map(|z| z * C64::new(0.0, 1.0)).collect())
        .collect())
}

/// max_x ⟨x⟩^{-τ} ‖Φ(h_{x,t}) (H_f + 1)^{-1/2}‖ on the one-photon truncation,
/// which equals ⟨x⟩^{-τ} (Σ_c ‖h_c‖²)^{1/2} / √2.
pub fn weighted_interaction_decay(
    spec: &ModelSpec,
    variant: InteractionVariant,
    d: f64,
    beta: f64,
    c: f64,
    xs: &[f64],
    times: &[f64],
) -> Result<InteractionDecay> {
    if !(0.0..=0.5).contains(&beta) {
        return Err(invalid("beta", format!("{beta} outside [0, 1/2]")));
    }
    let lim = variant.d_limit(beta);
    if !(d >= 0.0 && d < lim) {
        return Err(invalid("d", format!("{d} outside [0, {lim})")));
    }
    if times.iter().any(|&t| !(t >= 1.0)) {
        return Err(invalid("times", "all times must be at least 1"));
    }
    let tau = variant.tau(d, beta, spec.mu);
    let mut norms = Vec::with_capacity(times.len());
    for &t in times {
        let mut best = 0.0f64;
        for &x in xs {
            let hs = weighted_interaction_functions(spec, variant, beta, c, [x, 0.0, 0.0], t)?;
            let total = hs.iter().map(|h| norm(h).powi(2)).sum::<f64>().sqrt();
            best = best.max((1.0 + x * x).powf(-0.5 * tau) * total / 2f64.sqrt());
        }
        norms.push(best);
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) =
        times.iter().zip(&norms).filter(|(_, n)| **n > 0.0).map(|(t, n)| (t.ln(), n.ln())).unzip();
    let slope = if lx.len() >= 2 { least_squares_slope(&lx, &ly).0 } else { f64::NAN };
    Ok(InteractionDecay { variant, d, tau, times: times.to_vec(), norms, slope })
}

/// Dense ‖Φ(h)(H_f + 1)^{-1/2}‖ on the given basis; the oracle for the
/// closed form at n_max = 1.
pub fn field_resolvent_norm_dense(basis: &FockBasis, h: &[C64]) -> Result<f64> {
    let phi = field_operator(basis, h)?.to_dense();
    let hf = second_quantize_diag_values(basis, &basis.grid.omega_modes());
    let mut m = phi;
    for (j, e) in hf.iter().enumerate() {
        let s = C64::from(1.0 / (e + 1.0).sqrt());
        for i in 0..m.nrows() {
            m[(i, j)] *= s;
        }
    }
    Ok(crate::linalg::op_norm(&m))
}
