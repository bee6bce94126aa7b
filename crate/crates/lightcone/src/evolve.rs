//! Time evolution e^{-itH} by Lanczos exponentials, trajectories, and
//! Heisenberg derivatives of time-dependent observables.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;

use crate::error::{invalid, Error, Result};
use crate::linalg::{axpy, dot, norm, CsrMatrix, ZERO};

pub const KRYLOV_CAP: usize = 40;

/// Observable acting on the whole state or as I ⊗ O on particle ⊗ Fock.
#[derive(Clone, Debug)]
pub enum Observable {
    Full(CsrMatrix),
    Fock(CsrMatrix),
}

impl Observable {
    pub fn apply(&self, psi: &[C64]) -> Result<Vec<C64>> {
        match self {
            Observable::Full(m) => {
                if m.cols != psi.len() {
                    return Err(Error::BasisMismatch { expected: m.cols, got: psi.len() });
                }
                Ok(m.apply(psi))
            }
            Observable::Fock(m) => {
                let d = m.cols;
                if d == 0 || psi.len() % d != 0 {
                    return Err(Error::BasisMismatch { expected: d, got: psi.len() });
                }
                let mut out = vec![ZERO; psi.len()];
                for (x, y) in psi.chunks(d).zip(out.chunks_mut(d)) {
                    m.matvec(x, y);
                }
                Ok(out)
            }
        }
    }
}

/// ⟨ψ, Oψ⟩, checked to be real.
pub fn expectation(op: &Observable, psi: &[C64]) -> Result<f64> {
    let v = dot(psi, &op.apply(psi)?);
    if v.im.abs() > 1e-12 * (1.0 + v.re.abs()) {
        return Err(Error::NotHermitian(v.im.abs()));
    }
    Ok(v.re)
}

/// A one-parameter family t ↦ Φ_t.
pub trait OperatorFamily: Sync {
    fn at(&self, t: f64) -> Result<Observable>;
}

/// The constant family.
pub struct Constant(pub Observable);

impl OperatorFamily for Constant {
    fn at(&self, _t: f64) -> Result<Observable> {
        Ok(self.0.clone())
    }
}

impl<F> OperatorFamily for F
where
    F: Fn(f64) -> Result<Observable> + Sync,
{
    fn at(&self, t: f64) -> Result<Observable> {
        self(t)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PropagatorStats {
    pub steps: usize,
    pub rejections: usize,
    pub max_krylov: usize,
    pub breakdowns: usize,
    pub max_error: f64,
}

/// exp(-iτT) e1 for the leading m×m block of the tridiagonal (alpha, beta).
fn tridiag_exp(alpha: &[f64], beta: &[f64], m: usize, tau: f64) -> Vec<C64> {
    let mut t = nalgebra::DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = nalgebra::SymmetricEigen::new(t);
    let mut y = vec![ZERO; m];
    for k in 0..m {
        let ph = C64::from_polar(eig.eigenvectors[(0, k)], -tau * eig.eigenvalues[k]);
        for i in 0..m {
            y[i] += ph * eig.eigenvectors[(i, k)];
        }
    }
    y
}

/// One Lanczos exponential e^{-iτH}v. Returns the result, the a-posteriori
/// error estimate, the Krylov dimension and whether the space closed.
fn krylov_step(h: &CsrMatrix, v: &[C64], tau: f64, cap: usize) -> (Vec<C64>, f64, usize, bool) {
    let n = v.len();
    let beta0 = norm(v);
    if beta0 == 0.0 || tau == 0.0 {
        return (v.to_vec(), 0.0, 0, true);
    }
    let cap = cap.min(n).max(1);
    let mut basis: Vec<Vec<C64>> = vec![v.iter().map(|a| a / beta0).collect()];
    let mut alpha = Vec::with_capacity(cap);
    let mut beta: Vec<f64> = Vec::with_capacity(cap);
    let mut w = vec![ZERO; n];
    let mut closed = false;
    let mut next_beta = 0.0;
    for j in 0..cap {
        h.matvec(&basis[j], &mut w);
        let a = dot(&basis[j], &w).re;
        alpha.push(a);
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                axpy(-c, b, &mut w);
            }
        }
        let bn = norm(&w);
        next_beta = bn;
        if bn <= 1e-14 * (1.0 + a.abs()) {
            closed = true;
            break;
        }
        if j + 1 < cap {
            beta.push(bn);
            basis.push(w.iter().map(|x| x / bn).collect());
        }
    }
    let m = alpha.len();
    let y = tridiag_exp(&alpha, &beta, m, tau);
    // error taken as the distance to the (m-1)-step approximation
    let err = if closed {
        0.0
    } else if m == 1 {
        beta0 * next_beta * tau.abs()
    } else {
        let z = tridiag_exp(&alpha, &beta, m - 1, tau);
        let d: f64 = (0..m).map(|i| (y[i] - z.get(i).copied().unwrap_or(ZERO)).norm_sqr()).sum();
        beta0 * d.sqrt()
    };
    let mut out = vec![ZERO; n];
    for (i, b) in basis.iter().enumerate().take(m) {
        axpy(y[i] * beta0, b, &mut out);
    }
    (out, err, m, closed)
}

/// e^{-iτH}v with adaptive substeps so that each substep error estimate
/// stays below tol·|substep| (tol per unit time).
pub fn expm_apply(h: &CsrMatrix, v: &[C64], tau: f64, tol: f64, stats: &mut PropagatorStats) -> Result<Vec<C64>> {
    let mut psi = v.to_vec();
    let mut done = 0.0f64;
    let sign = tau.signum();
    let total = tau.abs();
    let mut step = total;
    while done < total {
        let dt = step.min(total - done);
        let (next, err, m, closed) = krylov_step(h, &psi, sign * dt, KRYLOV_CAP);
        if err > tol * dt.max(1e-300) && !closed {
            stats.rejections += 1;
            step = 0.5 * dt;
            if step < 1e-12 * total.max(1.0) {
                return Err(Error::StepUnderflow(done));
            }
            continue;
        }
        if closed {
            stats.breakdowns += 1;
        }
        stats.steps += 1;
        stats.max_krylov = stats.max_krylov.max(m);
        stats.max_error = stats.max_error.max(err);
        psi = next;
        done += dt;
        if err < 0.01 * tol * dt {
            step = dt * 2.0;
        }
    }
    Ok(psi)
}

#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    /// States at every `thin`-th time (index into `times` alongside).
    pub states: Vec<(usize, Vec<C64>)>,
    pub observables: BTreeMap<String, Vec<f64>>,
    pub energy: Vec<f64>,
    pub norm: Vec<f64>,
    pub stats: PropagatorStats,
}

impl TrajectoryRecord {
    pub fn norm_drift(&self) -> f64 {
        self.norm.iter().map(|n| (n - self.norm[0]).abs()).fold(0.0, f64::max)
    }

    /// Largest relative energy deviation from the first sample.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.energy[0];
        self.energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max) / e0.abs().max(1.0)
    }

    pub fn last_state(&self) -> Option<&[C64]> {
        self.states.last().map(|(_, s)| s.as_slice())
    }
}

/// Propagates ψ0 from times[0] through the strictly increasing grid,
/// recording norm, energy and every registered observable. `thin` = 0 keeps
/// only the final state.
pub fn propagate(
    h: &CsrMatrix,
    psi0: &[C64],
    times: &[f64],
    tol: f64,
    observables: &[(&str, &dyn OperatorFamily)],
    thin: usize,
) -> Result<TrajectoryRecord> {
    if times.is_empty() {
        return Err(invalid("times", "empty"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("times", "not strictly increasing"));
    }
    if h.rows != psi0.len() {
        return Err(Error::BasisMismatch { expected: h.rows, got: psi0.len() });
    }
    if !(tol > 0.0) {
        return Err(invalid("tol", format!("{tol} must be positive")));
    }
    let mut rec = TrajectoryRecord {
        times: times.to_vec(),
        states: Vec::new(),
        observables: observables.iter().map(|(n, _)| (n.to_string(), Vec::new())).collect(),
        energy: Vec::with_capacity(times.len()),
        norm: Vec::with_capacity(times.len()),
        stats: PropagatorStats::default(),
    };
    let full_h = Observable::Full(h.clone());
    let mut psi = psi0.to_vec();
    for (i, &t) in times.iter().enumerate() {
        if i > 0 {
            psi = expm_apply(h, &psi, t - times[i - 1], tol, &mut rec.stats)?;
        }
        rec.norm.push(norm(&psi));
        rec.energy.push(expectation(&full_h, &psi)?);
        for (name, fam) in observables {
            let v = expectation(&fam.at(t)?, &psi)?;
            rec.observables.get_mut(*name).unwrap().push(v);
        }
        let keep = if thin == 0 { i + 1 == times.len() } else { i % thin == 0 || i + 1 == times.len() };
        if keep {
            rec.states.push((i, psi.clone()));
        }
    }
    Ok(rec)
}

/// Both sides of ∂_t⟨Φ_t⟩ = ⟨DΦ_t⟩ with DΦ_t = ∂_tΦ_t - i[Φ_t, H].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeisenbergDerivative {
    /// ⟨ψ_t, (∂_tΦ_t - i[Φ_t, H])ψ_t⟩ with ∂_t by centred difference.
    pub commutator_form: f64,
    /// Centred difference of ⟨ψ_s, Φ_s ψ_s⟩ along the evolution.
    pub trajectory_form: f64,
}

impl HeisenbergDerivative {
    pub fn disagreement(&self) -> f64 {
        (self.commutator_form - self.trajectory_form).abs()
    }
}

pub fn heisenberg_derivative(
    family: &dyn OperatorFamily,
    h: &CsrMatrix,
    psi_t: &[C64],
    t: f64,
    dt: f64,
    tol: f64,
) -> Result<HeisenbergDerivative> {
    if !(dt > 0.0) {
        return Err(invalid("dt", format!("{dt} must be positive")));
    }
    let phi = family.at(t)?;
    let plus = family.at(t + dt)?;
    let minus = family.at(t - dt)?;
    let d_param = (expectation(&plus, psi_t)? - expectation(&minus, psi_t)?) / (2.0 * dt);
    let hp = h.apply(psi_t);
    let pp = phi.apply(psi_t)?;
    // -i⟨ψ, [Φ, H]ψ⟩ = 2 Im⟨Φψ, Hψ⟩
    let comm = 2.0 * dot(&pp, &hp).im;
    let mut stats = PropagatorStats::default();
    let fwd = expm_apply(h, psi_t, dt, tol, &mut stats)?;
    let back = expm_apply(h, psi_t, -dt, tol, &mut stats)?;
    let traj = (expectation(&plus, &fwd)? - expectation(&minus, &back)?) / (2.0 * dt);
    Ok(HeisenbergDerivative { commutator_form: d_param + comm, trajectory_form: traj })
}
