//! Decay, growth and inequality fits from recorded series. The run and the
//! offline `fit` subcommand share this code, so replays are bit-identical.

use anyhow::{bail, Context, Result};
use lightcone::probe::{
    heisenberg_inequality_audit, lightcone_decay_fit, small_momentum_growth, ProbeSpec,
};
use serde::{Deserialize, Serialize};

use crate::output::{Stamp, Trajectory};

pub fn mass_smooth_column(c: f64) -> String {
    format!("mass_smooth_c{c}")
}

pub fn mass_sharp_column(c: f64) -> String {
    format!("mass_sharp_c{c}")
}

pub fn phi_column(c: f64) -> String {
    format!("phi_c{c}")
}

pub fn small_momentum_column(delta: f64) -> String {
    format!("dgamma_k_delta{delta}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeEntry {
    pub c: f64,
    /// c ≤ 1: outside the admissible region, decay is not expected.
    pub expected_fail: bool,
    pub gamma_ceiling: f64,
    pub theta: Option<f64>,
    pub epsilon: Option<f64>,
    pub nu: Option<f64>,
}

/// Everything the fits need besides the series; written as probe.json.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeFile {
    #[serde(flatten)]
    pub stamp: Stamp,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub small_momentum: Vec<f64>,
    pub audit_slack: f64,
    pub box_half: f64,
    pub t0: f64,
    pub t_end: f64,
    pub cones: Vec<ConeEntry>,
}

impl ProbeFile {
    pub fn spec(&self, cone: &ConeEntry) -> Option<ProbeSpec> {
        if cone.expected_fail {
            return None;
        }
        Some(ProbeSpec {
            c: cone.c,
            beta: self.beta,
            gamma: self.gamma,
            delta: self.delta,
            epsilon: cone.epsilon?,
            nu: cone.nu?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub c: f64,
    pub expected_fail: bool,
    pub gamma_ceiling: f64,
    pub gamma_hat: f64,
    pub slope: f64,
    /// Theil-Sen slope of log(t^{2γ} mass).
    pub trend: f64,
    pub decays: bool,
    pub bounded: bool,
    pub window: [f64; 2],
    pub residual_rms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub delta: f64,
    pub slope: f64,
    pub bound: f64,
    pub pass: bool,
    pub window: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub c: f64,
    pub theta: f64,
    pub c1: f64,
    pub c2: f64,
    pub fraction_ok: f64,
    pub checked: usize,
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    #[serde(flatten)]
    pub stamp: Stamp,
    pub decay: Vec<DecayReport>,
    pub growth: Vec<GrowthReport>,
    pub audit: Vec<AuditSummary>,
}

pub fn fit_series(probe: &ProbeFile, tr: &Trajectory) -> Result<FitReport> {
    let times = tr.column("t")?;
    let mut decay = Vec::new();
    let mut audit = Vec::new();
    for cone in &probe.cones {
        let mass = tr.column(&mass_smooth_column(cone.c))?;
        let f = lightcone_decay_fit(times, mass, cone.c, probe.gamma, probe.box_half)
            .with_context(|| format!("decay fit for c = {}", cone.c))?;
        let rms = (f.residuals.iter().map(|r| r * r).sum::<f64>() / f.residuals.len() as f64).sqrt();
        decay.push(DecayReport {
            c: cone.c,
            expected_fail: cone.expected_fail,
            gamma_ceiling: f.gamma_ceiling,
            gamma_hat: f.gamma_hat,
            slope: f.slope,
            trend: f.trend,
            decays: f.decays,
            bounded: f.bounded,
            window: [f.window.0, f.window.1],
            residual_rms: rms,
        });
        if let Some(spec) = probe.spec(cone) {
            let phi = tr.column(&phi_column(cone.c))?;
            let sm = tr.column(&small_momentum_column(probe.delta))?;
            let a = heisenberg_inequality_audit(times, phi, sm, &spec, probe.audit_slack)?;
            audit.push(AuditSummary {
                c: cone.c,
                theta: a.theta,
                c1: a.c1,
                c2: a.c2,
                fraction_ok: a.fraction_ok,
                checked: a.checked,
                slack: a.slack,
            });
        }
    }
    let mut growth = Vec::new();
    for &d in &probe.small_momentum {
        let series = tr.column(&small_momentum_column(d))?;
        let g = small_momentum_growth(times, series, d).with_context(|| format!("growth fit for δ = {d}"))?;
        growth.push(GrowthReport { delta: d, slope: g.slope, bound: g.bound, pass: g.pass, window: [g.window.0, g.window.1] });
    }
    Ok(FitReport { stamp: probe.stamp.clone(), decay, growth, audit })
}

pub fn read_probe_file(path: &std::path::Path) -> Result<ProbeFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let p: ProbeFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if p.cones.is_empty() {
        bail!("{}: no cone speeds", path.display());
    }
    Ok(p)
}
