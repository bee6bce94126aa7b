//! Experiment configuration: TOML with named sections, unknown keys
//! rejected, every module invariant re-checked at load.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use lightcone::grid::{build_photon_grid, Mode, PhotonGrid};
use lightcone::model::ModelSpec;
use lightcone::probe::{ProbeSpec, MIN_FIT_SAMPLES};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Load or validation failure, carrying the offending key when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: Option<String>,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.key, self.line) {
            (Some(k), Some(l)) => write!(f, "config error at line {l}, key `{k}`: {}", self.message),
            (Some(k), None) => write!(f, "config error, key `{k}`: {}", self.message),
            (None, Some(l)) => write!(f, "config error at line {l}: {}", self.message),
            (None, None) => write!(f, "config error: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn key_error(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { key: Some(key.to_string()), line: None, message: message.into() }
}

mod defaults {
    pub fn seed() -> u64 {
        7
    }
    pub fn dim() -> usize {
        1
    }
    pub fn m() -> usize {
        32
    }
    pub fn dk() -> f64 {
        0.25
    }
    pub fn mode() -> String {
        "scalar1d".into()
    }
    pub fn n_max() -> usize {
        1
    }
    pub fn nx() -> usize {
        24
    }
    pub fn dx() -> f64 {
        0.5
    }
    pub fn v0() -> f64 {
        6.0
    }
    pub fn sigma() -> f64 {
        1.0
    }
    pub fn mu() -> f64 {
        0.25
    }
    pub fn coupling() -> f64 {
        0.1
    }
    pub fn hamiltonian() -> String {
        "transformed".into()
    }
    pub fn c() -> Vec<f64> {
        vec![2.0]
    }
    pub fn beta() -> f64 {
        0.5
    }
    pub fn gamma() -> f64 {
        0.09
    }
    pub fn delta() -> f64 {
        0.99
    }
    pub fn small_momentum() -> Vec<f64> {
        vec![0.0, 0.5, 0.9]
    }
    pub fn t0() -> f64 {
        1.0
    }
    pub fn samples() -> usize {
        24
    }
    pub fn tol() -> f64 {
        1e-10
    }
    pub fn vacuum_weight() -> f64 {
        0.6
    }
    pub fn packet_weight() -> f64 {
        0.8
    }
    pub fn packet_k0() -> f64 {
        0.5
    }
    pub fn packet_width() -> f64 {
        0.15
    }
    pub fn window() -> f64 {
        1.0
    }
    pub fn ramp() -> f64 {
        0.5
    }
    pub fn margin() -> f64 {
        0.1
    }
    pub fn degree() -> usize {
        300
    }
    pub fn radii() -> Vec<f64> {
        vec![3.0, 4.0, 5.0]
    }
    pub fn out_dir() -> String {
        "out".into()
    }
    pub fn yes() -> bool {
        true
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "defaults::seed")]
    pub seed: u64,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub fock: FockSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub probe: ProbeSection,
    #[serde(default)]
    pub evolve: EvolveSection,
    #[serde(default)]
    pub state: StateSection,
    #[serde(default)]
    pub filter: FilterSection,
    #[serde(default)]
    pub io: IoSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "defaults::dim")]
    pub dim: usize,
    /// Modes per axis.
    #[serde(default = "defaults::m")]
    pub m: usize,
    #[serde(default = "defaults::dk")]
    pub dk: f64,
    /// "scalar1d" or "vector3d".
    #[serde(default = "defaults::mode")]
    pub mode: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FockSection {
    #[serde(default = "defaults::n_max")]
    pub n_max: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "defaults::nx")]
    pub nx: usize,
    #[serde(default = "defaults::dx")]
    pub dx: f64,
    #[serde(default = "defaults::v0")]
    pub v0: f64,
    #[serde(default = "defaults::sigma")]
    pub sigma: f64,
    /// UV radius K; defaults to half the lattice Nyquist radius.
    #[serde(default)]
    pub uv_radius: Option<f64>,
    #[serde(default = "defaults::mu")]
    pub mu: f64,
    #[serde(default = "defaults::coupling")]
    pub coupling_scale: f64,
    /// "transformed" (H̃) or "original" (H).
    #[serde(default = "defaults::hamiltonian")]
    pub hamiltonian: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    #[serde(default = "defaults::c")]
    pub c: Vec<f64>,
    #[serde(default = "defaults::beta")]
    pub beta: f64,
    #[serde(default = "defaults::gamma")]
    pub gamma: f64,
    #[serde(default = "defaults::delta")]
    pub delta: f64,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub nu: Option<f64>,
    /// Exponents δ of the dΓ(|k|^{-δ}) series.
    #[serde(default = "defaults::small_momentum")]
    pub small_momentum: Vec<f64>,
    #[serde(default)]
    pub audit_slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveSection {
    #[serde(default = "defaults::t0")]
    pub t0: f64,
    /// Defaults to the largest time keeping every cone inside the box.
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default = "defaults::samples")]
    pub samples: usize,
    #[serde(default = "defaults::tol")]
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSection {
    /// Particle eigenstate of p² + V.
    #[serde(default)]
    pub particle_level: usize,
    #[serde(default = "defaults::vacuum_weight")]
    pub vacuum_weight: f64,
    #[serde(default = "defaults::packet_weight")]
    pub packet_weight: f64,
    #[serde(default = "defaults::packet_k0")]
    pub packet_k0: f64,
    #[serde(default)]
    pub packet_y0: f64,
    #[serde(default = "defaults::packet_width")]
    pub packet_width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSection {
    #[serde(default = "defaults::yes")]
    pub enabled: bool,
    /// χ = 1 on [E0 - window, E0 + window].
    #[serde(default = "defaults::window")]
    pub window: f64,
    #[serde(default = "defaults::ramp")]
    pub ramp: f64,
    #[serde(default = "defaults::margin")]
    pub margin: f64,
    #[serde(default = "defaults::degree")]
    pub degree: usize,
    /// Exclusion radii for the threshold estimate.
    #[serde(default = "defaults::radii")]
    pub radii: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoSection {
    #[serde(default = "defaults::out_dir")]
    pub out_dir: String,
    /// Persist every `thin`-th state; 0 keeps none.
    #[serde(default)]
    pub thin: usize,
}

macro_rules! section_default {
    ($t:ty) => {
        impl Default for $t {
            fn default() -> Self {
                toml::from_str("").expect("defaults deserialize")
            }
        }
    };
}

section_default!(GridSection);
section_default!(FockSection);
section_default!(ModelSection);
section_default!(ProbeSection);
section_default!(EvolveSection);
section_default!(StateSection);
section_default!(FilterSection);
section_default!(IoSection);
section_default!(ExperimentConfig);

/// Maps parameter names reported by the library to config keys.
fn library_key(name: &str) -> String {
    match name {
        "dim" => "grid.dim".into(),
        "modes_per_axis" => "grid.m".into(),
        "spacing" => "grid.dk".into(),
        "mode" => "grid.mode".into(),
        "n_max" => "fock.n_max".into(),
        "nx" | "dx" | "mu" | "sigma" | "uv_radius" | "coupling_scale" => format!("model.{name}"),
        "c" | "beta" | "gamma" | "delta" | "epsilon" | "nu" => format!("probe.{name}"),
        "radii" => "filter.radii".into(),
        other => other.into(),
    }
}

fn from_library(e: lightcone::Error) -> ConfigError {
    match e {
        lightcone::Error::InvalidParameter { name, reason } => key_error(&library_key(name), reason),
        other => ConfigError { key: None, line: None, message: other.to_string() },
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            ConfigError { key: None, line, message: e.message().to_string() }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError { key: None, line: None, message: format!("{}: {e}", path.display()) })?;
        Self::from_toml(&text)
    }

    pub fn mode(&self) -> Result<Mode, ConfigError> {
        match self.grid.mode.as_str() {
            "scalar1d" => Ok(Mode::Scalar1d),
            "vector3d" => Ok(Mode::Vector3d),
            other => Err(key_error("grid.mode", format!("unknown mode `{other}`"))),
        }
    }

    pub fn transformed(&self) -> bool {
        self.model.hamiltonian == "transformed"
    }

    pub fn photon_grid(&self) -> Result<PhotonGrid, ConfigError> {
        build_photon_grid(self.grid.dim, self.grid.m, self.grid.dk, self.mode()?).map_err(from_library)
    }

    /// Model spec with the memory budget from LIGHTCONE_BUDGET_MB if set.
    pub fn model_spec(&self, grid: Arc<PhotonGrid>) -> Result<ModelSpec, ConfigError> {
        let mut spec = ModelSpec::new(grid, self.model.nx, self.model.dx, self.fock.n_max);
        spec.v0 = self.model.v0;
        spec.sigma = self.model.sigma;
        if let Some(k) = self.model.uv_radius {
            spec.uv_radius = k;
        }
        spec.mu = self.model.mu;
        spec.coupling_scale = self.model.coupling_scale;
        spec.budget_mb = budget_mb()?;
        spec.validate().map_err(from_library)?;
        Ok(spec)
    }

    /// Probe spec for one cone speed; None for c ≤ 1, which is outside the
    /// admissible region and only run as a diagnostic.
    pub fn probe_spec(&self, c: f64) -> Result<Option<ProbeSpec>, ConfigError> {
        if c <= 1.0 {
            return Ok(None);
        }
        let p = &self.probe;
        let mut s = ProbeSpec::new(c, p.beta, p.gamma, p.delta).map_err(from_library)?;
        if let Some(e) = p.epsilon {
            s.epsilon = e;
        }
        if let Some(n) = p.nu {
            s.nu = n;
        }
        s.validate().map_err(from_library)?;
        Ok(Some(s))
    }

    /// Exponents of the small-momentum series, always including probe.delta.
    pub fn small_momentum_exponents(&self) -> Vec<f64> {
        let mut d = self.probe.small_momentum.clone();
        if !d.contains(&self.probe.delta) {
            d.push(self.probe.delta);
        }
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        d
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.fock.n_max < 1 {
            return Err(key_error("fock.n_max", format!("{} must be at least 1", self.fock.n_max)));
        }
        let grid = Arc::new(self.photon_grid()?);
        self.model_spec(grid.clone())?;
        if !matches!(self.model.hamiltonian.as_str(), "transformed" | "original") {
            return Err(key_error("model.hamiltonian", "expected `transformed` or `original`"));
        }
        if self.probe.c.is_empty() {
            return Err(key_error("probe.c", "empty list"));
        }
        for &c in &self.probe.c {
            if !(c > 0.0 && c.is_finite()) {
                return Err(key_error("probe.c", format!("{c} must be positive")));
            }
            self.probe_spec(c)?;
        }
        for &d in &self.probe.small_momentum {
            if !(d > -1.0 && d < 1.5) {
                return Err(key_error("probe.small_momentum", format!("{d} outside (-1, 3/2)")));
            }
        }
        let e = &self.evolve;
        if !(e.t0 >= 1.0) {
            return Err(key_error("evolve.t0", format!("{} must be at least 1", e.t0)));
        }
        if e.samples < 2 * MIN_FIT_SAMPLES {
            return Err(key_error("evolve.samples", format!("{} below {}", e.samples, 2 * MIN_FIT_SAMPLES)));
        }
        if !(e.tol > 0.0) {
            return Err(key_error("evolve.tol", "must be positive"));
        }
        if let Some(t) = e.t_end {
            if !(t > e.t0) {
                return Err(key_error("evolve.t_end", format!("{t} must exceed t0 = {}", e.t0)));
            }
        }
        let s = &self.state;
        if s.particle_level >= self.model.nx {
            return Err(key_error("state.particle_level", "exceeds the number of particle sites"));
        }
        if !(s.packet_width > 0.0) {
            return Err(key_error("state.packet_width", "must be positive"));
        }
        if s.vacuum_weight == 0.0 && s.packet_weight == 0.0 {
            return Err(key_error("state.packet_weight", "vacuum and packet weights both zero"));
        }
        let f = &self.filter;
        if f.enabled {
            if !(f.window >= 0.0 && f.ramp > 0.0 && f.margin >= 0.0) {
                return Err(key_error("filter.ramp", "need window ≥ 0, ramp > 0, margin ≥ 0"));
            }
            if f.degree == 0 {
                return Err(key_error("filter.degree", "must be positive"));
            }
        }
        if f.radii.is_empty() {
            return Err(key_error("filter.radii", "empty list"));
        }
        let half = 0.5 * self.model.nx as f64 * self.model.dx;
        if let Some(r) = f.radii.iter().find(|r| !(**r >= 0.0 && **r < half)) {
            return Err(key_error("filter.radii", format!("{r} not in [0, {half})")));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form with the output directory blanked.
    /// The config as hashed and recorded: identical experiments written to
    /// different directories compare equal.
    pub fn normalized(&self) -> ExperimentConfig {
        let mut c = self.clone();
        c.io.out_dir.clear();
        c
    }

    pub fn hash(&self) -> String {
        let text = serde_json::to_string(&self.normalized()).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn budget_mb() -> Result<usize, ConfigError> {
    match std::env::var("LIGHTCONE_BUDGET_MB") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&b| b > 0)
            .ok_or_else(|| key_error("LIGHTCONE_BUDGET_MB", format!("`{v}` is not a positive integer"))),
        Err(_) => Ok(lightcone::DEFAULT_BUDGET_MB),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_valid_defaults() {
        let c = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
    }

    #[test]
    fn zero_n_max_names_the_key() {
        let e = ExperimentConfig::from_toml("[fock]\nn_max = 0\n").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("fock.n_max"));
    }

    #[test]
    fn unknown_key_is_rejected_with_line() {
        let e = ExperimentConfig::from_toml("seed = 1\n[grid]\nm = 8\nspeed = 3\n").unwrap_err();
        assert!(e.message.contains("speed"), "{e}");
        assert_eq!(e.line, Some(4));
    }

    #[test]
    fn invalid_region_names_probe_key() {
        let e = ExperimentConfig::from_toml("[probe]\nc = [2.0]\ngamma = 0.1\ndelta = 0.9\n").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("probe.gamma"));
    }

    #[test]
    fn odd_grid_maps_to_grid_key() {
        let e = ExperimentConfig::from_toml("[grid]\nm = 7\n").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("grid.m"));
    }

    #[test]
    fn hash_ignores_out_dir_only() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.io.out_dir = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
