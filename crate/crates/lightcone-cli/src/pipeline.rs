//! build → threshold → filter → propagate → probe → fit.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use lightcone::evolve::{propagate, PropagatorStats};
use lightcone::fock::FockBasis;
use lightcone::grid::{gaussian_packet, PhotonGrid};
use lightcone::linalg::{normalize, CsrMatrix};
use lightcone::model::{
    assemble_hamiltonian, assemble_transformed, build_couplings, estimate_ionization_threshold,
    lowest_eigenvalues, particle_boundary_mass, particle_ground_states, spectral_filter, CouplingSet,
    FilterMethod, FilterProfile, ModelSpec,
};
use lightcone::probe::{
    cone_mass_from_density, diagonal_expectation, gamma_ceiling, photon_position_density,
    propagation_expectation, small_momentum_diagonal, ProbeSpec,
};
use lightcone::C64;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::fit::{
    fit_series, mass_sharp_column, mass_smooth_column, phi_column, small_momentum_column, ConeEntry,
    ProbeFile,
};
use crate::output::{fmt_f64, sha256_hex, to_json, trajectory_csv, write_atomic, Stamp, Trajectory};

/// Boundary mass fraction above which a run carries a warning.
pub const BOUNDARY_WARN: f64 = 0.01;

pub struct Prepared {
    pub cfg: ExperimentConfig,
    pub stamp: Stamp,
    pub grid: Arc<PhotonGrid>,
    pub spec: ModelSpec,
    pub basis: FockBasis,
    pub couplings: CouplingSet,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let grid = Arc::new(cfg.photon_grid()?);
    let spec = cfg.model_spec(grid.clone())?;
    let basis = spec.fock_basis()?;
    let couplings = build_couplings(&spec)?;
    Ok(Prepared { cfg: cfg.clone(), stamp: Stamp::new(&cfg.hash()), grid, spec, basis, couplings })
}

impl Prepared {
    pub fn hamiltonian(&self, transformed: bool) -> Result<CsrMatrix> {
        let h = if transformed {
            assemble_transformed(&self.spec, &self.basis, &self.couplings)
        } else {
            assemble_hamiltonian(&self.spec, &self.basis, &self.couplings)
        };
        h.context("assembling the Hamiltonian (grid.mode must be scalar1d)")
    }

    pub fn box_half(&self) -> f64 {
        self.grid.box_half_length()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ThresholdFile {
    #[serde(flatten)]
    pub stamp: Stamp,
    pub hamiltonian: String,
    pub radii: Vec<f64>,
    pub minima: Vec<f64>,
    pub sigma_hat: f64,
    pub monotone: bool,
    pub ground_energy: f64,
    /// Σ̂ minus the ground energy.
    pub margin: f64,
}

pub fn threshold(p: &Prepared, h: &CsrMatrix) -> Result<ThresholdFile> {
    let r = estimate_ionization_threshold(&p.spec, &p.basis, h, &p.cfg.filter.radii)?;
    let e0 = lowest_eigenvalues(&p.spec, &p.basis, h, 1, 1e-9)?.values[0];
    Ok(ThresholdFile {
        stamp: p.stamp.clone(),
        hamiltonian: p.cfg.model.hamiltonian.clone(),
        radii: r.radii,
        minima: r.minima,
        sigma_hat: r.sigma_hat,
        monotone: r.monotone,
        ground_energy: e0,
        margin: r.sigma_hat - e0,
    })
}

/// Largest end time with every cone radius c·t at most half the box.
pub fn max_valid_time(cfg: &ExperimentConfig, box_half: f64) -> f64 {
    let c_max = cfg.probe.c.iter().cloned().fold(1.0, f64::max);
    box_half / (2.0 * c_max)
}

pub fn time_grid(cfg: &ExperimentConfig, box_half: f64) -> Result<Vec<f64>> {
    let valid = max_valid_time(cfg, box_half);
    let t_end = cfg.evolve.t_end.unwrap_or(valid);
    if t_end > valid {
        bail!("cone leaves the box: t_end = {t_end} exceeds the maximal valid T = {valid}");
    }
    let t0 = cfg.evolve.t0;
    if !(t_end > t0) {
        bail!("maximal valid T = {valid} does not exceed t0 = {t0}; enlarge the photon box");
    }
    let n = cfg.evolve.samples;
    Ok((0..n).map(|i| t0 + (t_end - t0) * i as f64 / (n - 1) as f64).collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct FilterReport {
    pub lo: f64,
    pub hi: f64,
    pub ramp: f64,
    pub support_top: f64,
    pub degree: usize,
    /// Chebyshev coefficient tail bound.
    pub tail: f64,
    pub filtered_norm: f64,
}

/// φ_level ⊗ (w_Ω Ω + w_p packet), optionally filtered by χ(H), normalized.
pub fn initial_state(p: &Prepared, h: &CsrMatrix, thr: &ThresholdFile) -> Result<(Vec<C64>, Option<FilterReport>)> {
    let st = &p.cfg.state;
    let (_, phis) = particle_ground_states(&p.spec, st.particle_level + 1);
    let packet = gaussian_packet(&p.grid, [st.packet_k0, 0.0, 0.0], [st.packet_y0, 0.0, 0.0], st.packet_width);
    let one = p.basis.one_photon(&packet);
    let d = p.basis.dim();
    let mut u = vec![C64::from(0.0); p.spec.nx * d];
    for (m, a) in phis[st.particle_level].iter().enumerate() {
        u[m * d] += a * st.vacuum_weight;
        for (i, b) in one.iter().enumerate() {
            u[m * d + i] += a * b * st.packet_weight;
        }
    }
    normalize(&mut u);
    let f = &p.cfg.filter;
    if !f.enabled {
        return Ok((u, None));
    }
    let chi = FilterProfile { lo: thr.ground_energy - f.window, hi: thr.ground_energy + f.window, ramp: f.ramp };
    let filt = spectral_filter(h, &chi, thr.sigma_hat, f.margin, FilterMethod::Chebyshev { degree: f.degree })?;
    let mut psi = filt.apply(&u);
    let filtered_norm = normalize(&mut psi);
    if !(filtered_norm > 1e-8) {
        bail!("filtered state has norm {filtered_norm}; χ(H) misses the initial state");
    }
    let report = FilterReport {
        lo: chi.lo,
        hi: chi.hi,
        ramp: chi.ramp,
        support_top: chi.support_top(),
        degree: f.degree,
        tail: filt.tail(),
        filtered_norm,
    };
    Ok((psi, Some(report)))
}

struct Probes {
    cones: Vec<(f64, Option<ProbeSpec>)>,
    small: Vec<(f64, Vec<f64>)>,
    numbers: Vec<f64>,
}

fn observe(p: &Prepared, probes: &Probes, psi: &[C64], t: f64, out: &mut BTreeMap<String, Vec<f64>>) -> Result<()> {
    let mut push = |k: String, v: f64| out.entry(k).or_default().push(v);
    let dens = photon_position_density(&p.basis, psi)?;
    for (c, spec) in &probes.cones {
        let m = cone_mass_from_density(&p.grid, &dens, *c, t)?;
        push(mass_smooth_column(*c), m.smooth);
        push(mass_sharp_column(*c), m.sharp);
        if let Some(s) = spec {
            push(phi_column(*c), propagation_expectation(&p.grid, &dens, s, t)?);
        }
    }
    for (d, diag) in &probes.small {
        push(small_momentum_column(*d), diagonal_expectation(diag, psi)?);
    }
    push("photon_number".into(), diagonal_expectation(&probes.numbers, psi)?);
    let half = p.box_half();
    let edge = half - 4.0 * half / p.grid.modes_per_axis as f64;
    let total: f64 = dens.iter().sum();
    let near: f64 = p.grid.y_norms().iter().zip(&dens).filter(|(r, _)| **r >= edge).map(|(_, n)| n).sum();
    push("photon_edge_fraction".into(), if total > 0.0 { near / total } else { 0.0 });
    push("particle_boundary".into(), particle_boundary_mass(&p.spec, psi, 2.0 * p.spec.dx));
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
struct StatsJson {
    steps: usize,
    rejections: usize,
    max_krylov: usize,
    breakdowns: usize,
    max_error: f64,
}

impl From<&PropagatorStats> for StatsJson {
    fn from(s: &PropagatorStats) -> Self {
        StatsJson {
            steps: s.steps,
            rejections: s.rejections,
            max_krylov: s.max_krylov,
            breakdowns: s.breakdowns,
            max_error: s.max_error,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
struct TrajectorySidecar {
    #[serde(flatten)]
    stamp: Stamp,
    config: ExperimentConfig,
    dim: usize,
    fock_dim: usize,
    columns: Vec<String>,
    samples: usize,
    norm_drift: f64,
    energy_drift: f64,
    propagator: StatsJson,
    filter: Option<FilterReport>,
    max_photon_edge_fraction: f64,
    max_particle_boundary: f64,
    warnings: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
struct ManifestEntry {
    name: String,
    bytes: usize,
    sha256: String,
}

#[derive(Clone, Debug, Serialize)]
struct Manifest {
    #[serde(flatten)]
    stamp: Stamp,
    files: Vec<ManifestEntry>,
}

/// Output files in write order; the manifest comes last.
#[derive(Clone, Debug, Default)]
pub struct Artifacts {
    pub files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }

    fn seal(&mut self, stamp: &Stamp) {
        let files = self
            .files
            .iter()
            .map(|(n, b)| ManifestEntry { name: n.clone(), bytes: b.len(), sha256: sha256_hex(b) })
            .collect();
        let m = Manifest { stamp: stamp.clone(), files };
        self.files.push(("manifest.json".into(), to_json(&m)));
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        for (name, bytes) in &self.files {
            write_atomic(&dir.join(name), bytes)?;
        }
        Ok(())
    }
}

pub fn cmd_threshold(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let p = prepare(cfg)?;
    let h = p.hamiltonian(cfg.transformed())?;
    let thr = threshold(&p, &h)?;
    let mut a = Artifacts { files: vec![("threshold.json".into(), to_json(&thr))] };
    a.seal(&p.stamp);
    Ok(a)
}

#[derive(Clone, Debug, Serialize)]
struct BasisFile {
    #[serde(flatten)]
    stamp: Stamp,
    dim: usize,
    nx: usize,
    fock_dim: usize,
    n_modes: usize,
    n_max: usize,
    sector_offsets: Vec<usize>,
    index_order: &'static str,
    hamiltonian_nnz: usize,
    transformed_nnz: usize,
}

/// Coordinate-list export of H and H̃ with a basis description.
pub fn cmd_build(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let p = prepare(cfg)?;
    let h = p.hamiltonian(false)?;
    let ht = p.hamiltonian(true)?;
    let coo = |m: &CsrMatrix| -> Result<Vec<u8>> {
        let mut buf = format!("{}\n# rows={} cols={} nnz={}\n", p.stamp.comment(), m.rows, m.cols, m.nnz()).into_bytes();
        m.write_coo(&mut buf)?;
        Ok(buf)
    };
    let basis = BasisFile {
        stamp: p.stamp.clone(),
        dim: h.rows,
        nx: p.spec.nx,
        fock_dim: p.basis.dim(),
        n_modes: p.basis.n_modes,
        n_max: p.basis.n_max,
        sector_offsets: p.basis.sector_offsets.clone(),
        index_order: "particle site major: index = m * fock_dim + i",
        hamiltonian_nnz: h.nnz(),
        transformed_nnz: ht.nnz(),
    };
    let mut a = Artifacts {
        files: vec![
            ("hamiltonian.coo".into(), coo(&h)?),
            ("hamiltonian_transformed.coo".into(), coo(&ht)?),
            ("basis.json".into(), to_json(&basis)),
        ],
    };
    a.seal(&p.stamp);
    Ok(a)
}

pub fn cmd_run(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let p = prepare(cfg)?;
    let times = time_grid(cfg, p.box_half())?;
    let h = p.hamiltonian(cfg.transformed())?;
    let budget = p.spec.budget_mb as f64 * 1024.0 * 1024.0;
    if (times.len() * h.rows * 16) as f64 > budget {
        bail!("recording {} states of dimension {} exceeds the memory budget of {} MB", times.len(), h.rows, p.spec.budget_mb);
    }
    let thr = threshold(&p, &h)?;
    let (psi0, filter) = initial_state(&p, &h, &thr)?;

    let mut cones = Vec::new();
    let mut entries = Vec::new();
    for &c in &cfg.probe.c {
        let spec = cfg.probe_spec(c)?;
        entries.push(ConeEntry {
            c,
            expected_fail: spec.is_none(),
            gamma_ceiling: gamma_ceiling(c),
            theta: spec.as_ref().map(|s| s.theta()),
            epsilon: spec.as_ref().map(|s| s.epsilon),
            nu: spec.as_ref().map(|s| s.nu),
        });
        cones.push((c, spec));
    }
    let deltas = cfg.small_momentum_exponents();
    let small = deltas.iter().map(|&d| Ok((d, small_momentum_diagonal(&p.basis, d)?))).collect::<Result<Vec<_>>>()?;
    let probes = Probes { cones, small, numbers: p.basis.numbers() };

    let rec = propagate(&h, &psi0, &times, cfg.evolve.tol, &[], 1)?;
    let mut obs: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (i, psi) in &rec.states {
        observe(&p, &probes, psi, times[*i], &mut obs)?;
    }

    let csv = trajectory_csv(&rec.times, &rec.norm, &rec.energy, &obs, &p.stamp);
    let probe_file = ProbeFile {
        stamp: p.stamp.clone(),
        beta: cfg.probe.beta,
        gamma: cfg.probe.gamma,
        delta: cfg.probe.delta,
        small_momentum: deltas,
        audit_slack: cfg.probe.audit_slack,
        box_half: p.box_half(),
        t0: times[0],
        t_end: *times.last().unwrap(),
        cones: entries,
    };
    let mut columns = BTreeMap::new();
    columns.insert("t".to_string(), rec.times.clone());
    columns.insert("norm".to_string(), rec.norm.clone());
    columns.insert("energy".to_string(), rec.energy.clone());
    columns.extend(obs.iter().map(|(k, v)| (k.clone(), v.clone())));
    let fits = fit_series(&probe_file, &Trajectory { columns, order: vec![] })?;

    let max_of = |k: &str| obs[k].iter().cloned().fold(0.0, f64::max);
    let edge = max_of("photon_edge_fraction");
    let bnd = max_of("particle_boundary");
    let mut warnings = Vec::new();
    if edge > BOUNDARY_WARN {
        warnings.push(format!("photon mass within two sites of the box edge reaches {edge:.3e}"));
    }
    if bnd > BOUNDARY_WARN {
        warnings.push(format!("particle mass near the periodic boundary reaches {bnd:.3e}"));
    }
    let mut column_names = vec!["t".to_string(), "norm".into(), "energy".into()];
    column_names.extend(obs.keys().cloned());
    let sidecar = TrajectorySidecar {
        stamp: p.stamp.clone(),
        config: cfg.normalized(),
        dim: h.rows,
        fock_dim: p.basis.dim(),
        columns: column_names,
        samples: times.len(),
        norm_drift: rec.norm_drift(),
        energy_drift: rec.energy_drift(),
        propagator: (&rec.stats).into(),
        filter,
        max_photon_edge_fraction: edge,
        max_particle_boundary: bnd,
        warnings,
    };

    let mut files = vec![
        ("trajectory.csv".to_string(), csv),
        ("trajectory.json".to_string(), to_json(&sidecar)),
        ("probe.json".to_string(), to_json(&probe_file)),
        ("fits.json".to_string(), to_json(&fits)),
        ("threshold.json".to_string(), to_json(&thr)),
    ];
    if cfg.io.thin > 0 {
        let mut s = String::from("sample,t,index,re,im\n");
        for (i, psi) in rec.states.iter().filter(|(i, _)| i % cfg.io.thin == 0) {
            for (j, z) in psi.iter().enumerate() {
                s.push_str(&format!("{i},{},{j},{},{}\n", fmt_f64(times[*i]), fmt_f64(z.re), fmt_f64(z.im)));
            }
        }
        s.push_str(&p.stamp.comment());
        s.push('\n');
        files.push(("states.csv".to_string(), s.into_bytes()));
    }
    let mut a = Artifacts { files };
    a.seal(&p.stamp);
    Ok(a)
}
