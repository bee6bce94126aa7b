//! Persistence: atomic writes, the trajectory CSV schema and output
//! provenance stamps.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const CLI_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Config hash and module versions, embedded in every output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stamp {
    pub config_hash: String,
    pub lightcone_version: String,
    pub cli_version: String,
}

impl Stamp {
    pub fn new(config_hash: &str) -> Self {
        Stamp {
            config_hash: config_hash.to_string(),
            lightcone_version: lightcone::VERSION.to_string(),
            cli_version: CLI_VERSION.to_string(),
        }
    }

    pub fn comment(&self) -> String {
        format!(
            "# config_hash={} lightcone={} lightcone-cli={}",
            self.config_hash, self.lightcone_version, self.cli_version
        )
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes through a temporary sibling and renames into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = path.file_name().context("output path has no file name")?.to_string_lossy();
    let tmp: PathBuf = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s.into_bytes()
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// t, norm, energy, then observables in name order; the stamp follows as a
/// trailing comment line.
pub fn trajectory_csv(
    times: &[f64],
    norm: &[f64],
    energy: &[f64],
    observables: &BTreeMap<String, Vec<f64>>,
    stamp: &Stamp,
) -> Vec<u8> {
    let mut out = String::from("t,norm,energy");
    for name in observables.keys() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for i in 0..times.len() {
        out.push_str(&fmt_f64(times[i]));
        out.push(',');
        out.push_str(&fmt_f64(norm[i]));
        out.push(',');
        out.push_str(&fmt_f64(energy[i]));
        for v in observables.values() {
            out.push(',');
            out.push_str(&fmt_f64(v[i]));
        }
        out.push('\n');
    }
    out.push_str(&stamp.comment());
    out.push('\n');
    out.into_bytes()
}

/// Columns of a trajectory CSV by header name.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub columns: BTreeMap<String, Vec<f64>>,
    pub order: Vec<String>,
}

impl Trajectory {
    pub fn column(&self, name: &str) -> Result<&[f64]> {
        match self.columns.get(name) {
            Some(v) => Ok(v),
            None => bail!("malformed CSV columns: missing `{name}`"),
        }
    }
}

pub fn read_trajectory_csv(path: &Path) -> Result<Trajectory> {
    let mut rd = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let order: Vec<String> = rd.headers()?.iter().map(|s| s.to_string()).collect();
    if order.len() < 3 || order[0] != "t" || order[1] != "norm" || order[2] != "energy" {
        bail!("malformed CSV columns: header must start with t,norm,energy, got {:?}", order);
    }
    let mut columns: BTreeMap<String, Vec<f64>> = order.iter().map(|n| (n.clone(), Vec::new())).collect();
    if columns.len() != order.len() {
        bail!("malformed CSV columns: duplicate column names");
    }
    for (row, rec) in rd.records().enumerate() {
        let rec = rec.with_context(|| format!("malformed CSV columns at data row {}", row + 1))?;
        if rec.len() != order.len() {
            bail!("malformed CSV columns: row {} has {} fields, header has {}", row + 1, rec.len(), order.len());
        }
        for (name, field) in order.iter().zip(rec.iter()) {
            let v: f64 = field
                .trim()
                .parse()
                .with_context(|| format!("malformed CSV columns: `{field}` in column `{name}`"))?;
            columns.get_mut(name).unwrap().push(v);
        }
    }
    Ok(Trajectory { columns, order })
}
