use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use lightcone_cli::fit::{fit_series, read_probe_file};
use lightcone_cli::output::{read_trajectory_csv, to_json, write_atomic};
use lightcone_cli::pipeline::{cmd_build, cmd_run, cmd_threshold, Artifacts};
use lightcone_cli::verify::{cmd_verify, Suite};
use lightcone_cli::{dispatch, ExperimentConfig};

#[derive(Parser)]
#[command(name = "lightcone", version, about = "Light-cone propagation experiments on a truncated Fock space")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Batch {
    /// Experiment config (TOML); repeat for several runs.
    #[arg(long = "config", value_name = "PATH", required = true)]
    configs: Vec<PathBuf>,
    /// Output directory; one subdirectory per config when several are given.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Parallel runs.
    #[arg(long, default_value_t = 1, value_name = "N")]
    jobs: usize,
}

#[derive(Subcommand)]
enum Cmd {
    /// Assemble H and H̃ and export them as coordinate lists.
    Build(Batch),
    /// Run the verification suites.
    Verify {
        #[arg(long = "config", value_name = "PATH")]
        config: Option<PathBuf>,
        #[arg(long, default_value = "all", value_name = "NAME")]
        suite: Suite,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Threshold, filter, propagate, probe and fit.
    Run(Batch),
    /// Re-run the fits from a persisted trajectory.
    Fit {
        trajectory_csv: PathBuf,
        probe_json: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Ionization threshold estimate only.
    Threshold(Batch),
}

fn out_dir(batch: &Batch, cfg_path: &Path, cfg: &ExperimentConfig) -> PathBuf {
    match &batch.out {
        Some(o) if batch.configs.len() > 1 => {
            o.join(cfg_path.file_stem().map(|s| s.to_os_string()).unwrap_or_else(|| "run".into()))
        }
        Some(o) => o.clone(),
        None => PathBuf::from(&cfg.io.out_dir),
    }
}

fn run_batch(batch: &Batch, f: fn(&ExperimentConfig) -> Result<Artifacts>) -> Result<bool> {
    let results = dispatch(batch.jobs, &batch.configs, |path| -> Result<PathBuf> {
        let cfg = ExperimentConfig::load(path)?;
        let arts = f(&cfg)?;
        let dir = out_dir(batch, path, &cfg);
        arts.write(&dir)?;
        if let Some(fits) = arts.get("fits.json") {
            print!("{}", String::from_utf8_lossy(fits));
        }
        Ok(dir)
    });
    let mut ok = true;
    for (path, r) in batch.configs.iter().zip(results) {
        match r {
            Ok(dir) => eprintln!("{}: wrote {}", path.display(), dir.display()),
            Err(e) => {
                eprintln!("{}: error: {e:#}", path.display());
                ok = false;
            }
        }
    }
    Ok(ok)
}

fn main_inner(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Build(b) => run_batch(&b, cmd_build),
        Cmd::Run(b) => run_batch(&b, cmd_run),
        Cmd::Threshold(b) => run_batch(&b, cmd_threshold),
        Cmd::Verify { config, suite, out } => {
            let cfg = match config {
                Some(p) => ExperimentConfig::load(&p)?,
                None => ExperimentConfig::default(),
            };
            let report = cmd_verify(&cfg, suite)?;
            for l in report.lines() {
                println!("{l}");
            }
            println!("verify: {}", if report.passed { "passed" } else { "FAILED" });
            if let Some(o) = out {
                write_atomic(&o.join("verify.json"), &to_json(&report))?;
            }
            Ok(report.passed)
        }
        Cmd::Fit { trajectory_csv, probe_json, out } => {
            let probe = read_probe_file(&probe_json)?;
            let tr = read_trajectory_csv(&trajectory_csv)?;
            let report = fit_series(&probe, &tr).context("fitting persisted series")?;
            let bytes = to_json(&report);
            match out {
                Some(o) => write_atomic(&o.join("fits.json"), &bytes)?,
                None => print!("{}", String::from_utf8_lossy(&bytes)),
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
