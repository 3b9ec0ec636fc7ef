use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use binoplanar::harness::{self, Experiment, ExperimentConfig};
use clap::Parser;

/// Batch sweeps for binomial bosonic codes on a measurement-based planar code.
#[derive(Debug, Parser)]
#[command(name = "binoplanar", version)]
struct Args {
    /// TOML experiment configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master RNG seed, overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, overrides the config.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory, overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// meas-error | chain1d | threshold | alpha | calibrate
    #[arg(long)]
    experiment: Option<Experiment>,
}

fn run(args: Args) -> Result<bool> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path).with_context(|| format!("reading {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if let Some(o) = args.out {
        cfg.out = o;
    }
    let Some(experiment) = args.experiment.or(cfg.experiment) else {
        bail!("no experiment given; pass --experiment or set `experiment` in the config");
    };
    cfg.experiment = Some(experiment);
    cfg.validate()?;

    let report = harness::run_experiment(&cfg, experiment)?;
    for f in &report.files {
        println!("wrote {}", f.display());
    }
    for a in &report.aborted {
        eprintln!("aborted point: {a}");
    }
    Ok(report.success())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
