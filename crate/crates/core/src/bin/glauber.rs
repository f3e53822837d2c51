use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use glauber_core::harness::{self, ExperimentConfig, HarnessError};

#[derive(Parser)]
#[command(name = "glauber", version, about = "Random-coupling Glauber dynamics: spectra, autocorrelations, bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo integrated density of states on a log λ grid
    Ids(Common),
    /// Disorder-averaged autocorrelation S(t) from the spectral resolution
    Autocorr(Common),
    /// Kinetic Monte Carlo check of the spectral autocorrelation
    Kmc(Common),
    /// Legendre-transform decay envelopes
    Bounds(Common),
    /// Invariant suite; exit status 1 if any check fails
    Validate(Common),
    /// Slope and constant fits from existing ids and autocorr outputs
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; defaults are used when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path for this subcommand
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy)]
enum Kind {
    Ids,
    Autocorr,
    Kmc,
    Bounds,
    Validate,
    Report,
}

impl Command {
    fn split(self) -> (Kind, Common) {
        match self {
            Command::Ids(c) => (Kind::Ids, c),
            Command::Autocorr(c) => (Kind::Autocorr, c),
            Command::Kmc(c) => (Kind::Kmc, c),
            Command::Bounds(c) => (Kind::Bounds, c),
            Command::Validate(c) => (Kind::Validate, c),
            Command::Report(c) => (Kind::Report, c),
        }
    }
}

fn load(kind: Kind, common: &Common) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        let o = &mut cfg.outputs;
        match kind {
            Kind::Ids => o.ids = out.clone(),
            Kind::Autocorr => o.autocorr = out.clone(),
            Kind::Kmc => o.kmc = out.clone(),
            Kind::Bounds => o.bounds = out.clone(),
            Kind::Report => o.report = out.clone(),
            Kind::Validate => {}
        }
    }
    Ok(cfg)
}

fn execute(kind: Kind, cfg: &ExperimentConfig) -> Result<(), HarnessError> {
    match kind {
        Kind::Ids => harness::run_ids(cfg).map(|_| ()),
        Kind::Autocorr => harness::run_autocorr(cfg).map(|_| ()),
        Kind::Kmc => harness::run_kmc(cfg).map(|c| {
            for (t, z) in cfg.kmc.times.iter().zip(&c.z) {
                println!("t={t}: |kmc - spectral|/SE = {z:.3}");
            }
        }),
        Kind::Bounds => harness::run_bounds(cfg).map(|_| ()),
        Kind::Report => harness::run_report(cfg).map(|r| {
            println!("{}", serde_json::to_string_pretty(&r.autocorr).unwrap_or_default());
            println!("{}", serde_json::to_string_pretty(&r.ids).unwrap_or_default());
        }),
        Kind::Validate => {
            let outcomes = harness::run_validate(cfg)?;
            for o in &outcomes {
                println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
            }
            harness::failures(&outcomes)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let (kind, common) = Cli::parse().command.split();
    let result = load(kind, &common)
        .and_then(|cfg| harness::with_threads(common.threads, || execute(kind, &cfg)))
        .and_then(|r| r);
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
