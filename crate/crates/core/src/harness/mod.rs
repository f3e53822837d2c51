//! Configuration, experiment runs and reports behind the `glauber` CLI.
//!
//! Every run is a pure function of the resolved config: parallel work is
//! confined to realization and trajectory loops that collect in index order,
//! so output files do not depend on the worker count.

pub mod checks;
pub mod config;
pub mod report;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use serde::Serialize;

use crate::asymptotics::{envelope, Envelope};
use crate::autocorr::{disorder_average_records, single_autocorr, CorrelationSeries};
use crate::disorder::{derive, sample_realization, TailModel};
use crate::kmc::{simulate_autocorr, TrajectoryStats};
use crate::spectra::{ids_estimate, IdsCurve};
use crate::stats::fmt17;
use crate::VERSION;

pub use checks::CheckOutcome;
pub use config::{ExperimentConfig, FitConfig, KmcConfig, LambdaGrid, Outputs, TimeGrid};
pub use report::{fit_decay, fit_ids, DecayFit, IdsFit};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] crate::Error),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{0} validation check(s) failed")]
    ValidationFailed(usize),
}

impl HarnessError {
    /// 1 for failed validation, 2 for configuration and input problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::ValidationFailed(_) => 1,
            _ => 2,
        }
    }
}

type Result<T> = std::result::Result<T, HarnessError>;

/// Runs `f` on a dedicated pool of `threads` workers (all cores when `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(HarnessError::Config("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// `#` comment lines opening every output file.
pub fn preamble(cfg: &ExperimentConfig, run: &str) -> Vec<String> {
    vec![format!("glauber {VERSION} {run}"), format!("config {}", cfg.to_json())]
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let io = |source| HarnessError::Io { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    body(&mut out).and_then(|_| out.flush()).map_err(io)
}

/// `dir/stem_suffix.ext` next to `path`.
pub fn sibling(path: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = path.file_stem().map_or("out".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}_{suffix}.{ext}"))
}

pub fn run_ids(cfg: &ExperimentConfig) -> Result<IdsCurve> {
    cfg.validate()?;
    let lambdas = cfg.lambdas()?;
    let start = Instant::now();
    let curve = ids_estimate(&cfg.model, &lambdas, cfg.r, cfg.samples, cfg.seed)?;
    info!("ids: {} realizations on [-{r}, {r}] in {:.2?}", cfg.samples, start.elapsed(), r = cfg.r);
    for (l, n) in curve.lambdas.iter().zip(&curve.total_counts) {
        info!("ids: λ = {l:.6e}: {n} eigenvalues above λ");
    }
    write_file(&cfg.outputs.ids, |out| curve.write_csv(out, &preamble(cfg, "ids")))?;
    Ok(curve)
}

pub fn run_autocorr(cfg: &ExperimentConfig) -> Result<CorrelationSeries> {
    cfg.validate()?;
    cfg.require_decay_model()?;
    let times = cfg.times()?;
    let start = Instant::now();
    let (series, records) = disorder_average_records(&cfg.model, &times, cfg.r, cfg.samples, cfg.seed)?;
    info!(
        "autocorr: {} realizations on [-{r}, {r}] in {:.2?}, mean deficit {:.3e}",
        cfg.samples,
        start.elapsed(),
        series.mean_deficit,
        r = cfg.r
    );
    write_file(&cfg.outputs.autocorr, |out| series.write_csv(out, &preamble(cfg, "autocorr")))?;
    if cfg.dump_realizations {
        let path = sibling(&cfg.outputs.autocorr, "realizations", "jsonl");
        write_file(&path, |out| {
            for rec in &records {
                serde_json::to_writer(&mut *out, rec)?;
                writeln!(out)?;
            }
            Ok(())
        })?;
    }
    Ok(series)
}

/// KMC and spectral autocorrelation of one free-boundary window.
#[derive(Clone, Debug, PartialEq)]
pub struct KmcComparison {
    pub stats: TrajectoryStats,
    pub spectral: Vec<f64>,
    /// `|kmc − spectral|/SE`. Where the KMC value is exact (`SE = 0`, e.g.
    /// at `t = 0`) this is 0 for agreement to `1e−12` and infinite otherwise.
    pub z: Vec<f64>,
}

/// Samples realization `realization` on `[−h−1, h+1]` with `h = sites/2`,
/// cuts the bonds leaving `[−h, h]`, and evaluates both pipelines there.
pub fn kmc_comparison(
    model: &TailModel,
    sites: usize,
    times: &[f64],
    trajectories: usize,
    seed: u64,
    realization: u64,
) -> crate::Result<KmcComparison> {
    let h = (sites / 2) as i64;
    let field = sample_realization(model, -h - 1, h + 1, seed, realization)?;
    let free = field.free_boundary(-h, h)?;
    let spectral = single_autocorr(&derive(&free), -h, h, times)?.values;
    let stats = simulate_autocorr(&free.window(-h, h)?, times, trajectories, seed)?;
    let z = (0..times.len())
        .map(|i| {
            let diff = (stats.estimate[i] - spectral[i]).abs();
            match stats.stderr[i] {
                se if se > 0.0 => diff / se,
                _ if diff <= 1e-12 => 0.0,
                _ => f64::INFINITY,
            }
        })
        .collect();
    Ok(KmcComparison { stats, spectral, z })
}

pub fn run_kmc(cfg: &ExperimentConfig) -> Result<KmcComparison> {
    cfg.validate()?;
    let k = &cfg.kmc;
    let start = Instant::now();
    let cmp = kmc_comparison(&cfg.model, k.sites, &k.times, k.trajectories, cfg.seed, k.realization)?;
    info!("kmc: {} trajectories on {} sites in {:.2?}", k.trajectories, k.sites, start.elapsed());
    let pre = preamble(cfg, "kmc");
    write_file(&cfg.outputs.kmc, |out| cmp.stats.write_csv(out, &pre))?;
    let path = sibling(&cfg.outputs.kmc, "spectral", "csv");
    write_file(&path, |out| {
        for line in &pre {
            writeln!(out, "# {line}")?;
        }
        writeln!(out, "t,kmc_estimate,stderr,spectral,z")?;
        for i in 0..k.times.len() {
            writeln!(
                out,
                "{},{},{},{},{}",
                fmt17(k.times[i]),
                fmt17(cmp.stats.estimate[i]),
                fmt17(cmp.stats.stderr[i]),
                fmt17(cmp.spectral[i]),
                fmt17(cmp.z[i])
            )?;
        }
        Ok(())
    })?;
    Ok(cmp)
}

pub fn run_bounds(cfg: &ExperimentConfig) -> Result<Envelope> {
    cfg.validate()?;
    cfg.require_decay_model()?;
    let times = cfg.times()?;
    let env = envelope(&cfg.model, &times, cfg.c, cfg.c1, cfg.c2)?;
    write_file(&cfg.outputs.bounds, |out| env.write_csv(out, &preamble(cfg, "bounds")))?;
    Ok(env)
}

/// Invariant suite at desk-check sizes. Failed checks are reported in the
/// outcomes; see [`failures`].
pub fn run_validate(cfg: &ExperimentConfig) -> Result<Vec<CheckOutcome>> {
    cfg.validate()?;
    let s = cfg.seed;
    let outcomes = vec![
        checks::counting_exactness(200, 20, 200, s),
        checks::spectrum_box(200, 200, s),
        checks::homogeneous_dispersion(&[0.1, 0.5, 1.0], 200, 1e-8),
        checks::regular_bond_bound(200, 20, 200, s),
        checks::weak_site_bound(20, 200, &[-0.01, -0.05, -0.2], s),
        checks::mass_bookkeeping(100, 20, s),
        checks::single_series(s),
        checks::decoupled_pipeline(11, 20_000, s),
        checks::detailed_balance(10_000, s),
        checks::kmc_agreement(&TailModel::Exponential { k: 5.0 }, 21, &[0.0, 0.5, 1.0, 2.0, 4.0], 20_000, s, 0),
        checks::legendre_closed_forms(&[5.0, 8.0], &[1.5, 2.0], cfg.c),
        checks::ids_smoke(s),
    ];
    Ok(outcomes)
}

/// `Err(ValidationFailed)` when any outcome failed.
pub fn failures(outcomes: &[CheckOutcome]) -> Result<()> {
    match outcomes.iter().filter(|o| !o.passed).count() {
        0 => Ok(()),
        n => Err(HarnessError::ValidationFailed(n)),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub version: &'static str,
    pub config: ExperimentConfig,
    pub autocorr: DecayFit,
    pub ids: IdsFit,
}

fn open(path: &Path) -> Result<std::io::BufReader<File>> {
    File::open(path)
        .map(std::io::BufReader::new)
        .map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })
}

/// Fits the autocorrelation and IDS files named in the config and writes a
/// JSON summary.
pub fn run_report(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let series = CorrelationSeries::read_csv(open(&cfg.outputs.autocorr)?)?;
    let curve = IdsCurve::read_csv(open(&cfg.outputs.ids)?)?;
    let report = Report {
        version: VERSION,
        config: cfg.clone(),
        autocorr: fit_decay(&series, &cfg.model, cfg.c, &cfg.fit),
        ids: fit_ids(&curve, &cfg.model, &cfg.fit),
    };
    write_file(&cfg.outputs.report, |out| {
        serde_json::to_writer_pretty(&mut *out, &report)?;
        writeln!(out)
    })?;
    Ok(report)
}
