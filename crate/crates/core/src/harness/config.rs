use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::disorder::{Cosh4Moment, TailModel};
use crate::spectra::log_lambda_grid;

/// Log-spaced `λ = −|λ|` grid between `−min` and `−max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeGrid {
    /// `per_decade` log-spaced points per factor of ten from `min` to `max`.
    Geometric { min: f64, max: f64, per_decade: usize },
    Values(Vec<f64>),
}

impl Default for TimeGrid {
    fn default() -> Self {
        TimeGrid::Geometric { min: 0.1, max: 1e4, per_decade: 25 }
    }
}

impl TimeGrid {
    pub fn points(&self) -> Result<Vec<f64>, HarnessError> {
        let pts = match *self {
            TimeGrid::Geometric { min, max, per_decade } => {
                if !(min > 0.0 && max >= min && per_decade >= 1 && max.is_finite()) {
                    return Err(HarnessError::Config(format!(
                        "geometric time grid needs 0 < min <= max and per_decade >= 1, got {self:?}"
                    )));
                }
                let decades = (max / min).log10();
                let n = (decades * per_decade as f64).round() as usize;
                let mut pts: Vec<f64> = (0..=n)
                    .map(|i| min * 10f64.powf(i as f64 / per_decade as f64))
                    .collect();
                *pts.last_mut().unwrap() = max;
                pts
            }
            TimeGrid::Values(ref v) => v.clone(),
        };
        if pts.is_empty()
            || pts.iter().any(|t| !(t.is_finite() && *t >= 0.0))
            || pts.windows(2).any(|w| !(w[1] > w[0]))
        {
            return Err(HarnessError::Config("time grid must be nonempty, nonnegative and strictly ascending".into()));
        }
        Ok(pts)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KmcConfig {
    /// Odd number of spins centred on site 0.
    pub sites: usize,
    pub trajectories: usize,
    /// Must start at 0.
    pub times: Vec<f64>,
    /// Index of the coupling realization simulated.
    pub realization: u64,
}

impl Default for KmcConfig {
    fn default() -> Self {
        KmcConfig { sites: 65, trajectories: 200_000, times: vec![0.0, 0.5, 1.0, 2.0, 4.0], realization: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Fit window for `Ŝ(t)`; the largest reliable decade when unset.
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    /// IDS grid points with fewer total counts are dropped.
    pub min_counts: u64,
    /// Fits with a lower weighted `R²` are flagged as poor.
    pub r2_threshold: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { t_min: None, t_max: None, min_counts: 100, r2_threshold: 0.99 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub ids: PathBuf,
    pub autocorr: PathBuf,
    pub kmc: PathBuf,
    pub bounds: PathBuf,
    pub report: PathBuf,
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs {
            ids: "ids.csv".into(),
            autocorr: "autocorr.csv".into(),
            kmc: "kmc.csv".into(),
            bounds: "bounds.csv".into(),
            report: "report.json".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: TailModel,
    /// Window half-width: realizations live on `[−r, r]`.
    pub r: usize,
    /// Realizations `M`.
    pub samples: usize,
    pub seed: u64,
    pub lambda_grid: LambdaGrid,
    pub time_grid: TimeGrid,
    /// Constant of `g₂`, in `(0, 1)`.
    pub c: f64,
    pub c1: f64,
    pub c2: f64,
    pub kmc: KmcConfig,
    pub fit: FitConfig,
    pub outputs: Outputs,
    /// Also write per-realization autocorrelations as JSON lines.
    pub dump_realizations: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: TailModel::Exponential { k: 5.0 },
            r: 500,
            samples: 200,
            seed: 1,
            lambda_grid: LambdaGrid { min: 0.03, max: 0.3, points: 12 },
            time_grid: TimeGrid::default(),
            c: 0.5,
            c1: 1.0,
            c2: 1.0,
            kmc: KmcConfig::default(),
            fit: FitConfig::default(),
            outputs: Outputs::default(),
            dump_realizations: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| HarnessError::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Checks shared by every run.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        self.model.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.r < 10 {
            return bad(format!("r must be >= 10, got {}", self.r));
        }
        if self.samples < 2 {
            return bad(format!("samples must be >= 2, got {}", self.samples));
        }
        if !(self.c > 0.0 && self.c < 1.0) {
            return bad(format!("c must lie in (0, 1), got {}", self.c));
        }
        if !(self.c1 > 0.0 && self.c2 > 0.0 && self.c1.is_finite() && self.c2.is_finite()) {
            return bad(format!("c1, c2 must be positive, got {}, {}", self.c1, self.c2));
        }
        self.lambdas()?;
        self.time_grid.points()?;
        let k = &self.kmc;
        if k.sites < 3 || k.sites.is_multiple_of(2) {
            return bad(format!("kmc.sites must be odd and >= 3, got {}", k.sites));
        }
        if k.trajectories < 2 {
            return bad(format!("kmc.trajectories must be >= 2, got {}", k.trajectories));
        }
        if k.times.first() != Some(&0.0) || k.times.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("kmc.times must start at 0 and be strictly ascending".into());
        }
        if let (Some(a), Some(b)) = (self.fit.t_min, self.fit.t_max) {
            if !(a > 0.0 && b > a) {
                return bad(format!("fit window [{a}, {b}] is empty"));
            }
        }
        Ok(())
    }

    /// Runs built on the decay theorem need a finite fourth cosh-moment
    /// (`k > 4` for Exponential).
    pub fn require_decay_model(&self) -> Result<(), HarnessError> {
        if let Cosh4Moment::Infinite = self.model.cosh4_moment() {
            return Err(HarnessError::Config(format!(
                "{} has an infinite fourth cosh-moment (Exponential needs k > 4)",
                self.model
            )));
        }
        Ok(())
    }

    pub fn lambdas(&self) -> Result<Vec<f64>, HarnessError> {
        let g = &self.lambda_grid;
        log_lambda_grid(g.min, g.max, g.points).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn times(&self) -> Result<Vec<f64>, HarnessError> {
        self.time_grid.points()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = ExperimentConfig::default();
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(ExperimentConfig::from_json("{}").unwrap(), cfg);
    }

    #[test]
    fn partial_config() {
        let cfg = ExperimentConfig::from_json(
            r#"{"model": {"family": "stretched", "alpha": 2.0}, "r": 20, "kmc": {"sites": 9}}"#,
        )
        .unwrap();
        assert_eq!(cfg.model, TailModel::Stretched { alpha: 2.0 });
        assert_eq!(cfg.kmc.sites, 9);
        assert_eq!(cfg.kmc.trajectories, 200_000);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            r#"{"model": {"family": "exponential", "k": -1}}"#,
            r#"{"model": {"family": "gamma", "k": 1}}"#,
            r#"{"model": {"family": "exponential", "k": 5, "alpha": 2}}"#,
            r#"{"bogus": 1}"#,
            r#"{"r": 5}"#,
            r#"{"samples": 1}"#,
            r#"{"c": 1.0}"#,
            r#"{"lambda_grid": {"min": 0.3, "max": 0.03, "points": 4}}"#,
            r#"{"time_grid": {"values": []}}"#,
            r#"{"time_grid": {"values": [1.0, 0.5]}}"#,
            r#"{"kmc": {"sites": 64}}"#,
            r#"{"kmc": {"times": [0.5, 1.0]}}"#,
            "not json",
        ] {
            assert!(ExperimentConfig::from_json(text).is_err(), "{text}");
        }
    }

    #[test]
    fn decay_runs_need_finite_moment() {
        let cfg = ExperimentConfig::from_json(r#"{"model": {"family": "exponential", "k": 4}}"#).unwrap();
        assert!(cfg.require_decay_model().is_err());
        assert!(ExperimentConfig::default().require_decay_model().is_ok());
    }

    #[test]
    fn default_time_grid() {
        let t = TimeGrid::default().points().unwrap();
        assert_eq!(t.len(), 126);
        assert_eq!(t[0], 0.1);
        assert_eq!(*t.last().unwrap(), 1e4);
        assert!((t[25] - 1.0).abs() < 1e-12);
    }
}
