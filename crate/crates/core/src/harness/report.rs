use serde::Serialize;

use super::config::FitConfig;
use crate::asymptotics::{envelope, Envelope};
use crate::autocorr::CorrelationSeries;
use crate::disorder::TailModel;
use crate::spectra::IdsCurve;
use crate::stats::{weighted_line_fit, LineFit};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub r_squared: f64,
    pub points: usize,
}

impl From<LineFit> for Fit {
    fn from(f: LineFit) -> Self {
        Fit { slope: f.slope, intercept: f.intercept, slope_se: f.slope_se, r_squared: f.r_squared, points: f.points }
    }
}

/// Constants placing `Ŝ` between the envelope shapes over the fit window.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FittedConstants {
    /// `exp(mean(ln Ŝ − ln shape₁))`.
    pub c1_least_squares: f64,
    /// `max Ŝ/shape₁`: smallest `C₁` with `Ŝ ≤ upper` on the window.
    pub c1_covering: f64,
    pub c2_least_squares: f64,
    /// `min Ŝ/shape₂`: largest `C₂` with `Ŝ ≥ lower` on the window.
    pub c2_covering: f64,
    /// Points where both Legendre minimizers were interior.
    pub points: usize,
}

/// `ln Ŝ ≈ a + b (ln t)^α` for the stretched family.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StretchedFit {
    pub alpha: f64,
    pub coefficient: f64,
    pub coefficient_se: f64,
    /// Leading-order coefficient `−½(¼)^α` of the upper envelope.
    pub upper_coefficient: f64,
    pub r_squared: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub window: [f64; 2],
    /// Log-log fit of `Ŝ` against `t` on the reliable points of the window.
    pub fit: Option<Fit>,
    pub poor_fit: bool,
    /// `[−2k, −k/8]` for Exponential.
    pub slope_band: Option<[f64; 2]>,
    pub slope_in_band: Option<bool>,
    pub constants: Option<FittedConstants>,
    pub stretched: Option<StretchedFit>,
    pub mean_deficit: f64,
    pub reliable_points: usize,
}

/// Below this, `Ŝ` is dominated by rounding in the spectral weights
/// (`(n·ε)²` for windows of a few thousand sites) rather than by physics.
pub const NUMERICAL_FLOOR: f64 = 1e-20;

/// Points with `Ŝ > 3·SE` (or `Ŝ > 0` without error bars), `Ŝ` above the
/// numerical floor, and `t > 0`.
fn reliable(series: &CorrelationSeries, i: usize) -> bool {
    let s = series.s_hat[i];
    let floor = series.stderr.as_ref().map_or(0.0, |se| 3.0 * se[i]);
    series.times[i] > 0.0 && s > NUMERICAL_FLOOR && s > floor
}

/// Inverse-variance weight of `ln Ŝ`.
fn log_weight(series: &CorrelationSeries, i: usize) -> f64 {
    match &series.stderr {
        Some(se) if se[i] > 0.0 => (series.s_hat[i] / se[i]).powi(2),
        _ => 1.0,
    }
}

/// The decade `[t*/10, t*]` ending at the largest `t*` such that all grid
/// points from the first reliable one up to `t*` are reliable.
pub fn largest_reliable_decade(series: &CorrelationSeries) -> Option<[f64; 2]> {
    let first = (0..series.times.len()).find(|&i| reliable(series, i))?;
    let last = (first..series.times.len()).take_while(|&i| reliable(series, i)).last()?;
    let hi = series.times[last];
    Some([(hi / 10.0).max(series.times[first]), hi])
}

pub fn fit_decay(series: &CorrelationSeries, model: &TailModel, c: f64, fit: &FitConfig) -> DecayFit {
    let window = match (fit.t_min, fit.t_max) {
        (Some(a), Some(b)) => [a, b],
        _ => largest_reliable_decade(series).unwrap_or([f64::NAN, f64::NAN]),
    };
    let idx: Vec<usize> = (0..series.times.len())
        .filter(|&i| series.times[i] >= window[0] && series.times[i] <= window[1] && reliable(series, i))
        .collect();
    let lt: Vec<f64> = idx.iter().map(|&i| series.times[i].ln()).collect();
    let ls: Vec<f64> = idx.iter().map(|&i| series.s_hat[i].ln()).collect();
    let w: Vec<f64> = idx.iter().map(|&i| log_weight(series, i)).collect();
    let line = weighted_line_fit(&lt, &ls, &w);
    let slope_band = match *model {
        TailModel::Exponential { k } => Some([-2.0 * k, -k / 8.0]),
        _ => None,
    };
    let times: Vec<f64> = idx.iter().map(|&i| series.times[i]).collect();
    let constants = envelope(model, &times, c, 1.0, 1.0)
        .ok()
        .and_then(|env| fitted_constants(&env, &ls));
    let stretched = match *model {
        TailModel::Stretched { alpha } => {
            let x: Vec<f64> = lt.iter().map(|l| l.powf(alpha)).collect();
            weighted_line_fit(&x, &ls, &w).map(|f| StretchedFit {
                alpha,
                coefficient: f.slope,
                coefficient_se: f.slope_se,
                upper_coefficient: -0.5 * 0.25f64.powf(alpha),
                r_squared: f.r_squared,
            })
        }
        _ => None,
    };
    DecayFit {
        window,
        poor_fit: line.is_none_or(|f| f.r_squared < fit.r2_threshold),
        slope_in_band: slope_band.zip(line).map(|(b, f)| f.slope >= b[0] && f.slope <= b[1]),
        fit: line.map(Fit::from),
        slope_band,
        constants,
        stretched,
        mean_deficit: series.mean_deficit,
        reliable_points: idx.len(),
    }
}

fn fitted_constants(env: &Envelope, ln_s: &[f64]) -> Option<FittedConstants> {
    let mut d1 = vec![];
    let mut d2 = vec![];
    for (i, s) in ln_s.iter().enumerate() {
        if let (Some(u), Some(l)) = env.ln_bounds(i) {
            d1.push(s - u);
            d2.push(s - l);
        }
    }
    if d1.is_empty() {
        return None;
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Some(FittedConstants {
        c1_least_squares: mean(&d1).exp(),
        c1_covering: d1.iter().copied().fold(f64::NEG_INFINITY, f64::max).exp(),
        c2_least_squares: mean(&d2).exp(),
        c2_covering: d2.iter().copied().fold(f64::INFINITY, f64::min).exp(),
        points: d1.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdsFit {
    /// `|λ|` range of the points kept.
    pub lambda_window: [f64; 2],
    pub fit: Option<Fit>,
    pub poor_fit: bool,
    /// Points dropped for having too few counts or `N̂ ≤ 3·SE`.
    pub trimmed: usize,
    /// `[k/4, k]` for Exponential.
    pub slope_band: Option<[f64; 2]>,
    pub slope_in_band: Option<bool>,
}

/// Weighted log-log fit of `N̂` against `|λ|` after dropping points with
/// fewer than `min_counts` total eigenvalues or `N̂ ≤ 3·SE`.
pub fn fit_ids(curve: &IdsCurve, model: &TailModel, fit: &FitConfig) -> IdsFit {
    let keep: Vec<usize> = (0..curve.lambdas.len())
        .filter(|&i| curve.total_counts[i] >= fit.min_counts && curve.n_hat[i] > 3.0 * curve.stderr[i])
        .collect();
    let x: Vec<f64> = keep.iter().map(|&i| curve.lambdas[i].abs().ln()).collect();
    let y: Vec<f64> = keep.iter().map(|&i| curve.n_hat[i].ln()).collect();
    let w: Vec<f64> = keep.iter().map(|&i| (curve.n_hat[i] / curve.stderr[i]).powi(2)).collect();
    let line = weighted_line_fit(&x, &y, &w);
    let abs: Vec<f64> = keep.iter().map(|&i| curve.lambdas[i].abs()).collect();
    let slope_band = match *model {
        TailModel::Exponential { k } => Some([k / 4.0, k]),
        _ => None,
    };
    IdsFit {
        lambda_window: [
            abs.iter().copied().fold(f64::INFINITY, f64::min),
            abs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ],
        poor_fit: line.is_none_or(|f| f.r_squared < fit.r2_threshold),
        slope_in_band: slope_band.zip(line).map(|(b, f)| f.slope >= b[0] && f.slope <= b[1]),
        fit: line.map(Fit::from),
        trimmed: curve.lambdas.len() - keep.len(),
        slope_band,
    }
}
