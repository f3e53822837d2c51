//! Spectral evaluation of `(e^{tL₁}σ₀, σ₀)` and `(e^{tL₁}v₀, v₀)` for one
//! coupling realization, and their disorder averages.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::disorder::{derive, sample_realization, Cosh4Moment, DerivedField, TailModel};
use crate::onespin::{build_l1, sigma_weights};
use crate::spectra::{eigensolve_projected, ProjectedSpectrum};
use crate::stats::{fmt17, mean_se};
use crate::{Error, Result};

/// Spectral data of one realization on the operator window `[lo, hi]`:
/// eigenvalues with the projections of `σ₀` (truncated to `[lo, 0]`) and of
/// `v₀` on every eigenvector.
#[derive(Clone, Debug)]
pub struct RealizationSpectrum {
    pub spectrum: ProjectedSpectrum,
    /// Squared norm of the truncated `σ₀` expansion.
    pub mass: f64,
    pub weight_underflow: bool,
}

const SIGMA: usize = 0;
const V0: usize = 1;

impl RealizationSpectrum {
    pub fn new(derived: &DerivedField, lo: i64, hi: i64) -> Result<Self> {
        if !(lo <= 0 && 0 <= hi) {
            return Err(Error::Window(format!("window [{lo}, {hi}] must contain site 0")));
        }
        let j = build_l1(derived, lo, hi)?;
        let weights = sigma_weights(derived, lo)?;
        let sigma = weights.embed(&j)?;
        let mut v0 = vec![0.0; j.dim()];
        v0[(-lo) as usize] = 1.0;
        let spectrum = eigensolve_projected(&j, &[&sigma, &v0])?;
        Ok(RealizationSpectrum { spectrum, mass: weights.mass(), weight_underflow: weights.underflow })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.spectrum.eigenvalues
    }

    pub fn deficit(&self) -> f64 {
        1.0 - self.mass
    }

    /// `(e^{tL₁}σ₀, σ₀)` on the window.
    pub fn sigma_autocorr(&self, t: f64) -> f64 {
        self.spectrum.laplace(SIGMA, t)
    }

    /// `(e^{tL₁}v₀, v₀)` on the window.
    pub fn v0_autocorr(&self, t: f64) -> f64 {
        self.spectrum.laplace(V0, t)
    }

    /// `Σ_j e^{tλ_j}`.
    pub fn trace_exp(&self, t: f64) -> f64 {
        self.spectrum.eigenvalues.iter().map(|l| (t * l).exp()).sum()
    }
}

/// Single-realization autocorrelation of `σ₀` on a time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SingleAutocorr {
    pub values: Vec<f64>,
    pub mass: f64,
    pub deficit: f64,
}

/// `Σ_j (Σ_{x≤0} w_x u_j(x))² e^{tλ_j}` for the operator on `[lo, hi]`.
pub fn single_autocorr(derived: &DerivedField, lo: i64, hi: i64, times: &[f64]) -> Result<SingleAutocorr> {
    let rs = RealizationSpectrum::new(derived, lo, hi)?;
    Ok(SingleAutocorr {
        values: times.iter().map(|&t| rs.sigma_autocorr(t)).collect(),
        mass: rs.mass,
        deficit: rs.deficit(),
    })
}

/// `Σ_j u_j(0)² e^{tλ_j}` for the operator on `[lo, hi]`.
pub fn v0_autocorr(derived: &DerivedField, lo: i64, hi: i64, times: &[f64]) -> Result<Vec<f64>> {
    let rs = RealizationSpectrum::new(derived, lo, hi)?;
    Ok(times.iter().map(|&t| rs.v0_autocorr(t)).collect())
}

/// Disorder-averaged autocorrelation `Ŝ(t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationSeries {
    pub times: Vec<f64>,
    pub s_hat: Vec<f64>,
    /// `None` when a single realization leaves the variance undefined.
    pub stderr: Option<Vec<f64>>,
    pub mean_deficit: f64,
    pub max_deficit: f64,
    pub r: usize,
    pub samples: usize,
}

/// Per-realization record for debugging dumps.
#[derive(Clone, Debug, Serialize)]
pub struct RealizationRecord {
    pub realization: u64,
    pub deficit: f64,
    pub weight_underflow: bool,
    pub values: Vec<f64>,
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidArgument("empty time grid".into()));
    }
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("time grid must be finite, nonnegative and ascending".into()));
    }
    Ok(())
}

fn require_finite_moment(model: &TailModel) -> Result<()> {
    model.validate()?;
    match model.cosh4_moment() {
        Cosh4Moment::Finite(_) => Ok(()),
        Cosh4Moment::Infinite => Err(Error::InfiniteMoment(model.to_string())),
    }
}

fn realization(model: &TailModel, r: usize, seed: u64, m: u64) -> Result<RealizationSpectrum> {
    let ri = r as i64;
    let field = sample_realization(model, -ri - 1, ri + 1, seed, m)?;
    RealizationSpectrum::new(&derive(&field), -ri, ri)
}

/// Averages [`single_autocorr`] over `samples` realizations on `[−r, r]`.
pub fn disorder_average(
    model: &TailModel,
    times: &[f64],
    r: usize,
    samples: usize,
    seed: u64,
) -> Result<CorrelationSeries> {
    disorder_average_records(model, times, r, samples, seed).map(|(s, _)| s)
}

/// [`disorder_average`] together with the per-realization series.
pub fn disorder_average_records(
    model: &TailModel,
    times: &[f64],
    r: usize,
    samples: usize,
    seed: u64,
) -> Result<(CorrelationSeries, Vec<RealizationRecord>)> {
    require_finite_moment(model)?;
    check_times(times)?;
    if samples == 0 || r == 0 {
        return Err(Error::InvalidArgument("need r >= 1 and at least one realization".into()));
    }
    let records: Vec<RealizationRecord> = (0..samples as u64)
        .into_par_iter()
        .map(|m| -> Result<RealizationRecord> {
            let rs = realization(model, r, seed, m)?;
            Ok(RealizationRecord {
                realization: m,
                deficit: rs.deficit(),
                weight_underflow: rs.weight_underflow,
                values: times.iter().map(|&t| rs.sigma_autocorr(t)).collect(),
            })
        })
        .collect::<Result<_>>()?;
    let mut s_hat = Vec::with_capacity(times.len());
    let mut stderr = Vec::with_capacity(times.len());
    for i in 0..times.len() {
        let col: Vec<f64> = records.iter().map(|rec| rec.values[i]).collect();
        let (m, se) = mean_se(&col);
        s_hat.push(m);
        stderr.push(se);
    }
    let deficits: Vec<f64> = records.iter().map(|rec| rec.deficit).collect();
    let series = CorrelationSeries {
        times: times.to_vec(),
        s_hat,
        stderr: stderr.into_iter().collect(),
        mean_deficit: mean_se(&deficits).0,
        max_deficit: deficits.iter().copied().fold(0.0, f64::max),
        r,
        samples,
    };
    Ok((series, records))
}

/// `(1/(M(2r+1))) Σ_{m,j} e^{tλ_j^{(m)}}`: the Laplace transform of the
/// empirical IDS from pooled spectra of `M` windows of `2r+1` sites.
pub fn ids_laplace(pooled: &[Vec<f64>], r: usize, t: f64) -> f64 {
    let total: f64 = pooled.iter().flatten().map(|l| (t * l).exp()).sum();
    total / (pooled.len() as f64 * (2 * r + 1) as f64)
}

/// Disorder averages of `(e^{tL₁}v₀, v₀)` and of the per-site trace
/// `Σ_j e^{tλ_j}/(2r+1)`, which share their infinite-volume limit.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralPair {
    pub times: Vec<f64>,
    pub v0_mean: Vec<f64>,
    pub v0_se: Vec<f64>,
    pub laplace: Vec<f64>,
    pub laplace_se: Vec<f64>,
    pub r: usize,
    pub samples: usize,
}

pub fn spectral_pair_average(
    model: &TailModel,
    times: &[f64],
    r: usize,
    samples: usize,
    seed: u64,
) -> Result<SpectralPair> {
    model.validate()?;
    check_times(times)?;
    if samples < 2 || r == 0 {
        return Err(Error::InvalidArgument("need r >= 1 and at least two realizations".into()));
    }
    let spectra: Vec<RealizationSpectrum> = (0..samples as u64)
        .into_par_iter()
        .map(|m| realization(model, r, seed, m))
        .collect::<Result<_>>()?;
    let pooled: Vec<Vec<f64>> = spectra.iter().map(|s| s.eigenvalues().to_vec()).collect();
    let sites = (2 * r + 1) as f64;
    let mut out = SpectralPair {
        times: times.to_vec(),
        v0_mean: vec![],
        v0_se: vec![],
        laplace: vec![],
        laplace_se: vec![],
        r,
        samples,
    };
    for &t in times {
        let v0: Vec<f64> = spectra.iter().map(|s| s.v0_autocorr(t)).collect();
        let tr: Vec<f64> = spectra.iter().map(|s| s.trace_exp(t) / sites).collect();
        let (vm, vse) = mean_se(&v0);
        let (_, tse) = mean_se(&tr);
        out.v0_mean.push(vm);
        out.v0_se.push(vse.unwrap_or(f64::NAN));
        out.laplace.push(ids_laplace(&pooled, r, t));
        out.laplace_se.push(tse.unwrap_or(f64::NAN));
    }
    Ok(out)
}

/// Checks that a series is positive, nonincreasing and log-convex on its
/// grid (slopes of `ln value` between grid points are nondecreasing).
/// A falling tail of subnormal or zero values from underflow is accepted.
pub fn check_complete_monotone(times: &[f64], values: &[f64], tol: f64) -> Result<(), String> {
    // Subnormal and zero values are underflow; they only need to keep falling.
    let positive = values.iter().take_while(|v| **v >= f64::MIN_POSITIVE).count();
    if positive == 0 {
        return Err(format!("value at t={} is not positive: {}", times[0], values[0]));
    }
    for i in positive..values.len() {
        if !(values[i] >= 0.0 && values[i] <= values[i - 1]) {
            return Err(format!("value at t={} breaks the underflow tail: {}", times[i], values[i]));
        }
    }
    let (times, values) = (&times[..positive], &values[..positive]);
    for i in 1..values.len() {
        if values[i] > values[i - 1] * (1.0 + tol) {
            return Err(format!("increase at t={}: {} > {}", times[i], values[i], values[i - 1]));
        }
    }
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let slopes: Vec<f64> = (1..logs.len())
        .filter(|&i| times[i] > times[i - 1])
        .map(|i| (logs[i] - logs[i - 1]) / (times[i] - times[i - 1]))
        .collect();
    for w in slopes.windows(2) {
        if w[1] < w[0] - tol * (1.0 + w[0].abs()) {
            return Err(format!("log-concave kink: slope {} after {}", w[1], w[0]));
        }
    }
    Ok(())
}

impl CorrelationSeries {
    /// CSV `t,s_hat,stderr,mean_deficit`; an undefined standard error is
    /// written as `NA`.
    pub fn write_csv<W: Write>(&self, mut out: W, preamble: &[String]) -> std::io::Result<()> {
        for line in preamble {
            writeln!(out, "# {line}")?;
        }
        writeln!(out, "t,s_hat,stderr,mean_deficit")?;
        for i in 0..self.times.len() {
            let se = self.stderr.as_ref().map_or("NA".to_string(), |s| fmt17(s[i]));
            writeln!(
                out,
                "{},{},{},{}",
                fmt17(self.times[i]),
                fmt17(self.s_hat[i]),
                se,
                fmt17(self.mean_deficit)
            )?;
        }
        Ok(())
    }

    /// Reads the CSV written by [`write_csv`](Self::write_csv); `r` and
    /// `samples` are not part of the table and come back as 0.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let bad = |m: String| Error::InvalidArgument(format!("autocorrelation CSV: {m}"));
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
        let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t", "s_hat", "stderr", "mean_deficit"] {
            return Err(bad(format!("unexpected header {headers:?}")));
        }
        let mut times = vec![];
        let mut s_hat = vec![];
        let mut stderr = vec![];
        let mut has_se = true;
        let mut mean_deficit = 0.0;
        for rec in rdr.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let f = |i: usize| rec[i].parse::<f64>().map_err(|e| bad(format!("{e} in {:?}", &rec[i])));
            times.push(f(0)?);
            s_hat.push(f(1)?);
            if &rec[2] == "NA" {
                has_se = false;
            } else {
                stderr.push(f(2)?);
            }
            mean_deficit = f(3)?;
        }
        Ok(CorrelationSeries {
            times,
            s_hat,
            stderr: has_se.then_some(stderr),
            mean_deficit,
            max_deficit: f64::NAN,
            r: 0,
            samples: 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::CouplingField;
    use crate::spectra::eigensolve;

    fn geometric(from: f64, to: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| from * (to / from).powf(i as f64 / (n - 1) as f64)).collect()
    }

    #[test]
    fn decoupled_is_pure_exponential() {
        let d = derive(&CouplingField::homogeneous(-11, 11, 0.0).unwrap());
        let times = [0.0, 0.5, 1.0, 3.0, 10.0];
        let s = single_autocorr(&d, -10, 10, &times).unwrap();
        let v = v0_autocorr(&d, -10, 10, &times).unwrap();
        for (i, t) in times.iter().enumerate() {
            assert!((s.values[i] - (-t).exp()).abs() < 1e-15);
            assert!((v[i] - (-t).exp()).abs() < 1e-15);
        }
        assert_eq!(s.deficit, 0.0);
    }

    #[test]
    fn homogeneous_mass_at_zero() {
        let a: f64 = 0.6;
        let d = derive(&CouplingField::homogeneous(-9, 9, a.atanh()).unwrap());
        for depth in [1i64, 3, 6] {
            let s = single_autocorr(&d, -depth, 5, &[0.0]).unwrap();
            let want = 1.0 - a.powi(2 * (depth as i32 + 1));
            assert!((s.values[0] - want).abs() < 1e-13);
            assert!((s.mass - want).abs() < 1e-13);
        }
    }

    #[test]
    fn v0_is_unit_vector() {
        let m = TailModel::exponential(5.0).unwrap();
        for i in 0..20 {
            let f = sample_realization(&m, -31, 31, 3, i).unwrap();
            let v = v0_autocorr(&derive(&f), -30, 30, &[0.0]).unwrap();
            assert!((v[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn series_completely_monotone() {
        let m = TailModel::exponential(5.0).unwrap();
        let times = geometric(0.1, 1e4, 61);
        for i in 0..20 {
            let f = sample_realization(&m, -41, 41, 4, i).unwrap();
            let d = derive(&f);
            let s = single_autocorr(&d, -40, 40, &times).unwrap();
            check_complete_monotone(&times, &s.values, 1e-10).unwrap();
            let v = v0_autocorr(&d, -40, 40, &times).unwrap();
            check_complete_monotone(&times, &v, 1e-10).unwrap();
            assert!(s.values.last().unwrap() < &s.values[0]);
        }
    }

    #[test]
    fn v0_dominates_top_mode() {
        // (e^{tL}v₀, v₀) ≥ u_top(0)² e^{λ_top t} on a 5-site instance
        let f = CouplingField::new(-3, vec![0.4, 1.3, 0.2, 2.1, 0.7, 0.9, 0.3]).unwrap();
        let d = derive(&f);
        let j = build_l1(&d, -2, 2).unwrap();
        let full = eigensolve(&j, true);
        let top = full.eigenvalues.len() - 1;
        let u0 = full.eigenvectors.as_ref().unwrap()[top][2];
        for t in [0.5, 2.0, 10.0, 100.0] {
            let v = v0_autocorr(&d, -2, 2, &[t]).unwrap()[0];
            let mode = u0 * u0 * (full.eigenvalues[top] * t).exp();
            assert!(v >= mode * (1.0 - 1e-12));
        }
    }

    #[test]
    fn cauchy_schwarz_between_basis_vectors() {
        let m = TailModel::exponential(5.0).unwrap();
        for i in 0..30 {
            let f = sample_realization(&m, 0, 11, 6, i).unwrap();
            let j = build_l1(&derive(&f), 1, 10).unwrap();
            let full = eigensolve(&j, true);
            let vecs = full.eigenvectors.unwrap();
            let kernel = |t: f64, x: usize, y: usize| -> f64 {
                full.eigenvalues
                    .iter()
                    .zip(&vecs)
                    .map(|(l, u)| (t * l).exp() * u[x] * u[y])
                    .sum()
            };
            for t in [0.1, 1.0, 10.0] {
                for x in 0..10 {
                    for y in 0..10 {
                        let lhs = kernel(t, x, y).powi(2);
                        let rhs = kernel(t, x, x) * kernel(t, y, y);
                        assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-300);
                        assert!(kernel(t, x, x) <= 1.0 + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn decoupled_average_has_zero_error() {
        let m = TailModel::constant(0.0).unwrap();
        let s = disorder_average(&m, &[0.0, 1.0, 2.0], 10, 4, 1).unwrap();
        for (i, t) in s.times.iter().enumerate() {
            assert!((s.s_hat[i] - (-t).exp()).abs() < 1e-15);
            assert_eq!(s.stderr.as_ref().unwrap()[i], 0.0);
        }
    }

    #[test]
    fn single_realization_has_no_error_bar() {
        let m = TailModel::exponential(5.0).unwrap();
        let s = disorder_average(&m, &[0.0, 1.0], 10, 1, 1).unwrap();
        assert!(s.stderr.is_none());
    }

    #[test]
    fn mass_bookkeeping() {
        let m = TailModel::exponential(5.0).unwrap();
        let s = disorder_average(&m, &[0.0, 1.0], 20, 30, 2).unwrap();
        assert!((s.s_hat[0] + s.mean_deficit - 1.0).abs() < 1e-10);
        assert!(s.s_hat[1] < s.s_hat[0]);
    }

    #[test]
    fn infinite_moment_rejected() {
        let m = TailModel::exponential(3.0).unwrap();
        assert!(matches!(disorder_average(&m, &[0.0], 10, 2, 0), Err(Error::InfiniteMoment(_))));
    }

    #[test]
    fn laplace_of_pooled_spectra() {
        assert_eq!(ids_laplace(&[vec![-0.5, -1.0, -1.5], vec![-0.2, -0.7, -1.9]], 1, 0.0), 1.0);
        let m = TailModel::constant(0.0).unwrap();
        let p = spectral_pair_average(&m, &[0.0, 1.0, 5.0], 10, 3, 0).unwrap();
        for (i, t) in p.times.iter().enumerate() {
            assert!((p.laplace[i] - (-t).exp()).abs() < 1e-15);
            assert!((p.v0_mean[i] - (-t).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn monotonicity_checker_rejects_bad_series() {
        let t = [0.0, 1.0, 2.0, 3.0];
        assert!(check_complete_monotone(&t, &[1.0, 0.5, 0.25, 0.125], 1e-12).is_ok());
        assert!(check_complete_monotone(&t, &[1.0, 0.5, 0.6, 0.1], 1e-12).is_err());
        // log-concave: e^{-t²}
        let v: Vec<f64> = t.iter().map(|x| (-x * x).exp()).collect();
        assert!(check_complete_monotone(&t, &v, 1e-12).is_err());
        assert!(check_complete_monotone(&t, &[1.0, 0.1, 0.0, 0.0], 1e-12).is_ok());
        assert!(check_complete_monotone(&t, &[1.0, 0.0, 0.1, 0.0], 1e-12).is_err());
        assert!(check_complete_monotone(&t, &[0.0, 0.0, 0.0, 0.0], 1e-12).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let m = TailModel::exponential(5.0).unwrap();
        let s = disorder_average(&m, &[0.0, 0.5, 2.0], 12, 3, 2).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf, &[]).unwrap();
        let back = CorrelationSeries::read_csv(&buf[..]).unwrap();
        assert_eq!(back.times, s.times);
        assert_eq!(back.s_hat, s.s_hat);
        assert_eq!(back.stderr, s.stderr);
        let one = disorder_average(&m, &[0.0], 12, 1, 2).unwrap();
        let mut buf = Vec::new();
        one.write_csv(&mut buf, &[]).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().contains(",NA,"));
        assert!(CorrelationSeries::read_csv(&buf[..]).unwrap().stderr.is_none());
    }
}
