use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::disorder::{derive, sample_realization, TailModel};
use crate::onespin::build_l1;
use crate::spectra::count_above;
use crate::stats::{fmt17, mean_se};
use crate::{Error, Result};

/// Monte Carlo estimate of the integrated density of states `N(L₁, λ)` on a
/// grid of negative `λ`.
#[derive(Clone, Debug, PartialEq)]
pub struct IdsCurve {
    /// Negative, ascending in `|λ|`.
    pub lambdas: Vec<f64>,
    pub n_hat: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Eigenvalues above `λ` summed over all realizations.
    pub total_counts: Vec<u64>,
    pub r: usize,
    pub samples: usize,
    pub model: Option<TailModel>,
    pub seed: Option<u64>,
}

/// `points` values of `λ = −|λ|` log-spaced between `−min_abs` and `−max_abs`.
pub fn log_lambda_grid(min_abs: f64, max_abs: f64, points: usize) -> Result<Vec<f64>> {
    if !(min_abs > 0.0 && max_abs >= min_abs && points >= 1) || (points == 1 && max_abs != min_abs) {
        return Err(Error::InvalidArgument(format!(
            "log grid needs 0 < min <= max and points >= 1 (min={min_abs}, max={max_abs}, points={points})"
        )));
    }
    if points == 1 {
        return Ok(vec![-min_abs]);
    }
    let (a, b) = (min_abs.ln(), max_abs.ln());
    Ok((0..points)
        .map(|i| -(a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect())
}

/// `N̂(λ) = ⟨k(L₁^{(r)}, λ)⟩ / (2r+1)` over `samples` realizations.
///
/// Realization `m` uses couplings on `[−r−1, r+1]` drawn from the stream
/// `(seed, m)`. Standard errors are computed from the per-realization counts.
pub fn ids_estimate(
    model: &TailModel,
    lambdas: &[f64],
    r: usize,
    samples: usize,
    seed: u64,
) -> Result<IdsCurve> {
    model.validate()?;
    if samples < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 realizations, got {samples}")));
    }
    if r < 10 {
        return Err(Error::InvalidArgument(format!("window half-width r must be >= 10, got {r}")));
    }
    if let Some(l) = lambdas.iter().find(|l| !(l.is_finite() && **l < 0.0)) {
        return Err(Error::Domain(format!("λ must be finite and negative, got {l}")));
    }
    let ri = r as i64;
    let counts: Vec<Vec<usize>> = (0..samples as u64)
        .into_par_iter()
        .map(|m| -> Result<Vec<usize>> {
            let field = sample_realization(model, -ri - 1, ri + 1, seed, m)?;
            let j = build_l1(&derive(&field), -ri, ri)?;
            Ok(lambdas.iter().map(|&l| count_above(&j, l)).collect())
        })
        .collect::<Result<_>>()?;
    let sites = (2 * r + 1) as f64;
    let mut n_hat = Vec::with_capacity(lambdas.len());
    let mut stderr = Vec::with_capacity(lambdas.len());
    let mut total_counts = Vec::with_capacity(lambdas.len());
    for g in 0..lambdas.len() {
        let per: Vec<f64> = counts.iter().map(|c| c[g] as f64 / sites).collect();
        let (mean, se) = mean_se(&per);
        n_hat.push(mean);
        stderr.push(se.unwrap_or(f64::NAN));
        total_counts.push(counts.iter().map(|c| c[g] as u64).sum());
    }
    Ok(IdsCurve {
        lambdas: lambdas.to_vec(),
        n_hat,
        stderr,
        total_counts,
        r,
        samples,
        model: Some(*model),
        seed: Some(seed),
    })
}

impl IdsCurve {
    /// `N̂` must not increase as `λ` moves toward 0, up to `k` combined
    /// standard errors. Returns the first offending grid index.
    pub fn check_monotone(&self, k: f64) -> Result<(), usize> {
        let mut order: Vec<usize> = (0..self.lambdas.len()).collect();
        order.sort_by(|&a, &b| self.lambdas[a].total_cmp(&self.lambdas[b]));
        for w in order.windows(2) {
            let (lower, upper) = (w[0], w[1]);
            let slack = k * (self.stderr[lower].powi(2) + self.stderr[upper].powi(2)).sqrt();
            if self.n_hat[upper] > self.n_hat[lower] + slack {
                return Err(upper);
            }
        }
        Ok(())
    }

    /// CSV `lambda,n_hat,stderr,r,samples`, preceded by `#` comment lines.
    pub fn write_csv<W: Write>(&self, mut out: W, preamble: &[String]) -> std::io::Result<()> {
        for line in preamble {
            writeln!(out, "# {line}")?;
        }
        writeln!(out, "lambda,n_hat,stderr,r,samples")?;
        for i in 0..self.lambdas.len() {
            writeln!(
                out,
                "{},{},{},{},{}",
                fmt17(self.lambdas[i]),
                fmt17(self.n_hat[i]),
                fmt17(self.stderr[i]),
                self.r,
                self.samples
            )?;
        }
        Ok(())
    }

    /// Reads the CSV written by [`write_csv`](Self::write_csv). Total counts
    /// are reconstructed from `n_hat·samples·(2r+1)`.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let bad = |m: String| Error::InvalidArgument(format!("IDS CSV: {m}"));
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
        let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["lambda", "n_hat", "stderr", "r", "samples"] {
            return Err(bad(format!("unexpected header {headers:?}")));
        }
        let mut curve = IdsCurve {
            lambdas: vec![],
            n_hat: vec![],
            stderr: vec![],
            total_counts: vec![],
            r: 0,
            samples: 0,
            model: None,
            seed: None,
        };
        for rec in rdr.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let f = |i: usize| -> Result<f64> {
                rec[i].parse::<f64>().map_err(|e| bad(format!("{e} in {:?}", &rec[i])))
            };
            let u = |i: usize| -> Result<usize> {
                rec[i].parse::<usize>().map_err(|e| bad(format!("{e} in {:?}", &rec[i])))
            };
            curve.lambdas.push(f(0)?);
            curve.n_hat.push(f(1)?);
            curve.stderr.push(f(2)?);
            curve.r = u(3)?;
            curve.samples = u(4)?;
        }
        let sites = (2 * curve.r + 1) as f64 * curve.samples as f64;
        curve.total_counts = curve.n_hat.iter().map(|n| (n * sites).round() as u64).collect();
        Ok(curve)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shape() {
        let g = log_lambda_grid(0.03, 0.3, 5).unwrap();
        assert_eq!(g.len(), 5);
        assert!((g[0] + 0.03).abs() < 1e-15 && (g[4] + 0.3).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[1] < w[0]));
        assert!(log_lambda_grid(0.0, 0.3, 5).is_err());
        assert!(log_lambda_grid(0.3, 0.03, 5).is_err());
    }

    #[test]
    fn bounded_model_vanishes_above_band_edge() {
        // all eigenvalues lie below −1 + tanh(2·0.5) ≈ −0.238
        let m = TailModel::uniform_bounded(0.5).unwrap();
        let curve = ids_estimate(&m, &[-0.2, -0.1, -0.01], 50, 20, 3).unwrap();
        assert!(curve.n_hat.iter().all(|&n| n == 0.0));
    }

    #[test]
    fn far_below_spectrum_counts_everything() {
        let m = TailModel::exponential(5.0).unwrap();
        let curve = ids_estimate(&m, &[-3.0], 20, 5, 1).unwrap();
        assert_eq!(curve.n_hat, vec![1.0]);
        assert_eq!(curve.stderr, vec![0.0]);
        assert_eq!(curve.total_counts, vec![41 * 5]);
    }

    #[test]
    fn monotone_and_bounded() {
        let m = TailModel::exponential(5.0).unwrap();
        let grid = log_lambda_grid(0.02, 1.5, 12).unwrap();
        let curve = ids_estimate(&m, &grid, 100, 30, 8).unwrap();
        assert!(curve.check_monotone(2.0).is_ok());
        assert!(curve.n_hat.iter().all(|n| (0.0..=1.0).contains(n)));
    }

    #[test]
    fn preconditions() {
        let m = TailModel::exponential(5.0).unwrap();
        assert!(ids_estimate(&m, &[-0.1], 100, 1, 0).is_err());
        assert!(ids_estimate(&m, &[-0.1], 9, 10, 0).is_err());
        assert!(ids_estimate(&m, &[0.1], 10, 10, 0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let m = TailModel::exponential(5.0).unwrap();
        let curve = ids_estimate(&m, &[-0.3, -0.1], 10, 4, 2).unwrap();
        let mut buf = Vec::new();
        curve.write_csv(&mut buf, &["config: {}".into()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().nth(1).unwrap() == "lambda,n_hat,stderr,r,samples");
        let back = IdsCurve::read_csv(&buf[..]).unwrap();
        assert_eq!(back.lambdas, curve.lambdas);
        assert_eq!(back.n_hat, curve.n_hat);
        assert_eq!(back.stderr, curve.stderr);
        assert_eq!(back.total_counts, curve.total_counts);
        assert_eq!((back.r, back.samples), (10, 4));
    }
}
