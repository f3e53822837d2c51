use rayon::prelude::*;

use crate::disorder::{derive, sample_couplings, DerivedField, TailModel};
use crate::streams::{stream, Domain};
use crate::{Error, Result};

/// Maximum number of pairwise disjoint bonds among `regular`, where
/// `regular[i]` flags bond `{i, i+1}`. Greedy left to right is optimal for
/// unit intervals.
fn greedy_disjoint(regular: impl Iterator<Item = bool>) -> usize {
    let mut count = 0;
    let mut blocked = false;
    for is_regular in regular {
        if blocked {
            blocked = false;
            continue;
        }
        if is_regular {
            count += 1;
            blocked = true;
        }
    }
    count
}

/// Disjoint regular bonds `{x, x+1}` (`1 + C_x − C_{x+1} < |λ|`) inside
/// `[lo, hi]`.
pub fn regular_bond_count(derived: &DerivedField, lambda: f64, lo: i64, hi: i64) -> Result<usize> {
    if !(derived.has_c(lo) && derived.has_c(hi)) {
        return Err(Error::Window(format!(
            "regular bonds on [{lo}, {hi}] need couplings on [{}, {hi}], have [{}, {}]",
            lo - 1,
            derived.lo(),
            derived.hi()
        )));
    }
    let mu = lambda.abs();
    Ok(greedy_disjoint(
        (lo..hi).map(|x| derived.c(x) + derived.one_minus_c(x + 1) < mu),
    ))
}

/// Same count from raw bond variables `c[i] = C_{lo+i}`.
pub fn regular_bond_count_c(c: &[f64], lambda: f64) -> usize {
    let mu = lambda.abs();
    greedy_disjoint(c.windows(2).map(|w| 1.0 + w[0] - w[1] < mu))
}

/// Empirical frequency of a regular bond `{0, 1}` against the squared-tail
/// lower envelope `p̂₀·P(ω > ½ ln(1/(c|λ|)))²`.
#[derive(Clone, Debug, PartialEq)]
pub struct RegularBondFrequency {
    pub lambdas: Vec<f64>,
    pub frequency: Vec<f64>,
    pub squared_tail: Vec<f64>,
    pub c: f64,
    pub samples: usize,
    /// `p̂₀` fitted on the larger-`|λ|` half of the grid, capped below 1.
    pub p0: f64,
    /// Grid indices used for the fit.
    pub calibration: Vec<usize>,
}

impl RegularBondFrequency {
    /// Whether the envelope at grid point `i` predicts at least
    /// [`MIN_EXPECTED_HITS`] hits, so that a shortfall is observable.
    pub fn resolvable(&self, i: usize) -> bool {
        self.p0 * self.squared_tail[i] * self.samples as f64 >= MIN_EXPECTED_HITS
    }

    /// Held-out, resolvable grid points where the envelope fails.
    pub fn violations(&self) -> Vec<usize> {
        (0..self.lambdas.len())
            .filter(|i| !self.calibration.contains(i) && self.resolvable(*i))
            .filter(|&i| self.frequency[i] < self.p0 * self.squared_tail[i])
            .collect()
    }
}

pub const MIN_EXPECTED_HITS: f64 = 10.0;

const BATCH: usize = 10_000;

/// Estimates `P(1 + C₀ − C₁ < |λ|)` from independent coupling triples
/// `(ω_{−1}, ω₀, ω₁)` for every `λ` in the grid.
pub fn regular_bond_frequency(
    model: &TailModel,
    lambdas: &[f64],
    c: f64,
    samples: usize,
    seed: u64,
) -> Result<RegularBondFrequency> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::InvalidArgument(format!("c must lie in (0, 1), got {c}")));
    }
    if lambdas.len() < 2 || samples == 0 {
        return Err(Error::InvalidArgument("need at least two λ values and one sample".into()));
    }
    let batches = samples.div_ceil(BATCH);
    let hits: Vec<Vec<u64>> = (0..batches)
        .into_par_iter()
        .map(|b| -> Result<Vec<u64>> {
            let mut rng = stream(seed, Domain::RegularBonds, b as u64);
            let mut h = vec![0u64; lambdas.len()];
            let n = BATCH.min(samples - b * BATCH);
            for _ in 0..n {
                let d = derive(&sample_couplings(model, -1, 1, &mut rng)?);
                let gap = d.c(0) + d.one_minus_c(1);
                for (slot, l) in h.iter_mut().zip(lambdas) {
                    *slot += (gap < l.abs()) as u64;
                }
            }
            Ok(h)
        })
        .collect::<Result<_>>()?;
    let frequency: Vec<f64> = (0..lambdas.len())
        .map(|i| hits.iter().map(|h| h[i]).sum::<u64>() as f64 / samples as f64)
        .collect();
    let squared_tail: Vec<f64> = lambdas
        .iter()
        .map(|l| model.tail_probability(0.5 * (1.0 / (c * l.abs())).ln()).map(|p| p * p))
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..lambdas.len()).collect();
    order.sort_by(|&a, &b| lambdas[b].abs().total_cmp(&lambdas[a].abs()));
    let calibration: Vec<usize> = order[..lambdas.len() / 2].to_vec();
    let p0 = calibration
        .iter()
        .filter(|&&i| squared_tail[i] > 0.0)
        .map(|&i| frequency[i] / squared_tail[i])
        .fold(f64::INFINITY, f64::min)
        .min(1.0 - 1e-12);
    Ok(RegularBondFrequency {
        lambdas: lambdas.to_vec(),
        frequency,
        squared_tail,
        c,
        samples,
        p0,
        calibration,
    })
}
