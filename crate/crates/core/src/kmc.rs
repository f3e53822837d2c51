//! Continuous-time Glauber dynamics of the open spin chain, simulated with a
//! rejection event loop. Used as an independent check of the one-spin
//! spectral pipeline.
//!
//! Spins live on the coupling window `[lo, hi]`; `ω_x` couples `x − 1` to `x`,
//! so `ω_lo` is unused (free boundary on both ends).

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;

use crate::disorder::CouplingField;
use crate::stats::{fmt17, mean_se};
use crate::streams::{open_unit, stream, Domain};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpinConfig {
    lo: i64,
    spins: Vec<i8>,
}

impl SpinConfig {
    pub fn new(lo: i64, spins: Vec<i8>) -> Result<Self> {
        if spins.is_empty() || spins.iter().any(|s| *s != 1 && *s != -1) {
            return Err(Error::InvalidArgument("spins must be a nonempty sequence of ±1".into()));
        }
        Ok(SpinConfig { lo, spins })
    }

    pub fn all_up(lo: i64, hi: i64) -> Self {
        SpinConfig { lo, spins: vec![1; (hi - lo + 1) as usize] }
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.spins.len() as i64 - 1
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn get(&self, x: i64) -> i8 {
        self.spins[(x - self.lo) as usize]
    }

    pub fn flip(&mut self, x: i64) {
        let i = (x - self.lo) as usize;
        self.spins[i] = -self.spins[i];
    }
}

/// `P(σ_x = σ_{x−1}) = 1/(1 + e^{−2ω_x})`.
pub fn agree_probability(omega: f64) -> f64 {
    1.0 / (1.0 + (-2.0 * omega).exp())
}

/// Exact sample from the free-boundary Gibbs measure on the field window:
/// `σ_lo` uniform, then a Markov chain to the right.
pub fn gibbs_sample<R: Rng + ?Sized>(field: &CouplingField, rng: &mut R) -> SpinConfig {
    let omegas = field.values();
    let mut spins = Vec::with_capacity(omegas.len());
    spins.push(if rng.random::<f64>() < 0.5 { 1 } else { -1 });
    for &w in &omegas[1..] {
        let prev = *spins.last().unwrap();
        spins.push(if rng.random::<f64>() < agree_probability(w) { prev } else { -prev });
    }
    SpinConfig { lo: field.lo(), spins }
}

/// `Δ_x = H(σ^{(x)}) − H(σ) = 2ω_xσ_{x−1}σ_x + 2ω_{x+1}σ_xσ_{x+1}`, with
/// bonds leaving the window dropped.
fn flip_energy(spins: &[i8], omegas: &[f64], i: usize) -> f64 {
    let s = spins[i] as f64;
    let mut field = 0.0;
    if i > 0 {
        field += omegas[i] * spins[i - 1] as f64;
    }
    if i + 1 < spins.len() {
        field += omegas[i + 1] * spins[i + 1] as f64;
    }
    2.0 * s * field
}

/// `1/(1 + e^{Δ})` without overflow.
fn logistic_rate(delta: f64) -> f64 {
    if delta > 0.0 {
        let e = (-delta).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + delta.exp())
    }
}

/// Flip rate `c(x, σ) = 1/(1 + e^{Δ_x})`, reversible with respect to `e^{−H}`.
pub fn glauber_rate(sigma: &SpinConfig, x: i64, field: &CouplingField) -> Result<f64> {
    if sigma.lo() != field.lo() || sigma.hi() != field.hi() {
        return Err(Error::Window("spin and coupling windows differ".into()));
    }
    if !field.contains(x) {
        return Err(Error::Window(format!("site {x} outside [{}, {}]", field.lo(), field.hi())));
    }
    let delta = flip_energy(&sigma.spins, field.values(), (x - field.lo()) as usize);
    Ok(logistic_rate(delta))
}

/// Center-site statistics over trajectories.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryStats {
    pub times: Vec<f64>,
    /// Estimates of `⟨σ_0(0)σ_0(t)⟩`.
    pub estimate: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Estimates of `⟨σ_0(t)⟩`, for the stationarity check.
    pub center_mean: Vec<f64>,
    pub center_stderr: Vec<f64>,
    pub n_traj: usize,
    pub batches: usize,
}

const MAX_BATCHES: usize = 100;

#[derive(Clone)]
struct Accum {
    product: Vec<f64>,
    center: Vec<f64>,
}

fn run_trajectory<R: Rng>(field: &CouplingField, times: &[f64], center: usize, rng: &mut R, acc: &mut Accum) {
    let omegas = field.values();
    let mut spins = gibbs_sample(field, rng).spins;
    let n = spins.len();
    let rate = n as f64;
    let s0 = spins[center] as f64;
    let mut t = 0.0;
    let mut next = 0;
    loop {
        let t_next = t - open_unit(rng).ln() / rate;
        while next < times.len() && times[next] < t_next {
            let s = spins[center] as f64;
            acc.product[next] += s0 * s;
            acc.center[next] += s;
            next += 1;
        }
        if next == times.len() {
            break;
        }
        t = t_next;
        let i = rng.random_range(0..n);
        if rng.random::<f64>() < logistic_rate(flip_energy(&spins, omegas, i)) {
            spins[i] = -spins[i];
        }
    }
}

/// Estimates `⟨σ_0(0)σ_0(t)⟩` under stationary Glauber dynamics on the field
/// window. Trajectory `i` draws from the stream `(seed, i)`; standard errors
/// come from up to 100 contiguous batches of trajectories.
pub fn simulate_autocorr(field: &CouplingField, times: &[f64], n_traj: usize, seed: u64) -> Result<TrajectoryStats> {
    if !field.contains(0) {
        return Err(Error::Window(format!(
            "center site 0 outside [{}, {}]",
            field.lo(),
            field.hi()
        )));
    }
    if times.first() != Some(&0.0)
        || times.windows(2).any(|w| !(w[1] >= w[0]))
        || times.iter().any(|t| !t.is_finite())
    {
        return Err(Error::InvalidArgument("time grid must be finite, ascending and start at 0".into()));
    }
    if n_traj < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 trajectories, got {n_traj}")));
    }
    let center = (-field.lo()) as usize;
    let batches = n_traj.min(MAX_BATCHES);
    let per_batch: Vec<(Accum, usize)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let start = b * n_traj / batches;
            let end = (b + 1) * n_traj / batches;
            let mut acc = Accum { product: vec![0.0; times.len()], center: vec![0.0; times.len()] };
            for i in start..end {
                let mut rng = stream(seed, Domain::Kmc, i as u64);
                run_trajectory(field, times, center, &mut rng, &mut acc);
            }
            (acc, end - start)
        })
        .collect();

    let mut out = TrajectoryStats {
        times: times.to_vec(),
        estimate: vec![],
        stderr: vec![],
        center_mean: vec![],
        center_stderr: vec![],
        n_traj,
        batches,
    };
    let total = n_traj as f64;
    for g in 0..times.len() {
        let prod: Vec<f64> = per_batch.iter().map(|(a, m)| a.product[g] / *m as f64).collect();
        let cen: Vec<f64> = per_batch.iter().map(|(a, m)| a.center[g] / *m as f64).collect();
        let se = |col: &[f64]| mean_se(col).1.unwrap_or(f64::NAN);
        out.estimate.push(per_batch.iter().map(|(a, _)| a.product[g]).sum::<f64>() / total);
        out.stderr.push(se(&prod));
        out.center_mean.push(per_batch.iter().map(|(a, _)| a.center[g]).sum::<f64>() / total);
        out.center_stderr.push(se(&cen));
    }
    Ok(out)
}

impl TrajectoryStats {
    /// CSV `t,kmc_estimate,stderr,n_traj`.
    pub fn write_csv<W: Write>(&self, mut out: W, preamble: &[String]) -> std::io::Result<()> {
        for line in preamble {
            writeln!(out, "# {line}")?;
        }
        writeln!(out, "t,kmc_estimate,stderr,n_traj")?;
        for i in 0..self.times.len() {
            writeln!(
                out,
                "{},{},{},{}",
                fmt17(self.times[i]),
                fmt17(self.estimate[i]),
                fmt17(self.stderr[i]),
                self.n_traj
            )?;
        }
        Ok(())
    }
}
