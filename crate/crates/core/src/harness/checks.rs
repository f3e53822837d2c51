//! Invariant checks shared by `glauber validate` and the acceptance suite.
//! Each check takes its sample sizes as arguments.

use rand::Rng;
use serde::Serialize;

use crate::asymptotics::{envelope, legendre_min, RateFunction, Which};
use crate::autocorr::{disorder_average, single_autocorr};
use crate::disorder::{derive, sample_couplings, sample_realization, CouplingField, DerivedField, TailModel};
use crate::kmc::{glauber_rate, simulate_autocorr, SpinConfig};
use crate::onespin::{build_l1, JacobiMatrix};
use crate::spectra::{
    b0_bound, b0_submatrix_top, classify_sites, count_above, eigensolve, ids_estimate, phase_count,
    regular_bond_count,
};
use crate::streams::{stream, Domain};
use crate::Result;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        CheckOutcome { name: name.to_string(), passed, detail }
    }

    fn error(name: &str, e: impl std::fmt::Display) -> Self {
        CheckOutcome::new(name, false, format!("error: {e}"))
    }
}

fn exp5() -> TailModel {
    TailModel::Exponential { k: 5.0 }
}

/// Random instance `i` of the counting corpus: Exponential(5) couplings,
/// window size uniform in `1..=max_n`.
pub fn corpus_instance(seed: u64, i: u64, max_n: usize) -> Result<(DerivedField, JacobiMatrix)> {
    let mut rng = stream(seed, Domain::Validation, i);
    let n = rng.random_range(1..=max_n) as i64;
    let d = derive(&sample_couplings(&exp5(), -1, n, &mut rng)?);
    let j = build_l1(&d, 0, n - 1)?;
    Ok((d, j))
}

/// Probe `p` of instance `i`: even probes uniform on `(−2.2, 0)`, odd probes
/// log-uniform in `|λ| ∈ [10⁻⁸, 1]` to reach the spectral edge.
pub fn corpus_probes(seed: u64, i: u64, probes: usize) -> Vec<f64> {
    let mut rng = stream(seed ^ 0x5bd1_e995, Domain::Validation, i);
    (0..probes)
        .map(|p| {
            if p % 2 == 0 {
                -2.2 * (1.0 - rng.random::<f64>())
            } else {
                -(10f64.powf(-8.0 * rng.random::<f64>()))
            }
        })
        .collect()
}

/// `count_above` and `phase_count` against the eigensolver's count,
/// skipping probes within `1e−12` of an eigenvalue.
pub fn counting_exactness(instances: usize, probes: usize, max_n: usize, seed: u64) -> CheckOutcome {
    let name = "counting exactness";
    let mut compared = 0usize;
    let mut skipped = 0usize;
    let mut failures = vec![];
    for i in 0..instances as u64 {
        let (_, j) = match corpus_instance(seed, i, max_n) {
            Ok(x) => x,
            Err(e) => return CheckOutcome::error(name, e),
        };
        let eig = eigensolve(&j, false);
        for lambda in corpus_probes(seed, i, probes) {
            if eig.eigenvalues.iter().any(|e| (e - lambda).abs() < 1e-12) {
                skipped += 1;
                continue;
            }
            compared += 1;
            let want = eig.count_above(lambda);
            let (sturm, phase) = (count_above(&j, lambda), phase_count(&j, lambda));
            if sturm != want || phase != sturm {
                failures.push(format!("instance {i} λ={lambda}: eig {want}, sturm {sturm}, phase {phase}"));
            }
        }
    }
    CheckOutcome::new(
        name,
        failures.is_empty(),
        format!(
            "{compared} probes compared, {skipped} skipped, {} mismatches{}",
            failures.len(),
            failures.first().map_or(String::new(), |f| format!("; first: {f}"))
        ),
    )
}

/// All eigenvalues in `[−2 − 1e−10, 1e−10]` and the top one negative.
pub fn spectrum_box(instances: usize, max_n: usize, seed: u64) -> CheckOutcome {
    let name = "spectrum box";
    let (mut lowest, mut highest) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..instances as u64 {
        let (_, j) = match corpus_instance(seed, i, max_n) {
            Ok(x) => x,
            Err(e) => return CheckOutcome::error(name, e),
        };
        let eig = eigensolve(&j, false);
        lowest = lowest.min(eig.eigenvalues[0]);
        highest = highest.max(*eig.eigenvalues.last().unwrap());
    }
    CheckOutcome::new(
        name,
        lowest >= -2.0 - 1e-10 && highest <= 1e-10 && highest < 0.0,
        format!("eigenvalues within [{lowest}, {highest}] over {instances} instances"),
    )
}

/// Constant couplings: eigenvalues `−1 + tanh(2ω) cos(jπ/(n+1))`.
pub fn homogeneous_dispersion(omegas: &[f64], n: usize, tol: f64) -> CheckOutcome {
    let name = "homogeneous dispersion";
    let mut worst: f64 = 0.0;
    for &w in omegas {
        let f = match CouplingField::homogeneous(-1, n as i64, w) {
            Ok(f) => f,
            Err(e) => return CheckOutcome::error(name, e),
        };
        let j = match build_l1(&derive(&f), 0, n as i64 - 1) {
            Ok(j) => j,
            Err(e) => return CheckOutcome::error(name, e),
        };
        let got = eigensolve(&j, false).eigenvalues;
        let mut want: Vec<f64> = (1..=n)
            .map(|m| -1.0 + (2.0 * w).tanh() * (m as f64 * std::f64::consts::PI / (n + 1) as f64).cos())
            .collect();
        want.sort_by(f64::total_cmp);
        for (a, b) in got.iter().zip(&want) {
            worst = worst.max((a - b).abs());
        }
    }
    CheckOutcome::new(name, worst <= tol, format!("max deviation {worst:e} (tolerance {tol:e}), ω ∈ {omegas:?}, n = {n}"))
}

/// `count_above ≥` greedy regular-bond count on the counting corpus.
pub fn regular_bond_bound(instances: usize, probes: usize, max_n: usize, seed: u64) -> CheckOutcome {
    let name = "regular-bond lower bound";
    let mut failures = 0usize;
    let mut nonzero = 0usize;
    let mut total = 0usize;
    for i in 0..instances as u64 {
        let (d, j) = match corpus_instance(seed, i, max_n) {
            Ok(x) => x,
            Err(e) => return CheckOutcome::error(name, e),
        };
        for lambda in corpus_probes(seed, i, probes) {
            let bonds = match regular_bond_count(&d, lambda, j.lo(), j.hi()) {
                Ok(b) => b,
                Err(e) => return CheckOutcome::error(name, e),
            };
            total += 1;
            nonzero += (bonds > 0) as usize;
            failures += (count_above(&j, lambda) < bonds) as usize;
        }
    }
    CheckOutcome::new(
        name,
        failures == 0,
        format!("{failures} violations in {total} cases; {nonzero} cases with at least one regular bond"),
    )
}

/// Weak-site submatrix edge `≤ −2|λ|/(1+|λ|) + 1e−10` and
/// `count_above ≤ n − #B⁰`.
pub fn weak_site_bound(realizations: usize, r: usize, lambdas: &[f64], seed: u64) -> CheckOutcome {
    let name = "weak-site spectral edge";
    let ri = r as i64;
    let mut failures = vec![];
    let mut worst_gap = f64::NEG_INFINITY;
    let mut empty = 0usize;
    for m in 0..realizations as u64 {
        let field = match sample_realization(&exp5(), -ri - 1, ri + 1, seed, m) {
            Ok(f) => f,
            Err(e) => return CheckOutcome::error(name, e),
        };
        let j = match build_l1(&derive(&field), -ri, ri) {
            Ok(j) => j,
            Err(e) => return CheckOutcome::error(name, e),
        };
        for &lambda in lambdas {
            let cls = match classify_sites(&field, lambda) {
                Ok(c) => c,
                Err(e) => return CheckOutcome::error(name, e),
            };
            let b0 = cls.b0_within(-ri, ri).count();
            match b0_submatrix_top(&j, &cls) {
                Some(top) => {
                    worst_gap = worst_gap.max(top - b0_bound(lambda));
                    if top > b0_bound(lambda) + 1e-10 {
                        failures.push(format!("realization {m} λ={lambda}: top {top}"));
                    }
                }
                None => empty += 1,
            }
            let k = count_above(&j, lambda);
            if k > j.dim() - b0 {
                failures.push(format!("realization {m} λ={lambda}: {k} eigenvalues above λ, {b0} weak sites"));
            }
        }
    }
    CheckOutcome::new(
        name,
        failures.is_empty(),
        format!(
            "max(top − bound) = {worst_gap:e}; {empty} cases without weak sites; {} failures{}",
            failures.len(),
            failures.first().map_or(String::new(), |f| format!("; first: {f}"))
        ),
    )
}

/// `Ŝ(0) + mean deficit = 1` within `1e−10`.
pub fn mass_bookkeeping(r: usize, samples: usize, seed: u64) -> CheckOutcome {
    let name = "mass bookkeeping";
    match disorder_average(&exp5(), &[0.0, 1.0], r, samples, seed) {
        Ok(s) => {
            let err = (s.s_hat[0] + s.mean_deficit - 1.0).abs();
            CheckOutcome::new(
                name,
                err <= 1e-10,
                format!("|Ŝ(0) + deficit − 1| = {err:e}, mean deficit {:e}", s.mean_deficit),
            )
        }
        Err(e) => CheckOutcome::error(name, e),
    }
}

/// `ω ≡ 0`: spectral `e^{−t}` within `1e−12` and KMC within 3 SE at
/// `t ∈ {0.5, 1, 2}`.
pub fn decoupled_pipeline(kmc_sites: usize, trajectories: usize, seed: u64) -> CheckOutcome {
    let name = "decoupled pipeline";
    let times = [0.0, 0.5, 1.0, 2.0];
    let model = TailModel::Constant { value: 0.0 };
    let spectral = match disorder_average(&model, &times, 20, 3, seed) {
        Ok(s) => s,
        Err(e) => return CheckOutcome::error(name, e),
    };
    let spec_err = times
        .iter()
        .zip(&spectral.s_hat)
        .map(|(t, s)| (s - (-t).exp()).abs())
        .fold(0.0, f64::max);
    let half = (kmc_sites / 2) as i64;
    let field = match CouplingField::homogeneous(-half, half, 0.0) {
        Ok(f) => f,
        Err(e) => return CheckOutcome::error(name, e),
    };
    let st = match simulate_autocorr(&field, &times, trajectories, seed) {
        Ok(s) => s,
        Err(e) => return CheckOutcome::error(name, e),
    };
    let z: Vec<f64> = (1..times.len())
        .map(|i| (st.estimate[i] - (-times[i]).exp()).abs() / st.stderr[i])
        .collect();
    let kmc_ok = st.estimate[0] == 1.0 && z.iter().all(|z| *z <= 3.0);
    CheckOutcome::new(
        name,
        spec_err <= 1e-12 && kmc_ok,
        format!("spectral max error {spec_err:e}; KMC |z| at t=0.5,1,2: {z:.2?}"),
    )
}

/// `c(x,σ)/c(x,σ^{(x)}) = e^{−Δ}` to `1e−14` relative for `ω ≤ 15`, with
/// `Δ` from the local Hamiltonian.
pub fn detailed_balance(cases: usize, seed: u64) -> CheckOutcome {
    let name = "detailed balance";
    let mut rng = stream(seed, Domain::Validation, u64::MAX);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let omegas: Vec<f64> = (0..7).map(|_| 15.0 * rng.random::<f64>()).collect();
        let field = CouplingField::new(0, omegas.clone()).expect("valid couplings");
        let spins: Vec<i8> = (0..7).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        let x = rng.random_range(0..7usize);
        let local = |s: &[i8]| -> f64 {
            let mut h = 0.0;
            if x > 0 {
                h -= omegas[x] * (s[x - 1] * s[x]) as f64;
            }
            if x + 1 < s.len() {
                h -= omegas[x + 1] * (s[x] * s[x + 1]) as f64;
            }
            h
        };
        let mut flipped = spins.clone();
        flipped[x] = -flipped[x];
        let delta = local(&flipped) - local(&spins);
        let a = SpinConfig::new(0, spins).expect("valid spins");
        let b = SpinConfig::new(0, flipped).expect("valid spins");
        let ratio = glauber_rate(&a, x as i64, &field).unwrap() / glauber_rate(&b, x as i64, &field).unwrap();
        let want = (-delta).exp();
        worst = worst.max((ratio - want).abs() / want);
    }
    CheckOutcome::new(name, worst <= 1e-14, format!("max relative deviation {worst:e} over {cases} cases"))
}

/// Spectral autocorrelation of one free-boundary window against KMC on the
/// same window, within 4 SE at every positive time.
pub fn kmc_agreement(
    model: &TailModel,
    sites: usize,
    times: &[f64],
    trajectories: usize,
    seed: u64,
    realization: u64,
) -> CheckOutcome {
    let name = "spectral-KMC agreement";
    match super::kmc_comparison(model, sites, times, trajectories, seed, realization) {
        Ok(c) => {
            let worst = c.z.iter().skip(1).copied().fold(0.0, f64::max);
            CheckOutcome::new(
                name,
                c.z.iter().all(|z| *z <= 4.0),
                format!(
                    "{sites} sites, {trajectories} trajectories, max |z| = {worst:.3}; spectral {:?}; kmc {:?}",
                    c.spectral, c.stats.estimate
                ),
            )
        }
        Err(e) => CheckOutcome::error(name, e),
    }
}

/// Closed-form minimizers `k/(4t)`, `k/t` on `[10, 10⁴]`, envelope slopes
/// `−k/8`, `−2k` within 2% for `t ≥ 100`, and stationarity for Stretched.
pub fn legendre_closed_forms(ks: &[f64], alphas: &[f64], c: f64) -> CheckOutcome {
    let name = "Legendre closed forms";
    let grid = |a: f64, b: f64, n: usize| -> Vec<f64> {
        (0..n).map(|i| a * (b / a).powf(i as f64 / (n - 1) as f64)).collect()
    };
    let mut worst_mu: f64 = 0.0;
    let mut worst_slope: f64 = 0.0;
    let mut worst_residual: f64 = 0.0;
    let mut problems = vec![];
    for &k in ks {
        let model = TailModel::Exponential { k };
        let (r1, r2) = match (RateFunction::new(Which::G1, model, c), RateFunction::new(Which::G2, model, c)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => return CheckOutcome::error(name, e),
        };
        for t in grid(10.0, 1e4, 31) {
            for (rf, want) in [(&r1, k / (4.0 * t)), (&r2, k / t)] {
                match legendre_min(rf, t) {
                    Ok(p) if !p.boundary => worst_mu = worst_mu.max((p.mu / want - 1.0).abs()),
                    Ok(_) => problems.push(format!("boundary minimizer at k={k} t={t}")),
                    Err(e) => return CheckOutcome::error(name, e),
                }
            }
        }
        let times = grid(100.0, 1e5, 31);
        let env = match envelope(&model, &times, c, 1.0, 1.0) {
            Ok(e) => e,
            Err(e) => return CheckOutcome::error(name, e),
        };
        // decade-apart pairs
        for i in 0..times.len() - 10 {
            let (u0, l0) = env.ln_bounds(i);
            let (u1, l1) = env.ln_bounds(i + 10);
            let dec = (times[i + 10] / times[i]).ln();
            match (u0, u1, l0, l1) {
                (Some(u0), Some(u1), Some(l0), Some(l1)) => {
                    worst_slope = worst_slope
                        .max(((u1 - u0) / dec / (-k / 8.0) - 1.0).abs())
                        .max(((l1 - l0) / dec / (-2.0 * k) - 1.0).abs());
                }
                _ => problems.push(format!("envelope unavailable at k={k} t={}", times[i])),
            }
        }
    }
    for &alpha in alphas {
        let model = TailModel::Stretched { alpha };
        for which in [Which::G1, Which::G2] {
            let rf = match RateFunction::new(which, model, c) {
                Ok(rf) => rf,
                Err(e) => return CheckOutcome::error(name, e),
            };
            for t in grid(10.0, 1e6, 26) {
                match legendre_min(&rf, t) {
                    Ok(p) if !p.boundary => worst_residual = worst_residual.max(p.stationarity_residual(&rf) / t),
                    Ok(_) => problems.push(format!("boundary minimizer for α={alpha} {which} t={t}")),
                    Err(e) => return CheckOutcome::error(name, e),
                }
            }
        }
    }
    CheckOutcome::new(
        name,
        worst_mu <= 1e-6 && worst_slope <= 0.02 && worst_residual <= 1e-6 && problems.is_empty(),
        format!(
            "max μ relative error {worst_mu:e}; max envelope slope deviation {:.4}%; max residual/t {worst_residual:e}{}",
            100.0 * worst_slope,
            problems.first().map_or(String::new(), |p| format!("; {p}"))
        ),
    )
}

/// IDS smoke cases: zero above the bounded band edge, one far below the
/// spectrum, bit-identical reruns under different worker counts.
pub fn ids_smoke(seed: u64) -> CheckOutcome {
    let name = "IDS smoke";
    let run = || -> Result<_> {
        let bounded = ids_estimate(&TailModel::UniformBounded { gamma_max: 0.5 }, &[-0.2, -0.1, -0.01], 50, 10, seed)?;
        let below = ids_estimate(&exp5(), &[-3.0], 20, 5, seed)?;
        let grid = ids_estimate(&exp5(), &[-0.3, -0.1, -0.03], 200, 16, seed)?;
        Ok((bounded, below, grid))
    };
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("thread pool");
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().expect("thread pool");
    match (one.install(run), four.install(run)) {
        (Ok(a), Ok(b)) => {
            let zero = a.0.n_hat.iter().all(|n| *n == 0.0);
            let full = a.1.n_hat == vec![1.0];
            let same = a == b;
            CheckOutcome::new(
                name,
                zero && full && same,
                format!("bounded above edge zero: {zero}; λ=−3 gives 1: {full}; 1 vs 4 workers identical: {same}"),
            )
        }
        (Err(e), _) | (_, Err(e)) => CheckOutcome::error(name, e),
    }
}

/// Single-realization series sanity: value(0) equals the weight mass and
/// the series decreases.
pub fn single_series(seed: u64) -> CheckOutcome {
    let name = "single-realization series";
    let run = || -> Result<(f64, bool)> {
        let mut worst: f64 = 0.0;
        let mut decreasing = true;
        for m in 0..20 {
            let f = sample_realization(&exp5(), -31, 31, seed, m)?;
            let s = single_autocorr(&derive(&f), -30, 30, &[0.0, 1.0, 10.0, 100.0])?;
            worst = worst.max((s.values[0] - s.mass).abs());
            decreasing &= s.values.windows(2).all(|w| w[1] <= w[0]);
        }
        Ok((worst, decreasing))
    };
    match run() {
        Ok((worst, decreasing)) => CheckOutcome::new(
            name,
            worst <= 1e-12 && decreasing,
            format!("max |value(0) − mass| = {worst:e}; decreasing: {decreasing}"),
        ),
        Err(e) => CheckOutcome::error(name, e),
    }
}
