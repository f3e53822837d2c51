//! Spectral numerics and Monte Carlo for Glauber dynamics of the
//! one-dimensional Ising chain with i.i.d. random ferromagnetic couplings.
//!
//! The one-spin sector of the generator is a random Jacobi matrix. This crate
//! builds it from sampled couplings, counts its eigenvalues near the upper
//! spectral edge, estimates the integrated density of states, computes the
//! disorder-averaged spin autocorrelation `S(t)` from the spectral resolution,
//! cross-checks it with a kinetic Monte Carlo simulation of the full chain,
//! and evaluates the Legendre-transform decay envelopes for `S(t)`.
//!
//! Module map:
//!
//! - [`disorder`]: coupling distributions, sampling, derived per-site fields
//! - [`onespin`]: the truncated one-spin generator and the weights of `σ₀`
//! - [`spectra`]: eigenvalue counting, eigensolver, IDS estimation, site classes
//! - [`autocorr`]: spectral autocorrelations and disorder averages
//! - [`kmc`]: continuous-time Glauber simulator used as an oracle
//! - [`asymptotics`]: rate functions, Legendre transforms, decay envelopes
//! - [`harness`]: configuration, experiment runs, reports

pub mod asymptotics;
pub mod autocorr;
pub mod disorder;
mod error;
pub mod harness;
pub mod kmc;
pub mod onespin;
pub mod spectra;
pub mod stats;
pub mod streams;

pub use error::{Error, Result};

/// Version string embedded in every output file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
