//! Simulation and verification toolkit for the coupling between a uniform
//! random integer on `[1, x]` and a Poisson-Dirichlet process.
//!
//! The crate provides:
//!
//! - an exact integer-arithmetic substrate: sieve-backed prime tables,
//!   Chebyshev's theta function, the prime-power ladder and its step
//!   function ([`primes`]);
//! - samplers for the probabilistic substrate: GEM stick-breaking, the
//!   two-dimensional Poisson window with exponential marks, crossing
//!   indexation and theta statistics, together with analytic oracles
//!   ([`pd`]);
//! - the coupling itself: the prime-power product `J`, the extra prime,
//!   `M = J * p_extra`, the total-variation-optimal transport onto the
//!   uniform law, the per-sample l1 statistic, and the integer-friendly
//!   variant `J*` with its quadrature oracle ([`coupling`]);
//! - random k-factorization machinery: the family of multiplicative
//!   kernels, exact small-x joint laws by enumeration, the coupled
//!   factorization, and the half-divisor statistic ([`kfact`]);
//! - Dirichlet/Beta distribution machinery and a small statistics toolbox
//!   ([`dirichlet`], [`stats`]);
//! - reproducible experiment drivers used by the `pdc` CLI
//!   ([`experiments`]).
//!
//! All samplers take an explicit [`rng::Stream`], so every result is a pure
//! function of (inputs, seed) and is independent of worker count.

pub mod coupling;
pub mod dirichlet;
pub mod experiments;
pub mod kfact;
pub mod pd;
pub mod primes;
pub mod quad;
pub mod ratio;
pub mod rng;
pub mod special;
pub mod stats;

pub use coupling::{CoupledSample, EmpiricalDist, MSample, TvTransport};
pub use kfact::{FactorSpec, KFactSample};
pub use pd::{GemSample, IndexedR, RWindow};
pub use primes::{ArithProfile, PrimeLadder, PrimeTable};
pub use rng::{derive_stream, Stream, StreamFamily, UnitRand};
pub use stats::StatReport;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("out of range: {0}")]
    Range(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid factorization kernel: {0}")]
    Kernel(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad file format: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
