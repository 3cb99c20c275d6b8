//! Hamiltonian Monte Carlo over differentiable log densities.
//!
//! The sampler is plain HMC with a jittered number of leapfrog steps, a
//! dual-averaging step size and a diagonal mass matrix learned during warmup.
//! Chains run in parallel; each one owns a ChaCha stream derived from
//! `(seed, chain_index)`, so output is identical regardless of thread count.

mod adapt;
mod diagnostics;
mod draws;
mod gradcheck;
mod integrator;
mod sampler;
mod target;

pub use diagnostics::{diagnose, effective_sample_size, split_rhat, Diagnostics};
pub use draws::{DrawSpace, PosteriorDraws};
pub use gradcheck::{check_gradient, GradientCheck};
pub use integrator::leapfrog;
pub use sampler::{hmc_sample, HmcConfig};
pub use target::{FnDensity, LogDensity};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McmcError {
    #[error("non-finite log density or gradient at leapfrog step {step}")]
    Divergence { step: usize },
    #[error("chain {chain} failed: {divergent} of {total} sampling transitions diverged")]
    SamplingFailure {
        chain: usize,
        divergent: usize,
        total: usize,
    },
    #[error("initial point is invalid: {0}")]
    InvalidInit(String),
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("not enough draws for diagnostics: {0}")]
    InsufficientDraws(String),
}
