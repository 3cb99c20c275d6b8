//! Bayesian regression for sales-like time series.
//!
//! The crate bundles three model families (a saturating log-trend, a
//! hierarchical per-store intercept model and a robust Student-t stacking
//! regression), a Hamiltonian Monte Carlo engine that samples their
//! posteriors, a few first-level forecasters whose validation predictions
//! feed the stacking model, and the error and risk metrics used to report
//! results.
//!
//! ```text
//! features ──► baselearners ──► StackingInput ─┐
//!    │                                          ▼
//!    └──────────────► models::build_* ──► ModelSpec ──► mcmc::hmc_sample ──► PosteriorDraws
//!                                                                              │
//!                                 metrics ◄── posterior_predictive ◄───────────┘
//! ```

pub mod baselearners;
pub mod features;
pub mod mcmc;
pub mod metrics;
pub mod models;
pub mod simulate;

mod rng;

pub use baselearners::StackingInput;
pub use features::{Observation, TimeSeriesFrame, ZScaler};
pub use mcmc::{diagnose, hmc_sample, leapfrog, Diagnostics, HmcConfig, LogDensity, PosteriorDraws};
pub use metrics::{MetricsReport, PosteriorSummary};
pub use models::{ModelSpec, ParameterLayout, PredictiveDraws};
