//! Bayesian covariate-adjusted frailty proportional hazards models.
//!
//! A piecewise-exponential Cox model whose cluster frailty distribution is a
//! linear dependent tailfree process indexed by cluster-level covariates,
//! fitted by adaptive Metropolis-within-Gibbs sampling.

pub mod chain;
pub mod data;
pub mod error;
pub mod hazard;
pub mod inference;
pub mod ldtfp;
pub mod numeric;
pub mod rng;
pub mod sampler;
pub mod simulate;

pub use error::{Error, Result};
