//! Bayesian noisy matrix completion under a general sampling distribution.
//!
//! The estimator is the mean of the tempered Gibbs posterior
//! `exp(-lambda r(M)) pi(dM)` under a structured uniform prior on the factors
//! of `M = U V^T`. It is computed with a multi-chain Gibbs sampler whose row
//! conditionals are box-truncated Gaussians. A conjugate Gaussian/inverse
//! Gamma sampler is provided as a baseline, together with the simulation
//! series used to compare them, the explicit oracle bound, and MCMC
//! diagnostics.

pub mod bounds;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod gibbs;
pub mod io;
pub mod model;
pub mod prior;
pub mod rng;
pub mod sim;
pub mod tmvn;

pub use error::{Error, Result};
pub use gibbs::{
    fit_conjugate_prior, fit_uniform_prior, ChainEnsemble, FitOutput, GibbsConfig,
};
pub use model::{
    empirical_risk, rmse_per_entry, weighted_frobenius_sq, DenseMatrix, Observation,
    ObservationSet, SamplingDistribution,
};
pub use prior::{ConjugatePriorConfig, FactorPair, PriorConfig};
pub use tmvn::BoxTruncatedGaussian;
