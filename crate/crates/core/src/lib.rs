//! Bayesian influence networks.
//!
//! The crate fits a latent-space projection model to a directed binary
//! network, reparameterizes the latent positions into influencing capacity,
//! susceptibility and pairwise similarity, and drives a four-state idea
//! diffusion process with the inferred parameters.
//!
//! Module map:
//!
//! - [`graph`]: directed network type, edge-list loading, descriptive
//!   statistics and fast-greedy community detection.
//! - [`model`]: latent state, likelihood and the influence reparameterization.
//! - [`mcmc`]: Metropolis-within-Gibbs sampler, DIC, Procrustes alignment, ESS.
//! - [`ppc`]: posterior predictive checks and coverage experiments.
//! - [`diffusion`]: cascade simulation with a reference and a race engine.
//! - [`scenarios`]: synthetic scenario design and experiment grids.
//! - [`analysis`]: nested ANOVA, residual diagnostics and PCA summaries.
//! - [`io`]: on-disk formats shared by the command-line front end.
//! - [`cli`]: the `influnet` command implementations.

pub mod analysis;
pub mod cli;
pub mod diffusion;
pub mod error;
pub mod graph;
pub mod io;
pub mod mcmc;
pub mod model;
pub mod ppc;
pub mod rng;
pub mod scenarios;

pub use error::{Error, Result};
