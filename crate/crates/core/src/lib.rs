//! Domain latent class models (DLCMs): Bayesian clustering of multivariate
//! categorical data that groups conditionally dependent items into domains.
//!
//! A traditional latent class model assumes items are independent given
//! class. A DLCM relaxes that: within each class, items are partitioned into
//! domains, responses to a domain's items are recoded into one joint pattern,
//! and each pattern gets its own probability. The partition itself is sampled
//! by Metropolis-within-Gibbs under regularizing priors, with a runtime
//! identifiability filter on proposed structures.
//!
//! Crate layout:
//! - [`model`]: datasets, domain structures, parameters, chain state
//! - [`encoding`]: pattern coding and likelihoods
//! - [`identifiability`]: pooled domains, the Kruskal check, separability
//! - [`priors`]: bucket / pattern-adjusted / uniform structure priors
//! - [`sampler`]: the MCMC engine
//! - [`diagnostics`]: LPPD, WAIC, Gelman-Rubin, structure summaries
//! - [`simgen`]: synthetic data generators for the recovery studies
//! - [`record`]: chain records and their directory format

pub mod diagnostics;
pub mod encoding;
pub mod error;
pub mod identifiability;
pub mod mathutil;
pub mod model;
pub mod priors;
pub mod record;
pub mod sampler;
pub mod simgen;

pub use error::{Error, Result};
pub use model::{Dataset, DomainStructure, Hyperparams, ModelParams, StructureMode};
pub use record::ChainRecord;
pub use sampler::{run_chain, run_chains, ModelKind, SamplerConfig, SeedStyle};
