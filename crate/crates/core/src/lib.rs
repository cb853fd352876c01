//! Latent-space generative modeling: fit interchangeable distribution
//! models to an autoencoder's latent space, draw new latent vectors from
//! them, and score sample quality with two-sample metrics.

pub mod autoencoder;
pub mod beta_copula;
pub mod data;
pub mod density;
pub mod error;
pub mod io;
pub mod marginals;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod stats;
pub mod vine;

mod blob;
mod linalg;

pub use data::{compute_ranks, split_holdout, LabeledLatentMatrix, LatentMatrix, RankMatrix};
pub use error::{Error, Result};
pub use marginals::{fit_marginal, silverman_bandwidth, MarginalModel};
pub use metrics::EvalReport;
pub use model::{LatentModel, ModelKind};
