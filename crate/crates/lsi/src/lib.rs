//! Engine for measuring per-sample information via leave-one-out retraining
//! of a small probe classifier and the KL divergence between Laplace
//! approximations of the parameter posterior, with corruption, partitioning,
//! dataset-size, and differential-privacy studies on top.
//!
//! Everything is deterministic given explicit seeds: training, noise,
//! parallel orchestration, and file emission.

pub mod blobs;
pub mod cli;
pub mod dataset;
pub mod emb;
pub mod error;
pub mod experiments;
pub mod gaussian;
pub mod laplace;
pub mod loo;
pub mod probe;
pub mod results;
pub mod rng;
pub mod stats;
pub mod trainer;

pub use dataset::Dataset;
pub use error::{Error, Result};
pub use gaussian::{kl_diag, kl_full, DiagGaussian, FullGaussian};
pub use laplace::{fit_posterior, lsi, HessianMode, LsiRecord, Posterior};
pub use loo::{ranking_stability, run_loo, seed_disagreement, LooJob, LsiTable};
pub use probe::{LossSpec, ParamVector, ProbeShape};
pub use rng::Rng;
pub use stats::{spearman, summarize, Summary};
pub use trainer::{train, train_dp, DpConfig, TrainConfig, TrainResult};
