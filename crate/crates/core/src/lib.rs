//! Matrix-completion toolkit: latent factor analysis on sparse rating
//! matrices trained by SGD, with the learning rate and regularization
//! coefficient self-adapted online by a generalized-momentum particle swarm.
//!
//! The crate is organized as:
//! - [`data`]: triple-file ingestion, seeded splitting, synthetic matrices;
//! - [`lfa`]: factor matrices, the regularized objective, SGD epochs, RMSE;
//! - [`swarm`]: particle evolution (standard and generalized-momentum),
//!   bounding, fitness contributions, improvement rate, best maintenance;
//! - [`trainer`]: the adaptive training loop, both baselines, and reports.

pub mod data;
pub mod error;
pub mod lfa;
pub mod swarm;
pub mod trainer;

pub use data::{
    generate_synthetic, load_dataset, split_dataset, DatasetSplit, Delimiter, Entry, RatingTriple,
    SparseRatings, SplitManifest,
};
pub use error::{Error, Result};
pub use lfa::{Hyperparams, LatentFactors};
pub use swarm::{
    bound, fitness_contributions, gamma_schedule, gm_pso_step, improvement_rate, pso_step,
    BestPolicy, Particle, SearchBox, SwarmConsts, SwarmState,
};
pub use trainer::{
    estimate_missing, grid_search_sgd, train_gmpl, train_pso, train_sgd, Algorithm, Curve,
    TrainConfig, TrainReport,
};
