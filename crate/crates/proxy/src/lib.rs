//! Proxy cost models.
//!
//! A random forest per metric, trained on the design → metric pairs logged
//! in trajectory datasets, stands in for a slow simulator. Features are the
//! parameter space's `encode` vectors: one-hot blocks for categorical
//! parameters, so tree splits on them are membership tests.

mod eval;
mod forest;
mod tree;

use dsegym_core::{EnvError, SpaceError};
use thiserror::Error;

pub use eval::{
    evaluate_rmse, hyperparam_search, rmse, search_grid, speed_benchmark, time_pass, ProxyEvalReport, SearchOutcome,
    SpeedReport, MODEL_ROUNDS,
};
pub use forest::{training_rows, ForestParams, RandomForestModel, MODEL_FORMAT_VERSION};
pub use tree::{train_tree, Node, RegressionTree, TreeParams};

#[derive(Debug, Error)]
pub enum ProxyError {
    #[error("no training rows")]
    Empty,
    #[error("record {experiment}#{step} has no `{metric}` metric")]
    MissingMetric {
        metric: String,
        experiment: String,
        step: u64,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("model file: {0}")]
    Format(String),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Env(#[from] EnvError),
}
