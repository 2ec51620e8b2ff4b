//! Experiment driver.
//!
//! A trial is one agent with fixed hyperparameters searching one
//! environment for a fixed number of samples under one seed. A sweep is the
//! Cartesian product of grid configurations and seeds, run in parallel and
//! folded into a [`SweepSummary`] per sample budget.

pub mod config;
pub mod oracle;
pub mod report;
pub mod stats;
pub mod sweep;
pub mod trial;

use dsegym_agents::AgentError;
use dsegym_core::{EnvError, RewardError, SpaceError};
use dsegym_dataset::DatasetError;
use dsegym_proxy::ProxyError;
use thiserror::Error;

pub use config::ExperimentConfig;
pub use oracle::{enumerate_oracle, OracleResult};
pub use report::{write_report, REPORT_FILES};
pub use stats::{interquartile_range, mean_normalized_reward, quantile, FiveNumber};
pub use sweep::{run_sweep, AgentSummary, ConfigSummary, SweepOutcome, SweepPlan, SweepReport, SweepSummary, TimingRow};
pub use trial::{run_trial, run_trial_with, Improvement, TrialMeta, TrialResult, TrialSpec};

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("{0}")]
    Invalid(String),
    #[error("trial {experiment_id} failed after {samples_used} samples: {message}")]
    Trial {
        experiment_id: String,
        samples_used: u64,
        message: String,
    },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Proxy(#[from] ProxyError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
}

impl OrchestratorError {
    /// True for failures of a trial or an environment, as opposed to bad
    /// input.
    pub fn is_runtime(&self) -> bool {
        matches!(self, OrchestratorError::Trial { .. } | OrchestratorError::Env(_))
    }
}
