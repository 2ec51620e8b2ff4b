//! Trajectory datasets.
//!
//! Every agent↔environment exchange becomes one [`TrajectoryRecord`], written
//! as one JSON object per line to a per-trial file `{experiment_id}.jsonl`.
//! Files are combined afterwards with [`merge`], or resampled by agent type
//! with [`sample_mixture`] to build datasets of controlled diversity.

mod dataset;
mod io;
mod manifest;

use std::collections::BTreeMap;
use std::path::PathBuf;

use dsegym_core::{AgentKind, ParamValue};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dataset::{merge, sample_mixture, split, Dataset};
pub use io::{export, import, load_file, LoadReport, TrajectoryWriter};
pub use manifest::{Manifest, ManifestEntry, ProvenanceEntry, FAILURE_EXTENSION, MANIFEST_FILE};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("cannot merge across environments ({0} vs {1})")]
    MixedEnvironments(String, String),
    #[error("cannot merge schema versions {0} and {1}")]
    MixedSchema(u32, u32),
    #[error("source {agent} has {available} records, {needed} requested")]
    InsufficientRecords {
        agent: AgentKind,
        needed: usize,
        available: usize,
    },
    #[error("{0}")]
    Invalid(String),
}

impl DatasetError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DatasetError::Io {
            path: path.into(),
            source,
        }
    }
}

/// One agent↔environment exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub schema_version: u32,
    pub experiment_id: String,
    pub env_id: String,
    pub workload_id: String,
    pub agent_type: AgentKind,
    pub hyperparam_digest: String,
    pub seed: u64,
    pub step_index: u64,
    /// Parameter name → value.
    pub design: BTreeMap<String, ParamValue>,
    /// Metric name → value; empty for an infeasible design.
    pub observation: BTreeMap<String, f64>,
    pub reward: f64,
    pub wall_time_ms: u64,
}

impl TrajectoryRecord {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(DatasetError::InvalidRecord(format!(
                "schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.experiment_id.is_empty() || self.env_id.is_empty() {
            return Err(DatasetError::InvalidRecord("empty experiment_id or env_id".into()));
        }
        if !self.reward.is_finite() {
            return Err(DatasetError::InvalidRecord(format!("reward {} is not finite", self.reward)));
        }
        if let Some((k, v)) = self.observation.iter().find(|(_, v)| !v.is_finite()) {
            return Err(DatasetError::InvalidRecord(format!("metric `{k}` is {v}")));
        }
        Ok(())
    }

    /// Identity of a record within a dataset.
    pub fn key(&self) -> (&str, u64) {
        (&self.experiment_id, self.step_index)
    }

    /// The record as one line of the trajectory format, without the newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("records always serialize")
    }
}


#[cfg(test)]
mod tests {
    use super::testutil::record;
    use super::*;

    #[test]
    fn line_round_trip_is_bit_exact() {
        let mut r = record("e", AgentKind::BO, 0, 0.1 + 0.2);
        r.observation.insert("power".into(), 1.0 / 3.0);
        r.seed = u64::MAX;
        let back: TrajectoryRecord = serde_json::from_str(&r.to_line()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.reward.to_bits(), r.reward.to_bits());
        assert!(!r.to_line().contains('\n'));
    }

    #[test]
    fn field_names_are_stable() {
        let v: serde_json::Value = serde_json::from_str(&record("e", AgentKind::GA, 3, 1.0).to_line()).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(
            keys,
            [
                "agent_type",
                "design",
                "env_id",
                "experiment_id",
                "hyperparam_digest",
                "observation",
                "reward",
                "schema_version",
                "seed",
                "step_index",
                "wall_time_ms",
                "workload_id"
            ]
        );
        assert_eq!(v["agent_type"], "GA");
    }

    #[test]
    fn validation() {
        assert!(record("e", AgentKind::RW, 0, 1.0).validate().is_ok());
        assert!(record("e", AgentKind::RW, 0, f64::NAN).validate().is_err());
        let mut r = record("e", AgentKind::RW, 0, 1.0);
        r.schema_version = 2;
        assert!(r.validate().is_err());
    }
}
