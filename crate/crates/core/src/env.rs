//! The environment side of the agent/environment contract.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::reward::RewardError;
use crate::space::{DesignPoint, ParameterSpace, SpaceError};

/// Physical unit attached to a metric name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Seconds,
    Watts,
    Joules,
    SquareMillimeters,
    OpsPerSecond,
    Dimensionless,
}

impl Unit {
    /// Unit implied by a metric name.
    pub fn of(metric: &str) -> Unit {
        match metric {
            "latency" | "performance" | "runtime" => Unit::Seconds,
            "power" => Unit::Watts,
            "energy" => Unit::Joules,
            "area" => Unit::SquareMillimeters,
            "throughput" => Unit::OpsPerSecond,
            _ => Unit::Dimensionless,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Unit::Seconds => "s",
            Unit::Watts => "W",
            Unit::Joules => "J",
            Unit::SquareMillimeters => "mm2",
            Unit::OpsPerSecond => "ops/s",
            Unit::Dimensionless => "",
        }
    }
}

/// Metrics returned by a cost model for one design point.
///
/// Every value is finite. An infeasible design carries no metrics and
/// `valid == false`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub metrics: BTreeMap<String, f64>,
    pub valid: bool,
}

impl Observation {
    pub fn new<I, K>(metrics: I) -> Result<Self, EnvError>
    where
        I: IntoIterator<Item = (K, f64)>,
        K: Into<String>,
    {
        let mut map = BTreeMap::new();
        for (name, value) in metrics {
            let name = name.into();
            if !value.is_finite() {
                return Err(EnvError::Reward(RewardError::InvalidObservation(format!(
                    "metric `{name}` is {value}"
                ))));
            }
            if map.insert(name.clone(), value).is_some() {
                return Err(EnvError::Reward(RewardError::InvalidObservation(format!(
                    "duplicate metric `{name}`"
                ))));
            }
        }
        Ok(Observation {
            metrics: map,
            valid: true,
        })
    }

    /// Empty observation for a design point that cannot be built.
    pub fn infeasible() -> Self {
        Observation {
            metrics: BTreeMap::new(),
            valid: false,
        }
    }

    /// Observation reported before the first step of an episode.
    pub fn initial() -> Self {
        Observation {
            metrics: BTreeMap::new(),
            valid: true,
        }
    }

    pub fn get(&self, metric: &str) -> Option<f64> {
        self.metrics.get(metric).copied()
    }
}

/// Outcome of one `step`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: BTreeMap<String, String>,
}

/// Workload the environment evaluates designs against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub id: String,
    #[serde(default)]
    pub traits: BTreeMap<String, f64>,
}

impl WorkloadSpec {
    pub fn new(id: impl Into<String>) -> Self {
        WorkloadSpec {
            id: id.into(),
            traits: BTreeMap::new(),
        }
    }

    pub fn with_trait(mut self, name: impl Into<String>, value: f64) -> Self {
        self.traits.insert(name.into(), value);
        self
    }

    pub fn trait_value(&self, name: &str) -> Option<f64> {
        self.traits.get(name).copied()
    }

    /// Traits are finite; `locality` and anything ending in `_fraction` lie in [0, 1].
    pub fn validate(&self) -> Result<(), EnvError> {
        for (name, &v) in &self.traits {
            if !v.is_finite() {
                return Err(EnvError::Workload(format!("{}: trait `{name}` is {v}", self.id)));
            }
            let is_fraction = name == "locality" || name.ends_with("_fraction");
            if is_fraction && !(0.0..=1.0).contains(&v) {
                return Err(EnvError::Workload(format!(
                    "{}: trait `{name}` = {v} outside [0, 1]",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum EnvError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error("workload error: {0}")]
    Workload(String),
    #[error("fixture error: {0}")]
    Fixture(String),
    #[error("simulator timeout after {0:?}")]
    SimulatorTimeout(std::time::Duration),
    #[error("protocol error: {message}")]
    Protocol { message: String, raw: String },
    #[error("simulator crashed: {0}")]
    SimulatorCrashed(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Gym-style environment: one instance serves one trial at a time.
///
/// `step` must be a deterministic function of the design point, the
/// workload and the environment seed. After `reset` an environment is
/// indistinguishable from a fresh instance.
pub trait Environment: Send {
    /// Short identifier, e.g. `dram`.
    fn id(&self) -> &str;
    fn reset(&mut self) -> Observation;
    fn step(&mut self, point: &DesignPoint) -> Result<StepResult, EnvError>;
    fn space(&self) -> &ParameterSpace;
    fn workload(&self) -> &WorkloadSpec;
}

impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.valid {
            return f.write_str("<infeasible>");
        }
        let mut first = true;
        for (k, v) in &self.metrics {
            if !first {
                f.write_str(", ")?;
            }
            first = false;
            write!(f, "{k}={v}{}", Unit::of(k).symbol())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn observation_rejects_non_finite_and_duplicates() {
        assert!(Observation::new([("latency", f64::NAN)]).is_err());
        assert!(Observation::new([("latency", 1.0), ("latency", 2.0)]).is_err());
        let o = Observation::new([("latency", 1.0), ("power", 2.0)]).unwrap();
        assert_eq!(o.get("power"), Some(2.0));
        assert!(o.valid);
        assert!(!Observation::infeasible().valid);
        assert!(Observation::infeasible().metrics.is_empty());
    }

    #[test]
    fn workload_fraction_bounds() {
        assert!(WorkloadSpec::new("w").with_trait("locality", 0.4).validate().is_ok());
        assert!(WorkloadSpec::new("w").with_trait("read_fraction", 1.2).validate().is_err());
        assert!(WorkloadSpec::new("w").with_trait("tasks", f64::INFINITY).validate().is_err());
        assert!(WorkloadSpec::new("w").with_trait("intensity", 12.0).validate().is_ok());
    }

    #[test]
    fn units_by_name() {
        assert_eq!(Unit::of("latency"), Unit::Seconds);
        assert_eq!(Unit::of("area"), Unit::SquareMillimeters);
        assert_eq!(Unit::of("foo"), Unit::Dimensionless);
    }
}
