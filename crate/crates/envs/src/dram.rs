//! Synthetic memory-controller model.
//!
//! Each categorical parameter scales latency and power by a factor that may
//! drift with the workload's access locality. Numeric parameters contribute
//! smooth responses; the request-buffer latency curve depends on the chosen
//! scheduler, so the optimum is not separable per parameter.

use std::collections::BTreeMap;

use dsegym_core::{DesignPoint, EnvError, Observation, ParamValue, ParameterSpace, WorkloadSpec};
use serde::Deserialize;

use crate::synthetic::{require_trait, CostModel, Lookup, WorkloadFixture};

pub(crate) const MODEL_TOML: &str = include_str!("../fixtures/dram_model.toml");
pub(crate) const SPACE_TOML: &str = include_str!("../fixtures/dram_space.toml");
pub(crate) const SMALL_SPACE_TOML: &str = include_str!("../fixtures/dram_small_space.toml");

const CATEGORICAL: [&str; 5] = ["PagePolicy", "Scheduler", "SchedulerBuffer", "RespQueue", "Arbiter"];

#[derive(Debug, Clone, Deserialize)]
struct Factor {
    latency: f64,
    power: f64,
    #[serde(default)]
    latency_locality: f64,
    #[serde(default)]
    power_locality: f64,
}

impl Factor {
    fn latency(&self, locality: f64) -> f64 {
        self.latency * (1.0 + self.latency_locality * (locality - 0.5))
    }

    fn power(&self, locality: f64) -> f64 {
        self.power * (1.0 + self.power_locality * (locality - 0.5))
    }
}

#[derive(Debug, Clone, Deserialize)]
struct BufferResponse {
    congestion: f64,
    power_slope: f64,
    queue: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Deserialize)]
struct RefreshResponse {
    postponed_latency: f64,
    postponed_power: f64,
    pulledin_latency: f64,
    pulledin_latency_slope: f64,
    pulledin_power: f64,
}

#[derive(Debug, Clone, Deserialize)]
struct TransactionResponse {
    latency_inverse: f64,
    latency_slope: f64,
    power_slope: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct DramModel {
    version: u32,
    reference: BTreeMap<String, ParamValue>,
    factors: BTreeMap<String, BTreeMap<String, Factor>>,
    buffer: BufferResponse,
    refresh: RefreshResponse,
    transactions: TransactionResponse,
    #[serde(rename = "workloads")]
    pub(crate) workloads: BTreeMap<String, WorkloadFixture>,
}

impl DramModel {
    pub fn from_fixture() -> Result<Self, EnvError> {
        Self::from_toml_str(MODEL_TOML)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, EnvError> {
        let model: DramModel = toml::from_str(text).map_err(|e| EnvError::Fixture(e.to_string()))?;
        if model.version != 1 {
            return Err(EnvError::Fixture(format!("unsupported dram model version {}", model.version)));
        }
        for param in CATEGORICAL {
            let table = model
                .factors
                .get(param)
                .ok_or_else(|| EnvError::Fixture(format!("no factor table for `{param}`")))?;
            for (value, f) in table {
                if !(f.latency(0.0) > 0.0 && f.latency(1.0) > 0.0 && f.power(0.0) > 0.0 && f.power(1.0) > 0.0) {
                    return Err(EnvError::Fixture(format!("factor {param}={value} is not positive")));
                }
            }
        }
        Ok(model)
    }

    pub fn workload(&self, id: &str) -> Result<WorkloadSpec, EnvError> {
        self.workloads
            .get(id)
            .ok_or_else(|| EnvError::Workload(format!("unknown dram workload `{id}`")))?
            .spec(id)
    }

    fn factor(&self, param: &str, value: &str) -> Result<&Factor, EnvError> {
        self.factors
            .get(param)
            .and_then(|t| t.get(value))
            .ok_or_else(|| EnvError::Fixture(format!("no factor for {param}={value}")))
    }
}

impl CostModel for DramModel {
    fn reference(&self) -> &BTreeMap<String, ParamValue> {
        &self.reference
    }

    fn metric_names(&self) -> &[&'static str] {
        &["latency", "power", "energy"]
    }

    fn evaluate(
        &self,
        space: &ParameterSpace,
        point: &DesignPoint,
        workload: &WorkloadSpec,
    ) -> Result<Observation, EnvError> {
        space.validate(point)?;
        let at = Lookup {
            space,
            point,
            reference: &self.reference,
        };
        let locality = require_trait(workload, "locality")?;
        let mut latency = require_trait(workload, "base_latency")?;
        let mut power = require_trait(workload, "base_power")?;

        for param in CATEGORICAL {
            let f = self.factor(param, at.label(param)?)?;
            latency *= f.latency(locality);
            power *= f.power(locality);
        }

        let scheduler = at.label("Scheduler")?;
        let queue = *self
            .buffer
            .queue
            .get(scheduler)
            .ok_or_else(|| EnvError::Fixture(format!("no queue constant for `{scheduler}`")))?;
        let size = at.number("RequestBufferSize")?;
        latency *= 1.0 + queue / size + self.buffer.congestion * size;
        power *= 1.0 + self.buffer.power_slope * size;

        let r = &self.refresh;
        let postponed = at.number("RefreshMaxPostponed")?;
        let pulledin = at.number("RefreshMaxPulledin")?;
        latency *= 1.0 + r.postponed_latency / postponed;
        latency *= 1.0 + r.pulledin_latency / pulledin + r.pulledin_latency_slope * pulledin;
        power *= 1.0 + r.postponed_power * postponed;
        power *= 1.0 + r.pulledin_power * pulledin;

        let t = &self.transactions;
        let active = at.number("MaxActiveTransactions")?;
        latency *= 1.0 + t.latency_inverse / active + t.latency_slope * active;
        power *= 1.0 + t.power_slope * active;

        Observation::new([("latency", latency), ("power", power), ("energy", latency * power)])
    }
}
