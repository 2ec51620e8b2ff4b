//! Synthetic SoC model: greedy list scheduling of a task graph over the
//! instantiated processing elements.

use std::collections::BTreeMap;

use dsegym_core::{DesignPoint, EnvError, Observation, ParamValue, ParameterSpace, RewardSpec, WorkloadSpec};
use serde::Deserialize;

use crate::synthetic::{CostModel, Lookup};

pub(crate) const MODEL_TOML: &str = include_str!("../fixtures/soc_model.toml");
pub(crate) const SPACE_TOML: &str = include_str!("../fixtures/soc_space.toml");
pub(crate) const SMALL_SPACE_TOML: &str = include_str!("../fixtures/soc_small_space.toml");

const EMPTY_SLOT: &str = "None";

#[derive(Debug, Clone, Deserialize)]
pub struct PeType {
    pub power: f64,
    pub area: f64,
    pub speed: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Task {
    pub name: String,
    pub kind: String,
    pub ops: f64,
    pub output_bytes: f64,
    #[serde(default)]
    pub deps: Vec<usize>,
}

#[derive(Debug, Clone, Deserialize)]
pub(crate) struct TaskGraph {
    pub tasks: Vec<Task>,
    #[serde(default)]
    pub objectives: BTreeMap<String, RewardSpec>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SocModel {
    version: u32,
    pe_slots: Vec<String>,
    noc_frequency: f64,
    noc_power_per_bit: f64,
    noc_area_per_bit: f64,
    reference: BTreeMap<String, ParamValue>,
    pe_types: BTreeMap<String, PeType>,
    pub(crate) workloads: BTreeMap<String, TaskGraph>,
}

/// Per-task placement produced by the list scheduler.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    /// Slot index each task ran on.
    pub placement: Vec<usize>,
    pub finish: Vec<f64>,
    pub makespan: f64,
}

impl SocModel {
    pub fn from_fixture() -> Result<Self, EnvError> {
        Self::from_toml_str(MODEL_TOML)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, EnvError> {
        let model: SocModel = toml::from_str(text).map_err(|e| EnvError::Fixture(e.to_string()))?;
        if model.version != 1 {
            return Err(EnvError::Fixture(format!("unsupported soc model version {}", model.version)));
        }
        for (name, pe) in &model.pe_types {
            if !(pe.power > 0.0 && pe.area > 0.0) || pe.speed.values().any(|&s| !(s > 0.0)) {
                return Err(EnvError::Fixture(format!("PE type `{name}` has a non-positive constant")));
            }
        }
        for (id, graph) in &model.workloads {
            if graph.tasks.is_empty() {
                return Err(EnvError::Fixture(format!("workload `{id}` has no tasks")));
            }
            for (i, t) in graph.tasks.iter().enumerate() {
                if t.deps.iter().any(|&d| d >= i) {
                    return Err(EnvError::Fixture(format!(
                        "workload `{id}`: task `{}` depends on a later task",
                        t.name
                    )));
                }
                if !(t.ops > 0.0 && t.output_bytes >= 0.0) {
                    return Err(EnvError::Fixture(format!("workload `{id}`: bad task `{}`", t.name)));
                }
            }
        }
        Ok(model)
    }

    pub fn pe_type(&self, name: &str) -> Option<&PeType> {
        self.pe_types.get(name)
    }

    pub fn tasks(&self, workload: &str) -> Result<&[Task], EnvError> {
        self.workloads
            .get(workload)
            .map(|g| g.tasks.as_slice())
            .ok_or_else(|| EnvError::Workload(format!("unknown soc workload `{workload}`")))
    }

    /// Workload summary: task graphs stay in the model, the `WorkloadSpec` carries only traits.
    pub fn workload(&self, id: &str) -> Result<WorkloadSpec, EnvError> {
        let tasks = self.tasks(id)?;
        Ok(WorkloadSpec::new(id)
            .with_trait("task_count", tasks.len() as f64)
            .with_trait("total_ops", tasks.iter().map(|t| t.ops).sum()))
    }

    fn instantiated<'a>(&'a self, at: &'a Lookup<'_>) -> Result<Vec<(usize, &'a PeType)>, EnvError> {
        let mut pes = Vec::new();
        for (slot, name) in self.pe_slots.iter().enumerate() {
            let label = at.label(name)?;
            if label == EMPTY_SLOT {
                continue;
            }
            let pe = self
                .pe_types
                .get(label)
                .ok_or_else(|| EnvError::Fixture(format!("unknown PE type `{label}`")))?;
            pes.push((slot, pe));
        }
        Ok(pes)
    }

    /// Greedy earliest-finish list schedule; `None` if some task has no capable PE.
    pub fn schedule(
        &self,
        space: &ParameterSpace,
        point: &DesignPoint,
        workload: &WorkloadSpec,
    ) -> Result<Option<Schedule>, EnvError> {
        space.validate(point)?;
        let at = Lookup {
            space,
            point,
            reference: &self.reference,
        };
        let tasks = self.tasks(&workload.id)?;
        let pes = self.instantiated(&at)?;
        let bus_bytes_per_s = at.number("NoCBusWidth")? / 8.0 * self.noc_frequency;

        let mut free = vec![0.0f64; self.pe_slots.len()];
        let mut placement = Vec::with_capacity(tasks.len());
        let mut finish = Vec::with_capacity(tasks.len());
        for task in tasks {
            let mut best: Option<(f64, usize)> = None;
            for &(slot, pe) in &pes {
                let Some(&speed) = pe.speed.get(&task.kind) else {
                    continue;
                };
                let mut ready = free[slot];
                for &d in &task.deps {
                    let transfer = if placement[d] == slot {
                        0.0
                    } else {
                        tasks[d].output_bytes / bus_bytes_per_s
                    };
                    ready = ready.max(finish[d] + transfer);
                }
                let done = ready + task.ops / speed;
                if best.map_or(true, |(t, _)| done < t) {
                    best = Some((done, slot));
                }
            }
            let Some((done, slot)) = best else {
                return Ok(None);
            };
            free[slot] = done;
            placement.push(slot);
            finish.push(done);
        }
        let makespan = finish.iter().copied().fold(0.0, f64::max);
        Ok(Some(Schedule {
            placement,
            finish,
            makespan,
        }))
    }
}

impl CostModel for SocModel {
    fn reference(&self) -> &BTreeMap<String, ParamValue> {
        &self.reference
    }

    fn metric_names(&self) -> &[&'static str] {
        &["performance", "power", "area"]
    }

    fn evaluate(
        &self,
        space: &ParameterSpace,
        point: &DesignPoint,
        workload: &WorkloadSpec,
    ) -> Result<Observation, EnvError> {
        let Some(schedule) = self.schedule(space, point, workload)? else {
            return Ok(Observation::infeasible());
        };
        let at = Lookup {
            space,
            point,
            reference: &self.reference,
        };
        let width = at.number("NoCBusWidth")?;
        let pes = self.instantiated(&at)?;
        let power = pes.iter().map(|(_, pe)| pe.power).sum::<f64>() + self.noc_power_per_bit * width;
        let area = pes.iter().map(|(_, pe)| pe.area).sum::<f64>() + self.noc_area_per_bit * width;
        Observation::new([("performance", schedule.makespan), ("power", power), ("area", area)])
    }
}
