//! Built-in environments.
//!
//! Three synthetic analytical cost models stand in for real architecture
//! simulators, each in a full and a brute-force tractable ("small") variant:
//!
//! | id            | metrics                       | model                                 |
//! |---------------|-------------------------------|---------------------------------------|
//! | `dram`        | latency, power, energy        | memory-controller factor model        |
//! | `accel`       | latency, energy, area         | roofline DNN accelerator              |
//! | `soc`         | performance, power, area      | list-scheduled task graph on PEs      |
//!
//! Append `-small` to any id for the small variant. All constants live in the
//! TOML fixtures under `fixtures/`. [`external::ExternalEnv`] drives a
//! simulator in a child process instead.

pub mod accel;
pub mod dram;
pub mod external;
pub mod soc;
pub mod synthetic;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use dsegym_core::{EnvError, ParameterSpace, RewardSpec, WorkloadSpec};

pub use accel::AccelModel;
pub use dram::DramModel;
pub use external::{AdapterConfig, ExternalEnv, SimulatorAdapter};
pub use soc::SocModel;
pub use synthetic::{CostModel, EnvOptions, SyntheticEnv};

/// Which synthetic model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Dram,
    Accel,
    Soc,
}

/// A built-in environment id such as `dram-small`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BuiltinEnv {
    pub model: ModelKind,
    pub small: bool,
}

impl BuiltinEnv {
    pub const ALL: [BuiltinEnv; 6] = [
        BuiltinEnv { model: ModelKind::Dram, small: false },
        BuiltinEnv { model: ModelKind::Dram, small: true },
        BuiltinEnv { model: ModelKind::Accel, small: false },
        BuiltinEnv { model: ModelKind::Accel, small: true },
        BuiltinEnv { model: ModelKind::Soc, small: false },
        BuiltinEnv { model: ModelKind::Soc, small: true },
    ];

    pub fn small_variants() -> impl Iterator<Item = BuiltinEnv> {
        Self::ALL.into_iter().filter(|e| e.small)
    }

    pub fn space(self) -> ParameterSpace {
        let text = match (self.model, self.small) {
            (ModelKind::Dram, false) => dram::SPACE_TOML,
            (ModelKind::Dram, true) => dram::SMALL_SPACE_TOML,
            (ModelKind::Accel, false) => accel::SPACE_TOML,
            (ModelKind::Accel, true) => accel::SMALL_SPACE_TOML,
            (ModelKind::Soc, false) => soc::SPACE_TOML,
            (ModelKind::Soc, true) => soc::SMALL_SPACE_TOML,
        };
        ParameterSpace::from_toml_str(text).expect("shipped space fixtures are valid")
    }

    /// Raw text of the shipped space file.
    pub fn space_toml(self) -> &'static str {
        match (self.model, self.small) {
            (ModelKind::Dram, false) => dram::SPACE_TOML,
            (ModelKind::Dram, true) => dram::SMALL_SPACE_TOML,
            (ModelKind::Accel, false) => accel::SPACE_TOML,
            (ModelKind::Accel, true) => accel::SMALL_SPACE_TOML,
            (ModelKind::Soc, false) => soc::SPACE_TOML,
            (ModelKind::Soc, true) => soc::SMALL_SPACE_TOML,
        }
    }

    pub fn default_workload(self) -> &'static str {
        match self.model {
            ModelKind::Dram => "stream",
            ModelKind::Accel => "resnet50_conv3",
            ModelKind::Soc => "edge_detection",
        }
    }

    pub fn workloads(self) -> Vec<String> {
        match self.model {
            ModelKind::Dram => dram_model().workloads.keys().cloned().collect(),
            ModelKind::Accel => accel_model().workloads.keys().cloned().collect(),
            ModelKind::Soc => soc_model().workloads.keys().cloned().collect(),
        }
    }

    pub fn workload(self, id: &str) -> Result<WorkloadSpec, EnvError> {
        match self.model {
            ModelKind::Dram => dram_model().workload(id),
            ModelKind::Accel => accel_model().workload(id),
            ModelKind::Soc => soc_model().workload(id),
        }
    }

    /// Named objectives (`low-power`, `low-latency`, `joint`, `budget`, ...)
    /// shipped for `workload`.
    pub fn objectives(self, workload: &str) -> Result<BTreeMap<String, RewardSpec>, EnvError> {
        let unknown = || EnvError::Workload(format!("unknown workload `{workload}` for {self}"));
        Ok(match self.model {
            ModelKind::Dram => dram_model().workloads.get(workload).ok_or_else(unknown)?.objectives.clone(),
            ModelKind::Accel => accel_model().workloads.get(workload).ok_or_else(unknown)?.objectives.clone(),
            ModelKind::Soc => soc_model().workloads.get(workload).ok_or_else(unknown)?.objectives.clone(),
        })
    }

    pub fn objective(self, workload: &str, name: &str) -> Result<RewardSpec, EnvError> {
        self.objectives(workload)?
            .remove(name)
            .ok_or_else(|| EnvError::Fixture(format!("no objective `{name}` for {self}/{workload}")))
    }

    pub fn cost_model(self) -> Arc<dyn CostModel> {
        match self.model {
            ModelKind::Dram => dram_model(),
            ModelKind::Accel => accel_model(),
            ModelKind::Soc => soc_model(),
        }
    }

    /// Environment with the named shipped objective.
    pub fn make(self, workload: &str, objective: &str, options: EnvOptions) -> Result<SyntheticEnv, EnvError> {
        let reward = self.objective(workload, objective)?;
        self.make_with_reward(workload, reward, options)
    }

    pub fn make_with_reward(
        self,
        workload: &str,
        reward: RewardSpec,
        options: EnvOptions,
    ) -> Result<SyntheticEnv, EnvError> {
        SyntheticEnv::new(
            self.to_string(),
            self.cost_model(),
            self.space(),
            self.workload(workload)?,
            reward,
            options,
        )
    }
}

impl fmt::Display for BuiltinEnv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let base = match self.model {
            ModelKind::Dram => "dram",
            ModelKind::Accel => "accel",
            ModelKind::Soc => "soc",
        };
        if self.small {
            write!(f, "{base}-small")
        } else {
            f.write_str(base)
        }
    }
}

impl FromStr for BuiltinEnv {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (base, small) = match s.strip_suffix("-small") {
            Some(b) => (b, true),
            None => (s, false),
        };
        let model = match base {
            "dram" => ModelKind::Dram,
            "accel" => ModelKind::Accel,
            "soc" => ModelKind::Soc,
            _ => return Err(EnvError::Fixture(format!("unknown environment `{s}`"))),
        };
        Ok(BuiltinEnv { model, small })
    }
}

fn dram_model() -> Arc<DramModel> {
    static MODEL: OnceLock<Arc<DramModel>> = OnceLock::new();
    MODEL
        .get_or_init(|| Arc::new(DramModel::from_fixture().expect("shipped dram fixture is valid")))
        .clone()
}

fn accel_model() -> Arc<AccelModel> {
    static MODEL: OnceLock<Arc<AccelModel>> = OnceLock::new();
    MODEL
        .get_or_init(|| Arc::new(AccelModel::from_fixture().expect("shipped accel fixture is valid")))
        .clone()
}

fn soc_model() -> Arc<SocModel> {
    static MODEL: OnceLock<Arc<SocModel>> = OnceLock::new();
    MODEL
        .get_or_init(|| Arc::new(SocModel::from_fixture().expect("shipped soc fixture is valid")))
        .clone()
}
