//! Experiment files.
//!
//! ```toml
//! env = "dram-small"
//! workload = "stream"          # optional; the env's default workload
//! objective = "low-latency"    # or a [reward] table
//! agents = ["GA", "BO"]
//! budgets = [100, 1000]
//! seeds = [0, 1, 2]
//! grid = "agents.toml"         # optional; the shipped agent config otherwise
//! step_delay_ms = 0
//! out_dir = "runs/dram"
//! parallel = 4
//!
//! [hyperparams.GA]             # overrides for single trials
//! mutation_prob = 0.1
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use dsegym_agents::{AgentConfigs, HyperparamSet};
use dsegym_core::{AgentKind, RewardSpec};
use dsegym_envs::BuiltinEnv;
use serde::{Deserialize, Serialize};

use crate::sweep::SweepPlan;
use crate::trial::TrialSpec;
use crate::OrchestratorError;

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: String,
    #[serde(default)]
    pub workload: Option<String>,
    /// Name of a shipped objective; exclusive with `reward`.
    #[serde(default)]
    pub objective: Option<String>,
    #[serde(default)]
    pub reward: Option<RewardSpec>,
    pub agents: Vec<AgentKind>,
    #[serde(default)]
    pub hyperparams: BTreeMap<AgentKind, HyperparamSet>,
    /// Agent defaults and grids file.
    #[serde(default)]
    pub grid: Option<PathBuf>,
    pub budgets: Vec<u64>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub step_delay_ms: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default = "one")]
    pub parallel: usize,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, OrchestratorError> {
        let c: ExperimentConfig = toml::from_str(text).map_err(|e| OrchestratorError::Invalid(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// Reads `path`; a relative `grid` path resolves against the file's
    /// directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, OrchestratorError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| OrchestratorError::Io(path.display().to_string(), e))?;
        let mut c = Self::from_toml_str(&text)?;
        if let (Some(g), Some(parent)) = (c.grid.as_mut(), path.parent()) {
            if g.is_relative() {
                *g = parent.join(&*g);
            }
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), OrchestratorError> {
        self.builtin_env()?;
        if self.agents.is_empty() {
            return Err(OrchestratorError::Invalid("no agents".into()));
        }
        if self.budgets.is_empty() || self.budgets.contains(&0) {
            return Err(OrchestratorError::Invalid("sample budgets must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(OrchestratorError::Invalid("seeds must be non-empty".into()));
        }
        if self.parallel == 0 {
            return Err(OrchestratorError::Invalid("parallel must be at least 1".into()));
        }
        if self.objective.is_some() && self.reward.is_some() {
            return Err(OrchestratorError::Invalid("give either `objective` or `reward`, not both".into()));
        }
        if let Some(r) = &self.reward {
            r.validate()?;
        }
        Ok(())
    }

    pub fn builtin_env(&self) -> Result<BuiltinEnv, OrchestratorError> {
        self.env
            .parse()
            .map_err(|e| OrchestratorError::Invalid(format!("env `{}`: {e}", self.env)))
    }

    pub fn workload(&self) -> Result<String, OrchestratorError> {
        Ok(match &self.workload {
            Some(w) => w.clone(),
            None => self.builtin_env()?.default_workload().to_string(),
        })
    }

    /// Objective name for ids and reports: the shipped name, `custom` for an
    /// explicit reward, `low-latency` when neither is given.
    pub fn objective_name(&self) -> String {
        match (&self.objective, &self.reward) {
            (Some(o), _) => o.clone(),
            (None, Some(_)) => "custom".into(),
            (None, None) => "low-latency".into(),
        }
    }

    pub fn reward(&self) -> Result<RewardSpec, OrchestratorError> {
        match &self.reward {
            Some(r) => Ok(r.clone()),
            None => Ok(self.builtin_env()?.objective(&self.workload()?, &self.objective_name())?),
        }
    }

    pub fn agent_configs(&self) -> Result<AgentConfigs, OrchestratorError> {
        match &self.grid {
            Some(path) => {
                let text =
                    std::fs::read_to_string(path).map_err(|e| OrchestratorError::Io(path.display().to_string(), e))?;
                Ok(AgentConfigs::from_toml_str(&text)?)
            }
            None => Ok(AgentConfigs::shipped()),
        }
    }

    /// A single trial of `agent` at `budget` with its defaults plus
    /// `hyperparams` overrides.
    pub fn trial_spec(&self, agent: AgentKind, budget: u64) -> Result<TrialSpec, OrchestratorError> {
        let overrides = self.hyperparams.get(&agent).cloned().unwrap_or_default();
        Ok(TrialSpec {
            env: self.builtin_env()?,
            workload: self.workload()?,
            objective: self.objective_name(),
            reward: self.reward()?,
            agent,
            hyperparams: self.agent_configs()?.resolve(agent, &overrides)?,
            budget,
            step_delay: Duration::from_millis(self.step_delay_ms),
            out_dir: self.out_dir.clone(),
        })
    }

    /// Sweep over the grids of every listed agent.
    pub fn sweep_plan(&self) -> Result<SweepPlan, OrchestratorError> {
        let configs = self.agent_configs()?;
        let mut grid = Vec::new();
        for &agent in &self.agents {
            grid.extend(configs.grid(agent)?.into_iter().map(|h| (agent, h)));
        }
        Ok(SweepPlan {
            env: self.builtin_env()?,
            workload: self.workload()?,
            objective: self.objective_name(),
            reward: self.reward()?,
            configs: grid,
            budgets: self.budgets.clone(),
            seeds: self.seeds.clone(),
            step_delay: Duration::from_millis(self.step_delay_ms),
            out_dir: self.out_dir.clone(),
            parallelism: self.parallel,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
        env = "dram-small"
        objective = "low-power"
        agents = ["GA", "RW"]
        budgets = [10, 100]
        seeds = [3]
        [hyperparams.GA]
        mutation_prob = 0.3
    "#;

    #[test]
    fn example_parses_and_resolves() {
        let c = ExperimentConfig::from_toml_str(EXAMPLE).unwrap();
        assert_eq!(c.workload().unwrap(), "stream");
        assert_eq!(c.parallel, 1);
        let spec = c.trial_spec(AgentKind::GA, 10).unwrap();
        assert_eq!(spec.hyperparams.f64("mutation_prob").unwrap(), 0.3);
        assert_eq!(spec.hyperparams.usize("population_size").unwrap(), 32);
        let plan = c.sweep_plan().unwrap();
        assert_eq!(plan.configs.len(), 12 + 1);
    }

    #[test]
    fn rejects_bad_configs() {
        let zero = EXAMPLE.replace("budgets = [10, 100]", "budgets = [0]");
        assert!(ExperimentConfig::from_toml_str(&zero).is_err());
        let no_seeds = EXAMPLE.replace("seeds = [3]", "seeds = []");
        assert!(ExperimentConfig::from_toml_str(&no_seeds).is_err());
        let bad_env = EXAMPLE.replace("dram-small", "tpu");
        assert!(ExperimentConfig::from_toml_str(&bad_env).is_err());
        let unknown = EXAMPLE.replace("agents", "agent_list");
        assert!(ExperimentConfig::from_toml_str(&unknown).is_err());
    }
}
