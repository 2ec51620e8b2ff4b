use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use dsegym_agents::{build_agent, Agent, HyperparamSet};
use dsegym_core::{rng_for, AgentKind, DesignPoint, Environment, ParamValue, RewardSpec};
use dsegym_dataset::{TrajectoryRecord, TrajectoryWriter, FAILURE_EXTENSION, SCHEMA_VERSION};
use dsegym_envs::{BuiltinEnv, EnvOptions};
use serde::{Deserialize, Serialize};

use crate::OrchestratorError;

/// One (environment, objective, agent, hyperparameters, budget) cell.
#[derive(Debug, Clone)]
pub struct TrialSpec {
    pub env: BuiltinEnv,
    pub workload: String,
    /// Objective name, used in experiment ids and reports.
    pub objective: String,
    pub reward: RewardSpec,
    pub agent: AgentKind,
    /// Complete hyperparameters for `agent`.
    pub hyperparams: HyperparamSet,
    /// Maximum number of env steps.
    pub budget: u64,
    pub step_delay: Duration,
    /// Where `{experiment_id}.jsonl` goes; no file is written when `None`.
    pub out_dir: Option<PathBuf>,
}

impl TrialSpec {
    /// Shipped objective `objective` of `env`/`workload`, with the agent's
    /// shipped defaults.
    pub fn shipped(
        env: BuiltinEnv,
        workload: &str,
        objective: &str,
        agent: AgentKind,
        budget: u64,
    ) -> Result<Self, OrchestratorError> {
        Ok(TrialSpec {
            env,
            workload: workload.to_string(),
            objective: objective.to_string(),
            reward: env.objective(workload, objective)?,
            agent,
            hyperparams: dsegym_agents::AgentConfigs::shipped().defaults(agent)?,
            budget,
            step_delay: Duration::ZERO,
            out_dir: None,
        })
    }

    pub fn experiment_id(&self, seed: u64) -> String {
        format!(
            "{}.{}.{}.{}.{}.s{seed}",
            self.env,
            self.workload,
            self.objective,
            self.agent,
            &self.hyperparams.digest()[..12]
        )
    }
}

/// A strict improvement of the best reward, at 0-based `step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub step: u64,
    pub reward: f64,
    pub design: BTreeMap<String, ParamValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub experiment_id: String,
    pub agent: AgentKind,
    pub digest: String,
    pub hyperparams: HyperparamSet,
    pub seed: u64,
    pub budget: u64,
    pub samples_used: u64,
    pub best_reward: f64,
    pub best_design: BTreeMap<String, ParamValue>,
    pub improvements: Vec<Improvement>,
    pub wall_seconds: f64,
    /// Elapsed seconds after each step.
    #[serde(skip)]
    pub step_seconds: Vec<f64>,
    pub trajectory: Option<PathBuf>,
}

impl TrialResult {
    /// The result this trial had after its first `budget` steps, which is
    /// what a trial run with that smaller budget and the same seed returns.
    pub fn at_budget(&self, budget: u64) -> TrialResult {
        let samples = budget.min(self.samples_used);
        let best = self
            .improvements
            .iter()
            .take_while(|i| i.step < samples)
            .last()
            .expect("the first step is always an improvement");
        TrialResult {
            budget,
            samples_used: samples,
            best_reward: best.reward,
            best_design: best.design.clone(),
            improvements: self.improvements.iter().take_while(|i| i.step < samples).cloned().collect(),
            wall_seconds: self.step_seconds.get(samples as usize - 1).copied().unwrap_or(self.wall_seconds),
            step_seconds: self.step_seconds[..(samples as usize).min(self.step_seconds.len())].to_vec(),
            ..self.clone()
        }
    }
}

/// Metadata stamped on every trajectory record of a trial.
#[derive(Debug, Clone)]
pub struct TrialMeta {
    pub experiment_id: String,
    pub env_id: String,
    pub workload_id: String,
    pub seed: u64,
}

/// Builds the environment and agent for `spec` and runs it with `seed`.
///
/// On an environment or agent error the partial trajectory stays on disk
/// next to a `{experiment_id}.error` file holding the message.
pub fn run_trial(spec: &TrialSpec, seed: u64) -> Result<TrialResult, OrchestratorError> {
    if spec.budget == 0 {
        return Err(OrchestratorError::Invalid("sample budget must be at least 1".into()));
    }
    let options = EnvOptions {
        step_delay: spec.step_delay,
        seed,
        ..EnvOptions::default()
    };
    let mut env = spec.env.make_with_reward(&spec.workload, spec.reward.clone(), options)?;
    let mut agent = build_agent(spec.agent, env.space(), &spec.hyperparams, spec.reward.is_signed())?;
    let meta = TrialMeta {
        experiment_id: spec.experiment_id(seed),
        env_id: spec.env.to_string(),
        workload_id: spec.workload.clone(),
        seed,
    };
    run_trial_with(&mut env, agent.as_mut(), &meta, spec.budget, spec.out_dir.as_deref())
}

/// The agent↔environment loop: propose, step, observe, log, for `budget`
/// steps or until every point of the space has been evaluated.
pub fn run_trial_with(
    env: &mut dyn Environment,
    agent: &mut dyn Agent,
    meta: &TrialMeta,
    budget: u64,
    out_dir: Option<&Path>,
) -> Result<TrialResult, OrchestratorError> {
    let space = env.space().clone();
    let mut writer = match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| OrchestratorError::Io(dir.display().to_string(), e))?;
            let path = dir.join(format!("{}.jsonl", meta.experiment_id));
            let _ = std::fs::remove_file(path.with_extension(FAILURE_EXTENSION));
            Some(TrajectoryWriter::create(&path)?)
        }
        None => None,
    };
    // exhaustion is only reachable when the whole space fits in the budget
    let cardinality = space.cardinality_u64().filter(|&c| c <= budget);
    let mut seen: HashSet<DesignPoint> = HashSet::new();

    let mut rng = rng_for(meta.seed, 0);
    let digest = agent.hyperparams().digest();
    let start = Instant::now();
    let mut improvements: Vec<Improvement> = Vec::new();
    let mut step_seconds = Vec::with_capacity(budget.min(1 << 20) as usize);
    env.reset();

    let mut step = 0u64;
    let failure = loop {
        if step >= budget || cardinality.is_some_and(|c| seen.len() as u64 >= c) {
            break None;
        }
        let point = agent.propose(&mut rng);
        let result = match env.step(&point) {
            Ok(r) => r,
            Err(e) => break Some(OrchestratorError::from(e)),
        };
        if let Err(e) = agent.observe(&point, result.reward) {
            break Some(e.into());
        }
        let elapsed = start.elapsed();
        if let Some(w) = writer.as_mut() {
            let record = TrajectoryRecord {
                schema_version: SCHEMA_VERSION,
                experiment_id: meta.experiment_id.clone(),
                env_id: meta.env_id.clone(),
                workload_id: meta.workload_id.clone(),
                agent_type: agent.kind(),
                hyperparam_digest: digest.clone(),
                seed: meta.seed,
                step_index: step,
                design: space.to_map(&point),
                observation: result.observation.metrics.clone(),
                reward: result.reward,
                wall_time_ms: elapsed.as_millis() as u64,
            };
            if let Err(e) = w.append(&record) {
                break Some(e.into());
            }
        }
        if improvements.last().is_none_or(|b| result.reward > b.reward) {
            improvements.push(Improvement {
                step,
                reward: result.reward,
                design: space.to_map(&point),
            });
        }
        if cardinality.is_some() {
            seen.insert(point);
        }
        step_seconds.push(elapsed.as_secs_f64());
        step += 1;
    };

    if let Some(error) = failure {
        let message = format!("step {step}: {error}");
        if let (Some(w), Some(dir)) = (writer.as_mut(), out_dir) {
            let _ = w.sync();
            let sidecar = dir.join(format!("{}.{FAILURE_EXTENSION}", meta.experiment_id));
            std::fs::write(&sidecar, &message).map_err(|e| OrchestratorError::Io(sidecar.display().to_string(), e))?;
        }
        return Err(OrchestratorError::Trial {
            experiment_id: meta.experiment_id.clone(),
            samples_used: step,
            message,
        });
    }
    if let Some(w) = writer.as_mut() {
        w.sync()?;
    }
    let (best_point, best_reward) = agent.best_so_far().expect("budget ≥ 1 guarantees an observation");
    debug_assert_eq!(improvements.last().map(|i| i.reward), Some(best_reward));
    Ok(TrialResult {
        experiment_id: meta.experiment_id.clone(),
        agent: agent.kind(),
        digest,
        hyperparams: agent.hyperparams().clone(),
        seed: meta.seed,
        budget,
        samples_used: step,
        best_reward,
        best_design: space.to_map(best_point),
        improvements,
        wall_seconds: start.elapsed().as_secs_f64(),
        step_seconds,
        trajectory: writer.map(|w| w.path().to_path_buf()),
    })
}
