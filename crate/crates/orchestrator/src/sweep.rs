use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use dsegym_agents::{AgentConfigs, HyperparamSet};
use dsegym_core::{AgentKind, ParamValue, RewardSpec};
use dsegym_envs::BuiltinEnv;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::stats::{mean_normalized_reward, FiveNumber};
use crate::trial::{run_trial, TrialResult, TrialSpec};
use crate::OrchestratorError;

/// Grid configurations × seeds × budgets on one (env, workload, objective).
#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub env: BuiltinEnv,
    pub workload: String,
    pub objective: String,
    pub reward: RewardSpec,
    /// Complete hyperparameter sets, one per configuration.
    pub configs: Vec<(AgentKind, HyperparamSet)>,
    pub budgets: Vec<u64>,
    pub seeds: Vec<u64>,
    pub step_delay: Duration,
    pub out_dir: Option<PathBuf>,
    /// Worker threads.
    pub parallelism: usize,
}

impl SweepPlan {
    /// Plan over the grids of `agents` in `configs`, with a shipped objective.
    pub fn from_grids(
        env: BuiltinEnv,
        workload: &str,
        objective: &str,
        configs: &AgentConfigs,
        agents: &[AgentKind],
    ) -> Result<Self, OrchestratorError> {
        let mut grid = Vec::new();
        for &agent in agents {
            grid.extend(configs.grid(agent)?.into_iter().map(|h| (agent, h)));
        }
        Ok(SweepPlan {
            env,
            workload: workload.to_string(),
            objective: objective.to_string(),
            reward: env.objective(workload, objective)?,
            configs: grid,
            budgets: vec![1000],
            seeds: vec![0],
            step_delay: Duration::ZERO,
            out_dir: None,
            parallelism: 1,
        })
    }

    pub fn validate(&self) -> Result<(), OrchestratorError> {
        if self.configs.is_empty() {
            return Err(OrchestratorError::Invalid("sweep grid is empty".into()));
        }
        if self.seeds.is_empty() {
            return Err(OrchestratorError::Invalid("sweep needs at least one seed".into()));
        }
        if self.budgets.is_empty() || self.budgets.contains(&0) {
            return Err(OrchestratorError::Invalid("sample budgets must be at least 1".into()));
        }
        if self.parallelism == 0 {
            return Err(OrchestratorError::Invalid("parallelism must be at least 1".into()));
        }
        Ok(())
    }

    fn spec(&self, agent: AgentKind, hyperparams: &HyperparamSet, budget: u64) -> TrialSpec {
        TrialSpec {
            env: self.env,
            workload: self.workload.clone(),
            objective: self.objective.clone(),
            reward: self.reward.clone(),
            agent,
            hyperparams: hyperparams.clone(),
            budget,
            step_delay: self.step_delay,
            out_dir: self.out_dir.clone(),
        }
    }
}

/// Best rewards of one configuration at one budget, one per seed that
/// completed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub agent: AgentKind,
    pub digest: String,
    pub hyperparams: String,
    pub budget: u64,
    pub seeds: Vec<u64>,
    pub best_rewards: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestTrial {
    pub digest: String,
    pub hyperparams: String,
    pub seed: u64,
    pub reward: f64,
    pub design: BTreeMap<String, ParamValue>,
}

/// Spread of best rewards over every configuration and seed of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSummary {
    pub agent: AgentKind,
    pub budget: u64,
    pub trials: usize,
    pub five: FiveNumber,
    pub iqr: f64,
    pub mean_normalized_reward: f64,
    pub best: BestTrial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRow {
    pub experiment_id: String,
    pub agent: AgentKind,
    pub digest: String,
    pub seed: u64,
    pub message: String,
}

/// Everything a sweep computes from rewards. Wall-clock measurements live
/// in [`TimingRow`]s so that the summary is a pure function of the plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub env: String,
    pub workload: String,
    pub objective: String,
    pub budgets: Vec<u64>,
    pub seeds: Vec<u64>,
    pub configs: Vec<ConfigSummary>,
    pub agents: Vec<AgentSummary>,
    pub failures: Vec<FailureRow>,
}

impl SweepSummary {
    pub fn agent(&self, agent: AgentKind, budget: u64) -> Option<&AgentSummary> {
        self.agents.iter().find(|a| a.agent == agent && a.budget == budget)
    }
}

/// Time-to-completion of one agent's trials at one budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub agent: AgentKind,
    pub budget: u64,
    pub trials: usize,
    pub mean_seconds: f64,
    pub median_seconds: f64,
}

/// The persisted form of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub summary: SweepSummary,
    pub timings: Vec<TimingRow>,
}

impl SweepReport {
    pub const FILE: &'static str = "sweep.json";

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), OrchestratorError> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("reports serialize");
        std::fs::write(path, text).map_err(|e| OrchestratorError::Io(path.display().to_string(), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, OrchestratorError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| OrchestratorError::Io(path.display().to_string(), e))?;
        serde_json::from_str(&text).map_err(|e| OrchestratorError::Invalid(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub summary: SweepSummary,
    pub timings: Vec<TimingRow>,
    /// Successful trials at the largest budget, sorted by (agent, digest, seed).
    pub results: Vec<TrialResult>,
}

impl SweepOutcome {
    pub fn report(&self) -> SweepReport {
        SweepReport {
            summary: self.summary.clone(),
            timings: self.timings.clone(),
        }
    }
}

/// Runs every (configuration, seed) once at the largest budget and reads
/// the smaller budgets off each trajectory's prefix. Agents never see the
/// budget, so a prefix is exactly the trial a smaller budget would run.
pub fn run_sweep(plan: &SweepPlan) -> Result<SweepOutcome, OrchestratorError> {
    plan.validate()?;
    let max_budget = *plan.budgets.iter().max().expect("validated");
    let mut budgets = plan.budgets.clone();
    budgets.sort_unstable();
    budgets.dedup();

    let tasks: Vec<(TrialSpec, u64)> = plan
        .configs
        .iter()
        .flat_map(|(agent, h)| plan.seeds.iter().map(move |&s| (plan.spec(*agent, h, max_budget), s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.parallelism)
        .build()
        .map_err(|e| OrchestratorError::Invalid(format!("thread pool: {e}")))?;
    let outcomes: Vec<(TrialSpec, u64, Result<TrialResult, OrchestratorError>)> = pool.install(|| {
        tasks
            .into_par_iter()
            .map(|(spec, seed)| {
                let r = run_trial(&spec, seed);
                if let Err(e) = &r {
                    log::warn!("{}: {e}", spec.experiment_id(seed));
                }
                (spec, seed, r)
            })
            .collect()
    });

    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (spec, seed, outcome) in outcomes {
        match outcome {
            Ok(r) => results.push(r),
            Err(e) => failures.push(FailureRow {
                experiment_id: spec.experiment_id(seed),
                agent: spec.agent,
                digest: spec.hyperparams.digest(),
                seed,
                message: e.to_string(),
            }),
        }
    }
    results.sort_by(|a, b| (a.agent, &a.digest, a.seed).cmp(&(b.agent, &b.digest, b.seed)));
    failures.sort_by(|a, b| (a.agent, &a.digest, a.seed).cmp(&(b.agent, &b.digest, b.seed)));
    let (summary, timings) = summarize(plan, &budgets, &results, failures)?;
    Ok(SweepOutcome {
        summary,
        timings,
        results,
    })
}

/// Folds sorted trial results into per-config and per-agent statistics.
fn summarize(
    plan: &SweepPlan,
    budgets: &[u64],
    results: &[TrialResult],
    failures: Vec<FailureRow>,
) -> Result<(SweepSummary, Vec<TimingRow>), OrchestratorError> {
    let mut configs = Vec::new();
    let mut agents = Vec::new();
    let mut timings = Vec::new();
    for &budget in budgets {
        let at: Vec<TrialResult> = results.iter().map(|r| r.at_budget(budget)).collect();

        let mut by_config: BTreeMap<(AgentKind, &str), Vec<&TrialResult>> = BTreeMap::new();
        for r in &at {
            by_config.entry((r.agent, &r.digest)).or_default().push(r);
        }
        for ((agent, digest), trials) in &by_config {
            configs.push(ConfigSummary {
                agent: *agent,
                digest: digest.to_string(),
                hyperparams: trials[0].hyperparams.to_string(),
                budget,
                seeds: trials.iter().map(|t| t.seed).collect(),
                best_rewards: trials.iter().map(|t| t.best_reward).collect(),
            });
        }

        let triples: Vec<(AgentKind, u64, f64)> = at.iter().map(|r| (r.agent, budget, r.best_reward)).collect();
        let normalized = mean_normalized_reward(&triples)?;
        let mut by_agent: BTreeMap<AgentKind, Vec<&TrialResult>> = BTreeMap::new();
        for r in &at {
            by_agent.entry(r.agent).or_default().push(r);
        }
        for (agent, trials) in by_agent {
            let rewards: Vec<f64> = trials.iter().map(|t| t.best_reward).collect();
            let five = FiveNumber::of(&rewards)?;
            // first of equal bests in (digest, seed) order
            let best = trials
                .iter()
                .fold(None::<&TrialResult>, |b, t| match b {
                    Some(b) if t.best_reward <= b.best_reward => Some(b),
                    _ => Some(t),
                })
                .expect("non-empty group");
            agents.push(AgentSummary {
                agent,
                budget,
                trials: trials.len(),
                five,
                iqr: five.iqr(),
                mean_normalized_reward: normalized[&(agent, budget)],
                best: BestTrial {
                    digest: best.digest.clone(),
                    hyperparams: best.hyperparams.to_string(),
                    seed: best.seed,
                    reward: best.best_reward,
                    design: best.best_design.clone(),
                },
            });
            let seconds: Vec<f64> = trials.iter().map(|t| t.wall_seconds).collect();
            timings.push(TimingRow {
                agent,
                budget,
                trials: trials.len(),
                mean_seconds: seconds.iter().sum::<f64>() / seconds.len() as f64,
                median_seconds: FiveNumber::of(&seconds)?.median,
            });
        }
    }
    let summary = SweepSummary {
        env: plan.env.to_string(),
        workload: plan.workload.clone(),
        objective: plan.objective.clone(),
        budgets: budgets.to_vec(),
        seeds: plan.seeds.clone(),
        configs,
        agents,
        failures,
    };
    Ok((summary, timings))
}
