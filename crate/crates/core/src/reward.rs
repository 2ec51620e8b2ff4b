//! Objective definitions and the reward formulas of the built-in gyms.
//!
//! Internally every reward follows a "higher is better" convention. The
//! budget-distance objective is lower-is-better, so [`score`] negates it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::Observation;

/// Reward returned when an observation hits its target exactly.
pub const DEFAULT_REWARD_CAP: f64 = 1e9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RewardError {
    #[error("invalid observation: {0}")]
    InvalidObservation(String),
    #[error("joint reward needs at least one per-metric reward")]
    EmptyRewards,
    #[error("value must be strictly positive, got {0}")]
    NonPositive(f64),
    #[error("misaligned inputs: {observed} observed, {budgets} budgets, {weights} weights")]
    LengthMismatch {
        observed: usize,
        budgets: usize,
        weights: usize,
    },
    #[error("observation is missing metric `{0}`")]
    MissingMetric(String),
    #[error("invalid reward spec: {0}")]
    InvalidSpec(String),
}

/// `target / |target - observed|`, capped at `cap`.
///
/// The cap kicks in whenever `|target - observed| < target / cap`, which
/// includes the exact-match singularity.
pub fn compute_target_reward(target: f64, observed: f64, cap: f64) -> Result<f64, RewardError> {
    if !observed.is_finite() {
        return Err(RewardError::InvalidObservation(format!("observed value {observed}")));
    }
    if !(target > 0.0 && target.is_finite()) {
        return Err(RewardError::NonPositive(target));
    }
    if !(cap > 0.0) {
        return Err(RewardError::NonPositive(cap));
    }
    let distance = (target - observed).abs();
    if distance * cap <= target {
        return Ok(cap);
    }
    Ok((target / distance).min(cap))
}

/// Geometric mean of per-metric rewards.
pub fn compute_joint_reward(rewards: &[f64]) -> Result<f64, RewardError> {
    if rewards.is_empty() {
        return Err(RewardError::EmptyRewards);
    }
    if rewards.len() == 1 {
        return check_positive(rewards[0]);
    }
    let mut log_sum = 0.0;
    for &r in rewards {
        log_sum += check_positive(r)?.ln();
    }
    Ok((log_sum / rewards.len() as f64).exp())
}

/// Signed weighted relative distance to budget: `sum(w * (D - B) / B)`.
///
/// Lower is better; negative values mean the design is under budget overall.
pub fn compute_budget_distance(
    observed: &[f64],
    budgets: &[f64],
    weights: &[f64],
) -> Result<f64, RewardError> {
    if observed.len() != budgets.len() || budgets.len() != weights.len() || observed.is_empty() {
        return Err(RewardError::LengthMismatch {
            observed: observed.len(),
            budgets: budgets.len(),
            weights: weights.len(),
        });
    }
    let mut total = 0.0;
    for ((&d, &b), &w) in observed.iter().zip(budgets).zip(weights) {
        if !d.is_finite() {
            return Err(RewardError::InvalidObservation(format!("observed value {d}")));
        }
        check_positive(b)?;
        check_positive(w)?;
        total += w * (d - b) / b;
    }
    Ok(total)
}

/// `1 / x`. The caller decides which quantity `x` is.
pub fn compute_reciprocal_reward(x: f64) -> Result<f64, RewardError> {
    Ok(1.0 / check_positive(x)?)
}

fn check_positive(x: f64) -> Result<f64, RewardError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(RewardError::NonPositive(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub metric: String,
    pub budget: f64,
    #[serde(default = "default_weight")]
    pub weight: f64,
}

fn default_weight() -> f64 {
    1.0
}

fn default_cap() -> f64 {
    DEFAULT_REWARD_CAP
}

/// How an observation maps to a scalar reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode")]
pub enum RewardSpec {
    /// Closeness to one or more targets; several targets combine by geometric mean.
    TargetProximity {
        targets: Vec<Target>,
        #[serde(default = "default_cap")]
        cap: f64,
    },
    /// Negated distance to budget.
    BudgetDistance { budgets: Vec<Budget> },
    /// Reciprocal of one metric.
    Reciprocal { metric: String },
}

impl RewardSpec {
    pub fn target(metric: impl Into<String>, value: f64) -> Self {
        RewardSpec::TargetProximity {
            targets: vec![Target {
                metric: metric.into(),
                value,
            }],
            cap: DEFAULT_REWARD_CAP,
        }
    }

    pub fn validate(&self) -> Result<(), RewardError> {
        let bad = |msg: String| Err(RewardError::InvalidSpec(msg));
        match self {
            RewardSpec::TargetProximity { targets, cap } => {
                if targets.is_empty() {
                    return bad("no targets".into());
                }
                if !(*cap > 0.0 && cap.is_finite()) {
                    return bad(format!("cap must be positive, got {cap}"));
                }
                for t in targets {
                    if !(t.value > 0.0 && t.value.is_finite()) {
                        return bad(format!("target for `{}` must be positive", t.metric));
                    }
                }
            }
            RewardSpec::BudgetDistance { budgets } => {
                if budgets.is_empty() {
                    return bad("no budgets".into());
                }
                for b in budgets {
                    if !(b.budget > 0.0 && b.budget.is_finite()) {
                        return bad(format!("budget for `{}` must be positive", b.metric));
                    }
                    if !(b.weight > 0.0 && b.weight.is_finite()) {
                        return bad(format!("weight for `{}` must be positive", b.metric));
                    }
                }
            }
            RewardSpec::Reciprocal { metric } => {
                if metric.is_empty() {
                    return bad("empty reciprocal metric".into());
                }
            }
        }
        Ok(())
    }

    /// Metric names this objective reads.
    pub fn metrics(&self) -> Vec<&str> {
        match self {
            RewardSpec::TargetProximity { targets, .. } => {
                targets.iter().map(|t| t.metric.as_str()).collect()
            }
            RewardSpec::BudgetDistance { budgets } => {
                budgets.iter().map(|b| b.metric.as_str()).collect()
            }
            RewardSpec::Reciprocal { metric } => vec![metric.as_str()],
        }
    }

    /// True when raw scores can be negative (budget distance).
    pub fn is_signed(&self) -> bool {
        matches!(self, RewardSpec::BudgetDistance { .. })
    }
}

/// Scalar reward for `obs` under `spec`, higher is better.
///
/// Infeasible observations score 0; the environment flags them in its step info.
pub fn score(spec: &RewardSpec, obs: &Observation) -> Result<f64, RewardError> {
    if !obs.valid {
        return Ok(0.0);
    }
    let metric = |name: &str| {
        obs.get(name)
            .ok_or_else(|| RewardError::MissingMetric(name.to_string()))
    };
    match spec {
        RewardSpec::TargetProximity { targets, cap } => {
            let mut rewards = Vec::with_capacity(targets.len());
            for t in targets {
                rewards.push(compute_target_reward(t.value, metric(&t.metric)?, *cap)?);
            }
            compute_joint_reward(&rewards)
        }
        RewardSpec::BudgetDistance { budgets } => {
            let mut observed = Vec::with_capacity(budgets.len());
            for b in budgets {
                observed.push(metric(&b.metric)?);
            }
            let limits: Vec<f64> = budgets.iter().map(|b| b.budget).collect();
            let weights: Vec<f64> = budgets.iter().map(|b| b.weight).collect();
            Ok(-compute_budget_distance(&observed, &limits, &weights)?)
        }
        RewardSpec::Reciprocal { metric: name } => compute_reciprocal_reward(metric(name)?),
    }
}
