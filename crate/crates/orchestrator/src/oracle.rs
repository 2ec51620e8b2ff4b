use std::collections::BTreeMap;

use dsegym_core::{score, DesignPoint, ParamValue, RewardSpec};
use dsegym_envs::{BuiltinEnv, EnvOptions};
use serde::{Deserialize, Serialize};

use crate::OrchestratorError;

/// Largest space `enumerate_oracle` will walk.
pub const ORACLE_LIMIT: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub points: u64,
    pub best_reward: f64,
    /// First optimal point in enumeration order.
    pub best_design: BTreeMap<String, ParamValue>,
    /// Number of points reaching `best_reward`.
    pub optimal_points: u64,
}

/// Global optimum of `reward` over every point of `env`'s space.
pub fn enumerate_oracle(env: BuiltinEnv, workload: &str, reward: &RewardSpec) -> Result<OracleResult, OrchestratorError> {
    let synthetic = env.make_with_reward(workload, reward.clone(), EnvOptions::default())?;
    let space = env.space();
    let points: Vec<DesignPoint> = space.enumerate(ORACLE_LIMIT)?.collect();
    let mut best: Option<(usize, f64)> = None;
    let mut rewards = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        let r = score(reward, &synthetic.observe(p)?)?;
        if best.is_none_or(|(_, b)| r > b) {
            best = Some((i, r));
        }
        rewards.push(r);
    }
    let (i, best_reward) = best.ok_or_else(|| OrchestratorError::Invalid("empty space".into()))?;
    Ok(OracleResult {
        points: points.len() as u64,
        best_reward,
        best_design: space.to_map(&points[i]),
        optimal_points: rewards.iter().filter(|&&r| r == best_reward).count() as u64,
    })
}
