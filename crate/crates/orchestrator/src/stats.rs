//! Quartiles and reward normalization.

use std::collections::BTreeMap;

use dsegym_core::AgentKind;
use serde::{Deserialize, Serialize};

use crate::OrchestratorError;

/// Quantile `q` of ascending `sorted` values, interpolating linearly at
/// position q·(n−1).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted(values: &[f64]) -> Result<Vec<f64>, OrchestratorError> {
    if values.is_empty() {
        return Err(OrchestratorError::Invalid("quartiles of an empty list".into()));
    }
    if let Some(v) = values.iter().find(|v| v.is_nan()) {
        return Err(OrchestratorError::Invalid(format!("quartiles of {v}")));
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// (Q1, Q3, Q3 − Q1).
pub fn interquartile_range(values: &[f64]) -> Result<(f64, f64, f64), OrchestratorError> {
    let s = sorted(values)?;
    let (q1, q3) = (quantile(&s, 0.25), quantile(&s, 0.75));
    Ok((q1, q3, q3 - q1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl FiveNumber {
    pub fn of(values: &[f64]) -> Result<Self, OrchestratorError> {
        let s = sorted(values)?;
        Ok(FiveNumber {
            min: s[0],
            q1: quantile(&s, 0.25),
            median: quantile(&s, 0.5),
            q3: quantile(&s, 0.75),
            max: s[s.len() - 1],
        })
    }

    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// Mean over trials of best reward ÷ the largest best reward any agent
/// reached at the same budget. All inputs must come from one (env,
/// workload, objective). Negative bests count as 0; a budget whose largest
/// best is not positive normalizes to 0 with a warning.
pub fn mean_normalized_reward(
    results: &[(AgentKind, u64, f64)],
) -> Result<BTreeMap<(AgentKind, u64), f64>, OrchestratorError> {
    let mut max_at: BTreeMap<u64, f64> = BTreeMap::new();
    for &(_, budget, r) in results {
        if !r.is_finite() {
            return Err(OrchestratorError::Invalid(format!("best reward {r} is not finite")));
        }
        let m = max_at.entry(budget).or_insert(f64::NEG_INFINITY);
        *m = m.max(r);
    }
    for (budget, &m) in &max_at {
        if m <= 0.0 {
            log::warn!("every best reward at budget {budget} is ≤ 0; normalized rewards set to 0");
        }
    }
    let mut sums: BTreeMap<(AgentKind, u64), (f64, usize)> = BTreeMap::new();
    for &(agent, budget, r) in results {
        let m = max_at[&budget];
        let v = if m > 0.0 { (r / m).clamp(0.0, 1.0) } else { 0.0 };
        let e = sums.entry((agent, budget)).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    Ok(sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect())
}
