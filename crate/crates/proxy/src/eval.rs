use std::collections::BTreeMap;
use std::hint::black_box;
use std::time::{Duration, Instant};

use dsegym_core::{rng_for, AgentKind, DesignPoint, Environment, ParameterSpace};
use dsegym_dataset::Dataset;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::forest::{training_rows, ForestParams, RandomForestModel};
use crate::ProxyError;

pub fn rmse(predicted: &[f64], actual: &[f64]) -> f64 {
    assert_eq!(predicted.len(), actual.len());
    let se: f64 = predicted.iter().zip(actual).map(|(p, a)| (p - a) * (p - a)).sum();
    (se / actual.len() as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyEvalReport {
    pub target: String,
    pub rmse: f64,
    /// RMSE as a percentage of the test actuals' range; absent when the
    /// range is zero.
    pub normalized_rmse_percent: Option<f64>,
    pub n_train: usize,
    pub n_test: usize,
    pub train_provenance: BTreeMap<AgentKind, usize>,
    pub test_provenance: BTreeMap<AgentKind, usize>,
}

/// Scores `model` on the feasible records of `test`.
pub fn evaluate_rmse(model: &RandomForestModel, test: &Dataset) -> Result<ProxyEvalReport, ProxyError> {
    let (x, actual) = training_rows(test, &model.space, &model.target)?;
    if actual.is_empty() {
        return Err(ProxyError::Empty);
    }
    let predicted: Vec<f64> = x.iter().map(|v| model.predict_encoded(v)).collect();
    let error = rmse(&predicted, &actual);
    let lo = actual.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = actual.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut test_provenance = BTreeMap::new();
    for r in test.records().iter().filter(|r| !r.observation.is_empty()) {
        *test_provenance.entry(r.agent_type).or_insert(0) += 1;
    }
    Ok(ProxyEvalReport {
        target: model.target.clone(),
        rmse: error,
        normalized_rmse_percent: (hi > lo).then(|| error / (hi - lo) * 100.0),
        n_train: model.n_train,
        n_test: actual.len(),
        train_provenance: model.provenance.clone(),
        test_provenance,
    })
}

/// The random-search grid: n_trees × max_depth × min_samples_leaf ×
/// feature_subsample, 108 configurations, always bootstrapped.
pub fn search_grid() -> Vec<ForestParams> {
    let mut out = Vec::with_capacity(108);
    for n_trees in [10, 50, 100] {
        for max_depth in [Some(4), Some(8), Some(16), None] {
            for min_samples_leaf in [1, 5, 20] {
                for feature_subsample in [0.5, 0.8, 1.0] {
                    out.push(ForestParams {
                        n_trees,
                        max_depth,
                        min_samples_leaf,
                        feature_subsample,
                        bootstrap: true,
                    });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub params: ForestParams,
    pub model: RandomForestModel,
    pub validation_rmse: f64,
    /// Every evaluated configuration with its validation RMSE, in order.
    pub evaluated: Vec<(ForestParams, f64)>,
}

/// Random hyperparameter search: `budget` distinct grid configurations
/// (all of them if the budget exceeds the grid), each trained on `train`
/// and scored on `validation`. The first configuration reaching the lowest
/// RMSE wins.
pub fn hyperparam_search(
    train: &Dataset,
    validation: &Dataset,
    space: &ParameterSpace,
    target: &str,
    budget: usize,
    seed: u64,
) -> Result<SearchOutcome, ProxyError> {
    if budget == 0 {
        return Err(ProxyError::Invalid("search budget must be at least 1".into()));
    }
    let grid = search_grid();
    let mut rng = rng_for(seed, 0);
    let picks = index::sample(&mut rng, grid.len(), budget.min(grid.len()));
    let mut best: Option<(ForestParams, RandomForestModel, f64)> = None;
    let mut evaluated = Vec::with_capacity(picks.len());
    for (k, i) in picks.into_iter().enumerate() {
        let params = grid[i];
        let model = RandomForestModel::train(train, space, target, params, dsegym_core::derive_seed(seed, k as u64 + 1))?;
        let score = evaluate_rmse(&model, validation)?.rmse;
        evaluated.push((params, score));
        if best.as_ref().map_or(true, |b| score < b.2) {
            best = Some((params, model, score));
        }
    }
    let (params, model, validation_rmse) = best.expect("budget ≥ 1");
    Ok(SearchOutcome {
        params,
        model,
        validation_rmse,
        evaluated,
    })
}

/// Fastest of `rounds` timed passes of `f` over `points`.
pub fn time_pass<F: FnMut(&DesignPoint)>(points: &[DesignPoint], rounds: usize, mut f: F) -> Duration {
    (0..rounds.max(1))
        .map(|_| {
            let start = Instant::now();
            for p in points {
                f(p);
            }
            start.elapsed()
        })
        .min()
        .expect("at least one round")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedReport {
    pub queries: usize,
    pub env_seconds: f64,
    pub model_seconds: f64,
    /// env_seconds / model_seconds.
    pub speedup: f64,
}

/// Passes over the model when timing it; the fastest is kept.
pub const MODEL_ROUNDS: usize = 5;

/// Times one pass of `env.step` and the model's predictions over the same
/// design points.
pub fn speed_benchmark(
    model: &RandomForestModel,
    env: &mut dyn Environment,
    points: &[DesignPoint],
) -> Result<SpeedReport, ProxyError> {
    if points.is_empty() {
        return Err(ProxyError::Empty);
    }
    let encoded = points
        .iter()
        .map(|p| model.space.encode(p))
        .collect::<Result<Vec<_>, _>>()?;
    env.reset();
    let start = Instant::now();
    for p in points {
        black_box(env.step(p)?);
    }
    let env_time = start.elapsed();
    let mut i = 0;
    let model_time = time_pass(points, MODEL_ROUNDS, |_| {
        black_box(model.predict_encoded(black_box(&encoded[i % encoded.len()])));
        i += 1;
    });
    let (e, m) = (env_time.as_secs_f64(), model_time.as_secs_f64().max(1e-9));
    Ok(SpeedReport {
        queries: points.len(),
        env_seconds: e,
        model_seconds: m,
        speedup: e / m,
    })
}
