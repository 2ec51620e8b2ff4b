use std::collections::BTreeMap;
use std::path::Path;

use dsegym_core::{derive_seed, rng_for, AgentKind, DesignPoint, ParamValue, ParameterSpace};
use dsegym_dataset::Dataset;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::tree::{train_tree, RegressionTree, TreeParams};
use crate::ProxyError;

/// Version of the model file layout.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub feature_subsample: f64,
    /// Train each tree on a with-replacement resample of n rows.
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 50,
            max_depth: None,
            min_samples_leaf: 1,
            feature_subsample: 0.8,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn tree(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
            feature_subsample: self.feature_subsample,
        }
    }

    pub fn validate(&self) -> Result<(), ProxyError> {
        if self.n_trees == 0 {
            return Err(ProxyError::Invalid("n_trees must be at least 1".into()));
        }
        self.tree().validate()
    }
}

/// Encoded feature rows and targets for `target`.
///
/// Infeasible records (no metrics at all) are skipped; a feasible record
/// without the target metric is an error.
pub fn training_rows(
    dataset: &Dataset,
    space: &ParameterSpace,
    target: &str,
) -> Result<(Vec<Vec<f64>>, Vec<f64>), ProxyError> {
    let mut x = Vec::with_capacity(dataset.len());
    let mut y = Vec::with_capacity(dataset.len());
    for r in dataset.records() {
        if r.observation.is_empty() {
            continue;
        }
        let v = *r.observation.get(target).ok_or_else(|| ProxyError::MissingMetric {
            metric: target.to_string(),
            experiment: r.experiment_id.clone(),
            step: r.step_index,
        })?;
        x.push(space.encode(&space.from_map(&r.design)?)?);
        y.push(v);
    }
    Ok((x, y))
}

/// One random-forest regressor for a single metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    pub format_version: u32,
    pub target: String,
    /// Feature layout: the parameter space whose `encode` produces inputs.
    pub space: ParameterSpace,
    pub params: ForestParams,
    pub seed: u64,
    pub n_train: usize,
    /// Training records per agent type.
    pub provenance: BTreeMap<AgentKind, usize>,
    /// Smallest and largest training target.
    pub target_range: (f64, f64),
    pub trees: Vec<RegressionTree>,
}

impl RandomForestModel {
    /// Trains `n_trees` trees. Tree `i` draws its bootstrap sample and
    /// feature subsets from its own stream derived from `(seed, i)`, so the
    /// forest is identical however the trees are scheduled.
    pub fn train(
        dataset: &Dataset,
        space: &ParameterSpace,
        target: &str,
        params: ForestParams,
        seed: u64,
    ) -> Result<Self, ProxyError> {
        params.validate()?;
        let (x, y) = training_rows(dataset, space, target)?;
        if x.is_empty() {
            return Err(ProxyError::Empty);
        }
        let trees = fit_trees(&x, &y, params, seed)?;
        let mut provenance = BTreeMap::new();
        for r in dataset.records().iter().filter(|r| !r.observation.is_empty()) {
            *provenance.entry(r.agent_type).or_insert(0) += 1;
        }
        let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(RandomForestModel {
            format_version: MODEL_FORMAT_VERSION,
            target: target.to_string(),
            space: space.clone(),
            params,
            seed,
            n_train: y.len(),
            provenance,
            target_range: (lo, hi),
            trees,
        })
    }

    /// Mean of the tree predictions.
    pub fn predict_encoded(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn predict(&self, point: &DesignPoint) -> Result<f64, ProxyError> {
        Ok(self.predict_encoded(&self.space.encode(point)?))
    }

    pub fn predict_design(&self, design: &BTreeMap<String, ParamValue>) -> Result<f64, ProxyError> {
        self.predict(&self.space.from_map(design)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("models serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, ProxyError> {
        let m: RandomForestModel = serde_json::from_str(text).map_err(|e| ProxyError::Format(e.to_string()))?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(ProxyError::Format(format!(
                "model format {} (expected {MODEL_FORMAT_VERSION})",
                m.format_version
            )));
        }
        if m.trees.is_empty() {
            return Err(ProxyError::Format("model has no trees".into()));
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ProxyError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| ProxyError::Io(path.display().to_string(), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ProxyError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ProxyError::Io(path.display().to_string(), e))?;
        Self::from_json(&text)
    }
}

fn fit_trees(x: &[Vec<f64>], y: &[f64], params: ForestParams, seed: u64) -> Result<Vec<RegressionTree>, ProxyError> {
    let n = y.len();
    (0..params.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(derive_seed(seed, i as u64), 0);
            if params.bootstrap {
                let rows: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
                let bx: Vec<Vec<f64>> = rows.iter().map(|&r| x[r].clone()).collect();
                let by: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
                train_tree(&bx, &by, params.tree(), &mut rng)
            } else {
                train_tree(x, y, params.tree(), &mut rng)
            }
        })
        .collect()
}
