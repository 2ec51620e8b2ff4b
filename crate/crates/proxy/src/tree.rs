//! CART regression trees.

use dsegym_core::TrialRng;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::ProxyError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until the other stopping rules apply.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Fraction of features considered at each node, in (0, 1].
    pub feature_subsample: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_leaf: 1,
            feature_subsample: 1.0,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<(), ProxyError> {
        if self.min_samples_leaf == 0 {
            return Err(ProxyError::Invalid("min_samples_leaf must be at least 1".into()));
        }
        if !(self.feature_subsample > 0.0 && self.feature_subsample <= 1.0) {
            return Err(ProxyError::Invalid(format!(
                "feature_subsample {} is outside (0, 1]",
                self.feature_subsample
            )));
        }
        Ok(())
    }

    fn features_per_node(&self, dim: usize) -> usize {
        ((self.feature_subsample * dim as f64).ceil() as usize).clamp(1, dim.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[feature] < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
        samples: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub params: TreeParams,
    /// Root first.
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value, .. } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] < threshold { left } else { right },
            }
        }
    }

    pub fn leaves(&self) -> impl Iterator<Item = (f64, usize)> + '_ {
        self.nodes.iter().filter_map(|n| match *n {
            Node::Leaf { value, samples } => Some((value, samples)),
            Node::Split { .. } => None,
        })
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    params: TreeParams,
    dim: usize,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    /// Leaf holding the mean target, clamped so rounding never leaves the
    /// rows' range (and equal targets are reproduced exactly).
    fn leaf(&mut self, rows: &[usize]) -> usize {
        let (lo, hi) = self.range(rows);
        let mean = rows.iter().map(|&i| self.y[i]).sum::<f64>() / rows.len() as f64;
        let value = mean.clamp(lo, hi);
        self.nodes.push(Node::Leaf {
            value,
            samples: rows.len(),
        });
        self.nodes.len() - 1
    }

    fn range(&self, rows: &[usize]) -> (f64, f64) {
        rows.iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| (lo.min(self.y[i]), hi.max(self.y[i])))
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize, rng: &mut TrialRng) -> usize {
        let min_leaf = self.params.min_samples_leaf;
        let (lo, hi) = self.range(rows.as_slice());
        if self.params.max_depth.is_some_and(|d| depth >= d) || rows.len() < 2 * min_leaf || lo == hi {
            return self.leaf(&rows);
        }
        match self.best_split(&rows, rng) {
            None => self.leaf(&rows),
            Some((feature, threshold)) => {
                let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
                    rows.iter().partition(|&&i| self.x[i][feature] < threshold);
                let at = self.nodes.len();
                self.nodes.push(Node::Leaf { value: 0.0, samples: 0 });
                let left = self.grow(left_rows, depth + 1, rng);
                let right = self.grow(right_rows, depth + 1, rng);
                self.nodes[at] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
                at
            }
        }
    }

    /// Maximizes the drop in summed squared error over a random feature
    /// subset; earlier features and positions win ties. Any node with
    /// distinct feature values gets a split, even when rounding makes the
    /// computed gain zero. Returns (feature, threshold).
    fn best_split(&self, rows: &[usize], rng: &mut TrialRng) -> Option<(usize, f64)> {
        let n = rows.len();
        let min_leaf = self.params.min_samples_leaf;
        let mut features = index::sample(rng, self.dim, self.params.features_per_node(self.dim)).into_vec();
        features.sort_unstable();

        // centred targets keep the sums of squares well conditioned
        let mean = rows.iter().map(|&i| self.y[i]).sum::<f64>() / n as f64;
        let yc = |i: usize| self.y[i] - mean;
        let total: f64 = rows.iter().map(|&i| yc(i)).sum();
        let total_sq: f64 = rows.iter().map(|&i| yc(i) * yc(i)).sum();
        let parent_sse = total_sq - total * total / n as f64;

        let mut best: Option<(usize, f64, f64)> = None;
        let mut sorted = rows.to_vec();
        for &f in &features {
            sorted.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let (mut s, mut sq) = (0.0, 0.0);
            for k in 0..n - 1 {
                let yi = yc(sorted[k]);
                s += yi;
                sq += yi * yi;
                let nl = k + 1;
                let nr = n - nl;
                let (a, b) = (self.x[sorted[k]][f], self.x[sorted[k + 1]][f]);
                if nl < min_leaf || nr < min_leaf || a == b {
                    continue;
                }
                let sse_l = sq - s * s / nl as f64;
                let (sr, sqr) = (total - s, total_sq - sq);
                let sse_r = sqr - sr * sr / nr as f64;
                let gain = parent_sse - sse_l - sse_r;
                if best.as_ref().map_or(true, |b| gain > b.2) {
                    let mut t = 0.5 * (a + b);
                    if t <= a {
                        t = b;
                    }
                    best = Some((f, t, gain));
                }
            }
        }
        best.map(|(f, t, _)| (f, t))
    }
}

/// Fits one tree by greedy recursive splitting.
///
/// A node becomes a leaf at `max_depth`, when a split would leave fewer than
/// `min_samples_leaf` rows on a side, when its targets are all equal, or
/// when no split reduces the squared error. Thresholds sit midway between
/// adjacent distinct feature values.
pub fn train_tree(x: &[Vec<f64>], y: &[f64], params: TreeParams, rng: &mut TrialRng) -> Result<RegressionTree, ProxyError> {
    params.validate()?;
    if x.is_empty() {
        return Err(ProxyError::Empty);
    }
    if x.len() != y.len() {
        return Err(ProxyError::Invalid(format!("{} rows for {} targets", x.len(), y.len())));
    }
    if x.len() < params.min_samples_leaf {
        return Err(ProxyError::Invalid(format!(
            "{} rows cannot fill a leaf of {}",
            x.len(),
            params.min_samples_leaf
        )));
    }
    let dim = x[0].len();
    if x.iter().any(|r| r.len() != dim) {
        return Err(ProxyError::Invalid("feature vectors differ in length".into()));
    }
    if let Some(v) = y.iter().find(|v| !v.is_finite()) {
        return Err(ProxyError::Invalid(format!("target {v} is not finite")));
    }
    let mut b = Builder {
        x,
        y,
        params,
        dim,
        nodes: Vec::new(),
    };
    if dim == 0 {
        b.leaf(&(0..y.len()).collect::<Vec<_>>());
    } else {
        b.grow((0..y.len()).collect(), 0, rng);
    }
    Ok(RegressionTree { params, nodes: b.nodes })
}
