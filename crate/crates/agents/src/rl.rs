//! Score-function policy gradient over a factorized categorical policy.
//!
//! One logit vector per parameter; a design is drawn by sampling every
//! parameter independently from its softmax. Each episode is a single step,
//! so the reward of one proposal is the whole return.

use dsegym_core::{AgentKind, DesignPoint, ParameterSpace, TrialRng};
use rand::distributions::{Distribution, WeightedIndex};

use crate::{check_positive, check_probability, Agent, AgentError, BestTracker, HyperparamSet};

#[derive(Debug, Clone, PartialEq)]
pub struct RlConfig {
    /// η.
    pub learning_rate: f64,
    /// w_H.
    pub entropy_weight: f64,
    /// EMA decay of the reward baseline.
    pub baseline_decay: f64,
    pub batch_size: usize,
}

impl Default for RlConfig {
    fn default() -> Self {
        RlConfig {
            learning_rate: 0.05,
            entropy_weight: 0.01,
            baseline_decay: 0.9,
            batch_size: 8,
        }
    }
}

const KEYS: [&str; 4] = ["learning_rate", "entropy_weight", "baseline_decay", "batch_size"];

impl RlConfig {
    pub fn from_hyperparams(h: &HyperparamSet) -> Result<Self, AgentError> {
        h.check_keys(&KEYS)?;
        let c = RlConfig {
            learning_rate: h.f64("learning_rate")?,
            entropy_weight: h.f64("entropy_weight")?,
            baseline_decay: h.f64("baseline_decay")?,
            batch_size: h.usize("batch_size")?,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn to_hyperparams(&self) -> HyperparamSet {
        HyperparamSet::new()
            .with("learning_rate", self.learning_rate)
            .with("entropy_weight", self.entropy_weight)
            .with("baseline_decay", self.baseline_decay)
            .with("batch_size", self.batch_size)
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        check_positive("learning_rate", self.learning_rate)?;
        if !(self.entropy_weight >= 0.0 && self.entropy_weight.is_finite()) {
            return Err(AgentError::Hyperparam(format!(
                "entropy_weight = {} must be non-negative",
                self.entropy_weight
            )));
        }
        check_probability("baseline_decay", self.baseline_decay)?;
        if self.batch_size == 0 {
            return Err(AgentError::Hyperparam("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}

#[derive(Debug, Clone)]
pub struct RlState {
    pub config: RlConfig,
    logits: Vec<Vec<f64>>,
    baseline: Option<f64>,
}

impl RlState {
    /// All logits start at 0.
    pub fn new(space: &ParameterSpace, config: RlConfig) -> Result<Self, AgentError> {
        config.validate()?;
        Ok(RlState {
            logits: space.domain_sizes().into_iter().map(|n| vec![0.0; n]).collect(),
            config,
            baseline: None,
        })
    }

    pub fn logits(&self) -> &[Vec<f64>] {
        &self.logits
    }

    pub fn logits_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.logits
    }

    pub fn baseline(&self) -> Option<f64> {
        self.baseline
    }

    pub fn probabilities(&self) -> Vec<Vec<f64>> {
        self.logits.iter().map(|l| softmax(l)).collect()
    }

    pub fn propose(&self, rng: &mut TrialRng) -> DesignPoint {
        DesignPoint::new(
            self.probabilities()
                .iter()
                .map(|p| WeightedIndex::new(p).expect("softmax is a distribution").sample(rng))
                .collect(),
        )
    }

    /// J(θ) = (1/B) Σᵢ Aᵢ Σₚ log π_p(aᵢₚ) + w_H Σₚ H(π_p) for fixed advantages.
    pub fn objective(&self, batch: &[(DesignPoint, f64)]) -> f64 {
        let probs = self.probabilities();
        let b = batch.len() as f64;
        let score: f64 = batch
            .iter()
            .map(|(point, a)| {
                a * probs
                    .iter()
                    .zip(&point.indices)
                    .map(|(p, &k)| p[k].ln())
                    .sum::<f64>()
            })
            .sum::<f64>()
            / b;
        score + self.config.entropy_weight * probs.iter().map(|p| entropy(p)).sum::<f64>()
    }

    /// ∂J/∂θ. For parameter p and value j:
    /// (1/B) Σᵢ Aᵢ (1[aᵢₚ = j] − p_j) − w_H p_j (log p_j + H).
    pub fn gradient(&self, batch: &[(DesignPoint, f64)]) -> Vec<Vec<f64>> {
        let probs = self.probabilities();
        let b = batch.len() as f64;
        let w = self.config.entropy_weight;
        probs
            .iter()
            .enumerate()
            .map(|(param, p)| {
                let h = entropy(p);
                let mut g: Vec<f64> = p
                    .iter()
                    .map(|&pj| if pj > 0.0 { -w * pj * (pj.ln() + h) } else { 0.0 })
                    .collect();
                for (point, a) in batch {
                    let chosen = point.indices[param];
                    for (j, gj) in g.iter_mut().enumerate() {
                        let hit = if j == chosen { 1.0 } else { 0.0 };
                        *gj += a * (hit - p[j]) / b;
                    }
                }
                g
            })
            .collect()
    }

    /// Updates the baseline with the batch mean (the first batch sets it
    /// outright), then takes one ascent step θ += η ∇J with Aᵢ = rᵢ − b.
    pub fn update(&mut self, batch: &[(DesignPoint, f64)]) -> Result<(), AgentError> {
        if batch.is_empty() {
            return Err(AgentError::Invalid("empty policy-gradient batch".into()));
        }
        if let Some(&(_, r)) = batch.iter().find(|(_, r)| !r.is_finite()) {
            return Err(AgentError::NonFiniteReward(r));
        }
        let mean = batch.iter().map(|(_, r)| r).sum::<f64>() / batch.len() as f64;
        let d = self.config.baseline_decay;
        let baseline = match self.baseline {
            None => mean,
            Some(b) => d * b + (1.0 - d) * mean,
        };
        self.baseline = Some(baseline);
        let advantages: Vec<(DesignPoint, f64)> = batch.iter().map(|(p, r)| (p.clone(), r - baseline)).collect();
        let grad = self.gradient(&advantages);
        let eta = self.config.learning_rate;
        for (l, g) in self.logits.iter_mut().zip(grad) {
            for (li, gi) in l.iter_mut().zip(g) {
                *li += eta * gi;
            }
        }
        Ok(())
    }
}

/// Ask/tell wrapper: one gradient step per `batch_size` observations.
pub struct RlAgent {
    state: RlState,
    hyperparams: HyperparamSet,
    batch: Vec<(DesignPoint, f64)>,
    best: BestTracker,
}

impl RlAgent {
    pub fn new(space: ParameterSpace, config: RlConfig) -> Result<Self, AgentError> {
        Ok(RlAgent {
            hyperparams: config.to_hyperparams(),
            state: RlState::new(&space, config)?,
            batch: Vec::new(),
            best: BestTracker::default(),
        })
    }

    pub fn state(&self) -> &RlState {
        &self.state
    }
}

impl Agent for RlAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::RL
    }

    fn propose(&mut self, rng: &mut TrialRng) -> DesignPoint {
        self.state.propose(rng)
    }

    fn observe(&mut self, point: &DesignPoint, reward: f64) -> Result<(), AgentError> {
        self.best.update(point, reward)?;
        self.batch.push((point.clone(), reward));
        if self.batch.len() >= self.state.config.batch_size {
            let batch = std::mem::take(&mut self.batch);
            self.state.update(&batch)?;
        }
        Ok(())
    }

    fn best_so_far(&self) -> Option<(&DesignPoint, f64)> {
        self.best.get()
    }

    fn hyperparams(&self) -> &HyperparamSet {
        &self.hyperparams
    }
}
