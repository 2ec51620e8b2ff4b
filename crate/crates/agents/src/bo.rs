//! Bayesian optimization: GP surrogate over encoded designs, expected
//! improvement maximized over a random candidate pool.

use std::collections::HashMap;

use dsegym_core::{AgentKind, DesignPoint, ParameterSpace, TrialRng};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::gp::GaussianProcess;
use crate::{check_positive, Agent, AgentError, BestTracker, HyperparamSet};

#[derive(Debug, Clone, PartialEq)]
pub struct BoConfig {
    /// RBF length-scale ℓ.
    pub length_scale: f64,
    /// EI exploration offset ξ.
    pub xi: f64,
    pub signal_variance: f64,
    pub noise_variance: f64,
    pub pool_size: usize,
    /// Uniform warm-up samples n₀ before the surrogate takes over.
    pub initial_samples: usize,
    /// Training-set cap: half the best observations, half the most recent.
    pub max_train: usize,
}

impl Default for BoConfig {
    fn default() -> Self {
        BoConfig {
            length_scale: 0.3,
            xi: 0.01,
            signal_variance: 1.0,
            noise_variance: 1e-6,
            pool_size: 128,
            initial_samples: 10,
            max_train: 64,
        }
    }
}

const KEYS: [&str; 7] = [
    "length_scale",
    "xi",
    "signal_variance",
    "noise_variance",
    "pool_size",
    "initial_samples",
    "max_train",
];

impl BoConfig {
    pub fn from_hyperparams(h: &HyperparamSet) -> Result<Self, AgentError> {
        h.check_keys(&KEYS)?;
        let c = BoConfig {
            length_scale: h.f64("length_scale")?,
            xi: h.f64("xi")?,
            signal_variance: h.f64("signal_variance")?,
            noise_variance: h.f64("noise_variance")?,
            pool_size: h.usize("pool_size")?,
            initial_samples: h.usize("initial_samples")?,
            max_train: h.usize("max_train")?,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn to_hyperparams(&self) -> HyperparamSet {
        HyperparamSet::new()
            .with("length_scale", self.length_scale)
            .with("xi", self.xi)
            .with("signal_variance", self.signal_variance)
            .with("noise_variance", self.noise_variance)
            .with("pool_size", self.pool_size)
            .with("initial_samples", self.initial_samples)
            .with("max_train", self.max_train)
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        check_positive("length_scale", self.length_scale)?;
        check_positive("signal_variance", self.signal_variance)?;
        if !(self.xi >= 0.0) || !(self.noise_variance >= 0.0) {
            return Err(AgentError::Hyperparam("xi and noise_variance must be non-negative".into()));
        }
        if self.pool_size == 0 || self.max_train < 2 {
            return Err(AgentError::Hyperparam("pool_size ≥ 1 and max_train ≥ 2 required".into()));
        }
        Ok(())
    }
}

/// EI(x) = (μ − y⁺ − ξ) Φ(z) + σ φ(z), z = (μ − y⁺ − ξ)/σ; the positive
/// part of μ − y⁺ − ξ when σ = 0.
pub fn expected_improvement(mean: f64, sigma: f64, best: f64, xi: f64) -> f64 {
    let gain = mean - best - xi;
    if !(sigma > 0.0) {
        return gain.max(0.0);
    }
    let z = gain / sigma;
    let n = Normal::standard();
    (gain * n.cdf(z) + sigma * n.pdf(z)).max(0.0)
}

pub struct BoAgent {
    space: ParameterSpace,
    config: BoConfig,
    hyperparams: HyperparamSet,
    /// Distinct observed points in first-seen order with encoding and latest reward.
    observed: Vec<(DesignPoint, Vec<f64>, f64)>,
    index: HashMap<DesignPoint, usize>,
    /// Order in which distinct points were last observed, oldest first.
    recency: Vec<usize>,
    observations: usize,
    best: BestTracker,
}

impl BoAgent {
    pub fn new(space: ParameterSpace, config: BoConfig) -> Result<Self, AgentError> {
        config.validate()?;
        Ok(BoAgent {
            space,
            hyperparams: config.to_hyperparams(),
            config,
            observed: Vec::new(),
            index: HashMap::new(),
            recency: Vec::new(),
            observations: 0,
            best: BestTracker::default(),
        })
    }

    /// Indices into `observed` handed to the GP: everything while under the
    /// cap, otherwise the best half by reward plus the most recent others.
    pub fn training_set(&self) -> Vec<usize> {
        let n = self.observed.len();
        let cap = self.config.max_train;
        if n <= cap {
            return (0..n).collect();
        }
        let mut by_reward: Vec<usize> = (0..n).collect();
        by_reward.sort_by(|&a, &b| self.observed[b].2.total_cmp(&self.observed[a].2).then(a.cmp(&b)));
        let mut chosen: Vec<usize> = by_reward[..cap / 2].to_vec();
        let mut taken = vec![false; n];
        for &i in &chosen {
            taken[i] = true;
        }
        for &i in self.recency.iter().rev() {
            if chosen.len() == cap {
                break;
            }
            if !taken[i] {
                taken[i] = true;
                chosen.push(i);
            }
        }
        chosen.sort_unstable();
        chosen
    }

    pub fn fit(&self) -> Result<GaussianProcess, AgentError> {
        let rows = self.training_set();
        let x = rows.iter().map(|&i| self.observed[i].1.clone()).collect();
        let y: Vec<f64> = rows.iter().map(|&i| self.observed[i].2).collect();
        GaussianProcess::fit(
            x,
            &y,
            self.config.length_scale,
            self.config.signal_variance,
            self.config.noise_variance,
        )
    }

    fn propose_ei(&self, rng: &mut TrialRng) -> Result<DesignPoint, AgentError> {
        let gp = self.fit()?;
        let incumbent = gp.standardize(self.best.get().map(|(_, r)| r).unwrap_or(0.0));
        let candidates: Vec<DesignPoint> = (0..self.config.pool_size).map(|_| self.space.sample_uniform(rng)).collect();
        let encoded = candidates
            .iter()
            .map(|c| self.space.encode(c))
            .collect::<Result<Vec<_>, _>>()?;
        let mut best: Option<(f64, usize)> = None;
        for (i, (mean, var)) in gp.predict_batch(&encoded).into_iter().enumerate() {
            let ei = expected_improvement(mean, var.sqrt(), incumbent, self.config.xi);
            if best.as_ref().map_or(true, |(b, _)| ei > *b) {
                best = Some((ei, i));
            }
        }
        let (_, i) = best.expect("pool_size ≥ 1");
        Ok(candidates[i].clone())
    }
}

impl Agent for BoAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::BO
    }

    fn propose(&mut self, rng: &mut TrialRng) -> DesignPoint {
        if self.observations < self.config.initial_samples || self.observed.is_empty() {
            return self.space.sample_uniform(rng);
        }
        match self.propose_ei(rng) {
            Ok(p) => p,
            Err(e) => {
                log::warn!("surrogate fit failed, sampling uniformly: {e}");
                self.space.sample_uniform(rng)
            }
        }
    }

    fn observe(&mut self, point: &DesignPoint, reward: f64) -> Result<(), AgentError> {
        self.best.update(point, reward)?;
        self.observations += 1;
        match self.index.get(point) {
            Some(&i) => {
                self.observed[i].2 = reward;
                self.recency.retain(|&j| j != i);
                self.recency.push(i);
            }
            None => {
                let i = self.observed.len();
                self.observed.push((point.clone(), self.space.encode(point)?, reward));
                self.index.insert(point.clone(), i);
                self.recency.push(i);
            }
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
