//! Ant colony optimization over a per-parameter pheromone table.

use dsegym_core::{AgentKind, DesignPoint, ParameterSpace, TrialRng};
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::{check_positive, check_probability, Agent, AgentError, BestTracker, HyperparamSet};

#[derive(Debug, Clone, PartialEq)]
pub struct AcoConfig {
    /// ρ in (0, 1).
    pub evaporation: f64,
    /// Q.
    pub deposit: f64,
    /// ε: per-parameter probability of a uniform pick.
    pub exploration: f64,
    /// β: greediness exponent on pheromone.
    pub beta: f64,
    pub tau_min: f64,
    pub ants: usize,
}

impl Default for AcoConfig {
    fn default() -> Self {
        AcoConfig {
            evaporation: 0.2,
            deposit: 1.0,
            exploration: 0.1,
            beta: 1.0,
            tau_min: 0.01,
            ants: 8,
        }
    }
}

const KEYS: [&str; 6] = ["evaporation", "deposit", "exploration", "beta", "tau_min", "ants"];

impl AcoConfig {
    pub fn from_hyperparams(h: &HyperparamSet) -> Result<Self, AgentError> {
        h.check_keys(&KEYS)?;
        let c = AcoConfig {
            evaporation: h.f64("evaporation")?,
            deposit: h.f64("deposit")?,
            exploration: h.f64("exploration")?,
            beta: h.f64("beta")?,
            tau_min: h.f64("tau_min")?,
            ants: h.usize("ants")?,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn to_hyperparams(&self) -> HyperparamSet {
        HyperparamSet::new()
            .with("evaporation", self.evaporation)
            .with("deposit", self.deposit)
            .with("exploration", self.exploration)
            .with("beta", self.beta)
            .with("tau_min", self.tau_min)
            .with("ants", self.ants)
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if !(self.evaporation > 0.0 && self.evaporation < 1.0) {
            return Err(AgentError::Hyperparam(format!(
                "evaporation = {} is outside (0, 1)",
                self.evaporation
            )));
        }
        check_positive("deposit", self.deposit)?;
        check_probability("exploration", self.exploration)?;
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(AgentError::Hyperparam(format!("beta = {} must be non-negative", self.beta)));
        }
        check_positive("tau_min", self.tau_min)?;
        if self.ants == 0 {
            return Err(AgentError::Hyperparam("ants must be at least 1".into()));
        }
        Ok(())
    }
}

/// Pheromone table: one positive weight per parameter value.
#[derive(Debug, Clone)]
pub struct AcoState {
    pub config: AcoConfig,
    pheromone: Vec<Vec<f64>>,
}

impl AcoState {
    /// Every pheromone starts at 1.
    pub fn new(space: &ParameterSpace, config: AcoConfig) -> Result<Self, AgentError> {
        config.validate()?;
        Ok(AcoState {
            pheromone: space.domain_sizes().into_iter().map(|n| vec![1.0; n]).collect(),
            config,
        })
    }

    pub fn pheromone(&self) -> &[Vec<f64>] {
        &self.pheromone
    }

    pub fn pheromone_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.pheromone
    }

    /// One ant: per parameter, a uniform value with probability ε, otherwise
    /// a value drawn with probability τ^β / Σ τ^β.
    pub fn propose(&self, rng: &mut TrialRng) -> DesignPoint {
        let c = &self.config;
        DesignPoint::new(
            self.pheromone
                .iter()
                .map(|tau| {
                    if rng.gen_bool(c.exploration) {
                        return rng.gen_range(0..tau.len());
                    }
                    let weights = tau.iter().map(|t| t.powf(c.beta));
                    match WeightedIndex::new(weights) {
                        Ok(w) => w.sample(rng),
                        // τ^β underflowed everywhere: fall back to uniform
                        Err(_) => rng.gen_range(0..tau.len()),
                    }
                })
                .collect(),
        )
    }

    /// Evaporates every entry (floored at τ_min), then each ant deposits
    /// Q·r/(1+r) on the values it chose. Rewards must be non-negative.
    pub fn update(&mut self, ants: &[(DesignPoint, f64)]) -> Result<(), AgentError> {
        if let Some(&(_, r)) = ants.iter().find(|(_, r)| !(*r >= 0.0)) {
            return Err(if r.is_nan() {
                AgentError::NonFiniteReward(r)
            } else {
                AgentError::NegativeReward(r)
            });
        }
        let c = &self.config;
        for tau in &mut self.pheromone {
            for t in tau.iter_mut() {
                *t = (c.tau_min).max((1.0 - c.evaporation) * *t);
            }
        }
        for (point, r) in ants {
            let squashed = if r.is_infinite() { 1.0 } else { r / (1.0 + r) };
            for (tau, &k) in self.pheromone.iter_mut().zip(&point.indices) {
                tau[k] += c.deposit * squashed;
            }
        }
        Ok(())
    }
}

/// Ask/tell wrapper: one pheromone update per `ants` observations.
pub struct AcoAgent {
    state: AcoState,
    hyperparams: HyperparamSet,
    signed_rewards: bool,
    colony: Vec<(DesignPoint, f64)>,
    best: BestTracker,
}

impl AcoAgent {
    /// With `signed_rewards`, rewards are mapped through exp() before the
    /// deposit so that negated budget distances become positive.
    pub fn new(space: ParameterSpace, config: AcoConfig, signed_rewards: bool) -> Result<Self, AgentError> {
        Ok(AcoAgent {
            hyperparams: config.to_hyperparams(),
            state: AcoState::new(&space, config)?,
            signed_rewards,
            colony: Vec::new(),
            best: BestTracker::default(),
        })
    }

    pub fn state(&self) -> &AcoState {
        &self.state
    }
}

impl Agent for AcoAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::ACO
    }

    fn propose(&mut self, rng: &mut TrialRng) -> DesignPoint {
        self.state.propose(rng)
    }

    fn observe(&mut self, point: &DesignPoint, reward: f64) -> Result<(), AgentError> {
        self.best.update(point, reward)?;
        let shifted = if self.signed_rewards { reward.exp() } else { reward };
        if shifted < 0.0 {
            return Err(AgentError::NegativeReward(reward));
        }
        self.colony.push((point.clone(), shifted));
        if self.colony.len() >= self.state.config.ants {
            let ants = std::mem::take(&mut self.colony);
            self.state.update(&ants)?;
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
