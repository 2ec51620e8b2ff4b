//! Search agents.
//!
//! Every agent is a policy plus hyperparameters behind one ask/tell
//! contract: [`Agent::propose`] a design point, feed its reward back through
//! [`Agent::observe`], repeat. Population and batch methods (GA, ACO, RL)
//! queue proposals internally and update their policy once a batch of
//! observations is complete.
//!
//! | agent | policy                                   |
//! |-------|------------------------------------------|
//! | RW    | the random number generator              |
//! | GA    | a genome population                      |
//! | ACO   | a pheromone table                        |
//! | BO    | a Gaussian-process surrogate + EI        |
//! | RL    | factorized softmax policy (REINFORCE)    |

pub mod aco;
pub mod bo;
pub mod ga;
pub mod gp;
pub mod hyper;
pub mod rl;
pub mod rw;

use dsegym_core::{AgentKind, DesignPoint, ParameterSpace, SpaceError, TrialRng};
use thiserror::Error;

pub use aco::{AcoAgent, AcoConfig, AcoState};
pub use bo::{expected_improvement, BoAgent, BoConfig};
pub use ga::{GaAgent, GaConfig, GaState, Individual};
pub use gp::GaussianProcess;
pub use hyper::{AgentConfigs, HyperValue, HyperparamSet};
pub use rl::{RlAgent, RlConfig, RlState};
pub use rw::RandomWalker;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("hyperparameter error: {0}")]
    Hyperparam(String),
    #[error("reward {0} is negative; pheromone deposits need non-negative rewards")]
    NegativeReward(f64),
    #[error("reward {0} is not finite")]
    NonFiniteReward(f64),
    #[error("kernel matrix is singular even with jitter {0:e}")]
    SingularKernel(f64),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// The agent side of the agent/environment contract.
pub trait Agent: Send {
    fn kind(&self) -> AgentKind;

    /// Next design point to evaluate; always valid in the agent's space.
    fn propose(&mut self, rng: &mut TrialRng) -> DesignPoint;

    /// Feedback for a point previously returned by `propose`.
    fn observe(&mut self, point: &DesignPoint, reward: f64) -> Result<(), AgentError>;

    /// Best point observed so far and its reward.
    fn best_so_far(&self) -> Option<(&DesignPoint, f64)>;

    fn hyperparams(&self) -> &HyperparamSet;
}

/// Running maximum of observed rewards; the first of equal rewards wins.
#[derive(Debug, Clone, Default)]
pub struct BestTracker {
    best: Option<(DesignPoint, f64)>,
}

impl BestTracker {
    pub fn update(&mut self, point: &DesignPoint, reward: f64) -> Result<(), AgentError> {
        if !reward.is_finite() {
            return Err(AgentError::NonFiniteReward(reward));
        }
        match &self.best {
            Some((_, r)) if reward <= *r => {}
            _ => self.best = Some((point.clone(), reward)),
        }
        Ok(())
    }

    pub fn get(&self) -> Option<(&DesignPoint, f64)> {
        self.best.as_ref().map(|(p, r)| (p, *r))
    }
}

/// Builds an agent of `kind` over `space`.
///
/// `hyperparams` must be complete (see [`AgentConfigs::resolve`]).
/// `signed_rewards` tells agents that need non-negative feedback (ACO) that
/// rewards may be negative, as with budget-distance objectives.
pub fn build_agent(
    kind: AgentKind,
    space: &ParameterSpace,
    hyperparams: &HyperparamSet,
    signed_rewards: bool,
) -> Result<Box<dyn Agent>, AgentError> {
    Ok(match kind {
        AgentKind::RW => Box::new(RandomWalker::new(space.clone(), hyperparams)?),
        AgentKind::GA => Box::new(GaAgent::new(space.clone(), GaConfig::from_hyperparams(hyperparams)?)?),
        AgentKind::ACO => Box::new(AcoAgent::new(
            space.clone(),
            AcoConfig::from_hyperparams(hyperparams)?,
            signed_rewards,
        )?),
        AgentKind::BO => Box::new(BoAgent::new(space.clone(), BoConfig::from_hyperparams(hyperparams)?)?),
        AgentKind::RL => Box::new(RlAgent::new(space.clone(), RlConfig::from_hyperparams(hyperparams)?)?),
    })
}

pub(crate) fn check_probability(name: &str, p: f64) -> Result<(), AgentError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(AgentError::Hyperparam(format!("{name} = {p} is outside [0, 1]")))
    }
}

pub(crate) fn check_positive(name: &str, x: f64) -> Result<(), AgentError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(AgentError::Hyperparam(format!("{name} = {x} must be positive")))
    }
}
