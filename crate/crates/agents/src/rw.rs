use dsegym_core::{AgentKind, DesignPoint, ParameterSpace, TrialRng};

use crate::{Agent, AgentError, BestTracker, HyperparamSet};

/// Uniform random search.
pub struct RandomWalker {
    space: ParameterSpace,
    hyperparams: HyperparamSet,
    best: BestTracker,
}

impl RandomWalker {
    pub fn new(space: ParameterSpace, hyperparams: &HyperparamSet) -> Result<Self, AgentError> {
        hyperparams.check_keys(&[])?;
        Ok(RandomWalker {
            space,
            hyperparams: hyperparams.clone(),
            best: BestTracker::default(),
        })
    }
}

impl Agent for RandomWalker {
    fn kind(&self) -> AgentKind {
        AgentKind::RW
    }

    fn propose(&mut self, rng: &mut TrialRng) -> DesignPoint {
        self.space.sample_uniform(rng)
    }

    fn observe(&mut self, point: &DesignPoint, reward: f64) -> Result<(), AgentError> {
        self.best.update(point, reward)
    }

    fn best_so_far(&self) -> Option<(&DesignPoint, f64)> {
        self.best.get()
    }

    fn hyperparams(&self) -> &HyperparamSet {
        &self.hyperparams
    }
}
