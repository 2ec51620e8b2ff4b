//! Shared vocabulary for the design-space-exploration gym.
//!
//! An *environment* wraps an architecture cost model and turns a
//! [`DesignPoint`] (the action) into an [`Observation`] plus a scalar reward.
//! An *agent* proposes design points and refines its policy from the reward.
//! This crate holds the pieces both sides agree on: parameter spaces, the
//! reward formulas, the environment trait and the per-trial RNG.

pub mod env;
pub mod reward;
pub mod rng;
pub mod space;

mod agent_kind;

pub use agent_kind::AgentKind;
pub use env::{EnvError, Environment, Observation, StepResult, Unit, WorkloadSpec};
pub use reward::{
    compute_budget_distance, compute_joint_reward, compute_reciprocal_reward,
    compute_target_reward, score, Budget, RewardError, RewardSpec, Target, DEFAULT_REWARD_CAP,
};
pub use rng::{derive_seed, rng_for, TrialRng};
pub use space::{DesignPoint, ParamKind, ParamValue, ParameterSpace, ParameterSpec, SpaceError};
