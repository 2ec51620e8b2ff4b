use std::collections::BTreeMap;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use dsegym_core::{
    score, DesignPoint, EnvError, Environment, Observation, ParamValue, ParameterSpace, RewardSpec,
    StepResult, WorkloadSpec,
};
use serde::Deserialize;

/// A deterministic analytical cost model.
pub trait CostModel: Send + Sync {
    /// Metric names every feasible observation carries.
    fn metric_names(&self) -> &[&'static str];

    /// Reference design; parameters absent from a space take these values.
    fn reference(&self) -> &BTreeMap<String, ParamValue>;

    /// Evaluates `point` (valid in `space`) against `workload`.
    fn evaluate(
        &self,
        space: &ParameterSpace,
        point: &DesignPoint,
        workload: &WorkloadSpec,
    ) -> Result<Observation, EnvError>;
}

/// Reads parameter values from a design point, falling back to the model's
/// reference design for parameters the space does not expose.
pub(crate) struct Lookup<'a> {
    pub space: &'a ParameterSpace,
    pub point: &'a DesignPoint,
    pub reference: &'a BTreeMap<String, ParamValue>,
}

impl Lookup<'_> {
    pub fn label(&self, name: &str) -> Result<&str, EnvError> {
        if let Some(l) = self.space.label(self.point, name) {
            return Ok(l);
        }
        match self.reference.get(name) {
            Some(ParamValue::Label(l)) => Ok(l),
            _ => Err(EnvError::Fixture(format!("no categorical value for `{name}`"))),
        }
    }

    pub fn number(&self, name: &str) -> Result<f64, EnvError> {
        if self.space.position(name).is_some() {
            return self
                .space
                .number(self.point, name)
                .ok_or_else(|| EnvError::Fixture(format!("`{name}` is not numeric")));
        }
        match self.reference.get(name) {
            Some(ParamValue::Number(x)) => Ok(*x),
            _ => Err(EnvError::Fixture(format!("no numeric value for `{name}`"))),
        }
    }
}

/// Checks that every parameter of `space` is one the model knows about.
pub(crate) fn check_space_against_reference(
    space: &ParameterSpace,
    reference: &BTreeMap<String, ParamValue>,
) -> Result<(), EnvError> {
    for p in space.parameters() {
        if !reference.contains_key(&p.name) {
            return Err(EnvError::Fixture(format!(
                "parameter `{}` is unknown to the cost model",
                p.name
            )));
        }
    }
    Ok(())
}

/// Workload entry of a fixture file: numeric traits plus named objectives.
#[derive(Debug, Clone, Deserialize)]
pub(crate) struct WorkloadFixture {
    #[serde(default)]
    pub objectives: BTreeMap<String, RewardSpec>,
    #[serde(flatten)]
    pub traits: BTreeMap<String, f64>,
}

impl WorkloadFixture {
    pub fn spec(&self, id: &str) -> Result<WorkloadSpec, EnvError> {
        let spec = WorkloadSpec {
            id: id.to_string(),
            traits: self.traits.clone(),
        };
        spec.validate()?;
        Ok(spec)
    }
}

pub(crate) fn require_trait(workload: &WorkloadSpec, name: &str) -> Result<f64, EnvError> {
    workload
        .trait_value(name)
        .ok_or_else(|| EnvError::Workload(format!("{} lacks trait `{name}`", workload.id)))
}

/// Options shared by every environment.
#[derive(Debug, Clone)]
pub struct EnvOptions {
    /// Steps per episode; `done` is reported once this many steps ran since reset.
    pub episode_length: usize,
    /// Artificial per-step delay standing in for a slow simulator.
    pub step_delay: Duration,
    pub seed: u64,
}

impl Default for EnvOptions {
    fn default() -> Self {
        EnvOptions {
            episode_length: 1,
            step_delay: Duration::ZERO,
            seed: 0,
        }
    }
}

/// Environment backed by an in-process [`CostModel`].
pub struct SyntheticEnv {
    id: String,
    model: Arc<dyn CostModel>,
    space: ParameterSpace,
    workload: WorkloadSpec,
    reward: RewardSpec,
    options: EnvOptions,
    steps: usize,
}

impl SyntheticEnv {
    pub fn new(
        id: impl Into<String>,
        model: Arc<dyn CostModel>,
        space: ParameterSpace,
        workload: WorkloadSpec,
        reward: RewardSpec,
        options: EnvOptions,
    ) -> Result<Self, EnvError> {
        reward.validate()?;
        for m in reward.metrics() {
            if !model.metric_names().contains(&m) {
                return Err(EnvError::Fixture(format!("objective reads unknown metric `{m}`")));
            }
        }
        check_space_against_reference(&space, model.reference())?;
        if options.episode_length == 0 {
            return Err(EnvError::Fixture("episode length must be at least 1".into()));
        }
        Ok(SyntheticEnv {
            id: id.into(),
            model,
            space,
            workload,
            reward,
            options,
            steps: 0,
        })
    }

    pub fn reward_spec(&self) -> &RewardSpec {
        &self.reward
    }

    pub fn set_step_delay(&mut self, delay: Duration) {
        self.options.step_delay = delay;
    }

    /// Evaluates the cost model without reward, episode bookkeeping or delay.
    pub fn observe(&self, point: &DesignPoint) -> Result<Observation, EnvError> {
        self.space.validate(point)?;
        self.model.evaluate(&self.space, point, &self.workload)
    }
}

impl Environment for SyntheticEnv {
    fn id(&self) -> &str {
        &self.id
    }

    fn reset(&mut self) -> Observation {
        self.steps = 0;
        Observation::initial()
    }

    fn step(&mut self, point: &DesignPoint) -> Result<StepResult, EnvError> {
        if !self.options.step_delay.is_zero() {
            thread::sleep(self.options.step_delay);
        }
        let observation = self.observe(point)?;
        let reward = score(&self.reward, &observation)?;
        self.steps += 1;
        let mut info = BTreeMap::new();
        if !observation.valid {
            info.insert("invalid".to_string(), "true".to_string());
        }
        Ok(StepResult {
            observation,
            reward,
            done: self.steps >= self.options.episode_length,
            info,
        })
    }

    fn space(&self) -> &ParameterSpace {
        &self.space
    }

    fn workload(&self) -> &WorkloadSpec {
        &self.workload
    }
}
