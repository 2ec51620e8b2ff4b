//! Generational genetic algorithm with elitism and optional domain operators.
//!
//! Each generation keeps the single best individual (the elite) and fills
//! the rest of the population with children: two tournament winners, uniform
//! crossover with probability `crossover_prob` (otherwise a copy of the first
//! parent), then per-gene resampling with probability `mutation_prob`.
//!
//! Domain operators, all off by default:
//!
//! * reordering: before crossover, the second parent has the relative
//!   positions of two random genes swapped (gene `i` takes the grid position
//!   of gene `j` rescaled to its own domain, and vice versa);
//! * aging: the elite is retired instead of carried over once it has survived
//!   `aging_limit` generations;
//! * growth: with probability `growth_prob` a mutated copy of the elite joins
//!   the children, and the population is trimmed back by dropping the worst.

use std::collections::VecDeque;

use dsegym_core::{AgentKind, DesignPoint, ParameterSpace, TrialRng};
use rand::Rng;

use crate::{check_probability, Agent, AgentError, BestTracker, HyperparamSet};

#[derive(Debug, Clone, PartialEq)]
pub struct GaConfig {
    pub population_size: usize,
    pub mutation_prob: f64,
    pub crossover_prob: f64,
    pub tournament_size: usize,
    pub reordering: bool,
    pub aging: bool,
    pub aging_limit: usize,
    pub growth: bool,
    pub growth_prob: f64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 32,
            mutation_prob: 0.05,
            crossover_prob: 0.9,
            tournament_size: 3,
            reordering: false,
            aging: false,
            aging_limit: 5,
            growth: false,
            growth_prob: 0.2,
        }
    }
}

const KEYS: [&str; 9] = [
    "population_size",
    "mutation_prob",
    "crossover_prob",
    "tournament_size",
    "reordering",
    "aging",
    "aging_limit",
    "growth",
    "growth_prob",
];

impl GaConfig {
    pub fn from_hyperparams(h: &HyperparamSet) -> Result<Self, AgentError> {
        h.check_keys(&KEYS)?;
        let c = GaConfig {
            population_size: h.usize("population_size")?,
            mutation_prob: h.f64("mutation_prob")?,
            crossover_prob: h.f64("crossover_prob")?,
            tournament_size: h.usize("tournament_size")?,
            reordering: h.bool("reordering")?,
            aging: h.bool("aging")?,
            aging_limit: h.usize("aging_limit")?,
            growth: h.bool("growth")?,
            growth_prob: h.f64("growth_prob")?,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn to_hyperparams(&self) -> HyperparamSet {
        HyperparamSet::new()
            .with("population_size", self.population_size)
            .with("mutation_prob", self.mutation_prob)
            .with("crossover_prob", self.crossover_prob)
            .with("tournament_size", self.tournament_size)
            .with("reordering", self.reordering)
            .with("aging", self.aging)
            .with("aging_limit", self.aging_limit)
            .with("growth", self.growth)
            .with("growth_prob", self.growth_prob)
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if self.population_size < 2 {
            return Err(AgentError::Hyperparam(format!(
                "population_size = {} must be at least 2",
                self.population_size
            )));
        }
        if self.tournament_size < 2 {
            return Err(AgentError::Hyperparam("tournament_size must be at least 2".into()));
        }
        check_probability("mutation_prob", self.mutation_prob)?;
        check_probability("crossover_prob", self.crossover_prob)?;
        check_probability("growth_prob", self.growth_prob)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub point: DesignPoint,
    pub fitness: f64,
    /// Generations survived.
    pub age: usize,
}

/// Uniform crossover: each gene from either parent with probability 1/2.
pub fn crossover(a: &DesignPoint, b: &DesignPoint, rng: &mut TrialRng) -> DesignPoint {
    DesignPoint::new(
        a.indices
            .iter()
            .zip(&b.indices)
            .map(|(&x, &y)| if rng.gen_bool(0.5) { x } else { y })
            .collect(),
    )
}

/// Swaps the relative grid positions of two distinct random genes.
pub fn reorder(space: &ParameterSpace, point: &DesignPoint, rng: &mut TrialRng) -> DesignPoint {
    let mut out = point.clone();
    let n = point.len();
    if n < 2 {
        return out;
    }
    let i = rng.gen_range(0..n);
    let mut j = rng.gen_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    let sizes = space.domain_sizes();
    let rel = |k: usize| {
        if sizes[k] > 1 {
            point.indices[k] as f64 / (sizes[k] - 1) as f64
        } else {
            0.0
        }
    };
    let place = |r: f64, k: usize| (r * (sizes[k] - 1) as f64).round() as usize;
    out.indices[i] = place(rel(j), i);
    out.indices[j] = place(rel(i), j);
    out
}

/// Best of `k` individuals drawn with replacement; earlier draw wins ties.
pub fn tournament<'a>(population: &'a [Individual], k: usize, rng: &mut TrialRng) -> &'a Individual {
    let mut best = &population[rng.gen_range(0..population.len())];
    for _ in 1..k {
        let c = &population[rng.gen_range(0..population.len())];
        if c.fitness > best.fitness {
            best = c;
        }
    }
    best
}

/// An evaluated population.
#[derive(Debug, Clone)]
pub struct GaState {
    pub config: GaConfig,
    pub population: Vec<Individual>,
}

impl GaState {
    pub fn new(config: GaConfig, population: Vec<Individual>) -> Result<Self, AgentError> {
        config.validate()?;
        if population.len() != config.population_size {
            return Err(AgentError::Invalid(format!(
                "population has {} individuals, expected {}",
                population.len(),
                config.population_size
            )));
        }
        Ok(GaState { config, population })
    }

    /// Random initial population, evaluated with `evaluate`.
    pub fn initialize(
        config: GaConfig,
        space: &ParameterSpace,
        mut evaluate: impl FnMut(&DesignPoint) -> f64,
        rng: &mut TrialRng,
    ) -> Result<Self, AgentError> {
        config.validate()?;
        let population = (0..config.population_size)
            .map(|_| {
                let point = space.sample_uniform(rng);
                let fitness = evaluate(&point);
                Individual { point, fitness, age: 0 }
            })
            .collect();
        Self::new(config, population)
    }

    /// Fittest individual; the first one on ties.
    pub fn elite(&self) -> &Individual {
        let mut best = &self.population[0];
        for ind in &self.population[1..] {
            if ind.fitness > best.fitness {
                best = ind;
            }
        }
        best
    }

    fn elite_retires(&self) -> bool {
        self.config.aging && self.elite().age >= self.config.aging_limit
    }

    fn mutate(&self, space: &ParameterSpace, point: &mut DesignPoint, rng: &mut TrialRng) {
        for g in 0..point.len() {
            if rng.gen_bool(self.config.mutation_prob) {
                space.resample_param(point, g, rng);
            }
        }
    }

    /// Children to evaluate for the next generation.
    pub fn offspring(&self, space: &ParameterSpace, rng: &mut TrialRng) -> Vec<DesignPoint> {
        let c = &self.config;
        let n = if self.elite_retires() {
            c.population_size
        } else {
            c.population_size - 1
        };
        let mut children = Vec::with_capacity(n + 1);
        for _ in 0..n {
            let a = &tournament(&self.population, c.tournament_size, rng).point;
            let b = &tournament(&self.population, c.tournament_size, rng).point;
            let mut child = if rng.gen_bool(c.crossover_prob) {
                if c.reordering {
                    crossover(a, &reorder(space, b, rng), rng)
                } else {
                    crossover(a, b, rng)
                }
            } else {
                a.clone()
            };
            self.mutate(space, &mut child, rng);
            children.push(child);
        }
        if c.growth && rng.gen_bool(c.growth_prob) {
            children.push(space.neighbor(&self.elite().point, rng));
        }
        children
    }

    /// Replaces the population with the elite (unless retired) plus the
    /// evaluated children, trimmed to size by dropping the least fit.
    pub fn advance(&mut self, children: Vec<(DesignPoint, f64)>) {
        let mut next = Vec::with_capacity(children.len() + 1);
        if !self.elite_retires() {
            let mut elite = self.elite().clone();
            elite.age += 1;
            next.push(elite);
        }
        next.extend(children.into_iter().map(|(point, fitness)| Individual { point, fitness, age: 0 }));
        // stable: among equals, the carried elite and earlier children stay
        next.sort_by(|a, b| b.fitness.total_cmp(&a.fitness));
        next.truncate(self.config.population_size);
        self.population = next;
    }

    /// One full generation: breed, evaluate, replace.
    pub fn generation(
        &mut self,
        space: &ParameterSpace,
        mut evaluate: impl FnMut(&DesignPoint) -> f64,
        rng: &mut TrialRng,
    ) {
        let children = self
            .offspring(space, rng)
            .into_iter()
            .map(|p| {
                let f = evaluate(&p);
                (p, f)
            })
            .collect();
        self.advance(children);
    }
}

/// Ask/tell wrapper around [`GaState`].
pub struct GaAgent {
    space: ParameterSpace,
    config: GaConfig,
    hyperparams: HyperparamSet,
    state: Option<GaState>,
    queue: VecDeque<DesignPoint>,
    expected: usize,
    evaluated: Vec<(DesignPoint, f64)>,
    best: BestTracker,
}

impl GaAgent {
    pub fn new(space: ParameterSpace, config: GaConfig) -> Result<Self, AgentError> {
        config.validate()?;
        Ok(GaAgent {
            space,
            hyperparams: config.to_hyperparams(),
            expected: config.population_size,
            config,
            state: None,
            queue: VecDeque::new(),
            evaluated: Vec::new(),
            best: BestTracker::default(),
        })
    }

    pub fn state(&self) -> Option<&GaState> {
        self.state.as_ref()
    }

    fn refill(&mut self, rng: &mut TrialRng) {
        match &self.state {
            None => self.queue.extend((0..self.config.population_size).map(|_| self.space.sample_uniform(rng))),
            Some(s) => self.queue.extend(s.offspring(&self.space, rng)),
        }
        self.expected = self.queue.len();
    }
}

impl Agent for GaAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::GA
    }

    fn propose(&mut self, rng: &mut TrialRng) -> DesignPoint {
        if self.queue.is_empty() {
            if self.evaluated.is_empty() {
                self.refill(rng);
            } else {
                // asked again before the batch was told back: extra random probe
                return self.space.sample_uniform(rng);
            }
        }
        self.queue.pop_front().expect("queue refilled")
    }

    fn observe(&mut self, point: &DesignPoint, reward: f64) -> Result<(), AgentError> {
        self.best.update(point, reward)?;
        self.evaluated.push((point.clone(), reward));
        if self.queue.is_empty() && self.evaluated.len() >= self.expected {
            let batch = std::mem::take(&mut self.evaluated);
            match &mut self.state {
                None => {
                    let mut population: Vec<Individual> = batch
                        .into_iter()
                        .map(|(point, fitness)| Individual { point, fitness, age: 0 })
                        .collect();
                    population.sort_by(|a, b| b.fitness.total_cmp(&a.fitness));
                    population.truncate(self.config.population_size);
                    self.state = Some(GaState::new(self.config.clone(), population)?);
                }
                Some(s) => s.advance(batch),
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
