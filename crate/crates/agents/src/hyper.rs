//! Hyperparameter sets, their digests and the shipped sweep grids.

use std::collections::BTreeMap;
use std::fmt;

use dsegym_core::AgentKind;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::AgentError;

pub const SHIPPED_AGENTS_TOML: &str = include_str!("../fixtures/agents.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HyperValue {
    Bool(bool),
    Int(i64),
    Float(f64),
}

impl fmt::Display for HyperValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HyperValue::Bool(b) => write!(f, "{b}"),
            HyperValue::Int(i) => write!(f, "{i}"),
            HyperValue::Float(x) => write!(f, "{x}"),
        }
    }
}

impl From<bool> for HyperValue {
    fn from(b: bool) -> Self {
        HyperValue::Bool(b)
    }
}

impl From<i64> for HyperValue {
    fn from(i: i64) -> Self {
        HyperValue::Int(i)
    }
}

impl From<usize> for HyperValue {
    fn from(i: usize) -> Self {
        HyperValue::Int(i as i64)
    }
}

impl From<f64> for HyperValue {
    fn from(x: f64) -> Self {
        HyperValue::Float(x)
    }
}

/// Named hyperparameter values of one agent configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HyperparamSet {
    values: BTreeMap<String, HyperValue>,
}

impl HyperparamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: impl Into<String>, value: impl Into<HyperValue>) -> Self {
        self.values.insert(name.into(), value.into());
        self
    }

    pub fn set(&mut self, name: impl Into<String>, value: impl Into<HyperValue>) {
        self.values.insert(name.into(), value.into());
    }

    pub fn get(&self, name: &str) -> Option<&HyperValue> {
        self.values.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &HyperValue)> {
        self.values.iter()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// SHA-256 of the canonical JSON form, first 128 bits in hex.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(&self.values).expect("hyperparameters serialize");
        let hash = Sha256::digest(canonical.as_bytes());
        hex::encode(&hash[..16])
    }

    fn missing(name: &str) -> AgentError {
        AgentError::Hyperparam(format!("missing hyperparameter `{name}`"))
    }

    pub fn f64(&self, name: &str) -> Result<f64, AgentError> {
        match self.get(name) {
            Some(HyperValue::Float(x)) => Ok(*x),
            Some(HyperValue::Int(i)) => Ok(*i as f64),
            Some(v) => Err(AgentError::Hyperparam(format!("`{name}` = {v} is not a number"))),
            None => Err(Self::missing(name)),
        }
    }

    pub fn usize(&self, name: &str) -> Result<usize, AgentError> {
        match self.get(name) {
            Some(HyperValue::Int(i)) if *i >= 0 => Ok(*i as usize),
            Some(v) => Err(AgentError::Hyperparam(format!("`{name}` = {v} is not a count"))),
            None => Err(Self::missing(name)),
        }
    }

    pub fn bool(&self, name: &str) -> Result<bool, AgentError> {
        match self.get(name) {
            Some(HyperValue::Bool(b)) => Ok(*b),
            Some(v) => Err(AgentError::Hyperparam(format!("`{name}` = {v} is not a flag"))),
            None => Err(Self::missing(name)),
        }
    }

    /// Errors on any key outside `known`.
    pub fn check_keys(&self, known: &[&str]) -> Result<(), AgentError> {
        match self.values.keys().find(|k| !known.contains(&k.as_str())) {
            Some(k) => Err(AgentError::Hyperparam(format!("unknown hyperparameter `{k}`"))),
            None => Ok(()),
        }
    }

    /// `self` with every entry of `overrides` replacing or adding a value.
    pub fn merged(&self, overrides: &HyperparamSet) -> HyperparamSet {
        let mut out = self.clone();
        for (k, v) in &overrides.values {
            out.values.insert(k.clone(), v.clone());
        }
        out
    }
}

impl fmt::Display for HyperparamSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, v) in &self.values {
            if !first {
                f.write_str(",")?;
            }
            first = false;
            write!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AgentSection {
    #[serde(default)]
    pub defaults: HyperparamSet,
    #[serde(default)]
    pub grid: BTreeMap<String, Vec<HyperValue>>,
}

/// Per-agent defaults and sweep grids, keyed by agent type.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentConfigs {
    sections: BTreeMap<AgentKind, AgentSection>,
}

impl AgentConfigs {
    pub fn shipped() -> Self {
        Self::from_toml_str(SHIPPED_AGENTS_TOML).expect("shipped agent config is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self, AgentError> {
        let configs: AgentConfigs = toml::from_str(text).map_err(|e| AgentError::Hyperparam(e.to_string()))?;
        for (kind, section) in &configs.sections {
            for (key, values) in &section.grid {
                if values.is_empty() {
                    return Err(AgentError::Hyperparam(format!("{kind}: empty grid for `{key}`")));
                }
                if section.defaults.get(key).is_none() {
                    return Err(AgentError::Hyperparam(format!("{kind}: grid key `{key}` has no default")));
                }
            }
        }
        Ok(configs)
    }

    pub fn section(&self, kind: AgentKind) -> Result<&AgentSection, AgentError> {
        self.sections
            .get(&kind)
            .ok_or_else(|| AgentError::Hyperparam(format!("no configuration for agent {kind}")))
    }

    pub fn defaults(&self, kind: AgentKind) -> Result<HyperparamSet, AgentError> {
        Ok(self.section(kind)?.defaults.clone())
    }

    /// Defaults with `overrides` applied; override keys must exist in the defaults.
    pub fn resolve(&self, kind: AgentKind, overrides: &HyperparamSet) -> Result<HyperparamSet, AgentError> {
        let defaults = self.defaults(kind)?;
        for (k, _) in overrides.iter() {
            if defaults.get(k).is_none() {
                return Err(AgentError::Hyperparam(format!("{kind} has no hyperparameter `{k}`")));
            }
        }
        Ok(defaults.merged(overrides))
    }

    /// Every grid configuration, in lexicographic order of grid keys with
    /// the last key varying fastest.
    pub fn grid(&self, kind: AgentKind) -> Result<Vec<HyperparamSet>, AgentError> {
        let section = self.section(kind)?;
        let mut out = vec![section.defaults.clone()];
        for (key, values) in &section.grid {
            out = out
                .into_iter()
                .flat_map(|base| values.iter().map(move |v| base.clone().with(key.clone(), v.clone())))
                .collect();
        }
        Ok(out)
    }
}
