//! Parameter spaces and design points.
//!
//! A space is an ordered list of parameters, each either categorical (a list
//! of labels) or numeric on a finite `(min, max, step)` grid. A design point
//! stores one domain index per parameter, so numeric values are always exactly
//! on their grid: value = `min + k * step`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use num_bigint::BigUint;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::TrialRng;

/// Tolerance used when flooring `(max - min) / step` so that decimal steps such
/// as 0.1 do not lose their top grid point to rounding.
const GRID_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpaceError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("duplicate parameter name `{0}`")]
    DuplicateName(String),
    #[error("design point has {got} values but the space has {expected} parameters")]
    WrongLength { expected: usize, got: usize },
    #[error("value index {index} out of range for `{name}` ({size} values)")]
    OutOfDomain { name: String, index: usize, size: usize },
    #[error("value {value} is not a domain value of `{name}`")]
    NotInDomain { name: String, value: String },
    #[error("design is missing parameter `{0}`")]
    MissingParameter(String),
    #[error("design names unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("space too large to enumerate: {cardinality} points exceeds limit {limit}")]
    TooLarge { cardinality: BigUint, limit: u64 },
    #[error("encoded vector has {got} entries, expected {expected}")]
    WrongEncodingLength { expected: usize, got: usize },
    #[error("space file: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ParamKind {
    Categorical { values: Vec<String> },
    Numeric { min: f64, max: f64, step: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ParamKind,
}

impl ParameterSpec {
    pub fn categorical<S: Into<String>>(name: impl Into<String>, values: impl IntoIterator<Item = S>) -> Self {
        ParameterSpec {
            name: name.into(),
            kind: ParamKind::Categorical {
                values: values.into_iter().map(Into::into).collect(),
            },
        }
    }

    pub fn numeric(name: impl Into<String>, min: f64, max: f64, step: f64) -> Self {
        ParameterSpec {
            name: name.into(),
            kind: ParamKind::Numeric { min, max, step },
        }
    }

    /// Number of values in the parameter's domain.
    pub fn domain_size(&self) -> usize {
        match &self.kind {
            ParamKind::Categorical { values } => values.len(),
            ParamKind::Numeric { min, max, step } => ((max - min) / step + GRID_EPS).floor() as usize + 1,
        }
    }

    /// Value at domain index `k`.
    pub fn value_at(&self, k: usize) -> ParamValue {
        match &self.kind {
            ParamKind::Categorical { values } => ParamValue::Label(values[k].clone()),
            ParamKind::Numeric { min, step, .. } => ParamValue::Number(min + k as f64 * step),
        }
    }

    /// Domain index of `value`, if it belongs to the domain.
    pub fn index_of(&self, value: &ParamValue) -> Option<usize> {
        match (&self.kind, value) {
            (ParamKind::Categorical { values }, ParamValue::Label(l)) => values.iter().position(|v| v == l),
            (ParamKind::Numeric { min, step, .. }, ParamValue::Number(x)) => {
                if !x.is_finite() {
                    return None;
                }
                let k = ((x - min) / step).round();
                if k < 0.0 || k as usize >= self.domain_size() {
                    return None;
                }
                let k = k as usize;
                let on_grid = min + k as f64 * step;
                ((on_grid - x).abs() <= 1e-9 * x.abs().max(1.0)).then_some(k)
            }
            _ => None,
        }
    }

    fn encoded_width(&self) -> usize {
        match &self.kind {
            ParamKind::Categorical { values } => values.len(),
            ParamKind::Numeric { .. } => 1,
        }
    }

    fn validate(&self) -> Result<(), SpaceError> {
        let bad = |reason: &str| SpaceError::InvalidParameter {
            name: self.name.clone(),
            reason: reason.to_string(),
        };
        if self.name.is_empty() {
            return Err(bad("empty name"));
        }
        match &self.kind {
            ParamKind::Categorical { values } => {
                if values.is_empty() {
                    return Err(bad("no values"));
                }
                let mut seen = HashSet::new();
                for v in values {
                    if !seen.insert(v) {
                        return Err(bad(&format!("duplicate value `{v}`")));
                    }
                }
            }
            ParamKind::Numeric { min, max, step } => {
                if !(min.is_finite() && max.is_finite() && step.is_finite()) {
                    return Err(bad("non-finite bound"));
                }
                if min > max {
                    return Err(bad("min > max"));
                }
                if *step <= 0.0 {
                    return Err(bad("step must be positive"));
                }
            }
        }
        Ok(())
    }
}

/// A single parameter value: a categorical label or a grid number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Label(String),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Number(x) => write!(f, "{x}"),
            ParamValue::Label(l) => f.write_str(l),
        }
    }
}

/// One concrete assignment: a domain index per parameter, in space order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DesignPoint {
    pub indices: Vec<usize>,
}

impl DesignPoint {
    pub fn new(indices: Vec<usize>) -> Self {
        DesignPoint { indices }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpace {
    #[serde(rename = "parameter")]
    parameters: Vec<ParameterSpec>,
}

impl ParameterSpace {
    pub fn new(parameters: Vec<ParameterSpec>) -> Result<Self, SpaceError> {
        let mut names = HashSet::new();
        for p in &parameters {
            p.validate()?;
            if !names.insert(p.name.clone()) {
                return Err(SpaceError::DuplicateName(p.name.clone()));
            }
        }
        Ok(ParameterSpace { parameters })
    }

    /// Parses a space file: a TOML document with one `[[parameter]]` table per
    /// parameter (`name`, `kind = "categorical" | "numeric"`, then either
    /// `values` or `min`/`max`/`step`).
    pub fn from_toml_str(text: &str) -> Result<Self, SpaceError> {
        let raw: ParameterSpace = toml::from_str(text).map_err(|e| SpaceError::Parse(e.to_string()))?;
        ParameterSpace::new(raw.parameters)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("space serializes to TOML")
    }

    pub fn parameters(&self) -> &[ParameterSpec] {
        &self.parameters
    }

    pub fn len(&self) -> usize {
        self.parameters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parameters.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.parameters.iter().position(|p| p.name == name)
    }

    pub fn domain_sizes(&self) -> Vec<usize> {
        self.parameters.iter().map(ParameterSpec::domain_size).collect()
    }

    /// Exact number of design points.
    pub fn cardinality(&self) -> BigUint {
        self.parameters
            .iter()
            .fold(BigUint::from(1u32), |acc, p| acc * BigUint::from(p.domain_size()))
    }

    /// Cardinality if it fits in a `u64`.
    pub fn cardinality_u64(&self) -> Option<u64> {
        self.parameters
            .iter()
            .try_fold(1u64, |acc, p| acc.checked_mul(p.domain_size() as u64))
    }

    pub fn validate(&self, point: &DesignPoint) -> Result<(), SpaceError> {
        if point.len() != self.parameters.len() {
            return Err(SpaceError::WrongLength {
                expected: self.parameters.len(),
                got: point.len(),
            });
        }
        for (p, &k) in self.parameters.iter().zip(&point.indices) {
            let size = p.domain_size();
            if k >= size {
                return Err(SpaceError::OutOfDomain {
                    name: p.name.clone(),
                    index: k,
                    size,
                });
            }
        }
        Ok(())
    }

    pub fn value(&self, point: &DesignPoint, param: usize) -> ParamValue {
        self.parameters[param].value_at(point.indices[param])
    }

    /// Numeric value of parameter `name` (categoricals yield their index).
    pub fn number(&self, point: &DesignPoint, name: &str) -> Option<f64> {
        let i = self.position(name)?;
        match self.value(point, i) {
            ParamValue::Number(x) => Some(x),
            ParamValue::Label(_) => Some(point.indices[i] as f64),
        }
    }

    /// Label of categorical parameter `name`.
    pub fn label<'a>(&'a self, point: &DesignPoint, name: &str) -> Option<&'a str> {
        let i = self.position(name)?;
        match &self.parameters[i].kind {
            ParamKind::Categorical { values } => values.get(point.indices[i]).map(String::as_str),
            ParamKind::Numeric { .. } => None,
        }
    }

    /// Each parameter drawn independently and uniformly over its domain.
    pub fn sample_uniform(&self, rng: &mut TrialRng) -> DesignPoint {
        DesignPoint::new(
            self.parameters
                .iter()
                .map(|p| rng.gen_range(0..p.domain_size()))
                .collect(),
        )
    }

    /// Every point exactly once, lexicographic with the first parameter most
    /// significant.
    pub fn enumerate(&self, limit: u64) -> Result<Enumerate, SpaceError> {
        match self.cardinality_u64() {
            Some(n) if n <= limit => Ok(Enumerate {
                sizes: self.domain_sizes(),
                next: Some(vec![0; self.parameters.len()]),
            }),
            _ => Err(SpaceError::TooLarge {
                cardinality: self.cardinality(),
                limit,
            }),
        }
    }

    /// Total length of [`encode`](Self::encode) vectors.
    pub fn encoded_dim(&self) -> usize {
        self.parameters.iter().map(ParameterSpec::encoded_width).sum()
    }

    /// One-hot block per categorical, min-max normalized scalar per numeric.
    pub fn encode(&self, point: &DesignPoint) -> Result<Vec<f64>, SpaceError> {
        self.validate(point)?;
        let mut out = Vec::with_capacity(self.encoded_dim());
        for (p, &k) in self.parameters.iter().zip(&point.indices) {
            match &p.kind {
                ParamKind::Categorical { values } => {
                    out.extend((0..values.len()).map(|j| if j == k { 1.0 } else { 0.0 }));
                }
                ParamKind::Numeric { min, max, step } => {
                    let x = min + k as f64 * step;
                    out.push(if max > min { (x - min) / (max - min) } else { 0.0 });
                }
            }
        }
        Ok(out)
    }

    /// Inverse of `encode`: argmax per one-hot block, nearest grid point per scalar.
    pub fn decode(&self, encoded: &[f64]) -> Result<DesignPoint, SpaceError> {
        if encoded.len() != self.encoded_dim() {
            return Err(SpaceError::WrongEncodingLength {
                expected: self.encoded_dim(),
                got: encoded.len(),
            });
        }
        let mut offset = 0;
        let mut indices = Vec::with_capacity(self.parameters.len());
        for p in &self.parameters {
            match &p.kind {
                ParamKind::Categorical { values } => {
                    let block = &encoded[offset..offset + values.len()];
                    let mut best = 0;
                    for (j, &x) in block.iter().enumerate() {
                        if x > block[best] {
                            best = j;
                        }
                    }
                    indices.push(best);
                    offset += values.len();
                }
                ParamKind::Numeric { min, max, step } => {
                    let x = min + encoded[offset] * (max - min);
                    let k = ((x - min) / step).round().max(0.0) as usize;
                    indices.push(k.min(p.domain_size() - 1));
                    offset += 1;
                }
            }
        }
        Ok(DesignPoint::new(indices))
    }

    /// Resamples parameter `param` uniformly over its domain minus the current
    /// value. Single-value domains are left alone.
    pub fn resample_param(&self, point: &mut DesignPoint, param: usize, rng: &mut TrialRng) {
        let size = self.parameters[param].domain_size();
        if size <= 1 {
            return;
        }
        let current = point.indices[param];
        let mut k = rng.gen_range(0..size - 1);
        if k >= current {
            k += 1;
        }
        point.indices[param] = k;
    }

    /// Copy of `point` with one uniformly chosen parameter resampled.
    pub fn neighbor(&self, point: &DesignPoint, rng: &mut TrialRng) -> DesignPoint {
        let mut out = point.clone();
        if self.parameters.is_empty() {
            return out;
        }
        let param = rng.gen_range(0..self.parameters.len());
        self.resample_param(&mut out, param, rng);
        out
    }

    /// Design as a parameter-name → value map.
    pub fn to_map(&self, point: &DesignPoint) -> BTreeMap<String, ParamValue> {
        self.parameters
            .iter()
            .zip(&point.indices)
            .map(|(p, &k)| (p.name.clone(), p.value_at(k)))
            .collect()
    }

    /// Inverse of [`to_map`](Self::to_map). Every parameter must be present.
    pub fn from_map(&self, map: &BTreeMap<String, ParamValue>) -> Result<DesignPoint, SpaceError> {
        for name in map.keys() {
            if self.position(name).is_none() {
                return Err(SpaceError::UnknownParameter(name.clone()));
            }
        }
        let mut indices = Vec::with_capacity(self.parameters.len());
        for p in &self.parameters {
            let v = map
                .get(&p.name)
                .ok_or_else(|| SpaceError::MissingParameter(p.name.clone()))?;
            let k = p.index_of(v).ok_or_else(|| SpaceError::NotInDomain {
                name: p.name.clone(),
                value: v.to_string(),
            })?;
            indices.push(k);
        }
        Ok(DesignPoint::new(indices))
    }
}

/// Iterator returned by [`ParameterSpace::enumerate`].
#[derive(Debug, Clone)]
pub struct Enumerate {
    sizes: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl Iterator for Enumerate {
    type Item = DesignPoint;

    fn next(&mut self) -> Option<DesignPoint> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut carried = true;
        for i in (0..succ.len()).rev() {
            succ[i] += 1;
            if succ[i] < self.sizes[i] {
                carried = false;
                break;
            }
            succ[i] = 0;
        }
        if !carried {
            self.next = Some(succ);
        }
        Some(DesignPoint::new(current))
    }
}
