//! Typed hyperparameter domains and configurations.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use super::HpoError;
use crate::rng::SeededRng;
use crate::solver::SolverHyperparams;

/// Domain of one hyperparameter. Bounds are inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ParamKind {
    FloatLinear { lo: f64, hi: f64 },
    FloatLog { lo: f64, hi: f64 },
    Integer { lo: i64, hi: i64 },
    IntegerLog { lo: i64, hi: i64 },
    Categorical { choices: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ParamKind,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, kind: ParamKind) -> Self {
        Self {
            name: name.into(),
            kind,
        }
    }

    fn check(&self) -> Result<(), HpoError> {
        let bad = |msg: &str| Err(HpoError::InvalidSpace(format!("{}: {msg}", self.name)));
        match &self.kind {
            ParamKind::FloatLinear { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return bad("bounds must be finite with lo < hi");
                }
            }
            ParamKind::FloatLog { lo, hi } => {
                if !(hi.is_finite() && *lo > 0.0 && lo < hi) {
                    return bad("log bounds need 0 < lo < hi");
                }
            }
            ParamKind::Integer { lo, hi } => {
                if lo >= hi {
                    return bad("bounds need lo < hi");
                }
            }
            ParamKind::IntegerLog { lo, hi } => {
                if *lo <= 0 || lo >= hi {
                    return bad("log bounds need 0 < lo < hi");
                }
            }
            ParamKind::Categorical { choices } => {
                if choices.is_empty() {
                    return bad("categorical needs at least one choice");
                }
                let mut sorted = choices.clone();
                sorted.sort();
                sorted.dedup();
                if sorted.len() != choices.len() {
                    return bad("categorical choices must be unique");
                }
            }
        }
        Ok(())
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, ParamKind::Categorical { .. })
    }

    /// Whether `value` lies in this parameter's domain.
    pub fn contains(&self, value: &ParamValue) -> bool {
        match (&self.kind, value) {
            (ParamKind::Categorical { choices }, ParamValue::Categorical(c)) => choices.contains(c),
            (ParamKind::Categorical { .. }, _) => false,
            (ParamKind::Integer { lo, hi } | ParamKind::IntegerLog { lo, hi }, ParamValue::Int(v)) => {
                lo <= v && v <= hi
            }
            (ParamKind::Integer { .. } | ParamKind::IntegerLog { .. }, _) => false,
            (ParamKind::FloatLinear { lo, hi } | ParamKind::FloatLog { lo, hi }, v) => match v.as_f64() {
                Some(x) => x.is_finite() && *lo <= x && x <= *hi,
                None => false,
            },
        }
    }

    /// Position of `value` in `[0, 1]` within the (log-)transformed domain.
    ///
    /// Categorical values map to `index / (choices − 1)`.
    pub fn to_unit(&self, value: &ParamValue) -> Option<f64> {
        let u = match (&self.kind, value) {
            (ParamKind::Categorical { choices }, ParamValue::Categorical(c)) => {
                let idx = choices.iter().position(|x| x == c)?;
                if choices.len() == 1 {
                    0.0
                } else {
                    idx as f64 / (choices.len() - 1) as f64
                }
            }
            (ParamKind::Categorical { .. }, _) => return None,
            (ParamKind::FloatLinear { lo, hi }, v) => (v.as_f64()? - lo) / (hi - lo),
            (ParamKind::FloatLog { lo, hi }, v) => log_unit(v.as_f64()?, *lo, *hi),
            (ParamKind::Integer { lo, hi }, v) => (v.as_f64()? - *lo as f64) / (*hi - *lo) as f64,
            (ParamKind::IntegerLog { lo, hi }, v) => log_unit(v.as_f64()?, *lo as f64, *hi as f64),
        };
        Some(u)
    }

    /// Inverse of [`to_unit`](Self::to_unit) for numeric kinds; integers are
    /// rounded after the inverse transform. `u` is clamped to `[0, 1]`.
    pub fn from_unit(&self, u: f64) -> ParamValue {
        let u = u.clamp(0.0, 1.0);
        match &self.kind {
            ParamKind::FloatLinear { lo, hi } => ParamValue::Float((lo + u * (hi - lo)).clamp(*lo, *hi)),
            ParamKind::FloatLog { lo, hi } => ParamValue::Float(log_inverse(u, *lo, *hi).clamp(*lo, *hi)),
            ParamKind::Integer { lo, hi } => {
                let x = *lo as f64 + u * (*hi - *lo) as f64;
                ParamValue::Int((libm::round(x) as i64).clamp(*lo, *hi))
            }
            ParamKind::IntegerLog { lo, hi } => {
                let x = log_inverse(u, *lo as f64, *hi as f64);
                ParamValue::Int((libm::round(x) as i64).clamp(*lo, *hi))
            }
            ParamKind::Categorical { choices } => {
                let idx = libm::round(u * (choices.len() - 1) as f64) as usize;
                ParamValue::Categorical(choices[idx.min(choices.len() - 1)].clone())
            }
        }
    }

    /// Uniform draw in the transformed domain.
    pub fn sample_uniform(&self, rng: &mut SeededRng) -> ParamValue {
        match &self.kind {
            ParamKind::Categorical { choices } => ParamValue::Categorical(choices[rng.below(choices.len())].clone()),
            _ => self.from_unit(rng.uniform()),
        }
    }
}

fn log_unit(x: f64, lo: f64, hi: f64) -> f64 {
    if x <= 0.0 {
        return f64::NAN;
    }
    (libm::log(x) - libm::log(lo)) / (libm::log(hi) - libm::log(lo))
}

fn log_inverse(u: f64, lo: f64, hi: f64) -> f64 {
    if u <= 0.0 {
        return lo;
    }
    if u >= 1.0 {
        return hi;
    }
    libm::exp(libm::log(lo) + u * (libm::log(hi) - libm::log(lo)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Float(f64),
    Categorical(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Int(v) => Some(*v as f64),
            ParamValue::Float(v) => Some(*v),
            ParamValue::Categorical(_) => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Float(v) => write!(f, "{v}"),
            ParamValue::Categorical(s) => f.write_str(s),
        }
    }
}

/// One full assignment of hyperparameter values.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Config(BTreeMap<String, ParamValue>);

impl Config {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: impl Into<String>, value: ParamValue) -> Self {
        self.0.insert(name.into(), value);
        self
    }

    pub fn set(&mut self, name: impl Into<String>, value: ParamValue) {
        self.0.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Option<&ParamValue> {
        self.0.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &ParamValue)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn number(&self, name: &str) -> Result<f64, HpoError> {
        self.get(name)
            .ok_or_else(|| HpoError::MissingParameter(name.into()))?
            .as_f64()
            .ok_or_else(|| HpoError::InvalidConfig(format!("{name} must be numeric")))
    }

    fn integer(&self, name: &str) -> Result<i64, HpoError> {
        match self.get(name) {
            Some(ParamValue::Int(v)) => Ok(*v),
            Some(ParamValue::Float(v)) if libm::trunc(*v) == *v => Ok(*v as i64),
            Some(_) => Err(HpoError::InvalidConfig(format!("{name} must be an integer"))),
            None => Err(HpoError::MissingParameter(name.into())),
        }
    }
}

impl FromIterator<(String, ParamValue)> for Config {
    fn from_iter<T: IntoIterator<Item = (String, ParamValue)>>(iter: T) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// Named cross-parameter constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum ValidityRule {
    /// `left >= right` numerically.
    AtLeast { name: String, left: String, right: String },
}

impl ValidityRule {
    pub fn name(&self) -> &str {
        match self {
            ValidityRule::AtLeast { name, .. } => name,
        }
    }

    fn holds(&self, config: &Config) -> bool {
        match self {
            ValidityRule::AtLeast { left, right, .. } => {
                match (
                    config.get(left).and_then(ParamValue::as_f64),
                    config.get(right).and_then(ParamValue::as_f64),
                ) {
                    (Some(l), Some(r)) => l >= r,
                    _ => false,
                }
            }
        }
    }
}

/// Ordered parameter domains plus validity rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperparameterSpace {
    params: Vec<ParamSpec>,
    rules: Vec<ValidityRule>,
}

impl HyperparameterSpace {
    pub fn new(params: Vec<ParamSpec>, rules: Vec<ValidityRule>) -> Result<Self, HpoError> {
        for (i, p) in params.iter().enumerate() {
            p.check()?;
            if params[..i].iter().any(|q| q.name == p.name) {
                return Err(HpoError::InvalidSpace(format!("duplicate parameter '{}'", p.name)));
            }
        }
        for rule in &rules {
            let ValidityRule::AtLeast { left, right, .. } = rule;
            for side in [left, right] {
                if !params.iter().any(|p| &p.name == side) {
                    return Err(HpoError::InvalidSpace(format!(
                        "rule '{}' references unknown parameter '{side}'",
                        rule.name()
                    )));
                }
            }
        }
        Ok(Self { params, rules })
    }

    pub fn params(&self) -> &[ParamSpec] {
        &self.params
    }

    pub fn rules(&self) -> &[ValidityRule] {
        &self.rules
    }

    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Draws every parameter uniformly in its transformed domain, in space order.
    pub fn sample_uniform(&self, rng: &mut SeededRng) -> Config {
        self.params
            .iter()
            .map(|p| (p.name.clone(), p.sample_uniform(rng)))
            .collect()
    }
}

/// True iff every parameter is in its domain and every rule holds.
///
/// Unknown or missing parameter names are errors, not invalid configs.
pub fn validate_config(space: &HyperparameterSpace, config: &Config) -> Result<bool, HpoError> {
    if let Some((name, _)) = config.iter().find(|(name, _)| space.param(name).is_none()) {
        return Err(HpoError::UnknownParameter(name.clone()));
    }
    for p in space.params() {
        match config.get(&p.name) {
            None => return Err(HpoError::MissingParameter(p.name.clone())),
            Some(v) if !p.contains(v) => return Ok(false),
            Some(_) => {}
        }
    }
    Ok(space.rules().iter().all(|r| r.holds(config)))
}

/// Parameter names of the solver's search space, in space order.
pub const SOLVER_PARAMS: [&str; 7] = [
    "learning_rate",
    "initial_epsilon",
    "final_epsilon",
    "epsilon_decay_steps",
    "num_sample_w",
    "optimistic_init",
    "eval_episodes",
];

/// Search space over [`SolverHyperparams`].
pub fn solver_space() -> HyperparameterSpace {
    use ParamKind::*;
    let params = vec![
        ParamSpec::new("learning_rate", FloatLog { lo: 0.01, hi: 1.0 }),
        ParamSpec::new("initial_epsilon", FloatLinear { lo: 0.01, hi: 1.0 }),
        ParamSpec::new("final_epsilon", FloatLinear { lo: 0.01, hi: 1.0 }),
        ParamSpec::new("epsilon_decay_steps", IntegerLog { lo: 1, hi: 100_000 }),
        ParamSpec::new("num_sample_w", Integer { lo: 2, hi: 10 }),
        ParamSpec::new("optimistic_init", FloatLinear { lo: 0.0, hi: 30.0 }),
        ParamSpec::new("eval_episodes", Integer { lo: 1, hi: 5 }),
    ];
    let rules = vec![ValidityRule::AtLeast {
        name: "epsilon_decays".to_string(),
        left: "initial_epsilon".to_string(),
        right: "final_epsilon".to_string(),
    }];
    HyperparameterSpace::new(params, rules).expect("solver space is well formed")
}

pub fn hyperparams_from_config(config: &Config) -> Result<SolverHyperparams, HpoError> {
    let non_negative = |name: &str, v: i64| {
        usize::try_from(v).map_err(|_| HpoError::InvalidConfig(format!("{name} must be nonnegative")))
    };
    Ok(SolverHyperparams {
        learning_rate: config.number("learning_rate")?,
        initial_epsilon: config.number("initial_epsilon")?,
        final_epsilon: config.number("final_epsilon")?,
        epsilon_decay_steps: non_negative("epsilon_decay_steps", config.integer("epsilon_decay_steps")?)? as u64,
        num_sample_w: non_negative("num_sample_w", config.integer("num_sample_w")?)?,
        optimistic_init: config.number("optimistic_init")?,
        eval_episodes: non_negative("eval_episodes", config.integer("eval_episodes")?)?,
    })
}

pub fn config_from_hyperparams(hp: &SolverHyperparams) -> Config {
    Config::new()
        .with("learning_rate", ParamValue::Float(hp.learning_rate))
        .with("initial_epsilon", ParamValue::Float(hp.initial_epsilon))
        .with("final_epsilon", ParamValue::Float(hp.final_epsilon))
        .with("epsilon_decay_steps", ParamValue::Int(hp.epsilon_decay_steps as i64))
        .with("num_sample_w", ParamValue::Int(hp.num_sample_w as i64))
        .with("optimistic_init", ParamValue::Float(hp.optimistic_init))
        .with("eval_episodes", ParamValue::Int(hp.eval_episodes as i64))
}
