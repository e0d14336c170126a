//! Turning a configuration into one scalar: train per seed, score, aggregate.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use super::space::{hyperparams_from_config, validate_config, Config, HyperparameterSpace, ParamValue};
use super::study::TrialStatus;
use crate::envs::TabularEnv;
use crate::metrics::{metric_snapshot, Metric, MetricConfig, MetricSnapshot};
use crate::pareto::ParetoFront;
use crate::rng::SeededRng;
use crate::solver::train;
use crate::stats;

/// Objective assigned to a failed seed or an unusable configuration.
pub const PENALTY: f64 = -1e9;

/// How per-seed objectives are combined into one trial objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Mean,
    Median,
    Min,
}

impl Aggregation {
    pub fn name(self) -> &'static str {
        match self {
            Aggregation::Mean => "mean",
            Aggregation::Median => "median",
            Aggregation::Min => "min",
        }
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Aggregation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean" => Ok(Aggregation::Mean),
            "median" => Ok(Aggregation::Median),
            "min" => Ok(Aggregation::Min),
            other => Err(alloc::format!(
                "unknown aggregation '{other}' (expected mean, median or min)"
            )),
        }
    }
}

/// Combines per-seed values; an empty slice yields [`PENALTY`].
pub fn aggregate(values: &[f64], aggregation: Aggregation) -> f64 {
    if values.is_empty() {
        return PENALTY;
    }
    match aggregation {
        Aggregation::Mean => stats::mean(values),
        Aggregation::Median => stats::median(values),
        Aggregation::Min => values.iter().copied().fold(f64::INFINITY, f64::min),
    }
}

/// Metric value oriented so that higher is better (IGD and sparsity are negated).
pub fn scalarize(metric: Metric, snapshot: &MetricSnapshot) -> Option<f64> {
    let v = snapshot.get(metric)?;
    if !v.is_finite() {
        return None;
    }
    Some(if metric.higher_is_better() { v } else { -v })
}

/// Outcome of training on one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub front: Option<ParetoFront>,
    /// Oriented objective for this seed, [`PENALTY`] on failure.
    pub metric_value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SeedResult {
    pub fn failed(seed: u64, error: impl ToString) -> Self {
        Self {
            seed,
            front: None,
            metric_value: PENALTY,
            error: Some(error.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub per_seed: Vec<SeedResult>,
    pub objective: f64,
    pub status: TrialStatus,
}

impl Evaluation {
    /// Aggregates per-seed values; the trial fails only if every seed failed.
    pub fn from_seeds(per_seed: Vec<SeedResult>, aggregation: Aggregation) -> Self {
        if per_seed.iter().all(|s| s.error.is_some()) {
            return Self {
                per_seed,
                objective: PENALTY,
                status: TrialStatus::Failed,
            };
        }
        let values: Vec<f64> = per_seed.iter().map(|s| s.metric_value).collect();
        Self {
            objective: aggregate(&values, aggregation),
            per_seed,
            status: TrialStatus::Completed,
        }
    }

    /// Every seed penalised because the configuration itself is unusable.
    pub fn invalid(seeds: &[u64], error: impl ToString) -> Self {
        let error = error.to_string();
        Self {
            per_seed: seeds.iter().map(|&s| SeedResult::failed(s, &error)).collect(),
            objective: PENALTY,
            status: TrialStatus::Invalid,
        }
    }
}

/// Scores a configuration across seeds. Implementations must not panic on
/// bad configurations; they report them through [`Evaluation`].
pub trait Objective {
    fn evaluate(&self, config: &Config, seeds: &[u64]) -> Evaluation;
}

/// Runs one job per seed and returns the outputs in seed order.
pub trait SeedExecutor {
    fn map<T, F>(&self, seeds: &[u64], job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send;
}

impl<E: SeedExecutor> SeedExecutor for &E {
    fn map<T, F>(&self, seeds: &[u64], job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        (**self).map(seeds, job)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SequentialExecutor;

impl SeedExecutor for SequentialExecutor {
    fn map<T, F>(&self, seeds: &[u64], job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        seeds.iter().map(|&s| job(s)).collect()
    }
}

/// Trains the solver on `env` once per seed and scores the returned front.
#[derive(Debug, Clone)]
pub struct MorlObjective<'a, E> {
    pub env: &'a TabularEnv,
    pub metric: Metric,
    pub metric_config: &'a MetricConfig,
    pub aggregation: Aggregation,
    pub budget_steps: u64,
    pub snapshot_every: u64,
    pub executor: E,
}

impl<E: SeedExecutor> MorlObjective<'_, E> {
    fn run_seed(&self, hp: &crate::solver::SolverHyperparams, seed: u64) -> SeedResult {
        let result = match train(self.env, hp, seed, self.budget_steps, self.snapshot_every) {
            Ok(r) => r,
            Err(e) => return SeedResult::failed(seed, e),
        };
        let front = result.pareto_front;
        let value = metric_snapshot(front.points(), self.metric_config)
            .map_err(|e| e.to_string())
            .and_then(|snap| {
                scalarize(self.metric, &snap)
                    .ok_or_else(|| alloc::format!("{} is undefined for this front", self.metric))
            });
        match value {
            Ok(v) => SeedResult {
                seed,
                front: Some(front),
                metric_value: v,
                error: None,
            },
            Err(e) => SeedResult {
                front: Some(front),
                ..SeedResult::failed(seed, e)
            },
        }
    }
}

impl<E: SeedExecutor + Sync> Objective for MorlObjective<'_, E> {
    fn evaluate(&self, config: &Config, seeds: &[u64]) -> Evaluation {
        let hp = match hyperparams_from_config(config) {
            Ok(hp) => hp,
            Err(e) => return Evaluation::invalid(seeds, e),
        };
        if let Err(e) = hp.validate() {
            return Evaluation::invalid(seeds, e);
        }
        let per_seed = self.executor.map(seeds, |seed| self.run_seed(&hp, seed));
        Evaluation::from_seeds(per_seed, self.aggregation)
    }
}

/// Deterministic stand-in objective with a known optimum, used to check that
/// an optimizer makes progress without training anything.
///
/// The score is `exp(-d² / 2w²)`, where `d` is the root-mean-square distance
/// per numeric parameter to a seeded peak in the transformed unit cube and `w`
/// the width; a categorical mismatch halves
/// it. The peak is a valid configuration, so the best attainable score is 1.
#[derive(Debug, Clone)]
pub struct SyntheticObjective {
    space: HyperparameterSpace,
    peak: Config,
    width: f64,
}

impl SyntheticObjective {
    pub fn new(space: HyperparameterSpace, seed: u64, width: f64) -> Self {
        let mut rng = SeededRng::new(seed);
        let peak = loop {
            let c = space.sample_uniform(&mut rng);
            if validate_config(&space, &c) == Ok(true) {
                break c;
            }
        };
        Self { space, peak, width }
    }

    pub fn peak(&self) -> &Config {
        &self.peak
    }

    pub fn peak_value(&self) -> f64 {
        1.0
    }

    pub fn score(&self, config: &Config) -> Option<f64> {
        if validate_config(&self.space, config).ok()? {
            let mut d2 = 0.0;
            let mut numeric = 0usize;
            let mut factor = 1.0;
            for p in self.space.params() {
                let (v, target) = (config.get(&p.name)?, self.peak.get(&p.name)?);
                if let ParamValue::Categorical(_) = v {
                    if v != target {
                        factor *= 0.5;
                    }
                } else {
                    let d = p.to_unit(v)? - p.to_unit(target)?;
                    d2 += d * d;
                    numeric += 1;
                }
            }
            let d2 = if numeric > 0 { d2 / numeric as f64 } else { 0.0 };
            Some(factor * libm::exp(-d2 / (2.0 * self.width * self.width)))
        } else {
            None
        }
    }
}

impl Objective for SyntheticObjective {
    fn evaluate(&self, config: &Config, seeds: &[u64]) -> Evaluation {
        let Some(v) = self.score(config) else {
            return Evaluation::invalid(seeds, "configuration outside the space");
        };
        let per_seed = seeds
            .iter()
            .map(|&seed| SeedResult {
                seed,
                front: None,
                metric_value: v,
                error: None,
            })
            .collect();
        Evaluation::from_seeds(per_seed, Aggregation::Mean)
    }
}
