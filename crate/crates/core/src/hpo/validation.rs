//! Retraining a chosen configuration on held-out seeds.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::objective::SeedExecutor;
use super::space::{hyperparams_from_config, Config};
use super::study::check_disjoint;
use super::HpoError;
use crate::envs::TabularEnv;
use crate::metrics::{metric_snapshot, Metric, MetricConfig, MetricSnapshot};
use crate::solver::{train, SolverResult};
use crate::stats;

/// Metric values of one seed's cumulative front at one snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveSample {
    pub step: u64,
    pub metrics: MetricSnapshot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub result: SolverResult,
    pub curve: Vec<CurveSample>,
}

impl SeedRun {
    pub fn final_metrics(&self) -> Option<&MetricSnapshot> {
        self.curve.last().map(|c| &c.metrics)
    }
}

/// Across-seed summary of one metric at one step. Statistics are `None` when
/// no seed has a value; a single seed gives a zero-width interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: u64,
    pub metric: Metric,
    pub mean: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub per_seed: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub config: Config,
    pub seeds: Vec<u64>,
    pub runs: Vec<SeedRun>,
    /// Ordered by step, then metric.
    pub curves: Vec<CurvePoint>,
}

impl ValidationReport {
    /// Last-snapshot value of `metric` per seed, in seed order.
    pub fn final_values(&self, metric: Metric) -> Vec<Option<f64>> {
        self.runs
            .iter()
            .map(|r| r.final_metrics().and_then(|m| m.get(metric)))
            .collect()
    }

    /// Mean and 95% interval of the final values of `metric`.
    pub fn final_summary(&self, metric: Metric) -> Option<(f64, f64, f64)> {
        let values: Vec<f64> = self.final_values(metric).into_iter().flatten().collect();
        (!values.is_empty()).then(|| stats::mean_ci95(&values))
    }
}

/// Trains `config` once per validation seed with snapshots every
/// `snapshot_every` steps. Seed overlap with `search_seeds` is rejected before
/// any training happens.
#[allow(clippy::too_many_arguments)]
pub fn run_validation<E: SeedExecutor>(
    env: &TabularEnv,
    config: &Config,
    validation_seeds: &[u64],
    search_seeds: &[u64],
    budget_steps: u64,
    snapshot_every: u64,
    metric_config: &MetricConfig,
    executor: &E,
) -> Result<ValidationReport, HpoError> {
    check_disjoint(search_seeds, validation_seeds)?;
    let hp = hyperparams_from_config(config)?;
    hp.validate()?;
    let outcomes = executor.map(validation_seeds, |seed| -> Result<SeedRun, HpoError> {
        let result = train(env, &hp, seed, budget_steps, snapshot_every)?;
        let curve = result
            .snapshots
            .iter()
            .map(|s| {
                Ok(CurveSample {
                    step: s.step,
                    metrics: metric_snapshot(s.front.points(), metric_config)?,
                })
            })
            .collect::<Result<Vec<_>, HpoError>>()?;
        Ok(SeedRun { seed, result, curve })
    });
    let runs = outcomes.into_iter().collect::<Result<Vec<_>, _>>()?;
    let curves = summarize(&runs);
    Ok(ValidationReport {
        config: config.clone(),
        seeds: validation_seeds.to_vec(),
        runs,
        curves,
    })
}

fn summarize(runs: &[SeedRun]) -> Vec<CurvePoint> {
    let Some(first) = runs.first() else {
        return Vec::new();
    };
    let mut points = Vec::new();
    for (i, sample) in first.curve.iter().enumerate() {
        for metric in Metric::ALL {
            let per_seed: Vec<Option<f64>> = runs
                .iter()
                .map(|r| r.curve.get(i).and_then(|c| c.metrics.get(metric)))
                .collect();
            let present: Vec<f64> = per_seed.iter().flatten().copied().collect();
            let (mean, ci_low, ci_high) = if present.is_empty() {
                (None, None, None)
            } else {
                let (m, lo, hi) = stats::mean_ci95(&present);
                (Some(m), Some(lo), Some(hi))
            };
            points.push(CurvePoint {
                step: sample.step,
                metric,
                mean,
                ci_low,
                ci_high,
                per_seed,
            });
        }
    }
    points
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::two_state_toy;
    use crate::hpo::objective::SequentialExecutor;
    use crate::hpo::space::config_from_hyperparams;
    use crate::metrics::ReferencePoint;
    use crate::solver::SolverHyperparams;

    fn setup() -> (TabularEnv, Config, MetricConfig) {
        let env = two_state_toy();
        let config = config_from_hyperparams(&SolverHyperparams {
            learning_rate: 0.5,
            initial_epsilon: 1.0,
            final_epsilon: 0.1,
            epsilon_decay_steps: 500,
            num_sample_w: 3,
            optimistic_init: 2.0,
            eval_episodes: 1,
        });
        let mc = MetricConfig::new(ReferencePoint::new(alloc::vec![-1.0, -1.0]).unwrap())
            .with_reference_front(env.true_front().unwrap());
        (env, config, mc)
    }

    #[test]
    fn overlap_rejected() {
        let (env, config, mc) = setup();
        let err = run_validation(&env, &config, &[1, 2], &[2], 100, 50, &mc, &SequentialExecutor);
        assert_eq!(err.unwrap_err(), HpoError::SeedOverlap(alloc::vec![2]));
    }

    #[test]
    fn single_seed_has_zero_width_interval() {
        let (env, config, mc) = setup();
        let report = run_validation(&env, &config, &[4], &[0], 1_000, 250, &mc, &SequentialExecutor).unwrap();
        assert_eq!(report.curves.len(), 4 * Metric::ALL.len());
        for p in &report.curves {
            assert_eq!(p.ci_low, p.mean);
            assert_eq!(p.ci_high, p.mean);
        }
    }

    #[test]
    fn curves_follow_snapshot_steps() {
        let (env, config, mc) = setup();
        let report = run_validation(&env, &config, &[4, 5, 6], &[0], 1_000, 300, &mc, &SequentialExecutor).unwrap();
        let steps: Vec<u64> = report
            .curves
            .iter()
            .filter(|p| p.metric == Metric::Hv)
            .map(|p| p.step)
            .collect();
        assert_eq!(steps, [300, 600, 900, 1_000]);
        assert_eq!(report.final_values(Metric::Hv).len(), 3);
    }
}
