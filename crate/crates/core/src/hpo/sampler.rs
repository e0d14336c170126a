//! Proposal strategies: random, grid and a density-ratio model.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use super::space::{validate_config, Config, HyperparameterSpace, ParamKind, ParamSpec, ParamValue};
use super::study::{Trial, TrialStatus};
use super::HpoError;
use crate::rng::SeededRng;

/// Proposes the next configuration given the completed history.
///
/// `history` is in trial order. Samplers may return invalid configurations;
/// the [`Study`](super::Study) redraws those.
pub trait Sampler {
    fn sample(
        &mut self,
        space: &HyperparameterSpace,
        history: &[Trial],
        rng: &mut SeededRng,
    ) -> Result<Config, HpoError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    Random,
    Grid,
    DensityModel,
}

impl SamplerKind {
    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Random => "random",
            SamplerKind::Grid => "grid",
            SamplerKind::DensityModel => "density-model",
        }
    }

    pub fn build(self) -> Box<dyn Sampler + Send> {
        match self {
            SamplerKind::Random => Box::new(RandomSearch),
            SamplerKind::Grid => Box::new(GridSearch::default()),
            SamplerKind::DensityModel => Box::new(DensityModel::default()),
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(SamplerKind::Random),
            "grid" => Ok(SamplerKind::Grid),
            "density-model" | "tpe" => Ok(SamplerKind::DensityModel),
            other => Err(alloc::format!(
                "unknown optimizer '{other}' (expected random, grid or density-model)"
            )),
        }
    }
}

/// Independent uniform draws in each parameter's transformed domain.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomSearch;

impl Sampler for RandomSearch {
    fn sample(&mut self, space: &HyperparameterSpace, _: &[Trial], rng: &mut SeededRng) -> Result<Config, HpoError> {
        Ok(space.sample_uniform(rng))
    }
}

/// Cartesian grid walked in row-major order (last parameter fastest),
/// skipping invalid points.
///
/// Numeric parameters take `points_per_axis` evenly spaced values in the
/// transformed domain (deduplicated after integer rounding); categorical
/// parameters take every choice.
#[derive(Debug, Clone)]
pub struct GridSearch {
    points_per_axis: usize,
    axes: Option<Vec<Vec<ParamValue>>>,
    cursor: Vec<usize>,
    exhausted: bool,
}

impl Default for GridSearch {
    fn default() -> Self {
        Self::new(3)
    }
}

impl GridSearch {
    pub fn new(points_per_axis: usize) -> Self {
        Self {
            points_per_axis: points_per_axis.max(2),
            axes: None,
            cursor: Vec::new(),
            exhausted: false,
        }
    }

    fn axis(&self, p: &ParamSpec) -> Vec<ParamValue> {
        if let ParamKind::Categorical { choices } = &p.kind {
            return choices.iter().cloned().map(ParamValue::Categorical).collect();
        }
        let k = self.points_per_axis;
        let mut values: Vec<ParamValue> = Vec::with_capacity(k);
        for i in 0..k {
            let v = p.from_unit(i as f64 / (k - 1) as f64);
            if !values.contains(&v) {
                values.push(v);
            }
        }
        values
    }

    fn advance(&mut self, sizes: &[usize]) {
        for i in (0..self.cursor.len()).rev() {
            self.cursor[i] += 1;
            if self.cursor[i] < sizes[i] {
                return;
            }
            self.cursor[i] = 0;
        }
        self.exhausted = true;
    }
}

impl Sampler for GridSearch {
    fn sample(&mut self, space: &HyperparameterSpace, _: &[Trial], _: &mut SeededRng) -> Result<Config, HpoError> {
        if self.axes.is_none() {
            let axes: Vec<_> = space.params().iter().map(|p| self.axis(p)).collect();
            self.cursor = alloc::vec![0; axes.len()];
            self.axes = Some(axes);
        }
        let axes = self.axes.take().expect("axes initialised");
        let sizes: Vec<usize> = axes.iter().map(Vec::len).collect();
        let mut found = None;
        while !self.exhausted {
            let config: Config = space
                .params()
                .iter()
                .zip(&axes)
                .zip(&self.cursor)
                .map(|((p, axis), &i)| (p.name.clone(), axis[i].clone()))
                .collect();
            self.advance(&sizes);
            if validate_config(space, &config)? {
                found = Some(config);
                break;
            }
        }
        self.axes = Some(axes);
        found.ok_or(HpoError::GridExhausted)
    }
}

/// Tree-structured Parzen estimator.
///
/// Completed trials are split into the best `gamma` fraction ("good") and the
/// rest. Each parameter gets a good and a bad density in its transformed
/// `[0, 1]` domain: truncated Gaussian kernels around the observations plus one
/// uniform prior component, with a Scott-rule bandwidth. Candidates are drawn
/// from the good densities and the one maximising `good / bad` is proposed.
/// Until `n_startup` trials have completed the sampler draws exactly like
/// [`RandomSearch`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityModel {
    pub gamma: f64,
    pub n_candidates: usize,
    pub n_startup: usize,
    pub min_bandwidth: f64,
    /// Weight of the uniform prior component relative to one kernel.
    pub prior_weight: f64,
}

impl Default for DensityModel {
    fn default() -> Self {
        Self {
            gamma: 0.25,
            n_candidates: 24,
            n_startup: 10,
            min_bandwidth: 0.01,
            prior_weight: 1.0,
        }
    }
}

/// Parzen density for one numeric parameter on `[0, 1]`.
struct Parzen {
    centers: Vec<f64>,
    bandwidth: f64,
    prior_weight: f64,
}

impl Parzen {
    fn fit(observations: Vec<f64>, min_bandwidth: f64, prior_weight: f64) -> Self {
        let n = observations.len();
        let bandwidth = if n < 2 {
            0.25
        } else {
            let mean = observations.iter().sum::<f64>() / n as f64;
            let var = observations.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
            1.06 * libm::sqrt(var) * libm::pow(n as f64, -0.2)
        };
        // Floor shrinks with the sample count so a tight cluster of early
        // good points cannot freeze the search.
        let floor = min_bandwidth.max(1.0 / (n as f64 + 1.0).min(100.0));
        Self {
            centers: observations,
            bandwidth: bandwidth.clamp(floor, 1.0),
            prior_weight,
        }
    }

    fn total_weight(&self) -> f64 {
        self.centers.len() as f64 + self.prior_weight
    }

    fn sample(&self, rng: &mut SeededRng) -> f64 {
        let c = (rng.uniform() * self.total_weight()) as usize;
        if c >= self.centers.len() {
            return rng.uniform();
        }
        let mu = self.centers[c];
        for _ in 0..64 {
            let x = mu + self.bandwidth * rng.normal();
            if (0.0..=1.0).contains(&x) {
                return x;
            }
        }
        mu
    }

    fn log_pdf(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let mut total = self.prior_weight;
        for &mu in &self.centers {
            let mass = normal_cdf((1.0 - mu) / h) - normal_cdf(-mu / h);
            let z = (x - mu) / h;
            total += libm::exp(-0.5 * z * z) / (h * libm::sqrt(core::f64::consts::TAU) * mass.max(1e-300));
        }
        libm::log(total / self.total_weight())
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(z / core::f64::consts::SQRT_2))
}

/// Smoothed frequencies for one categorical parameter.
struct Categorical {
    probs: Vec<f64>,
}

impl Categorical {
    fn fit(indices: &[usize], k: usize) -> Self {
        let mut counts = alloc::vec![1.0; k];
        for &i in indices {
            counts[i] += 1.0;
        }
        let total: f64 = counts.iter().sum();
        Self {
            probs: counts.into_iter().map(|c| c / total).collect(),
        }
    }

    fn sample(&self, rng: &mut SeededRng) -> usize {
        let u = rng.uniform();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.probs.len() - 1
    }
}

enum Model {
    Numeric {
        good: Parzen,
        bad: Parzen,
    },
    Categorical {
        good: Categorical,
        bad: Categorical,
        choices: Vec<String>,
    },
}

impl DensityModel {
    fn fit(&self, spec: &ParamSpec, good: &[&Trial], bad: &[&Trial]) -> Model {
        match &spec.kind {
            ParamKind::Categorical { choices } => {
                let index = |ts: &[&Trial]| -> Vec<usize> {
                    ts.iter()
                        .filter_map(|t| match t.config.get(&spec.name) {
                            Some(ParamValue::Categorical(c)) => choices.iter().position(|x| x == c),
                            _ => None,
                        })
                        .collect()
                };
                Model::Categorical {
                    good: Categorical::fit(&index(good), choices.len()),
                    bad: Categorical::fit(&index(bad), choices.len()),
                    choices: choices.clone(),
                }
            }
            _ => {
                let units = |ts: &[&Trial]| -> Vec<f64> {
                    ts.iter()
                        .filter_map(|t| t.config.get(&spec.name).and_then(|v| spec.to_unit(v)))
                        .filter(|u| u.is_finite())
                        .map(|u| u.clamp(0.0, 1.0))
                        .collect()
                };
                Model::Numeric {
                    good: Parzen::fit(units(good), self.min_bandwidth, self.prior_weight),
                    bad: Parzen::fit(units(bad), self.min_bandwidth, self.prior_weight),
                }
            }
        }
    }
}

impl Sampler for DensityModel {
    fn sample(
        &mut self,
        space: &HyperparameterSpace,
        history: &[Trial],
        rng: &mut SeededRng,
    ) -> Result<Config, HpoError> {
        let mut completed: Vec<&Trial> = history.iter().filter(|t| t.status == TrialStatus::Completed).collect();
        if completed.len() < self.n_startup.max(2) {
            return Ok(space.sample_uniform(rng));
        }
        // Stable sort keeps earlier trials first among equal objectives.
        completed.sort_by(|a, b| b.objective.total_cmp(&a.objective));
        let n_good = (libm::ceil(self.gamma * completed.len() as f64) as usize).clamp(1, completed.len() - 1);
        let (good, bad) = completed.split_at(n_good);
        let models: Vec<Model> = space.params().iter().map(|p| self.fit(p, good, bad)).collect();

        let mut best: Option<(bool, f64, Config)> = None;
        for _ in 0..self.n_candidates.max(1) {
            let mut config = Config::new();
            let mut score = 0.0;
            for (p, model) in space.params().iter().zip(&models) {
                match model {
                    Model::Numeric { good, bad } => {
                        let u = good.sample(rng);
                        score += good.log_pdf(u) - bad.log_pdf(u);
                        config.set(p.name.clone(), p.from_unit(u));
                    }
                    Model::Categorical { good, bad, choices } => {
                        let i = good.sample(rng);
                        score += libm::log(good.probs[i]) - libm::log(bad.probs[i]);
                        config.set(p.name.clone(), ParamValue::Categorical(choices[i].clone()));
                    }
                }
            }
            let valid = validate_config(space, &config)?;
            let better = match &best {
                None => true,
                Some((bv, bs, _)) => (valid, score) > (*bv, *bs),
            };
            if better {
                best = Some((valid, score, config));
            }
        }
        Ok(best.expect("at least one candidate").2)
    }
}
