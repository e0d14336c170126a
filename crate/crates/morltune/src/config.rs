//! Run configuration files (TOML).
//!
//! See `configs/dst-random.toml` for a commented example of every key.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use morltune_core::envs::{builtin, EnvFile, TabularEnv};
use morltune_core::hpo::{
    solver_space, validate_config, Aggregation, Config, ParamKind, ParamValue, RunMetadata, SamplerKind,
    StoppingCriterion,
};
use morltune_core::metrics::{Metric, MetricConfig, ReferencePoint};
use serde::Deserialize;

use crate::CliError;

/// Output root override.
pub const OUT_ENV_VAR: &str = "MORLTUNE_OUT";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Built-in environment name; ignored when `env_file` is set.
    #[serde(default)]
    pub env: Option<String>,
    /// Path to an environment description, relative to the config file.
    #[serde(default)]
    pub env_file: Option<PathBuf>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub max_episode_steps: Option<u32>,
    #[serde(default = "default_optimizer")]
    pub optimizer: String,
    #[serde(default)]
    pub optimizer_seed: u64,
    #[serde(default)]
    pub run_id: Option<String>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: u64,
    #[serde(default)]
    pub max_parallel_jobs: Option<usize>,
    #[serde(default)]
    pub forest_seed: u64,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default)]
    pub metric: MetricSection,
    #[serde(default)]
    pub stop: StopSection,
    pub search: PhaseSection,
    pub validation: PhaseSection,
    /// Explicit configuration injected as trial 0, and the configuration
    /// `validate` runs when no other is given.
    #[serde(default)]
    pub baseline: Option<BTreeMap<String, toml::Value>>,
}

fn default_optimizer() -> String {
    "random".into()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from(".")
}

fn default_snapshot_every() -> u64 {
    10_000
}

fn default_top_k() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSection {
    #[serde(default = "default_metric")]
    pub name: String,
    #[serde(default = "default_aggregation")]
    pub aggregation: String,
    #[serde(default)]
    pub ref_point: Option<Vec<f64>>,
    #[serde(default = "default_eu_samples")]
    pub eu_samples: usize,
    #[serde(default)]
    pub eu_seed: u64,
}

impl Default for MetricSection {
    fn default() -> Self {
        Self {
            name: default_metric(),
            aggregation: default_aggregation(),
            ref_point: None,
            eu_samples: default_eu_samples(),
            eu_seed: 0,
        }
    }
}

fn default_metric() -> String {
    "hv".into()
}

fn default_aggregation() -> String {
    "mean".into()
}

fn default_eu_samples() -> usize {
    MetricConfig::DEFAULT_EU_SAMPLES
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopSection {
    #[serde(default)]
    pub max_trials: Option<usize>,
    #[serde(default)]
    pub max_wallclock_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSection {
    pub seeds: Vec<u64>,
    pub budget: u64,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub run_id: Option<String>,
    pub output_dir: Option<PathBuf>,
    pub optimizer: Option<String>,
    pub optimizer_seed: Option<u64>,
    pub max_trials: Option<usize>,
    pub max_parallel_jobs: Option<usize>,
}

/// A loaded, validated configuration ready to run.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub run_id: String,
    pub run_dir: PathBuf,
    pub env: TabularEnv,
    pub optimizer: SamplerKind,
    pub metric: Metric,
    pub aggregation: Aggregation,
    pub metric_config: MetricConfig,
    pub stop: StoppingCriterion,
    pub baseline: Option<Config>,
    pub max_parallel_jobs: usize,
    pub forest_seed: u64,
    pub top_k: usize,
    pub metadata: RunMetadata,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
        let mut config: RunConfig = toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        if let Some(file) = &config.env_file {
            if file.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                config.env_file = Some(base.join(file));
            }
        }
        Ok(config)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = &o.run_id {
            self.run_id = Some(v.clone());
        }
        if let Some(v) = &o.output_dir {
            self.output_dir = v.clone();
        }
        if let Some(v) = &o.optimizer {
            self.optimizer = v.clone();
        }
        if let Some(v) = o.optimizer_seed {
            self.optimizer_seed = v;
        }
        if let Some(v) = o.max_trials {
            self.stop.max_trials = Some(v);
        }
        if let Some(v) = o.max_parallel_jobs {
            self.max_parallel_jobs = Some(v);
        }
    }

    fn load_env(&self) -> Result<TabularEnv, CliError> {
        let mut env = match (&self.env_file, &self.env) {
            (Some(path), _) => {
                let text =
                    fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
                EnvFile::parse(&text)
                    .and_then(|f| f.build())
                    .map_err(|e| usage(format!("{}: {e}", path.display())))?
            }
            (None, Some(name)) => builtin(name).map_err(|e| usage(e.to_string()))?,
            (None, None) => return Err(usage("one of `env` or `env_file` is required")),
        };
        if let Some(g) = self.gamma {
            env.set_discount(g).map_err(|e| usage(e.to_string()))?;
        }
        if let Some(s) = self.max_episode_steps {
            env.set_max_episode_steps(s).map_err(|e| usage(e.to_string()))?;
        }
        Ok(env)
    }

    /// Validates every key and resolves the environment and output paths.
    pub fn prepare(&self) -> Result<Prepared, CliError> {
        let mut env = self.load_env()?;
        let optimizer: SamplerKind = self.optimizer.parse().map_err(usage)?;
        let metric: Metric = self
            .metric
            .name
            .parse()
            .map_err(|e: morltune_core::metrics::MetricError| usage(e.to_string()))?;
        let aggregation: Aggregation = self.metric.aggregation.parse().map_err(usage)?;
        if let Some(rp) = &self.metric.ref_point {
            let rp = ReferencePoint::new(rp.clone()).map_err(|e| usage(format!("metric.ref_point: {e}")))?;
            env.set_ref_point(rp)
                .map_err(|e| usage(format!("metric.ref_point: {e}")))?;
        }
        if self.metric.eu_samples == 0 {
            return Err(usage("metric.eu_samples must be at least 1"));
        }
        let mut metric_config = MetricConfig::new(env.ref_point().clone());
        metric_config.eu_samples = self.metric.eu_samples;
        metric_config.eu_seed = self.metric.eu_seed;
        if let Ok(front) = env.true_front() {
            metric_config = metric_config.with_reference_front(front);
        }
        if metric == Metric::Igd && metric_config.reference_front.is_none() {
            return Err(usage("IGD needs an environment with a known optimal front"));
        }

        if self.search.budget == 0 || self.validation.budget == 0 {
            return Err(usage("search.budget and validation.budget must be at least 1"));
        }
        if self.snapshot_every == 0 {
            return Err(usage("snapshot_every must be at least 1"));
        }
        for (name, seeds) in [
            ("search.seeds", &self.search.seeds),
            ("validation.seeds", &self.validation.seeds),
        ] {
            let mut sorted = seeds.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != seeds.len() {
                return Err(usage(format!("{name} contains duplicates")));
            }
        }
        let stop = StoppingCriterion {
            max_trials: self.stop.max_trials,
            max_wallclock_seconds: self.stop.max_wallclock_seconds,
        };
        if stop.max_trials.is_none() && stop.max_wallclock_seconds.is_none() {
            return Err(usage("[stop] needs max_trials and/or max_wallclock_seconds"));
        }
        if stop.max_wallclock_seconds.is_some_and(|s| s.is_nan() || s <= 0.0) {
            return Err(usage("stop.max_wallclock_seconds must be positive"));
        }
        let baseline = self.baseline.as_ref().map(baseline_config).transpose()?;
        if self.max_parallel_jobs == Some(0) {
            return Err(usage("max_parallel_jobs must be at least 1"));
        }
        let max_parallel_jobs = self
            .max_parallel_jobs
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));

        let run_id = self
            .run_id
            .clone()
            .unwrap_or_else(|| format!("{}-{}-{}", env.name(), optimizer.name(), self.optimizer_seed));
        if run_id.is_empty() || run_id.contains(['/', '\\']) || run_id == "." || run_id == ".." {
            return Err(usage(format!("invalid run_id '{run_id}'")));
        }
        let root = std::env::var_os(OUT_ENV_VAR)
            .map(PathBuf::from)
            .unwrap_or_else(|| self.output_dir.clone());
        let run_dir = root.join("run").join(&run_id);

        let metadata = RunMetadata {
            run_id: run_id.clone(),
            env: env.name().to_string(),
            optimizer,
            optimizer_seed: self.optimizer_seed,
            metric,
            aggregation,
            search_seeds: self.search.seeds.clone(),
            validation_seeds: self.validation.seeds.clone(),
            search_budget: self.search.budget,
            validation_budget: self.validation.budget,
            snapshot_every: self.snapshot_every,
            metric_config: metric_config.clone(),
            forest_seed: self.forest_seed,
        };
        metadata.check_seeds().map_err(|e| usage(e.to_string()))?;

        Ok(Prepared {
            run_id,
            run_dir,
            env,
            optimizer,
            metric,
            aggregation,
            metric_config,
            stop,
            baseline,
            max_parallel_jobs,
            forest_seed: self.forest_seed,
            top_k: self.top_k,
            metadata,
        })
    }
}

/// Converts a TOML table of solver hyperparameters into a valid [`Config`].
pub fn baseline_config(table: &BTreeMap<String, toml::Value>) -> Result<Config, CliError> {
    let space = solver_space();
    let mut config = Config::new();
    for (name, value) in table {
        let spec = space
            .param(name)
            .ok_or_else(|| usage(format!("baseline: unknown hyperparameter '{name}'")))?;
        let is_float = matches!(spec.kind, ParamKind::FloatLinear { .. } | ParamKind::FloatLog { .. });
        let v = match value {
            toml::Value::Integer(i) if is_float => ParamValue::Float(*i as f64),
            toml::Value::Integer(i) => ParamValue::Int(*i),
            toml::Value::Float(f) => ParamValue::Float(*f),
            toml::Value::String(s) => ParamValue::Categorical(s.clone()),
            other => return Err(usage(format!("baseline.{name}: unsupported value {other}"))),
        };
        config.set(name.clone(), v);
    }
    match validate_config(&space, &config) {
        Ok(true) => Ok(config),
        Ok(false) => Err(usage("baseline configuration is outside the search space")),
        Err(e) => Err(usage(format!("baseline: {e}"))),
    }
}

/// Reads a JSON configuration (as written to `best_config.json`).
pub fn load_config_json(path: &Path) -> Result<Config, CliError> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let config: Config = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    match validate_config(&solver_space(), &config) {
        Ok(true) => Ok(config),
        Ok(false) => Err(usage(format!(
            "{}: configuration is outside the search space",
            path.display()
        ))),
        Err(e) => Err(usage(format!("{}: {e}", path.display()))),
    }
}
