//! Search state: suggestions, reported trials and the driving loop.

use alloc::boxed::Box;
use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::objective::{Aggregation, Evaluation, Objective, SeedResult};
use super::sampler::{Sampler, SamplerKind};
use super::space::{validate_config, Config, HyperparameterSpace};
use super::HpoError;
use crate::metrics::{Metric, MetricConfig};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Completed,
    /// Every seed failed during training or scoring.
    Failed,
    /// The configuration could not be turned into solver hyperparameters.
    Invalid,
}

impl TrialStatus {
    pub fn name(self) -> &'static str {
        match self {
            TrialStatus::Completed => "completed",
            TrialStatus::Failed => "failed",
            TrialStatus::Invalid => "invalid",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub trial_id: usize,
    pub config: Config,
    pub per_seed: Vec<SeedResult>,
    pub objective: f64,
    pub status: TrialStatus,
    pub wallclock_seconds: f64,
}

/// Settings a search ran with, stored next to its trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub run_id: String,
    pub env: String,
    pub optimizer: SamplerKind,
    pub optimizer_seed: u64,
    pub metric: Metric,
    pub aggregation: Aggregation,
    pub search_seeds: Vec<u64>,
    pub validation_seeds: Vec<u64>,
    pub search_budget: u64,
    pub validation_budget: u64,
    pub snapshot_every: u64,
    pub metric_config: MetricConfig,
    /// Seed of the importance forest fitted on this memory.
    #[serde(default)]
    pub forest_seed: u64,
}

impl RunMetadata {
    /// Rejects empty or overlapping seed sets.
    pub fn check_seeds(&self) -> Result<(), HpoError> {
        check_disjoint(&self.search_seeds, &self.validation_seeds)
    }
}

pub(crate) fn check_disjoint(search: &[u64], validation: &[u64]) -> Result<(), HpoError> {
    if search.is_empty() || validation.is_empty() {
        return Err(HpoError::EmptySeeds);
    }
    let overlap: Vec<u64> = validation.iter().copied().filter(|s| search.contains(s)).collect();
    if overlap.is_empty() {
        Ok(())
    } else {
        Err(HpoError::SeedOverlap(overlap))
    }
}

/// Everything a search has learned, in trial order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchMemory {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<RunMetadata>,
    pub space: HyperparameterSpace,
    pub trials: Vec<Trial>,
}

impl SearchMemory {
    /// Best completed trial; ties go to the earliest.
    pub fn best(&self) -> Result<&Trial, HpoError> {
        let mut best: Option<&Trial> = None;
        for t in self.trials.iter().filter(|t| t.status == TrialStatus::Completed) {
            if best.is_none_or(|b| t.objective > b.objective) {
                best = Some(t);
            }
        }
        best.ok_or(HpoError::NoCompletedTrials)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Suggestion {
    pub trial_id: usize,
    pub config: Config,
}

/// Maximum sampler draws per suggestion before giving up on validity.
pub const MAX_REDRAWS: usize = 1_000;

/// Suggest/report state machine over one hyperparameter space.
pub struct Study {
    memory: SearchMemory,
    sampler: Box<dyn Sampler + Send>,
    rng: SeededRng,
    queued: VecDeque<Config>,
    pending: Vec<Suggestion>,
    next_id: usize,
}

impl Study {
    pub fn new(space: HyperparameterSpace, sampler: Box<dyn Sampler + Send>, seed: u64) -> Self {
        Self {
            memory: SearchMemory {
                metadata: None,
                space,
                trials: Vec::new(),
            },
            sampler,
            rng: SeededRng::new(seed),
            queued: VecDeque::new(),
            pending: Vec::new(),
            next_id: 0,
        }
    }

    pub fn with_metadata(mut self, metadata: RunMetadata) -> Result<Self, HpoError> {
        metadata.check_seeds()?;
        self.memory.metadata = Some(metadata);
        Ok(self)
    }

    pub fn memory(&self) -> &SearchMemory {
        &self.memory
    }

    pub fn into_memory(self) -> SearchMemory {
        self.memory
    }

    pub fn space(&self) -> &HyperparameterSpace {
        &self.memory.space
    }

    /// Queues a configuration to be suggested before any sampled one.
    pub fn enqueue(&mut self, config: Config) -> Result<(), HpoError> {
        if !validate_config(&self.memory.space, &config)? {
            return Err(HpoError::InvalidConfig(
                "queued configuration violates the space".into(),
            ));
        }
        self.queued.push_back(config);
        Ok(())
    }

    pub fn suggest(&mut self) -> Result<Suggestion, HpoError> {
        let config = match self.queued.pop_front() {
            Some(c) => c,
            None => self.draw_valid()?,
        };
        let suggestion = Suggestion {
            trial_id: self.next_id,
            config,
        };
        self.next_id += 1;
        self.pending.push(suggestion.clone());
        Ok(suggestion)
    }

    fn draw_valid(&mut self) -> Result<Config, HpoError> {
        for _ in 0..MAX_REDRAWS {
            let c = self
                .sampler
                .sample(&self.memory.space, &self.memory.trials, &mut self.rng)?;
            if validate_config(&self.memory.space, &c)? {
                return Ok(c);
            }
        }
        Err(HpoError::OverConstrained(MAX_REDRAWS))
    }

    pub fn report(
        &mut self,
        trial_id: usize,
        evaluation: Evaluation,
        wallclock_seconds: f64,
    ) -> Result<&Trial, HpoError> {
        if self.memory.trials.iter().any(|t| t.trial_id == trial_id) {
            return Err(HpoError::DuplicateReport(trial_id));
        }
        let pos = self
            .pending
            .iter()
            .position(|s| s.trial_id == trial_id)
            .ok_or(HpoError::UnknownTrial(trial_id))?;
        let Suggestion { config, .. } = self.pending.remove(pos);
        self.memory.trials.push(Trial {
            trial_id,
            config,
            per_seed: evaluation.per_seed,
            objective: evaluation.objective,
            status: evaluation.status,
            wallclock_seconds,
        });
        Ok(self.memory.trials.last().expect("just pushed"))
    }

    pub fn best(&self) -> Result<&Trial, HpoError> {
        self.memory.best()
    }
}

/// Budget of a search; whichever limit is hit first stops it.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StoppingCriterion {
    pub max_trials: Option<usize>,
    pub max_wallclock_seconds: Option<f64>,
}

/// Clock and interrupt source consulted between trials.
pub trait SearchControl {
    fn elapsed_seconds(&self) -> f64;
    fn interrupted(&self) -> bool;
}

/// No clock and no interrupts; only `max_trials` can stop the search.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoControl;

impl SearchControl for NoControl {
    fn elapsed_seconds(&self) -> f64 {
        0.0
    }

    fn interrupted(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxTrials,
    Wallclock,
    Interrupted,
    GridExhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub stop_reason: StopReason,
    pub best: Option<Trial>,
}

/// Runs trials until `stop` fires, the control reports an interrupt, or the
/// grid runs out. `on_trial` sees the memory after every reported trial, so
/// callers can persist partial progress.
pub fn run_search<O, C>(
    study: &mut Study,
    objective: &O,
    seeds: &[u64],
    stop: &StoppingCriterion,
    control: &C,
    mut on_trial: impl FnMut(&SearchMemory, &Trial),
) -> Result<SearchOutcome, HpoError>
where
    O: Objective + ?Sized,
    C: SearchControl + ?Sized,
{
    if stop.max_trials.is_none() && stop.max_wallclock_seconds.is_none() {
        return Err(HpoError::NoStoppingCriterion);
    }
    if seeds.is_empty() {
        return Err(HpoError::EmptySeeds);
    }
    let stop_reason = loop {
        if control.interrupted() {
            break StopReason::Interrupted;
        }
        if stop.max_trials.is_some_and(|n| study.memory().trials.len() >= n) {
            break StopReason::MaxTrials;
        }
        if stop
            .max_wallclock_seconds
            .is_some_and(|s| control.elapsed_seconds() >= s)
        {
            break StopReason::Wallclock;
        }
        let suggestion = match study.suggest() {
            Ok(s) => s,
            Err(HpoError::GridExhausted) => break StopReason::GridExhausted,
            Err(e) => return Err(e),
        };
        let started = control.elapsed_seconds();
        let evaluation = objective.evaluate(&suggestion.config, seeds);
        let wallclock = control.elapsed_seconds() - started;
        study.report(suggestion.trial_id, evaluation, wallclock)?;
        let memory = study.memory();
        on_trial(memory, memory.trials.last().expect("trial reported"));
    };
    Ok(SearchOutcome {
        stop_reason,
        best: study.best().ok().cloned(),
    })
}
