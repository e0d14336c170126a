//! Hyperparameter search over the solver.
//!
//! A [`Study`] proposes configurations through a [`Sampler`], an
//! [`Objective`] trains the solver once per search seed and scalarizes the
//! resulting fronts, and [`run_search`] drives the loop until a
//! [`StoppingCriterion`] fires. [`run_validation`] retrains a chosen
//! configuration on held-out seeds.

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::metrics::MetricError;
use crate::solver::SolverError;

mod objective;
mod sampler;
mod space;
mod study;
mod validation;

pub use objective::{
    aggregate, scalarize, Aggregation, Evaluation, MorlObjective, Objective, SeedExecutor, SeedResult,
    SequentialExecutor, SyntheticObjective, PENALTY,
};
pub use sampler::{DensityModel, GridSearch, RandomSearch, Sampler, SamplerKind};
pub use space::{
    config_from_hyperparams, hyperparams_from_config, solver_space, validate_config, Config, HyperparameterSpace,
    ParamKind, ParamSpec, ParamValue, ValidityRule, SOLVER_PARAMS,
};
pub use study::{
    run_search, NoControl, RunMetadata, SearchControl, SearchMemory, SearchOutcome, StopReason, StoppingCriterion,
    Study, Suggestion, Trial, TrialStatus,
};
pub use validation::{run_validation, CurvePoint, SeedRun, ValidationReport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HpoError {
    #[error("invalid search space: {0}")]
    InvalidSpace(String),
    #[error("unknown hyperparameter '{0}'")]
    UnknownParameter(String),
    #[error("missing hyperparameter '{0}'")]
    MissingParameter(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no valid configuration found after {0} draws")]
    OverConstrained(usize),
    #[error("grid exhausted")]
    GridExhausted,
    #[error("trial {0} was already reported")]
    DuplicateReport(usize),
    #[error("trial {0} was never suggested")]
    UnknownTrial(usize),
    #[error("no completed trials")]
    NoCompletedTrials,
    #[error("seed list must be nonempty")]
    EmptySeeds,
    #[error("validation seeds overlap search seeds: {0:?}")]
    SeedOverlap(Vec<u64>),
    #[error("stopping criterion needs max_trials or max_wallclock_seconds")]
    NoStoppingCriterion,
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}
