//! Hyperparameter optimization for multi-objective reinforcement learning.
//!
//! The crate is `no_std` (with `alloc`) and contains every algorithmic piece of
//! the tuning pipeline:
//!
//! - [`pareto`]: value vectors, Pareto dominance and nondominated archives.
//! - [`metrics`]: hypervolume, IGD, sparsity and expected utility of a front.
//! - [`envs`]: deterministic, seedable grid-world MOMDPs with exact optimal fronts.
//! - [`solver`]: tabular multi-weight scalarized Q-learning, the algorithm being tuned.
//! - [`hpo`]: the search loop (suggest, train per seed, scalarize, aggregate,
//!   report) and validation on held-out seeds.
//! - [`analysis`]: random-forest importance and linear correlation over the
//!   search memory.
//!
//! File IO, run directories, threads and the command line live in the
//! `morltune` companion crate.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod analysis;
pub mod envs;
pub mod hpo;
pub mod metrics;
pub mod pareto;
pub mod solver;

mod rng;
mod stats;

pub use pareto::{ParetoError, ParetoFront, ValueVector};
pub use rng::SeededRng;
