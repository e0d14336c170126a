//! Seedable, deterministic multi-objective MDPs with exactly computable fronts.
//!
//! Every environment compiles down to a [`TabularEnv`]: a dense table of
//! `(next state, reward vector, terminal)` per state-action pair plus an
//! initial state distribution. Dynamics are deterministic; all randomness in
//! a training run comes from the agent and the initial-state draw.

mod grid;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{ReferenceFront, ReferencePoint};
use crate::pareto::{dominates_slice, ParetoFront, ValueVector};
use crate::rng::SeededRng;

pub use grid::{builtin, builtin_source, EnvFile, GridKind, BUILTIN_NAMES};

/// Upper bound on `state_count * action_count` for exact front computation.
pub const MAX_EXACT_FRONT_SIZE: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("episode already ended; reset before stepping")]
    EpisodeOver,
    #[error("action {action} out of range (action count {count})")]
    InvalidAction { action: usize, count: usize },
    #[error("state {state} out of range (state count {count})")]
    InvalidState { state: usize, count: usize },
    #[error("environment too large for exact front computation ({0} state-action pairs)")]
    TooLarge(usize),
    #[error("invalid environment: {0}")]
    Invalid(String),
    #[error("environment file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown environment '{0}'")]
    Unknown(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomdpSpec {
    pub state_count: usize,
    pub action_count: usize,
    pub objective_count: usize,
    pub discount: f64,
    pub max_episode_steps: u32,
    pub initial_state_distribution: Vec<f64>,
}

impl MomdpSpec {
    fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: &str| Err(EnvError::Invalid(m.into()));
        if self.state_count == 0 || self.action_count == 0 {
            return bad("state and action counts must be positive");
        }
        if self.objective_count < 2 {
            return bad("need at least 2 objectives");
        }
        if !(0.0..1.0).contains(&self.discount) {
            return bad("discount must lie in [0, 1)");
        }
        if self.max_episode_steps == 0 {
            return bad("max_episode_steps must be positive");
        }
        let mu = &self.initial_state_distribution;
        if mu.len() != self.state_count || mu.iter().any(|p| p.is_nan() || *p < 0.0) {
            return bad("initial distribution must have one nonnegative entry per state");
        }
        if libm::fabs(mu.iter().sum::<f64>() - 1.0) > 1e-9 {
            return bad("initial distribution must sum to 1");
        }
        Ok(())
    }
}

/// Position within an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnvState {
    id: usize,
    step: u32,
    done: bool,
}

impl EnvState {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn step_count(&self) -> u32 {
        self.step
    }

    /// True once a terminal transition or the step limit has been reached.
    pub fn is_done(&self) -> bool {
        self.done
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: EnvState,
    pub reward: ValueVector,
    pub terminal: bool,
    /// Set only when the step limit ended the episode.
    pub truncated: bool,
}

/// Deterministic tabular MOMDP.
#[derive(Debug, Clone)]
pub struct TabularEnv {
    name: String,
    spec: MomdpSpec,
    next: Vec<usize>,
    rewards: Vec<f64>,
    terminal: Vec<bool>,
    ref_point: ReferencePoint,
    cached_front: Option<ReferenceFront>,
}

impl TabularEnv {
    /// `next`, `terminal` are indexed by `state * action_count + action`;
    /// `rewards` holds `objective_count` entries per such index.
    pub fn new(
        name: impl Into<String>,
        spec: MomdpSpec,
        next: Vec<usize>,
        rewards: Vec<f64>,
        terminal: Vec<bool>,
        ref_point: ReferencePoint,
    ) -> Result<Self, EnvError> {
        spec.validate()?;
        let pairs = spec.state_count * spec.action_count;
        if next.len() != pairs || terminal.len() != pairs || rewards.len() != pairs * spec.objective_count {
            return Err(EnvError::Invalid("transition table has the wrong size".into()));
        }
        if let Some(&s) = next.iter().find(|&&s| s >= spec.state_count) {
            return Err(EnvError::InvalidState {
                state: s,
                count: spec.state_count,
            });
        }
        if rewards.iter().any(|r| !r.is_finite()) {
            return Err(EnvError::Invalid("rewards must be finite".into()));
        }
        if ref_point.dim() != spec.objective_count {
            return Err(EnvError::Invalid(
                "reference point dimension differs from objective count".into(),
            ));
        }
        Ok(Self {
            name: name.into(),
            spec,
            next,
            rewards,
            terminal,
            ref_point,
            cached_front: None,
        })
    }

    /// Computes the exact front now so later [`true_front`](Self::true_front) calls are free.
    pub fn with_cached_front(mut self) -> Result<Self, EnvError> {
        self.cached_front = None;
        self.cached_front = Some(self.true_front()?);
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn spec(&self) -> &MomdpSpec {
        &self.spec
    }

    pub fn objective_count(&self) -> usize {
        self.spec.objective_count
    }

    pub fn discount(&self) -> f64 {
        self.spec.discount
    }

    /// Default hypervolume reference point for this environment.
    pub fn ref_point(&self) -> &ReferencePoint {
        &self.ref_point
    }

    /// Replaces the discount factor (drops any cached front).
    pub fn set_discount(&mut self, gamma: f64) -> Result<(), EnvError> {
        let mut spec = self.spec.clone();
        spec.discount = gamma;
        spec.validate()?;
        self.spec = spec;
        self.cached_front = None;
        Ok(())
    }

    /// Replaces the step limit (drops any cached front).
    pub fn set_max_episode_steps(&mut self, steps: u32) -> Result<(), EnvError> {
        let mut spec = self.spec.clone();
        spec.max_episode_steps = steps;
        spec.validate()?;
        self.spec = spec;
        self.cached_front = None;
        Ok(())
    }

    pub fn set_ref_point(&mut self, ref_point: ReferencePoint) -> Result<(), EnvError> {
        if ref_point.dim() != self.spec.objective_count {
            return Err(EnvError::Invalid(
                "reference point dimension differs from objective count".into(),
            ));
        }
        self.ref_point = ref_point;
        Ok(())
    }

    /// Draws the initial state from the initial distribution using `seed`.
    pub fn reset(&self, seed: u64) -> EnvState {
        let mu = &self.spec.initial_state_distribution;
        let id = match mu.iter().position(|&p| p == 1.0) {
            Some(s) => s,
            None => {
                let u = SeededRng::new(seed).uniform();
                let mut acc = 0.0;
                let mut chosen = mu.iter().rposition(|&p| p > 0.0).unwrap_or(0);
                for (s, p) in mu.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        chosen = s;
                        break;
                    }
                }
                chosen
            }
        };
        EnvState {
            id,
            step: 0,
            done: false,
        }
    }

    pub fn step(&self, state: &EnvState, action: usize) -> Result<StepOutcome, EnvError> {
        if state.done {
            return Err(EnvError::EpisodeOver);
        }
        if state.id >= self.spec.state_count {
            return Err(EnvError::InvalidState {
                state: state.id,
                count: self.spec.state_count,
            });
        }
        if action >= self.spec.action_count {
            return Err(EnvError::InvalidAction {
                action,
                count: self.spec.action_count,
            });
        }
        let (next, reward, terminal) = self.transition(state.id, action);
        let step = state.step + 1;
        let truncated = !terminal && step >= self.spec.max_episode_steps;
        Ok(StepOutcome {
            next_state: EnvState {
                id: next,
                step,
                done: terminal || truncated,
            },
            reward: ValueVector::new(reward.to_vec()).expect("rewards validated at construction"),
            terminal,
            truncated,
        })
    }

    /// Raw table lookup without episode bookkeeping.
    #[inline]
    pub fn transition(&self, state: usize, action: usize) -> (usize, &[f64], bool) {
        let idx = state * self.spec.action_count + action;
        let m = self.spec.objective_count;
        (
            self.next[idx],
            &self.rewards[idx * m..(idx + 1) * m],
            self.terminal[idx],
        )
    }

    /// Exact Pareto front of achievable discounted value vectors from the
    /// initial distribution.
    ///
    /// Backward induction over the episode horizon on sets of value vectors,
    /// pruned to their nondominated subset at every state. Exact because the
    /// dynamics are deterministic and `r + γ·v` preserves dominance.
    pub fn true_front(&self) -> Result<ReferenceFront, EnvError> {
        if let Some(front) = &self.cached_front {
            return Ok(front.clone());
        }
        let (s_count, a_count, m) = (self.spec.state_count, self.spec.action_count, self.spec.objective_count);
        if s_count * a_count > MAX_EXACT_FRONT_SIZE {
            return Err(EnvError::TooLarge(s_count * a_count));
        }
        let gamma = self.spec.discount;
        let mut values: Vec<Vec<Vec<f64>>> = vec![vec![vec![0.0; m]]; s_count];
        let mut scratch: Vec<Vec<f64>> = Vec::new();
        for _ in 0..self.spec.max_episode_steps {
            let mut updated: Vec<Vec<Vec<f64>>> = Vec::with_capacity(s_count);
            for s in 0..s_count {
                scratch.clear();
                for a in 0..a_count {
                    let (next, r, terminal) = self.transition(s, a);
                    if terminal {
                        insert_nondominated(&mut scratch, r.to_vec());
                    } else {
                        for v in &values[next] {
                            let cand = r.iter().zip(v).map(|(ri, vi)| ri + gamma * vi).collect();
                            insert_nondominated(&mut scratch, cand);
                        }
                    }
                }
                updated.push(scratch.clone());
            }
            values = updated;
        }
        // Expectation over the initial distribution: one choice per start state.
        let mut combined: Vec<Vec<f64>> = vec![vec![0.0; m]];
        for (s, &p) in self.spec.initial_state_distribution.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let mut next_set = Vec::new();
            for base in &combined {
                for v in &values[s] {
                    let cand = base.iter().zip(v).map(|(b, x)| b + p * x).collect();
                    insert_nondominated(&mut next_set, cand);
                }
            }
            combined = next_set;
        }
        let points = combined
            .into_iter()
            .map(ValueVector::new)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| EnvError::Invalid(alloc::format!("{e}")))?;
        let front = ParetoFront::from_points(m, points).map_err(|e| EnvError::Invalid(alloc::format!("{e}")))?;
        ReferenceFront::new(front).map_err(|e| EnvError::Invalid(alloc::format!("{e}")))
    }
}

fn insert_nondominated(set: &mut Vec<Vec<f64>>, p: Vec<f64>) {
    if set.iter().any(|q| *q == p || dominates_slice(q, &p)) {
        return;
    }
    set.retain(|q| !dominates_slice(&p, q));
    set.push(p);
}

/// Two-state, two-action, two-objective MOMDP with a hand-checkable optimum.
///
/// State 0: action 0 ends the episode with reward (1, 0); action 1 moves to
/// state 1 with reward (0, 0). State 1: action 0 ends the episode with reward
/// (0, 2); action 1 returns to state 0 with reward (0, 0). Discount 0.9, so the
/// optimal front is {(1, 0), (0, 1.8)}.
pub fn two_state_toy() -> TabularEnv {
    let spec = MomdpSpec {
        state_count: 2,
        action_count: 2,
        objective_count: 2,
        discount: 0.9,
        max_episode_steps: 20,
        initial_state_distribution: vec![1.0, 0.0],
    };
    let next = vec![0, 1, 1, 0];
    let rewards = vec![1.0, 0.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0];
    let terminal = vec![true, false, true, false];
    let ref_point = ReferencePoint::new(vec![-1.0, -1.0]).expect("finite");
    TabularEnv::new("toy", spec, next, rewards, terminal, ref_point).expect("valid toy environment")
}
