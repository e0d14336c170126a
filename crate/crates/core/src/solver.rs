//! Tabular multi-policy scalarized Q-learning.
//!
//! One vector-valued Q-table is learned per weight on a uniform simplex grid.
//! Episodes cycle round-robin over the weights; actions are ε-greedy on the
//! scalarized values `w·Q(s, a)` and the update bootstraps componentwise
//! through the `w`-greedy successor action. Greedy policies are evaluated at
//! regular snapshots and every evaluated value vector is offered to a Pareto
//! archive, so the reported front is the nondominated union over snapshots.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envs::{EnvError, TabularEnv};
use crate::metrics::WeightVector;
use crate::pareto::{ParetoFront, ValueVector};
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(&'static str),
    #[error("training budget must be at least one step")]
    ZeroBudget,
    #[error("snapshot interval must be at least one step")]
    ZeroSnapshotInterval,
    #[error("initial Q-tables do not match the environment or weight grid")]
    InitialQMismatch,
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// Tunable knobs of the solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverHyperparams {
    pub learning_rate: f64,
    pub initial_epsilon: f64,
    pub final_epsilon: f64,
    pub epsilon_decay_steps: u64,
    pub num_sample_w: usize,
    pub optimistic_init: f64,
    pub eval_episodes: usize,
}

impl SolverHyperparams {
    pub const MIN_SAMPLE_W: usize = 2;
    pub const MAX_SAMPLE_W: usize = 10;

    /// Physical validity. The narrower search ranges (for instance ε ≥ 0.01)
    /// belong to the hyperparameter space, not to the solver.
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m| Err(SolverError::InvalidHyperparams(m));
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must lie in (0, 1]");
        }
        let unit = 0.0..=1.0;
        if !unit.contains(&self.initial_epsilon) || !unit.contains(&self.final_epsilon) {
            return bad("epsilons must lie in [0, 1]");
        }
        if self.initial_epsilon < self.final_epsilon {
            return bad("initial_epsilon must be >= final_epsilon");
        }
        if self.epsilon_decay_steps == 0 {
            return bad("epsilon_decay_steps must be positive");
        }
        if !(Self::MIN_SAMPLE_W..=Self::MAX_SAMPLE_W).contains(&self.num_sample_w) {
            return bad("num_sample_w must lie in [2, 10]");
        }
        if !self.optimistic_init.is_finite() {
            return bad("optimistic_init must be finite");
        }
        if self.eval_episodes == 0 {
            return bad("eval_episodes must be positive");
        }
        Ok(())
    }

    /// Linear decay from `initial_epsilon` to `final_epsilon`, then constant.
    pub fn epsilon_at(&self, step: u64) -> f64 {
        if step >= self.epsilon_decay_steps {
            return self.final_epsilon;
        }
        let frac = step as f64 / self.epsilon_decay_steps as f64;
        self.initial_epsilon + (self.final_epsilon - self.initial_epsilon) * frac
    }
}

/// Uniform grid on the `m`-simplex: every composition of `num_sample_w − 1`
/// into `m` nonnegative parts, normalized, in descending lexicographic order.
///
/// Always contains the `m` unit vectors.
pub fn weight_grid(num_sample_w: usize, m: usize) -> Vec<WeightVector> {
    let total = num_sample_w.max(2) - 1;
    let mut out = Vec::new();
    let mut parts = vec![0usize; m];
    compositions(total, 0, &mut parts, &mut |p| {
        let w: Vec<f64> = p.iter().map(|&k| k as f64 / total as f64).collect();
        out.push(WeightVector::new(w).expect("compositions are on the simplex"));
    });
    out
}

fn compositions(remaining: usize, index: usize, parts: &mut [usize], emit: &mut impl FnMut(&[usize])) {
    if index + 1 == parts.len() {
        parts[index] = remaining;
        emit(parts);
        return;
    }
    for k in (0..=remaining).rev() {
        parts[index] = k;
        compositions(remaining - k, index + 1, parts, emit);
    }
}

/// Dense vector-valued Q-table for one weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyTable {
    pub weight_index: usize,
    pub weight: WeightVector,
    state_count: usize,
    action_count: usize,
    objective_count: usize,
    q: Vec<f64>,
}

impl PolicyTable {
    pub fn new(weight_index: usize, weight: WeightVector, state_count: usize, action_count: usize, init: f64) -> Self {
        let objective_count = weight.dim();
        Self {
            weight_index,
            weight,
            state_count,
            action_count,
            objective_count,
            q: vec![init; state_count * action_count * objective_count],
        }
    }

    /// Q-table with explicit entries, laid out as `[state][action][objective]`.
    pub fn from_values(
        weight_index: usize,
        weight: WeightVector,
        state_count: usize,
        action_count: usize,
        q: Vec<f64>,
    ) -> Option<Self> {
        let objective_count = weight.dim();
        if q.len() != state_count * action_count * objective_count || q.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(Self {
            weight_index,
            weight,
            state_count,
            action_count,
            objective_count,
            q,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.q
    }

    #[inline]
    pub fn q(&self, state: usize, action: usize) -> &[f64] {
        let m = self.objective_count;
        let i = (state * self.action_count + action) * m;
        &self.q[i..i + m]
    }

    #[inline]
    fn q_mut(&mut self, state: usize, action: usize) -> &mut [f64] {
        let m = self.objective_count;
        let i = (state * self.action_count + action) * m;
        &mut self.q[i..i + m]
    }

    /// `argmax_a w·Q(s, a)`, ties to the lowest action index.
    pub fn greedy_action(&self, state: usize, w: &[f64]) -> usize {
        let mut best = 0;
        let mut best_value = f64::NEG_INFINITY;
        for a in 0..self.action_count {
            let v: f64 = self.q(state, a).iter().zip(w).map(|(q, w)| q * w).sum();
            if v > best_value {
                best_value = v;
                best = a;
            }
        }
        best
    }

    fn matches(&self, env: &TabularEnv) -> bool {
        let spec = env.spec();
        self.state_count == spec.state_count
            && self.action_count == spec.action_count
            && self.objective_count == spec.objective_count
    }
}

/// Mean discounted vector return of the `w`-greedy policy over `episodes` rollouts.
///
/// Rollout `i` starts from `env.reset(i)`; at least one rollout always runs.
pub fn evaluate_greedy(
    env: &TabularEnv,
    policy: &PolicyTable,
    w: &WeightVector,
    episodes: usize,
    gamma: f64,
) -> ValueVector {
    let m = env.objective_count();
    let episodes = episodes.max(1);
    let limit = env.spec().max_episode_steps;
    let mut total = vec![0.0; m];
    for ep in 0..episodes {
        let mut state = env.reset(ep as u64).id();
        let mut discount = 1.0;
        for _ in 0..limit {
            let action = policy.greedy_action(state, w.as_slice());
            let (next, reward, terminal) = env.transition(state, action);
            for (t, r) in total.iter_mut().zip(reward) {
                *t += discount * r;
            }
            if terminal {
                break;
            }
            discount *= gamma;
            state = next;
        }
    }
    for t in &mut total {
        *t /= episodes as f64;
    }
    ValueVector::new(total).expect("finite rewards give finite returns")
}

/// A policy in the returned Pareto set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoSetMember {
    pub weight_index: usize,
    /// Index into [`SolverResult::policies`].
    pub policy_id: usize,
    /// Training step of the snapshot that produced this policy.
    pub step: u64,
    pub value: ValueVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub step: u64,
    /// Archive front accumulated up to and including this snapshot.
    pub front: ParetoFront,
    /// Value of each weight's greedy policy at this snapshot, in grid order.
    pub weight_values: Vec<ValueVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    pub weights: Vec<WeightVector>,
    pub pareto_front: ParetoFront,
    pub pareto_set: Vec<ParetoSetMember>,
    pub policies: Vec<PolicyTable>,
    pub snapshots: Vec<Snapshot>,
}

impl SolverResult {
    pub fn final_weight_values(&self) -> &[ValueVector] {
        self.snapshots.last().map_or(&[], |s| s.weight_values.as_slice())
    }
}

/// Training run with optional injected initial Q-tables.
#[derive(Debug, Clone)]
pub struct Trainer<'a> {
    env: &'a TabularEnv,
    hp: SolverHyperparams,
    initial_q: Option<Vec<PolicyTable>>,
}

impl<'a> Trainer<'a> {
    pub fn new(env: &'a TabularEnv, hp: SolverHyperparams) -> Result<Self, SolverError> {
        hp.validate()?;
        Ok(Self {
            env,
            hp,
            initial_q: None,
        })
    }

    /// Starts from the given tables instead of `optimistic_init`; one per
    /// grid weight, in grid order.
    pub fn with_initial_q(mut self, tables: Vec<PolicyTable>) -> Result<Self, SolverError> {
        let weights = weight_grid(self.hp.num_sample_w, self.env.objective_count());
        if tables.len() != weights.len()
            || tables
                .iter()
                .zip(&weights)
                .any(|(t, w)| !t.matches(self.env) || &t.weight != w)
        {
            return Err(SolverError::InitialQMismatch);
        }
        self.initial_q = Some(tables);
        Ok(self)
    }

    /// Runs training and additionally returns the final Q-tables.
    pub fn run(
        self,
        seed: u64,
        budget_steps: u64,
        snapshot_every: u64,
    ) -> Result<(SolverResult, Vec<PolicyTable>), SolverError> {
        if budget_steps == 0 {
            return Err(SolverError::ZeroBudget);
        }
        if snapshot_every == 0 {
            return Err(SolverError::ZeroSnapshotInterval);
        }
        let env = self.env;
        let hp = &self.hp;
        let spec = env.spec();
        let (actions, gamma, limit) = (spec.action_count, spec.discount, spec.max_episode_steps);
        let m = env.objective_count();
        let weights = weight_grid(hp.num_sample_w, m);
        let mut tables = match self.initial_q {
            Some(t) => t,
            None => weights
                .iter()
                .enumerate()
                .map(|(k, w)| PolicyTable::new(k, w.clone(), spec.state_count, actions, hp.optimistic_init))
                .collect(),
        };

        let mut rng = SeededRng::new(seed);
        let mut archive = Archive::new(m);
        let mut snapshots = Vec::new();
        let mut target = vec![0.0; m];
        let mut step: u64 = 0;
        let mut episode: usize = 0;

        'training: loop {
            let k = episode % weights.len();
            let w = weights[k].as_slice();
            let mut state = env.reset(rng.next_u64()).id();
            let mut episode_steps: u32 = 0;
            loop {
                let explore = rng.uniform() < hp.epsilon_at(step);
                let action = if explore {
                    rng.below(actions)
                } else {
                    tables[k].greedy_action(state, w)
                };
                let (next, reward, terminal) = env.transition(state, action);
                if terminal {
                    target.copy_from_slice(reward);
                } else {
                    let table = &tables[k];
                    let next_action = table.greedy_action(next, w);
                    for ((t, r), q) in target.iter_mut().zip(reward).zip(table.q(next, next_action)) {
                        *t = r + gamma * q;
                    }
                }
                for (q, t) in tables[k].q_mut(state, action).iter_mut().zip(&target) {
                    *q += hp.learning_rate * (t - *q);
                }
                step += 1;
                episode_steps += 1;
                if step.is_multiple_of(snapshot_every) || step == budget_steps {
                    snapshots.push(archive.snapshot(env, hp, &weights, &tables, step));
                }
                if step == budget_steps {
                    break 'training;
                }
                if terminal || episode_steps >= limit {
                    break;
                }
                state = next;
            }
            episode += 1;
        }

        let (pareto_front, pareto_set, policies) = archive.finish();
        let result = SolverResult {
            weights,
            pareto_front,
            pareto_set,
            policies,
            snapshots,
        };
        Ok((result, tables))
    }
}

/// Trains the solver on `env` for `budget_steps` environment steps.
///
/// Deterministic in `(hp, seed, budget_steps, snapshot_every)`.
pub fn train(
    env: &TabularEnv,
    hp: &SolverHyperparams,
    seed: u64,
    budget_steps: u64,
    snapshot_every: u64,
) -> Result<SolverResult, SolverError> {
    Trainer::new(env, hp.clone())?
        .run(seed, budget_steps, snapshot_every)
        .map(|(result, _)| result)
}

/// Pareto archive over evaluated greedy policies, keeping a copy of every
/// policy whose value is on the current front.
struct Archive {
    front: ParetoFront,
    members: Vec<ParetoSetMember>,
    policies: Vec<PolicyTable>,
}

impl Archive {
    fn new(m: usize) -> Self {
        Self {
            front: ParetoFront::new(m),
            members: Vec::new(),
            policies: Vec::new(),
        }
    }

    fn snapshot(
        &mut self,
        env: &TabularEnv,
        hp: &SolverHyperparams,
        weights: &[WeightVector],
        tables: &[PolicyTable],
        step: u64,
    ) -> Snapshot {
        let mut weight_values = Vec::with_capacity(weights.len());
        for (k, (w, table)) in weights.iter().zip(tables).enumerate() {
            let value = evaluate_greedy(env, table, w, hp.eval_episodes, env.discount());
            self.offer(k, table, &value, step);
            weight_values.push(value);
        }
        Snapshot {
            step,
            front: self.front.clone(),
            weight_values,
        }
    }

    fn offer(&mut self, weight_index: usize, table: &PolicyTable, value: &ValueVector, step: u64) {
        let accepted = self
            .front
            .insert(value.clone())
            .expect("evaluation has the environment's dimension");
        if accepted {
            let front = &self.front;
            self.members.retain(|m| front.contains(&m.value));
        } else {
            // A tie with a stored value from a different weight's policy is kept
            // as a distinct Pareto-set member; anything else is rejected.
            let tie_from_new_weight = self.front.contains(value)
                && !self
                    .members
                    .iter()
                    .any(|m| &m.value == value && m.weight_index == weight_index);
            if !tie_from_new_weight {
                return;
            }
        }
        self.members.push(ParetoSetMember {
            weight_index,
            policy_id: self.policies.len(),
            step,
            value: value.clone(),
        });
        self.policies.push(table.clone());
    }

    fn finish(mut self) -> (ParetoFront, Vec<ParetoSetMember>, Vec<PolicyTable>) {
        let mut policies = Vec::with_capacity(self.members.len());
        for member in &mut self.members {
            policies.push(self.policies[member.policy_id].clone());
            member.policy_id = policies.len() - 1;
        }
        (self.front, self.members, policies)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::two_state_toy;

    fn hp() -> SolverHyperparams {
        SolverHyperparams {
            learning_rate: 0.1,
            initial_epsilon: 1.0,
            final_epsilon: 0.05,
            epsilon_decay_steps: 1_000,
            num_sample_w: 3,
            optimistic_init: 0.0,
            eval_episodes: 1,
        }
    }

    fn grid(n: usize, m: usize) -> Vec<Vec<f64>> {
        weight_grid(n, m).into_iter().map(Vec::from).collect()
    }

    #[test]
    fn weight_grid_examples() {
        assert_eq!(grid(2, 2), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(grid(3, 2), vec![vec![1.0, 0.0], vec![0.5, 0.5], vec![0.0, 1.0]]);
        assert_eq!(grid(3, 3).len(), 6);
    }

    #[test]
    fn weight_grid_contains_unit_vectors() {
        for n in 2..=10 {
            for m in 2..=4 {
                let g = grid(n, m);
                for i in 0..m {
                    let mut e = vec![0.0; m];
                    e[i] = 1.0;
                    assert!(g.contains(&e), "n={n} m={m}");
                }
            }
        }
    }

    #[test]
    fn epsilon_schedule() {
        let h = hp();
        assert_eq!(h.epsilon_at(0), 1.0);
        assert!((h.epsilon_at(500) - 0.525).abs() < 1e-12);
        assert_eq!(h.epsilon_at(1_000), 0.05);
        assert_eq!(h.epsilon_at(50_000), 0.05);
    }

    #[test]
    fn invalid_hyperparams() {
        let mut h = hp();
        h.learning_rate = 0.0;
        assert!(h.validate().is_err());
        let mut h = hp();
        h.initial_epsilon = 0.01;
        h.final_epsilon = 0.5;
        assert!(h.validate().is_err());
        let mut h = hp();
        h.num_sample_w = 11;
        assert!(h.validate().is_err());
        let env = two_state_toy();
        assert!(matches!(
            train(&env, &h, 0, 10, 5),
            Err(SolverError::InvalidHyperparams(_))
        ));
    }

    #[test]
    fn zero_budget_and_interval_rejected() {
        let env = two_state_toy();
        assert_eq!(train(&env, &hp(), 0, 0, 5), Err(SolverError::ZeroBudget));
        assert_eq!(train(&env, &hp(), 0, 5, 0), Err(SolverError::ZeroSnapshotInterval));
    }

    #[test]
    fn one_step_budget_still_evaluates() {
        let env = two_state_toy();
        let mut h = hp();
        h.optimistic_init = 5.0;
        let r = train(&env, &h, 3, 1, 100).unwrap();
        assert_eq!(r.snapshots.len(), 1);
        assert_eq!(r.snapshots[0].step, 1);
        assert!(!r.pareto_front.is_empty());
    }

    #[test]
    fn gamma_zero_evaluation_is_first_reward() {
        let env = two_state_toy();
        let w = WeightVector::new(vec![0.0, 1.0]).unwrap();
        // all-zero Q: greedy picks action 1 (move, reward (0,0)) only if it scores
        // strictly higher; ties go to action 0, which terminates with (1, 0).
        let table = PolicyTable::new(0, w.clone(), 2, 2, 0.0);
        let v = evaluate_greedy(&env, &table, &w, 3, 0.0);
        assert_eq!(v.as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn pareto_set_values_are_on_front() {
        let env = two_state_toy();
        let r = train(&env, &hp(), 11, 2_000, 250).unwrap();
        for member in &r.pareto_set {
            assert!(r.pareto_front.contains(&member.value));
            assert_eq!(r.policies[member.policy_id].weight_index, member.weight_index);
        }
        for p in r.pareto_front.points() {
            assert!(r.pareto_set.iter().any(|m| &m.value == p));
        }
    }
}
