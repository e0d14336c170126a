//! Which hyperparameters mattered: random-forest importance and linear
//! correlation over the completed trials of a search.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hpo::{ParamKind, ParamValue, SearchMemory, TrialStatus};
use crate::rng::SeededRng;
use crate::stats;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("need at least {needed} completed trials, found {found}")]
    TooFewTrials { needed: usize, found: usize },
}

/// Completed trials as a feature matrix in the transformed unit domain.
///
/// Numeric parameters give one column each; categorical parameters are
/// one-hot expanded into one column per choice. `owner[j]` is the index of
/// the parameter column `j` came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub parameter_names: Vec<String>,
    pub categorical: Vec<bool>,
    pub owner: Vec<usize>,
    pub rows: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

pub const MIN_TRIALS_FOR_DATASET: usize = 2;
pub const MIN_TRIALS_FOR_IMPORTANCE: usize = 10;

/// Features and labels of every completed trial, in trial order.
pub fn build_dataset(memory: &SearchMemory) -> Result<Dataset, AnalysisError> {
    let params = memory.space.params();
    let mut owner = Vec::new();
    for (i, p) in params.iter().enumerate() {
        let width = match &p.kind {
            ParamKind::Categorical { choices } => choices.len(),
            _ => 1,
        };
        owner.extend(core::iter::repeat_n(i, width));
    }
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    'trials: for t in memory.trials.iter().filter(|t| t.status == TrialStatus::Completed) {
        if !t.objective.is_finite() {
            continue;
        }
        let mut row = Vec::with_capacity(owner.len());
        for p in params {
            let Some(value) = t.config.get(&p.name) else {
                continue 'trials;
            };
            match (&p.kind, value) {
                (ParamKind::Categorical { choices }, ParamValue::Categorical(c)) => {
                    row.extend(choices.iter().map(|x| if x == c { 1.0 } else { 0.0 }));
                }
                _ => match p.to_unit(value) {
                    Some(u) if u.is_finite() => row.push(u),
                    _ => continue 'trials,
                },
            }
        }
        rows.push(row);
        targets.push(t.objective);
    }
    if rows.len() < MIN_TRIALS_FOR_DATASET {
        return Err(AnalysisError::TooFewTrials {
            needed: MIN_TRIALS_FOR_DATASET,
            found: rows.len(),
        });
    }
    Ok(Dataset {
        parameter_names: params.iter().map(|p| p.name.clone()).collect(),
        categorical: params.iter().map(|p| p.is_categorical()).collect(),
        owner,
        rows,
        targets,
    })
}

/// Pearson correlation of each parameter with the label; `None` for
/// categorical parameters and zero-variance columns.
pub fn correlations(data: &Dataset) -> Vec<Option<f64>> {
    (0..data.parameter_names.len())
        .map(|i| {
            if data.categorical[i] {
                return None;
            }
            let j = data.owner.iter().position(|&o| o == i)?;
            let column: Vec<f64> = data.rows.iter().map(|r| r[j]).collect();
            stats::pearson(&column, &data.targets)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 6,
            min_samples_leaf: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[feature] <= threshold { left } else { right },
            }
        }
    }
}

/// Bagged regression trees with variance-reduction splits over a random
/// third of the features at each node.
///
/// Rows are put in a canonical order before bootstrapping, so the fitted
/// forest does not depend on the order of the input rows.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    trees: Vec<Tree>,
    importance: Vec<f64>,
}

struct Builder<'a> {
    rows: &'a [Vec<f64>],
    targets: &'a [f64],
    config: &'a ForestConfig,
    mtry: usize,
    nodes: Vec<Node>,
    gains: Vec<f64>,
}

fn sse(targets: &[f64], idx: &[usize]) -> f64 {
    let values: Vec<f64> = idx.iter().map(|&i| targets[i]).collect();
    let mean = stats::mean(&values);
    values.iter().map(|v| (v - mean) * (v - mean)).sum()
}

impl Builder<'_> {
    fn build(&mut self, idx: &mut [usize], depth: usize, rng: &mut SeededRng) -> usize {
        let id = self.nodes.len();
        let mean = idx.iter().map(|&i| self.targets[i]).sum::<f64>() / idx.len() as f64;
        self.nodes.push(Node::Leaf(mean));
        if depth >= self.config.max_depth || idx.len() < 2 * self.config.min_samples_leaf {
            return id;
        }
        let Some((feature, threshold, gain)) = self.best_split(idx, rng) else {
            return id;
        };
        self.gains[feature] += gain;
        idx.sort_by(|&a, &b| self.rows[a][feature].total_cmp(&self.rows[b][feature]).then(a.cmp(&b)));
        let cut = idx.partition_point(|&i| self.rows[i][feature] <= threshold);
        let (l, r) = idx.split_at_mut(cut);
        let left = self.build(l, depth + 1, rng);
        let right = self.build(r, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    fn best_split(&self, idx: &[usize], rng: &mut SeededRng) -> Option<(usize, f64, f64)> {
        let p = self.rows[0].len();
        let mut features: Vec<usize> = (0..p).collect();
        for i in 0..self.mtry {
            let j = i + rng.below(p - i);
            features.swap(i, j);
        }
        let parent = sse(self.targets, idx);
        let min_leaf = self.config.min_samples_leaf;
        let mut best: Option<(usize, f64, f64)> = None;
        for &f in &features[..self.mtry] {
            let mut sorted: Vec<usize> = idx.to_vec();
            sorted.sort_by(|&a, &b| self.rows[a][f].total_cmp(&self.rows[b][f]).then(a.cmp(&b)));
            let n = sorted.len();
            let total: f64 = sorted.iter().map(|&i| self.targets[i]).sum();
            let total_sq: f64 = sorted.iter().map(|&i| self.targets[i] * self.targets[i]).sum();
            let (mut sum_l, mut sq_l) = (0.0, 0.0);
            for k in 0..n - 1 {
                let y = self.targets[sorted[k]];
                sum_l += y;
                sq_l += y * y;
                let nl = k + 1;
                let nr = n - nl;
                let (x, next) = (self.rows[sorted[k]][f], self.rows[sorted[k + 1]][f]);
                if nl < min_leaf || nr < min_leaf || x == next {
                    continue;
                }
                let sse_l = sq_l - sum_l * sum_l / nl as f64;
                let sum_r = total - sum_l;
                let sse_r = (total_sq - sq_l) - sum_r * sum_r / nr as f64;
                let gain = parent - sse_l - sse_r;
                if gain > 1e-12 * (1.0 + parent) && best.is_none_or(|(_, _, g)| gain > g) {
                    best = Some((f, 0.5 * (x + next), gain));
                }
            }
        }
        best
    }
}

fn canonical_order(rows: &[Vec<f64>], targets: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| {
        rows[a]
            .iter()
            .zip(&rows[b])
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
            .then(targets[a].total_cmp(&targets[b]))
    });
    order
}

impl RandomForest {
    /// Fits on `rows` (all of equal, nonzero width) and `targets`.
    pub fn fit(rows: &[Vec<f64>], targets: &[f64], config: &ForestConfig) -> Self {
        let p = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || p == 0 {
            return Self {
                trees: Vec::new(),
                importance: vec![0.0; p],
            };
        }
        let order = canonical_order(rows, targets);
        let rows: Vec<Vec<f64>> = order.iter().map(|&i| rows[i].clone()).collect();
        let targets: Vec<f64> = order.iter().map(|&i| targets[i]).collect();
        let n = rows.len();
        let mut rng = SeededRng::new(config.seed);
        let mut builder = Builder {
            rows: &rows,
            targets: &targets,
            config,
            mtry: p.div_ceil(3).max(1),
            nodes: Vec::new(),
            gains: vec![0.0; p],
        };
        let mut trees = Vec::with_capacity(config.n_trees);
        for _ in 0..config.n_trees {
            let mut sample: Vec<usize> = (0..n).map(|_| rng.below(n)).collect();
            builder.nodes = Vec::new();
            builder.build(&mut sample, 0, &mut rng);
            trees.push(Tree {
                nodes: core::mem::take(&mut builder.nodes),
            });
        }
        let total: f64 = builder.gains.iter().sum();
        let importance = if total > 0.0 {
            builder.gains.iter().map(|g| g / total).collect()
        } else {
            vec![0.0; p]
        };
        Self { trees, importance }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        if self.trees.is_empty() {
            return 0.0;
        }
        self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / self.trees.len() as f64
    }

    /// Normalized impurity decrease per feature; sums to 1 unless no split
    /// was ever made, in which case every entry is 0.
    pub fn importance(&self) -> &[f64] {
        &self.importance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub name: String,
    pub importance: f64,
    pub correlation: Option<f64>,
}

/// Entries sorted by importance, highest first (ties by name).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub trial_count: usize,
    pub entries: Vec<ImportanceEntry>,
}

/// Forest importance and correlation per parameter. Importances of one-hot
/// columns are summed back into their parameter.
pub fn rf_importance(data: &Dataset, config: &ForestConfig) -> Result<ImportanceReport, AnalysisError> {
    if data.rows.len() < MIN_TRIALS_FOR_IMPORTANCE {
        return Err(AnalysisError::TooFewTrials {
            needed: MIN_TRIALS_FOR_IMPORTANCE,
            found: data.rows.len(),
        });
    }
    let forest = RandomForest::fit(&data.rows, &data.targets, config);
    let mut per_param = vec![0.0; data.parameter_names.len()];
    for (&o, &v) in data.owner.iter().zip(forest.importance()) {
        per_param[o] += v;
    }
    let corr = correlations(data);
    let mut entries: Vec<ImportanceEntry> = data
        .parameter_names
        .iter()
        .zip(per_param)
        .zip(corr)
        .map(|((name, importance), correlation)| ImportanceEntry {
            name: name.clone(),
            importance,
            correlation,
        })
        .collect();
    entries.sort_by(|a, b| b.importance.total_cmp(&a.importance).then_with(|| a.name.cmp(&b.name)));
    Ok(ImportanceReport {
        trial_count: data.rows.len(),
        entries,
    })
}

pub fn analyze(memory: &SearchMemory, config: &ForestConfig) -> Result<ImportanceReport, AnalysisError> {
    rf_importance(&build_dataset(memory)?, config)
}
