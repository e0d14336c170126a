//! Value vectors, Pareto dominance and nondominated sets.
//!
//! All objectives are maximized. Cost-like quantities (time, fuel) enter as
//! negative rewards, so "higher is better" holds for every coordinate.

use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParetoError {
    #[error("value vector needs at least 2 objectives, got {0}")]
    TooFewObjectives(usize),
    #[error("value vector entry {index} is not finite")]
    NonFinite { index: usize },
    #[error("dimension mismatch: expected {expected} objectives, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// Expected discounted return per objective.
///
/// Always has at least two entries, all finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ValueVector(Vec<f64>);

impl ValueVector {
    pub fn new(values: Vec<f64>) -> Result<Self, ParetoError> {
        if values.len() < 2 {
            return Err(ParetoError::TooFewObjectives(values.len()));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(ParetoError::NonFinite { index });
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Pareto dominance: `self ≥ other` componentwise with at least one strict `>`.
    pub fn dominates(&self, other: &ValueVector) -> Result<bool, ParetoError> {
        check_dim(self.dim(), other.dim())?;
        Ok(dominates_slice(&self.0, &other.0))
    }

    /// Weighted-sum scalarization. Extra weights or values are ignored.
    pub fn dot(&self, weights: &[f64]) -> f64 {
        self.0.iter().zip(weights).map(|(v, w)| v * w).sum()
    }

    /// Lexicographic order on coordinates, used for canonical front ordering.
    pub fn lex_cmp(&self, other: &ValueVector) -> Ordering {
        lex_cmp(&self.0, &other.0)
    }
}

impl TryFrom<Vec<f64>> for ValueVector {
    type Error = ParetoError;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(values)
    }
}

impl From<ValueVector> for Vec<f64> {
    fn from(v: ValueVector) -> Self {
        v.0
    }
}

impl core::ops::Index<usize> for ValueVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Free-function form of [`ValueVector::dominates`].
pub fn dominates(a: &ValueVector, b: &ValueVector) -> Result<bool, ParetoError> {
    a.dominates(b)
}

pub(crate) fn dominates_slice(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return false;
        }
        if x > y {
            strict = true;
        }
    }
    strict
}

pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

fn check_dim(expected: usize, found: usize) -> Result<(), ParetoError> {
    if expected != found {
        return Err(ParetoError::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// A mutually nondominated set of value vectors in lexicographic ascending order.
///
/// Exact duplicates are stored once. Serialized as a JSON array of arrays.
///
/// A front deserialized from an empty array has no recorded objective count
/// (`objective_count() == 0`); it adopts the dimension of the first insert.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ValueVector>", into = "Vec<ValueVector>")]
pub struct ParetoFront {
    points: Vec<ValueVector>,
    objective_count: usize,
}

impl ParetoFront {
    pub fn new(objective_count: usize) -> Self {
        Self {
            points: Vec::new(),
            objective_count,
        }
    }

    /// Nondominated subset of `points`, duplicates collapsed, canonical order.
    pub fn from_points<I>(objective_count: usize, points: I) -> Result<Self, ParetoError>
    where
        I: IntoIterator<Item = ValueVector>,
    {
        let mut all: Vec<ValueVector> = Vec::new();
        for p in points {
            check_dim(objective_count, p.dim())?;
            all.push(p);
        }
        // Descending lexicographic order puts every dominator before the points
        // it dominates, so one pass against the kept set suffices.
        all.sort_by(|a, b| b.lex_cmp(a));
        let mut kept: Vec<ValueVector> = Vec::with_capacity(all.len());
        for p in all {
            if let Some(last) = kept.last() {
                if last == &p {
                    continue;
                }
            }
            if kept.iter().any(|k| dominates_slice(&k.0, &p.0)) {
                continue;
            }
            kept.push(p);
        }
        kept.reverse();
        Ok(Self {
            points: kept,
            objective_count,
        })
    }

    pub fn objective_count(&self) -> usize {
        self.objective_count
    }

    pub fn points(&self) -> &[ValueVector] {
        &self.points
    }

    pub fn iter(&self) -> core::slice::Iter<'_, ValueVector> {
        self.points.iter()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, v: &ValueVector) -> bool {
        self.points.binary_search_by(|p| p.lex_cmp(v)).is_ok()
    }

    /// Archive insertion.
    ///
    /// Returns `false` and leaves the front untouched when `v` is dominated by
    /// or equal to a stored point; otherwise inserts `v`, evicts every point it
    /// dominates and returns `true`.
    pub fn insert(&mut self, v: ValueVector) -> Result<bool, ParetoError> {
        if self.objective_count == 0 && self.points.is_empty() {
            self.objective_count = v.dim();
        }
        check_dim(self.objective_count, v.dim())?;
        if self.points.iter().any(|p| p == &v || dominates_slice(&p.0, &v.0)) {
            return Ok(false);
        }
        self.points.retain(|p| !dominates_slice(&v.0, &p.0));
        let at = self.points.binary_search_by(|p| p.lex_cmp(&v)).unwrap_or_else(|i| i);
        self.points.insert(at, v);
        Ok(true)
    }

    /// Componentwise maximum over the stored points, `None` when empty.
    pub fn ideal_point(&self) -> Option<Vec<f64>> {
        let first = self.points.first()?;
        let mut best = first.0.clone();
        for p in &self.points[1..] {
            for (b, x) in best.iter_mut().zip(&p.0) {
                if *x > *b {
                    *b = *x;
                }
            }
        }
        Some(best)
    }
}

/// Free-function form of [`ParetoFront::from_points`] taking a slice.
pub fn pareto_filter(objective_count: usize, points: &[ValueVector]) -> Result<ParetoFront, ParetoError> {
    ParetoFront::from_points(objective_count, points.iter().cloned())
}

/// Functional form of [`ParetoFront::insert`].
pub fn archive_insert(mut front: ParetoFront, v: ValueVector) -> Result<(ParetoFront, bool), ParetoError> {
    let accepted = front.insert(v)?;
    Ok((front, accepted))
}

impl TryFrom<Vec<ValueVector>> for ParetoFront {
    type Error = ParetoError;

    fn try_from(points: Vec<ValueVector>) -> Result<Self, Self::Error> {
        let m = points.first().map_or(0, ValueVector::dim);
        Self::from_points(m, points)
    }
}

impl From<ParetoFront> for Vec<ValueVector> {
    fn from(front: ParetoFront) -> Self {
        front.points
    }
}

impl<'a> IntoIterator for &'a ParetoFront {
    type Item = &'a ValueVector;
    type IntoIter = core::slice::Iter<'a, ValueVector>;

    fn into_iter(self) -> Self::IntoIter {
        self.points.iter()
    }
}
