//! Scalar quality indicators for Pareto fronts.
//!
//! Every indicator takes a slice of value vectors (usually `front.points()`),
//! so the same code also scores raw, possibly dominated, point sets.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pareto::{dominates_slice, ParetoFront, ValueVector};
use crate::rng::SeededRng;

/// Largest objective count handled by the exact hypervolume algorithm.
pub const MAX_EXACT_HV_OBJECTIVES: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("dimension mismatch: expected {expected} objectives, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("exact hypervolume supports 2..={max} objectives, got {0}", max = MAX_EXACT_HV_OBJECTIVES)]
    UnsupportedDimension(usize),
    #[error("metric is undefined on an empty front")]
    EmptyFront,
    #[error("reference front must be nonempty")]
    EmptyReference,
    #[error("sample count must be at least 1")]
    ZeroSamples,
    #[error("invalid weight vector: {0}")]
    InvalidWeights(&'static str),
    #[error("unknown metric '{0}'")]
    UnknownMetric(String),
}

/// Lower bound per objective used as the hypervolume anchor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReferencePoint(pub ValueVector);

impl ReferencePoint {
    pub fn new(values: Vec<f64>) -> Result<Self, crate::ParetoError> {
        ValueVector::new(values).map(Self)
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }
}

/// Known optimal front used by IGD. Never empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParetoFront", into = "ParetoFront")]
pub struct ReferenceFront(ParetoFront);

impl ReferenceFront {
    pub fn new(front: ParetoFront) -> Result<Self, MetricError> {
        if front.is_empty() {
            return Err(MetricError::EmptyReference);
        }
        Ok(Self(front))
    }

    pub fn front(&self) -> &ParetoFront {
        &self.0
    }

    pub fn points(&self) -> &[ValueVector] {
        self.0.points()
    }
}

impl TryFrom<ParetoFront> for ReferenceFront {
    type Error = MetricError;

    fn try_from(front: ParetoFront) -> Result<Self, Self::Error> {
        Self::new(front)
    }
}

impl From<ReferenceFront> for ParetoFront {
    fn from(r: ReferenceFront) -> Self {
        r.0
    }
}

/// A point on the probability simplex: nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub const SUM_TOLERANCE: f64 = 1e-12;

    pub fn new(weights: Vec<f64>) -> Result<Self, MetricError> {
        if weights.len() < 2 {
            return Err(MetricError::InvalidWeights("need at least 2 entries"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(MetricError::InvalidWeights("entries must be finite and >= 0"));
        }
        let sum: f64 = weights.iter().sum();
        if libm::fabs(sum - 1.0) > Self::SUM_TOLERANCE {
            return Err(MetricError::InvalidWeights("entries must sum to 1"));
        }
        Ok(Self(weights))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = MetricError;

    fn try_from(w: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(w)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Self {
        w.0
    }
}

fn check_points(points: &[ValueVector], m: usize) -> Result<(), MetricError> {
    for p in points {
        if p.dim() != m {
            return Err(MetricError::DimensionMismatch {
                expected: m,
                found: p.dim(),
            });
        }
    }
    Ok(())
}

/// Exact hypervolume dominated by `points` above `reference`.
///
/// Points that do not strictly dominate the reference in every objective
/// contribute nothing. Uses recursive slicing along the last objective down to
/// a two-dimensional sweep, which is exact for up to
/// [`MAX_EXACT_HV_OBJECTIVES`] objectives.
pub fn hypervolume(points: &[ValueVector], reference: &ReferencePoint) -> Result<f64, MetricError> {
    let m = reference.dim();
    check_points(points, m)?;
    if m > MAX_EXACT_HV_OBJECTIVES {
        return Err(MetricError::UnsupportedDimension(m));
    }
    let r = reference.as_slice();
    let shifted: Vec<Vec<f64>> = points
        .iter()
        .filter(|p| p.as_slice().iter().zip(r).all(|(x, lo)| x > lo))
        .map(|p| p.as_slice().iter().zip(r).map(|(x, lo)| x - lo).collect())
        .collect();
    Ok(hv_slices(shifted, m))
}

/// Volume of the union of boxes `[0, p]` over `points`, using the first `d` coordinates.
fn hv_slices(mut points: Vec<Vec<f64>>, d: usize) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    if d == 2 {
        points.sort_by(|a, b| b[0].total_cmp(&a[0]));
        let mut area = 0.0;
        let mut y_max: f64 = 0.0;
        for i in 0..points.len() {
            y_max = y_max.max(points[i][1]);
            let next_x = points.get(i + 1).map_or(0.0, |p| p[0]);
            area += (points[i][0] - next_x) * y_max;
        }
        return area;
    }
    let last = d - 1;
    points.sort_by(|a, b| b[last].total_cmp(&a[last]));
    let mut volume = 0.0;
    let mut slice: Vec<Vec<f64>> = Vec::with_capacity(points.len());
    for i in 0..points.len() {
        push_nondominated(&mut slice, &points[i][..last]);
        let next = points.get(i + 1).map_or(0.0, |p| p[last]);
        let height = points[i][last] - next;
        if height > 0.0 {
            volume += height * hv_slices(slice.clone(), last);
        }
    }
    volume
}

fn push_nondominated(set: &mut Vec<Vec<f64>>, p: &[f64]) {
    if set.iter().any(|q| q.as_slice() == p || dominates_slice(q, p)) {
        return;
    }
    set.retain(|q| !dominates_slice(p, q));
    set.push(p.to_vec());
}

/// Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// Monte-Carlo hypervolume over the box spanned by `reference` and the
/// componentwise maximum of `points`.
pub fn hypervolume_mc(
    points: &[ValueVector],
    reference: &ReferencePoint,
    samples: usize,
    seed: u64,
) -> Result<MonteCarloEstimate, MetricError> {
    let m = reference.dim();
    check_points(points, m)?;
    if samples == 0 {
        return Err(MetricError::ZeroSamples);
    }
    let zero = MonteCarloEstimate {
        value: 0.0,
        std_error: 0.0,
    };
    let Some(first) = points.first() else {
        return Ok(zero);
    };
    let r = reference.as_slice();
    let mut upper = first.as_slice().to_vec();
    for p in &points[1..] {
        for (u, x) in upper.iter_mut().zip(p.as_slice()) {
            *u = u.max(*x);
        }
    }
    if upper.iter().zip(r).any(|(u, lo)| u <= lo) {
        return Ok(zero);
    }
    let box_volume: f64 = upper.iter().zip(r).map(|(u, lo)| u - lo).product();
    let mut rng = SeededRng::new(seed);
    let mut x = vec![0.0; m];
    let mut hits = 0usize;
    for _ in 0..samples {
        for (k, xi) in x.iter_mut().enumerate() {
            *xi = r[k] + rng.uniform() * (upper[k] - r[k]);
        }
        if points
            .iter()
            .any(|p| p.as_slice().iter().zip(&x).all(|(pv, xv)| xv <= pv))
        {
            hits += 1;
        }
    }
    let frac = hits as f64 / samples as f64;
    Ok(MonteCarloEstimate {
        value: frac * box_volume,
        std_error: box_volume * libm::sqrt(frac * (1.0 - frac) / samples as f64),
    })
}

/// Inverted generational distance: `(1/|Z|)·sqrt(Σ_{z∈Z} min_{v∈F} ‖z − v‖²)`.
///
/// Lower is better; zero iff every reference point is matched exactly.
pub fn igd(points: &[ValueVector], reference: &ReferenceFront) -> Result<f64, MetricError> {
    let m = reference.front().objective_count();
    check_points(reference.points(), m)?;
    check_points(points, m)?;
    if points.is_empty() {
        return Err(MetricError::EmptyFront);
    }
    let total: f64 = reference
        .points()
        .iter()
        .map(|z| {
            points
                .iter()
                .map(|v| {
                    z.as_slice()
                        .iter()
                        .zip(v.as_slice())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Ok(libm::sqrt(total) / reference.points().len() as f64)
}

/// Sparsity: sum over objectives of squared gaps between consecutive sorted
/// values, divided by `|F| − 1`. Fronts with at most one point score zero.
pub fn sparsity(points: &[ValueVector]) -> Result<f64, MetricError> {
    if points.len() < 2 {
        return Ok(0.0);
    }
    let m = points[0].dim();
    check_points(points, m)?;
    let mut column = Vec::with_capacity(points.len());
    let mut total = 0.0;
    for j in 0..m {
        column.clear();
        column.extend(points.iter().map(|p| p[j]));
        column.sort_by(f64::total_cmp);
        total += column.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum::<f64>();
    }
    Ok(total / (points.len() - 1) as f64)
}

/// Draws a weight vector uniformly from the `m`-simplex (Dirichlet(1,…,1)).
pub(crate) fn sample_simplex(rng: &mut SeededRng, out: &mut [f64]) {
    let mut sum = 0.0;
    for w in out.iter_mut() {
        *w = rng.exponential();
        sum += *w;
    }
    for w in out.iter_mut() {
        *w /= sum;
    }
}

/// Monte-Carlo expected utility `E_w[max_v v·w]` under uniform simplex weights.
pub fn expected_utility(points: &[ValueVector], samples: usize, seed: u64) -> Result<f64, MetricError> {
    let Some(first) = points.first() else {
        return Err(MetricError::EmptyFront);
    };
    if samples == 0 {
        return Err(MetricError::ZeroSamples);
    }
    let m = first.dim();
    check_points(points, m)?;
    let mut rng = SeededRng::new(seed);
    let mut w = vec![0.0; m];
    let mut total = 0.0;
    for _ in 0..samples {
        sample_simplex(&mut rng, &mut w);
        total += points.iter().map(|p| p.dot(&w)).fold(f64::NEG_INFINITY, f64::max);
    }
    Ok(total / samples as f64)
}

/// The four indicators tracked for every front.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Hv,
    Igd,
    Sparsity,
    Eu,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Hv, Metric::Igd, Metric::Sparsity, Metric::Eu];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Hv => "hv",
            Metric::Igd => "igd",
            Metric::Sparsity => "sparsity",
            Metric::Eu => "eu",
        }
    }

    pub fn higher_is_better(self) -> bool {
        matches!(self, Metric::Hv | Metric::Eu)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hv" | "hypervolume" => Ok(Metric::Hv),
            "igd" => Ok(Metric::Igd),
            "sparsity" => Ok(Metric::Sparsity),
            "eu" | "expected_utility" => Ok(Metric::Eu),
            other => Err(MetricError::UnknownMetric(other.into())),
        }
    }
}

/// Per-environment metric settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub ref_point: ReferencePoint,
    /// Known optimal front; IGD is reported as null without it.
    pub reference_front: Option<ReferenceFront>,
    pub eu_samples: usize,
    pub eu_seed: u64,
    /// Sample count for the Monte-Carlo hypervolume used above four objectives.
    pub hv_mc_samples: usize,
}

impl MetricConfig {
    pub const DEFAULT_EU_SAMPLES: usize = 10_000;
    pub const DEFAULT_HV_MC_SAMPLES: usize = 100_000;

    pub fn new(ref_point: ReferencePoint) -> Self {
        Self {
            ref_point,
            reference_front: None,
            eu_samples: Self::DEFAULT_EU_SAMPLES,
            eu_seed: 0,
            hv_mc_samples: Self::DEFAULT_HV_MC_SAMPLES,
        }
    }

    pub fn with_reference_front(mut self, front: ReferenceFront) -> Self {
        self.reference_front = Some(front);
        self
    }
}

/// All four indicators for one front. Unavailable entries are `None`
/// (serialized as JSON `null`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSnapshot {
    pub hv: f64,
    pub igd: Option<f64>,
    pub sparsity: f64,
    pub eu: Option<f64>,
}

impl MetricSnapshot {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Hv => Some(self.hv),
            Metric::Igd => self.igd,
            Metric::Sparsity => Some(self.sparsity),
            Metric::Eu => self.eu,
        }
    }
}

pub fn metric_snapshot(points: &[ValueVector], config: &MetricConfig) -> Result<MetricSnapshot, MetricError> {
    if points.is_empty() {
        return Ok(MetricSnapshot {
            hv: 0.0,
            igd: None,
            sparsity: 0.0,
            eu: None,
        });
    }
    let hv = if config.ref_point.dim() > MAX_EXACT_HV_OBJECTIVES {
        hypervolume_mc(points, &config.ref_point, config.hv_mc_samples, config.eu_seed)?.value
    } else {
        hypervolume(points, &config.ref_point)?
    };
    let igd = match &config.reference_front {
        Some(reference) => Some(igd(points, reference)?),
        None => None,
    };
    Ok(MetricSnapshot {
        hv,
        igd,
        sparsity: sparsity(points)?,
        eu: Some(expected_utility(points, config.eu_samples, config.eu_seed)?),
    })
}
