//! Sufficient statistics `n_ijk` for one (leaf, attribute) cell.

use super::criterion::SplitCriterion;
use super::split::{SplitCandidate, SplitTest};
use crate::instance::{AttributeId, AttributeKind, ClassIdx, Instance};
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

/// Weighted running Gaussian (West's incremental update) plus the observed
/// value range.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub weight: f64,
    pub mean: f64,
    /// Sum of weighted squared deviations from the mean.
    pub m2: f64,
    pub min: f64,
    pub max: f64,
}

impl Gaussian {
    pub fn add(&mut self, value: f64, weight: f64) {
        if weight <= 0.0 {
            return;
        }
        if self.weight == 0.0 {
            self.min = value;
            self.max = value;
        } else {
            self.min = self.min.min(value);
            self.max = self.max.max(value);
        }
        let total = self.weight + weight;
        let delta = value - self.mean;
        let mean = self.mean + delta * weight / total;
        self.m2 += weight * delta * (value - mean);
        self.m2 = self.m2.max(0.0);
        self.mean = mean;
        self.weight = total;
    }

    /// Sample variance (`m2 / (w - 1)`), zero below two observations.
    pub fn variance(&self) -> f64 {
        if self.weight > 1.0 {
            self.m2 / (self.weight - 1.0)
        } else {
            0.0
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Estimated weight of observations `<= threshold`.
    pub fn weight_at_or_below(&self, threshold: f64) -> f64 {
        if self.weight <= 0.0 || threshold < self.min {
            return 0.0;
        }
        if threshold >= self.max {
            return self.weight;
        }
        let sd = self.std_dev();
        if sd <= 0.0 {
            return if threshold >= self.mean { self.weight } else { 0.0 };
        }
        let z = (threshold - self.mean) / sd;
        self.weight * 0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoricalStats {
    num_classes: usize,
    /// `counts[value * num_classes + class]`.
    counts: Vec<f64>,
}

impl CategoricalStats {
    pub fn new(values: u32, num_classes: u32) -> Self {
        Self {
            num_classes: num_classes as usize,
            counts: vec![0.0; values as usize * num_classes as usize],
        }
    }

    pub fn num_values(&self) -> usize {
        self.counts.len() / self.num_classes
    }

    /// `n_ijk` for value `j` and class `k`.
    pub fn count(&self, value: usize, class: usize) -> f64 {
        self.counts.get(value * self.num_classes + class).copied().unwrap_or(0.0)
    }

    fn add(&mut self, value: usize, class: usize, weight: f64) {
        let idx = value * self.num_classes + class;
        if idx >= self.counts.len() {
            self.counts.resize((value + 1) * self.num_classes, 0.0);
        }
        self.counts[idx] += weight;
    }

    /// Per-value class distributions.
    pub fn branches(&self) -> Vec<Vec<f64>> {
        self.counts.chunks(self.num_classes).map(<[f64]>::to_vec).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumericStats {
    pub per_class: Vec<Gaussian>,
}

impl NumericStats {
    pub fn new(num_classes: u32) -> Self {
        Self {
            per_class: vec![Gaussian::default(); num_classes as usize],
        }
    }

    /// Smallest and largest value over all classes, if anything was seen.
    pub fn range(&self) -> Option<(f64, f64)> {
        self.per_class
            .iter()
            .filter(|g| g.weight > 0.0)
            .fold(None, |acc, g| match acc {
                None => Some((g.min, g.max)),
                Some((lo, hi)) => Some((lo.min(g.min), hi.max(g.max))),
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum AttributeStats {
    Categorical(CategoricalStats),
    Numeric(NumericStats),
}

impl AttributeStats {
    pub fn for_kind(kind: AttributeKind, num_classes: u32) -> Self {
        match kind {
            AttributeKind::Categorical { values } => {
                AttributeStats::Categorical(CategoricalStats::new(values, num_classes))
            }
            AttributeKind::Numeric => AttributeStats::Numeric(NumericStats::new(num_classes)),
        }
    }

    /// Adds one observation. Zero weight leaves the statistics unchanged.
    pub fn update(&mut self, value: f64, class: ClassIdx, weight: f64) {
        if weight <= 0.0 {
            return;
        }
        match self {
            AttributeStats::Categorical(c) => c.add(value as usize, class as usize, weight),
            AttributeStats::Numeric(n) => n.per_class[class as usize].add(value, weight),
        }
    }

    /// Total weight observed by this cell.
    pub fn total_weight(&self) -> f64 {
        match self {
            AttributeStats::Categorical(c) => c.counts.iter().sum(),
            AttributeStats::Numeric(n) => n.per_class.iter().map(|g| g.weight).sum(),
        }
    }

    /// Per-class weight observed by this cell.
    pub fn class_totals(&self) -> Vec<f64> {
        match self {
            AttributeStats::Categorical(c) => {
                let mut totals = vec![0.0; c.num_classes];
                for chunk in c.counts.chunks(c.num_classes) {
                    for (t, &x) in totals.iter_mut().zip(chunk) {
                        *t += x;
                    }
                }
                totals
            }
            AttributeStats::Numeric(n) => n.per_class.iter().map(|g| g.weight).collect(),
        }
    }

    /// Copy of these statistics with the implicit zero values of a sparse
    /// stream filled in: for each class, the weight in `basis` that this cell
    /// never saw is booked at value 0.
    pub fn with_implicit_zeros(&self, basis: &[f64]) -> AttributeStats {
        let seen = self.class_totals();
        let mut out = self.clone();
        for (k, (&b, &s)) in basis.iter().zip(&seen).enumerate() {
            let missing = b - s;
            if missing > 0.0 {
                out.update(0.0, k as ClassIdx, missing);
            }
        }
        out
    }
}

/// Tunables for turning statistics into candidates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateParams {
    pub criterion: SplitCriterion,
    /// Number of equal-width thresholds tried for numeric attributes.
    pub numeric_thresholds: u32,
    pub num_classes: u32,
}

/// Best split on a numeric attribute: `thresholds` equally spaced interior
/// points of the observed range, class weights on each side estimated from
/// the per-class Gaussians. A degenerate range yields the no-split
/// candidate.
pub fn numeric_candidate(
    attribute: AttributeId,
    stats: &NumericStats,
    params: &CandidateParams,
) -> SplitCandidate {
    best_numeric(attribute, stats, params).unwrap_or_else(SplitCandidate::no_split)
}

fn best_numeric(
    attribute: AttributeId,
    stats: &NumericStats,
    params: &CandidateParams,
) -> Option<SplitCandidate> {
    let (lo, hi) = stats.range()?;
    if !(hi > lo) {
        return None;
    }
    let t = params.numeric_thresholds.max(1);
    let step = (hi - lo) / f64::from(t + 1);
    let mut best: Option<SplitCandidate> = None;
    for i in 1..=t {
        let threshold = lo + step * f64::from(i);
        let left: Vec<f64> = stats.per_class.iter().map(|g| g.weight_at_or_below(threshold)).collect();
        let right: Vec<f64> = stats
            .per_class
            .iter()
            .zip(&left)
            .map(|(g, l)| (g.weight - l).max(0.0))
            .collect();
        let branches = vec![left, right];
        let merit = params.criterion.merit(&branches, params.num_classes as usize);
        if best.as_ref().is_none_or(|b| merit > b.merit) {
            best = Some(SplitCandidate {
                test: Some(SplitTest::Numeric { attribute, threshold }),
                merit,
                branch_dists: branches,
            });
        }
    }
    best
}

/// Candidate for splitting on `attribute` given its statistics. `None` when
/// the attribute offers no usable split (degenerate numeric range).
pub fn attribute_candidate(
    attribute: AttributeId,
    stats: &AttributeStats,
    params: &CandidateParams,
) -> Option<SplitCandidate> {
    match stats {
        AttributeStats::Categorical(c) => {
            let branches = c.branches();
            let merit = params.criterion.merit(&branches, params.num_classes as usize);
            Some(SplitCandidate {
                test: Some(SplitTest::Categorical {
                    attribute,
                    values: c.num_values() as u32,
                }),
                merit,
                branch_dists: branches,
            })
        }
        AttributeStats::Numeric(n) => best_numeric(attribute, n, params),
    }
}

/// All statistics cells of one leaf, created lazily per attribute.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LeafStats {
    cells: FxHashMap<AttributeId, AttributeStats>,
    /// Set once the leaf has been fed from sparse instances; absent
    /// attributes then carry implicit zeros.
    sparse: bool,
}

impl LeafStats {
    pub fn update(
        &mut self,
        attribute: AttributeId,
        kind: AttributeKind,
        num_classes: u32,
        value: f64,
        class: ClassIdx,
        weight: f64,
    ) {
        self.cells
            .entry(attribute)
            .or_insert_with(|| AttributeStats::for_kind(kind, num_classes))
            .update(value, class, weight);
    }

    pub fn mark_sparse(&mut self) {
        self.sparse = true;
    }

    pub fn is_sparse(&self) -> bool {
        self.sparse
    }

    /// Feeds every attribute the instance carries.
    pub fn update_instance(
        &mut self,
        instance: &Instance,
        kinds: &[AttributeKind],
        num_classes: u32,
        class: ClassIdx,
    ) {
        if instance.is_sparse() {
            self.sparse = true;
        }
        for (attribute, value) in instance.present() {
            self.update(attribute, kinds[attribute as usize], num_classes, value, class, instance.weight);
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn get(&self, attribute: AttributeId) -> Option<&AttributeStats> {
        self.cells.get(&attribute)
    }

    pub fn iter(&self) -> impl Iterator<Item = (AttributeId, &AttributeStats)> {
        self.cells.iter().map(|(&a, s)| (a, s))
    }

    /// Largest total weight over the cells: a lower bound on the number of
    /// instances that reached the leaf.
    pub fn max_weight(&self) -> f64 {
        self.cells.values().map(AttributeStats::total_weight).fold(0.0, f64::max)
    }

    /// Candidates for every cell. `basis` is the class distribution of the
    /// instances that fed this leaf, used to complete sparse cells.
    pub fn candidates<'a>(
        &'a self,
        params: &'a CandidateParams,
        basis: &'a [f64],
    ) -> impl Iterator<Item = SplitCandidate> + 'a {
        self.cells.iter().filter_map(move |(&attribute, stats)| {
            if self.sparse {
                attribute_candidate(attribute, &stats.with_implicit_zeros(basis), params)
            } else {
                attribute_candidate(attribute, stats, params)
            }
        })
    }
}
