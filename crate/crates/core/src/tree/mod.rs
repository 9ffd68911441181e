//! Hoeffding tree building blocks and the sequential learner.

pub mod bound;
pub mod codec;
pub mod criterion;
pub mod hoeffding;
pub mod node;
pub mod split;
pub mod stats;

pub use bound::hoeffding_bound;
pub use criterion::{entropy, gini, info_gain, SplitCriterion};
pub use hoeffding::{train_sequential, HoeffdingTree};
pub use node::{LeafNode, Node, SplitNode, Tree};
pub use split::{rank, split_guard, MERIT_TOLERANCE, top_two, try_split, SplitCandidate, SplitDecision, SplitTest};
pub use stats::{AttributeStats, CandidateParams, LeafStats};

use crate::instance::{LeafId, SchemaViolation};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum TreeError {
    #[error("Hoeffding bound needs a positive sample size")]
    EmptySample,
    #[error("invalid parameter: {0}")]
    InvalidParam(&'static str),
    #[error("class distribution is empty")]
    EmptyDistribution,
    #[error("class counts must be finite and non-negative")]
    NegativeCount,
    #[error("branch counts for class {class} sum to {branches}, parent has {parent}")]
    InconsistentTotals { class: usize, parent: f64, branches: f64 },
    #[error("unknown leaf {0}")]
    UnknownLeaf(LeafId),
    #[error("leaf {0} has already been split")]
    RetiredLeaf(LeafId),
    #[error("cannot split on the no-split candidate")]
    NoSplitCandidate,
    #[error("instance {index}: {violation}")]
    Schema { index: u64, violation: SchemaViolation },
    #[error("instance {0} has no label")]
    Unlabeled(u64),
    #[error("model codec: {0}")]
    Codec(String),
}

/// Learner parameters shared by the sequential tree and its distributed
/// variant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoeffdingParams {
    /// Confidence parameter of the Hoeffding bound.
    pub delta: f64,
    /// Weight a leaf must gain between split checks (`n_min`).
    pub grace_period: f64,
    /// Split anyway once epsilon falls below this (`tau`).
    pub tie_threshold: f64,
    pub criterion: SplitCriterion,
    pub numeric_thresholds: u32,
}

impl Default for HoeffdingParams {
    fn default() -> Self {
        Self {
            delta: 1e-7,
            grace_period: 200.0,
            tie_threshold: 0.05,
            criterion: SplitCriterion::InfoGain,
            numeric_thresholds: 10,
        }
    }
}

impl HoeffdingParams {
    pub fn candidate_params(&self, num_classes: u32) -> CandidateParams {
        CandidateParams {
            criterion: self.criterion,
            numeric_thresholds: self.numeric_thresholds,
            num_classes,
        }
    }

    pub fn validate(&self) -> Result<(), TreeError> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(TreeError::InvalidParam("delta must lie in (0, 1)"));
        }
        if !(self.grace_period > 0.0) {
            return Err(TreeError::InvalidParam("grace period must be positive"));
        }
        if !(self.tie_threshold >= 0.0) {
            return Err(TreeError::InvalidParam("tie threshold must be non-negative"));
        }
        if self.numeric_thresholds == 0 {
            return Err(TreeError::InvalidParam("need at least one numeric threshold"));
        }
        Ok(())
    }
}
