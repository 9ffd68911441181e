//! Split candidates and the split decision rule.

use super::bound::hoeffding_bound;
use super::node::LeafNode;
use super::stats::{CandidateParams, LeafStats};
use super::HoeffdingParams;
use crate::instance::{AttributeId, Instance};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

/// Test applied at a split node.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SplitTest {
    /// One branch per value `0..values`.
    Categorical { attribute: AttributeId, values: u32 },
    /// Branch 0 for `value <= threshold`, branch 1 otherwise.
    Numeric { attribute: AttributeId, threshold: f64 },
}

impl SplitTest {
    pub fn attribute(&self) -> AttributeId {
        match *self {
            SplitTest::Categorical { attribute, .. } | SplitTest::Numeric { attribute, .. } => attribute,
        }
    }

    pub fn num_branches(&self) -> usize {
        match *self {
            SplitTest::Categorical { values, .. } => values as usize,
            SplitTest::Numeric { .. } => 2,
        }
    }

    /// Branch taken by `instance`. Missing sparse attributes read as 0.
    pub fn branch(&self, instance: &Instance) -> usize {
        match *self {
            SplitTest::Categorical { attribute, values } => {
                (instance.value(attribute) as usize).min(values.saturating_sub(1) as usize)
            }
            SplitTest::Numeric { attribute, threshold } => usize::from(instance.value(attribute) > threshold),
        }
    }
}

/// An attribute with its criterion score, or the no-split option `X_∅`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitCandidate {
    /// `None` for the no-split option.
    pub test: Option<SplitTest>,
    pub merit: f64,
    /// Class distribution per branch of `test`.
    pub branch_dists: Vec<Vec<f64>>,
}

impl SplitCandidate {
    /// The no-split option. Its merit is that of not splitting, which is
    /// zero for both supported criteria.
    pub fn no_split() -> Self {
        Self {
            test: None,
            merit: 0.0,
            branch_dists: Vec::new(),
        }
    }

    pub fn is_no_split(&self) -> bool {
        self.test.is_none()
    }

    pub fn attribute(&self) -> Option<AttributeId> {
        self.test.as_ref().map(SplitTest::attribute)
    }
}

/// Merits closer than this are treated as equal, so that rounding noise in
/// a zero gain does not beat the no-split option.
pub const MERIT_TOLERANCE: f64 = 1e-12;

/// Ranking of candidates: higher merit first; on equal merit (within
/// [`MERIT_TOLERANCE`]) the no-split option first, then lower attribute ids.
pub fn rank(a: &SplitCandidate, b: &SplitCandidate) -> Ordering {
    let by_merit = if (a.merit - b.merit).abs() <= MERIT_TOLERANCE {
        Ordering::Equal
    } else {
        b.merit.total_cmp(&a.merit)
    };
    by_merit.then_with(|| match (a.attribute(), b.attribute()) {
            (None, None) => Ordering::Equal,
            (None, Some(_)) => Ordering::Less,
            (Some(_), None) => Ordering::Greater,
            (Some(x), Some(y)) => x.cmp(&y),
        })
}

/// Best and second-best of `candidates` plus the no-split option.
///
/// Duplicated no-split entries collapse to one, so merging the local top two
/// of disjoint attribute sets yields the top two of their union.
pub fn top_two<I>(candidates: I) -> (SplitCandidate, SplitCandidate)
where
    I: IntoIterator<Item = SplitCandidate>,
{
    let mut best: Option<SplitCandidate> = None;
    let mut second: Option<SplitCandidate> = None;
    let entries = candidates
        .into_iter()
        .filter(|c| !c.is_no_split())
        .chain(std::iter::once(SplitCandidate::no_split()));
    for c in entries {
        if best.as_ref().is_none_or(|b| rank(&c, b) == Ordering::Less) {
            second = best.replace(c);
        } else if second.as_ref().is_none_or(|s| rank(&c, s) == Ordering::Less) {
            second = Some(c);
        }
    }
    let best = best.expect("no-split option is always present");
    let second = second.unwrap_or_else(SplitCandidate::no_split);
    (best, second)
}

/// Splits iff the best candidate is a real attribute and either beats the
/// runner-up by more than `epsilon` or `epsilon` fell below the tie
/// threshold.
pub fn split_guard(best: &SplitCandidate, second: &SplitCandidate, epsilon: f64, tie_threshold: f64) -> bool {
    !best.is_no_split() && (best.merit - second.merit > epsilon || epsilon < tie_threshold)
}

/// Outcome of one split attempt, kept for replay checks.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitDecision {
    pub leaf: crate::instance::LeafId,
    pub n: f64,
    pub epsilon: f64,
    pub best: SplitCandidate,
    pub second: SplitCandidate,
    pub split: bool,
}

/// Evaluates every attribute of a leaf and applies the split rule.
pub fn try_split(leaf: &LeafNode, stats: &LeafStats, params: &HoeffdingParams, num_classes: u32) -> SplitDecision {
    let cparams = params.candidate_params(num_classes);
    let (best, second) = top_two(stats.candidates(&cparams, &leaf.observed));
    decide(leaf.id, leaf.weight, best, second, params, &cparams)
}

pub(crate) fn decide(
    leaf: crate::instance::LeafId,
    n: f64,
    best: SplitCandidate,
    second: SplitCandidate,
    params: &HoeffdingParams,
    cparams: &CandidateParams,
) -> SplitDecision {
    let range = params.criterion.range(cparams.num_classes);
    let epsilon = hoeffding_bound(range, params.delta, n.max(f64::MIN_POSITIVE)).unwrap_or(f64::INFINITY);
    let split = split_guard(&best, &second, epsilon, params.tie_threshold);
    SplitDecision {
        leaf,
        n,
        epsilon,
        best,
        second,
        split,
    }
}
