//! Split criteria over class-count vectors.

use super::TreeError;
use serde::{Deserialize, Serialize};

/// Relative tolerance when checking that branch counts add up to the parent.
const TOTAL_TOLERANCE: f64 = 1e-9;

/// Shannon entropy in bits, `-Σ p log₂ p` with `0 log 0 = 0`.
pub fn entropy(counts: &[f64]) -> Result<f64, TreeError> {
    check_counts(counts)?;
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return Err(TreeError::EmptyDistribution);
    }
    Ok(entropy_unchecked(counts, total))
}

/// Information gain of splitting `parent` into `branches`.
///
/// Branch counts must sum, class by class, to the parent counts.
pub fn info_gain(parent: &[f64], branches: &[Vec<f64>]) -> Result<f64, TreeError> {
    let h = entropy(parent)?;
    check_totals(parent, branches)?;
    let n: f64 = parent.iter().sum();
    let mut rest = 0.0;
    for branch in branches {
        let w: f64 = branch.iter().sum();
        if w > 0.0 {
            rest += w / n * entropy_unchecked(branch, w);
        }
    }
    Ok(h - rest)
}

/// Gini impurity `1 - Σ p²`.
pub fn gini(counts: &[f64]) -> Result<f64, TreeError> {
    check_counts(counts)?;
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return Err(TreeError::EmptyDistribution);
    }
    Ok(gini_unchecked(counts, total))
}

pub(crate) fn entropy_unchecked(counts: &[f64], total: f64) -> f64 {
    let mut h = 0.0;
    for &c in counts {
        if c > 0.0 {
            let p = c / total;
            h -= p * p.log2();
        }
    }
    h
}

fn gini_unchecked(counts: &[f64], total: f64) -> f64 {
    1.0 - counts.iter().map(|&c| (c / total) * (c / total)).sum::<f64>()
}

fn check_counts(counts: &[f64]) -> Result<(), TreeError> {
    if counts.iter().any(|&c| !(c >= 0.0) || !c.is_finite()) {
        return Err(TreeError::NegativeCount);
    }
    Ok(())
}

fn check_totals(parent: &[f64], branches: &[Vec<f64>]) -> Result<(), TreeError> {
    for branch in branches {
        check_counts(branch)?;
    }
    let classes = branches.iter().map(Vec::len).chain([parent.len()]).max().unwrap_or(0);
    for k in 0..classes {
        let want = parent.get(k).copied().unwrap_or(0.0);
        let got: f64 = branches.iter().map(|b| b.get(k).copied().unwrap_or(0.0)).sum();
        if (want - got).abs() > TOTAL_TOLERANCE * want.abs().max(1.0) {
            return Err(TreeError::InconsistentTotals { class: k, parent: want, branches: got });
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitCriterion {
    #[default]
    InfoGain,
    Gini,
}

impl SplitCriterion {
    /// Merit of splitting a node whose class counts are the sum of
    /// `branches`. Zero-weight branches contribute nothing.
    pub fn merit(self, branches: &[Vec<f64>], num_classes: usize) -> f64 {
        let mut parent = vec![0.0; num_classes];
        for branch in branches {
            for (p, &c) in parent.iter_mut().zip(branch) {
                *p += c;
            }
        }
        let n: f64 = parent.iter().sum();
        if n <= 0.0 {
            return 0.0;
        }
        let impurity = |counts: &[f64], w: f64| match self {
            SplitCriterion::InfoGain => entropy_unchecked(counts, w),
            SplitCriterion::Gini => gini_unchecked(counts, w),
        };
        let mut rest = 0.0;
        for branch in branches {
            let w: f64 = branch.iter().sum();
            if w > 0.0 {
                rest += w / n * impurity(branch, w);
            }
        }
        impurity(&parent, n) - rest
    }

    /// Range `R` of the merit, used by the Hoeffding bound.
    pub fn range(self, num_classes: u32) -> f64 {
        match self {
            SplitCriterion::InfoGain => (num_classes.max(2) as f64).log2(),
            SplitCriterion::Gini => 1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn entropy_reference_values() {
        assert_eq!(entropy(&[8.0, 8.0]).unwrap(), 1.0);
        assert_eq!(entropy(&[5.0, 0.0]).unwrap(), 0.0);
        // 40-digit reference values.
        assert!((entropy(&[6.0, 2.0]).unwrap() - 0.811_278_124_459_132_864).abs() < 1e-12);
        assert!((entropy(&[1.0, 2.0, 3.0, 4.0]).unwrap() - 1.846_439_344_671_015_493).abs() < 1e-12);
        assert!(matches!(entropy(&[0.0, 0.0]), Err(TreeError::EmptyDistribution)));
    }

    #[test]
    fn info_gain_reference_values() {
        let useless = info_gain(&[6.0, 2.0], &[vec![6.0, 2.0]]).unwrap();
        assert_eq!(useless, 0.0);
        let pure = info_gain(&[6.0, 2.0], &[vec![6.0, 0.0], vec![0.0, 2.0]]).unwrap();
        assert!((pure - 0.811_278_124_459_132_864).abs() < 1e-12);
        let g = info_gain(&[4.0, 4.0], &[vec![3.0, 1.0], vec![1.0, 3.0]]).unwrap();
        assert!((g - 0.188_721_875_540_867_136).abs() < 1e-12);
    }

    #[test]
    fn info_gain_rejects_inconsistent_totals() {
        let err = info_gain(&[4.0, 4.0], &[vec![3.0, 1.0], vec![1.0, 2.0]]).unwrap_err();
        assert!(matches!(err, TreeError::InconsistentTotals { class: 1, .. }));
    }

    #[test]
    fn merit_agrees_with_info_gain() {
        let branches = vec![vec![3.0, 1.0], vec![1.0, 3.0]];
        let m = SplitCriterion::InfoGain.merit(&branches, 2);
        assert!((m - info_gain(&[4.0, 4.0], &branches).unwrap()).abs() < 1e-15);
        assert_eq!(SplitCriterion::InfoGain.range(2), 1.0);
        assert_eq!(SplitCriterion::InfoGain.range(8), 3.0);
    }

    fn branches_strategy() -> impl Strategy<Value = (usize, Vec<Vec<f64>>)> {
        (2usize..6, 1usize..6).prop_flat_map(|(classes, nb)| {
            (
                Just(classes),
                prop::collection::vec(prop::collection::vec(0.0f64..50.0, classes), nb),
            )
        })
    }

    proptest! {
        #[test]
        fn gain_bounds((classes, branches) in branches_strategy()) {
            let mut parent = vec![0.0; classes];
            for b in &branches {
                for (p, c) in parent.iter_mut().zip(b) { *p += c; }
            }
            prop_assume!(parent.iter().sum::<f64>() > 1e-6);
            let h = entropy(&parent).unwrap();
            let g = info_gain(&parent, &branches).unwrap();
            prop_assert!(g >= -1e-9);
            prop_assert!(g <= h + 1e-9);
            prop_assert!(h <= (classes as f64).log2() + 1e-9);
            let gi = SplitCriterion::Gini.merit(&branches, classes);
            prop_assert!(gi >= -1e-9 && gi <= 1.0);
        }
    }
}
