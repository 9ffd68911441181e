//! Independent oracles shared by the property and acceptance targets.
//!
//! Nothing here calls into the learner's split logic: the brute-force tree
//! stores raw instances and recounts them on every attempt, and the Zipf
//! check recomputes the distribution from its definition.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;
use vht_core::datagen::Zipf;
use vht_core::tree::{top_two, CandidateParams, LeafStats, SplitCandidate, SplitCriterion};
use vht_core::{AttributeKind, ClassIdx, HoeffdingParams, HoeffdingTree, Instance, Schema};

/// Hoeffding bound reference values `(R, δ, n, ε)` from 40-digit arithmetic.
pub const BOUND_ORACLE: &[(f64, f64, f64, f64)] = &[
    (1.0, 1e-7, 200.0, 0.200_736_740_850_786_455_084_422_957_992),
    (1.0, 1e-7, 1.0, 2.838_846_213_777_555_072_703_109_171_09),
    (1.0, 0.05, 1000.0, 0.038_702_275_602_049_493_298_500_460_133_9),
    (2.0, 1e-3, 50.0, 0.525_652_176_975_693_197_070_979_585_636),
    (1.584_962_500_721_156, 1e-7, 12345.0, 0.040_496_296_810_840_318_097_666_709_995_2),
    (3.321_928_094_887_362, 1e-9, 1e6, 0.010_693_117_250_106_561_913_641_746_528_4),
    (0.5, 0.2, 7.0, 0.169_528_648_676_374_182_021_868_899_706),
    (1.0, 1e-7, 1e9, 0.000_089_772_199_624_823_496_449_521_708_068_3),
];

fn log2_entropy(counts: &[f64]) -> f64 {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let mut h = 0.0;
    for &c in counts {
        if c > 0.0 {
            let p = c / total;
            h -= p * p.log2();
        }
    }
    h
}

/// Attempt made by the brute-force tree: instances seen at the leaf, best
/// attribute (None for no split), the two top merits and whether it split.
#[derive(Clone, Debug, PartialEq)]
pub struct BruteAttempt {
    pub n: f64,
    pub best: Option<u32>,
    pub best_merit: f64,
    pub second_merit: f64,
    pub split: bool,
}

enum BruteNode {
    /// `inherited` holds the class counts of the parent's branch at split
    /// time; they count towards `n` and purity but not towards the merits.
    Leaf { inherited: Vec<f64>, rows: Vec<(Vec<u32>, ClassIdx)>, checked_at: usize },
    Split { attribute: u32, children: Vec<usize> },
}

/// Categorical-only Hoeffding tree with information gain that keeps every
/// instance it sees at its leaf and recounts them from scratch at each
/// split attempt. New leaves start from their branch's class counts.
pub struct BruteTree {
    values: Vec<u32>,
    classes: u32,
    params: HoeffdingParams,
    nodes: Vec<BruteNode>,
    pub attempts: Vec<BruteAttempt>,
}

impl BruteTree {
    pub fn new(values: Vec<u32>, classes: u32, params: HoeffdingParams) -> Self {
        Self {
            values,
            classes,
            params,
            nodes: vec![BruteNode::Leaf { inherited: vec![0.0; classes as usize], rows: Vec::new(), checked_at: 0 }],
            attempts: Vec::new(),
        }
    }

    fn leaf_of(&self, x: &[u32]) -> usize {
        let mut at = 0;
        while let BruteNode::Split { attribute, children } = &self.nodes[at] {
            at = children[x[*attribute as usize] as usize];
        }
        at
    }

    pub fn train(&mut self, x: Vec<u32>, y: ClassIdx) {
        let at = self.leaf_of(&x);
        let BruteNode::Leaf { inherited, rows, checked_at } = &mut self.nodes[at] else { unreachable!() };
        rows.push((x, y));
        let fresh = rows.len();
        if ((fresh - *checked_at) as f64) < self.params.grace_period {
            return;
        }
        *checked_at = fresh;
        let k = self.classes as usize;
        let mut parent = vec![0.0; k];
        for (_, y) in rows.iter() {
            parent[*y as usize] += 1.0;
        }
        let seen: Vec<f64> = parent.iter().zip(inherited.iter()).map(|(a, b)| a + b).collect();
        if seen.iter().filter(|&&c| c > 0.0).count() <= 1 {
            return;
        }
        let n = seen.iter().sum::<f64>();
        let h = log2_entropy(&parent);
        // (merit, attribute); None is the no-split option with merit 0.
        let mut scored: Vec<(f64, Option<u32>)> = vec![(0.0, None)];
        let mut tables = Vec::new();
        for (a, &v) in self.values.iter().enumerate() {
            let mut table = vec![vec![0.0; k]; v as usize];
            for (x, y) in rows.iter() {
                table[x[a] as usize][*y as usize] += 1.0;
            }
            let children: f64 = table.iter().map(|b| b.iter().sum::<f64>() / fresh as f64 * log2_entropy(b)).sum();
            scored.push((h - children, Some(a as u32)));
            tables.push(table);
        }
        // Merits closer than 1e-12 count as equal; then no-split first and
        // lower attribute ids first. `scored` is already in that id order.
        let better = |x: &(f64, Option<u32>), y: &(f64, Option<u32>)| x.0 - y.0 > 1e-12;
        let mut top = scored[0];
        let mut runner: Option<(f64, Option<u32>)> = None;
        for &c in &scored[1..] {
            if better(&c, &top) {
                runner = Some(top);
                top = c;
            } else if runner.is_none_or(|r| better(&c, &r)) {
                runner = Some(c);
            }
        }
        let (g1, best) = top;
        let g2 = runner.map_or(0.0, |r| r.0);
        let r = (self.classes.max(2) as f64).log2();
        let eps = (r * r * (1.0 / self.params.delta).ln() / (2.0 * n)).sqrt();
        let split = best.is_some() && (g1 - g2 > eps || eps < self.params.tie_threshold);
        self.attempts.push(BruteAttempt {
            n,
            best,
            best_merit: g1,
            second_merit: g2,
            split,
        });
        if split {
            let attribute = best.unwrap();
            let first = self.nodes.len();
            let arity = self.values[attribute as usize] as usize;
            for branch in tables.swap_remove(attribute as usize) {
                self.nodes.push(BruteNode::Leaf { inherited: branch, rows: Vec::new(), checked_at: 0 });
            }
            self.nodes[at] = BruteNode::Split {
                attribute,
                children: (first..first + arity).collect(),
            };
        }
    }

    /// Pre-order list of split attributes, with `None` for leaves.
    pub fn shape(&self) -> Vec<Option<u32>> {
        let mut out = Vec::new();
        let mut stack = vec![0];
        while let Some(at) = stack.pop() {
            match &self.nodes[at] {
                BruteNode::Leaf { .. } => out.push(None),
                BruteNode::Split { attribute, children } => {
                    out.push(Some(*attribute));
                    stack.extend(children.iter().rev());
                }
            }
        }
        out
    }
}

/// Random categorical stream whose label depends on the first two
/// attributes, with label noise so that splits are neither trivial nor
/// impossible.
pub fn categorical_stream(seed: u64, n: usize) -> (Vec<u32>, u32, Vec<(Vec<u32>, ClassIdx)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(2..=6);
    let values: Vec<u32> = (0..m).map(|_| rng.random_range(2..=4)).collect();
    let classes = rng.random_range(2..=3);
    let noise = rng.random_range(0.0..0.3);
    let rows = (0..n)
        .map(|_| {
            let x: Vec<u32> = values.iter().map(|&v| rng.random_range(0..v)).collect();
            let y = if rng.random_bool(noise) {
                rng.random_range(0..classes)
            } else {
                (x[0] + x[1 % m]) % classes
            };
            (x, y)
        })
        .collect();
    (values, classes, rows)
}

/// Trains the library tree and the brute-force oracle on the same stream
/// and reports the first disagreement.
pub fn compare_with_brute_force(seed: u64, n: usize, params: HoeffdingParams) -> Result<usize, String> {
    let (values, classes, rows) = categorical_stream(seed, n);
    let schema = Arc::new(Schema::new(
        values.iter().map(|&v| AttributeKind::Categorical { values: v }).collect(),
        classes,
    ));
    let mut tree = HoeffdingTree::new(schema, params).map_err(|e| e.to_string())?.record_decisions();
    let mut brute = BruteTree::new(values, classes, params);
    for (x, y) in &rows {
        tree.train(&Instance::dense(x.iter().map(|&v| v as f64).collect(), Some(*y)))
            .map_err(|e| e.to_string())?;
        brute.train(x.clone(), *y);
    }
    let got = tree.decisions();
    if got.len() != brute.attempts.len() {
        return Err(format!("seed {seed}: {} attempts vs {} in the oracle", got.len(), brute.attempts.len()));
    }
    for (i, (d, b)) in got.iter().zip(&brute.attempts).enumerate() {
        let same = d.n == b.n
            && d.best.attribute() == b.best
            && d.split == b.split
            && (d.best.merit - b.best_merit).abs() < 1e-9
            && (d.second.merit - b.second_merit).abs() < 1e-9;
        if !same {
            return Err(format!("seed {seed}: attempt {i} differs: {d:?} vs {b:?}"));
        }
    }
    let shape: Vec<Option<u32>> = preorder(tree.tree());
    if shape != brute.shape() {
        return Err(format!("seed {seed}: shapes differ {shape:?} vs {:?}", brute.shape()));
    }
    Ok(got.iter().filter(|d| d.split).count())
}

fn preorder(tree: &vht_core::Tree) -> Vec<Option<u32>> {
    // The dump is one node per line in pre-order.
    tree.dump()
        .lines()
        .map(|l| {
            l.split_once("Split(attr ")
                .map(|(_, rest)| rest.split(' ').next().unwrap().parse().unwrap())
        })
        .collect()
}

/// Random labeled rows over `m` attributes of mixed kinds.
pub fn random_rows(rng: &mut ChaCha8Rng, m: usize, classes: u32) -> (Vec<AttributeKind>, Vec<(Vec<f64>, ClassIdx)>) {
    let kinds: Vec<AttributeKind> = (0..m)
        .map(|_| {
            if rng.random_bool(0.5) {
                AttributeKind::Categorical { values: rng.random_range(2..5) }
            } else {
                AttributeKind::Numeric
            }
        })
        .collect();
    let n = rng.random_range(5..300);
    let rows = (0..n)
        .map(|_| {
            let y = rng.random_range(0..classes);
            let x = kinds
                .iter()
                .map(|&kind| match kind {
                    AttributeKind::Categorical { values } => rng.random_range(0..values) as f64,
                    AttributeKind::Numeric => rng.random_range(-5.0..5.0) + y as f64,
                })
                .collect();
            (x, y)
        })
        .collect();
    (kinds, rows)
}

/// Leaf statistics for the attributes `keep` selects.
pub fn leaf_from_rows(
    kinds: &[AttributeKind],
    rows: &[(Vec<f64>, ClassIdx)],
    classes: u32,
    keep: impl Fn(usize) -> bool,
) -> LeafStats {
    let mut leaf = LeafStats::default();
    for (x, y) in rows {
        for (a, &kind) in kinds.iter().enumerate() {
            if keep(a) {
                leaf.update(a as u32, kind, classes, x[a], *y, 1.0);
            }
        }
    }
    leaf
}

/// Pooled top two over all attributes versus the merge of the local top two
/// of a random partition of the attributes into `p` groups.
pub fn merge_matches_pooled(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = rng.random_range(2..5);
    let m = rng.random_range(1..12);
    let p = rng.random_range(1..6);
    let (kinds, rows) = random_rows(&mut rng, m, classes);
    let mut basis = vec![0.0; classes as usize];
    for (_, y) in &rows {
        basis[*y as usize] += 1.0;
    }
    let criterion = if rng.random_bool(0.5) { SplitCriterion::InfoGain } else { SplitCriterion::Gini };
    let params = CandidateParams {
        criterion,
        numeric_thresholds: 10,
        num_classes: classes,
    };
    let pooled = top_two(leaf_from_rows(&kinds, &rows, classes, |_| true).candidates(&params, &basis));
    let owner: Vec<usize> = (0..m).map(|_| rng.random_range(0..p)).collect();
    let mut locals: Vec<SplitCandidate> = Vec::new();
    for r in 0..p {
        let part = leaf_from_rows(&kinds, &rows, classes, |a| owner[a] == r);
        let (b, s) = top_two(part.candidates(&params, &basis));
        locals.push(b);
        locals.push(s);
    }
    let merged = top_two(locals);
    if merged != pooled {
        return Err(format!("seed {seed}: merged {merged:?} vs pooled {pooled:?}"));
    }
    Ok(())
}

/// Largest gap between the analytic Zipf CDF and the empirical CDF of
/// `samples` draws.
pub fn zipf_sup_norm(skew: f64, d: usize, samples: usize, seed: u64) -> f64 {
    let zipf = Zipf::new(skew, d).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; d];
    for _ in 0..samples {
        counts[zipf.sample(&mut rng)] += 1;
    }
    let norm: f64 = (1..=d).map(|r| (r as f64).powf(-skew)).sum();
    let mut analytic = 0.0;
    let mut empirical = 0.0;
    let mut worst: f64 = 0.0;
    for (i, &c) in counts.iter().enumerate() {
        analytic += ((i + 1) as f64).powf(-skew) / norm;
        empirical += c as f64 / samples as f64;
        worst = worst.max((analytic - empirical).abs());
    }
    worst
}
