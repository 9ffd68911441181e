use super::{instance_rng, structure_rng, DatagenError};
use crate::instance::{AttributeKind, ClassIdx, Instance, Schema};
use rand::seq::SliceRandom;
use rand::Rng;
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseGenConfig {
    pub categorical: usize,
    pub numerical: usize,
    /// Values per categorical attribute.
    pub values: u32,
    pub min_depth: usize,
    pub max_depth: usize,
    /// Chance that a node at or below `min_depth` levels becomes a leaf
    /// before the drawn depth is reached.
    pub leaf_fraction: f64,
    pub classes: u32,
    pub seed: u64,
}

impl Default for DenseGenConfig {
    fn default() -> Self {
        Self {
            categorical: 10,
            numerical: 10,
            values: 2,
            min_depth: 3,
            max_depth: 8,
            leaf_fraction: 0.15,
            classes: 2,
            seed: 1,
        }
    }
}

impl DenseGenConfig {
    pub fn new(categorical: usize, numerical: usize, seed: u64) -> Self {
        Self {
            categorical,
            numerical,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), DatagenError> {
        if self.categorical + self.numerical == 0 {
            return Err(DatagenError::Invalid("need at least one attribute"));
        }
        if self.categorical > 0 && self.values < 2 {
            return Err(DatagenError::Invalid("categorical attributes need at least 2 values"));
        }
        if self.min_depth == 0 || self.min_depth > self.max_depth {
            return Err(DatagenError::Invalid("depth bounds must satisfy 1 <= min <= max"));
        }
        if self.max_depth > 24 {
            return Err(DatagenError::Invalid("max depth above 24 is not supported"));
        }
        if !(0.0..=1.0).contains(&self.leaf_fraction) {
            return Err(DatagenError::Invalid("leaf fraction must be in [0, 1]"));
        }
        if self.classes < 2 {
            return Err(DatagenError::Invalid("need at least 2 classes"));
        }
        Ok(())
    }

    pub fn schema(&self) -> Schema {
        let mut attributes = vec![AttributeKind::Categorical { values: self.values }; self.categorical];
        attributes.extend(std::iter::repeat_n(AttributeKind::Numeric, self.numerical));
        Schema::new(attributes, self.classes)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum HiddenNode {
    Leaf(ClassIdx),
    Categorical { attribute: usize, children: Vec<usize> },
    Numeric { attribute: usize, threshold: f64, children: [usize; 2] },
}

/// The concept behind a dense stream: a random decision tree over the
/// generator's attributes.
#[derive(Clone, Debug, PartialEq)]
pub struct HiddenTree {
    nodes: Vec<HiddenNode>,
    depth: usize,
}

impl HiddenTree {
    fn build(config: &DenseGenConfig) -> Self {
        let mut rng = structure_rng(config.seed);
        let depth = rng.random_range(config.min_depth..=config.max_depth);
        let mut b = Builder {
            config,
            depth,
            nodes: Vec::new(),
            leaves: Vec::new(),
            used: vec![false; config.categorical],
            bounds: vec![(0.0, 1.0); config.numerical],
        };
        b.grow(&mut rng, 0, 1.0);
        let Builder { mut nodes, leaves, .. } = b;
        assign_classes(&mut nodes, &leaves, config.classes, &mut rng);
        Self { nodes, depth }
    }

    pub fn classify(&self, values: &[f64]) -> ClassIdx {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                HiddenNode::Leaf(c) => return *c,
                HiddenNode::Categorical { attribute, children } => {
                    at = children[(values[*attribute] as usize).min(children.len() - 1)];
                }
                HiddenNode::Numeric {
                    attribute,
                    threshold,
                    children,
                } => at = children[usize::from(values[*attribute] > *threshold)],
            }
        }
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, HiddenNode::Leaf(_))).count()
    }

    /// The depth drawn for this tree; leaves may sit higher.
    pub fn depth(&self) -> usize {
        self.depth
    }
}

struct Builder<'a> {
    config: &'a DenseGenConfig,
    depth: usize,
    nodes: Vec<HiddenNode>,
    /// (node index, probability mass reaching it).
    leaves: Vec<(usize, f64)>,
    used: Vec<bool>,
    bounds: Vec<(f64, f64)>,
}

impl Builder<'_> {
    fn grow<R: Rng>(&mut self, rng: &mut R, level: usize, mass: f64) -> usize {
        let at = self.nodes.len();
        self.nodes.push(HiddenNode::Leaf(0));
        let free: Vec<usize> = (0..self.config.categorical)
            .filter(|&a| !self.used[a])
            .chain(self.config.categorical..self.config.categorical + self.config.numerical)
            .collect();
        let early = level >= self.config.min_depth && rng.random::<f64>() < self.config.leaf_fraction;
        if level >= self.depth || free.is_empty() || early {
            self.leaves.push((at, mass));
            return at;
        }
        let attribute = free[rng.random_range(0..free.len())];
        if attribute < self.config.categorical {
            self.used[attribute] = true;
            let v = self.config.values as usize;
            let children = (0..v).map(|_| self.grow(rng, level + 1, mass / v as f64)).collect();
            self.used[attribute] = false;
            self.nodes[at] = HiddenNode::Categorical { attribute, children };
        } else {
            let k = attribute - self.config.categorical;
            let (lo, hi) = self.bounds[k];
            let threshold = rng.random_range(lo..hi);
            let share = (threshold - lo) / (hi - lo);
            self.bounds[k] = (lo, threshold);
            let left = self.grow(rng, level + 1, mass * share);
            self.bounds[k] = (threshold, hi);
            let right = self.grow(rng, level + 1, mass * (1.0 - share));
            self.bounds[k] = (lo, hi);
            self.nodes[at] = HiddenNode::Numeric {
                attribute,
                threshold,
                children: [left, right],
            };
        }
        at
    }
}

/// Labels leaves uniformly at random, then moves the lightest leaves out of
/// over-full classes until no class is more than 2% of mass from an equal
/// share or no move helps.
fn assign_classes<R: Rng>(nodes: &mut [HiddenNode], leaves: &[(usize, f64)], classes: u32, rng: &mut R) {
    let k = classes as usize;
    let mut label: Vec<usize> = leaves.iter().map(|_| rng.random_range(0..k)).collect();
    let mut load = vec![0.0; k];
    for (i, &(_, m)) in leaves.iter().enumerate() {
        load[label[i]] += m;
    }
    let target = 1.0 / k as f64;
    let mut order: Vec<usize> = (0..leaves.len()).collect();
    order.shuffle(rng);
    order.sort_by(|&a, &b| leaves[a].1.total_cmp(&leaves[b].1));
    for _ in 0..leaves.len() * k {
        let heavy = (0..k).max_by(|&a, &b| load[a].total_cmp(&load[b])).expect("k >= 2");
        let light = (0..k).min_by(|&a, &b| load[a].total_cmp(&load[b])).expect("k >= 2");
        if load[heavy] - target <= 0.02 && target - load[light] <= 0.02 {
            break;
        }
        let gap = load[heavy] - load[light];
        let Some(&i) = order.iter().find(|&&i| label[i] == heavy && leaves[i].1 < gap) else {
            break;
        };
        label[i] = light;
        load[heavy] -= leaves[i].1;
        load[light] += leaves[i].1;
    }
    for (i, &(node, _)) in leaves.iter().enumerate() {
        nodes[node] = HiddenNode::Leaf(label[i] as ClassIdx);
    }
}

/// Dense instances labeled by a seeded [`HiddenTree`]; instance `i` is a
/// pure function of (config, `i`).
#[derive(Clone, Debug)]
pub struct DenseGenerator {
    config: DenseGenConfig,
    schema: Arc<Schema>,
    tree: HiddenTree,
}

impl DenseGenerator {
    pub fn new(config: DenseGenConfig) -> Result<Self, DatagenError> {
        config.validate()?;
        Ok(Self {
            schema: Arc::new(config.schema()),
            tree: HiddenTree::build(&config),
            config,
        })
    }

    pub fn config(&self) -> &DenseGenConfig {
        &self.config
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn hidden_tree(&self) -> &HiddenTree {
        &self.tree
    }

    pub fn instance(&self, index: u64) -> Instance {
        let mut rng = instance_rng(self.config.seed, index);
        let c = &self.config;
        let mut values = Vec::with_capacity(c.categorical + c.numerical);
        for _ in 0..c.categorical {
            values.push(rng.random_range(0..c.values) as f64);
        }
        for _ in 0..c.numerical {
            values.push(rng.random::<f64>());
        }
        let label = self.tree.classify(&values);
        Instance::dense(values, Some(label))
    }

    /// Instances `0..n`.
    pub fn stream(&self, n: u64) -> DenseStream {
        DenseStream {
            generator: Arc::new(self.clone()),
            next: 0,
            end: n,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DenseStream {
    generator: Arc<DenseGenerator>,
    next: u64,
    end: u64,
}

impl Iterator for DenseStream {
    type Item = Instance;

    fn next(&mut self) -> Option<Instance> {
        (self.next < self.end).then(|| {
            self.next += 1;
            self.generator.instance(self.next - 1)
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.end - self.next) as usize;
        (left, Some(left))
    }
}

impl ExactSizeIterator for DenseStream {}

pub fn gen_dense(config: DenseGenConfig, n: u64) -> Result<DenseStream, DatagenError> {
    Ok(DenseGenerator::new(config)?.stream(n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_respects_drawn_depth() {
        for seed in 0..20 {
            let g = DenseGenerator::new(DenseGenConfig::new(5, 5, seed)).unwrap();
            let t = g.hidden_tree();
            assert!((3..=8).contains(&t.depth()));
            assert!(t.num_leaves() >= 2);
        }
    }

    #[test]
    fn categorical_only_tree_does_not_reuse_attributes() {
        let g = DenseGenerator::new(DenseGenConfig::new(3, 0, 5)).unwrap();
        // Three binary attributes give at most 8 leaves.
        assert!(g.hidden_tree().num_leaves() <= 8);
    }

    #[test]
    fn rejects_empty_config() {
        assert!(DenseGenerator::new(DenseGenConfig::new(0, 0, 1)).is_err());
    }
}
