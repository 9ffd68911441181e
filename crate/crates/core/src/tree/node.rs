//! Tree structure: split nodes and learning leaves in an arena.

use super::split::{SplitCandidate, SplitTest};
use super::TreeError;
use crate::instance::{ClassIdx, Instance, LeafId, Schema};
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafNode {
    pub id: LeafId,
    /// Class counts, including the distribution inherited at creation.
    pub class_dist: Vec<f64>,
    /// Class counts of the instances trained at this leaf since creation.
    pub observed: Vec<f64>,
    /// `n_l`, the sum of `class_dist`.
    pub weight: f64,
    /// `n_l` at the last grace-period check.
    pub weight_at_last_check: f64,
}

impl LeafNode {
    fn new(id: LeafId, class_dist: Vec<f64>) -> Self {
        let weight = class_dist.iter().sum();
        Self {
            id,
            observed: vec![0.0; class_dist.len()],
            class_dist,
            weight,
            weight_at_last_check: weight,
        }
    }

    /// True when at most one class has been seen.
    pub fn is_pure(&self) -> bool {
        self.class_dist.iter().filter(|&&c| c > 0.0).count() <= 1
    }

    /// Majority class, ties to the lowest index; `None` when empty.
    pub fn majority(&self) -> Option<ClassIdx> {
        majority(&self.class_dist)
    }
}

fn majority(dist: &[f64]) -> Option<ClassIdx> {
    let mut best: Option<(usize, f64)> = None;
    for (k, &c) in dist.iter().enumerate() {
        if c > 0.0 && best.is_none_or(|(_, b)| c > b) {
            best = Some((k, c));
        }
    }
    best.map(|(k, _)| k as ClassIdx)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitNode {
    pub test: SplitTest,
    /// Node index per branch.
    pub children: Vec<usize>,
    /// Class distribution each branch started with.
    pub branch_dists: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf(LeafNode),
    Split(SplitNode),
}

/// A decision tree whose leaves have stable, never reused ids.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Tree {
    schema: Arc<Schema>,
    nodes: Vec<Node>,
    next_leaf: u64,
    /// Class counts of every instance trained so far.
    seen: Vec<f64>,
    #[serde(skip)]
    leaf_index: FxHashMap<LeafId, usize>,
}

const ROOT: usize = 0;

impl Tree {
    pub fn new(schema: Arc<Schema>) -> Self {
        let classes = schema.num_classes as usize;
        let root = LeafNode::new(LeafId(0), vec![0.0; classes]);
        let mut leaf_index = FxHashMap::default();
        leaf_index.insert(root.id, ROOT);
        Self {
            schema,
            nodes: vec![Node::Leaf(root)],
            next_leaf: 1,
            seen: vec![0.0; classes],
            leaf_index,
        }
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    fn leaf_node_index(&self, instance: &Instance) -> usize {
        let mut at = ROOT;
        loop {
            match &self.nodes[at] {
                Node::Leaf(_) => return at,
                Node::Split(s) => at = s.children[s.test.branch(instance)],
            }
        }
    }

    /// Id of the leaf reached by following the split tests from the root.
    pub fn sort(&self, instance: &Instance) -> LeafId {
        match &self.nodes[self.leaf_node_index(instance)] {
            Node::Leaf(l) => l.id,
            Node::Split(_) => unreachable!(),
        }
    }

    /// Split tests on the path from the root to the leaf reached, with the
    /// branch taken at each.
    pub fn path(&self, instance: &Instance) -> Vec<(SplitTest, usize)> {
        let mut out = Vec::new();
        let mut at = ROOT;
        while let Node::Split(s) = &self.nodes[at] {
            let b = s.test.branch(instance);
            out.push((s.test, b));
            at = s.children[b];
        }
        out
    }

    pub fn leaf(&self, id: LeafId) -> Option<&LeafNode> {
        match self.nodes.get(*self.leaf_index.get(&id)?) {
            Some(Node::Leaf(l)) => Some(l),
            _ => None,
        }
    }

    pub fn leaf_mut(&mut self, id: LeafId) -> Option<&mut LeafNode> {
        let at = *self.leaf_index.get(&id)?;
        match self.nodes.get_mut(at) {
            Some(Node::Leaf(l)) => Some(l),
            _ => None,
        }
    }

    pub fn contains_leaf(&self, id: LeafId) -> bool {
        self.leaf_index.contains_key(&id)
    }

    pub fn leaves(&self) -> impl Iterator<Item = &LeafNode> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf(l) => Some(l),
            Node::Split(_) => None,
        })
    }

    pub fn num_leaves(&self) -> usize {
        self.leaf_index.len()
    }

    pub fn num_splits(&self) -> usize {
        self.nodes.len() - self.leaf_index.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf(_) => 0,
                Node::Split(s) => 1 + s.children.iter().map(|&c| go(nodes, c)).max().unwrap_or(0),
            }
        }
        go(&self.nodes, ROOT)
    }

    /// Books a training instance of class `class` at leaf `id`.
    pub fn record(&mut self, id: LeafId, class: ClassIdx, weight: f64) -> Result<(), TreeError> {
        let leaf = self.leaf_mut(id).ok_or(TreeError::UnknownLeaf(id))?;
        let k = class as usize;
        leaf.class_dist[k] += weight;
        leaf.observed[k] += weight;
        leaf.weight += weight;
        self.seen[k] += weight;
        Ok(())
    }

    /// Replaces leaf `id` with a split node on the candidate's test. Each
    /// branch gets a fresh leaf whose class distribution is the branch's
    /// distribution in the candidate. Returns the new leaf ids.
    pub fn split_leaf(&mut self, id: LeafId, candidate: &SplitCandidate) -> Result<Vec<LeafId>, TreeError> {
        let test = candidate.test.ok_or(TreeError::NoSplitCandidate)?;
        let at = match self.leaf_index.get(&id) {
            Some(&at) => at,
            None if id.0 < self.next_leaf => return Err(TreeError::RetiredLeaf(id)),
            None => return Err(TreeError::UnknownLeaf(id)),
        };
        let classes = self.schema.num_classes as usize;
        let branches = test.num_branches();
        let mut branch_dists = Vec::with_capacity(branches);
        let mut children = Vec::with_capacity(branches);
        let mut ids = Vec::with_capacity(branches);
        for b in 0..branches {
            let mut dist = candidate.branch_dists.get(b).cloned().unwrap_or_default();
            dist.resize(classes, 0.0);
            let leaf_id = LeafId(self.next_leaf);
            self.next_leaf += 1;
            children.push(self.nodes.len());
            self.leaf_index.insert(leaf_id, self.nodes.len());
            self.nodes.push(Node::Leaf(LeafNode::new(leaf_id, dist.clone())));
            branch_dists.push(dist);
            ids.push(leaf_id);
        }
        self.leaf_index.remove(&id);
        self.nodes[at] = Node::Split(SplitNode {
            test,
            children,
            branch_dists,
        });
        Ok(ids)
    }

    /// Majority class at the reached leaf, ties to the lowest index. An
    /// empty leaf falls back to the majority over everything seen so far,
    /// and class 0 before any training.
    pub fn predict(&self, instance: &Instance) -> ClassIdx {
        let leaf = match &self.nodes[self.leaf_node_index(instance)] {
            Node::Leaf(l) => l,
            Node::Split(_) => unreachable!(),
        };
        leaf.majority().or_else(|| majority(&self.seen)).unwrap_or(0)
    }

    /// True when both trees have the same shape, tests and leaf ids.
    pub fn same_structure(&self, other: &Tree) -> bool {
        self.nodes.len() == other.nodes.len()
            && self.nodes.iter().zip(&other.nodes).all(|(a, b)| match (a, b) {
                (Node::Leaf(x), Node::Leaf(y)) => x.id == y.id,
                (Node::Split(x), Node::Split(y)) => x.test == y.test && x.children == y.children,
                _ => false,
            })
    }

    /// Indented text rendering, one node per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        self.dump_node(ROOT, 0, None, &mut out);
        out
    }

    fn dump_node(&self, at: usize, depth: usize, label: Option<String>, out: &mut String) {
        let indent = "  ".repeat(depth);
        let label = label.map(|l| format!("{l} ")).unwrap_or_default();
        match &self.nodes[at] {
            Node::Leaf(l) => {
                let class = l.majority().or_else(|| majority(&self.seen)).unwrap_or(0);
                let dist: Vec<String> = l.class_dist.iter().map(f64::to_string).collect();
                let _ = writeln!(
                    out,
                    "{indent}{label}Leaf({}) class={class} n={} dist=[{}]",
                    l.id,
                    l.weight,
                    dist.join(", ")
                );
            }
            Node::Split(s) => {
                match s.test {
                    SplitTest::Categorical { attribute, values } => {
                        let _ = writeln!(out, "{indent}{label}Split(attr {attribute} in {values} values)");
                    }
                    SplitTest::Numeric { attribute, threshold } => {
                        let _ = writeln!(out, "{indent}{label}Split(attr {attribute} <= {threshold})");
                    }
                }
                for (b, &child) in s.children.iter().enumerate() {
                    let label = match s.test {
                        SplitTest::Categorical { attribute, .. } => format!("[attr {attribute} = {b}]"),
                        SplitTest::Numeric { threshold, .. } if b == 0 => format!("[<= {threshold}]"),
                        SplitTest::Numeric { threshold, .. } => format!("[> {threshold}]"),
                    };
                    self.dump_node(child, depth + 1, Some(label), out);
                }
            }
        }
    }

    pub(crate) fn rebuild_index(&mut self) {
        self.leaf_index = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| match n {
                Node::Leaf(l) => Some((l.id, i)),
                Node::Split(_) => None,
            })
            .collect();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::AttributeKind;

    fn schema() -> Arc<Schema> {
        Arc::new(Schema::new(
            vec![AttributeKind::Categorical { values: 2 }, AttributeKind::Numeric],
            2,
        ))
    }

    fn cat_split(attribute: u32, dists: Vec<Vec<f64>>) -> SplitCandidate {
        SplitCandidate {
            test: Some(SplitTest::Categorical { attribute, values: 2 }),
            merit: 0.5,
            branch_dists: dists,
        }
    }

    #[test]
    fn single_leaf_sorts_everything_to_root() {
        let t = Tree::new(schema());
        assert_eq!(t.sort(&Instance::dense(vec![1.0, 3.0], None)), LeafId(0));
        assert_eq!(t.dump(), "Leaf(0) class=0 n=0 dist=[0, 0]\n");
    }

    #[test]
    fn categorical_split_routes_by_value() {
        let mut t = Tree::new(schema());
        let ids = t.split_leaf(LeafId(0), &cat_split(0, vec![vec![3.0, 1.0], vec![0.0, 4.0]])).unwrap();
        assert_eq!(ids, vec![LeafId(1), LeafId(2)]);
        assert_eq!(t.num_leaves(), 2);
        assert_eq!(t.sort(&Instance::dense(vec![1.0, 0.0], None)), LeafId(2));
        assert_eq!(t.leaf(LeafId(1)).unwrap().weight, 4.0);
        assert_eq!(t.predict(&Instance::dense(vec![0.0, 0.0], None)), 0);
        assert_eq!(t.predict(&Instance::dense(vec![1.0, 0.0], None)), 1);
        assert_eq!(t.dump().lines().count(), 3);
    }

    #[test]
    fn retired_ids_are_not_reused() {
        let mut t = Tree::new(schema());
        t.split_leaf(LeafId(0), &cat_split(0, vec![vec![1.0, 0.0], vec![0.0, 1.0]])).unwrap();
        assert!(!t.contains_leaf(LeafId(0)));
        assert!(matches!(
            t.split_leaf(LeafId(0), &cat_split(0, vec![])),
            Err(TreeError::RetiredLeaf(LeafId(0)))
        ));
        assert!(matches!(
            t.split_leaf(LeafId(99), &cat_split(0, vec![])),
            Err(TreeError::UnknownLeaf(LeafId(99)))
        ));
        let ids = t.split_leaf(LeafId(2), &cat_split(0, vec![vec![0.0, 1.0], vec![0.0, 0.0]])).unwrap();
        assert_eq!(ids, vec![LeafId(3), LeafId(4)]);
        assert!(t.leaves().all(|l| l.id != LeafId(0) && l.id != LeafId(2)));
    }

    #[test]
    fn prediction_ties_and_empty_leaf_fallback() {
        let mut t = Tree::new(schema());
        assert_eq!(t.predict(&Instance::dense(vec![0.0, 0.0], None)), 0);
        t.record(LeafId(0), 1, 2.0).unwrap();
        t.record(LeafId(0), 0, 2.0).unwrap();
        assert_eq!(t.predict(&Instance::dense(vec![0.0, 0.0], None)), 0);
        t.record(LeafId(0), 1, 1.0).unwrap();
        t.split_leaf(LeafId(0), &cat_split(0, vec![vec![2.0, 3.0], vec![0.0, 0.0]])).unwrap();
        // Leaf 2 is empty: fall back to the global majority (class 1).
        assert_eq!(t.predict(&Instance::dense(vec![1.0, 0.0], None)), 1);
    }

    #[test]
    fn no_split_candidate_is_rejected() {
        let mut t = Tree::new(schema());
        assert!(matches!(
            t.split_leaf(LeafId(0), &SplitCandidate::no_split()),
            Err(TreeError::NoSplitCandidate)
        ));
    }
}
