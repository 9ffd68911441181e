//! Sequential Hoeffding tree learner.

use super::node::Tree;
use super::split::{try_split, SplitDecision};
use super::stats::LeafStats;
use super::{HoeffdingParams, TreeError};
use crate::instance::{ClassIdx, Instance, LeafId, Schema};
use rustc_hash::FxHashMap;
use std::sync::Arc;

/// The single-threaded learner: sort, update statistics, and attempt a
/// split once a leaf has gained a grace period's worth of weight.
#[derive(Clone, Debug)]
pub struct HoeffdingTree {
    tree: Tree,
    stats: FxHashMap<LeafId, LeafStats>,
    params: HoeffdingParams,
    trained: u64,
    decisions: Option<Vec<SplitDecision>>,
}

impl HoeffdingTree {
    pub fn new(schema: Arc<Schema>, params: HoeffdingParams) -> Result<Self, TreeError> {
        params.validate()?;
        Ok(Self {
            tree: Tree::new(schema),
            stats: FxHashMap::default(),
            params,
            trained: 0,
            decisions: None,
        })
    }

    /// Keeps every split attempt for later inspection.
    pub fn record_decisions(mut self) -> Self {
        self.decisions = Some(Vec::new());
        self
    }

    pub fn decisions(&self) -> &[SplitDecision] {
        self.decisions.as_deref().unwrap_or(&[])
    }

    pub fn tree(&self) -> &Tree {
        &self.tree
    }

    pub fn into_tree(self) -> Tree {
        self.tree
    }

    pub fn params(&self) -> &HoeffdingParams {
        &self.params
    }

    pub fn schema(&self) -> &Arc<Schema> {
        self.tree.schema()
    }

    /// Number of instances trained on.
    pub fn trained(&self) -> u64 {
        self.trained
    }

    /// Total (leaf, attribute) statistics cells held.
    pub fn cell_count(&self) -> usize {
        self.stats.values().map(LeafStats::len).sum()
    }

    pub fn leaf_stats(&self, leaf: LeafId) -> Option<&LeafStats> {
        self.stats.get(&leaf)
    }

    pub fn predict(&self, instance: &Instance) -> ClassIdx {
        self.tree.predict(instance)
    }

    /// Trains on one labeled instance. Returns the split attempt made, if
    /// any.
    pub fn train(&mut self, instance: &Instance) -> Result<Option<SplitDecision>, TreeError> {
        let index = self.trained;
        self.tree
            .schema()
            .check(instance)
            .map_err(|violation| TreeError::Schema { index, violation })?;
        let class = instance.label.ok_or(TreeError::Unlabeled(index))?;
        self.trained += 1;
        if instance.weight <= 0.0 {
            return Ok(None);
        }
        let schema = Arc::clone(self.tree.schema());
        let leaf_id = self.tree.sort(instance);
        self.tree.record(leaf_id, class, instance.weight)?;
        self.stats
            .entry(leaf_id)
            .or_default()
            .update_instance(instance, &schema.attributes, schema.num_classes, class);

        let leaf = self.tree.leaf_mut(leaf_id).expect("leaf was just sorted to");
        if leaf.weight - leaf.weight_at_last_check < self.params.grace_period {
            return Ok(None);
        }
        leaf.weight_at_last_check = leaf.weight;
        if leaf.is_pure() {
            return Ok(None);
        }
        let leaf = self.tree.leaf(leaf_id).expect("leaf exists");
        let stats = self.stats.get(&leaf_id).expect("stats were just updated");
        let decision = try_split(leaf, stats, &self.params, schema.num_classes);
        if decision.split {
            self.tree.split_leaf(leaf_id, &decision.best)?;
            self.stats.remove(&leaf_id);
        }
        if let Some(log) = &mut self.decisions {
            log.push(decision.clone());
        }
        Ok(Some(decision))
    }
}

/// Trains a fresh tree on `stream` in one pass.
pub fn train_sequential<I>(schema: Arc<Schema>, stream: I, params: HoeffdingParams) -> Result<HoeffdingTree, TreeError>
where
    I: IntoIterator<Item = Instance>,
{
    let mut ht = HoeffdingTree::new(schema, params)?;
    for instance in stream {
        ht.train(&instance)?;
    }
    Ok(ht)
}
