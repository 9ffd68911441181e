//! Comparison learners: horizontal sharding into independent trees, and
//! the plain sequential Hoeffding tree.

use crate::engine::route_shuffle;
use crate::eval::{prequential, MetricsRow};
use crate::instance::{ClassIdx, Instance, Schema};
use crate::learner::Learner;
use crate::tree::{HoeffdingParams, HoeffdingTree, TreeError};
use crate::Error;
use std::sync::Arc;

/// `p` Hoeffding trees, each trained on every `p`-th instance, voting on
/// predictions.
#[derive(Clone, Debug)]
pub struct ShardEnsemble {
    shards: Vec<HoeffdingTree>,
    counter: u64,
}

impl ShardEnsemble {
    pub fn new(schema: Arc<Schema>, params: HoeffdingParams, shards: usize) -> Result<Self, TreeError> {
        if shards == 0 {
            return Err(TreeError::InvalidParam("shard count must be at least 1"));
        }
        let shards = (0..shards)
            .map(|_| HoeffdingTree::new(Arc::clone(&schema), params))
            .collect::<Result<_, _>>()?;
        Ok(Self { shards, counter: 0 })
    }

    pub fn shards(&self) -> &[HoeffdingTree] {
        &self.shards
    }

    pub fn shard_mut(&mut self, i: usize) -> &mut HoeffdingTree {
        &mut self.shards[i]
    }

    /// Sends the instance to the next shard in turn.
    pub fn train(&mut self, instance: &Instance) -> Result<(), TreeError> {
        let i = route_shuffle(&mut self.counter, self.shards.len());
        self.shards[i].train(instance)?;
        Ok(())
    }

    /// Unweighted majority vote; ties go to the lowest class index.
    pub fn predict(&self, instance: &Instance) -> ClassIdx {
        let k = self.shards[0].schema().num_classes as usize;
        let mut votes = vec![0u32; k.max(1)];
        for s in &self.shards {
            let c = s.predict(instance) as usize;
            if c < votes.len() {
                votes[c] += 1;
            }
        }
        let mut best = 0;
        for (c, &v) in votes.iter().enumerate() {
            if v > votes[best] {
                best = c;
            }
        }
        best as ClassIdx
    }

    /// Statistics cells summed over shards.
    pub fn cell_count(&self) -> usize {
        self.shards.iter().map(HoeffdingTree::cell_count).sum()
    }
}

impl Learner for ShardEnsemble {
    fn predict(&self, instance: &Instance) -> ClassIdx {
        ShardEnsemble::predict(self, instance)
    }

    fn train(&mut self, instance: &Instance) -> Result<(), Error> {
        ShardEnsemble::train(self, instance)?;
        Ok(())
    }

    fn splits(&self) -> u64 {
        self.shards.iter().map(|s| s.tree().num_splits() as u64).sum()
    }

    fn leaves(&self) -> u64 {
        self.shards.iter().map(|s| s.tree().num_leaves() as u64).sum()
    }
}

pub fn shard_train<I>(schema: Arc<Schema>, params: HoeffdingParams, shards: usize, stream: I) -> Result<ShardEnsemble, TreeError>
where
    I: IntoIterator<Item = Instance>,
{
    let mut e = ShardEnsemble::new(schema, params, shards)?;
    for instance in stream {
        e.train(&instance)?;
    }
    Ok(e)
}

/// Test-then-train run of a single Hoeffding tree.
pub fn sequential_runner<I>(
    schema: Arc<Schema>,
    stream: I,
    params: HoeffdingParams,
    report_every: u64,
) -> Result<(HoeffdingTree, Vec<MetricsRow>), Error>
where
    I: IntoIterator<Item = Instance>,
{
    let mut tree = HoeffdingTree::new(schema, params)?;
    let rows = prequential(&mut tree, stream, report_every)?;
    Ok((tree, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::AttributeKind;

    fn schema() -> Arc<Schema> {
        Arc::new(Schema::new(vec![AttributeKind::Categorical { values: 2 }; 2], 3))
    }

    /// Trains shard `i` on instances labeled `classes[i]` until it predicts
    /// that class.
    fn ensemble(classes: &[u32]) -> ShardEnsemble {
        let mut e = ShardEnsemble::new(schema(), HoeffdingParams::default(), classes.len()).unwrap();
        for (i, &c) in classes.iter().enumerate() {
            e.shard_mut(i).train(&Instance::dense(vec![0.0, 0.0], Some(c))).unwrap();
        }
        e
    }

    #[test]
    fn majority_vote_and_ties() {
        let probe = Instance::dense(vec![1.0, 1.0], None);
        assert_eq!(ensemble(&[2, 2, 2]).predict(&probe), 2);
        assert_eq!(ensemble(&[0, 0, 1]).predict(&probe), 0);
        assert_eq!(ensemble(&[1, 2, 2]).predict(&probe), 2);
        assert_eq!(ensemble(&[0, 1]).predict(&probe), 0);
        assert_eq!(ensemble(&[2, 1]).predict(&probe), 1);
    }

    #[test]
    fn round_robin_split_of_the_stream() {
        let stream: Vec<Instance> = (0..1000).map(|i| Instance::dense(vec![0.0, 1.0], Some(i % 3))).collect();
        let e = shard_train(schema(), HoeffdingParams::default(), 2, stream).unwrap();
        assert_eq!(e.shards()[0].trained(), 500);
        assert_eq!(e.shards()[1].trained(), 500);
    }

    #[test]
    fn zero_shards_is_invalid() {
        assert!(ShardEnsemble::new(schema(), HoeffdingParams::default(), 0).is_err());
    }
}
