//! Common interface of the classifiers under evaluation.

use crate::instance::{ClassIdx, Instance};
use crate::Error;

/// An online classifier: predict any time, train one instance at a time.
pub trait Learner {
    fn predict(&self, instance: &Instance) -> ClassIdx;
    fn train(&mut self, instance: &Instance) -> Result<(), Error>;
    /// Split nodes in the model, summed over ensemble members.
    fn splits(&self) -> u64;
    /// Leaves in the model, summed over ensemble members.
    fn leaves(&self) -> u64;
}

impl Learner for crate::tree::HoeffdingTree {
    fn predict(&self, instance: &Instance) -> ClassIdx {
        HoeffdingTree::predict(self, instance)
    }

    fn train(&mut self, instance: &Instance) -> Result<(), Error> {
        HoeffdingTree::train(self, instance)?;
        Ok(())
    }

    fn splits(&self) -> u64 {
        self.tree().num_splits() as u64
    }

    fn leaves(&self) -> u64 {
        self.tree().num_leaves() as u64
    }
}

use crate::tree::HoeffdingTree;
