use crate::instance::{AttributeId, ClassIdx, Instance, LeafId};
use crate::tree::SplitCandidate;
use std::sync::Arc;

/// The content events exchanged by the VHT processors.
#[derive(Clone, Debug, PartialEq)]
pub enum VhtEvent {
    /// A training or unlabeled instance, from the source to a model.
    Instance(Instance),
    /// One attribute of a training instance, keyed by (leaf, attribute).
    Attribute(AttributeEvent),
    /// Request for the local top two candidates of a leaf.
    Compute(ComputeEvent),
    /// Answer to a `Compute`.
    LocalResult(Box<LocalResult>),
    /// The leaf was split; its statistics can be released.
    Drop(LeafId),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttributeEvent {
    pub leaf: LeafId,
    pub attribute: AttributeId,
    pub value: f64,
    pub class: ClassIdx,
    pub weight: f64,
    /// The instance was sparse, so absent attributes were zero.
    pub sparse: bool,
}

impl AttributeEvent {
    /// Routing key: leaf id then attribute id, little-endian.
    pub fn key(&self) -> [u8; 12] {
        let mut k = [0u8; 12];
        k[..8].copy_from_slice(&self.leaf.0.to_le_bytes());
        k[8..].copy_from_slice(&self.attribute.to_le_bytes());
        k
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComputeEvent {
    pub leaf: LeafId,
    pub attempt: u64,
    /// Class distribution of the instances fed to the leaf's statistics,
    /// used to fill in the implicit zeros of sparse attributes.
    pub basis: Arc<[f64]>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalResult {
    pub leaf: LeafId,
    pub attempt: u64,
    /// Statistics replica that answered.
    pub replica: usize,
    pub best: SplitCandidate,
    pub second: SplitCandidate,
    /// This replica's estimate of the leaf's instance count.
    pub n_estimate: f64,
}
