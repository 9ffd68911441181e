//! The Vertical Hoeffding Tree: a model aggregator that owns the tree and
//! local-statistics processors that own the split statistics, partitioned
//! by (leaf, attribute) key.

mod buffer;
mod events;
mod model;
mod runner;
mod stats;
mod topology;

pub use buffer::InstanceBuffer;
pub use events::{AttributeEvent, ComputeEvent, LocalResult, VhtEvent};
pub use model::{ModelAggregator, ModelCounters, SplitOutcome, SplitTrace};
pub use runner::{LocalVht, VhtOutcome, VhtRun};
pub use stats::{LocalStatistics, StatsCounters};
pub use topology::{build_vht_topology, VhtTopology, ATTRIBUTES, CONTROL, INSTANCES, RESULTS};

use crate::tree::{HoeffdingParams, TreeError};
use crate::engine::EngineError;
use std::path::PathBuf;

/// What the model does with instances that reach a leaf while a split
/// decision for it is pending.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// Discard them.
    Vanilla,
    /// Keep sending them to the statistics.
    Wok,
    /// Keep sending them, and also buffer up to `z` of them for replay
    /// into the new leaves if the split is taken.
    Wk(usize),
}

#[derive(Clone, Debug)]
pub struct VhtConfig {
    /// Statistics replicas (`p`).
    pub parallelism: usize,
    /// Model replicas (`q`).
    pub model_replicas: usize,
    pub variant: Variant,
    /// Engine-time units a model waits for all local results. Only applies
    /// without model replication.
    pub timeout: u64,
    pub params: HoeffdingParams,
    pub queue_capacity: usize,
    /// When set, wk(z) buffers are written to files in this directory
    /// instead of memory.
    pub spill_dir: Option<PathBuf>,
    /// Interval, in scored instances, between metric rows.
    pub report_every: u64,
}

impl Default for VhtConfig {
    fn default() -> Self {
        Self {
            parallelism: 1,
            model_replicas: 1,
            variant: Variant::Wok,
            timeout: 30,
            params: HoeffdingParams::default(),
            queue_capacity: crate::engine::DEFAULT_QUEUE_CAPACITY,
            spill_dir: None,
            report_every: 100_000,
        }
    }
}

impl VhtConfig {
    pub fn validate(&self) -> Result<(), VhtError> {
        if self.parallelism == 0 {
            return Err(VhtError::InvalidConfig("statistics parallelism must be at least 1"));
        }
        if self.model_replicas == 0 {
            return Err(VhtError::InvalidConfig("model parallelism must be at least 1"));
        }
        if self.timeout == 0 {
            return Err(VhtError::InvalidConfig("timeout must be positive"));
        }
        if self.queue_capacity == 0 {
            return Err(VhtError::InvalidConfig("queue capacity must be at least 1"));
        }
        self.params.validate()?;
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum VhtError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("instance buffer: {0}")]
    Buffer(#[from] std::io::Error),
}
