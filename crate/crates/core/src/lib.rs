//! Vertical Hoeffding Tree: a streaming decision-tree learner whose split
//! statistics are partitioned by attribute across parallel workers of an
//! in-process dataflow engine.

pub mod baselines;
pub mod datagen;
pub mod engine;
pub mod eval;
pub mod instance;
pub mod learner;
pub mod tree;
pub mod vht;

pub use instance::{AttributeId, AttributeKind, Attributes, ClassIdx, Instance, LeafId, Schema, SchemaViolation};
pub use learner::Learner;
pub use tree::{HoeffdingParams, HoeffdingTree, SplitCriterion, Tree, TreeError};
pub use vht::{Variant, VhtConfig, VhtError};

/// Any error raised by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Engine(#[from] engine::EngineError),
    #[error(transparent)]
    Vht(#[from] VhtError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
    #[error(transparent)]
    Datagen(#[from] datagen::DatagenError),
}
