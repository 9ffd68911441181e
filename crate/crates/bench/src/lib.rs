//! Fixtures shared by the benchmarks.

use std::sync::Arc;
use vht_core::datagen::{DenseGenConfig, DenseGenerator};
use vht_core::{Instance, Schema};

/// `n` instances of a dense stream with `categorical` + `numerical`
/// attributes, materialized so that generation stays out of the timings.
pub fn dense(categorical: usize, numerical: usize, n: u64, seed: u64) -> (Arc<Schema>, Vec<Instance>) {
    let g = DenseGenerator::new(DenseGenConfig::new(categorical, numerical, seed)).expect("valid generator config");
    (Arc::clone(g.schema()), g.stream(n).collect())
}
