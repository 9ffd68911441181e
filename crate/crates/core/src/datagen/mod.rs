//! Seeded synthetic streams: dense instances labeled by a hidden random
//! tree, and sparse bag-of-words tweets drawn from a Zipf law.
//!
//! Instance `i` of a stream is a pure function of the configuration (seed
//! included) and `i`: each index gets its own ChaCha stream, and stream 0
//! of the seed is reserved for the generator's fixed structure.

mod dense;
mod sparse;
mod zipf;

pub use dense::{gen_dense, DenseGenConfig, DenseGenerator, DenseStream, HiddenTree};
pub use sparse::{gen_sparse, SparseGenConfig, SparseGenerator, SparseStream};
pub use zipf::{zipf_sample, Zipf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DatagenError {
    #[error("invalid generator configuration: {0}")]
    Invalid(&'static str),
}

fn structure_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn instance_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_add(1));
    rng
}
