use super::zipf::Zipf;
use super::{instance_rng, structure_rng, DatagenError};
use crate::instance::{AttributeId, AttributeKind, Instance, Schema};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq)]
pub struct SparseGenConfig {
    /// Vocabulary size `d`.
    pub vocabulary: usize,
    pub skew: f64,
    pub mean_words: f64,
    pub sd_words: f64,
    pub seed: u64,
}

impl Default for SparseGenConfig {
    fn default() -> Self {
        Self {
            vocabulary: 1000,
            skew: 1.5,
            mean_words: 15.0,
            sd_words: 5.0,
            seed: 1,
        }
    }
}

impl SparseGenConfig {
    pub fn new(vocabulary: usize, seed: u64) -> Self {
        Self {
            vocabulary,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), DatagenError> {
        if self.vocabulary == 0 || self.vocabulary > u32::MAX as usize {
            return Err(DatagenError::Invalid("vocabulary size must be in [1, 2^32)"));
        }
        if !(self.mean_words >= 1.0) || !(self.sd_words >= 0.0) || !self.sd_words.is_finite() {
            return Err(DatagenError::Invalid("tweet size needs mean >= 1 and finite sd >= 0"));
        }
        Ok(())
    }

    /// One binary attribute per word; two classes.
    pub fn schema(&self) -> Schema {
        Schema::new(vec![AttributeKind::Categorical { values: 2 }; self.vocabulary], 2)
    }
}

/// Bag-of-words "tweets". The class is drawn uniformly; class 0 draws words
/// by Zipf rank directly, class 1 through a seeded permutation of the
/// ranks. Each tweet holds distinct words with value 1.
#[derive(Clone, Debug)]
pub struct SparseGenerator {
    config: SparseGenConfig,
    schema: Arc<Schema>,
    zipf: Zipf,
    size: Normal<f64>,
    permutation: Vec<AttributeId>,
}

impl SparseGenerator {
    pub fn new(config: SparseGenConfig) -> Result<Self, DatagenError> {
        config.validate()?;
        let zipf = Zipf::new(config.skew, config.vocabulary)?;
        let size = Normal::new(config.mean_words, config.sd_words)
            .map_err(|_| DatagenError::Invalid("tweet size distribution is degenerate"))?;
        let mut permutation: Vec<AttributeId> = (0..config.vocabulary as AttributeId).collect();
        permutation.shuffle(&mut structure_rng(config.seed));
        Ok(Self {
            schema: Arc::new(config.schema()),
            config,
            zipf,
            size,
            permutation,
        })
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn config(&self) -> &SparseGenConfig {
        &self.config
    }

    /// Word id of Zipf rank `rank` under `class`.
    pub fn word(&self, class: u32, rank: usize) -> AttributeId {
        if class == 0 {
            rank as AttributeId
        } else {
            self.permutation[rank]
        }
    }

    pub fn instance(&self, index: u64) -> Instance {
        let mut rng = instance_rng(self.config.seed, index);
        let class = rng.random_range(0..2u32);
        let d = self.config.vocabulary;
        let size = (self.size.sample(&mut rng).round().max(1.0) as usize).min(d);
        let mut words: Vec<AttributeId> = Vec::with_capacity(size);
        // Rejection of repeats; the cap only matters for tiny vocabularies
        // with heavy skew.
        let mut tries = 0;
        while words.len() < size && tries < 1000 * size {
            tries += 1;
            let w = self.word(class, self.zipf.sample(&mut rng));
            if !words.contains(&w) {
                words.push(w);
            }
        }
        words.sort_unstable();
        Instance::sparse(words.into_iter().map(|w| (w, 1.0)).collect(), Some(class))
    }

    pub fn stream(&self, n: u64) -> SparseStream {
        SparseStream {
            generator: Arc::new(self.clone()),
            next: 0,
            end: n,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SparseStream {
    generator: Arc<SparseGenerator>,
    next: u64,
    end: u64,
}

impl Iterator for SparseStream {
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

impl ExactSizeIterator for SparseStream {}

pub fn gen_sparse(config: SparseGenConfig, n: u64) -> Result<SparseStream, DatagenError> {
    Ok(SparseGenerator::new(config)?.stream(n))
}
