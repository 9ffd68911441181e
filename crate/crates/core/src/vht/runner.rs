use super::events::VhtEvent;
use super::model::{ModelAggregator, SplitTrace};
use super::stats::LocalStatistics;
use super::topology::{build_vht_topology, VhtTopology};
use super::{VhtConfig, VhtError};
use crate::engine::{
    LocalEngine, RunOutcome, RunReport, SimConfig, SimEngine, SourceInput, ThreadedConfig, ThreadedEngine,
};
use crate::eval::MetricsRow;
use crate::instance::{ClassIdx, Instance, Schema};
use crate::learner::Learner;
use crate::tree::Tree;
use crate::Error;
use std::sync::Arc;

/// A configured VHT deployment that can be driven by any of the engines.
#[derive(Clone, Debug)]
pub struct VhtRun {
    config: VhtConfig,
    schema: Arc<Schema>,
}

/// Final processor states and measurements of one run.
pub struct VhtOutcome {
    pub models: Vec<ModelAggregator>,
    pub stats: Vec<LocalStatistics>,
    pub report: RunReport,
    /// Prequential rows, merged over model replicas.
    pub rows: Vec<MetricsRow>,
}

impl VhtOutcome {
    /// The primary model's tree.
    pub fn tree(&self) -> &Tree {
        self.models[0].tree()
    }

    /// Statistics cells held across all replicas.
    pub fn cell_count(&self) -> usize {
        self.stats.iter().map(LocalStatistics::cell_count).sum()
    }

    /// Final cumulative accuracy over all model replicas, in percent.
    pub fn accuracy(&self) -> f64 {
        let seen: u64 = self.models.iter().map(|m| m.meter().seen()).sum();
        let correct: u64 = self.models.iter().map(|m| m.meter().correct()).sum();
        if seen == 0 {
            0.0
        } else {
            100.0 * correct as f64 / seen as f64
        }
    }

    /// Instances scored by the models.
    pub fn scored(&self) -> u64 {
        self.models.iter().map(|m| m.meter().seen()).sum()
    }

    pub fn traces(&self) -> &[SplitTrace] {
        self.models[0].traces()
    }
}

impl VhtRun {
    pub fn new(config: VhtConfig, schema: Arc<Schema>) -> Result<Self, VhtError> {
        config.validate()?;
        Ok(Self { config, schema })
    }

    pub fn config(&self) -> &VhtConfig {
        &self.config
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    fn topology(&self, config: &VhtConfig) -> Result<VhtTopology, VhtError> {
        build_vht_topology(config, Arc::clone(&self.schema))
    }

    /// Synchronous local mode: each instance and all the events it causes
    /// are processed before the next one enters, so split results arrive
    /// with no delay and the timeout never fires.
    pub fn run_local<I>(&self, stream: I) -> Result<VhtOutcome, VhtError>
    where
        I: IntoIterator<Item = Instance>,
    {
        let mut config = self.config.clone();
        config.timeout = u64::MAX;
        let top = self.topology(&config)?;
        let (source, model, stats) = (top.source, top.model, top.stats);
        let mut engine = LocalEngine::new(top.topology);
        for instance in stream {
            engine.push(source, VhtEvent::Instance(instance))?;
        }
        Ok(collect(engine.into_outcome(), model, stats))
    }

    /// Seeded random interleaving; see [`SimEngine`].
    pub fn run_sim<I>(&self, stream: I, sim: SimConfig) -> Result<VhtOutcome, VhtError>
    where
        I: IntoIterator<Item = Instance>,
        I::IntoIter: Send + 'static,
    {
        let top = self.topology(&self.config)?;
        let input: SourceInput<VhtEvent> = Box::new(stream.into_iter().map(VhtEvent::Instance));
        let outcome = SimEngine::new(top.topology, sim).run_to_end(vec![(top.source, input)])?;
        Ok(collect(outcome, top.model, top.stats))
    }

    /// One thread per replica; the timeout counts units of
    /// [`ThreadedConfig::time_unit`].
    pub fn run_threaded<I>(&self, stream: I, threaded: ThreadedConfig) -> Result<VhtOutcome, VhtError>
    where
        I: IntoIterator<Item = Instance>,
        I::IntoIter: Send + 'static,
    {
        let top = self.topology(&self.config)?;
        let input: SourceInput<VhtEvent> = Box::new(stream.into_iter().map(VhtEvent::Instance));
        let outcome = ThreadedEngine::run(top.topology, vec![(top.source, input)], threaded)?;
        Ok(collect(outcome, top.model, top.stats))
    }
}

fn collect(mut outcome: RunOutcome<VhtEvent>, model: usize, stats: usize) -> VhtOutcome {
    let mut models: Vec<ModelAggregator> = outcome.processors.take_all(model);
    for m in &mut models {
        let (splits, leaves) = (m.tree().num_splits() as u64, m.tree().num_leaves() as u64);
        m.meter_mut().finish(splits, leaves);
    }
    let rows = merge_rows(&models);
    VhtOutcome {
        stats: outcome.processors.take_all(stats),
        models,
        report: outcome.report,
        rows,
    }
}

/// Row `j` of the merged series pools row `j` of every replica (or its last
/// row, if it has fewer). Tree sizes come from the primary.
fn merge_rows(models: &[ModelAggregator]) -> Vec<MetricsRow> {
    if models.len() == 1 {
        return models[0].meter().rows().to_vec();
    }
    let len = models.iter().map(|m| m.meter().rows().len()).max().unwrap_or(0);
    let mut out = Vec::with_capacity(len);
    for j in 0..len {
        let picked: Vec<&MetricsRow> = models
            .iter()
            .filter_map(|m| {
                let rows = m.meter().rows();
                rows.get(j).or(rows.last())
            })
            .collect();
        let instances: u64 = picked.iter().map(|r| r.instances).sum();
        let weighted = |f: fn(&MetricsRow) -> f64| {
            if instances == 0 {
                0.0
            } else {
                picked.iter().map(|r| f(r) * r.instances as f64).sum::<f64>() / instances as f64
            }
        };
        let seconds = picked.iter().map(|r| r.seconds).fold(0.0, f64::max);
        let primary = models[0].meter().rows();
        let shape = primary.get(j).or(primary.last()).expect("primary has rows");
        out.push(MetricsRow {
            instances,
            accuracy_cum: weighted(|r| r.accuracy_cum),
            accuracy_window: weighted(|r| r.accuracy_window),
            seconds,
            throughput: if seconds > 0.0 { instances as f64 / seconds } else { 0.0 },
            splits: shape.splits,
            leaves: shape.leaves,
        });
    }
    out
}

/// VHT in synchronous local mode behind the [`Learner`] interface, for
/// step-by-step driving and test-then-train evaluation from outside.
pub struct LocalVht {
    engine: LocalEngine<VhtEvent>,
    source: usize,
    model: usize,
    stats: usize,
}

impl LocalVht {
    pub fn new(config: &VhtConfig, schema: Arc<Schema>) -> Result<Self, VhtError> {
        let mut config = config.clone();
        config.timeout = u64::MAX;
        let top = build_vht_topology(&config, schema)?;
        Ok(Self {
            engine: LocalEngine::new(top.topology),
            source: top.source,
            model: top.model,
            stats: top.stats,
        })
    }

    pub fn model(&self) -> &ModelAggregator {
        self.engine.processor(self.model, 0).expect("model replica 0 exists")
    }

    pub fn statistics(&self) -> Vec<&LocalStatistics> {
        let p = self.engine.topology().parallelism(self.stats);
        (0..p).filter_map(|r| self.engine.processor(self.stats, r)).collect()
    }

    pub fn cell_count(&self) -> usize {
        self.statistics().iter().map(|s| s.cell_count()).sum()
    }

    pub fn tree(&self) -> &Tree {
        self.model().tree()
    }

    pub fn into_outcome(self) -> VhtOutcome {
        collect(self.engine.into_outcome(), self.model, self.stats)
    }
}

impl Learner for LocalVht {
    fn predict(&self, instance: &Instance) -> ClassIdx {
        self.model().predict(instance)
    }

    fn train(&mut self, instance: &Instance) -> Result<(), Error> {
        self.engine
            .push(self.source, VhtEvent::Instance(instance.clone()))
            .map_err(VhtError::from)?;
        Ok(())
    }

    fn splits(&self) -> u64 {
        self.tree().num_splits() as u64
    }

    fn leaves(&self) -> u64 {
        self.tree().num_leaves() as u64
    }
}
