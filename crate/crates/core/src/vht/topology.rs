use super::events::VhtEvent;
use super::model::ModelAggregator;
use super::stats::LocalStatistics;
use super::{VhtConfig, VhtError};
use crate::engine::{Grouping, KeyBytes, KeyFn, Processor, StreamId, Topology, TopologyBuilder};
use crate::instance::Schema;
use std::sync::Arc;

/// Source to model, shuffle grouped.
pub const INSTANCES: StreamId = StreamId(0);
/// Model to statistics, keyed by (leaf, attribute).
pub const ATTRIBUTES: StreamId = StreamId(1);
/// Model to statistics, broadcast: `Compute` and `Drop`.
pub const CONTROL: StreamId = StreamId(2);
/// Statistics to model: broadcast when models are replicated.
pub const RESULTS: StreamId = StreamId(3);

pub struct VhtTopology {
    pub topology: Topology<VhtEvent>,
    pub source: usize,
    pub model: usize,
    pub stats: usize,
}

fn attribute_key() -> KeyFn<VhtEvent> {
    Arc::new(|e: &VhtEvent| match e {
        VhtEvent::Attribute(a) => KeyBytes::from_slice(&a.key()),
        _ => KeyBytes::new(),
    })
}

/// Source, `q` model replicas and `p` statistics replicas joined by the
/// four VHT streams.
pub fn build_vht_topology(config: &VhtConfig, schema: Arc<Schema>) -> Result<VhtTopology, VhtError> {
    config.validate()?;
    let mut b = TopologyBuilder::new().queue_capacity(config.queue_capacity);
    let source = b.source("source");
    let model_config = config.clone();
    let model_schema = Arc::clone(&schema);
    let model = b.processor("model", config.model_replicas, move |r| {
        Box::new(ModelAggregator::new(r, &model_config, Arc::clone(&model_schema))) as Box<dyn Processor<VhtEvent>>
    });
    let cparams = config.params.candidate_params(schema.num_classes);
    let stats = b.processor("statistics", config.parallelism, move |r| {
        Box::new(LocalStatistics::new(r, Arc::clone(&schema), cparams)) as Box<dyn Processor<VhtEvent>>
    });
    let results_grouping = if config.model_replicas > 1 { Grouping::All } else { Grouping::Shuffle };
    let ids = [
        b.stream(source, model, Grouping::Shuffle, None),
        b.stream(model, stats, Grouping::Key, Some(attribute_key())),
        b.stream(model, stats, Grouping::All, None),
        b.stream(stats, model, results_grouping, None),
    ];
    debug_assert_eq!(ids, [INSTANCES, ATTRIBUTES, CONTROL, RESULTS]);
    Ok(VhtTopology {
        topology: b.build()?,
        source,
        model,
        stats,
    })
}
