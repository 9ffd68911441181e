use super::events::{LocalResult, VhtEvent};
use super::topology::RESULTS;
use crate::engine::{Context, Envelope, Processor};
use crate::instance::{LeafId, Schema};
use crate::tree::{top_two, CandidateParams, LeafStats};
use rustc_hash::{FxHashMap, FxHashSet};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StatsCounters {
    pub attributes: u64,
    pub computes: u64,
    pub drops: u64,
    /// Cells created for a leaf that had already been dropped.
    pub recreated_after_drop: u64,
}

/// One local-statistics replica: the slice of the (leaf, attribute) table
/// whose keys route here.
pub struct LocalStatistics {
    replica: usize,
    schema: Arc<Schema>,
    cparams: CandidateParams,
    table: FxHashMap<LeafId, LeafStats>,
    dropped: FxHashSet<LeafId>,
    counters: StatsCounters,
}

impl LocalStatistics {
    pub fn new(replica: usize, schema: Arc<Schema>, cparams: CandidateParams) -> Self {
        Self {
            replica,
            schema,
            cparams,
            table: FxHashMap::default(),
            dropped: FxHashSet::default(),
            counters: StatsCounters::default(),
        }
    }

    pub fn replica(&self) -> usize {
        self.replica
    }

    pub fn counters(&self) -> StatsCounters {
        self.counters
    }

    /// Number of (leaf, attribute) cells held.
    pub fn cell_count(&self) -> usize {
        self.table.values().map(LeafStats::len).sum()
    }

    pub fn leaf(&self, leaf: LeafId) -> Option<&LeafStats> {
        self.table.get(&leaf)
    }

    pub fn leaves(&self) -> impl Iterator<Item = LeafId> + '_ {
        self.table.keys().copied()
    }

    /// Local top two candidates of `leaf` and this replica's estimate of
    /// its instance count.
    pub fn compute(&self, leaf: LeafId, attempt: u64, basis: &[f64]) -> LocalResult {
        let (best, second, n_estimate) = match self.table.get(&leaf) {
            Some(stats) => {
                let (b, s) = top_two(stats.candidates(&self.cparams, basis));
                (b, s, stats.max_weight())
            }
            None => {
                let (b, s) = top_two(std::iter::empty());
                (b, s, 0.0)
            }
        };
        LocalResult {
            leaf,
            attempt,
            replica: self.replica,
            best,
            second,
            n_estimate,
        }
    }
}

impl Processor<VhtEvent> for LocalStatistics {
    fn process(&mut self, envelope: Envelope<VhtEvent>, ctx: &mut Context<VhtEvent>) {
        match envelope.payload {
            VhtEvent::Attribute(a) => {
                self.counters.attributes += 1;
                let kind = self.schema.kind(a.attribute);
                let stats = match self.table.get_mut(&a.leaf) {
                    Some(s) => s,
                    None => {
                        if self.dropped.contains(&a.leaf) {
                            self.counters.recreated_after_drop += 1;
                        }
                        self.table.entry(a.leaf).or_default()
                    }
                };
                if a.sparse {
                    stats.mark_sparse();
                }
                stats.update(a.attribute, kind, self.cparams.num_classes, a.value, a.class, a.weight);
            }
            VhtEvent::Compute(c) => {
                self.counters.computes += 1;
                let result = self.compute(c.leaf, c.attempt, &c.basis);
                ctx.emit(RESULTS, VhtEvent::LocalResult(Box::new(result)));
            }
            VhtEvent::Drop(leaf) => {
                self.counters.drops += 1;
                self.table.remove(&leaf);
                self.dropped.insert(leaf);
            }
            VhtEvent::Instance(_) | VhtEvent::LocalResult(_) => {
                log::warn!("statistics replica {} ignored an unexpected event", self.replica);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{ProcessorId, StreamId};
    use crate::instance::AttributeKind;
    use crate::tree::HoeffdingParams;
    use crate::vht::{AttributeEvent, ComputeEvent, ATTRIBUTES, CONTROL};

    fn replica(m: usize) -> LocalStatistics {
        let schema = Arc::new(Schema::new(vec![AttributeKind::Categorical { values: 2 }; m], 2));
        let cparams = HoeffdingParams::default().candidate_params(2);
        LocalStatistics::new(0, schema, cparams)
    }

    fn send(s: &mut LocalStatistics, stream: StreamId, payload: VhtEvent) -> Vec<(StreamId, VhtEvent)> {
        let mut ctx = Context::new(ProcessorId { id: 2, replica: 0 }, 0);
        let env = Envelope {
            source: ProcessorId { id: 1, replica: 0 },
            stream,
            seq: 0,
            payload,
        };
        s.process(env, &mut ctx);
        ctx.take().collect()
    }

    fn attr(leaf: u64, attribute: u32, value: f64, class: u32) -> VhtEvent {
        VhtEvent::Attribute(AttributeEvent {
            leaf: LeafId(leaf),
            attribute,
            value,
            class,
            weight: 1.0,
            sparse: false,
        })
    }

    fn compute(s: &mut LocalStatistics, leaf: u64, basis: &[f64]) -> LocalResult {
        let out = send(
            s,
            CONTROL,
            VhtEvent::Compute(ComputeEvent {
                leaf: LeafId(leaf),
                attempt: 3,
                basis: basis.into(),
            }),
        );
        let [(stream, VhtEvent::LocalResult(r))] = <[_; 1]>::try_from(out).ok().expect("one result") else {
            panic!("expected a local result");
        };
        assert_eq!(stream, RESULTS);
        *r
    }

    #[test]
    fn cells_are_created_lazily_and_accumulate() {
        let mut s = replica(2);
        assert_eq!(s.cell_count(), 0);
        send(&mut s, ATTRIBUTES, attr(0, 1, 1.0, 0));
        assert_eq!(s.cell_count(), 1);
        for _ in 0..99 {
            send(&mut s, ATTRIBUTES, attr(0, 1, 1.0, 0));
        }
        let stats = s.leaf(LeafId(0)).unwrap().get(1).unwrap();
        assert_eq!(stats.total_weight(), 100.0);
        assert_eq!(stats.class_totals(), vec![100.0, 0.0]);
    }

    #[test]
    fn perfect_attribute_beats_useless_one_which_ties_with_no_split() {
        let mut s = replica(2);
        for i in 0..100 {
            let c = i % 2;
            send(&mut s, ATTRIBUTES, attr(0, 0, c as f64, c));
            send(&mut s, ATTRIBUTES, attr(0, 1, 1.0, c));
        }
        let r = compute(&mut s, 0, &[50.0, 50.0]);
        assert_eq!(r.best.attribute(), Some(0));
        assert!(r.second.is_no_split());
        assert_eq!(r.n_estimate, 100.0);
        assert_eq!(r.attempt, 3);
    }

    #[test]
    fn unknown_leaf_answers_no_split() {
        let mut s = replica(2);
        let r = compute(&mut s, 42, &[0.0, 0.0]);
        assert!(r.best.is_no_split() && r.second.is_no_split());
        assert_eq!(r.n_estimate, 0.0);
    }

    #[test]
    fn drop_releases_cells_and_is_idempotent() {
        let mut s = replica(5);
        for a in 0..5 {
            send(&mut s, ATTRIBUTES, attr(7, a, 1.0, 0));
        }
        send(&mut s, ATTRIBUTES, attr(8, 0, 1.0, 0));
        assert_eq!(s.cell_count(), 6);
        send(&mut s, CONTROL, VhtEvent::Drop(LeafId(7)));
        assert_eq!(s.cell_count(), 1);
        assert!(s.leaf(LeafId(7)).is_none());
        send(&mut s, CONTROL, VhtEvent::Drop(LeafId(7)));
        send(&mut s, CONTROL, VhtEvent::Drop(LeafId(99)));
        assert_eq!(s.cell_count(), 1);
        // A straggler for the dropped leaf re-creates its cell.
        send(&mut s, ATTRIBUTES, attr(7, 2, 1.0, 0));
        assert_eq!(s.counters().recreated_after_drop, 1);
        assert_eq!(s.cell_count(), 2);
    }
}
