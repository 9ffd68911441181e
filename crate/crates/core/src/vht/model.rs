use super::buffer::InstanceBuffer;
use super::events::{AttributeEvent, ComputeEvent, LocalResult, VhtEvent};
use super::topology::{ATTRIBUTES, CONTROL};
use super::{Variant, VhtConfig};
use crate::engine::{Context, Envelope, Processor};
use crate::eval::PrequentialMeter;
use crate::instance::{ClassIdx, Instance, LeafId, Schema};
use crate::tree::split::decide;
use crate::tree::{top_two, CandidateParams, HoeffdingParams, SplitCandidate, SplitDecision, Tree};
use rustc_hash::FxHashMap;
use std::path::PathBuf;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitOutcome {
    Split,
    NoSplit,
}

/// What happened during one split attempt.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitTrace {
    pub leaf: LeafId,
    pub attempt: u64,
    pub issued_at: u64,
    pub resolved_at: u64,
    /// Training instances that reached the leaf while the attempt was open.
    pub arrivals_during: u64,
    pub buffered: usize,
    /// Buffered instances trained into the new leaves.
    pub replayed: usize,
    pub responses: usize,
    pub timed_out: bool,
    pub outcome: SplitOutcome,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ModelCounters {
    /// Instance events received.
    pub instances: u64,
    /// Unlabeled instances answered with a prediction only.
    pub predictions: u64,
    /// Instances whose attributes were sent to the statistics, replays
    /// included.
    pub trained: u64,
    pub attribute_events: u64,
    pub computes: u64,
    pub drops: u64,
    pub stale_results: u64,
    pub timeouts: u64,
    /// Instances thrown away because their leaf was splitting.
    pub discarded: u64,
    pub replayed: u64,
}

struct Attempt {
    attempt: u64,
    issued_at: u64,
    deadline: Option<u64>,
    /// The model's own `n_l` when the attempt was issued.
    n_model: f64,
    responded: Vec<bool>,
    received: usize,
    best: SplitCandidate,
    second: SplitCandidate,
    /// Running max of the replicas' estimates (`n_l''`).
    n_max: f64,
    arrivals: u64,
    buffer: Option<InstanceBuffer>,
}

/// The model aggregator: owns the tree, turns instances into attribute
/// events, and runs the split protocol with the statistics replicas.
pub struct ModelAggregator {
    replica: usize,
    replicas: usize,
    parallelism: usize,
    params: HoeffdingParams,
    cparams: CandidateParams,
    variant: Variant,
    timeout: u64,
    spill_dir: Option<PathBuf>,
    tree: Tree,
    attempts: FxHashMap<LeafId, Attempt>,
    next_attempt: u64,
    meter: PrequentialMeter,
    traces: Vec<SplitTrace>,
    decisions: Vec<SplitDecision>,
    counters: ModelCounters,
}

impl ModelAggregator {
    pub fn new(replica: usize, config: &VhtConfig, schema: Arc<Schema>) -> Self {
        let q = config.model_replicas.max(1);
        let cparams = config.params.candidate_params(schema.num_classes);
        Self {
            replica,
            replicas: q,
            parallelism: config.parallelism,
            params: config.params,
            cparams,
            variant: config.variant,
            timeout: config.timeout,
            spill_dir: config.spill_dir.clone(),
            tree: Tree::new(schema),
            attempts: FxHashMap::default(),
            next_attempt: 0,
            meter: PrequentialMeter::new(config.report_every.div_ceil(q as u64)),
            traces: Vec::new(),
            decisions: Vec::new(),
            counters: ModelCounters::default(),
        }
    }

    fn is_primary(&self) -> bool {
        self.replica == 0
    }

    pub fn replica(&self) -> usize {
        self.replica
    }

    pub fn tree(&self) -> &Tree {
        &self.tree
    }

    pub fn predict(&self, instance: &Instance) -> ClassIdx {
        self.tree.predict(instance)
    }

    pub fn counters(&self) -> ModelCounters {
        self.counters
    }

    pub fn traces(&self) -> &[SplitTrace] {
        &self.traces
    }

    pub fn decisions(&self) -> &[SplitDecision] {
        &self.decisions
    }

    pub fn meter(&self) -> &PrequentialMeter {
        &self.meter
    }

    pub(crate) fn meter_mut(&mut self) -> &mut PrequentialMeter {
        &mut self.meter
    }

    /// Split attempts still waiting for responses.
    pub fn active_attempts(&self) -> usize {
        self.attempts.len()
    }

    pub fn is_splitting(&self, leaf: LeafId) -> bool {
        self.attempts.contains_key(&leaf)
    }

    fn on_instance(&mut self, instance: Instance, ctx: &mut Context<VhtEvent>) {
        self.counters.instances += 1;
        let Some(label) = instance.label else {
            self.tree.predict(&instance);
            self.counters.predictions += 1;
            return;
        };
        if self.meter.seen() == 0 {
            self.meter.restart_clock();
        }
        let correct = self.tree.predict(&instance) == label;
        if self.meter.record(correct) {
            self.meter.push_row(self.tree.num_splits() as u64, self.tree.num_leaves() as u64);
        }
        self.train(instance, ctx);
    }

    fn train(&mut self, instance: Instance, ctx: &mut Context<VhtEvent>) {
        let Some(class) = instance.label else { return };
        if !(instance.weight > 0.0) {
            return;
        }
        let leaf = self.tree.sort(&instance);
        let primary = self.is_primary();
        let variant = self.variant;
        if let Some(attempt) = self.attempts.get_mut(&leaf) {
            attempt.arrivals += 1;
            if primary {
                match variant {
                    Variant::Vanilla => {
                        self.counters.discarded += 1;
                        return;
                    }
                    Variant::Wok => {}
                    Variant::Wk(_) => {
                        if let Some(buffer) = attempt.buffer.as_mut() {
                            if let Err(e) = buffer.offer(&instance) {
                                log::error!("model {}: buffering for leaf {leaf} failed: {e}", self.replica);
                            }
                        }
                    }
                }
            }
        }
        self.tree.record(leaf, class, instance.weight).expect("sorted leaf exists");
        self.counters.trained += 1;
        let sparse = instance.is_sparse();
        for (attribute, value) in instance.present() {
            ctx.emit(
                ATTRIBUTES,
                VhtEvent::Attribute(AttributeEvent {
                    leaf,
                    attribute,
                    value,
                    class,
                    weight: instance.weight,
                    sparse,
                }),
            );
            self.counters.attribute_events += 1;
        }
        if primary && !self.attempts.contains_key(&leaf) {
            self.check_grace(leaf, ctx);
        }
    }

    fn check_grace(&mut self, leaf: LeafId, ctx: &mut Context<VhtEvent>) {
        let grace = self.params.grace_period / self.replicas as f64;
        let node = self.tree.leaf_mut(leaf).expect("leaf exists");
        if node.weight - node.weight_at_last_check < grace {
            return;
        }
        node.weight_at_last_check = node.weight;
        if node.is_pure() {
            return;
        }
        let scale = self.replicas as f64;
        let basis: Arc<[f64]> = node.observed.iter().map(|&c| c * scale).collect();
        let n_model = node.weight;
        let attempt = self.next_attempt;
        self.next_attempt += 1;
        let buffer = match self.variant {
            Variant::Wk(z) => Some(self.new_buffer(z, leaf, attempt)),
            _ => None,
        };
        let deadline = (self.replicas == 1).then(|| ctx.now().saturating_add(self.timeout));
        self.attempts.insert(leaf, self.open_attempt(attempt, ctx.now(), deadline, n_model, buffer));
        self.counters.computes += 1;
        ctx.emit(CONTROL, VhtEvent::Compute(ComputeEvent { leaf, attempt, basis }));
    }

    fn open_attempt(
        &self,
        attempt: u64,
        now: u64,
        deadline: Option<u64>,
        n_model: f64,
        buffer: Option<InstanceBuffer>,
    ) -> Attempt {
        let (best, second) = top_two(std::iter::empty());
        Attempt {
            attempt,
            issued_at: now,
            deadline,
            n_model,
            responded: vec![false; self.parallelism],
            received: 0,
            best,
            second,
            n_max: 0.0,
            arrivals: 0,
            buffer,
        }
    }

    fn new_buffer(&self, z: usize, leaf: LeafId, attempt: u64) -> InstanceBuffer {
        if let Some(dir) = &self.spill_dir {
            let name = format!("vht-buffer-{}-{}-{leaf}-{attempt}.bin", std::process::id(), self.replica);
            match InstanceBuffer::on_disk(z, dir, &name) {
                Ok(b) => return b,
                Err(e) => log::error!("cannot spill to {}: {e}; buffering in memory", dir.display()),
            }
        }
        InstanceBuffer::in_memory(z)
    }

    fn on_result(&mut self, result: LocalResult, ctx: &mut Context<VhtEvent>) {
        let current = self.attempts.get(&result.leaf).map(|a| a.attempt);
        match current {
            Some(a) if a == result.attempt => {}
            None if !self.is_primary() && self.tree.contains_leaf(result.leaf) => {
                // Replicas learn of attempts from the broadcast results.
                let attempt = self.open_attempt(result.attempt, ctx.now(), None, 0.0, None);
                self.attempts.insert(result.leaf, attempt);
            }
            _ => {
                self.counters.stale_results += 1;
                log::debug!(
                    "model {}: ignoring result for leaf {} attempt {} from replica {}",
                    self.replica,
                    result.leaf,
                    result.attempt,
                    result.replica
                );
                return;
            }
        }
        let attempt = self.attempts.get_mut(&result.leaf).expect("attempt is open");
        let Some(slot) = attempt.responded.get_mut(result.replica) else {
            log::warn!("model {}: result from unknown replica {}", self.replica, result.replica);
            return;
        };
        if *slot {
            log::warn!("model {}: duplicate result from replica {}", self.replica, result.replica);
            return;
        }
        *slot = true;
        attempt.received += 1;
        let merged = [
            std::mem::replace(&mut attempt.best, SplitCandidate::no_split()),
            std::mem::replace(&mut attempt.second, SplitCandidate::no_split()),
            result.best,
            result.second,
        ];
        (attempt.best, attempt.second) = top_two(merged);
        attempt.n_max = attempt.n_max.max(result.n_estimate);
        if attempt.received == self.parallelism {
            self.resolve(result.leaf, false, ctx);
        }
    }

    fn resolve(&mut self, leaf: LeafId, timed_out: bool, ctx: &mut Context<VhtEvent>) {
        let attempt = self.attempts.remove(&leaf).expect("attempt is open");
        let n = if self.replicas == 1 { attempt.n_model } else { attempt.n_max };
        let decision = decide(leaf, n, attempt.best, attempt.second, &self.params, &self.cparams);
        let mut outcome = SplitOutcome::NoSplit;
        let buffered = attempt.buffer.as_ref().map_or(0, InstanceBuffer::len);
        let mut replayed = 0;
        if decision.split {
            match self.tree.split_leaf(leaf, &decision.best) {
                Ok(_) => {
                    outcome = SplitOutcome::Split;
                    if self.is_primary() {
                        self.counters.drops += 1;
                        ctx.emit(CONTROL, VhtEvent::Drop(leaf));
                    }
                    if let Some(buffer) = attempt.buffer {
                        match buffer.drain() {
                            Ok(instances) => {
                                replayed = instances.len();
                                self.counters.replayed += replayed as u64;
                                for instance in instances {
                                    self.train(instance, ctx);
                                }
                            }
                            Err(e) => log::error!("model {}: reading buffer for leaf {leaf}: {e}", self.replica),
                        }
                    }
                }
                Err(e) => log::error!("model {}: split of leaf {leaf} failed: {e}", self.replica),
            }
        } else if let Some(buffer) = attempt.buffer {
            if let Err(e) = buffer.discard() {
                log::warn!("model {}: discarding buffer for leaf {leaf}: {e}", self.replica);
            }
        }
        self.traces.push(SplitTrace {
            leaf,
            attempt: attempt.attempt,
            issued_at: attempt.issued_at,
            resolved_at: ctx.now(),
            arrivals_during: attempt.arrivals,
            buffered,
            replayed,
            responses: attempt.received,
            timed_out,
            outcome,
        });
        self.decisions.push(decision);
    }

    fn expire(&mut self, ctx: &mut Context<VhtEvent>) {
        let now = ctx.now();
        let mut due: Vec<(u64, LeafId)> = self
            .attempts
            .iter()
            .filter(|(_, a)| a.deadline.is_some_and(|d| d <= now))
            .map(|(&leaf, a)| (a.attempt, leaf))
            .collect();
        due.sort_unstable();
        for (_, leaf) in due {
            self.counters.timeouts += 1;
            self.resolve(leaf, true, ctx);
        }
    }
}

impl Processor<VhtEvent> for ModelAggregator {
    fn process(&mut self, envelope: Envelope<VhtEvent>, ctx: &mut Context<VhtEvent>) {
        match envelope.payload {
            VhtEvent::Instance(instance) => self.on_instance(instance, ctx),
            VhtEvent::LocalResult(result) => self.on_result(*result, ctx),
            VhtEvent::Attribute(_) | VhtEvent::Compute(_) | VhtEvent::Drop(_) => {
                log::warn!("model {} ignored an unexpected event", self.replica);
            }
        }
    }

    fn on_tick(&mut self, ctx: &mut Context<VhtEvent>) {
        if !self.attempts.is_empty() {
            self.expire(ctx);
        }
    }
}
