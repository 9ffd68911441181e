use super::topology::Outlet;
use super::{
    panic_message, Context, EngineError, Envelope, Processor, ProcessorId, ProcessorSet, RunOutcome, RunReport,
    SourceInput, StreamId, Topology,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

/// Extra delivery delay, in steps, for events on one stream: `base` plus a
/// uniform draw from `0..=jitter`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StreamDelay {
    pub base: u64,
    pub jitter: u64,
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub seed: u64,
    pub delays: Vec<(StreamId, StreamDelay)>,
    /// Steps between `on_tick` rounds.
    pub tick_every: u64,
    /// Hard cap on steps, as a guard against processors that never go quiet.
    pub max_steps: u64,
    /// Sources are only polled while fewer events than this are in flight,
    /// standing in for queue backpressure.
    pub max_in_flight: usize,
}

impl SimConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            delays: Vec::new(),
            tick_every: 1,
            max_steps: u64::MAX,
            max_in_flight: super::DEFAULT_QUEUE_CAPACITY,
        }
    }

    pub fn delay(mut self, stream: StreamId, base: u64, jitter: u64) -> Self {
        self.delays.push((stream, StreamDelay { base, jitter }));
        self
    }
}

type Edge = (ProcessorId, ProcessorId);

/// Single-threaded executor that picks a random deliverable event at each
/// step. Each (source replica, destination replica) edge stays FIFO, but
/// edges and sources interleave arbitrarily, and per-stream delays let
/// tests hold back chosen message types.
pub struct SimEngine<E> {
    topology: Topology<E>,
    config: SimConfig,
    rng: ChaCha8Rng,
    replicas: Vec<Vec<Box<dyn Processor<E>>>>,
    outlets: Vec<Vec<Outlet>>,
    edges: BTreeMap<Edge, VecDeque<(u64, Envelope<E>)>>,
    pending: usize,
    processed: Vec<Vec<u64>>,
    sourced: u64,
    now: u64,
    ctx: Context<E>,
    spare: Vec<(StreamId, E)>,
}

impl<E: Clone + Send + 'static> SimEngine<E> {
    pub fn new(topology: Topology<E>, config: SimConfig) -> Self {
        let replicas = topology.instantiate();
        let outlets = topology
            .processors()
            .iter()
            .map(|d| (0..d.parallelism).map(|_| Outlet::new(&topology)).collect())
            .collect();
        let processed = topology.processors().iter().map(|d| vec![0; d.parallelism]).collect();
        Self {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            topology,
            config,
            replicas,
            outlets,
            edges: BTreeMap::new(),
            pending: 0,
            processed,
            sourced: 0,
            now: 0,
            ctx: Context::new(ProcessorId { id: 0, replica: 0 }, 0),
            spare: Vec::new(),
        }
    }

    fn delay_for(&mut self, stream: StreamId) -> u64 {
        let d = self
            .config
            .delays
            .iter()
            .find(|(s, _)| *s == stream)
            .map(|&(_, d)| d)
            .unwrap_or_default();
        d.base + if d.jitter > 0 { self.rng.random_range(0..=d.jitter) } else { 0 }
    }

    fn route(&mut self, from: ProcessorId, stream: StreamId, event: E) {
        let mut deliveries = Vec::new();
        self.outlets[from.id][from.replica].dispatch(&self.topology, from, stream, event, |_, dest, env| {
            deliveries.push((dest, env))
        });
        for (dest, env) in deliveries {
            let ready = self.now + 1 + self.delay_for(stream);
            let q = self.edges.entry((from, dest)).or_default();
            let ready = q.back().map_or(ready, |&(last, _)| ready.max(last));
            q.push_back((ready, env));
            self.pending += 1;
        }
    }

    fn flush(&mut self, from: ProcessorId) {
        let mut out = std::mem::take(&mut self.spare);
        self.ctx.swap_outbox(&mut out);
        for (stream, event) in out.drain(..) {
            self.route(from, stream, event);
        }
        self.spare = out;
    }

    fn guard(&self, at: ProcessorId, r: std::thread::Result<()>) -> Result<(), EngineError> {
        r.map_err(|e| EngineError::ProcessorPanic {
            processor: self.topology.name(at.id).to_string(),
            replica: at.replica,
            message: panic_message(e.as_ref()),
        })
    }

    fn tick_all(&mut self) -> Result<(), EngineError> {
        for id in 0..self.replicas.len() {
            for replica in 0..self.replicas[id].len() {
                let me = ProcessorId { id, replica };
                self.ctx.reset(me, self.now);
                let p = &mut self.replicas[id][replica];
                let ctx = &mut self.ctx;
                let r = catch_unwind(AssertUnwindSafe(|| p.on_tick(ctx)));
                self.guard(me, r)?;
                self.flush(me);
            }
        }
        Ok(())
    }

    fn deliver(&mut self, edge: Edge) -> Result<(), EngineError> {
        let (_, env) = self.edges.get_mut(&edge).and_then(VecDeque::pop_front).expect("edge is ready");
        self.pending -= 1;
        let dest = edge.1;
        self.ctx.reset(dest, self.now);
        let p = &mut self.replicas[dest.id][dest.replica];
        let ctx = &mut self.ctx;
        let r = catch_unwind(AssertUnwindSafe(|| p.process(env, ctx)));
        self.guard(dest, r)?;
        self.processed[dest.id][dest.replica] += 1;
        self.flush(dest);
        Ok(())
    }

    fn advance(&mut self) -> Result<(), EngineError> {
        self.now += 1;
        if self.now % self.config.tick_every.max(1) == 0 {
            self.tick_all()?;
        }
        Ok(())
    }

    /// Runs until every input is exhausted and no event is in flight.
    pub fn run_to_end(mut self, sources: Vec<(usize, SourceInput<E>)>) -> Result<RunOutcome<E>, EngineError> {
        for s in self.topology.sources() {
            if !sources.iter().any(|(id, _)| *id == s) {
                return Err(EngineError::MissingInput(self.topology.name(s).to_string()));
            }
        }
        let started = Instant::now();
        let mut inputs = sources;
        let mut ready: Vec<Edge> = Vec::new();
        let mut steps = 0u64;
        loop {
            steps += 1;
            if steps > self.config.max_steps {
                return Err(EngineError::Deadlock {
                    stalled: started.elapsed(),
                    in_flight: self.pending,
                });
            }
            ready.clear();
            ready.extend(
                self.edges
                    .iter()
                    .filter(|(_, q)| q.front().is_some_and(|&(t, _)| t <= self.now))
                    .map(|(&e, _)| e),
            );
            let feed = !inputs.is_empty() && self.pending < self.config.max_in_flight;
            let choices = ready.len() + usize::from(feed);
            if choices == 0 {
                if self.pending == 0 && inputs.is_empty() {
                    break;
                }
                self.advance()?;
                continue;
            }
            let pick = self.rng.random_range(0..choices);
            if pick < ready.len() {
                self.deliver(ready[pick])?;
            } else {
                let i = self.rng.random_range(0..inputs.len());
                match inputs[i].1.next() {
                    Some(event) => {
                        self.sourced += 1;
                        let from = ProcessorId {
                            id: inputs[i].0,
                            replica: 0,
                        };
                        for stream in self.topology.streams_from(from.id) {
                            self.route(from, stream, event.clone());
                        }
                    }
                    None => {
                        drop(inputs.swap_remove(i));
                        continue;
                    }
                }
            }
            self.advance()?;
        }
        let mut processed = Vec::new();
        for (id, counts) in self.processed.iter().enumerate() {
            for (replica, &c) in counts.iter().enumerate() {
                processed.push((self.topology.name(id).to_string(), replica, c));
            }
        }
        Ok(RunOutcome {
            report: RunReport {
                processed,
                sourced: self.sourced,
                wall: started.elapsed(),
            },
            processors: ProcessorSet::new(self.replicas),
        })
    }
}
