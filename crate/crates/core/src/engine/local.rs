use super::topology::Outlet;
use super::{
    panic_message, Context, EngineError, Envelope, Processor, ProcessorId, ProcessorSet, RunOutcome, RunReport,
    SourceInput, StreamId, Topology,
};
use std::any::Any;
use std::collections::VecDeque;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

/// Synchronous single-worker executor. Every pushed event is delivered,
/// together with everything it causes, before `push` returns; events are
/// delivered in global FIFO order, so feedback arrives with no delay.
pub struct LocalEngine<E> {
    topology: Topology<E>,
    replicas: Vec<Vec<Box<dyn Processor<E>>>>,
    outlets: Vec<Vec<Outlet>>,
    queue: VecDeque<(ProcessorId, Envelope<E>)>,
    processed: Vec<Vec<u64>>,
    sourced: u64,
    clock: u64,
    busy: Duration,
    ctx: Context<E>,
    spare: Vec<(StreamId, E)>,
    poisoned: bool,
}

impl<E: Clone + Send + 'static> LocalEngine<E> {
    pub fn new(topology: Topology<E>) -> Self {
        let replicas = topology.instantiate();
        let outlets = topology
            .processors()
            .iter()
            .map(|d| (0..d.parallelism).map(|_| Outlet::new(&topology)).collect())
            .collect();
        let processed = topology.processors().iter().map(|d| vec![0; d.parallelism]).collect();
        Self {
            topology,
            replicas,
            outlets,
            queue: VecDeque::new(),
            processed,
            sourced: 0,
            clock: 0,
            busy: Duration::ZERO,
            ctx: Context::new(ProcessorId { id: 0, replica: 0 }, 0),
            spare: Vec::new(),
            poisoned: false,
        }
    }

    pub fn topology(&self) -> &Topology<E> {
        &self.topology
    }

    /// Events delivered so far.
    pub fn now(&self) -> u64 {
        self.clock
    }

    /// Feeds one event from source `source` and runs to quiescence.
    pub fn push(&mut self, source: usize, event: E) -> Result<(), EngineError> {
        if self.poisoned {
            return Err(EngineError::Poisoned);
        }
        if source >= self.replicas.len() || !self.topology.is_source(source) {
            return Err(EngineError::NotASource(source));
        }
        let started = Instant::now();
        self.sourced += 1;
        let from = ProcessorId { id: source, replica: 0 };
        for stream in self.topology.streams_from(source) {
            self.route(from, stream, event.clone());
        }
        let out = self.drain();
        self.busy += started.elapsed();
        out
    }

    /// Calls `on_tick` on every replica, then runs to quiescence.
    pub fn tick(&mut self) -> Result<(), EngineError> {
        if self.poisoned {
            return Err(EngineError::Poisoned);
        }
        for id in 0..self.replicas.len() {
            for replica in 0..self.replicas[id].len() {
                let me = ProcessorId { id, replica };
                self.ctx.reset(me, self.clock);
                let p = &mut self.replicas[id][replica];
                let ctx = &mut self.ctx;
                if let Err(e) = catch_unwind(AssertUnwindSafe(|| p.on_tick(ctx))) {
                    return Err(self.fail(me, e));
                }
                self.flush(me);
            }
        }
        self.drain()
    }

    fn route(&mut self, from: ProcessorId, stream: StreamId, event: E) {
        let queue = &mut self.queue;
        self.outlets[from.id][from.replica].dispatch(&self.topology, from, stream, event, |_, dest, env| {
            queue.push_back((dest, env))
        });
    }

    fn flush(&mut self, from: ProcessorId) {
        let mut out = std::mem::take(&mut self.spare);
        self.ctx.swap_outbox(&mut out);
        for (stream, event) in out.drain(..) {
            self.route(from, stream, event);
        }
        self.spare = out;
    }

    fn fail(&mut self, at: ProcessorId, payload: Box<dyn Any + Send>) -> EngineError {
        self.poisoned = true;
        self.queue.clear();
        EngineError::ProcessorPanic {
            processor: self.topology.name(at.id).to_string(),
            replica: at.replica,
            message: panic_message(payload.as_ref()),
        }
    }

    fn drain(&mut self) -> Result<(), EngineError> {
        while let Some((dest, env)) = self.queue.pop_front() {
            self.clock += 1;
            self.ctx.reset(dest, self.clock);
            let p = &mut self.replicas[dest.id][dest.replica];
            let ctx = &mut self.ctx;
            if let Err(e) = catch_unwind(AssertUnwindSafe(|| p.process(env, ctx))) {
                return Err(self.fail(dest, e));
            }
            self.processed[dest.id][dest.replica] += 1;
            self.flush(dest);
        }
        Ok(())
    }

    pub fn processor<T: 'static>(&self, id: usize, replica: usize) -> Option<&T> {
        let p: &dyn Any = self.replicas.get(id)?.get(replica)?.as_ref();
        p.downcast_ref::<T>()
    }

    pub fn processor_mut<T: 'static>(&mut self, id: usize, replica: usize) -> Option<&mut T> {
        let p: &mut dyn Any = self.replicas.get_mut(id)?.get_mut(replica)?.as_mut();
        p.downcast_mut::<T>()
    }

    pub fn report(&self) -> RunReport {
        let mut processed = Vec::new();
        for (id, counts) in self.processed.iter().enumerate() {
            for (replica, &c) in counts.iter().enumerate() {
                processed.push((self.topology.name(id).to_string(), replica, c));
            }
        }
        RunReport {
            processed,
            sourced: self.sourced,
            wall: self.busy,
        }
    }

    pub fn into_outcome(self) -> RunOutcome<E> {
        let report = self.report();
        RunOutcome {
            report,
            processors: ProcessorSet::new(self.replicas),
        }
    }

    /// Feeds all sources round-robin, one event at a time, until every
    /// input is exhausted.
    pub fn run(topology: Topology<E>, sources: Vec<(usize, SourceInput<E>)>) -> Result<RunOutcome<E>, EngineError> {
        for s in topology.sources() {
            if !sources.iter().any(|(id, _)| *id == s) {
                return Err(EngineError::MissingInput(topology.name(s).to_string()));
            }
        }
        let mut engine = Self::new(topology);
        let mut inputs: Vec<(usize, SourceInput<E>)> = sources;
        while !inputs.is_empty() {
            let mut i = 0;
            while i < inputs.len() {
                match inputs[i].1.next() {
                    Some(e) => {
                        let id = inputs[i].0;
                        engine.push(id, e)?;
                        i += 1;
                    }
                    None => {
                        drop(inputs.swap_remove(i));
                    }
                }
            }
        }
        Ok(engine.into_outcome())
    }
}
