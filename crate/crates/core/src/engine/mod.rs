//! Minimal in-process dataflow runtime: processors joined by streams with
//! shuffle, key or broadcast grouping.
//!
//! Three executors share one topology description:
//! [`LocalEngine`] delivers synchronously from a single FIFO queue,
//! [`SimEngine`] explores seeded interleavings with per-stream delays, and
//! [`ThreadedEngine`] runs one worker thread per processor replica over
//! bounded queues.

mod local;
mod sim;
mod threaded;
mod topology;

pub use local::LocalEngine;
pub use sim::{SimConfig, SimEngine, StreamDelay};
pub use threaded::{ThreadedConfig, ThreadedEngine};
pub use topology::{
    build_topology, route_all, route_key, route_shuffle, Factory, DEFAULT_QUEUE_CAPACITY, Grouping, KeyBytes, KeyFn, ProcessorDecl,
    StreamSpec, Topology, TopologyBuilder,
};

use std::any::Any;
use std::fmt;
use std::time::Duration;

/// A processor replica: declaration index plus replica index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProcessorId {
    pub id: usize,
    pub replica: usize,
}

impl fmt::Display for ProcessorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.id, self.replica)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StreamId(pub usize);

impl fmt::Display for StreamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stream {}", self.0)
    }
}

/// An event in transit. `seq` increases strictly per (source replica,
/// stream); broadcast copies share it.
#[derive(Clone, Debug)]
pub struct Envelope<E> {
    pub source: ProcessorId,
    pub stream: StreamId,
    pub seq: u64,
    pub payload: E,
}

/// Behavior of one processor replica. The engine never calls a replica
/// concurrently with itself.
pub trait Processor<E>: Any + Send {
    fn process(&mut self, envelope: Envelope<E>, ctx: &mut Context<E>);

    /// Called periodically while the engine runs, so processors can act on
    /// the passage of time.
    fn on_tick(&mut self, _ctx: &mut Context<E>) {}
}

/// Handle passed to processor callbacks for emitting events.
pub struct Context<E> {
    me: ProcessorId,
    now: u64,
    outbox: Vec<(StreamId, E)>,
}

impl<E> Context<E> {
    pub(crate) fn new(me: ProcessorId, now: u64) -> Self {
        Self {
            me,
            now,
            outbox: Vec::new(),
        }
    }

    pub fn emit(&mut self, stream: StreamId, event: E) {
        self.outbox.push((stream, event));
    }

    /// Engine time: delivery steps for the local and simulated engines,
    /// elapsed multiples of the configured time unit for the threaded one.
    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn me(&self) -> ProcessorId {
        self.me
    }

    pub(crate) fn reset(&mut self, me: ProcessorId, now: u64) {
        self.me = me;
        self.now = now;
    }

    pub(crate) fn take(&mut self) -> std::vec::Drain<'_, (StreamId, E)> {
        self.outbox.drain(..)
    }

    /// Swaps the outbox with `spare`, which must be empty, so the caller
    /// can route the emitted events while the context stays usable.
    pub(crate) fn swap_outbox(&mut self, spare: &mut Vec<(StreamId, E)>) {
        debug_assert!(spare.is_empty());
        std::mem::swap(&mut self.outbox, spare);
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("topology has no processors")]
    Empty,
    #[error("dangling reference: {stream} names undeclared processor {processor}")]
    DanglingReference { stream: StreamId, processor: usize },
    #[error("{0} uses key grouping without a key extractor")]
    MissingKeyFn(StreamId),
    #[error("processor '{0}' has zero parallelism")]
    ZeroParallelism(String),
    #[error("queue capacity must be at least 1")]
    ZeroQueueCapacity,
    #[error("{0} has more than one source")]
    MultipleSources(StreamId),
    #[error("source '{0}' has no input")]
    MissingInput(String),
    #[error("processor {0} is not a source")]
    NotASource(usize),
    #[error("processor '{processor}' replica {replica} panicked: {message}")]
    ProcessorPanic { processor: String, replica: usize, message: String },
    #[error("no progress for {stalled:?} with {in_flight} events in flight")]
    Deadlock { stalled: Duration, in_flight: usize },
    #[error("engine stopped after an earlier failure")]
    Poisoned,
}

/// Per-replica event counts and wall time of a run.
#[derive(Clone, Debug, Default)]
pub struct RunReport {
    /// (processor name, replica, events processed).
    pub processed: Vec<(String, usize, u64)>,
    /// Events fed by sources.
    pub sourced: u64,
    pub wall: Duration,
}

impl RunReport {
    /// Events processed by every replica of the named processor.
    pub fn processed_by(&self, name: &str) -> u64 {
        self.processed.iter().filter(|(n, _, _)| n == name).map(|&(_, _, c)| c).sum()
    }
}

/// Processor states handed back by an engine.
pub struct ProcessorSet<E> {
    replicas: Vec<Vec<Box<dyn Processor<E>>>>,
}

impl<E: 'static> ProcessorSet<E> {
    pub(crate) fn new(replicas: Vec<Vec<Box<dyn Processor<E>>>>) -> Self {
        Self { replicas }
    }

    pub fn get<T: 'static>(&self, id: usize, replica: usize) -> Option<&T> {
        let p: &dyn Any = self.replicas.get(id)?.get(replica)?.as_ref();
        p.downcast_ref::<T>()
    }

    pub fn get_mut<T: 'static>(&mut self, id: usize, replica: usize) -> Option<&mut T> {
        let p: &mut dyn Any = self.replicas.get_mut(id)?.get_mut(replica)?.as_mut();
        p.downcast_mut::<T>()
    }

    /// All replicas of processor `id` that are of type `T`.
    pub fn all<T: 'static>(&self, id: usize) -> Vec<&T> {
        self.replicas
            .get(id)
            .map(|rs| {
                rs.iter()
                    .filter_map(|p| {
                        let p: &dyn Any = p.as_ref();
                        p.downcast_ref::<T>()
                    })
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Removes and returns the replicas of processor `id` that are of type
    /// `T`.
    pub fn take_all<T: 'static>(&mut self, id: usize) -> Vec<T> {
        let Some(slot) = self.replicas.get_mut(id) else {
            return Vec::new();
        };
        std::mem::take(slot)
            .into_iter()
            .filter_map(|p| {
                let p: Box<dyn Any> = p;
                p.downcast::<T>().ok().map(|b| *b)
            })
            .collect()
    }

    pub fn replicas(&self, id: usize) -> usize {
        self.replicas.get(id).map_or(0, Vec::len)
    }
}

pub struct RunOutcome<E> {
    pub report: RunReport,
    pub processors: ProcessorSet<E>,
}

/// Input for one source processor.
pub type SourceInput<E> = Box<dyn Iterator<Item = E> + Send>;

pub(crate) fn panic_message(payload: &(dyn Any + Send)) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "non-string panic payload".to_string()
    }
}
