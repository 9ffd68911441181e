use super::{EngineError, Envelope, Processor, ProcessorId, StreamId};
use smallvec::SmallVec;
use std::ops::Range;
use std::sync::Arc;

/// Opaque routing key produced by a key extractor.
pub type KeyBytes = SmallVec<[u8; 16]>;
pub type KeyFn<E> = Arc<dyn Fn(&E) -> KeyBytes + Send + Sync>;
/// Builds the processor for a given replica index.
pub type Factory<E> = Arc<dyn Fn(usize) -> Box<dyn Processor<E>> + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Grouping {
    /// Round-robin over destination replicas.
    Shuffle,
    /// Hash of the event's key, modulo the replica count.
    Key,
    /// Every replica gets a copy.
    All,
}

/// Replica for the next shuffle-grouped event; advances `counter`.
pub fn route_shuffle(counter: &mut u64, n: usize) -> usize {
    let r = (*counter % n as u64) as usize;
    *counter += 1;
    r
}

/// Replica owning `key`: a stable 64-bit hash of the bytes modulo `n`.
pub fn route_key(key: &[u8], n: usize) -> usize {
    (xxhash_rust::xxh3::xxh3_64(key) % n as u64) as usize
}

pub fn route_all(n: usize) -> Range<usize> {
    0..n
}

pub struct ProcessorDecl<E> {
    pub name: String,
    pub parallelism: usize,
    /// `None` marks a source, which is fed from an input iterator.
    pub factory: Option<Factory<E>>,
}

impl<E> ProcessorDecl<E> {
    pub fn source(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            parallelism: 1,
            factory: None,
        }
    }

    pub fn new<F>(name: impl Into<String>, parallelism: usize, factory: F) -> Self
    where
        F: Fn(usize) -> Box<dyn Processor<E>> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            parallelism,
            factory: Some(Arc::new(factory)),
        }
    }
}

/// One (stream, destination) edge. A stream with several destinations is
/// declared once per destination.
pub struct StreamSpec<E> {
    pub stream: StreamId,
    pub source: usize,
    pub destination: usize,
    pub grouping: Grouping,
    pub key: Option<KeyFn<E>>,
}

impl<E> Clone for StreamSpec<E> {
    fn clone(&self) -> Self {
        Self {
            stream: self.stream,
            source: self.source,
            destination: self.destination,
            grouping: self.grouping,
            key: self.key.clone(),
        }
    }
}

pub const DEFAULT_QUEUE_CAPACITY: usize = 1024;

/// A validated, immutable dataflow graph.
pub struct Topology<E> {
    processors: Vec<ProcessorDecl<E>>,
    streams: Vec<StreamSpec<E>>,
    queue_capacity: usize,
    /// Stream id to the indices of its specs.
    by_stream: Vec<Vec<usize>>,
    back_edges: Vec<bool>,
}

/// Validates declarations and streams into a topology.
pub fn build_topology<E>(
    decls: Vec<ProcessorDecl<E>>,
    streams: Vec<StreamSpec<E>>,
    queue_capacity: usize,
) -> Result<Topology<E>, EngineError> {
    if decls.is_empty() {
        return Err(EngineError::Empty);
    }
    if queue_capacity == 0 {
        return Err(EngineError::ZeroQueueCapacity);
    }
    for d in &decls {
        if d.parallelism == 0 {
            return Err(EngineError::ZeroParallelism(d.name.clone()));
        }
    }
    let max_stream = streams.iter().map(|s| s.stream.0 + 1).max().unwrap_or(0);
    let mut by_stream = vec![Vec::new(); max_stream];
    for (i, s) in streams.iter().enumerate() {
        for p in [s.source, s.destination] {
            if p >= decls.len() {
                return Err(EngineError::DanglingReference {
                    stream: s.stream,
                    processor: p,
                });
            }
        }
        if s.grouping == Grouping::Key && s.key.is_none() {
            return Err(EngineError::MissingKeyFn(s.stream));
        }
        let group: &mut Vec<usize> = &mut by_stream[s.stream.0];
        if group.first().is_some_and(|&j| streams[j].source != s.source) {
            return Err(EngineError::MultipleSources(s.stream));
        }
        group.push(i);
    }
    let back_edges = find_back_edges(&decls, &streams);
    Ok(Topology {
        processors: decls,
        streams,
        queue_capacity,
        by_stream,
        back_edges,
    })
}

/// Marks edges that close a cycle, found by depth-first search from the
/// sources.
fn find_back_edges<E>(decls: &[ProcessorDecl<E>], streams: &[StreamSpec<E>]) -> Vec<bool> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        OnStack,
        Done,
    }
    fn visit<E>(at: usize, streams: &[StreamSpec<E>], marks: &mut [Mark], back: &mut [bool]) {
        marks[at] = Mark::OnStack;
        for (i, s) in streams.iter().enumerate().filter(|(_, s)| s.source == at) {
            match marks[s.destination] {
                Mark::OnStack => back[i] = true,
                Mark::New => visit(s.destination, streams, marks, back),
                Mark::Done => {}
            }
        }
        marks[at] = Mark::Done;
    }
    let mut marks = vec![Mark::New; decls.len()];
    let mut back = vec![false; streams.len()];
    let roots = (0..decls.len()).filter(|&i| decls[i].factory.is_none()).chain(0..decls.len());
    for root in roots.collect::<Vec<_>>() {
        if marks[root] == Mark::New {
            visit(root, streams, &mut marks, &mut back);
        }
    }
    back
}

impl<E> Topology<E> {
    pub fn processors(&self) -> &[ProcessorDecl<E>] {
        &self.processors
    }

    pub fn streams(&self) -> &[StreamSpec<E>] {
        &self.streams
    }

    pub fn queue_capacity(&self) -> usize {
        self.queue_capacity
    }

    pub fn name(&self, id: usize) -> &str {
        &self.processors[id].name
    }

    pub fn parallelism(&self, id: usize) -> usize {
        self.processors[id].parallelism
    }

    pub fn is_source(&self, id: usize) -> bool {
        self.processors[id].factory.is_none()
    }

    pub fn sources(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.processors.len()).filter(|&i| self.is_source(i))
    }

    /// Number of distinct stream ids.
    pub fn num_streams(&self) -> usize {
        self.by_stream.iter().filter(|g| !g.is_empty()).count()
    }

    /// Number of (stream, destination) edges.
    pub fn num_edges(&self) -> usize {
        self.streams.len()
    }

    /// Streams whose source is processor `id`.
    pub fn streams_from(&self, id: usize) -> Vec<StreamId> {
        let mut out: Vec<StreamId> = self.streams.iter().filter(|s| s.source == id).map(|s| s.stream).collect();
        out.dedup();
        out
    }

    /// True when spec `i` closes a cycle in the graph.
    pub fn is_back_edge(&self, spec: usize) -> bool {
        self.back_edges[spec]
    }

    pub(crate) fn instantiate(&self) -> Vec<Vec<Box<dyn Processor<E>>>> {
        self.processors
            .iter()
            .map(|d| match &d.factory {
                Some(f) => (0..d.parallelism).map(|r| f(r)).collect(),
                None => Vec::new(),
            })
            .collect()
    }

    /// Flat index of every replica, sources included.
    pub(crate) fn replica_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.processors.len() + 1);
        let mut total = 0;
        for d in &self.processors {
            offsets.push(total);
            total += d.parallelism;
        }
        offsets.push(total);
        offsets
    }
}

/// Incremental construction of a topology with automatically numbered
/// streams.
pub struct TopologyBuilder<E> {
    decls: Vec<ProcessorDecl<E>>,
    specs: Vec<StreamSpec<E>>,
    next_stream: usize,
    queue_capacity: usize,
}

impl<E> Default for TopologyBuilder<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> TopologyBuilder<E> {
    pub fn new() -> Self {
        Self {
            decls: Vec::new(),
            specs: Vec::new(),
            next_stream: 0,
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
        }
    }

    pub fn queue_capacity(mut self, capacity: usize) -> Self {
        self.queue_capacity = capacity;
        self
    }

    pub fn source(&mut self, name: impl Into<String>) -> usize {
        self.decls.push(ProcessorDecl::source(name));
        self.decls.len() - 1
    }

    pub fn processor<F>(&mut self, name: impl Into<String>, parallelism: usize, factory: F) -> usize
    where
        F: Fn(usize) -> Box<dyn Processor<E>> + Send + Sync + 'static,
    {
        self.decls.push(ProcessorDecl::new(name, parallelism, factory));
        self.decls.len() - 1
    }

    /// Declares a new stream from `source` to `destination`.
    pub fn stream(&mut self, source: usize, destination: usize, grouping: Grouping, key: Option<KeyFn<E>>) -> StreamId {
        let stream = StreamId(self.next_stream);
        self.next_stream += 1;
        self.specs.push(StreamSpec {
            stream,
            source,
            destination,
            grouping,
            key,
        });
        stream
    }

    /// Adds another destination to an existing stream.
    pub fn also(&mut self, stream: StreamId, destination: usize, grouping: Grouping, key: Option<KeyFn<E>>) {
        let source = self
            .specs
            .iter()
            .find(|s| s.stream == stream)
            .map_or(usize::MAX, |s| s.source);
        self.specs.push(StreamSpec {
            stream,
            source,
            destination,
            grouping,
            key,
        });
    }

    pub fn build(self) -> Result<Topology<E>, EngineError> {
        build_topology(self.decls, self.specs, self.queue_capacity)
    }
}

/// Sequence numbers and shuffle counters of one emitting replica.
pub(crate) struct Outlet {
    seq: Vec<u64>,
    shuffle: Vec<u64>,
}

impl Outlet {
    pub(crate) fn new<E>(topology: &Topology<E>) -> Self {
        Self {
            seq: vec![0; topology.by_stream.len()],
            shuffle: vec![0; topology.streams.len()],
        }
    }

    /// Routes one emitted event, calling `deliver(spec index, destination,
    /// envelope)` once per receiving replica.
    pub(crate) fn dispatch<E: Clone>(
        &mut self,
        topology: &Topology<E>,
        from: ProcessorId,
        stream: StreamId,
        payload: E,
        mut deliver: impl FnMut(usize, ProcessorId, Envelope<E>),
    ) {
        let specs = topology.by_stream.get(stream.0).map_or(&[][..], Vec::as_slice);
        assert!(
            specs.first().is_some_and(|&i| topology.streams[i].source == from.id),
            "processor '{}' emitted on {stream}, which it does not own",
            topology.name(from.id)
        );
        let seq = self.seq[stream.0];
        self.seq[stream.0] += 1;
        if let [i] = *specs {
            let spec = &topology.streams[i];
            let n = topology.parallelism(spec.destination);
            let replica = match spec.grouping {
                Grouping::Shuffle => Some(route_shuffle(&mut self.shuffle[i], n)),
                Grouping::Key => Some(route_key(&spec.key.as_ref().expect("validated")(&payload), n)),
                Grouping::All if n == 1 => Some(0),
                Grouping::All => None,
            };
            if let Some(replica) = replica {
                let dest = ProcessorId {
                    id: spec.destination,
                    replica,
                };
                deliver(
                    i,
                    dest,
                    Envelope {
                        source: from,
                        stream,
                        seq,
                        payload,
                    },
                );
                return;
            }
        }
        let mut targets: SmallVec<[(usize, ProcessorId); 8]> = SmallVec::new();
        for &i in specs {
            let spec = &topology.streams[i];
            let n = topology.parallelism(spec.destination);
            let at = |replica| (i, ProcessorId { id: spec.destination, replica });
            match spec.grouping {
                Grouping::Shuffle => targets.push(at(route_shuffle(&mut self.shuffle[i], n))),
                Grouping::Key => {
                    let key = spec.key.as_ref().expect("validated")(&payload);
                    targets.push(at(route_key(&key, n)));
                }
                Grouping::All => targets.extend(route_all(n).map(at)),
            }
        }
        let Some((&last, rest)) = targets.split_last() else {
            return;
        };
        for &(i, dest) in rest {
            deliver(
                i,
                dest,
                Envelope {
                    source: from,
                    stream,
                    seq,
                    payload: payload.clone(),
                },
            );
        }
        deliver(
            last.0,
            last.1,
            Envelope {
                source: from,
                stream,
                seq,
                payload,
            },
        );
    }
}
