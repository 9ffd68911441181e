use super::topology::Outlet;
use super::{
    panic_message, Context, EngineError, Envelope, Processor, ProcessorId, ProcessorSet, RunOutcome, RunReport,
    SourceInput, Topology,
};
use std::collections::VecDeque;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex, MutexGuard};
use std::time::{Duration, Instant};

#[derive(Clone, Debug)]
pub struct ThreadedConfig {
    /// Abort with [`EngineError::Deadlock`] after this long without progress.
    pub stall_timeout: Duration,
    /// Interval between `on_tick` calls on each replica.
    pub tick_interval: Duration,
    /// Events a source reads before handing them downstream.
    pub source_batch: usize,
    /// Buffered outputs that force a worker to hand them downstream.
    pub flush_threshold: usize,
    /// Wall-clock length of one unit of engine time, as seen by
    /// [`Context::now`](super::Context::now).
    pub time_unit: Duration,
}

impl Default for ThreadedConfig {
    fn default() -> Self {
        Self {
            stall_timeout: Duration::from_secs(30),
            tick_interval: Duration::from_millis(1),
            source_batch: 64,
            flush_threshold: 4096,
            time_unit: Duration::from_millis(100),
        }
    }
}

struct InboxState<E> {
    batches: VecDeque<Vec<Envelope<E>>>,
    /// Envelopes queued per sender (flat replica index).
    queued_from: Vec<usize>,
}

struct Inbox<E> {
    state: Mutex<InboxState<E>>,
    not_empty: Condvar,
    not_full: Condvar,
}

struct Shared<'t, E> {
    topology: &'t Topology<E>,
    offsets: Vec<usize>,
    inboxes: Vec<Inbox<E>>,
    /// Whether sends from processor `a` to processor `b` may block.
    bounded: Vec<Vec<bool>>,
    in_flight: AtomicUsize,
    live_sources: AtomicUsize,
    done: AtomicBool,
    progress: AtomicU64,
    failure: Mutex<Option<EngineError>>,
    start: Instant,
    config: ThreadedConfig,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl<E: Send> Shared<'_, E> {
    fn flat(&self, p: ProcessorId) -> usize {
        self.offsets[p.id] + p.replica
    }

    fn now(&self) -> u64 {
        (self.start.elapsed().as_nanos() / self.config.time_unit.as_nanos().max(1)) as u64
    }

    fn finish(&self) {
        self.done.store(true, Ordering::SeqCst);
        for inbox in &self.inboxes {
            let _guard = lock(&inbox.state);
            inbox.not_empty.notify_all();
            inbox.not_full.notify_all();
        }
    }

    fn abort(&self, error: EngineError) {
        lock(&self.failure).get_or_insert(error);
        self.finish();
    }

    fn maybe_finish(&self) {
        if self.live_sources.load(Ordering::SeqCst) == 0 && self.in_flight.load(Ordering::SeqCst) == 0 {
            self.finish();
        }
    }

    /// Queues a batch at `dest`, blocking while the edge is full. Returns
    /// false when the run was aborted.
    fn send(&self, sender: usize, from: usize, dest: ProcessorId, batch: Vec<Envelope<E>>) -> bool {
        let len = batch.len();
        self.in_flight.fetch_add(len, Ordering::SeqCst);
        let inbox = &self.inboxes[self.flat(dest)];
        let cap = self.topology.queue_capacity();
        let mut st = lock(&inbox.state);
        if self.bounded[from][dest.id] {
            while st.queued_from[sender] != 0 && st.queued_from[sender] + len > cap {
                if self.done.load(Ordering::SeqCst) {
                    return false;
                }
                st = inbox
                    .not_full
                    .wait_timeout(st, Duration::from_millis(5))
                    .unwrap_or_else(|e| e.into_inner())
                    .0;
            }
        }
        st.queued_from[sender] += len;
        st.batches.push_back(batch);
        inbox.not_empty.notify_one();
        true
    }
}

/// Per-destination output buffers of one sender.
struct Outbuf<E> {
    bufs: Vec<Vec<Envelope<E>>>,
    dests: Vec<ProcessorId>,
    total: usize,
}

impl<E: Send> Outbuf<E> {
    fn new(shared: &Shared<'_, E>) -> Self {
        let mut dests = Vec::new();
        for (id, d) in shared.topology.processors().iter().enumerate() {
            for replica in 0..d.parallelism {
                dests.push(ProcessorId { id, replica });
            }
        }
        Self {
            bufs: (0..dests.len()).map(|_| Vec::new()).collect(),
            dests,
            total: 0,
        }
    }

    fn push(&mut self, flat: usize, env: Envelope<E>) {
        self.bufs[flat].push(env);
        self.total += 1;
    }

    fn flush(&mut self, shared: &Shared<'_, E>, sender: usize, from: usize) -> bool {
        if self.total == 0 {
            return true;
        }
        self.total = 0;
        for (flat, buf) in self.bufs.iter_mut().enumerate() {
            if !buf.is_empty() {
                let batch = std::mem::take(buf);
                if !shared.send(sender, from, self.dests[flat], batch) {
                    return false;
                }
            }
        }
        true
    }
}

/// Multi-threaded executor: one thread per processor replica and per
/// source, bounded per-edge queues with blocking backpressure. Edges that
/// close a cycle are unbounded so feedback loops cannot deadlock.
pub struct ThreadedEngine;

impl ThreadedEngine {
    pub fn run<E>(
        topology: Topology<E>,
        sources: Vec<(usize, SourceInput<E>)>,
        config: ThreadedConfig,
    ) -> Result<RunOutcome<E>, EngineError>
    where
        E: Clone + Send + 'static,
    {
        for s in topology.sources() {
            if !sources.iter().any(|(id, _)| *id == s) {
                return Err(EngineError::MissingInput(topology.name(s).to_string()));
            }
        }
        for (id, _) in &sources {
            if *id >= topology.processors().len() || !topology.is_source(*id) {
                return Err(EngineError::NotASource(*id));
            }
        }
        let offsets = topology.replica_offsets();
        let total = *offsets.last().expect("offsets end with the total");
        let n = topology.processors().len();
        let mut bounded = vec![vec![false; n]; n];
        for (i, s) in topology.streams().iter().enumerate() {
            if !topology.is_back_edge(i) {
                bounded[s.source][s.destination] = true;
            }
        }
        let shared = Shared {
            topology: &topology,
            offsets,
            inboxes: (0..total)
                .map(|_| Inbox {
                    state: Mutex::new(InboxState {
                        batches: VecDeque::new(),
                        queued_from: vec![0; total],
                    }),
                    not_empty: Condvar::new(),
                    not_full: Condvar::new(),
                })
                .collect(),
            bounded,
            in_flight: AtomicUsize::new(0),
            live_sources: AtomicUsize::new(sources.len()),
            done: AtomicBool::new(false),
            progress: AtomicU64::new(0),
            failure: Mutex::new(None),
            start: Instant::now(),
            config,
        };
        let replicas = topology.instantiate();
        let mut sourced = 0;
        let mut results: Vec<Vec<Option<(Box<dyn Processor<E>>, u64)>>> =
            replicas.iter().map(|r| r.iter().map(|_| None).collect()).collect();

        if sources.is_empty() {
            shared.finish();
        }
        std::thread::scope(|scope| {
            let shared = &shared;
            let mut workers = Vec::new();
            for (id, reps) in replicas.into_iter().enumerate() {
                for (replica, p) in reps.into_iter().enumerate() {
                    let me = ProcessorId { id, replica };
                    workers.push((me, scope.spawn(move || worker(shared, me, p))));
                }
            }
            let feeders: Vec<_> = sources
                .into_iter()
                .map(|(id, input)| scope.spawn(move || feed(shared, id, input)))
                .collect();

            watchdog(shared);

            for f in feeders {
                sourced += f.join().unwrap_or(0);
            }
            for (me, w) in workers {
                if let Ok(r) = w.join() {
                    results[me.id][me.replica] = Some(r);
                }
            }
        });

        if let Some(e) = lock(&shared.failure).take() {
            return Err(e);
        }
        let wall = shared.start.elapsed();
        let mut processed = Vec::new();
        let mut states = Vec::new();
        for (id, reps) in results.into_iter().enumerate() {
            let mut v = Vec::new();
            for (replica, r) in reps.into_iter().enumerate() {
                let (p, count) = r.expect("worker returned its processor");
                processed.push((topology.name(id).to_string(), replica, count));
                v.push(p);
            }
            states.push(v);
        }
        Ok(RunOutcome {
            report: RunReport {
                processed,
                sourced,
                wall,
            },
            processors: ProcessorSet::new(states),
        })
    }
}

fn watchdog<E: Send>(shared: &Shared<'_, E>) {
    let mut last = shared.progress.load(Ordering::SeqCst);
    let mut since = Instant::now();
    while !shared.done.load(Ordering::SeqCst) {
        std::thread::sleep(Duration::from_millis(5));
        let now = shared.progress.load(Ordering::SeqCst);
        if now != last {
            last = now;
            since = Instant::now();
        } else if since.elapsed() >= shared.config.stall_timeout {
            shared.abort(EngineError::Deadlock {
                stalled: since.elapsed(),
                in_flight: shared.in_flight.load(Ordering::SeqCst),
            });
        }
    }
}

fn feed<E: Clone + Send + 'static>(shared: &Shared<'_, E>, id: usize, input: SourceInput<E>) -> u64 {
    let me = ProcessorId { id, replica: 0 };
    let sender = shared.flat(me);
    let streams = shared.topology.streams_from(id);
    let mut outlet = Outlet::new(shared.topology);
    let mut out = Outbuf::new(shared);
    let batch = shared.config.source_batch.max(1);
    let mut count = 0u64;
    for event in input {
        if shared.done.load(Ordering::Relaxed) {
            break;
        }
        count += 1;
        for &stream in &streams {
            outlet.dispatch(shared.topology, me, stream, event.clone(), |_, dest, env| {
                out.push(shared.flat(dest), env)
            });
        }
        if count % batch as u64 == 0 {
            if !out.flush(shared, sender, id) {
                break;
            }
            shared.progress.fetch_add(1, Ordering::SeqCst);
        }
    }
    out.flush(shared, sender, id);
    shared.progress.fetch_add(1, Ordering::SeqCst);
    shared.live_sources.fetch_sub(1, Ordering::SeqCst);
    shared.maybe_finish();
    count
}

fn worker<E: Clone + Send + 'static>(
    shared: &Shared<'_, E>,
    me: ProcessorId,
    mut processor: Box<dyn Processor<E>>,
) -> (Box<dyn Processor<E>>, u64) {
    let sender = shared.flat(me);
    let inbox = &shared.inboxes[sender];
    let mut outlet = Outlet::new(shared.topology);
    let mut out = Outbuf::new(shared);
    let mut ctx = Context::new(me, 0);
    let mut processed = 0u64;
    let mut last_tick = Instant::now();
    let tick = shared.config.tick_interval;

    let fail = |payload: Box<dyn std::any::Any + Send>| {
        shared.abort(EngineError::ProcessorPanic {
            processor: shared.topology.name(me.id).to_string(),
            replica: me.replica,
            message: panic_message(payload.as_ref()),
        });
    };

    loop {
        let drained = {
            let mut st = lock(&inbox.state);
            loop {
                if !st.batches.is_empty() {
                    let batches = std::mem::take(&mut st.batches);
                    for q in st.queued_from.iter_mut() {
                        *q = 0;
                    }
                    inbox.not_full.notify_all();
                    break Some(batches);
                }
                if shared.done.load(Ordering::SeqCst) {
                    break None;
                }
                let (guard, timeout) = inbox.not_empty.wait_timeout(st, tick).unwrap_or_else(|e| e.into_inner());
                st = guard;
                if timeout.timed_out() {
                    break Some(VecDeque::new());
                }
            }
        };
        let Some(batches) = drained else {
            break;
        };

        let mut n = 0usize;
        for batch in batches {
            for env in batch {
                ctx.reset(me, shared.now());
                if let Err(e) = catch_unwind(AssertUnwindSafe(|| processor.process(env, &mut ctx))) {
                    fail(e);
                    return (processor, processed);
                }
                n += 1;
                for (stream, event) in ctx.take() {
                    outlet.dispatch(shared.topology, me, stream, event, |_, dest, env| {
                        out.push(shared.flat(dest), env)
                    });
                }
                if out.total >= shared.config.flush_threshold && !out.flush(shared, sender, me.id) {
                    return (processor, processed);
                }
            }
        }
        if last_tick.elapsed() >= tick {
            last_tick = Instant::now();
            ctx.reset(me, shared.now());
            if let Err(e) = catch_unwind(AssertUnwindSafe(|| processor.on_tick(&mut ctx))) {
                fail(e);
                return (processor, processed);
            }
            for (stream, event) in ctx.take() {
                outlet.dispatch(shared.topology, me, stream, event, |_, dest, env| {
                    out.push(shared.flat(dest), env)
                });
            }
        }
        if !out.flush(shared, sender, me.id) {
            return (processor, processed);
        }
        if n > 0 {
            processed += n as u64;
            shared.progress.fetch_add(1, Ordering::SeqCst);
            if shared.in_flight.fetch_sub(n, Ordering::SeqCst) == n {
                shared.maybe_finish();
            }
        }
    }
    (processor, processed)
}
