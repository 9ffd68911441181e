use std::time::Duration;
use vht_core::engine::{
    Context, EngineError, Envelope, Grouping, KeyBytes, LocalEngine, Processor, ProcessorId, SimConfig, SimEngine,
    SourceInput, StreamId, ThreadedConfig, ThreadedEngine, Topology, TopologyBuilder,
};

/// Records every delivery it sees.
#[derive(Default)]
struct Sink {
    seen: Vec<(ProcessorId, StreamId, u64, u64)>,
}

impl Processor<u64> for Sink {
    fn process(&mut self, env: Envelope<u64>, _: &mut Context<u64>) {
        self.seen.push((env.source, env.stream, env.seq, env.payload));
    }
}

/// Forwards every event on its single output stream.
struct Relay(StreamId);

impl Processor<u64> for Relay {
    fn process(&mut self, env: Envelope<u64>, ctx: &mut Context<u64>) {
        ctx.emit(self.0, env.payload);
    }
}

struct Bomb;

impl Processor<u64> for Bomb {
    fn process(&mut self, env: Envelope<u64>, _: &mut Context<u64>) {
        assert!(env.payload != 7, "seven is not allowed");
    }
}

struct Slow;

impl Processor<u64> for Slow {
    fn process(&mut self, _: Envelope<u64>, _: &mut Context<u64>) {
        std::thread::sleep(Duration::from_millis(400));
    }
}

fn input(n: u64) -> Vec<(usize, SourceInput<u64>)> {
    vec![(0, Box::new(0..n))]
}

/// source -> relay (p replicas, given grouping) -> sink (1 replica)
fn chain(p: usize, grouping: Grouping) -> Topology<u64> {
    let mut b = TopologyBuilder::new().queue_capacity(16);
    let src = b.source("source");
    let relay_out = StreamId(1);
    let relay = b.processor("relay", p, move |_| Box::new(Relay(relay_out)) as Box<dyn Processor<u64>>);
    let sink = b.processor("sink", 1, |_| Box::new(Sink::default()) as Box<dyn Processor<u64>>);
    let key = (grouping == Grouping::Key).then(|| {
        std::sync::Arc::new(|e: &u64| KeyBytes::from_slice(&e.to_le_bytes())) as vht_core::engine::KeyFn<u64>
    });
    b.stream(src, relay, grouping, key);
    b.stream(relay, sink, Grouping::Shuffle, None);
    b.build().unwrap()
}

fn pass_through() -> Topology<u64> {
    let mut b = TopologyBuilder::new();
    let src = b.source("source");
    let sink = b.processor("sink", 1, |_| Box::new(Sink::default()) as Box<dyn Processor<u64>>);
    b.stream(src, sink, Grouping::Shuffle, None);
    b.build().unwrap()
}

fn assert_fifo(seen: &[(ProcessorId, StreamId, u64, u64)]) {
    let mut last = std::collections::HashMap::new();
    for &(src, stream, seq, _) in seen {
        if let Some(prev) = last.insert((src, stream), seq) {
            assert!(seq > prev, "out of order on {src}/{stream}: {prev} then {seq}");
        }
    }
}

#[test]
fn empty_source_terminates_in_every_engine() {
    let out = LocalEngine::run(pass_through(), input(0)).unwrap();
    assert_eq!(out.report.processed_by("sink"), 0);
    let out = SimEngine::new(pass_through(), SimConfig::new(1)).run_to_end(input(0)).unwrap();
    assert_eq!(out.report.processed_by("sink"), 0);
    let out = ThreadedEngine::run(pass_through(), input(0), ThreadedConfig::default()).unwrap();
    assert_eq!(out.report.processed_by("sink"), 0);
}

#[test]
fn pass_through_preserves_source_order() {
    let expect: Vec<u64> = (0..1000).collect();
    let check = |out: vht_core::engine::RunOutcome<u64>| {
        let sink = out.processors.get::<Sink>(1, 0).unwrap();
        assert_eq!(sink.seen.iter().map(|s| s.3).collect::<Vec<_>>(), expect);
        assert_eq!(out.report.sourced, 1000);
    };
    check(LocalEngine::run(pass_through(), input(1000)).unwrap());
    check(SimEngine::new(pass_through(), SimConfig::new(3)).run_to_end(input(1000)).unwrap());
    check(ThreadedEngine::run(pass_through(), input(1000), ThreadedConfig::default()).unwrap());
}

#[test]
fn per_edge_fifo_under_random_interleavings() {
    for seed in 0..100 {
        let config = SimConfig::new(seed).delay(StreamId(0), 0, 5).delay(StreamId(1), 0, 9);
        let out = SimEngine::new(chain(3, Grouping::Shuffle), config).run_to_end(input(200)).unwrap();
        let sink = out.processors.get::<Sink>(2, 0).unwrap();
        assert_eq!(sink.seen.len(), 200);
        assert_fifo(&sink.seen);
        let mut payloads: Vec<u64> = sink.seen.iter().map(|s| s.3).collect();
        payloads.sort_unstable();
        assert_eq!(payloads, (0..200).collect::<Vec<_>>(), "exactly once");
    }
}

#[test]
fn threaded_chain_delivers_everything_once_in_edge_order() {
    for grouping in [Grouping::Shuffle, Grouping::Key] {
        let out = ThreadedEngine::run(chain(4, grouping), input(20_000), ThreadedConfig::default()).unwrap();
        let sink = out.processors.get::<Sink>(2, 0).unwrap();
        assert_fifo(&sink.seen);
        let mut payloads: Vec<u64> = sink.seen.iter().map(|s| s.3).collect();
        payloads.sort_unstable();
        assert_eq!(payloads, (0..20_000).collect::<Vec<_>>());
        // Per relay replica, payload order is source order.
        for r in 0..4 {
            let from: Vec<u64> = sink.seen.iter().filter(|s| s.0.replica == r).map(|s| s.3).collect();
            assert!(from.windows(2).all(|w| w[0] < w[1]));
        }
        assert_eq!(out.report.processed_by("relay"), 20_000);
    }
}

#[test]
fn shuffle_balances_replicas() {
    let out = LocalEngine::run(chain(4, Grouping::Shuffle), input(1000)).unwrap();
    let counts: Vec<u64> = out.report.processed.iter().filter(|p| p.0 == "relay").map(|p| p.2).collect();
    assert_eq!(counts, vec![250; 4]);
}

#[test]
fn all_grouping_reaches_every_replica_once() {
    let mut b = TopologyBuilder::new();
    let src = b.source("source");
    let sinks = b.processor("sinks", 4, |_| Box::new(Sink::default()) as Box<dyn Processor<u64>>);
    b.stream(src, sinks, Grouping::All, None);
    let out = ThreadedEngine::run(b.build().unwrap(), input(500), ThreadedConfig::default()).unwrap();
    for r in 0..4 {
        let s = out.processors.get::<Sink>(1, r).unwrap();
        assert_eq!(s.seen.iter().map(|x| x.3).collect::<Vec<_>>(), (0..500).collect::<Vec<_>>());
    }
}

#[test]
fn key_grouping_sends_equal_keys_to_one_replica() {
    let mut b = TopologyBuilder::new();
    let src = b.source("source");
    let sinks = b.processor("sinks", 4, |_| Box::new(Sink::default()) as Box<dyn Processor<u64>>);
    let key = std::sync::Arc::new(|e: &u64| KeyBytes::from_slice(&(e % 10).to_le_bytes()));
    b.stream(src, sinks, Grouping::Key, Some(key));
    let out = LocalEngine::run(b.build().unwrap(), input(1000)).unwrap();
    for k in 0..10 {
        let owners: Vec<usize> = (0..4)
            .filter(|&r| out.processors.get::<Sink>(1, r).unwrap().seen.iter().any(|s| s.3 % 10 == k))
            .collect();
        assert_eq!(owners.len(), 1);
    }
}

fn bomb_topology() -> Topology<u64> {
    let mut b = TopologyBuilder::new();
    let src = b.source("source");
    let bomb = b.processor("bomb", 2, |_| Box::new(Bomb) as Box<dyn Processor<u64>>);
    b.stream(src, bomb, Grouping::Shuffle, None);
    b.build().unwrap()
}

#[test]
fn panics_name_the_processor() {
    let check = |e: EngineError| {
        assert!(matches!(&e, EngineError::ProcessorPanic { processor, replica: 1, .. } if processor == "bomb"), "{e}");
        assert!(e.to_string().contains("seven is not allowed"));
    };
    check(LocalEngine::run(bomb_topology(), input(100)).err().unwrap());
    check(SimEngine::new(bomb_topology(), SimConfig::new(0)).run_to_end(input(100)).err().unwrap());
    check(ThreadedEngine::run(bomb_topology(), input(100), ThreadedConfig::default()).err().unwrap());
}

#[test]
fn watchdog_reports_stalls() {
    let mut b = TopologyBuilder::new();
    let src = b.source("source");
    let slow = b.processor("slow", 1, |_| Box::new(Slow) as Box<dyn Processor<u64>>);
    b.stream(src, slow, Grouping::Shuffle, None);
    let config = ThreadedConfig {
        stall_timeout: Duration::from_millis(100),
        ..ThreadedConfig::default()
    };
    let err = ThreadedEngine::run(b.build().unwrap(), input(3), config).err().unwrap();
    assert!(matches!(err, EngineError::Deadlock { .. }), "{err}");
}

#[test]
fn missing_source_input_is_rejected() {
    let err = LocalEngine::run(pass_through(), Vec::new()).err().unwrap();
    assert!(matches!(err, EngineError::MissingInput(_)));
}
