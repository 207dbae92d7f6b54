//! Event ordering, determinism, failure handling and conservation of the
//! full EDM simulation.

use edm_core::edm::{EdmConfig, EdmSim};
use edm_core::engine::EventQueue;
use edm_core::fabric::{FabricModel, RunLimits};
use edm_core::host::CompletionStatus;
use edm_core::model::{ClusterConfig, MessageKind, PortId, SimTime};
use edm_core::phy::memory_block_count;
use edm_core::workloads::{gen_all_to_all, gen_heavy_tailed, CdfProfile, NodeRoles, TraceRecord};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn million_events_dispatch_in_time_then_insertion_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut q = EventQueue::new();
    let mut seq = 0u64;
    for _ in 0..1_000 {
        q.schedule(SimTime(rng.gen_range(0..1_000)), seq);
        seq += 1;
    }
    let mut log: Vec<(SimTime, u64)> = Vec::with_capacity(1_000_000);
    while let Some((t, id)) = q.pop() {
        log.push((t, id));
        if seq < 1_000_000 {
            // Children land at or after their parent; a quarter share its time.
            let dt = if rng.gen_bool(0.25) { 0 } else { rng.gen_range(1..5_000) };
            q.schedule(t + SimTime(dt), seq);
            seq += 1;
        }
    }
    assert_eq!(log.len(), 1_000_000);
    for w in log.windows(2) {
        assert!(w[0].0 <= w[1].0, "time went backwards");
        if w[0].0 == w[1].0 {
            assert!(w[0].1 < w[1].1, "equal times out of insertion order");
        }
    }
    assert_eq!(q.dispatched(), 1_000_000);
}

#[test]
fn slot_and_serialization_spans() {
    let c = ClusterConfig {
        link_gbps: 25.0,
        ..ClusterConfig::default()
    };
    assert_eq!(c.slot(), SimTime(2_640));
    // MS, eight 8-byte MD blocks, MT.
    assert_eq!(memory_block_count(MessageKind::Wreq, 64, 0x1_0000), 10);
    assert_eq!(ClusterConfig::default().wire_time(10), SimTime(6_600));
}

fn sim(n: usize) -> EdmSim {
    let cluster = ClusterConfig {
        n_ports: n,
        ..ClusterConfig::default()
    };
    EdmSim::new(EdmConfig {
        util_bucket: Some(SimTime::from_us(1)),
        ..EdmConfig::with_cluster(cluster)
    })
}

#[test]
fn identical_runs_are_byte_identical() {
    let p = CdfProfile::builtin("spark-sql").unwrap();
    let trace = gen_heavy_tailed(&p, NodeRoles::split(32), 0.8, 100.0, 256, 3).generate(SimTime::from_us(20));
    let limits = RunLimits::window(SimTime::from_us(20), SimTime::from_us(2_000));
    let a = sim(32).run(&trace.records, &limits);
    let b = sim(32).run(&trace.records, &limits);
    assert!(!a.completions.is_empty());
    assert_eq!(a.completion_csv(), b.completion_csv());
    assert_eq!(a.audit_csv, b.audit_csv);
    assert_eq!(a.util.as_ref().map(|u| u.to_csv()), b.util.as_ref().map(|u| u.to_csv()));
    assert_eq!(a.events, b.events);
}

#[test]
fn reads_from_a_failed_memory_node_return_null() {
    let mut cfg = EdmConfig::with_cluster(ClusterConfig {
        n_ports: 8,
        ..ClusterConfig::default()
    });
    cfg.failures = vec![(PortId::at(5), SimTime::ZERO)];
    let timeout = cfg.read_timeout;
    let rec = |t: u64, dst: usize, kind| TraceRecord {
        arrival: SimTime::from_ns(t),
        src: PortId::at(1),
        dst: PortId::at(dst),
        kind,
        size_bytes: 64,
    };
    let trace = vec![
        rec(0, 5, MessageKind::Rreq),
        rec(10, 6, MessageKind::Rreq),
        rec(20, 6, MessageKind::Wreq),
    ];
    let r = EdmSim::new(cfg).run(&trace, &RunLimits::unbounded());
    assert_eq!(r.incomplete, 0);
    let by_dst = |d: usize, k: MessageKind| r.completions.iter().find(|c| c.dst.index() == d && c.kind == k).unwrap();
    let dead = by_dst(5, MessageKind::Rreq);
    assert_eq!(dead.status, CompletionStatus::Null);
    assert_eq!(dead.bytes, 0);
    assert!(dead.latency() >= timeout);
    // Traffic to healthy nodes is unaffected.
    assert_eq!(by_dst(6, MessageKind::Rreq).status, CompletionStatus::Ok);
    assert_eq!(by_dst(6, MessageKind::Wreq).status, CompletionStatus::Ok);
    assert!(by_dst(6, MessageKind::Rreq).latency() < timeout);
}

#[test]
fn read_timer_never_fires_without_failures() {
    let trace = gen_all_to_all(NodeRoles::split(144), 0.9, 0.5, 64, 100.0, 256, 2).generate(SimTime::from_us(10));
    let r = sim(144).run(&trace.records, &RunLimits::window(SimTime::from_us(10), SimTime::from_us(1_000)));
    assert!(r.violations.is_empty(), "{:?}", r.violations);
    assert_eq!(r.incomplete, 0);
    assert!(r.completions.iter().all(|c| c.status == CompletionStatus::Ok));
}

fn arb_trace() -> impl Strategy<Value = Vec<TraceRecord>> {
    let kind = prop_oneof![Just(MessageKind::Rreq), Just(MessageKind::Wreq), Just(MessageKind::RmwReq)];
    prop::collection::vec((0u64..5_000, 0usize..4, 4usize..8, kind, 1u32..20_000), 1..40).prop_map(|mut v| {
        v.sort_by_key(|x| x.0);
        v.into_iter()
            .map(|(t, s, d, kind, size)| TraceRecord {
                arrival: SimTime::from_ns(t),
                src: PortId::at(s),
                dst: PortId::at(d),
                kind,
                size_bytes: if kind == MessageKind::RmwReq { 24 } else { size },
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// Every message completes with its full size, every granted byte is
    /// forwarded, and a pair's completions keep submission order.
    #[test]
    fn every_message_completes_once_and_in_pair_order(trace in arb_trace()) {
        let r = sim(8).run(&trace, &RunLimits::unbounded());
        prop_assert!(r.violations.is_empty(), "{:?}", r.violations);
        prop_assert_eq!(r.incomplete, 0);
        prop_assert_eq!(r.completions.len(), trace.len());
        let mut tags: Vec<u64> = r.completions.iter().map(|c| c.tag).collect();
        tags.sort_unstable();
        prop_assert!(tags.iter().enumerate().all(|(i, &t)| t == i as u64));
        for c in &r.completions {
            let rec = &trace[c.tag as usize];
            prop_assert_eq!(c.status, CompletionStatus::Ok);
            if rec.kind != MessageKind::RmwReq {
                prop_assert_eq!(c.bytes, rec.size_bytes);
            }
            prop_assert!(c.completed_at > c.submitted_at);
        }
        let audit = r.audit_csv.unwrap();
        for line in audit.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            prop_assert_eq!(f[2], f[4], "grants vs chunks: {}", line);
            prop_assert_eq!(f[3], f[5], "granted vs forwarded bytes: {}", line);
        }
        // Same (src, dst, kind) completes in submission order.
        for a in &r.completions {
            for b in &r.completions {
                let (ra, rb) = (&trace[a.tag as usize], &trace[b.tag as usize]);
                if ra.src == rb.src && ra.dst == rb.dst && ra.kind == rb.kind && a.tag < b.tag {
                    prop_assert!(a.completed_at <= b.completed_at, "{} {}", a.tag, b.tag);
                }
            }
        }
    }
}
