//! Matching, maximality and grant accounting of the scheduler against
//! independent oracles built from the demand the test itself submitted.

use std::collections::{BTreeMap, BTreeSet};

use edm_core::model::{
    control_overhead_fraction, ClusterConfig, MessageId, NotificationRecord, PortId,
    PriorityPolicy, SimTime,
};
use edm_core::phy::{mac_framing_overhead, MacAccounting};
use edm_core::scheduler::{min_chunk_size, Scheduler};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scheduler(n: usize, policy: PriorityPolicy) -> Scheduler {
    let c = ClusterConfig {
        n_ports: n,
        priority_policy: policy,
        ..ClusterConfig::default()
    };
    Scheduler::for_cluster(&c)
}

/// (src, dst, bytes) demand with at most 3 messages per ordered pair.
fn demand(max_n: usize) -> impl Strategy<Value = (usize, Vec<(usize, usize, u32)>, bool)> {
    (2..=max_n).prop_flat_map(|n| {
        let msg = (0..n, 0..n, 1u32..2_000);
        (
            Just(n),
            prop::collection::vec(msg, 0..24).prop_map(|v| {
                let mut per_pair: BTreeMap<(usize, usize), u32> = BTreeMap::new();
                v.into_iter()
                    .filter(|(s, d, _)| s != d)
                    .filter(|(s, d, _)| {
                        let c = per_pair.entry((*s, *d)).or_default();
                        *c += 1;
                        *c <= 3
                    })
                    .collect()
            }),
            any::<bool>(),
        )
    })
}

fn submit(s: &mut Scheduler, msgs: &[(usize, usize, u32)]) -> Vec<(usize, usize, u8, u32)> {
    let mut next_id: BTreeMap<(usize, usize), u8> = BTreeMap::new();
    let mut out = Vec::new();
    for &(a, b, bytes) in msgs {
        let id = next_id.entry((a, b)).or_default();
        let rec = NotificationRecord::explicit(PortId::at(a), PortId::at(b), MessageId(*id), bytes, SimTime(0));
        s.on_notification(rec, SimTime(0)).expect("within limits");
        out.push((a, b, *id, bytes));
        *id += 1;
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    /// First round on fresh demand: the grants form a matching, and no
    /// demanded pair has both endpoints left unmatched.
    #[test]
    fn round_is_a_maximal_matching((n, msgs, srpt) in demand(8)) {
        let policy = if srpt { PriorityPolicy::Srpt } else { PriorityPolicy::Fcfs };
        let mut s = scheduler(n, policy);
        submit(&mut s, &msgs);
        let out = s.run_matching_round(SimTime(0));
        let mut srcs = BTreeSet::new();
        let mut dsts = BTreeSet::new();
        for g in &out.grants {
            prop_assert!(srcs.insert(g.src.index()), "source matched twice");
            prop_assert!(dsts.insert(g.dst.index()), "destination matched twice");
            prop_assert!(msgs.iter().any(|m| m.0 == g.src.index() && m.1 == g.dst.index()));
        }
        for &(a, b, _) in &msgs {
            prop_assert!(srcs.contains(&a) || dsts.contains(&b), "({a},{b}) left free on both ends");
        }
        prop_assert!(s.is_maximal());
    }

    /// Draining all demand round by round grants every byte exactly once,
    /// in offset order, and finishes a pair's messages in submission order.
    #[test]
    fn grants_conserve_bytes_in_order((n, msgs, srpt) in demand(8)) {
        let policy = if srpt { PriorityPolicy::Srpt } else { PriorityPolicy::Fcfs };
        let mut s = scheduler(n, policy);
        let submitted = submit(&mut s, &msgs);
        let mut next_off: BTreeMap<(usize, usize, u8), u32> = BTreeMap::new();
        let mut finished: BTreeMap<(usize, usize), Vec<u8>> = BTreeMap::new();
        let mut now = SimTime(0);
        for _ in 0..100_000 {
            if s.is_idle() {
                break;
            }
            let out = s.run_matching_round(now);
            for g in &out.grants {
                let key = (g.src.index(), g.dst.index(), g.id.0);
                let off = next_off.entry(key).or_default();
                prop_assert_eq!(g.offset, *off, "grant out of offset order");
                *off += g.len;
                if g.completes_record {
                    prop_assert_eq!(*off, g.total);
                    finished.entry((key.0, key.1)).or_default().push(key.2);
                }
            }
            now = now + SimTime::from_ns(10);
            for g in &out.grants {
                s.release_endpoints(g.src, g.dst, now);
            }
        }
        prop_assert!(s.is_idle());
        for (a, b, id, bytes) in submitted {
            prop_assert_eq!(next_off.get(&(a, b, id)).copied(), Some(bytes));
        }
        for ids in finished.values() {
            prop_assert!(ids.windows(2).all(|w| w[0] < w[1]), "pair order {ids:?}");
        }
    }
}

#[test]
fn iterations_concentrate_around_log2_n() {
    // Every source has one message to every destination, sizes uniform;
    // counts include the final iteration that finds nothing to match.
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for n in [16usize, 64, 256] {
        let trials = 1_000;
        let mut total = 0u64;
        for _ in 0..trials {
            let mut s = scheduler(n, PriorityPolicy::Srpt);
            for a in 0..n {
                for b in (0..n).filter(|&b| b != a) {
                    let rec = NotificationRecord::explicit(
                        PortId::at(a),
                        PortId::at(b),
                        MessageId(0),
                        rng.gen_range(1..=65_535),
                        SimTime(0),
                    );
                    s.on_notification(rec, SimTime(0)).unwrap();
                }
            }
            total += s.run_matching_round(SimTime(0)).iterations as u64;
        }
        let mean = total as f64 / trials as f64;
        let log = (n as f64).log2();
        println!("N = {n}: mean iterations {mean:.3}, log2 N = {log}");
        assert!((mean - log).abs() <= 1.0, "N = {n}: {mean}");
    }
}

#[test]
fn chunk_size_rule() {
    assert_eq!(min_chunk_size(512, 3.0, 100.0), 128);
    // Oracle: 3*log2(N) cycles at R GHz, bits at B Gbps, rounded up to a
    // power of two.
    for (n, r, b) in [(144usize, 3.0, 100.0), (64, 1.0, 400.0), (512, 3.0, 100.0)] {
        let bytes = 3.0 * (n as f64).log2() / r * b / 8.0;
        let want = (bytes.ceil() as u32).next_power_of_two();
        assert_eq!(min_chunk_size(n, r, b), want, "{n} {r} {b}");
    }
}

#[test]
fn overhead_bounds() {
    assert!(control_overhead_fraction(64) <= 0.06, "{}", control_overhead_fraction(64));
    assert_eq!(mac_framing_overhead(8, MacAccounting::FrameOnly), 0.875);
    let ifg = mac_framing_overhead(64, MacAccounting::IfgOnly);
    assert!((ifg - 0.16).abs() <= 0.005, "{ifg}");
}
