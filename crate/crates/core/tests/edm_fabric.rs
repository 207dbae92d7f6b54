use edm_core::edm::{verify_table1, EdmConfig, EdmSim};
use edm_core::fabric::{FabricModel, RunLimits};
use edm_core::host::CompletionStatus;
use edm_core::model::{ClusterConfig, LatencyProfile, MessageKind, PortId, SimTime};
use edm_core::workloads::TraceRecord;

fn lone(kind: MessageKind, size: u32) -> Vec<TraceRecord> {
    vec![TraceRecord {
        arrival: SimTime::from_ns(5),
        src: PortId::at(0),
        dst: PortId::at(72),
        kind,
        size_bytes: size,
    }]
}

#[test]
fn table1_head_latencies_are_exact() {
    let t = verify_table1(&ClusterConfig::default());
    assert_eq!(t.read, SimTime::from_ps(299_520));
    assert_eq!(t.write, SimTime::from_ps(296_960));
    assert!(t.passes());
}

#[test]
fn table1_totals_match_row_sums() {
    let l = LatencyProfile::default();
    assert_eq!(l.table_read_total(), SimTime::from_ps(299_520));
    assert_eq!(l.table_write_total(), SimTime::from_ps(296_960));
}

#[test]
fn analytic_ideal_matches_a_lone_message() {
    for dram in [0, 60_000] {
        let mut cfg = EdmConfig::default();
        cfg.cluster.latency.dram_ps = dram;
        let mut sim = EdmSim::new(cfg);
        for kind in [MessageKind::Rreq, MessageKind::Wreq] {
            for size in [1, 8, 64, 255, 256, 257, 1000, 4096, 65_535] {
                let r = sim.run(&lone(kind, size), &RunLimits::unbounded());
                assert!(r.violations.is_empty(), "{:?}", r.violations);
                let c = r.completions[0];
                assert_eq!(c.status, CompletionStatus::Ok);
                assert_eq!(
                    c.latency(),
                    sim.ideal_completion(kind, size),
                    "{kind:?} {size} B dram {dram}"
                );
            }
        }
    }
}

#[test]
fn cas_round_trip() {
    let mut sim = EdmSim::new(EdmConfig::default());
    let r = sim.run(&lone(MessageKind::RmwReq, 24), &RunLimits::unbounded());
    let c = r.completions[0];
    assert_eq!(c.value, Some(1));
    assert_eq!(c.latency(), sim.ideal_completion(MessageKind::RmwReq, 24));
}

#[test]
fn persistent_message_keeps_links_full() {
    let mut cfg = EdmConfig::default();
    cfg.cluster.n_ports = 4;
    cfg.roles = edm_core::workloads::NodeRoles::split(4);
    let mut sim = EdmSim::new(cfg);
    let trace = vec![TraceRecord {
        arrival: SimTime::ZERO,
        src: PortId::at(0),
        dst: PortId::at(2),
        kind: MessageKind::Wreq,
        size_bytes: 65_535,
    }];
    let r = sim.run(&trace, &RunLimits::unbounded());
    assert_eq!(r.completions.len(), 1);
    let up = r.uplinks[0].data_occupancy(r.slot).unwrap();
    let down = r.downlinks[2].data_occupancy(r.slot).unwrap();
    assert!(up >= 0.99 && down >= 0.99, "{up} {down}");
}
