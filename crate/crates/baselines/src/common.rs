//! Parameters, Ethernet framing and message bookkeeping shared by the
//! baseline fabrics.

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use edm_core::host::{Completion, CompletionStatus};
use edm_core::model::{LatencyProfile, MessageId, MessageKind, PortId, SimTime};
use edm_core::workloads::TraceRecord;

/// Knobs for every baseline. Defaults follow the published protocol
/// constants, scaled to 100 Gbps where the original is rate-specific.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineConfig {
    pub n_ports: usize,
    pub link_gbps: f64,
    /// PHY and propagation per link traversal; same as the EDM fabric.
    pub hop: SimTime,
    /// Fixed layer-2 pipeline delay of an Ethernet switch.
    pub switch_latency: SimTime,
    pub mss: u32,
    /// Ethernet + IP + transport headers and FCS.
    pub header_bytes: u32,
    pub min_frame: u32,
    /// Preamble, SFD and inter-frame gap.
    pub phy_gap_bytes: u32,
    /// Application bytes in a read request (address + length).
    pub rreq_bytes: u32,
    /// Per-egress data buffer for the lossy fabrics.
    pub buffer_bytes: u64,
    pub ecn_threshold_bytes: u64,
    pub rto: SimTime,
    pub init_cwnd_pkts: f64,
    /// DCTCP and DCQCN alpha gain.
    pub alpha_gain: f64,
    pub pfc_xoff_bytes: u64,
    pub pfc_xon_bytes: u64,
    pub cnp_interval: SimTime,
    pub dcqcn_timer: SimTime,
    pub dcqcn_fast_recovery_steps: u32,
    pub dcqcn_ai_gbps: f64,
    /// Granted but unreceived bytes a receiver may have outstanding;
    /// `None` uses one bandwidth-delay product.
    pub ird_outstanding_bytes: Option<u64>,
    /// Request and grant size on the wire for the central arbiter.
    pub arbiter_ctrl_wire_bytes: u32,
    pub cxl_flit_payload: u32,
    pub cxl_flit_wire: u32,
    /// Flits a host may have in its switch ingress buffer.
    pub cxl_ingress_credits: u32,
    /// Flits moved per scheduling decision.
    pub cxl_burst_flits: u32,
    pub cxl_switch_latency: SimTime,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            n_ports: 144,
            link_gbps: 100.0,
            hop: LatencyProfile::default().hop(),
            switch_latency: SimTime::from_ns(400),
            mss: 1460,
            header_bytes: 58,
            min_frame: 64,
            phy_gap_bytes: 20,
            rreq_bytes: 8,
            buffer_bytes: 200_000,
            ecn_threshold_bytes: 30_000,
            rto: SimTime::from_us(50),
            init_cwnd_pkts: 10.0,
            alpha_gain: 1.0 / 16.0,
            pfc_xoff_bytes: 40_000,
            pfc_xon_bytes: 20_000,
            cnp_interval: SimTime::from_us(50),
            dcqcn_timer: SimTime::from_us(55),
            dcqcn_fast_recovery_steps: 5,
            dcqcn_ai_gbps: 5.0,
            ird_outstanding_bytes: None,
            arbiter_ctrl_wire_bytes: 84,
            cxl_flit_payload: 64,
            cxl_flit_wire: 68,
            cxl_ingress_credits: 64,
            cxl_burst_flits: 4,
            cxl_switch_latency: SimTime::from_ns(100),
        }
    }
}

impl BaselineConfig {
    pub fn with_ports(n_ports: usize, link_gbps: f64) -> Self {
        BaselineConfig {
            n_ports,
            link_gbps,
            ..Self::default()
        }
    }

    pub fn wire_time(&self, bytes: u64) -> SimTime {
        SimTime::from_ps((bytes as f64 * 8_000.0 / self.link_gbps).round() as u64)
    }

    /// Bytes on the wire for one Ethernet frame carrying `payload`.
    pub fn frame_wire_bytes(&self, payload: u32) -> u32 {
        (payload + self.header_bytes).max(self.min_frame) + self.phy_gap_bytes
    }

    pub fn ctrl_wire_bytes(&self) -> u32 {
        self.frame_wire_bytes(0)
    }

    /// Round trip of a full-size frame out and a control frame back
    /// through one store-and-forward switch, in bytes at line rate.
    pub fn bdp_bytes(&self) -> u64 {
        let one_way = |wire: u32| (self.hop + self.switch_latency + self.hop) + self.wire_time(wire as u64) * 2;
        let rtt = one_way(self.frame_wire_bytes(self.mss)) + one_way(self.ctrl_wire_bytes());
        (rtt.ps() as f64 * self.link_gbps / 8_000.0).ceil() as u64
    }

    /// Packet payloads for a flow of `bytes`; a zero-byte flow still
    /// needs one packet.
    pub fn packet_sizes(&self, bytes: u32) -> Vec<u32> {
        if bytes == 0 {
            return vec![0];
        }
        let full = bytes / self.mss;
        let mut v = vec![self.mss; full as usize];
        if bytes % self.mss != 0 {
            v.push(bytes % self.mss);
        }
        v
    }
}

/// Application bytes on the request leg and the response leg. Writes have
/// no response leg: they complete when the memory node holds the data.
pub fn legs(cfg: &BaselineConfig, kind: MessageKind, size: u32) -> (u32, Option<u32>) {
    match kind {
        MessageKind::Rreq => (cfg.rreq_bytes, Some(size)),
        MessageKind::RmwReq => (16, Some(8)),
        MessageKind::Wreq | MessageKind::Rres => (size, None),
    }
}

/// Submitted messages and the completions recorded for them.
#[derive(Debug, Default)]
pub struct Ledger {
    pub msgs: Vec<TraceRecord>,
    pub done: Vec<bool>,
    pub completions: Vec<Completion>,
}

impl Ledger {
    pub fn new(trace: &[TraceRecord]) -> Self {
        Ledger {
            msgs: trace.to_vec(),
            done: vec![false; trace.len()],
            completions: Vec::new(),
        }
    }

    /// Records a completion once; later calls for the same message are
    /// ignored (retransmitted duplicates).
    pub fn complete(&mut self, idx: usize, at: SimTime, first_block_at: SimTime) {
        if self.done[idx] {
            return;
        }
        self.done[idx] = true;
        let r = &self.msgs[idx];
        self.completions.push(Completion {
            tag: idx as u64,
            kind: r.kind,
            src: r.src,
            dst: r.dst,
            id: MessageId((idx % 256) as u8),
            bytes: r.size_bytes,
            submitted_at: r.arrival,
            completed_at: at,
            first_block_at,
            status: CompletionStatus::Ok,
            value: None,
        });
    }

    pub fn incomplete(&self) -> usize {
        self.done.iter().filter(|d| !**d).count()
    }
}

/// Memoized lone-message completion times, filled by simulating one
/// message on an idle copy of the fabric.
#[derive(Debug, Default)]
pub struct IdealCache(Mutex<HashMap<(u8, u32), SimTime>>);

impl IdealCache {
    pub fn get_or(&self, kind: MessageKind, size: u32, f: impl FnOnce() -> SimTime) -> SimTime {
        let key = (kind.code(), size);
        if let Some(t) = self.0.lock().unwrap().get(&key) {
            return *t;
        }
        let t = f();
        self.0.lock().unwrap().insert(key, t);
        t
    }
}

/// A single-message trace between the first two ports, used for ideals.
pub fn lone_trace(kind: MessageKind, size: u32) -> Vec<TraceRecord> {
    vec![TraceRecord {
        arrival: SimTime::ZERO,
        src: PortId::at(0),
        dst: PortId::at(1),
        kind,
        size_bytes: size,
    }]
}

/// Byte counters every model keeps: offered application bytes and bytes
/// delivered to the completing host.
#[derive(Clone, Debug, Default)]
pub struct Counters(pub BTreeMap<String, f64>);

impl Counters {
    pub fn add(&mut self, k: &str, v: f64) {
        *self.0.entry(k.to_string()).or_insert(0.0) += v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ethernet_frame_sizes() {
        let c = BaselineConfig::default();
        assert_eq!(c.frame_wire_bytes(0), 84);
        assert_eq!(c.frame_wire_bytes(8), 86);
        assert_eq!(c.frame_wire_bytes(6), 84);
        assert_eq!(c.frame_wire_bytes(64), 142);
        assert_eq!(c.frame_wire_bytes(1460), 1538);
        assert_eq!(c.wire_time(84), SimTime(6_720));
    }

    #[test]
    fn packetization() {
        let c = BaselineConfig::default();
        assert_eq!(c.packet_sizes(0), vec![0]);
        assert_eq!(c.packet_sizes(64), vec![64]);
        assert_eq!(c.packet_sizes(3000), vec![1460, 1460, 80]);
        assert_eq!(c.packet_sizes(2920), vec![1460, 1460]);
    }
}
