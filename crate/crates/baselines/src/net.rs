//! Output-queued Ethernet network shared by the packet baselines: one
//! store-and-forward switch, a host uplink and downlink per port, and a
//! transport plugged in through [`Transport`].
//!
//! Every port has a strict-priority control lane (ACK, grant, CNP,
//! request) ahead of its data lane. Control packets are never dropped or
//! paused.

use std::collections::{BTreeMap, VecDeque};

use edm_core::engine::EventQueue;
use edm_core::fabric::{RunLimits, RunResult};
use edm_core::model::SimTime;
use edm_core::workloads::TraceRecord;

use crate::common::{BaselineConfig, Counters, Ledger};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PktKind {
    Data,
    Ack,
    Grant,
    Request,
    Cnp,
}

#[derive(Clone, Copy, Debug)]
pub struct Packet {
    pub kind: PktKind,
    pub flow: u32,
    pub seq: u32,
    pub src: u16,
    pub dst: u16,
    pub payload: u32,
    pub wire: u32,
    /// Lower dequeues first under [`Discipline::Rank`].
    pub rank: u64,
    pub ecn: bool,
    /// Transport-defined field (cumulative ACK, allocated start time).
    pub aux: u64,
    ingress: u16,
}

impl Packet {
    pub fn new(kind: PktKind, flow: u32, seq: u32, src: u16, dst: u16, payload: u32, wire: u32) -> Self {
        Packet {
            kind,
            flow,
            seq,
            src,
            dst,
            payload,
            wire,
            rank: 0,
            ecn: false,
            aux: 0,
            ingress: src,
        }
    }

    pub fn is_ctrl(&self) -> bool {
        self.kind != PktKind::Data
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Discipline {
    Fifo,
    /// Lowest rank first, FIFO among equal ranks.
    Rank,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DropPolicy {
    Tail,
    /// Drop the worst-ranked packet (the arrival on ties).
    WorstRank,
    /// Unbounded buffer with PFC pause at per-ingress thresholds.
    Lossless,
    /// Unbounded buffer; the transport keeps queues short.
    Unbounded,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SwitchPolicy {
    pub discipline: Discipline,
    pub drop: DropPolicy,
    pub ecn: bool,
}

#[derive(Debug)]
enum PktQueue {
    Fifo(VecDeque<Packet>),
    Rank(BTreeMap<(u64, u64), Packet>, u64),
}

impl PktQueue {
    fn new(d: Discipline) -> Self {
        match d {
            Discipline::Fifo => PktQueue::Fifo(VecDeque::new()),
            Discipline::Rank => PktQueue::Rank(BTreeMap::new(), 0),
        }
    }

    fn push(&mut self, p: Packet) {
        match self {
            PktQueue::Fifo(q) => q.push_back(p),
            PktQueue::Rank(m, n) => {
                m.insert((p.rank, *n), p);
                *n += 1;
            }
        }
    }

    fn pop(&mut self) -> Option<Packet> {
        match self {
            PktQueue::Fifo(q) => q.pop_front(),
            PktQueue::Rank(m, _) => m.pop_first().map(|(_, p)| p),
        }
    }

    fn worst_rank(&self) -> Option<u64> {
        match self {
            PktQueue::Fifo(q) => q.back().map(|p| p.rank),
            PktQueue::Rank(m, _) => m.last_key_value().map(|(k, _)| k.0),
        }
    }

    fn pop_worst(&mut self) -> Option<Packet> {
        match self {
            PktQueue::Fifo(q) => q.pop_back(),
            PktQueue::Rank(m, _) => m.pop_last().map(|(_, p)| p),
        }
    }
}

#[derive(Debug)]
struct Port {
    ctrl: VecDeque<Packet>,
    data: PktQueue,
    data_bytes: u64,
    busy: bool,
    paused: bool,
    wire_bytes: u64,
}

impl Port {
    fn new(d: Discipline) -> Self {
        Port {
            ctrl: VecDeque::new(),
            data: PktQueue::new(d),
            data_bytes: 0,
            busy: false,
            paused: false,
            wire_bytes: 0,
        }
    }

    fn next(&mut self) -> Option<Packet> {
        if let Some(p) = self.ctrl.pop_front() {
            return Some(p);
        }
        if self.paused {
            return None;
        }
        let p = self.data.pop()?;
        self.data_bytes -= p.wire as u64;
        Some(p)
    }
}

#[derive(Debug)]
enum NetEv {
    Submit(u32),
    UpDone(u16),
    AtSwitch(Packet),
    DownDone(u16),
    AtHost(Packet),
    Timer(u64),
    Pause(u16, bool),
}

/// Per-event hooks of a packet transport.
pub trait Transport {
    fn on_message_submitted(&mut self, net: &mut Net, idx: usize);
    fn on_packet_arrival(&mut self, net: &mut Net, pkt: Packet);
    fn on_timer(&mut self, net: &mut Net, token: u64);
}

pub struct Net {
    pub cfg: BaselineConfig,
    pub policy: SwitchPolicy,
    q: EventQueue<NetEv>,
    up: Vec<Port>,
    down: Vec<Port>,
    ingress_bytes: Vec<u64>,
    pfc_paused: Vec<bool>,
    pub ledger: Ledger,
    pub counters: Counters,
    pub violations: Vec<String>,
}

impl Net {
    /// `ports` may exceed `cfg.n_ports` for an attached arbiter.
    fn new(cfg: &BaselineConfig, policy: SwitchPolicy, ports: usize, trace: &[TraceRecord]) -> Self {
        Net {
            cfg: cfg.clone(),
            policy,
            q: EventQueue::new(),
            up: (0..ports).map(|_| Port::new(policy.discipline)).collect(),
            down: (0..ports).map(|_| Port::new(policy.discipline)).collect(),
            ingress_bytes: vec![0; ports],
            pfc_paused: vec![false; ports],
            ledger: Ledger::new(trace),
            counters: Counters::default(),
            violations: Vec::new(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.q.now()
    }

    pub fn timer(&mut self, at: SimTime, token: u64) {
        self.q.schedule(at.max(self.now()), NetEv::Timer(token));
    }

    /// Hands a packet to the NIC of `host`.
    pub fn send(&mut self, host: u16, mut p: Packet) {
        p.ingress = host;
        let port = &mut self.up[host as usize];
        if p.is_ctrl() {
            port.ctrl.push_back(p);
        } else {
            port.data_bytes += p.wire as u64;
            port.data.push(p);
        }
        self.kick_up(host);
    }

    /// True while a host NIC is sending or has data queued.
    pub fn nic_busy(&self, host: u16) -> bool {
        let p = &self.up[host as usize];
        p.busy || p.data_bytes > 0
    }

    fn kick_up(&mut self, h: u16) {
        let port = &mut self.up[h as usize];
        if port.busy {
            return;
        }
        let Some(p) = port.next() else { return };
        port.busy = true;
        port.wire_bytes += p.wire as u64;
        let end = self.q.now() + self.cfg.wire_time(p.wire as u64);
        self.q.schedule(end, NetEv::UpDone(h));
        self.q
            .schedule(end + self.cfg.hop + self.cfg.switch_latency, NetEv::AtSwitch(p));
    }

    fn kick_down(&mut self, e: u16) {
        let port = &mut self.down[e as usize];
        if port.busy {
            return;
        }
        let Some(p) = port.next() else { return };
        port.busy = true;
        port.wire_bytes += p.wire as u64;
        let now = self.q.now();
        let end = now + self.cfg.wire_time(p.wire as u64);
        self.q.schedule(end, NetEv::DownDone(e));
        self.q.schedule(end + self.cfg.hop, NetEv::AtHost(p));
        if !p.is_ctrl() && self.policy.drop == DropPolicy::Lossless {
            let i = p.ingress as usize;
            self.ingress_bytes[i] -= p.wire as u64;
            if self.pfc_paused[i] && self.ingress_bytes[i] <= self.cfg.pfc_xon_bytes {
                self.pfc_paused[i] = false;
                self.q.schedule(now + self.cfg.hop, NetEv::Pause(i as u16, false));
            }
        }
    }

    fn at_switch(&mut self, mut p: Packet) {
        let e = p.dst as usize;
        if p.is_ctrl() {
            self.down[e].ctrl.push_back(p);
            self.kick_down(e as u16);
            return;
        }
        let cap = self.cfg.buffer_bytes;
        let queued = self.down[e].data_bytes;
        if self.policy.ecn && queued > self.cfg.ecn_threshold_bytes {
            p.ecn = true;
            self.counters.add("ecn_marks", 1.0);
        }
        let peak = self.counters.0.entry("max_egress_queue_bytes".into()).or_insert(0.0);
        *peak = peak.max((queued + p.wire as u64) as f64);
        match self.policy.drop {
            DropPolicy::Tail => {
                if queued + p.wire as u64 > cap {
                    self.counters.add("drops", 1.0);
                    return;
                }
            }
            DropPolicy::WorstRank => {
                let port = &mut self.down[e];
                while port.data_bytes + p.wire as u64 > cap {
                    match port.data.worst_rank() {
                        Some(w) if w > p.rank => {
                            let v = port.data.pop_worst().expect("non-empty");
                            port.data_bytes -= v.wire as u64;
                            self.counters.add("drops", 1.0);
                        }
                        _ => {
                            self.counters.add("drops", 1.0);
                            return;
                        }
                    }
                }
            }
            DropPolicy::Lossless => {
                let i = p.ingress as usize;
                self.ingress_bytes[i] += p.wire as u64;
                if !self.pfc_paused[i] && self.ingress_bytes[i] > self.cfg.pfc_xoff_bytes {
                    self.pfc_paused[i] = true;
                    self.counters.add("pauses", 1.0);
                    self.q.schedule(self.q.now() + self.cfg.hop, NetEv::Pause(i as u16, true));
                }
            }
            DropPolicy::Unbounded => {}
        }
        let port = &mut self.down[e];
        port.data_bytes += p.wire as u64;
        port.data.push(p);
        self.kick_down(e as u16);
    }

    fn all_done(&self) -> bool {
        self.ledger.completions.len() == self.ledger.msgs.len()
    }
}

/// Replays `trace` on a fresh network. Records past `inject_until` are
/// not submitted; the run stops once every submitted message completes.
pub fn run_net<T: Transport>(
    name: &str,
    cfg: &BaselineConfig,
    policy: SwitchPolicy,
    ports: usize,
    trace: &[TraceRecord],
    limits: &RunLimits,
    t: &mut T,
) -> RunResult {
    let injected: Vec<TraceRecord> = trace
        .iter()
        .filter(|r| r.arrival <= limits.inject_until)
        .cloned()
        .collect();
    let mut net = Net::new(cfg, policy, ports, &injected);
    for (i, r) in injected.iter().enumerate() {
        net.q.schedule(r.arrival, NetEv::Submit(i as u32));
    }
    while !net.all_done() {
        let Some((_, ev)) = net.q.pop_until(limits.hard_stop) else {
            break;
        };
        match ev {
            NetEv::Submit(i) => {
                let r = &net.ledger.msgs[i as usize];
                let legs = crate::common::legs(cfg, r.kind, r.size_bytes);
                net.counters
                    .add("offered_bytes", (legs.0 + legs.1.unwrap_or(0)) as f64);
                t.on_message_submitted(&mut net, i as usize);
            }
            NetEv::UpDone(h) => {
                net.up[h as usize].busy = false;
                net.kick_up(h);
            }
            NetEv::AtSwitch(p) => net.at_switch(p),
            NetEv::DownDone(e) => {
                net.down[e as usize].busy = false;
                net.kick_down(e);
            }
            NetEv::AtHost(p) => t.on_packet_arrival(&mut net, p),
            NetEv::Timer(tok) => t.on_timer(&mut net, tok),
            NetEv::Pause(h, on) => {
                net.up[h as usize].paused = on;
                if !on {
                    net.kick_up(h);
                }
            }
        }
    }
    let end = net.q.now();
    let span = end.ps().max(1) as f64;
    let util = |ports: &[Port]| {
        let n = cfg.n_ports.min(ports.len()).max(1);
        ports[..n]
            .iter()
            .map(|p| cfg.wire_time(p.wire_bytes).ps() as f64 / span)
            .sum::<f64>()
            / n as f64
    };
    let mut counters = net.counters.0.clone();
    counters.insert("mean_uplink_util".into(), util(&net.up));
    counters.insert("mean_downlink_util".into(), util(&net.down));
    RunResult {
        fabric: name.to_string(),
        submitted: injected.len(),
        incomplete: net.ledger.incomplete(),
        completions: std::mem::take(&mut net.ledger.completions),
        end_time: end,
        events: net.q.dispatched(),
        counters,
        violations: net.violations,
        ..RunResult::default()
    }
}
