//! Credit-flow-controlled, input-queued switch in the style of a CXL
//! fabric. Data moves in 68-byte flits carrying 64 payload bytes. A host
//! may only send into its switch ingress buffer while it holds credits,
//! and each ingress is one FIFO: when the head waits for a busy egress,
//! everything behind it waits too, and the host runs out of credits.
//!
//! Credits return one hop after a unit leaves the ingress buffer. Hosts
//! drain their receive side at line rate, so egress credits never bind.

use std::collections::VecDeque;

use edm_core::engine::EventQueue;
use edm_core::fabric::{RunLimits, RunResult};
use edm_core::model::SimTime;
use edm_core::workloads::TraceRecord;

use crate::common::{legs, BaselineConfig, Counters, Ledger};

#[derive(Clone, Copy, Debug)]
struct Unit {
    msg: u32,
    src: u16,
    dst: u16,
    payload: u32,
    flits: u32,
    /// Response size to send once the request's last unit lands.
    then: Option<u32>,
    first: bool,
    last: bool,
}

#[derive(Debug)]
enum Ev {
    Submit(u32),
    HostTxDone(u16),
    AtIngress(Unit),
    HeadReady(u16),
    EgressDone(u16),
    Credit(u16, u32),
    AtHost(Unit),
}

struct Host {
    tx: VecDeque<Unit>,
    credits: u32,
    busy: bool,
}

struct Ingress {
    fifo: VecDeque<(Unit, SimTime)>,
}

struct Egress {
    busy: bool,
    /// Ingresses whose ready head targets this egress, served in order.
    waiting: VecDeque<u16>,
}

struct Cxl<'a> {
    cfg: &'a BaselineConfig,
    q: EventQueue<Ev>,
    hosts: Vec<Host>,
    ingress: Vec<Ingress>,
    egress: Vec<Egress>,
    ledger: Ledger,
    first_at: Vec<Option<SimTime>>,
    delivered: Vec<u64>,
    counters: Counters,
    violations: Vec<String>,
    wire_flits: u64,
}

impl<'a> Cxl<'a> {
    fn unit_time(&self, flits: u32) -> SimTime {
        self.cfg.wire_time(flits as u64 * self.cfg.cxl_flit_wire as u64)
    }

    fn enqueue_leg(&mut self, msg: u32, src: u16, dst: u16, size: u32, then: Option<u32>) {
        let per_unit = self.cfg.cxl_flit_payload * self.cfg.cxl_burst_flits;
        let n = size.div_ceil(per_unit).max(1);
        for k in 0..n {
            let payload = (size - k * per_unit).min(per_unit);
            let flits = payload.div_ceil(self.cfg.cxl_flit_payload).max(1);
            self.hosts[src as usize].tx.push_back(Unit {
                msg,
                src,
                dst,
                payload,
                flits,
                then,
                first: k == 0,
                last: k + 1 == n,
            });
        }
        self.try_tx(src);
    }

    fn try_tx(&mut self, h: u16) {
        let now = self.q.now();
        let hop = self.cfg.hop;
        let host = &mut self.hosts[h as usize];
        if host.busy {
            return;
        }
        let Some(u) = host.tx.front().copied() else { return };
        if host.credits < u.flits {
            return;
        }
        host.tx.pop_front();
        host.credits -= u.flits;
        host.busy = true;
        let end = now + self.unit_time(u.flits);
        self.wire_flits += u.flits as u64;
        self.q.schedule(end, Ev::HostTxDone(h));
        self.q.schedule(end + hop, Ev::AtIngress(u));
    }

    fn at_ingress(&mut self, u: Unit) {
        let ready = self.q.now() + self.cfg.cxl_switch_latency;
        let fifo = &mut self.ingress[u.src as usize].fifo;
        fifo.push_back((u, ready));
        if fifo.len() == 1 {
            self.q.schedule(ready, Ev::HeadReady(u.src));
        }
    }

    fn head_ready(&mut self, i: u16) {
        let (u, _) = self.ingress[i as usize].fifo[0];
        self.egress[u.dst as usize].waiting.push_back(i);
        self.try_egress(u.dst);
    }

    fn try_egress(&mut self, e: u16) {
        let now = self.q.now();
        if self.egress[e as usize].busy {
            return;
        }
        let Some(i) = self.egress[e as usize].waiting.pop_front() else {
            return;
        };
        let (u, _) = self.ingress[i as usize].fifo.pop_front().expect("registered head");
        self.egress[e as usize].busy = true;
        let end = now + self.unit_time(u.flits);
        self.wire_flits += u.flits as u64;
        self.q.schedule(end, Ev::EgressDone(e));
        self.q.schedule(end + self.cfg.hop, Ev::AtHost(u));
        self.q.schedule(now + self.cfg.hop, Ev::Credit(i, u.flits));
        if let Some(&(_, ready)) = self.ingress[i as usize].fifo.front() {
            self.q.schedule(ready.max(now), Ev::HeadReady(i));
        }
    }

    fn at_host(&mut self, u: Unit) {
        let now = self.q.now();
        if u.first {
            self.first_at[u.msg as usize] = Some(now);
        }
        self.delivered[u.msg as usize] += u.payload as u64;
        if !u.last {
            return;
        }
        let m = u.msg as usize;
        let r = &self.ledger.msgs[m];
        let (req, resp) = legs(self.cfg, r.kind, r.size_bytes);
        let expect = match (u.then, resp) {
            (Some(_), _) => req,
            (None, Some(s)) => s,
            (None, None) => req,
        };
        if self.delivered[m] != expect as u64 {
            self.violations.push(format!(
                "message {m} leg delivered {} of {expect} bytes",
                self.delivered[m]
            ));
        }
        self.counters.add("delivered_bytes", self.delivered[m] as f64);
        self.delivered[m] = 0;
        match u.then {
            Some(size) => self.enqueue_leg(u.msg, u.dst, u.src, size, None),
            None => {
                let first = self.first_at[m].unwrap_or(now);
                self.ledger.complete(m, now, first);
            }
        }
    }
}

pub fn run_cxl(cfg: &BaselineConfig, trace: &[TraceRecord], limits: &RunLimits) -> RunResult {
    let injected: Vec<TraceRecord> = trace
        .iter()
        .filter(|r| r.arrival <= limits.inject_until)
        .cloned()
        .collect();
    let n = cfg.n_ports;
    let mut sim = Cxl {
        cfg,
        q: EventQueue::new(),
        hosts: (0..n)
            .map(|_| Host {
                tx: VecDeque::new(),
                credits: cfg.cxl_ingress_credits,
                busy: false,
            })
            .collect(),
        ingress: (0..n).map(|_| Ingress { fifo: VecDeque::new() }).collect(),
        egress: (0..n)
            .map(|_| Egress {
                busy: false,
                waiting: VecDeque::new(),
            })
            .collect(),
        ledger: Ledger::new(&injected),
        first_at: vec![None; injected.len()],
        delivered: vec![0; injected.len()],
        counters: Counters::default(),
        violations: Vec::new(),
        wire_flits: 0,
    };
    for (i, r) in injected.iter().enumerate() {
        sim.q.schedule(r.arrival, Ev::Submit(i as u32));
    }
    while sim.ledger.completions.len() < injected.len() {
        let Some((_, ev)) = sim.q.pop_until(limits.hard_stop) else {
            break;
        };
        match ev {
            Ev::Submit(i) => {
                let r = &sim.ledger.msgs[i as usize];
                let (req, resp) = legs(cfg, r.kind, r.size_bytes);
                let (s, d) = (r.src.index() as u16, r.dst.index() as u16);
                sim.counters
                    .add("offered_bytes", (req + resp.unwrap_or(0)) as f64);
                sim.enqueue_leg(i, s, d, req, resp);
            }
            Ev::HostTxDone(h) => {
                sim.hosts[h as usize].busy = false;
                sim.try_tx(h);
            }
            Ev::AtIngress(u) => sim.at_ingress(u),
            Ev::HeadReady(i) => sim.head_ready(i),
            Ev::EgressDone(e) => {
                sim.egress[e as usize].busy = false;
                sim.try_egress(e);
            }
            Ev::Credit(h, k) => {
                sim.hosts[h as usize].credits += k;
                sim.try_tx(h);
            }
            Ev::AtHost(u) => sim.at_host(u),
        }
    }
    let mut counters = sim.counters.0.clone();
    counters.insert("wire_flits".into(), sim.wire_flits as f64);
    RunResult {
        fabric: "cxl".into(),
        submitted: injected.len(),
        incomplete: sim.ledger.incomplete(),
        completions: std::mem::take(&mut sim.ledger.completions),
        end_time: sim.q.now(),
        events: sim.q.dispatched(),
        counters,
        violations: sim.violations,
        ..RunResult::default()
    }
}
