//! Event-driven model of an EDM cluster: hosts, one switch with the
//! in-network scheduler, and slot-quantized links in both directions.

use std::collections::BTreeMap;

use log::debug;

use crate::engine::{EventQueue, Link, RunId, TxPort};
use crate::fabric::{FabricModel, RunLimits, RunResult, UtilSummary};
use crate::host::{
    Completion, DataChunk, FlowSignal, Host, HostConfig, SubmitRequest, TimeoutArm, TxControl,
};
use crate::model::{
    BufferedRequest, ClusterConfig, MessageId, MessageKind, NotificationRecord, PortId, RmwArgs,
    SimTime,
};
use crate::phy::memory_block_count;
use crate::scheduler::{GrantKind, Scheduler};
use crate::switch::{Binding, CircuitMap, GrantAudit};
use crate::workloads::{derived_address, write_uplink_blocks, NodeRoles, TraceRecord};

#[derive(Clone, Debug, PartialEq)]
pub struct EdmConfig {
    pub cluster: ClusterConfig,
    pub roles: NodeRoles,
    pub read_timeout: SimTime,
    /// PAUSE threshold; `None` uses two bandwidth-delay products.
    pub rx_thres_bytes: Option<u64>,
    /// Receive-side application drain; `None` never pauses.
    pub rx_drain_gbps: Option<f64>,
    pub address_seed: u64,
    /// Every request targets this address instead of a derived one.
    pub fixed_address: Option<u64>,
    pub memory_capacity_bytes: u64,
    pub scheduler_log: bool,
    pub util_bucket: Option<SimTime>,
    /// Hosts that stop responding at the given time.
    pub failures: Vec<(PortId, SimTime)>,
}

impl Default for EdmConfig {
    fn default() -> Self {
        let cluster = ClusterConfig::default();
        EdmConfig {
            roles: NodeRoles::split(cluster.n_ports),
            cluster,
            read_timeout: SimTime::from_us(10),
            rx_thres_bytes: None,
            rx_drain_gbps: None,
            address_seed: 0,
            fixed_address: None,
            memory_capacity_bytes: 64 << 30,
            scheduler_log: false,
            util_bucket: None,
            failures: Vec::new(),
        }
    }
}

impl EdmConfig {
    pub fn with_cluster(cluster: ClusterConfig) -> Self {
        EdmConfig {
            roles: NodeRoles::split(cluster.n_ports),
            cluster,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum CtrlUnit {
    Notify {
        src: PortId,
        dst: PortId,
        id: MessageId,
        size: u32,
    },
    Request(BufferedRequest),
    Pause(PortId),
    Resume(PortId),
    Grant {
        peer: PortId,
        id: MessageId,
        offset: u32,
        len: u32,
        kind: MessageKind,
    },
    Forward {
        req: BufferedRequest,
        first_len: u32,
    },
}

impl CtrlUnit {
    fn blocks(&self) -> u64 {
        match self {
            CtrlUnit::Request(r) | CtrlUnit::Forward { req: r, .. } => r.block_count as u64,
            _ => 1,
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Ev {
    Submit(u32),
    Dequeue(u16),
    HostCtrlTx { host: u16, unit: CtrlUnit },
    /// Control unit classified at the switch.
    SwitchCtrl { ingress: u16, unit: CtrlUnit },
    MatchRound,
    Release { s: u16, d: u16 },
    /// Deferred release of an egress whose data was pushed back by control.
    ReleaseDst(u16),
    SwitchCtrlTx { egress: u16, unit: CtrlUnit },
    HostCtrlRx { host: u16, unit: CtrlUnit },
    HostDataTx { host: u16, chunk: DataChunk },
    SwitchDataRx { ingress: u16, run: RunId, chunk: DataChunk },
    HostDataRx { host: u16, run: RunId, chunk: DataChunk },
    ReadTimeout { host: u16, arm: TimeoutArm },
    GaugePoll(u16),
}

/// One EDM cluster simulation.
pub struct EdmSim {
    cfg: EdmConfig,
}

impl EdmSim {
    pub fn new(cfg: EdmConfig) -> Self {
        EdmSim { cfg }
    }

    pub fn config(&self) -> &EdmConfig {
        &self.cfg
    }

    /// Unloaded completion time of one message, from submission to the last
    /// block processed at the completing host.
    pub fn ideal_with_addr(&self, kind: MessageKind, size: u32, addr: u64) -> SimTime {
        let c = &self.cfg.cluster;
        let l = &c.latency;
        let slot = c.slot();
        let hops = l.hop() * 4;
        match kind {
            MessageKind::Wreq => {
                let data = write_uplink_blocks(size, c.chunk_bytes) - 1;
                l.cycles(l.ntf_gen)
                    + l.switch_grant_path()
                    + l.host_grant_to_data()
                    + l.switch_data_path()
                    + l.cycles(l.mdata_rx_proc)
                    + hops
                    + slot * (data - 1)
            }
            _ => {
                let (k, resp) = match kind {
                    MessageKind::RmwReq => {
                        let op = RmwArgs::Cas {
                            expected: 0,
                            new: 0,
                        }
                        .opcode();
                        (
                            memory_block_count(MessageKind::RmwReq, op.arg_bytes(), op.code() as u64),
                            op.result_bytes(),
                        )
                    }
                    _ => (memory_block_count(MessageKind::Rreq, 0, addr), size),
                };
                let data = response_blocks(resp, c.chunk_bytes);
                l.cycles(l.ntf_gen)
                    + l.switch_grant_path()
                    + l.host_rreq_to_data()
                    + l.dram()
                    + l.switch_data_path()
                    + l.cycles(l.mdata_rx_proc)
                    + hops
                    + slot * (k - 1)
                    + slot * (data - 1)
            }
        }
    }
}

/// Blocks of all RRES chunks for `bytes` of response data.
fn response_blocks(bytes: u32, chunk: u32) -> u64 {
    if bytes <= 1 {
        return 1;
    }
    write_uplink_blocks(bytes, chunk) - 1
}

impl FabricModel for EdmSim {
    fn name(&self) -> &'static str {
        "edm"
    }

    /// Reads are assumed to target an address above 4 KiB.
    fn ideal_completion(&self, kind: MessageKind, size: u32) -> SimTime {
        self.ideal_with_addr(kind, size, 1 << 12)
    }

    fn run(&mut self, trace: &[TraceRecord], limits: &RunLimits) -> RunResult {
        let mut w = World::new(&self.cfg, trace);
        w.run(limits);
        w.finish()
    }
}

struct World<'a> {
    cfg: &'a EdmConfig,
    trace: &'a [TraceRecord],
    q: EventQueue<Ev>,
    hosts: Vec<Host>,
    uplinks: Vec<TxPort>,
    downlinks: Vec<TxPort>,
    sched: Scheduler,
    circuits: CircuitMap,
    audit: GrantAudit,
    dequeue_pending: Vec<bool>,
    round_pending: bool,
    /// Data time on each egress displaced by switch-generated control
    /// blocks, not yet added to a reservation.
    egress_debt: Vec<SimTime>,
    gauge_poll_at: Vec<Option<SimTime>>,
    failed_at: Vec<Option<SimTime>>,
    completions: Vec<Completion>,
    violations: Vec<String>,
    submitted: usize,
    counters: BTreeMap<String, f64>,
}

impl<'a> World<'a> {
    fn new(cfg: &'a EdmConfig, trace: &'a [TraceRecord]) -> Self {
        let c = &cfg.cluster;
        let n = c.n_ports;
        let link = Link {
            slot: c.slot(),
            latency: c.latency.hop(),
        };
        let thres = cfg.rx_thres_bytes.unwrap_or(2 * c.bdp_bytes());
        let hosts = (0..n)
            .map(|i| {
                Host::new(HostConfig {
                    port: PortId::at(i),
                    n_ports: n,
                    max_active: c.max_active_notifications,
                    latency: c.latency.clone(),
                    read_timeout: cfg.read_timeout,
                    rx_thres_bytes: thres,
                    rx_drain_gbps: cfg.rx_drain_gbps,
                })
            })
            .collect();
        let mk = || {
            let mut p = TxPort::new(link);
            if let Some(b) = cfg.util_bucket {
                p.track_utilization(b);
            }
            p
        };
        let mut sched = Scheduler::for_cluster(c);
        if cfg.scheduler_log {
            sched.enable_log();
        }
        let mut failed_at = vec![None; n];
        for &(p, t) in &cfg.failures {
            failed_at[p.index()] = Some(t);
        }
        World {
            cfg,
            trace,
            q: EventQueue::new(),
            hosts,
            uplinks: (0..n).map(|_| mk()).collect(),
            downlinks: (0..n).map(|_| mk()).collect(),
            sched,
            circuits: CircuitMap::new(n),
            audit: GrantAudit::default(),
            dequeue_pending: vec![false; n],
            round_pending: false,
            egress_debt: vec![SimTime::ZERO; n],
            gauge_poll_at: vec![None; n],
            failed_at,
            completions: Vec::new(),
            violations: Vec::new(),
            submitted: 0,
            counters: BTreeMap::new(),
        }
    }

    fn cyc(&self, n: u64) -> SimTime {
        self.cfg.cluster.latency.cycles(n)
    }

    fn slot(&self) -> SimTime {
        self.cfg.cluster.slot()
    }

    fn hop(&self) -> SimTime {
        self.cfg.cluster.latency.hop()
    }

    fn dead(&self, host: usize, now: SimTime) -> bool {
        self.failed_at[host].is_some_and(|t| now >= t)
    }

    fn violation(&mut self, now: SimTime, msg: String) {
        debug!("violation at {now}: {msg}");
        if self.violations.len() < 100 {
            self.violations.push(format!("{}: {msg}", now.ps()));
        }
    }

    fn run(&mut self, limits: &RunLimits) {
        // Submissions are fed lazily so the queue stays small.
        if !self.trace.is_empty() && self.trace[0].arrival < limits.inject_until {
            self.q.schedule(self.trace[0].arrival, Ev::Submit(0));
        }
        while let Some((now, ev)) = self.q.pop_until(limits.hard_stop) {
            self.dispatch(now, ev, limits);
        }
    }

    fn dispatch(&mut self, now: SimTime, ev: Ev, limits: &RunLimits) {
        match ev {
            Ev::Submit(i) => self.on_submit(now, i as usize, limits),
            Ev::Dequeue(h) => self.on_dequeue(now, h as usize),
            Ev::HostCtrlTx { host, unit } => {
                if self.dead(host as usize, now) {
                    return;
                }
                let start = self.uplinks[host as usize].send_ctrl(now, unit.blocks());
                let at = start + self.hop() + self.cyc(self.cfg.cluster.latency.classify);
                self.q.schedule(at, Ev::SwitchCtrl { ingress: host, unit });
            }
            Ev::SwitchCtrl { ingress, unit } => self.on_switch_ctrl(now, ingress as usize, unit),
            Ev::MatchRound => self.on_round(now),
            Ev::Release { s, d } => {
                let (sp, dp) = (PortId::at(s as usize), PortId::at(d as usize));
                let debt = std::mem::take(&mut self.egress_debt[d as usize]);
                if debt == SimTime::ZERO {
                    self.sched.release_endpoints(sp, dp, now);
                } else {
                    self.sched.release_src(sp);
                    self.q.schedule(now + debt, Ev::ReleaseDst(d));
                }
                self.request_round();
            }
            Ev::ReleaseDst(d) => {
                let debt = std::mem::take(&mut self.egress_debt[d as usize]);
                if debt == SimTime::ZERO {
                    self.sched.release_dst(PortId::at(d as usize));
                    self.request_round();
                } else {
                    self.q.schedule(now + debt, Ev::ReleaseDst(d));
                }
            }
            Ev::SwitchCtrlTx { egress, unit } => {
                let slot = self.slot();
                let port = &mut self.downlinks[egress as usize];
                let stolen = port.stats().stolen_slots;
                let start = port.send_ctrl(now, unit.blocks());
                let pushed = port.stats().stolen_slots - stolen;
                self.egress_debt[egress as usize] += slot * pushed;
                self.q
                    .schedule(start + self.hop(), Ev::HostCtrlRx { host: egress, unit });
            }
            Ev::HostCtrlRx { host, unit } => self.on_host_ctrl(now, host as usize, unit),
            Ev::HostDataTx { host, chunk } => {
                if self.dead(host as usize, now) {
                    return;
                }
                let (run, start) = self.uplinks[host as usize].send_data(now, chunk.blocks);
                let last = start + self.slot() * (chunk.blocks - 1) + self.hop();
                self.q.schedule(
                    last,
                    Ev::SwitchDataRx {
                        ingress: host,
                        run,
                        chunk,
                    },
                );
            }
            Ev::SwitchDataRx {
                ingress,
                run,
                chunk,
            } => self.on_switch_data(now, ingress as usize, run, chunk),
            Ev::HostDataRx { host, run, chunk } => self.on_host_data(now, host as usize, run, chunk),
            Ev::ReadTimeout { host, arm } => {
                if let Some(c) = self.hosts[host as usize].read_timeout(arm, now) {
                    self.completions.push(c);
                    self.kick_dequeue(now, host as usize);
                }
            }
            Ev::GaugePoll(h) => {
                let hu = h as usize;
                self.gauge_poll_at[hu] = None;
                if let Some(FlowSignal::Resume) = self.hosts[hu].rx_gauge.poll(now) {
                    let at = now + self.cyc(self.cfg.cluster.latency.ntf_gen);
                    self.q.schedule(
                        at,
                        Ev::HostCtrlTx {
                            host: h,
                            unit: CtrlUnit::Resume(PortId::at(hu)),
                        },
                    );
                } else {
                    self.arm_gauge_poll(hu);
                }
            }
        }
    }

    fn on_submit(&mut self, now: SimTime, i: usize, limits: &RunLimits) {
        let r = self.trace[i];
        if let Some(next) = self.trace.get(i + 1) {
            if next.arrival < limits.inject_until {
                self.q.schedule(next.arrival, Ev::Submit(i as u32 + 1));
            }
        }
        let h = r.src.index();
        if self.dead(h, now) {
            return;
        }
        let addr = self.cfg.fixed_address.unwrap_or_else(|| {
            derived_address(self.cfg.address_seed, i as u64, self.cfg.memory_capacity_bytes)
        });
        let rmw = (r.kind == MessageKind::RmwReq).then(|| RmwArgs::Cas {
            expected: 0,
            new: i as u64,
        });
        let req = SubmitRequest {
            kind: r.kind,
            dst: r.dst,
            addr,
            size: r.size_bytes,
            rmw,
            tag: i as u64,
        };
        match self.hosts[h].submit(req, now) {
            Ok(_) => {
                self.submitted += 1;
                self.kick_dequeue(now, h);
            }
            Err(e) => self.violation(now, format!("trace record {i}: {e}")),
        }
    }

    fn kick_dequeue(&mut self, now: SimTime, h: usize) {
        if !self.dequeue_pending[h] && self.hosts[h].has_eligible() {
            self.dequeue_pending[h] = true;
            self.q.schedule(now, Ev::Dequeue(h as u16));
        }
    }

    fn on_dequeue(&mut self, now: SimTime, h: usize) {
        self.dequeue_pending[h] = false;
        if self.dead(h, now) {
            return;
        }
        let lat = &self.cfg.cluster.latency;
        let Some((ctl, arm)) = self.hosts[h].tx_dequeue(now) else {
            return;
        };
        let unit = match ctl {
            TxControl::Notification { peer, id, size } => CtrlUnit::Notify {
                src: PortId::at(h),
                dst: peer,
                id,
                size,
            },
            TxControl::Request(r) => CtrlUnit::Request(r),
        };
        let ready = now + lat.cycles(lat.ntf_gen);
        self.q.schedule(
            ready,
            Ev::HostCtrlTx {
                host: h as u16,
                unit,
            },
        );
        if let Some(arm) = arm {
            self.q.schedule(
                arm.fires_at,
                Ev::ReadTimeout {
                    host: h as u16,
                    arm,
                },
            );
        }
        if self.hosts[h].has_eligible() {
            self.dequeue_pending[h] = true;
            let next = now + lat.cycles(1);
            self.q.schedule(next, Ev::Dequeue(h as u16));
        }
    }

    fn request_round(&mut self) {
        if !self.round_pending {
            self.round_pending = true;
            let now = self.q.now();
            self.q.schedule(now, Ev::MatchRound);
        }
    }

    fn on_switch_ctrl(&mut self, now: SimTime, ingress: usize, unit: CtrlUnit) {
        let rec = match unit {
            CtrlUnit::Notify { src, dst, id, size } => {
                NotificationRecord::explicit(src, dst, id, size, now)
            }
            CtrlUnit::Request(req) => NotificationRecord::implicit(req, req.response_bytes(), now),
            CtrlUnit::Pause(p) => {
                self.sched.pause(p, now);
                return;
            }
            CtrlUnit::Resume(p) => {
                self.sched.resume(p, now);
                self.request_round();
                return;
            }
            other => {
                self.violation(now, format!("ingress {ingress} sent switch-only unit {other:?}"));
                return;
            }
        };
        if let Err(e) = self.sched.on_notification(rec, now) {
            self.violation(now, format!("scheduler rejected notification: {e}"));
            return;
        }
        self.request_round();
    }

    fn on_round(&mut self, now: SimTime) {
        self.round_pending = false;
        let out = self.sched.run_matching_round(now);
        if out.charged > SimTime::ZERO {
            *self.counters.entry("sched_charged_ps".into()).or_default() += out.charged.ps() as f64;
        }
        let lat = &self.cfg.cluster.latency;
        let emit_delay = lat.cycles(lat.g_block_gen + lat.forward);
        for g in out.grants {
            let emit = g.issued_at + emit_delay;
            self.audit.on_grant(g.src, g.dst, g.len);
            self.circuits.install(
                g.src,
                Binding {
                    egress: g.dst,
                    id: g.id,
                    kind: g.data_kind(),
                    offset: g.offset,
                    len: g.len,
                    installed_at: emit,
                },
            );
            let unit = match g.kind {
                GrantKind::ForwardRequest(req) => CtrlUnit::Forward {
                    req,
                    first_len: g.len,
                },
                _ => CtrlUnit::Grant {
                    peer: g.dst,
                    id: g.id,
                    offset: g.offset,
                    len: g.len,
                    kind: g.data_kind(),
                },
            };
            self.q.schedule(
                emit,
                Ev::SwitchCtrlTx {
                    egress: g.src.index() as u16,
                    unit,
                },
            );
            self.q.schedule(
                g.release_at,
                Ev::Release {
                    s: g.src.index() as u16,
                    d: g.dst.index() as u16,
                },
            );
        }
    }

    fn on_host_ctrl(&mut self, now: SimTime, h: usize, unit: CtrlUnit) {
        if self.dead(h, now) {
            return;
        }
        let lat = self.cfg.cluster.latency.clone();
        match unit {
            CtrlUnit::Grant {
                peer,
                id,
                offset,
                len,
                kind,
            } => {
                let res = match kind {
                    MessageKind::Wreq => self.hosts[h].on_write_grant(peer, id, offset, len),
                    _ => self.hosts[h].on_response_grant(peer, id, offset, len),
                };
                match res {
                    Ok(chunk) => {
                        if kind == MessageKind::Wreq {
                            // The last grant frees an active slot.
                            self.kick_dequeue(now, h);
                        }
                        let ready = self.hosts[h]
                            .grant_queue
                            .push(now + lat.cycles(lat.g_block_proc))
                            + lat.cycles(lat.mdata_gen);
                        self.q.schedule(
                            ready,
                            Ev::HostDataTx {
                                host: h as u16,
                                chunk,
                            },
                        );
                    }
                    Err(e) => self.violation(now, format!("host {h}: {e}")),
                }
            }
            CtrlUnit::Forward { req, first_len } => {
                let last = now + self.slot() * (req.block_count as u64 - 1);
                let memctrl = last + lat.cycles(lat.g_block_proc + lat.rreq_to_memctrl_extra);
                let chunk = self.hosts[h].on_request(&req, first_len);
                let ready = self.hosts[h].grant_queue.push(memctrl + lat.dram())
                    + lat.cycles(lat.mdata_gen);
                self.q.schedule(
                    ready,
                    Ev::HostDataTx {
                        host: h as u16,
                        chunk,
                    },
                );
            }
            other => self.violation(now, format!("host {h} received {other:?}")),
        }
    }

    fn on_switch_data(&mut self, now: SimTime, ingress: usize, run: RunId, chunk: DataChunk) {
        if let Some(t) = self.uplinks[ingress].run_last_arrival(run) {
            if t > now {
                self.q.schedule(
                    t,
                    Ev::SwitchDataRx {
                        ingress: ingress as u16,
                        run,
                        chunk,
                    },
                );
                return;
            }
        }
        self.uplinks[ingress].retire(run);
        let b = match self.circuits.forward(PortId::at(ingress), chunk.id, chunk.offset) {
            Ok(b) => b,
            Err(e) => {
                self.violation(now, e.to_string());
                return;
            }
        };
        if b.len != chunk.len || b.egress != chunk.dst {
            self.violation(
                now,
                format!("chunk ({ingress}->{}) does not match its circuit", chunk.dst),
            );
        }
        if let Err(e) = self.audit.on_forward(chunk.src, chunk.dst, chunk.len) {
            self.violation(now, e.to_string());
        }
        let span = self.slot() * (chunk.blocks - 1);
        let lat = &self.cfg.cluster.latency;
        let ready = now - span + lat.switch_data_path();
        let e = b.egress.index();
        let (run, start) = self.downlinks[e].send_data(ready, chunk.blocks);
        self.q.schedule(
            start + span + self.hop(),
            Ev::HostDataRx {
                host: e as u16,
                run,
                chunk,
            },
        );
    }

    fn on_host_data(&mut self, now: SimTime, h: usize, run: RunId, chunk: DataChunk) {
        if let Some(t) = self.downlinks[h].run_last_arrival(run) {
            if t > now {
                self.q.schedule(
                    t,
                    Ev::HostDataRx {
                        host: h as u16,
                        run,
                        chunk,
                    },
                );
                return;
            }
        }
        self.downlinks[h].retire(run);
        if self.dead(h, now) {
            return;
        }
        let first = now - self.slot() * (chunk.blocks - 1);
        match self.hosts[h].on_data(&chunk, first, now) {
            Ok(done) => {
                if let Some(c) = done {
                    self.completions.push(c);
                }
                // The last response chunk frees an active slot, also when it
                // drains a read that already timed out.
                if chunk.kind == MessageKind::Rres && chunk.offset + chunk.len >= chunk.total {
                    self.kick_dequeue(now, h);
                }
            }
            Err(e) => self.violation(now, format!("host {h}: {e}")),
        }
        if let Some(FlowSignal::Pause) = self.hosts[h].rx_gauge.on_arrival(now, chunk.len) {
            *self.counters.entry("pauses".into()).or_default() += 1.0;
            let at = now + self.cyc(self.cfg.cluster.latency.ntf_gen);
            self.q.schedule(
                at,
                Ev::HostCtrlTx {
                    host: h as u16,
                    unit: CtrlUnit::Pause(PortId::at(h)),
                },
            );
            self.arm_gauge_poll(h);
        }
    }

    fn arm_gauge_poll(&mut self, h: usize) {
        if self.gauge_poll_at[h].is_some() {
            return;
        }
        if let Some(t) = self.hosts[h].rx_gauge.resume_time() {
            let t = t.max(self.q.now());
            self.gauge_poll_at[h] = Some(t);
            self.q.schedule(t, Ev::GaugePoll(h as u16));
        }
    }

    fn finish(mut self) -> RunResult {
        let end = self.q.now();
        let done = self.completions.len();
        let incomplete = self.submitted.saturating_sub(done);
        let s = self.sched.stats().clone();
        let mut counters = std::mem::take(&mut self.counters);
        let mut put = |k: &str, v: f64| {
            counters.insert(k.to_string(), v);
        };
        put("sched_rounds", s.rounds as f64);
        put("sched_iterations", s.iterations as f64);
        put("sched_productive_iterations", s.productive_iterations as f64);
        put("sched_grants", s.grants as f64);
        put("sched_rejected", s.rejected as f64);
        put("sched_max_queue", s.max_queue_len as f64);
        put("circuit_max_depth", self.circuits.max_depth() as f64);
        let max_wait = |ports: &[TxPort]| {
            ports
                .iter()
                .map(|p| p.stats().max_data_wait_slots)
                .max()
                .unwrap_or(0) as f64
        };
        put("egress_max_data_wait_slots", max_wait(&self.downlinks));
        put("uplink_max_data_wait_slots", max_wait(&self.uplinks));
        put(
            "egress_stolen_slots",
            self.downlinks.iter().map(|p| p.stats().stolen_slots).sum::<u64>() as f64,
        );
        put(
            "timeouts",
            self.hosts.iter().map(|h| h.stats().timeouts).sum::<u64>() as f64,
        );
        put(
            "id_backpressure",
            self.hosts.iter().map(|h| h.stats().id_backpressure).sum::<u64>() as f64,
        );
        let unfinished_grants = !self.audit.is_balanced() && incomplete == 0;
        if unfinished_grants {
            self.violations
                .push("granted bytes were never forwarded".to_string());
        }
        RunResult {
            fabric: "edm".into(),
            submitted: self.submitted,
            incomplete,
            end_time: end,
            events: self.q.dispatched(),
            util: UtilSummary::from_ports(self.cfg.roles, &self.uplinks, &self.downlinks),
            uplinks: self.uplinks.iter().map(|p| p.stats().clone()).collect(),
            downlinks: self.downlinks.iter().map(|p| p.stats().clone()).collect(),
            slot: self.cfg.cluster.slot(),
            counters,
            violations: self.violations,
            scheduler_log_csv: self.cfg.scheduler_log.then(|| self.sched.log_csv()),
            audit_csv: Some(self.audit.to_csv()),
            completions: self.completions,
        }
    }
}

/// Unloaded head latencies of one 64 B read and one 64 B write, measured
/// from submission to the first data block processed at the receiver.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Table1Check {
    pub read: SimTime,
    pub write: SimTime,
    pub ref_read: SimTime,
    pub ref_write: SimTime,
}

impl Table1Check {
    pub fn passes(&self) -> bool {
        self.read == self.ref_read && self.write == self.ref_write
    }
}

pub fn verify_table1(cluster: &ClusterConfig) -> Table1Check {
    let cfg = EdmConfig {
        // Below 4 KiB the request fits a single MST block.
        fixed_address: Some(0x40),
        ..EdmConfig::with_cluster(cluster.clone())
    };
    let mem = PortId::at(cfg.roles.n_compute);
    let head = |kind: MessageKind| {
        let trace = [TraceRecord {
            arrival: SimTime::ZERO,
            src: PortId::at(0),
            dst: mem,
            kind,
            size_bytes: 64,
        }];
        let r = EdmSim::new(cfg.clone()).run(&trace, &RunLimits::unbounded());
        let c = r.completions[0];
        c.first_block_at - c.submitted_at
    };
    Table1Check {
        read: head(MessageKind::Rreq),
        write: head(MessageKind::Wreq),
        ref_read: SimTime(cluster.latency.ref_read_ps),
        ref_write: SimTime(cluster.latency.ref_write_ps),
    }
}

