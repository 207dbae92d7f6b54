//! Central arbiter on its own switch port. Every leg sends one request to
//! the arbiter and waits for one grant carrying its start time. The arbiter
//! computes allocations in zero time, but requests and grants serialize on
//! its single link.
//!
//! Allocation reserves the whole leg on the source uplink and destination
//! downlink at the earliest time both are free and the grant can have
//! arrived.

use edm_core::model::SimTime;

use crate::flow::Leg;
use crate::net::{Net, Packet, PktKind, Transport};

struct Flow {
    leg: Leg,
    /// Wire time of all the leg's frames back to back.
    span: SimTime,
}

pub struct ArbiterTransport {
    flows: Vec<Flow>,
    arbiter: u16,
    grant_clock: SimTime,
    up_free: Vec<SimTime>,
    down_free: Vec<SimTime>,
}

impl ArbiterTransport {
    /// The arbiter sits on port `n_ports`.
    pub fn new(n_ports: usize) -> Self {
        ArbiterTransport {
            flows: Vec::new(),
            arbiter: n_ports as u16,
            grant_clock: SimTime::ZERO,
            up_free: vec![SimTime::ZERO; n_ports],
            down_free: vec![SimTime::ZERO; n_ports],
        }
    }

    fn start(&mut self, net: &mut Net, leg: Leg) {
        let fid = self.flows.len() as u32;
        let bytes: u64 = (0..leg.npkts)
            .map(|s| net.cfg.frame_wire_bytes(leg.payload(net.cfg.mss, s)) as u64)
            .sum();
        let src = leg.src;
        self.flows.push(Flow {
            leg,
            span: net.cfg.wire_time(bytes),
        });
        let req = Packet::new(
            PktKind::Request,
            fid,
            0,
            src,
            self.arbiter,
            0,
            net.cfg.arbiter_ctrl_wire_bytes,
        );
        net.counters.add("arbiter_requests", 1.0);
        net.send(src, req);
    }

    fn allocate(&mut self, net: &mut Net, fid: u32) {
        let cfg = &net.cfg;
        let ctrl = cfg.wire_time(cfg.arbiter_ctrl_wire_bytes as u64);
        let depart = self.grant_clock.max(net.now()) + ctrl;
        self.grant_clock = depart;
        let grant_lands = depart + cfg.hop + cfg.switch_latency + ctrl + cfg.hop;
        let f = &self.flows[fid as usize];
        let (s, d) = (f.leg.src as usize, f.leg.dst as usize);
        let start = grant_lands.max(self.up_free[s]).max(self.down_free[d]);
        self.up_free[s] = start + f.span;
        self.down_free[d] = start + f.span;
        let mut g = Packet::new(
            PktKind::Grant,
            fid,
            0,
            self.arbiter,
            f.leg.src,
            0,
            cfg.arbiter_ctrl_wire_bytes,
        );
        g.aux = start.ps();
        net.send(self.arbiter, g);
    }

    fn transmit(&mut self, net: &mut Net, fid: u32) {
        let f = &self.flows[fid as usize];
        for seq in 0..f.leg.npkts {
            let payload = f.leg.payload(net.cfg.mss, seq);
            let wire = net.cfg.frame_wire_bytes(payload);
            net.send(
                f.leg.src,
                Packet::new(PktKind::Data, fid, seq, f.leg.src, f.leg.dst, payload, wire),
            );
        }
    }
}

impl Transport for ArbiterTransport {
    fn on_message_submitted(&mut self, net: &mut Net, idx: usize) {
        let leg = Leg::first(net, idx);
        self.start(net, leg);
    }

    fn on_packet_arrival(&mut self, net: &mut Net, pkt: Packet) {
        let fid = pkt.flow;
        match pkt.kind {
            PktKind::Request => self.allocate(net, fid),
            PktKind::Grant => {
                let at = SimTime(pkt.aux).max(net.now());
                net.timer(at, fid as u64);
            }
            PktKind::Data => {
                let now = net.now();
                if self.flows[fid as usize].leg.receive(pkt.seq, pkt.payload, now) {
                    if let Some(next) = self.flows[fid as usize].leg.finish(net) {
                        self.start(net, next);
                    }
                }
            }
            _ => {}
        }
    }

    fn on_timer(&mut self, net: &mut Net, token: u64) {
        self.transmit(net, token as u32);
    }
}
