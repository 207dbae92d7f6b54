//! Idealized receiver-driven transport. Receivers learn of new flows the
//! instant they are submitted and grant one packet at a time to the flow
//! with the fewest ungranted bytes, paced at their link rate and bounded by
//! an outstanding-bytes credit. A sender serves grants in arrival order
//! through one NIC, so grants from several receivers at once stall all but
//! the first while the stalled receivers' credit sits idle.
//!
//! Read and RMW requests are a few bytes and go unscheduled.

use std::collections::BTreeSet;

use edm_core::model::SimTime;

use crate::flow::Leg;
use crate::net::{Net, Packet, PktKind, Transport};

struct Flow {
    leg: Leg,
    granted: u32,
}

#[derive(Default)]
struct Receiver {
    /// (ungranted bytes, flow) for flows with packets left to grant.
    pending: BTreeSet<(u64, u32)>,
    outstanding: u64,
    next_grant_at: SimTime,
    timer_armed: bool,
}

pub struct IrdTransport {
    flows: Vec<Flow>,
    rx: Vec<Receiver>,
    limit: u64,
}

impl IrdTransport {
    pub fn new(n_ports: usize, outstanding_limit: u64) -> Self {
        IrdTransport {
            flows: Vec::new(),
            rx: (0..n_ports).map(|_| Receiver::default()).collect(),
            limit: outstanding_limit,
        }
    }

    fn start(&mut self, net: &mut Net, leg: Leg) {
        let fid = self.flows.len() as u32;
        let unscheduled = leg.then.is_some();
        let (src, dst) = (leg.src, leg.dst);
        let ungranted = leg.size as u64;
        self.flows.push(Flow { leg, granted: 0 });
        if unscheduled {
            let f = &mut self.flows[fid as usize];
            f.granted = f.leg.npkts;
            for seq in 0..f.leg.npkts {
                let payload = f.leg.payload(net.cfg.mss, seq);
                let wire = net.cfg.frame_wire_bytes(payload);
                net.send(src, Packet::new(PktKind::Data, fid, seq, src, dst, payload, wire));
            }
            return;
        }
        self.rx[dst as usize].pending.insert((ungranted, fid));
        self.grant(net, dst);
    }

    fn grant(&mut self, net: &mut Net, r: u16) {
        let now = net.now();
        let mss = net.cfg.mss;
        let rx = &mut self.rx[r as usize];
        let Some(&(left, fid)) = rx.pending.first() else {
            return;
        };
        if now < rx.next_grant_at {
            if !rx.timer_armed {
                rx.timer_armed = true;
                net.timer(rx.next_grant_at, r as u64);
            }
            return;
        }
        let f = &mut self.flows[fid as usize];
        let payload = f.leg.payload(mss, f.granted);
        if rx.outstanding > 0 && rx.outstanding + payload as u64 > self.limit {
            return;
        }
        let wire = net.cfg.frame_wire_bytes(payload);
        let mut g = Packet::new(PktKind::Grant, fid, f.granted, r, f.leg.src, 0, net.cfg.ctrl_wire_bytes());
        g.aux = payload as u64;
        f.granted += 1;
        rx.pending.remove(&(left, fid));
        if f.granted < f.leg.npkts {
            rx.pending.insert((left - payload as u64, fid));
        }
        rx.outstanding += payload as u64;
        rx.next_grant_at = now + net.cfg.wire_time(wire as u64);
        if !rx.pending.is_empty() && !rx.timer_armed {
            rx.timer_armed = true;
            net.timer(rx.next_grant_at, r as u64);
        }
        net.counters.add("grants", 1.0);
        net.send(r, g);
    }
}

impl Transport for IrdTransport {
    fn on_message_submitted(&mut self, net: &mut Net, idx: usize) {
        let leg = Leg::first(net, idx);
        self.start(net, leg);
    }

    fn on_packet_arrival(&mut self, net: &mut Net, pkt: Packet) {
        let fid = pkt.flow as usize;
        match pkt.kind {
            PktKind::Grant => {
                let f = &self.flows[fid];
                let payload = pkt.aux as u32;
                let wire = net.cfg.frame_wire_bytes(payload);
                let (src, dst) = (f.leg.src, f.leg.dst);
                if net.nic_busy(src) {
                    net.counters.add("stalled_grants", 1.0);
                }
                net.send(src, Packet::new(PktKind::Data, pkt.flow, pkt.seq, src, dst, payload, wire));
            }
            PktKind::Data => {
                let now = net.now();
                let scheduled = self.flows[fid].leg.then.is_none();
                if scheduled {
                    let rx = &mut self.rx[pkt.dst as usize];
                    rx.outstanding -= pkt.payload as u64;
                }
                let done = self.flows[fid].leg.receive(pkt.seq, pkt.payload, now);
                if done {
                    if let Some(next) = self.flows[fid].leg.finish(net) {
                        self.start(net, next);
                    }
                }
                if scheduled {
                    self.grant(net, pkt.dst);
                }
            }
            _ => {}
        }
    }

    fn on_timer(&mut self, net: &mut Net, token: u64) {
        let r = token as u16;
        self.rx[r as usize].timer_armed = false;
        self.grant(net, r);
    }
}
