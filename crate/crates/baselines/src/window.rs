//! Window-based reactive transport with DCTCP congestion control. With a
//! rank-ordered, worst-drop switch it becomes the pFabric baseline.
//!
//! Receivers ACK every data packet cumulatively and echo its ECN mark.
//! Loss recovery is go-back-N after a fixed retransmission timeout.

use edm_core::model::SimTime;

use crate::flow::Leg;
use crate::net::{Net, Packet, PktKind, Transport};

struct Flow {
    leg: Leg,
    next: u32,
    acked: u32,
    cwnd: f64,
    alpha: f64,
    win_end: u32,
    win_acked: u32,
    win_marked: u32,
    rto_at: SimTime,
    timer_armed: bool,
}

pub struct WindowTransport {
    flows: Vec<Flow>,
    /// Stamp packets with remaining flow bytes (pFabric priority).
    ranked: bool,
}

impl WindowTransport {
    pub fn new(ranked: bool) -> Self {
        WindowTransport {
            flows: Vec::new(),
            ranked,
        }
    }

    fn start(&mut self, net: &mut Net, leg: Leg) {
        let cwnd = net.cfg.init_cwnd_pkts;
        self.flows.push(Flow {
            leg,
            next: 0,
            acked: 0,
            cwnd,
            alpha: 0.0,
            win_end: 0,
            win_acked: 0,
            win_marked: 0,
            rto_at: SimTime::ZERO,
            timer_armed: false,
        });
        self.pump(net, self.flows.len() - 1);
    }

    fn pump(&mut self, net: &mut Net, fid: usize) {
        let mss = net.cfg.mss;
        let f = &mut self.flows[fid];
        while f.next < f.leg.npkts && ((f.next - f.acked) as f64) < f.cwnd.max(1.0) {
            let seq = f.next;
            let payload = f.leg.payload(mss, seq);
            let mut p = Packet::new(
                PktKind::Data,
                fid as u32,
                seq,
                f.leg.src,
                f.leg.dst,
                payload,
                net.cfg.frame_wire_bytes(payload),
            );
            if self.ranked {
                p.rank = f.leg.remaining_from(mss, seq);
            }
            f.next += 1;
            let src = f.leg.src;
            net.send(src, p);
        }
        if f.acked < f.leg.npkts && !f.timer_armed {
            f.timer_armed = true;
            f.rto_at = net.now() + net.cfg.rto;
            net.timer(f.rto_at, fid as u64);
        }
    }

    fn on_ack(&mut self, net: &mut Net, fid: usize, cum: u32, ecn: bool) {
        let g = net.cfg.alpha_gain;
        let f = &mut self.flows[fid];
        if cum <= f.acked {
            return;
        }
        let newly = cum - f.acked;
        f.acked = cum;
        // ACKs for packets sent before a go-back-N can overtake `next`.
        f.next = f.next.max(cum);
        f.win_acked += newly;
        if ecn {
            f.win_marked += newly;
        }
        f.cwnd += newly as f64 / f.cwnd.max(1.0);
        if f.acked >= f.win_end {
            let frac = f.win_marked as f64 / f.win_acked.max(1) as f64;
            f.alpha = (1.0 - g) * f.alpha + g * frac;
            if f.win_marked > 0 {
                f.cwnd = (f.cwnd * (1.0 - f.alpha / 2.0)).max(1.0);
            }
            f.win_end = f.next;
            f.win_acked = 0;
            f.win_marked = 0;
        }
        f.rto_at = net.now() + net.cfg.rto;
        self.pump(net, fid);
    }

    fn on_rto(&mut self, net: &mut Net, fid: usize) {
        let now = net.now();
        let f = &mut self.flows[fid];
        if f.acked >= f.leg.npkts {
            f.timer_armed = false;
            return;
        }
        if now < f.rto_at {
            net.timer(f.rto_at, fid as u64);
            return;
        }
        net.counters.add("timeouts", 1.0);
        net.counters.add("retransmitted_pkts", (f.next - f.acked) as f64);
        f.next = f.acked;
        f.cwnd = 1.0;
        f.win_end = f.acked;
        f.timer_armed = false;
        self.pump(net, fid);
    }
}

impl Transport for WindowTransport {
    fn on_message_submitted(&mut self, net: &mut Net, idx: usize) {
        let leg = Leg::first(net, idx);
        self.start(net, leg);
    }

    fn on_packet_arrival(&mut self, net: &mut Net, pkt: Packet) {
        let fid = pkt.flow as usize;
        match pkt.kind {
            PktKind::Data => {
                let now = net.now();
                let f = &mut self.flows[fid];
                let finished = f.leg.receive(pkt.seq, pkt.payload, now);
                let mut cum = f.acked;
                while cum < f.leg.npkts && f.leg.has(cum) {
                    cum += 1;
                }
                let mut ack = Packet::new(
                    PktKind::Ack,
                    pkt.flow,
                    pkt.seq,
                    pkt.dst,
                    pkt.src,
                    0,
                    net.cfg.ctrl_wire_bytes(),
                );
                ack.aux = cum as u64;
                ack.ecn = pkt.ecn;
                net.send(pkt.dst, ack);
                if finished {
                    if let Some(next) = self.flows[fid].leg.finish(net) {
                        self.start(net, next);
                    }
                }
            }
            PktKind::Ack => self.on_ack(net, fid, pkt.aux as u32, pkt.ecn),
            _ => {}
        }
    }

    fn on_timer(&mut self, net: &mut Net, token: u64) {
        self.on_rto(net, token as usize);
    }
}
