//! Rate-based transport with DCQCN congestion control, run over a lossless
//! (PFC) switch. No ACKs: the fabric never drops, so a leg completes when
//! the receiver holds every packet.

use edm_core::model::SimTime;

use crate::flow::Leg;
use crate::net::{Net, Packet, PktKind, Transport};

const PACE: u64 = 0;
const RATE_TIMER: u64 = 1 << 62;

struct Flow {
    leg: Leg,
    next: u32,
    rate_gbps: f64,
    target_gbps: f64,
    alpha: f64,
    stage: u32,
    cnp_seen: bool,
    timer_armed: bool,
    last_cnp_sent: Option<SimTime>,
}

pub struct RateTransport {
    flows: Vec<Flow>,
}

impl Default for RateTransport {
    fn default() -> Self {
        Self::new()
    }
}

impl RateTransport {
    pub fn new() -> Self {
        RateTransport { flows: Vec::new() }
    }

    fn start(&mut self, net: &mut Net, leg: Leg) {
        let line = net.cfg.link_gbps;
        self.flows.push(Flow {
            leg,
            next: 0,
            rate_gbps: line,
            target_gbps: line,
            alpha: 1.0,
            stage: 0,
            cnp_seen: false,
            timer_armed: false,
            last_cnp_sent: None,
        });
        self.pace(net, self.flows.len() - 1);
    }

    /// Releases the next packet to the NIC and schedules the one after at
    /// the flow's current rate.
    fn pace(&mut self, net: &mut Net, fid: usize) {
        let f = &mut self.flows[fid];
        if f.next >= f.leg.npkts {
            return;
        }
        let seq = f.next;
        let payload = f.leg.payload(net.cfg.mss, seq);
        let wire = net.cfg.frame_wire_bytes(payload);
        f.next += 1;
        let src = f.leg.src;
        let p = Packet::new(PktKind::Data, fid as u32, seq, src, f.leg.dst, payload, wire);
        let gap = SimTime::from_ps((wire as f64 * 8_000.0 / f.rate_gbps).round() as u64);
        let more = f.next < f.leg.npkts;
        net.send(src, p);
        if more {
            net.timer(net.now() + gap, PACE | fid as u64);
        }
    }

    fn on_cnp(&mut self, net: &mut Net, fid: usize) {
        let g = net.cfg.alpha_gain;
        let f = &mut self.flows[fid];
        f.target_gbps = f.rate_gbps;
        f.rate_gbps = (f.rate_gbps * (1.0 - f.alpha / 2.0)).max(0.1);
        f.alpha = (1.0 - g) * f.alpha + g;
        f.stage = 0;
        f.cnp_seen = true;
        if !f.timer_armed {
            f.timer_armed = true;
            net.timer(net.now() + net.cfg.dcqcn_timer, RATE_TIMER | fid as u64);
        }
    }

    /// Alpha decay and rate recovery: fast recovery toward the target,
    /// then additive increase of the target.
    fn on_rate_timer(&mut self, net: &mut Net, fid: usize) {
        let (g, line, ai, fr) = (
            net.cfg.alpha_gain,
            net.cfg.link_gbps,
            net.cfg.dcqcn_ai_gbps,
            net.cfg.dcqcn_fast_recovery_steps,
        );
        let f = &mut self.flows[fid];
        if !f.cnp_seen {
            f.alpha *= 1.0 - g;
            if f.stage >= fr {
                f.target_gbps = (f.target_gbps + ai).min(line);
            }
            f.rate_gbps = ((f.target_gbps + f.rate_gbps) / 2.0).min(line);
            f.stage += 1;
        }
        f.cnp_seen = false;
        if f.next < f.leg.npkts {
            net.timer(net.now() + net.cfg.dcqcn_timer, RATE_TIMER | fid as u64);
        } else {
            f.timer_armed = false;
        }
    }
}

impl Transport for RateTransport {
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
                if pkt.ecn
                    && f
                        .last_cnp_sent
                        .map_or(true, |t| now - t >= net.cfg.cnp_interval)
                {
                    f.last_cnp_sent = Some(now);
                    let cnp = Packet::new(
                        PktKind::Cnp,
                        pkt.flow,
                        0,
                        pkt.dst,
                        pkt.src,
                        0,
                        net.cfg.ctrl_wire_bytes(),
                    );
                    net.counters.add("cnps", 1.0);
                    net.send(pkt.dst, cnp);
                }
                if f.leg.receive(pkt.seq, pkt.payload, now) {
                    if let Some(next) = self.flows[fid].leg.finish(net) {
                        self.start(net, next);
                    }
                }
            }
            PktKind::Cnp => self.on_cnp(net, fid),
            _ => {}
        }
    }

    fn on_timer(&mut self, net: &mut Net, token: u64) {
        let fid = (token & !RATE_TIMER) as usize;
        if token & RATE_TIMER != 0 {
            self.on_rate_timer(net, fid);
        } else {
            self.pace(net, fid);
        }
    }
}
