//! Per-leg state common to the packet transports. A read is two legs: the
//! request from the compute node and the response from the memory node.

use edm_core::model::SimTime;

use crate::common::{legs, BaselineConfig};
use crate::net::Net;

#[derive(Clone, Debug)]
pub struct Leg {
    pub msg: u32,
    pub src: u16,
    pub dst: u16,
    pub size: u32,
    /// Response size to send back once this leg lands; `None` on the last leg.
    pub then: Option<u32>,
    pub npkts: u32,
    got: Vec<bool>,
    pub got_count: u32,
    pub delivered: u64,
    pub first_at: Option<SimTime>,
    pub done: bool,
}

impl Leg {
    fn new(cfg: &BaselineConfig, msg: u32, src: u16, dst: u16, size: u32, then: Option<u32>) -> Self {
        let npkts = cfg.packet_sizes(size).len() as u32;
        Leg {
            msg,
            src,
            dst,
            size,
            then,
            npkts,
            got: vec![false; npkts as usize],
            got_count: 0,
            delivered: 0,
            first_at: None,
            done: false,
        }
    }

    /// The request (or only) leg of trace record `idx`.
    pub fn first(net: &Net, idx: usize) -> Self {
        let r = &net.ledger.msgs[idx];
        let (req, resp) = legs(&net.cfg, r.kind, r.size_bytes);
        Leg::new(&net.cfg, idx as u32, r.src.index() as u16, r.dst.index() as u16, req, resp)
    }

    pub fn payload(&self, mss: u32, seq: u32) -> u32 {
        if seq + 1 < self.npkts {
            mss
        } else {
            self.size - mss * (self.npkts - 1)
        }
    }

    /// Bytes from `seq` to the end of the leg.
    pub fn remaining_from(&self, mss: u32, seq: u32) -> u64 {
        self.size as u64 - (mss as u64 * seq as u64).min(self.size as u64)
    }

    /// Marks packet `seq` received; true when this arrival finishes the leg.
    pub fn receive(&mut self, seq: u32, payload: u32, now: SimTime) -> bool {
        self.first_at.get_or_insert(now);
        if self.done || self.got[seq as usize] {
            return false;
        }
        self.got[seq as usize] = true;
        self.got_count += 1;
        self.delivered += payload as u64;
        self.done = self.got_count == self.npkts;
        self.done
    }

    pub fn has(&self, seq: u32) -> bool {
        self.got[seq as usize]
    }

    /// Closes a finished leg: either records the completion or returns the
    /// response leg the memory node must now send.
    pub fn finish(&self, net: &mut Net) -> Option<Leg> {
        if self.delivered != self.size as u64 {
            net.violations.push(format!(
                "message {} leg delivered {} of {} bytes",
                self.msg, self.delivered, self.size
            ));
        }
        net.counters.add("delivered_bytes", self.delivered as f64);
        match self.then {
            Some(size) => Some(Leg::new(&net.cfg, self.msg, self.dst, self.src, size, None)),
            None => {
                let now = net.now();
                net.ledger
                    .complete(self.msg as usize, now, self.first_at.unwrap_or(now));
                None
            }
        }
    }
}
