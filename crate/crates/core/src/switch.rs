//! Switch data path: block classification, scheduler-installed virtual
//! circuits for granted memory data, and the per-pair grant audit.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{MessageId, MessageKind, PortId, SimTime};
use crate::phy::{BlockType, PhyBlock, HEADER_KIND_SHIFT};

/// Fixed layer-2 pipeline for non-memory frames, in ps.
pub const L2_PARSE_PS: u64 = 87_000;
pub const L2_MATCH_PS: u64 = 202_000;
pub const L2_MANAGER_PS: u64 = 93_000;
pub const L2_CROSSBAR_PS: u64 = 18_000;

pub const fn l2_forwarding_latency() -> SimTime {
    SimTime(L2_PARSE_PS + L2_MATCH_PS + L2_MANAGER_PS + L2_CROSSBAR_PS)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SwitchError {
    #[error("protocol violation: memory data on ingress {ingress} with no circuit")]
    NoBinding { ingress: PortId },
    #[error(
        "protocol violation: ingress {ingress} carried id {got_id} offset {got_offset}, circuit expects id {want_id} offset {want_offset}"
    )]
    Mismatch {
        ingress: PortId,
        got_id: u8,
        got_offset: u32,
        want_id: u8,
        want_offset: u32,
    },
    #[error("protocol violation: pair ({src},{dst}) forwarded {forwarded} B over {granted} B granted")]
    Overrun {
        src: PortId,
        dst: PortId,
        granted: u64,
        forwarded: u64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Class {
    /// /N/: to the notification queues.
    Notification,
    Grant,
    /// Start of an RREQ/RMWREQ: intercepted by the scheduler.
    MemCtrl,
    /// Granted WREQ/RRES data: through the circuit map.
    MemData,
    /// PAUSE/RESUME from a receiver.
    FlowControl,
    /// Ethernet frames and idles: layer-2 path.
    Other,
}

/// Classifies one received block. `in_request` tells whether the ingress is
/// inside an intercepted request, whose MD/MT blocks go to the scheduler too.
pub fn classify(blk: &PhyBlock, in_request: bool) -> Class {
    match *blk {
        PhyBlock::Ctrl { ty, payload } => match ty {
            BlockType::Notification => Class::Notification,
            BlockType::Grant => Class::Grant,
            BlockType::Pause | BlockType::Resume => Class::FlowControl,
            BlockType::MemStart | BlockType::MemSingle => {
                let kind = MessageKind::from_code((payload >> HEADER_KIND_SHIFT) as u8 & 0b11);
                if kind.is_read_like() {
                    Class::MemCtrl
                } else {
                    Class::MemData
                }
            }
            BlockType::MemTerminate if in_request => Class::MemCtrl,
            BlockType::MemTerminate => Class::MemData,
            _ => Class::Other,
        },
        PhyBlock::MemData(_) if in_request => Class::MemCtrl,
        PhyBlock::MemData(_) => Class::MemData,
        PhyBlock::Data(_) => Class::Other,
    }
}

/// One scheduler-installed ingress -> egress binding covering one chunk.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Binding {
    pub egress: PortId,
    pub id: MessageId,
    pub kind: MessageKind,
    pub offset: u32,
    pub len: u32,
    pub installed_at: SimTime,
}

/// Per-ingress FIFO of bindings. Grants to one source are serialized, so
/// chunks arrive in binding order.
#[derive(Clone, Debug)]
pub struct CircuitMap {
    per_ingress: Vec<VecDeque<Binding>>,
    max_depth: usize,
}

impl CircuitMap {
    pub fn new(n_ports: usize) -> Self {
        CircuitMap {
            per_ingress: vec![VecDeque::new(); n_ports],
            max_depth: 0,
        }
    }

    pub fn install(&mut self, ingress: PortId, b: Binding) {
        let q = &mut self.per_ingress[ingress.index()];
        q.push_back(b);
        self.max_depth = self.max_depth.max(q.len());
    }

    pub fn current(&self, ingress: PortId) -> Option<&Binding> {
        self.per_ingress[ingress.index()].front()
    }

    /// Consumes the binding for a chunk that fully arrived on `ingress` and
    /// returns its egress.
    pub fn forward(
        &mut self,
        ingress: PortId,
        id: MessageId,
        offset: u32,
    ) -> Result<Binding, SwitchError> {
        let q = &mut self.per_ingress[ingress.index()];
        let b = *q.front().ok_or(SwitchError::NoBinding { ingress })?;
        if b.id != id || b.offset != offset {
            return Err(SwitchError::Mismatch {
                ingress,
                got_id: id.0,
                got_offset: offset,
                want_id: b.id.0,
                want_offset: b.offset,
            });
        }
        q.pop_front();
        Ok(b)
    }

    pub fn open_circuits(&self) -> usize {
        self.per_ingress.iter().map(VecDeque::len).sum()
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PairAudit {
    pub granted_bytes: u64,
    pub forwarded_bytes: u64,
    pub grants: u64,
    pub chunks: u64,
}

/// Granted versus forwarded bytes per (src, dst).
#[derive(Clone, Debug, Default)]
pub struct GrantAudit {
    pairs: BTreeMap<(u16, u16), PairAudit>,
}

impl GrantAudit {
    pub fn on_grant(&mut self, src: PortId, dst: PortId, len: u32) {
        let e = self.pair(src, dst);
        e.granted_bytes += len as u64;
        e.grants += 1;
    }

    pub fn on_forward(&mut self, src: PortId, dst: PortId, len: u32) -> Result<(), SwitchError> {
        let e = self.pair(src, dst);
        e.forwarded_bytes += len as u64;
        e.chunks += 1;
        if e.forwarded_bytes > e.granted_bytes {
            return Err(SwitchError::Overrun {
                src,
                dst,
                granted: e.granted_bytes,
                forwarded: e.forwarded_bytes,
            });
        }
        Ok(())
    }

    fn pair(&mut self, src: PortId, dst: PortId) -> &mut PairAudit {
        self.pairs
            .entry((src.index() as u16, dst.index() as u16))
            .or_default()
    }

    pub fn get(&self, src: PortId, dst: PortId) -> PairAudit {
        self.pairs
            .get(&(src.index() as u16, dst.index() as u16))
            .copied()
            .unwrap_or_default()
    }

    /// True when every granted byte was forwarded.
    pub fn is_balanced(&self) -> bool {
        self.pairs
            .values()
            .all(|p| p.granted_bytes == p.forwarded_bytes)
    }

    /// `src,dst,grants,granted_bytes,chunks,forwarded_bytes`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("src,dst,grants,granted_bytes,chunks,forwarded_bytes\n");
        for (&(s, d), p) in &self.pairs {
            let _ = writeln!(
                out,
                "{s},{d},{},{},{},{}",
                p.grants, p.granted_bytes, p.chunks, p.forwarded_bytes
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ControlField, MemoryMessage};
    use crate::phy::{encode_control, encode_memory_message, ControlBlock, EthernetFrame, encode_frame};

    #[test]
    fn l2_constant_is_400ns() {
        assert_eq!(l2_forwarding_latency(), SimTime::from_ns(400));
    }

    #[test]
    fn classification() {
        let n = encode_control(ControlBlock::Notification(
            ControlField::new(PortId::at(1), MessageId(0), 64).unwrap(),
        ));
        assert_eq!(classify(&n, false), Class::Notification);
        let w = MemoryMessage::wreq(PortId::at(0), PortId::at(1), MessageId(0), 0x40, vec![0; 64]);
        let blocks = encode_memory_message(&w).unwrap();
        assert_eq!(classify(&blocks[0], false), Class::MemData);
        assert_eq!(classify(&blocks[1], false), Class::MemData);
        let r = MemoryMessage::rreq(PortId::at(0), PortId::at(1), MessageId(0), 0x40, 64);
        assert_eq!(classify(&encode_memory_message(&r).unwrap()[0], false), Class::MemCtrl);
        let f = encode_frame(&EthernetFrame { bytes: vec![0; 64] }).unwrap();
        assert_eq!(classify(&f[0], false), Class::Other);
        assert_eq!(classify(&PhyBlock::IDLE, false), Class::Other);
    }

    #[test]
    fn circuit_forward_and_breach() {
        let mut m = CircuitMap::new(4);
        let (i, e) = (PortId::at(0), PortId::at(2));
        assert_eq!(
            m.forward(i, MessageId(1), 0),
            Err(SwitchError::NoBinding { ingress: i })
        );
        m.install(
            i,
            Binding {
                egress: e,
                id: MessageId(1),
                kind: MessageKind::Wreq,
                offset: 0,
                len: 64,
                installed_at: SimTime(0),
            },
        );
        assert!(matches!(
            m.forward(i, MessageId(2), 0),
            Err(SwitchError::Mismatch { .. })
        ));
        assert_eq!(m.forward(i, MessageId(1), 0).unwrap().egress, e);
        assert!(m.forward(i, MessageId(1), 0).is_err());
    }

    #[test]
    fn audit_flags_overrun() {
        let mut a = GrantAudit::default();
        let (s, d) = (PortId::at(0), PortId::at(1));
        a.on_grant(s, d, 64);
        a.on_forward(s, d, 64).unwrap();
        assert!(a.is_balanced());
        assert!(a.on_forward(s, d, 1).is_err());
        assert!(a.to_csv().contains("0,1,1,64,2,65"));
    }
}
