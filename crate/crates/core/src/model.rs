//! Domain types shared by every layer of the fabric: time base, identifiers,
//! memory messages, scheduler records, latency constants and the 33-bit
//! notification/grant field layout.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Ports are addressed with 9 bits on the wire.
pub const MAX_PORTS: usize = 512;
/// Message ids are 8 bits on the wire.
pub const MESSAGE_ID_SPACE: usize = 256;
/// Largest size expressible in the 16-bit size field.
pub const MAX_FIELD_SIZE: u32 = u16::MAX as u32;
/// Width of the notification/grant field bundle.
pub const CONTROL_FIELD_BITS: u32 = 33;
/// Bits of one PCS block including the sync header.
pub const BLOCK_BITS: u64 = 66;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("port {0} outside the 9-bit port space")]
    PortOutOfRange(usize),
    #[error("field `{field}` value {value} exceeds {bits}-bit width")]
    FieldOverflow {
        field: &'static str,
        value: u64,
        bits: u32,
    },
    #[error("unknown message kind `{0}`")]
    UnknownKind(String),
    #[error("invalid cluster config: {0}")]
    InvalidConfig(String),
}

/// Simulated time and durations, in integer picoseconds.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub const fn from_ps(ps: u64) -> Self {
        SimTime(ps)
    }

    pub const fn from_ns(ns: u64) -> Self {
        SimTime(ns * 1_000)
    }

    pub const fn from_us(us: u64) -> Self {
        SimTime(us * 1_000_000)
    }

    /// Rounds to the nearest picosecond.
    pub fn from_ns_f64(ns: f64) -> Self {
        assert!(ns >= 0.0 && ns.is_finite(), "negative or non-finite time {ns}");
        SimTime((ns * 1_000.0).round() as u64)
    }

    pub const fn ps(self) -> u64 {
        self.0
    }

    pub fn as_ns(self) -> f64 {
        self.0 as f64 / 1_000.0
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        self.0 += rhs.0;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(
            self.0
                .checked_sub(rhs.0)
                .expect("SimTime subtraction underflow"),
        )
    }
}

impl Mul<u64> for SimTime {
    type Output = SimTime;
    fn mul(self, rhs: u64) -> SimTime {
        SimTime(self.0 * rhs)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:03} ns", self.0 / 1_000, self.0 % 1_000)
    }
}

#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct PortId(u16);

impl PortId {
    pub fn new(index: usize) -> Result<Self, ModelError> {
        if index >= MAX_PORTS {
            return Err(ModelError::PortOutOfRange(index));
        }
        Ok(PortId(index as u16))
    }

    /// Panics on out-of-range indices; for loops over validated port counts.
    pub fn at(index: usize) -> Self {
        Self::new(index).expect("port index out of range")
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for PortId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct MessageId(pub u8);

impl fmt::Display for MessageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MessageKind {
    Rreq,
    Wreq,
    RmwReq,
    Rres,
}

impl MessageKind {
    pub const ALL: [MessageKind; 4] = [
        MessageKind::Rreq,
        MessageKind::Wreq,
        MessageKind::RmwReq,
        MessageKind::Rres,
    ];

    /// 2-bit wire code.
    pub fn code(self) -> u8 {
        match self {
            MessageKind::Rreq => 0,
            MessageKind::Wreq => 1,
            MessageKind::RmwReq => 2,
            MessageKind::Rres => 3,
        }
    }

    pub fn from_code(code: u8) -> MessageKind {
        match code & 0b11 {
            0 => MessageKind::Rreq,
            1 => MessageKind::Wreq,
            2 => MessageKind::RmwReq,
            _ => MessageKind::Rres,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::Rreq => "RREQ",
            MessageKind::Wreq => "WREQ",
            MessageKind::RmwReq => "RMWREQ",
            MessageKind::Rres => "RRES",
        }
    }

    /// Requests that expect an RRES and act as implicit notifications.
    pub fn is_read_like(self) -> bool {
        matches!(self, MessageKind::Rreq | MessageKind::RmwReq)
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MessageKind {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "RREQ" | "READ" => Ok(MessageKind::Rreq),
            "WREQ" | "WRITE" => Ok(MessageKind::Wreq),
            "RMWREQ" | "RMW" => Ok(MessageKind::RmwReq),
            "RRES" => Ok(MessageKind::Rres),
            other => Err(ModelError::UnknownKind(other.to_string())),
        }
    }
}

/// Read-modify-write operations. Codes other than CAS and FETCH_ADD are
/// unassigned and answered with a NACK.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RmwOpcode {
    Cas,
    FetchAdd,
    Unassigned(u16),
}

impl RmwOpcode {
    pub fn code(self) -> u16 {
        match self {
            RmwOpcode::Cas => 0,
            RmwOpcode::FetchAdd => 1,
            RmwOpcode::Unassigned(c) => c,
        }
    }

    pub fn from_code(code: u16) -> RmwOpcode {
        match code {
            0 => RmwOpcode::Cas,
            1 => RmwOpcode::FetchAdd,
            c => RmwOpcode::Unassigned(c),
        }
    }

    /// Argument payload carried by the request: the target address followed
    /// by the operands, 64 bits each.
    pub fn arg_bytes(self) -> u32 {
        match self {
            RmwOpcode::Cas => 24,
            RmwOpcode::FetchAdd => 16,
            RmwOpcode::Unassigned(_) => 8,
        }
    }

    /// Size of the RRES answering this opcode.
    pub fn result_bytes(self) -> u32 {
        match self {
            RmwOpcode::Cas => 1,
            RmwOpcode::FetchAdd => 8,
            RmwOpcode::Unassigned(_) => 0,
        }
    }
}

/// One remote-memory request or response.
///
/// `size_bytes` is the read length for RREQ and the payload length for every
/// other kind. `remote_addr` is the target address for requests and the byte
/// offset of the carried data within the response for RRES.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryMessage {
    pub kind: MessageKind,
    pub src: PortId,
    pub dst: PortId,
    pub id: MessageId,
    pub size_bytes: u32,
    pub remote_addr: u64,
    pub opcode: Option<RmwOpcode>,
    pub payload: Vec<u8>,
    pub created_at: SimTime,
}

impl MemoryMessage {
    pub fn rreq(src: PortId, dst: PortId, id: MessageId, addr: u64, len: u32) -> Self {
        MemoryMessage {
            kind: MessageKind::Rreq,
            src,
            dst,
            id,
            size_bytes: len,
            remote_addr: addr,
            opcode: None,
            payload: Vec::new(),
            created_at: SimTime::ZERO,
        }
    }

    pub fn wreq(src: PortId, dst: PortId, id: MessageId, addr: u64, data: Vec<u8>) -> Self {
        MemoryMessage {
            kind: MessageKind::Wreq,
            src,
            dst,
            id,
            size_bytes: data.len() as u32,
            remote_addr: addr,
            opcode: None,
            payload: data,
            created_at: SimTime::ZERO,
        }
    }

    /// `offset` is the position of `data` within the full response.
    pub fn rres(src: PortId, dst: PortId, id: MessageId, offset: u64, data: Vec<u8>) -> Self {
        MemoryMessage {
            kind: MessageKind::Rres,
            src,
            dst,
            id,
            size_bytes: data.len() as u32,
            remote_addr: offset,
            opcode: None,
            payload: data,
            created_at: SimTime::ZERO,
        }
    }

    pub fn rmw(src: PortId, dst: PortId, id: MessageId, addr: u64, args: RmwArgs) -> Self {
        let payload = args.to_payload(addr);
        MemoryMessage {
            kind: MessageKind::RmwReq,
            src,
            dst,
            id,
            size_bytes: payload.len() as u32,
            remote_addr: addr,
            opcode: Some(args.opcode()),
            payload,
            created_at: SimTime::ZERO,
        }
    }

    /// Bytes that travel as MD payload.
    pub fn data_bytes(&self) -> u32 {
        match self.kind {
            MessageKind::Rreq => 0,
            _ => self.size_bytes,
        }
    }
}

/// Operands of an RMWREQ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RmwArgs {
    Cas { expected: u64, new: u64 },
    FetchAdd { delta: u64 },
    Raw { opcode: u16 },
}

impl RmwArgs {
    pub fn opcode(self) -> RmwOpcode {
        match self {
            RmwArgs::Cas { .. } => RmwOpcode::Cas,
            RmwArgs::FetchAdd { .. } => RmwOpcode::FetchAdd,
            RmwArgs::Raw { opcode } => RmwOpcode::from_code(opcode),
        }
    }

    pub fn to_payload(self, addr: u64) -> Vec<u8> {
        let mut out = addr.to_le_bytes().to_vec();
        match self {
            RmwArgs::Cas { expected, new } => {
                out.extend_from_slice(&expected.to_le_bytes());
                out.extend_from_slice(&new.to_le_bytes());
            }
            RmwArgs::FetchAdd { delta } => out.extend_from_slice(&delta.to_le_bytes()),
            RmwArgs::Raw { .. } => {}
        }
        out
    }

    pub fn from_payload(opcode: RmwOpcode, payload: &[u8]) -> Option<(u64, RmwArgs)> {
        let word = |i: usize| -> Option<u64> {
            payload
                .get(i * 8..i * 8 + 8)
                .map(|b| u64::from_le_bytes(b.try_into().expect("8-byte slice")))
        };
        let addr = word(0)?;
        let args = match opcode {
            RmwOpcode::Cas => RmwArgs::Cas {
                expected: word(1)?,
                new: word(2)?,
            },
            RmwOpcode::FetchAdd => RmwArgs::FetchAdd { delta: word(1)? },
            RmwOpcode::Unassigned(c) => RmwArgs::Raw { opcode: c },
        };
        Some((addr, args))
    }
}

/// Byte range of one message covered by one grant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Chunk {
    pub kind: MessageKind,
    pub src: PortId,
    pub dst: PortId,
    pub id: MessageId,
    pub offset_bytes: u32,
    pub len_bytes: u32,
}

/// Scheduler-side demand entry. For implicit (read) demand, `src` is the
/// memory node that will send the RRES and `dst` the requester.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NotificationRecord {
    pub src: PortId,
    pub dst: PortId,
    pub id: MessageId,
    pub total_bytes: u32,
    pub remaining_bytes: u32,
    pub priority: u64,
    pub enqueued_at: SimTime,
    pub is_implicit_rreq: bool,
    /// The intercepted request, forwarded verbatim as the first grant.
    pub rreq: Option<BufferedRequest>,
}

impl NotificationRecord {
    pub fn explicit(src: PortId, dst: PortId, id: MessageId, bytes: u32, now: SimTime) -> Self {
        NotificationRecord {
            src,
            dst,
            id,
            total_bytes: bytes,
            remaining_bytes: bytes,
            priority: 0,
            enqueued_at: now,
            is_implicit_rreq: false,
            rreq: None,
        }
    }

    /// Demand synthesized from an RREQ/RMWREQ sent by `requester` to
    /// `memory`: the response flows memory -> requester.
    pub fn implicit(req: BufferedRequest, response_bytes: u32, now: SimTime) -> Self {
        NotificationRecord {
            src: req.memory,
            dst: req.requester,
            id: req.id,
            total_bytes: response_bytes,
            remaining_bytes: response_bytes,
            priority: 0,
            enqueued_at: now,
            is_implicit_rreq: true,
            rreq: Some(req),
        }
    }

    /// The host whose sender-side notification budget this record uses.
    pub fn origin(&self) -> PortId {
        if self.is_implicit_rreq {
            self.dst
        } else {
            self.src
        }
    }

    pub fn peer_of_origin(&self) -> PortId {
        if self.is_implicit_rreq {
            self.src
        } else {
            self.dst
        }
    }

    pub fn data_kind(&self) -> MessageKind {
        if self.is_implicit_rreq {
            MessageKind::Rres
        } else {
            MessageKind::Wreq
        }
    }
}

/// An intercepted read-like request held by the scheduler until its first
/// grant forwards it to the memory node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BufferedRequest {
    pub kind: MessageKind,
    pub requester: PortId,
    pub memory: PortId,
    pub id: MessageId,
    /// Read length (RREQ) or argument bytes (RMWREQ).
    pub size_bytes: u32,
    pub remote_addr: u64,
    pub opcode: Option<RmwOpcode>,
    pub args: Option<RmwArgs>,
    pub block_count: u32,
}

impl BufferedRequest {
    /// Bytes the memory node will return.
    pub fn response_bytes(&self) -> u32 {
        match (self.kind, self.opcode) {
            (MessageKind::RmwReq, Some(op)) => op.result_bytes(),
            (MessageKind::RmwReq, None) => 0,
            _ => self.size_bytes,
        }
    }
}

/// Permission for the receiving host to send one chunk.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Grant {
    pub dst_of_message: PortId,
    pub id: MessageId,
    pub chunk_bytes: u32,
}

/// The 33-bit bundle carried by /N/ and /G/ blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ControlField {
    pub peer: PortId,
    pub id: MessageId,
    pub size: u16,
}

impl ControlField {
    pub fn new(peer: PortId, id: MessageId, size: u32) -> Result<Self, ModelError> {
        if size > MAX_FIELD_SIZE {
            return Err(ModelError::FieldOverflow {
                field: "size",
                value: size as u64,
                bits: 16,
            });
        }
        Ok(ControlField {
            peer,
            id,
            size: size as u16,
        })
    }

    /// Layout, MSB first: peer 9 | id 8 | size 16.
    pub fn to_bits(self) -> u64 {
        ((self.peer.index() as u64) << 24) | ((self.id.0 as u64) << 16) | self.size as u64
    }

    pub fn from_bits(bits: u64) -> Result<Self, ModelError> {
        if bits >> CONTROL_FIELD_BITS != 0 {
            return Err(ModelError::FieldOverflow {
                field: "control field",
                value: bits,
                bits: CONTROL_FIELD_BITS,
            });
        }
        Ok(ControlField {
            peer: PortId((bits >> 24) as u16 & 0x1ff),
            id: MessageId((bits >> 16) as u8),
            size: bits as u16,
        })
    }
}

/// Encodes the (dst, id, size) fields of a notification.
pub fn notification_wire_encode(rec: &NotificationRecord) -> Result<ControlField, ModelError> {
    ControlField::new(rec.dst, rec.id, rec.total_bytes)
}

pub fn grant_wire_encode(g: &Grant) -> Result<ControlField, ModelError> {
    ControlField::new(g.dst_of_message, g.id, g.chunk_bytes)
}

/// PCS blocks occupied by a chunk of `len` data bytes sent as MS, MD..., MT.
pub fn data_chunk_blocks(len: u32) -> u64 {
    2 + (len as u64).div_ceil(8)
}

/// Control overhead per link direction when every chunk needs one 33-bit
/// notification or grant field, relative to the chunk's wire bits.
pub fn control_overhead_fraction(chunk_bytes: u32) -> f64 {
    assert!(chunk_bytes > 0);
    CONTROL_FIELD_BITS as f64 / (data_chunk_blocks(chunk_bytes) * BLOCK_BITS) as f64
}

/// Same ratio when each control field occupies a whole 66-bit block, which
/// is what the simulator's links actually carry.
pub fn control_block_overhead_fraction(chunk_bytes: u32) -> f64 {
    assert!(chunk_bytes > 0);
    BLOCK_BITS as f64 / (data_chunk_blocks(chunk_bytes) * BLOCK_BITS) as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorityPolicy {
    Fcfs,
    Srpt,
}

impl FromStr for PriorityPolicy {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fcfs" => Ok(PriorityPolicy::Fcfs),
            "srpt" => Ok(PriorityPolicy::Srpt),
            other => Err(ModelError::InvalidConfig(format!("unknown policy `{other}`"))),
        }
    }
}

/// Per-component latency costs. Cycle counts are in 2.56 ns fabric cycles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LatencyProfile {
    pub cycle_ps: u64,
    pub ntf_gen: u64,
    pub grant_q_read: u64,
    pub mdata_gen: u64,
    pub g_block_proc: u64,
    pub rreq_to_memctrl_extra: u64,
    pub mdata_rx_proc: u64,
    pub g_block_gen: u64,
    pub classify: u64,
    pub forward: u64,
    pub pcs_ps: u64,
    pub pma_pmd_ps: u64,
    pub propagation_ps: u64,
    /// Memory-device access time at the memory node; the reference head latencies exclude it.
    pub dram_ps: u64,
    pub ref_read_ps: u64,
    pub ref_write_ps: u64,
}

impl Default for LatencyProfile {
    fn default() -> Self {
        LatencyProfile {
            cycle_ps: 2_560,
            ntf_gen: 2,
            grant_q_read: 4,
            mdata_gen: 3,
            g_block_proc: 2,
            rreq_to_memctrl_extra: 1,
            mdata_rx_proc: 3,
            g_block_gen: 1,
            classify: 1,
            forward: 4,
            pcs_ps: 5_120,
            pma_pmd_ps: 19_000,
            propagation_ps: 10_000,
            dram_ps: 0,
            ref_read_ps: 299_520,
            ref_write_ps: 296_960,
        }
    }
}

impl LatencyProfile {
    /// Profile with a 60 ns memory-device access for end-to-end studies.
    pub fn with_dram() -> Self {
        LatencyProfile {
            dram_ps: 60_000,
            ..Self::default()
        }
    }

    pub fn cycles(&self, n: u64) -> SimTime {
        SimTime(n * self.cycle_ps)
    }

    /// TX PCS + PMA/PMD, propagation, PMA/PMD + RX PCS of one link.
    pub fn hop(&self) -> SimTime {
        SimTime(2 * self.pcs_ps + 2 * self.pma_pmd_ps + self.propagation_ps)
    }

    pub fn dram(&self) -> SimTime {
        SimTime(self.dram_ps)
    }

    /// Switch control path from first block in to /G/ (or forwarded RREQ) out.
    pub fn switch_grant_path(&self) -> SimTime {
        self.cycles(self.classify + self.g_block_gen + self.forward)
    }

    pub fn switch_data_path(&self) -> SimTime {
        self.cycles(self.classify + self.forward)
    }

    /// /G/ received to first data block ready for the uplink.
    pub fn host_grant_to_data(&self) -> SimTime {
        self.cycles(self.g_block_proc + self.grant_q_read + self.mdata_gen)
    }

    /// RREQ received at the memory node to first RRES block ready,
    /// excluding DRAM access.
    pub fn host_rreq_to_data(&self) -> SimTime {
        self.cycles(
            self.g_block_proc + self.rreq_to_memctrl_extra + self.grant_q_read + self.mdata_gen,
        )
    }

    /// Reference read total assembled component by component.
    pub fn table_read_total(&self) -> SimTime {
        let host = 2 * self.pcs_ps + self.cycle_ps * (self.ntf_gen + self.mdata_rx_proc);
        let switch = 4 * self.pcs_ps
            + self.cycle_ps
                * (self.classify + self.g_block_gen + self.forward + self.classify + self.forward);
        let memory = 2 * self.pcs_ps
            + self.cycle_ps
                * (self.g_block_proc + self.rreq_to_memctrl_extra + self.grant_q_read + self.mdata_gen);
        SimTime(host + switch + memory + 8 * self.pma_pmd_ps + 4 * self.propagation_ps)
    }

    pub fn table_write_total(&self) -> SimTime {
        let host = 4 * self.pcs_ps
            + self.cycle_ps
                * (self.ntf_gen + self.g_block_proc + self.grant_q_read + self.mdata_gen);
        let switch = 4 * self.pcs_ps
            + self.cycle_ps
                * (self.classify + self.g_block_gen + self.forward + self.classify + self.forward);
        let memory = self.cycle_ps * self.mdata_rx_proc;
        SimTime(host + switch + memory + 8 * self.pma_pmd_ps + 4 * self.propagation_ps)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    pub n_ports: usize,
    pub link_gbps: f64,
    pub chunk_bytes: u32,
    pub max_active_notifications: u32,
    pub scheduler_clock_ghz: f64,
    pub priority_policy: PriorityPolicy,
    pub latency: LatencyProfile,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            n_ports: 144,
            link_gbps: 100.0,
            chunk_bytes: 256,
            max_active_notifications: 3,
            scheduler_clock_ghz: 3.0,
            priority_policy: PriorityPolicy::Srpt,
            latency: LatencyProfile::default(),
        }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidConfig(m));
        if self.n_ports < 2 || self.n_ports > MAX_PORTS {
            return bad(format!("n_ports {} outside [2, {MAX_PORTS}]", self.n_ports));
        }
        if !(self.link_gbps > 0.0) {
            return bad(format!("link_gbps {} must be positive", self.link_gbps));
        }
        if self.chunk_bytes == 0 || self.chunk_bytes > MAX_FIELD_SIZE {
            return bad(format!("chunk_bytes {} outside [1, 65535]", self.chunk_bytes));
        }
        if self.max_active_notifications == 0 {
            return bad("max_active_notifications must be >= 1".into());
        }
        if !(self.scheduler_clock_ghz > 0.0) {
            return bad("scheduler_clock_ghz must be positive".into());
        }
        if self.latency.cycle_ps == 0 {
            return bad("cycle_ps must be positive".into());
        }
        Ok(())
    }

    /// Duration of one 66-bit block on a link.
    pub fn slot(&self) -> SimTime {
        SimTime::from_ps((BLOCK_BITS as f64 * 1_000.0 / self.link_gbps).round() as u64)
    }

    /// Wire time of `blocks` consecutive blocks.
    pub fn wire_time(&self, blocks: u64) -> SimTime {
        self.slot() * blocks
    }

    /// Bytes in flight over one unloaded round trip (two hops each way).
    pub fn bdp_bytes(&self) -> u64 {
        let rtt = self.latency.hop().ps() * 4;
        (rtt as f64 * self.link_gbps / 8_000.0).round() as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sim_time_display_and_arithmetic() {
        let t = SimTime::from_ns_f64(299.52);
        assert_eq!(t.ps(), 299_520);
        assert_eq!(t.to_string(), "299.520 ns");
        assert_eq!(SimTime::from_ns(2) + SimTime::from_ps(5), SimTime(2_005));
        assert_eq!(SimTime(10) * 3, SimTime(30));
    }

    #[test]
    fn port_bounds() {
        assert!(PortId::new(511).is_ok());
        assert_eq!(PortId::new(512), Err(ModelError::PortOutOfRange(512)));
    }

    #[test]
    fn control_field_saturated_round_trip() {
        let f = ControlField::new(PortId::at(511), MessageId(255), 65_535).unwrap();
        assert_eq!(f.to_bits(), (1u64 << 33) - 1);
        assert_eq!(ControlField::from_bits(f.to_bits()).unwrap(), f);
    }

    #[test]
    fn notification_fits_one_control_payload() {
        let rec =
            NotificationRecord::explicit(PortId::at(1), PortId::at(3), MessageId(0), 64, SimTime(0));
        let f = notification_wire_encode(&rec).unwrap();
        assert!(f.to_bits() < 1u64 << 56);
        assert_eq!(f.peer, PortId::at(3));
        assert_eq!(f.size, 64);
    }

    #[test]
    fn oversized_notification_is_rejected() {
        let rec = NotificationRecord::explicit(
            PortId::at(1),
            PortId::at(3),
            MessageId(0),
            1 << 16,
            SimTime(0),
        );
        assert!(matches!(
            notification_wire_encode(&rec),
            Err(ModelError::FieldOverflow { field: "size", .. })
        ));
    }

    #[test]
    fn table_rows_sum_to_reference() {
        let l = LatencyProfile::default();
        assert_eq!(l.table_read_total().ps(), l.ref_read_ps);
        assert_eq!(l.table_write_total().ps(), l.ref_write_ps);
        assert_eq!(l.hop(), SimTime::from_ps(58_240));
    }

    #[test]
    fn slot_times() {
        let mut c = ClusterConfig::default();
        assert_eq!(c.slot(), SimTime(660));
        c.link_gbps = 25.0;
        assert_eq!(c.slot(), SimTime(2_640));
    }

    #[test]
    fn rmw_payload_round_trip() {
        let args = RmwArgs::Cas {
            expected: 7,
            new: 9,
        };
        let p = args.to_payload(0x1000);
        assert_eq!(p.len(), 24);
        assert_eq!(
            RmwArgs::from_payload(RmwOpcode::Cas, &p),
            Some((0x1000, args))
        );
    }
}
