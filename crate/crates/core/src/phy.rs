//! 66-bit PCS block framing for memory messages and Ethernet frames, the TX
//! preemption mux, RX reassembly and MAC framing-overhead arithmetic.
//!
//! Memory header (MS and MST payload, 56 bits, MSB first):
//! `kind 2 | src 9 | dst 9 | id 8 | size 16 | addr_lo 12`.
//! The MT payload carries `addr >> 12` (52 bits). The 12-bit address field
//! holds the target address for RREQ/WREQ, the byte offset for RRES, and the
//! opcode for RMWREQ (whose target address travels in the argument payload).
//! MST carries RREQs with an address below 4096 and RRES of at most one byte
//! at offset 0; a one-byte RRES stores its byte in the address field.

use std::collections::VecDeque;
use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{
    ControlField, MemoryMessage, MessageId, MessageKind, ModelError, PortId, RmwArgs, RmwOpcode,
    SimTime, MAX_FIELD_SIZE,
};

pub const PAYLOAD56_MASK: u64 = (1 << 56) - 1;
/// Bit position of the 2-bit kind field in a memory header.
pub const HEADER_KIND_SHIFT: u32 = 54;
const ADDR_LO_BITS: u32 = 12;
const ADDR_LO_MASK: u64 = (1 << ADDR_LO_BITS) - 1;
/// Address-field value of an RRES answering an unsupported RMW opcode.
pub const NACK_FLAG: u64 = ADDR_LO_MASK;

pub const MIN_FRAME_BYTES: usize = 64;
pub const MAX_FRAME_BYTES: usize = 1522;
/// Bytes carried by /S/ and at most by /T/.
const START_BYTES: usize = 7;
pub const MAX_FRAME_BLOCKS: usize = frame_block_count(MAX_FRAME_BYTES);
pub const NONMEM_TX_BUFFER_BLOCKS: usize = 4;

const TERMINATE_CODES: [u8; 8] = [0x87, 0x99, 0xaa, 0xb4, 0xcc, 0xd2, 0xe1, 0xff];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PhyError {
    #[error(transparent)]
    Field(#[from] ModelError),
    #[error("protocol violation: {0}")]
    Protocol(&'static str),
    #[error("message payload length {got} does not match size field {expected}")]
    PayloadMismatch { expected: u32, got: usize },
    #[error("frame of {0} bytes outside [{MIN_FRAME_BYTES}, {MAX_FRAME_BYTES}]")]
    FrameLength(usize),
    #[error("non-memory TX buffer full")]
    Backpressure,
    #[error("RX frame buffer would exceed {0} blocks")]
    RxOverflow(usize),
    #[error("malformed dump line `{0}`")]
    Dump(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SyncHeader {
    Ctrl,
    Data,
}

impl SyncHeader {
    pub fn bits(self) -> &'static str {
        match self {
            SyncHeader::Ctrl => "01",
            SyncHeader::Data => "10",
        }
    }
}

/// Control block types. Standard 10GBASE-R codes for S/T/E; EDM codes are
/// chosen from values unused by the standard.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BlockType {
    Start,
    /// Frame end carrying 0..=7 trailing bytes.
    Terminate(u8),
    Idle,
    MemStart,
    MemTerminate,
    MemSingle,
    Notification,
    Grant,
    Pause,
    Resume,
}

impl BlockType {
    pub fn code(self) -> u8 {
        match self {
            BlockType::Start => 0x78,
            BlockType::Terminate(n) => TERMINATE_CODES[n as usize],
            BlockType::Idle => 0x1e,
            BlockType::MemStart => 0x11,
            BlockType::MemTerminate => 0x22,
            BlockType::MemSingle => 0x3c,
            BlockType::Notification => 0x44,
            BlockType::Grant => 0x5a,
            BlockType::Pause => 0x69,
            BlockType::Resume => 0x96,
        }
    }

    pub fn from_code(code: u8) -> Option<BlockType> {
        if let Some(n) = TERMINATE_CODES.iter().position(|&c| c == code) {
            return Some(BlockType::Terminate(n as u8));
        }
        Some(match code {
            0x78 => BlockType::Start,
            0x1e => BlockType::Idle,
            0x11 => BlockType::MemStart,
            0x22 => BlockType::MemTerminate,
            0x3c => BlockType::MemSingle,
            0x44 => BlockType::Notification,
            0x5a => BlockType::Grant,
            0x69 => BlockType::Pause,
            0x96 => BlockType::Resume,
            _ => return None,
        })
    }

    pub fn name(self) -> String {
        match self {
            BlockType::Start => "S".into(),
            BlockType::Terminate(n) => format!("T{n}"),
            BlockType::Idle => "E".into(),
            BlockType::MemStart => "MS".into(),
            BlockType::MemTerminate => "MT".into(),
            BlockType::MemSingle => "MST".into(),
            BlockType::Notification => "N".into(),
            BlockType::Grant => "G".into(),
            BlockType::Pause => "PAUSE".into(),
            BlockType::Resume => "RESUME".into(),
        }
    }

    fn from_name(name: &str) -> Option<BlockType> {
        if let Some(n) = name.strip_prefix('T').and_then(|d| d.parse::<u8>().ok()) {
            return (n < 8).then_some(BlockType::Terminate(n));
        }
        Some(match name {
            "S" => BlockType::Start,
            "E" => BlockType::Idle,
            "MS" => BlockType::MemStart,
            "MT" => BlockType::MemTerminate,
            "MST" => BlockType::MemSingle,
            "N" => BlockType::Notification,
            "G" => BlockType::Grant,
            "PAUSE" => BlockType::Pause,
            "RESUME" => BlockType::Resume,
            _ => return None,
        })
    }

    fn is_memory_stream(self) -> bool {
        !matches!(
            self,
            BlockType::Start | BlockType::Terminate(_) | BlockType::Idle
        )
    }
}

/// One 66-bit PCS block. `Data` and `MemData` share the DATA sync header;
/// the variant is the per-block stream tag the links carry alongside.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PhyBlock {
    Ctrl { ty: BlockType, payload: u64 },
    Data(u64),
    MemData(u64),
}

impl PhyBlock {
    pub const IDLE: PhyBlock = PhyBlock::Ctrl {
        ty: BlockType::Idle,
        payload: 0,
    };

    pub fn ctrl(ty: BlockType, payload: u64) -> PhyBlock {
        debug_assert!(payload <= PAYLOAD56_MASK);
        PhyBlock::Ctrl { ty, payload }
    }

    pub fn sync(&self) -> SyncHeader {
        match self {
            PhyBlock::Ctrl { .. } => SyncHeader::Ctrl,
            PhyBlock::Data(_) | PhyBlock::MemData(_) => SyncHeader::Data,
        }
    }

    pub fn is_idle(&self) -> bool {
        matches!(
            self,
            PhyBlock::Ctrl {
                ty: BlockType::Idle,
                ..
            }
        )
    }

    /// Blocks the EDM path extracts (memory messages and N/G/PAUSE/RESUME).
    pub fn is_memory_stream(&self) -> bool {
        match self {
            PhyBlock::Ctrl { ty, .. } => ty.is_memory_stream(),
            PhyBlock::Data(_) => false,
            PhyBlock::MemData(_) => true,
        }
    }

    pub fn type_name(&self) -> String {
        match self {
            PhyBlock::Ctrl { ty, .. } => ty.name(),
            PhyBlock::Data(_) => "D".into(),
            PhyBlock::MemData(_) => "MD".into(),
        }
    }

    /// `slot,sync,type,payload_hex`.
    pub fn dump_line(&self, slot: u64) -> String {
        match self {
            PhyBlock::Ctrl { payload, .. } => format!(
                "{slot},{},{},{payload:014x}",
                self.sync().bits(),
                self.type_name()
            ),
            PhyBlock::Data(w) | PhyBlock::MemData(w) => {
                format!("{slot},{},{},{w:016x}", self.sync().bits(), self.type_name())
            }
        }
    }

    pub fn parse_dump_line(line: &str) -> Result<(u64, PhyBlock), PhyError> {
        let bad = || PhyError::Dump(line.to_string());
        let parts: Vec<&str> = line.trim().split(',').collect();
        let [slot, sync, ty, hex] = parts[..] else {
            return Err(bad());
        };
        let slot = slot.parse().map_err(|_| bad())?;
        let word = u64::from_str_radix(hex, 16).map_err(|_| bad())?;
        let blk = match (sync, ty) {
            ("10", "D") => PhyBlock::Data(word),
            ("10", "MD") => PhyBlock::MemData(word),
            ("01", name) => {
                let ty = BlockType::from_name(name).ok_or_else(bad)?;
                if word > PAYLOAD56_MASK {
                    return Err(bad());
                }
                PhyBlock::ctrl(ty, word)
            }
            _ => return Err(bad()),
        };
        Ok((slot, blk))
    }
}

pub fn dump_stream(blocks: &[PhyBlock]) -> String {
    let mut out = String::from("slot,sync,type,payload_hex\n");
    for (i, b) in blocks.iter().enumerate() {
        let _ = writeln!(out, "{}", b.dump_line(i as u64));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct MemHeader {
    kind: MessageKind,
    src: PortId,
    dst: PortId,
    id: MessageId,
    size: u16,
    addr_lo: u64,
}

impl MemHeader {
    fn pack(self) -> u64 {
        ((self.kind.code() as u64) << HEADER_KIND_SHIFT)
            | ((self.src.index() as u64) << 45)
            | ((self.dst.index() as u64) << 36)
            | ((self.id.0 as u64) << 28)
            | ((self.size as u64) << 12)
            | (self.addr_lo & ADDR_LO_MASK)
    }

    fn unpack(p: u64) -> MemHeader {
        MemHeader {
            kind: MessageKind::from_code((p >> HEADER_KIND_SHIFT) as u8),
            src: PortId::at(((p >> 45) & 0x1ff) as usize),
            dst: PortId::at(((p >> 36) & 0x1ff) as usize),
            id: MessageId((p >> 28) as u8),
            size: (p >> 12) as u16,
            addr_lo: p & ADDR_LO_MASK,
        }
    }
}

/// Value of the 64-bit address field a message carries (before the MS/MT
/// split).
fn address_field(msg: &MemoryMessage) -> u64 {
    match msg.kind {
        MessageKind::RmwReq => msg.opcode.map_or(0, |o| o.code() as u64),
        _ => msg.remote_addr,
    }
}

fn fits_single_block(kind: MessageKind, data_bytes: u32, addr_field: u64) -> bool {
    match kind {
        MessageKind::Rreq => addr_field <= ADDR_LO_MASK,
        MessageKind::Rres => {
            (data_bytes == 0 && addr_field <= ADDR_LO_MASK) || (data_bytes == 1 && addr_field == 0)
        }
        _ => false,
    }
}

/// Blocks needed to carry a memory message, without building them.
pub fn memory_block_count(kind: MessageKind, data_bytes: u32, addr_field: u64) -> u64 {
    if fits_single_block(kind, data_bytes, addr_field) {
        1
    } else {
        2 + (data_bytes as u64).div_ceil(8)
    }
}

pub fn encode_memory_message(msg: &MemoryMessage) -> Result<Vec<PhyBlock>, PhyError> {
    if msg.size_bytes > MAX_FIELD_SIZE {
        return Err(ModelError::FieldOverflow {
            field: "size",
            value: msg.size_bytes as u64,
            bits: 16,
        }
        .into());
    }
    let data_bytes = msg.data_bytes();
    if msg.payload.len() != data_bytes as usize {
        return Err(PhyError::PayloadMismatch {
            expected: data_bytes,
            got: msg.payload.len(),
        });
    }
    let addr = address_field(msg);
    let mut header = MemHeader {
        kind: msg.kind,
        src: msg.src,
        dst: msg.dst,
        id: msg.id,
        size: msg.size_bytes as u16,
        addr_lo: addr & ADDR_LO_MASK,
    };
    if fits_single_block(msg.kind, data_bytes, addr) {
        if msg.kind == MessageKind::Rres && data_bytes == 1 {
            header.addr_lo = msg.payload[0] as u64;
        }
        return Ok(vec![PhyBlock::ctrl(BlockType::MemSingle, header.pack())]);
    }
    let mut out = Vec::with_capacity(memory_block_count(msg.kind, data_bytes, addr) as usize);
    out.push(PhyBlock::ctrl(BlockType::MemStart, header.pack()));
    for chunk in msg.payload.chunks(8) {
        let mut word = [0u8; 8];
        word[..chunk.len()].copy_from_slice(chunk);
        out.push(PhyBlock::MemData(u64::from_le_bytes(word)));
    }
    out.push(PhyBlock::ctrl(BlockType::MemTerminate, addr >> ADDR_LO_BITS));
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ControlBlock {
    Notification(ControlField),
    Grant(ControlField),
    Pause,
    Resume,
}

pub fn encode_control(c: ControlBlock) -> PhyBlock {
    match c {
        ControlBlock::Notification(f) => PhyBlock::ctrl(BlockType::Notification, f.to_bits()),
        ControlBlock::Grant(f) => PhyBlock::ctrl(BlockType::Grant, f.to_bits()),
        ControlBlock::Pause => PhyBlock::ctrl(BlockType::Pause, 0),
        ControlBlock::Resume => PhyBlock::ctrl(BlockType::Resume, 0),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EthernetFrame {
    pub bytes: Vec<u8>,
}

pub const fn frame_block_count(len: usize) -> usize {
    2 + (len - START_BYTES) / 8
}

pub fn encode_frame(frame: &EthernetFrame) -> Result<Vec<PhyBlock>, PhyError> {
    let len = frame.bytes.len();
    if !(MIN_FRAME_BYTES..=MAX_FRAME_BYTES).contains(&len) {
        return Err(PhyError::FrameLength(len));
    }
    let pack = |bytes: &[u8]| {
        let mut word = [0u8; 8];
        word[..bytes.len()].copy_from_slice(bytes);
        u64::from_le_bytes(word)
    };
    let mut out = Vec::with_capacity(frame_block_count(len));
    out.push(PhyBlock::ctrl(BlockType::Start, pack(&frame.bytes[..START_BYTES])));
    let body = &frame.bytes[START_BYTES..];
    let full = body.len() / 8 * 8;
    for w in body[..full].chunks(8) {
        out.push(PhyBlock::Data(pack(w)));
    }
    let tail = &body[full..];
    out.push(PhyBlock::ctrl(
        BlockType::Terminate(tail.len() as u8),
        pack(tail),
    ));
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Decoded {
    Memory(MemoryMessage),
    Control(ControlBlock),
    Frame(EthernetFrame),
    Idle,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DecodedStream {
    pub memory: Vec<MemoryMessage>,
    pub control: Vec<ControlBlock>,
    pub frames: Vec<EthernetFrame>,
    pub idles: usize,
}

struct MemAcc {
    header: MemHeader,
    data: Vec<u8>,
}

/// Incremental decoder for one simplex link. A read-like request may nest
/// inside an open WREQ/RRES (control preempting data); nothing nests deeper.
#[derive(Default)]
pub struct StreamDecoder {
    frame: Option<Vec<u8>>,
    open: Vec<MemAcc>,
}

impl StreamDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, blk: PhyBlock) -> Result<Option<Decoded>, PhyError> {
        match blk {
            PhyBlock::Data(w) => {
                let frame = self
                    .frame
                    .as_mut()
                    .ok_or(PhyError::Protocol("D block outside any frame"))?;
                if frame.len() + 8 > MAX_FRAME_BYTES {
                    return Err(PhyError::Protocol("frame exceeds maximum length"));
                }
                frame.extend_from_slice(&w.to_le_bytes());
                Ok(None)
            }
            PhyBlock::MemData(w) => {
                let acc = self
                    .open
                    .last_mut()
                    .ok_or(PhyError::Protocol("MD block outside any memory message"))?;
                let expected = data_len(&acc.header);
                if acc.data.len() >= expected {
                    return Err(PhyError::Protocol("MD blocks exceed the size field"));
                }
                acc.data.extend_from_slice(&w.to_le_bytes());
                Ok(None)
            }
            PhyBlock::Ctrl { ty, payload } => self.push_ctrl(ty, payload),
        }
    }

    fn push_ctrl(&mut self, ty: BlockType, payload: u64) -> Result<Option<Decoded>, PhyError> {
        match ty {
            BlockType::Idle => Ok(Some(Decoded::Idle)),
            BlockType::Start => {
                if self.frame.is_some() {
                    return Err(PhyError::Protocol("S inside an open frame"));
                }
                self.frame = Some(payload.to_le_bytes()[..START_BYTES].to_vec());
                Ok(None)
            }
            BlockType::Terminate(n) => {
                let mut bytes = self
                    .frame
                    .take()
                    .ok_or(PhyError::Protocol("T without matching S"))?;
                bytes.extend_from_slice(&payload.to_le_bytes()[..n as usize]);
                if bytes.len() < MIN_FRAME_BYTES {
                    return Err(PhyError::Protocol("runt frame"));
                }
                Ok(Some(Decoded::Frame(EthernetFrame { bytes })))
            }
            BlockType::MemStart => {
                let header = MemHeader::unpack(payload);
                match self.open.as_slice() {
                    [] => {}
                    [outer] if header.kind.is_read_like() && !outer.header.kind.is_read_like() => {}
                    _ => return Err(PhyError::Protocol("MS inside an open memory message")),
                }
                self.open.push(MemAcc {
                    header,
                    data: Vec::with_capacity(data_len(&header)),
                });
                Ok(None)
            }
            BlockType::MemTerminate => {
                let acc = self
                    .open
                    .pop()
                    .ok_or(PhyError::Protocol("MT without matching MS"))?;
                let expected = data_len(&acc.header);
                if acc.data.len() < expected {
                    return Err(PhyError::Protocol("MT before all MD blocks"));
                }
                let mut data = acc.data;
                data.truncate(expected);
                let addr = (payload << ADDR_LO_BITS) | acc.header.addr_lo;
                Ok(Some(Decoded::Memory(assemble(acc.header, addr, data)?)))
            }
            BlockType::MemSingle => {
                let h = MemHeader::unpack(payload);
                let msg = match h.kind {
                    MessageKind::Rreq => assemble(h, h.addr_lo, Vec::new())?,
                    MessageKind::Rres if h.size == 1 => assemble(h, 0, vec![h.addr_lo as u8])?,
                    MessageKind::Rres if h.size == 0 => assemble(h, h.addr_lo, Vec::new())?,
                    _ => return Err(PhyError::Protocol("MST with a multi-block message kind")),
                };
                Ok(Some(Decoded::Memory(msg)))
            }
            BlockType::Notification => Ok(Some(Decoded::Control(ControlBlock::Notification(
                ControlField::from_bits(payload)?,
            )))),
            BlockType::Grant => Ok(Some(Decoded::Control(ControlBlock::Grant(
                ControlField::from_bits(payload)?,
            )))),
            BlockType::Pause => Ok(Some(Decoded::Control(ControlBlock::Pause))),
            BlockType::Resume => Ok(Some(Decoded::Control(ControlBlock::Resume))),
        }
    }

    /// Errors if a frame or memory message is still open.
    pub fn finish(&self) -> Result<(), PhyError> {
        if self.frame.is_some() {
            return Err(PhyError::Protocol("stream ends inside a frame"));
        }
        if !self.open.is_empty() {
            return Err(PhyError::Protocol("stream ends inside a memory message"));
        }
        Ok(())
    }
}

fn data_len(h: &MemHeader) -> usize {
    match h.kind {
        MessageKind::Rreq => 0,
        _ => h.size as usize,
    }
}

fn assemble(h: MemHeader, addr: u64, payload: Vec<u8>) -> Result<MemoryMessage, PhyError> {
    let (remote_addr, opcode) = match h.kind {
        MessageKind::RmwReq => {
            let op = RmwOpcode::from_code(addr as u16);
            let target = RmwArgs::from_payload(op, &payload)
                .map(|(a, _)| a)
                .ok_or(PhyError::Protocol("RMW arguments shorter than 8 bytes"))?;
            (target, Some(op))
        }
        _ => (addr, None),
    };
    Ok(MemoryMessage {
        kind: h.kind,
        src: h.src,
        dst: h.dst,
        id: h.id,
        size_bytes: h.size as u32,
        remote_addr,
        opcode,
        payload,
        created_at: SimTime::ZERO,
    })
}

pub fn decode_block_stream(stream: &[PhyBlock]) -> Result<DecodedStream, PhyError> {
    let mut dec = StreamDecoder::new();
    let mut out = DecodedStream::default();
    for &blk in stream {
        match dec.push(blk)? {
            Some(Decoded::Memory(m)) => out.memory.push(m),
            Some(Decoded::Control(c)) => out.control.push(c),
            Some(Decoded::Frame(f)) => out.frames.push(f),
            Some(Decoded::Idle) => out.idles += 1,
            None => {}
        }
    }
    dec.finish()?;
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuxPolicy {
    Fair,
    MemStrict,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Memory,
    NonMemory,
    Idle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MuxOutput {
    pub block: PhyBlock,
    pub source: Source,
}

/// TX arbiter between the EDM memory stream and the standard encoder output,
/// which waits in a 4-block buffer.
#[derive(Clone, Debug)]
pub struct PreemptionMux {
    pub policy: MuxPolicy,
    nonmem: VecDeque<PhyBlock>,
    last: Option<Source>,
    peak_nonmem: usize,
}

impl PreemptionMux {
    pub fn new(policy: MuxPolicy) -> Self {
        PreemptionMux {
            policy,
            nonmem: VecDeque::with_capacity(NONMEM_TX_BUFFER_BLOCKS),
            last: None,
            peak_nonmem: 0,
        }
    }

    pub fn nonmem_space(&self) -> usize {
        NONMEM_TX_BUFFER_BLOCKS - self.nonmem.len()
    }

    pub fn nonmem_len(&self) -> usize {
        self.nonmem.len()
    }

    pub fn peak_nonmem(&self) -> usize {
        self.peak_nonmem
    }

    pub fn push_nonmem(&mut self, blk: PhyBlock) -> Result<(), PhyError> {
        if self.nonmem.len() >= NONMEM_TX_BUFFER_BLOCKS {
            return Err(PhyError::Backpressure);
        }
        self.nonmem.push_back(blk);
        self.peak_nonmem = self.peak_nonmem.max(self.nonmem.len());
        Ok(())
    }

    /// Picks the stream for this slot. FAIR strictly alternates while both
    /// are backlogged and skips an empty stream.
    pub fn select(&mut self, mem_ready: bool) -> Source {
        let nonmem_ready = !self.nonmem.is_empty();
        let pick = match (mem_ready, nonmem_ready) {
            (false, false) => return Source::Idle,
            (true, false) => Source::Memory,
            (false, true) => Source::NonMemory,
            (true, true) => match self.policy {
                MuxPolicy::MemStrict => Source::Memory,
                MuxPolicy::Fair => {
                    if self.last == Some(Source::Memory) {
                        Source::NonMemory
                    } else {
                        Source::Memory
                    }
                }
            },
        };
        self.last = Some(pick);
        pick
    }

    /// Emits one block. A memory block is consumed only when
    /// `source == Source::Memory`; otherwise the caller keeps it.
    pub fn mux_next_block(&mut self, mem_ready: Option<PhyBlock>) -> MuxOutput {
        match self.select(mem_ready.is_some()) {
            Source::Memory => MuxOutput {
                block: mem_ready.expect("selected memory without a block"),
                source: Source::Memory,
            },
            Source::NonMemory => MuxOutput {
                block: self.nonmem.pop_front().expect("selected empty buffer"),
                source: Source::NonMemory,
            },
            Source::Idle => MuxOutput {
                block: PhyBlock::IDLE,
                source: Source::Idle,
            },
        }
    }
}

/// One link's TX side: queued memory blocks, the standard encoder's pending
/// frame blocks (held back by buffer back-pressure) and the mux.
#[derive(Clone, Debug)]
pub struct TxPath {
    pub mux: PreemptionMux,
    mem: VecDeque<PhyBlock>,
    encoder: VecDeque<PhyBlock>,
}

impl TxPath {
    pub fn new(policy: MuxPolicy) -> Self {
        TxPath {
            mux: PreemptionMux::new(policy),
            mem: VecDeque::new(),
            encoder: VecDeque::new(),
        }
    }

    pub fn queue_memory(&mut self, blocks: &[PhyBlock]) {
        self.mem.extend(blocks.iter().copied());
    }

    pub fn queue_frame(&mut self, blocks: &[PhyBlock]) {
        self.encoder.extend(blocks.iter().copied());
    }

    pub fn mem_backlog(&self) -> usize {
        self.mem.len()
    }

    pub fn is_drained(&self) -> bool {
        self.mem.is_empty() && self.encoder.is_empty() && self.mux.nonmem_len() == 0
    }

    pub fn tick(&mut self) -> MuxOutput {
        while self.mux.nonmem_space() > 0 {
            match self.encoder.pop_front() {
                Some(b) => self.mux.push_nonmem(b).expect("space checked"),
                None => break,
            }
        }
        let out = self.mux.mux_next_block(self.mem.front().copied());
        if out.source == Source::Memory {
            self.mem.pop_front();
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RxOutput {
    /// Memory-stream block extracted this slot.
    pub memory: Option<PhyBlock>,
    /// Block handed to the standard decoder this slot.
    pub decoder: PhyBlock,
}

/// RX side: memory blocks leave immediately; frame blocks wait until their
/// /T/ arrives and then leave in consecutive slots, idles filling the gaps.
#[derive(Clone, Debug)]
pub struct RxReassembler {
    current: Vec<PhyBlock>,
    release: VecDeque<PhyBlock>,
    max_blocks: usize,
    peak: usize,
}

impl Default for RxReassembler {
    fn default() -> Self {
        Self::new(MAX_FRAME_BLOCKS)
    }
}

impl RxReassembler {
    pub fn new(max_blocks: usize) -> Self {
        RxReassembler {
            current: Vec::new(),
            release: VecDeque::new(),
            max_blocks,
            peak: 0,
        }
    }

    pub fn in_frame(&self) -> bool {
        !self.current.is_empty()
    }

    pub fn occupancy(&self) -> usize {
        self.current.len() + self.release.len()
    }

    pub fn peak_occupancy(&self) -> usize {
        self.peak
    }

    pub fn rx_push(&mut self, blk: PhyBlock) -> Result<RxOutput, PhyError> {
        let decoder = self.release.pop_front().unwrap_or(PhyBlock::IDLE);
        let mut memory = None;
        match blk {
            b if b.is_memory_stream() => memory = Some(b),
            b if b.is_idle() => {}
            PhyBlock::Ctrl {
                ty: BlockType::Start,
                ..
            } => {
                if self.in_frame() {
                    return Err(PhyError::Protocol("S inside an open frame"));
                }
                self.current.push(blk);
            }
            PhyBlock::Data(_) => {
                if !self.in_frame() {
                    return Err(PhyError::Protocol("D block outside any frame"));
                }
                self.current.push(blk);
            }
            PhyBlock::Ctrl {
                ty: BlockType::Terminate(_),
                ..
            } => {
                if !self.in_frame() {
                    return Err(PhyError::Protocol("T without matching S"));
                }
                self.current.push(blk);
                self.release.extend(self.current.drain(..));
            }
            _ => unreachable!("all block kinds covered"),
        }
        if self.occupancy() > self.max_blocks {
            return Err(PhyError::RxOverflow(self.max_blocks));
        }
        self.peak = self.peak.max(self.occupancy());
        Ok(RxOutput { memory, decoder })
    }

    pub fn is_drained(&self) -> bool {
        self.current.is_empty() && self.release.is_empty()
    }
}

pub const MIN_MAC_FRAME_BYTES: u32 = 64;
pub const IFG_BYTES: u32 = 12;
pub const PREAMBLE_BYTES: u32 = 8;

/// What counts as waste in `mac_framing_overhead`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MacAccounting {
    /// Padding up to the 64 B minimum frame.
    FrameOnly,
    /// The 12 B inter-frame gap after a frame.
    IfgOnly,
    /// Padding, preamble and IFG together.
    Full,
}

/// Wasted fraction of wire bytes when `payload_bytes` ride one MAC frame.
pub fn mac_framing_overhead(payload_bytes: u32, accounting: MacAccounting) -> f64 {
    assert!(payload_bytes > 0);
    let frame = payload_bytes.max(MIN_MAC_FRAME_BYTES) as f64;
    let payload = payload_bytes as f64;
    match accounting {
        MacAccounting::FrameOnly => 1.0 - payload / frame,
        MacAccounting::IfgOnly => IFG_BYTES as f64 / (frame + IFG_BYTES as f64),
        MacAccounting::Full => 1.0 - payload / (frame + (IFG_BYTES + PREAMBLE_BYTES) as f64),
    }
}

/// Wait imposed on a memory block by a frame that cannot be preempted.
pub fn nonpreemptive_wait(frame_bytes: u32, link_gbps: f64) -> SimTime {
    SimTime::from_ps((frame_bytes as f64 * 8.0 * 1_000.0 / link_gbps).round() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(i: usize) -> PortId {
        PortId::at(i)
    }

    #[test]
    fn small_rreq_is_one_mst() {
        let m = MemoryMessage::rreq(p(1), p(2), MessageId(7), 0x40, 64);
        let blocks = encode_memory_message(&m).unwrap();
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].type_name(), "MST");
        assert_eq!(decode_block_stream(&blocks).unwrap().memory, vec![m]);
    }

    #[test]
    fn high_address_rreq_spills_into_mt() {
        let m = MemoryMessage::rreq(p(1), p(2), MessageId(7), 0xdead_beef_0040, 64);
        let blocks = encode_memory_message(&m).unwrap();
        let names: Vec<String> = blocks.iter().map(|b| b.type_name()).collect();
        assert_eq!(names, ["MS", "MT"]);
        assert_eq!(decode_block_stream(&blocks).unwrap().memory, vec![m]);
    }

    #[test]
    fn null_rres_is_one_mst() {
        let m = MemoryMessage::rres(p(2), p(1), MessageId(3), 0, Vec::new());
        let blocks = encode_memory_message(&m).unwrap();
        assert_eq!(blocks.len(), 1);
        let PhyBlock::Ctrl { payload, .. } = blocks[0] else {
            panic!()
        };
        assert_eq!((payload >> 12) & 0xffff, 0, "size field");
        assert_eq!(decode_block_stream(&blocks).unwrap().memory, vec![m]);
    }

    #[test]
    fn orphan_terminators_are_rejected() {
        let mt = PhyBlock::ctrl(BlockType::MemTerminate, 0);
        assert!(decode_block_stream(&[mt]).is_err());
        assert!(decode_block_stream(&[PhyBlock::Data(1)]).is_err());
        assert!(decode_block_stream(&[PhyBlock::MemData(1)]).is_err());
        let t = PhyBlock::ctrl(BlockType::Terminate(0), 0);
        assert!(decode_block_stream(&[t]).is_err());
    }

    #[test]
    fn dump_round_trip() {
        let m = MemoryMessage::wreq(p(1), p(2), MessageId(9), 0x1_0000, vec![0xab; 20]);
        let blocks = encode_memory_message(&m).unwrap();
        let text = dump_stream(&blocks);
        let parsed: Vec<PhyBlock> = text
            .lines()
            .skip(1)
            .map(|l| PhyBlock::parse_dump_line(l).unwrap().1)
            .collect();
        assert_eq!(parsed, blocks);
        assert!(text.lines().nth(1).unwrap().starts_with("0,01,MS,"));
    }

    #[test]
    fn fair_alternates_when_both_backlogged() {
        let mut tx = TxPath::new(MuxPolicy::Fair);
        tx.queue_memory(&[PhyBlock::MemData(0); 20]);
        tx.queue_frame(&[PhyBlock::Data(0); 20]);
        let mut mem = 0;
        for _ in 0..10 {
            if tx.tick().source == Source::Memory {
                mem += 1;
            }
        }
        assert_eq!(mem, 5);
    }

    #[test]
    fn only_nonmemory_ready_emits_nonmemory() {
        let mut mux = PreemptionMux::new(MuxPolicy::Fair);
        mux.push_nonmem(PhyBlock::Data(5)).unwrap();
        let out = mux.mux_next_block(None);
        assert_eq!(out.source, Source::NonMemory);
        assert_eq!(mux.mux_next_block(None).source, Source::Idle);
    }

    #[test]
    fn nonmem_buffer_is_bounded() {
        let mut mux = PreemptionMux::new(MuxPolicy::Fair);
        for _ in 0..4 {
            mux.push_nonmem(PhyBlock::Data(0)).unwrap();
        }
        assert_eq!(mux.push_nonmem(PhyBlock::Data(0)), Err(PhyError::Backpressure));
    }

    #[test]
    fn mac_overheads() {
        assert_eq!(mac_framing_overhead(8, MacAccounting::FrameOnly), 0.875);
        let ifg = mac_framing_overhead(64, MacAccounting::IfgOnly);
        assert!((ifg - 12.0 / 76.0).abs() < 1e-12);
        assert!(mac_framing_overhead(1500, MacAccounting::Full) < 0.02);
        assert_eq!(nonpreemptive_wait(1500, 100.0), SimTime::from_ns(120));
    }

    #[test]
    fn minimum_frame_is_nine_blocks() {
        assert_eq!(frame_block_count(64), 9);
        let f = EthernetFrame {
            bytes: (0..64).collect(),
        };
        let blocks = encode_frame(&f).unwrap();
        assert_eq!(blocks.len(), 9);
        assert_eq!(decode_block_stream(&blocks).unwrap().frames, vec![f]);
        assert!(encode_frame(&EthernetFrame { bytes: vec![0; 63] }).is_err());
    }
}
