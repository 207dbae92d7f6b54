//! Endpoint logic shared by compute and memory nodes: submission, message
//! ids, the message state table, grant handling, RRES generation, atomics,
//! receive-buffer flow control and read timeouts.
//!
//! Timing is owned by the caller; this module only advances state and
//! reports the host-side processing delays it implies.

use std::collections::{HashMap, HashSet, VecDeque};

use thiserror::Error;

use crate::model::{
    BufferedRequest, LatencyProfile, MessageId, MessageKind, PortId, RmwArgs, SimTime,
    MESSAGE_ID_SPACE,
};
use crate::phy::{memory_block_count, NACK_FLAG};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HostError {
    #[error("host {0} cannot send to itself")]
    SelfTarget(PortId),
    #[error("{kind:?} with size 0")]
    ZeroSize { kind: MessageKind },
    #[error("RMWREQ without arguments")]
    MissingRmwArgs,
    #[error("destination {dst} outside the {n}-port cluster")]
    BadDestination { dst: PortId, n: usize },
    #[error("protocol violation: grant for unknown message ({peer},{id})")]
    UnknownGrant { peer: PortId, id: u8 },
    #[error("protocol violation: grant offset {got} for ({peer},{id}), expected {want}")]
    GrantOffset {
        peer: PortId,
        id: u8,
        got: u32,
        want: u32,
    },
    #[error("protocol violation: data for unknown message ({peer},{id})")]
    UnknownData { peer: PortId, id: u8 },
    #[error("protocol violation: data offset {got} for ({peer},{id}), expected {want}")]
    DataOffset {
        peer: PortId,
        id: u8,
        got: u32,
        want: u32,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct HostConfig {
    pub port: PortId,
    pub n_ports: usize,
    pub max_active: u32,
    pub latency: LatencyProfile,
    pub read_timeout: SimTime,
    pub rx_thres_bytes: u64,
    /// Application drain rate of the receive buffer; `None` drains at once.
    pub rx_drain_gbps: Option<f64>,
}

/// Application request handed to [`Host::submit`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SubmitRequest {
    pub kind: MessageKind,
    pub dst: PortId,
    pub addr: u64,
    /// Read length, write length, or ignored for RMW.
    pub size: u32,
    pub rmw: Option<RmwArgs>,
    /// Caller bookkeeping, returned in the completion.
    pub tag: u64,
}

/// Data of one granted chunk as it travels through the fabric. `tag` and
/// `submitted_at` are simulator bookkeeping, not wire content.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DataChunk {
    pub kind: MessageKind,
    pub src: PortId,
    pub dst: PortId,
    pub id: MessageId,
    pub offset: u32,
    pub len: u32,
    pub total: u32,
    pub blocks: u64,
    pub tag: u64,
    pub submitted_at: SimTime,
    /// RMW result word, if any.
    pub value: Option<u64>,
    pub nack: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum CompletionStatus {
    Ok,
    /// RMW with an unsupported opcode.
    Nack,
    /// Zero-size read response after a timeout.
    Null,
}

/// One finished request as seen by the application.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Completion {
    pub tag: u64,
    pub kind: MessageKind,
    /// Requester (compute node).
    pub src: PortId,
    /// Memory node.
    pub dst: PortId,
    pub id: MessageId,
    pub bytes: u32,
    pub submitted_at: SimTime,
    pub completed_at: SimTime,
    /// When the first data block was processed at the completing host.
    pub first_block_at: SimTime,
    pub status: CompletionStatus,
    pub value: Option<u64>,
}

impl Completion {
    pub fn latency(&self) -> SimTime {
        self.completed_at - self.submitted_at
    }
}

/// Control output of one TX dequeue.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TxControl {
    /// /N/ announcing a WREQ.
    Notification {
        peer: PortId,
        id: MessageId,
        size: u32,
    },
    /// RREQ/RMWREQ blocks, sent without waiting for a grant.
    Request(BufferedRequest),
}

impl TxControl {
    pub fn blocks(&self) -> u64 {
        match self {
            TxControl::Notification { .. } => 1,
            TxControl::Request(r) => r.block_count as u64,
        }
    }
}

/// Arm this timer when a read-like request leaves the host.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TimeoutArm {
    pub peer: PortId,
    pub id: MessageId,
    pub generation: u64,
    pub fires_at: SimTime,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Originated {
    kind: MessageKind,
    local_addr: u64,
    total: u32,
    /// Bytes granted (WREQ) or received (RREQ/RMWREQ).
    progress: u32,
    tag: u64,
    submitted_at: SimTime,
    generation: u64,
    first_block_at: Option<SimTime>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Served {
    kind: MessageKind,
    local_addr: u64,
    total: u32,
    progress: u32,
    tag: u64,
    submitted_at: SimTime,
    first_block_at: Option<SimTime>,
    value: Option<u64>,
    nack: bool,
}

/// In-flight messages keyed by (peer, id): those this host originated and
/// those it is serving (RRES it sends, WREQ it receives).
#[derive(Clone, Debug, Default)]
pub struct MessageStateTable {
    originated: HashMap<(u16, u8), Originated>,
    served: HashMap<(u16, u8), Served>,
}

impl MessageStateTable {
    pub fn len(&self) -> usize {
        self.originated.len() + self.served.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn has_originated(&self, peer: PortId, id: MessageId) -> bool {
        self.originated.contains_key(&key(peer, id))
    }

    pub fn has_served(&self, peer: PortId, id: MessageId) -> bool {
        self.served.contains_key(&key(peer, id))
    }
}

fn key(peer: PortId, id: MessageId) -> (u16, u8) {
    (peer.index() as u16, id.0)
}

/// FIFO from the RX to the TX clock domain. Entries become visible after the
/// crossing and leave at most one per host cycle.
#[derive(Clone, Debug)]
pub struct GrantQueue {
    crossing: SimTime,
    cycle: SimTime,
    last_ready: Option<SimTime>,
    pub max_depth: usize,
    pending: VecDeque<SimTime>,
}

impl GrantQueue {
    pub fn new(lat: &LatencyProfile) -> Self {
        GrantQueue {
            crossing: lat.cycles(lat.grant_q_read),
            cycle: lat.cycles(1),
            last_ready: None,
            max_depth: 0,
            pending: VecDeque::new(),
        }
    }

    /// Enqueues an entry written at `now`; returns when TX reads it.
    pub fn push(&mut self, now: SimTime) -> SimTime {
        while self.pending.front().is_some_and(|&t| t <= now) {
            self.pending.pop_front();
        }
        let mut ready = now + self.crossing;
        if let Some(last) = self.last_ready {
            ready = ready.max(last + self.cycle);
        }
        self.last_ready = Some(ready);
        self.pending.push_back(ready);
        self.max_depth = self.max_depth.max(self.pending.len());
        ready
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowSignal {
    Pause,
    Resume,
}

/// Receive-buffer occupancy with a linear application drain. PAUSE fires on
/// the upward crossing of the threshold, RESUME on the downward one.
#[derive(Clone, Debug)]
pub struct RxBufferGauge {
    pub thres_bytes: u64,
    /// Bytes per ps; `None` drains instantly.
    drain: Option<f64>,
    occupancy: f64,
    at: SimTime,
    pub paused_sent: bool,
    pub peak_bytes: f64,
}

impl RxBufferGauge {
    pub fn new(thres_bytes: u64, drain_gbps: Option<f64>) -> Self {
        RxBufferGauge {
            thres_bytes,
            drain: drain_gbps.map(|g| g / 8_000.0),
            occupancy: 0.0,
            at: SimTime::ZERO,
            paused_sent: false,
            peak_bytes: 0.0,
        }
    }

    fn settle(&mut self, now: SimTime) {
        if let Some(rate) = self.drain {
            let dt = now.saturating_sub(self.at).ps() as f64;
            self.occupancy = (self.occupancy - rate * dt).max(0.0);
        }
        self.at = self.at.max(now);
    }

    pub fn occupancy(&mut self, now: SimTime) -> f64 {
        self.settle(now);
        self.occupancy
    }

    pub fn on_arrival(&mut self, now: SimTime, bytes: u32) -> Option<FlowSignal> {
        if self.drain.is_none() {
            return None;
        }
        self.settle(now);
        self.occupancy += bytes as f64;
        self.peak_bytes = self.peak_bytes.max(self.occupancy);
        if !self.paused_sent && self.occupancy >= self.thres_bytes as f64 {
            self.paused_sent = true;
            return Some(FlowSignal::Pause);
        }
        None
    }

    /// Emits RESUME once occupancy has dropped below the threshold.
    pub fn poll(&mut self, now: SimTime) -> Option<FlowSignal> {
        self.settle(now);
        if self.paused_sent && self.occupancy < self.thres_bytes as f64 {
            self.paused_sent = false;
            return Some(FlowSignal::Resume);
        }
        None
    }

    /// Earliest time at which [`poll`](Self::poll) would emit RESUME.
    pub fn resume_time(&self) -> Option<SimTime> {
        let rate = self.drain?;
        if !self.paused_sent {
            return None;
        }
        let excess = (self.occupancy - self.thres_bytes as f64).max(0.0);
        Some(self.at + SimTime::from_ps((excess / rate).floor() as u64 + 1))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RmwOutcome {
    pub result_bytes: u32,
    pub value: Option<u64>,
    pub nack: bool,
}

/// Word-addressed backing store of a memory node.
#[derive(Clone, Debug, Default)]
pub struct MemoryStore {
    words: HashMap<u64, u64>,
}

impl MemoryStore {
    pub fn load(&self, addr: u64) -> u64 {
        self.words.get(&addr).copied().unwrap_or(0)
    }

    pub fn store(&mut self, addr: u64, v: u64) {
        self.words.insert(addr, v);
    }

    /// Runs one atomic operation; no other request interleaves with it.
    pub fn execute_rmw(&mut self, addr: u64, args: RmwArgs) -> RmwOutcome {
        let old = self.load(addr);
        match args {
            RmwArgs::Cas { expected, new } => {
                let hit = old == expected;
                if hit {
                    self.store(addr, new);
                }
                RmwOutcome {
                    result_bytes: 1,
                    value: Some(hit as u64),
                    nack: false,
                }
            }
            RmwArgs::FetchAdd { delta } => {
                self.store(addr, old.wrapping_add(delta));
                RmwOutcome {
                    result_bytes: 8,
                    value: Some(old),
                    nack: false,
                }
            }
            RmwArgs::Raw { .. } => RmwOutcome {
                result_bytes: 0,
                value: None,
                nack: true,
            },
        }
    }
}

struct Queued {
    req: SubmitRequest,
    id: MessageId,
    submitted_at: SimTime,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct HostStats {
    pub submitted: u64,
    pub id_backpressure: u64,
    pub grants: u64,
    pub data_bytes_sent: u64,
    pub data_bytes_received: u64,
    pub timeouts: u64,
    pub discarded_late_chunks: u64,
    pub pauses: u64,
}

pub struct Host {
    cfg: HostConfig,
    queue: VecDeque<Queued>,
    /// Submissions waiting for a free id toward their destination.
    blocked: VecDeque<(SubmitRequest, SimTime)>,
    ids: Vec<[u64; MESSAGE_ID_SPACE / 64]>,
    next_id: Vec<u8>,
    active: Vec<u32>,
    table: MessageStateTable,
    timed_out: HashSet<(u16, u8)>,
    generation: u64,
    pub memory: MemoryStore,
    pub grant_queue: GrantQueue,
    pub rx_gauge: RxBufferGauge,
    stats: HostStats,
}

impl Host {
    pub fn new(cfg: HostConfig) -> Self {
        let n = cfg.n_ports;
        Host {
            queue: VecDeque::new(),
            blocked: VecDeque::new(),
            ids: vec![[0; MESSAGE_ID_SPACE / 64]; n],
            next_id: vec![0; n],
            active: vec![0; n],
            table: MessageStateTable::default(),
            timed_out: HashSet::new(),
            generation: 0,
            memory: MemoryStore::default(),
            grant_queue: GrantQueue::new(&cfg.latency),
            rx_gauge: RxBufferGauge::new(cfg.rx_thres_bytes, cfg.rx_drain_gbps),
            stats: HostStats::default(),
            cfg,
        }
    }

    pub fn port(&self) -> PortId {
        self.cfg.port
    }

    pub fn stats(&self) -> &HostStats {
        &self.stats
    }

    pub fn table(&self) -> &MessageStateTable {
        &self.table
    }

    pub fn queued(&self) -> usize {
        self.queue.len() + self.blocked.len()
    }

    pub fn active_toward(&self, peer: PortId) -> u32 {
        self.active[peer.index()]
    }

    fn alloc_id(&mut self, peer: usize) -> Option<MessageId> {
        let start = self.next_id[peer];
        for k in 0..MESSAGE_ID_SPACE {
            let id = start.wrapping_add(k as u8);
            let (w, b) = (id as usize / 64, id as usize % 64);
            if self.ids[peer][w] & (1 << b) == 0 {
                self.ids[peer][w] |= 1 << b;
                self.next_id[peer] = id.wrapping_add(1);
                return Some(MessageId(id));
            }
        }
        None
    }

    fn free_id(&mut self, peer: usize, id: MessageId) {
        let (w, b) = (id.0 as usize / 64, id.0 as usize % 64);
        self.ids[peer][w] &= !(1 << b);
        if let Some(pos) = self.blocked.iter().position(|(r, _)| r.dst.index() == peer) {
            let (req, at) = self.blocked.remove(pos).expect("position is valid");
            let id = self.alloc_id(peer).expect("an id was just freed");
            self.queue.push_back(Queued {
                req,
                id,
                submitted_at: at,
            });
        }
    }

    /// Queues a request. Returns `None` when all ids toward `dst` are in
    /// flight; the request then waits inside the host for a free id.
    pub fn submit(&mut self, req: SubmitRequest, now: SimTime) -> Result<Option<MessageId>, HostError> {
        if req.dst == self.cfg.port {
            return Err(HostError::SelfTarget(req.dst));
        }
        if req.dst.index() >= self.cfg.n_ports {
            return Err(HostError::BadDestination {
                dst: req.dst,
                n: self.cfg.n_ports,
            });
        }
        match req.kind {
            MessageKind::RmwReq if req.rmw.is_none() => return Err(HostError::MissingRmwArgs),
            MessageKind::Rreq | MessageKind::Wreq if req.size == 0 => {
                return Err(HostError::ZeroSize { kind: req.kind })
            }
            _ => {}
        }
        self.stats.submitted += 1;
        let peer = req.dst.index();
        if self.blocked.iter().any(|(r, _)| r.dst.index() == peer) {
            self.stats.id_backpressure += 1;
            self.blocked.push_back((req, now));
            return Ok(None);
        }
        match self.alloc_id(peer) {
            Some(id) => {
                self.queue.push_back(Queued {
                    req,
                    id,
                    submitted_at: now,
                });
                Ok(Some(id))
            }
            None => {
                self.stats.id_backpressure += 1;
                self.blocked.push_back((req, now));
                Ok(None)
            }
        }
    }

    /// True if [`tx_dequeue`](Self::tx_dequeue) would emit something.
    pub fn has_eligible(&self) -> bool {
        self.queue
            .iter()
            .any(|q| self.active[q.req.dst.index()] < self.cfg.max_active)
    }

    /// Takes the oldest message whose destination is below the active
    /// notification limit, records its state and returns its control unit.
    pub fn tx_dequeue(&mut self, now: SimTime) -> Option<(TxControl, Option<TimeoutArm>)> {
        let pos = self
            .queue
            .iter()
            .position(|q| self.active[q.req.dst.index()] < self.cfg.max_active)?;
        let q = self.queue.remove(pos).expect("position is valid");
        let (req, id) = (q.req, q.id);
        self.active[req.dst.index()] += 1;
        self.generation += 1;
        let (total, ctl) = match req.kind {
            MessageKind::Wreq => (
                req.size,
                TxControl::Notification {
                    peer: req.dst,
                    id,
                    size: req.size,
                },
            ),
            MessageKind::Rreq => {
                let blocks = memory_block_count(MessageKind::Rreq, 0, req.addr) as u32;
                (
                    req.size,
                    TxControl::Request(BufferedRequest {
                        kind: MessageKind::Rreq,
                        requester: self.cfg.port,
                        memory: req.dst,
                        id,
                        size_bytes: req.size,
                        remote_addr: req.addr,
                        opcode: None,
                        args: None,
                        block_count: blocks,
                    }),
                )
            }
            MessageKind::RmwReq => {
                let args = req.rmw.expect("checked at submit");
                let op = args.opcode();
                let blocks =
                    memory_block_count(MessageKind::RmwReq, op.arg_bytes(), op.code() as u64) as u32;
                (
                    op.result_bytes(),
                    TxControl::Request(BufferedRequest {
                        kind: MessageKind::RmwReq,
                        requester: self.cfg.port,
                        memory: req.dst,
                        id,
                        size_bytes: op.arg_bytes(),
                        remote_addr: req.addr,
                        opcode: Some(op),
                        args: Some(args),
                        block_count: blocks,
                    }),
                )
            }
            MessageKind::Rres => unreachable!("applications do not submit RRES"),
        };
        self.table.originated.insert(
            key(req.dst, id),
            Originated {
                kind: req.kind,
                local_addr: req.addr,
                total,
                progress: 0,
                tag: req.tag,
                submitted_at: q.submitted_at,
                generation: self.generation,
                first_block_at: None,
            },
        );
        let arm = req.kind.is_read_like().then(|| TimeoutArm {
            peer: req.dst,
            id,
            generation: self.generation,
            fires_at: now + self.cfg.read_timeout,
        });
        Some((ctl, arm))
    }

    /// Handles a /G/ for a WREQ chunk this host originated.
    pub fn on_write_grant(
        &mut self,
        peer: PortId,
        id: MessageId,
        offset: u32,
        len: u32,
    ) -> Result<DataChunk, HostError> {
        let k = key(peer, id);
        let e = self
            .table
            .originated
            .get_mut(&k)
            .filter(|e| e.kind == MessageKind::Wreq)
            .ok_or(HostError::UnknownGrant { peer, id: id.0 })?;
        if e.progress != offset {
            return Err(HostError::GrantOffset {
                peer,
                id: id.0,
                got: offset,
                want: e.progress,
            });
        }
        e.progress += len;
        let chunk = DataChunk {
            kind: MessageKind::Wreq,
            src: self.cfg.port,
            dst: peer,
            id,
            offset,
            len,
            total: e.total,
            blocks: memory_block_count(MessageKind::Wreq, len, e.local_addr + offset as u64),
            tag: e.tag,
            submitted_at: e.submitted_at,
            value: None,
            nack: false,
        };
        if e.progress == e.total {
            self.table.originated.remove(&k);
            self.active[peer.index()] -= 1;
            self.free_id(peer.index(), id);
        }
        self.stats.grants += 1;
        self.stats.data_bytes_sent += len as u64;
        Ok(chunk)
    }

    /// Serves a forwarded RREQ/RMWREQ (the implicit first grant): performs
    /// the access and returns the first RRES chunk of `first_len` bytes.
    pub fn on_request(&mut self, req: &BufferedRequest, first_len: u32) -> DataChunk {
        let peer = req.requester;
        let (total, value, nack) = match (req.kind, req.args) {
            (MessageKind::RmwReq, Some(args)) => {
                let o = self.memory.execute_rmw(req.remote_addr, args);
                (o.result_bytes, o.value, o.nack)
            }
            _ => (req.size_bytes, None, false),
        };
        self.table.served.insert(
            key(peer, req.id),
            Served {
                kind: MessageKind::Rres,
                local_addr: req.remote_addr,
                total,
                progress: 0,
                tag: 0,
                submitted_at: SimTime::ZERO,
                first_block_at: None,
                value,
                nack,
            },
        );
        self.on_response_grant(peer, req.id, 0, first_len)
            .expect("entry inserted above")
    }

    /// Handles a /G/ for a later RRES chunk this memory node is serving.
    pub fn on_response_grant(
        &mut self,
        peer: PortId,
        id: MessageId,
        offset: u32,
        len: u32,
    ) -> Result<DataChunk, HostError> {
        let k = key(peer, id);
        let e = self
            .table
            .served
            .get_mut(&k)
            .filter(|e| e.kind == MessageKind::Rres)
            .ok_or(HostError::UnknownGrant { peer, id: id.0 })?;
        if e.progress != offset {
            return Err(HostError::GrantOffset {
                peer,
                id: id.0,
                got: offset,
                want: e.progress,
            });
        }
        e.progress += len;
        let addr_field = if e.nack { NACK_FLAG } else { offset as u64 };
        let chunk = DataChunk {
            kind: MessageKind::Rres,
            src: self.cfg.port,
            dst: peer,
            id,
            offset,
            len,
            total: e.total,
            blocks: memory_block_count(MessageKind::Rres, len, addr_field),
            tag: e.tag,
            submitted_at: e.submitted_at,
            value: e.value,
            nack: e.nack,
        };
        if e.progress == e.total {
            self.table.served.remove(&k);
        }
        self.stats.grants += 1;
        self.stats.data_bytes_sent += len as u64;
        Ok(chunk)
    }

    /// Consumes a fully received chunk whose first and last blocks arrived
    /// at `first` and `last`. Returns the completion it finishes, if any.
    pub fn on_data(
        &mut self,
        c: &DataChunk,
        first: SimTime,
        last: SimTime,
    ) -> Result<Option<Completion>, HostError> {
        let rx = self.cfg.latency.cycles(self.cfg.latency.mdata_rx_proc);
        let k = key(c.src, c.id);
        self.stats.data_bytes_received += c.len as u64;
        match c.kind {
            MessageKind::Wreq => {
                let e = self.table.served.entry(k).or_insert(Served {
                    kind: MessageKind::Wreq,
                    local_addr: 0,
                    total: c.total,
                    progress: 0,
                    tag: c.tag,
                    submitted_at: c.submitted_at,
                    first_block_at: None,
                    value: None,
                    nack: false,
                });
                if e.kind != MessageKind::Wreq {
                    return Err(HostError::UnknownData {
                        peer: c.src,
                        id: c.id.0,
                    });
                }
                if e.progress != c.offset {
                    return Err(HostError::DataOffset {
                        peer: c.src,
                        id: c.id.0,
                        got: c.offset,
                        want: e.progress,
                    });
                }
                e.progress += c.len;
                let head = *e.first_block_at.get_or_insert(first + rx);
                if e.progress < e.total {
                    return Ok(None);
                }
                let e = self.table.served.remove(&k).expect("present");
                Ok(Some(Completion {
                    tag: e.tag,
                    kind: MessageKind::Wreq,
                    src: c.src,
                    dst: self.cfg.port,
                    id: c.id,
                    bytes: e.total,
                    submitted_at: e.submitted_at,
                    completed_at: last + rx,
                    first_block_at: head,
                    status: CompletionStatus::Ok,
                    value: None,
                }))
            }
            MessageKind::Rres => {
                let Some(e) = self.table.originated.get_mut(&k) else {
                    if self.timed_out.contains(&k) {
                        self.stats.discarded_late_chunks += 1;
                        // The id and the active slot are reclaimed once the
                        // late response has fully drained.
                        if c.offset + c.len >= c.total {
                            self.timed_out.remove(&k);
                            self.active[c.src.index()] -= 1;
                            self.free_id(c.src.index(), c.id);
                        }
                        return Ok(None);
                    }
                    return Err(HostError::UnknownData {
                        peer: c.src,
                        id: c.id.0,
                    });
                };
                if e.progress != c.offset {
                    return Err(HostError::DataOffset {
                        peer: c.src,
                        id: c.id.0,
                        got: c.offset,
                        want: e.progress,
                    });
                }
                e.progress += c.len;
                let head = *e.first_block_at.get_or_insert(first + rx);
                if e.progress < e.total {
                    return Ok(None);
                }
                let e = self.table.originated.remove(&k).expect("present");
                self.active[c.src.index()] -= 1;
                self.free_id(c.src.index(), c.id);
                Ok(Some(Completion {
                    tag: e.tag,
                    kind: e.kind,
                    src: self.cfg.port,
                    dst: c.src,
                    id: c.id,
                    bytes: e.total,
                    submitted_at: e.submitted_at,
                    completed_at: last + rx,
                    first_block_at: head,
                    status: if c.nack {
                        CompletionStatus::Nack
                    } else {
                        CompletionStatus::Ok
                    },
                    value: c.value,
                }))
            }
            _ => Err(HostError::UnknownData {
                peer: c.src,
                id: c.id.0,
            }),
        }
    }

    /// Fires a read timer. Completes the read with a NULL response if it is
    /// still outstanding; later chunks of it are discarded.
    pub fn read_timeout(&mut self, arm: TimeoutArm, now: SimTime) -> Option<Completion> {
        let k = key(arm.peer, arm.id);
        let e = self.table.originated.get(&k)?;
        if e.generation != arm.generation {
            return None;
        }
        let e = self.table.originated.remove(&k).expect("present");
        // The id and the active slot stay reserved: the scheduler may still
        // hold the response, and a late one must not alias a new message.
        self.timed_out.insert(k);
        self.stats.timeouts += 1;
        Some(Completion {
            tag: e.tag,
            kind: e.kind,
            src: self.cfg.port,
            dst: arm.peer,
            id: arm.id,
            bytes: 0,
            submitted_at: e.submitted_at,
            completed_at: now,
            first_block_at: now,
            status: CompletionStatus::Null,
            value: None,
        })
    }
}
