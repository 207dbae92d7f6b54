//! Centralized in-switch scheduler: per-destination notification queues,
//! priority-based parallel iterative matching, chunk grants and
//! PAUSE/RESUME.
//!
//! Only the oldest record of each (src, dst) pair is eligible, so chunks of
//! one pair leave in submission order; priorities order pairs.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use log::warn;
use thiserror::Error;

use crate::model::{
    BufferedRequest, ClusterConfig, MessageId, MessageKind, NotificationRecord, PortId,
    PriorityPolicy, SimTime,
};
use crate::phy::memory_block_count;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Rejection {
    #[error("pair ({origin},{peer}) already has {limit} active notifications")]
    ActiveLimit {
        origin: PortId,
        peer: PortId,
        limit: u32,
    },
    #[error("notification queue {dst} full ({bound} records)")]
    QueueFull { dst: PortId, bound: usize },
    #[error("record for ({src},{dst}) has zero bytes")]
    Empty { src: PortId, dst: PortId },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchedulerConfig {
    pub n_ports: usize,
    pub chunk_bytes: u32,
    pub max_active: u32,
    pub policy: PriorityPolicy,
    pub clock_ghz: f64,
    pub slot: SimTime,
    /// Switch control-path time the matching pipeline overlaps with.
    pub hidden_latency: SimTime,
    /// Per-destination queue bound.
    pub queue_bound: usize,
}

impl SchedulerConfig {
    pub fn from_cluster(c: &ClusterConfig) -> Self {
        let l = &c.latency;
        SchedulerConfig {
            n_ports: c.n_ports,
            chunk_bytes: c.chunk_bytes,
            max_active: c.max_active_notifications,
            policy: c.priority_policy,
            clock_ghz: c.scheduler_clock_ghz,
            slot: c.slot(),
            hidden_latency: l.cycles(l.g_block_gen + l.forward),
            queue_bound: 2 * c.max_active_notifications as usize * c.n_ports,
        }
    }

    fn scheduler_cycles(&self, n: u64) -> SimTime {
        SimTime::from_ps((n as f64 * 1_000.0 / self.clock_ghz).round() as u64)
    }
}

/// Smallest power-of-two chunk whose transmission time covers one average
/// matching round of 3·log2(N) scheduler cycles.
pub fn min_chunk_size(n_ports: usize, clock_ghz: f64, link_gbps: f64) -> u32 {
    let t_ns = 3.0 * (n_ports as f64).log2() / clock_ghz;
    let bytes = t_ns * link_gbps / 8.0;
    let mut c = 1u32;
    while (c as f64) < bytes - 1e-9 {
        c *= 2;
    }
    c
}

/// Ordering key; smaller is served first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PrioKey {
    pub primary: u64,
    pub enqueued_at: u64,
    pub src: u16,
    pub id: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GrantKind {
    /// /G/ to a compute node for a WREQ chunk.
    WriteChunk,
    /// First RRES chunk: the buffered request itself is forwarded.
    ForwardRequest(BufferedRequest),
    /// /G/ to a memory node for a later RRES chunk.
    ResponseChunk,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IssuedGrant {
    pub src: PortId,
    pub dst: PortId,
    pub id: MessageId,
    pub offset: u32,
    pub len: u32,
    pub total: u32,
    pub kind: GrantKind,
    /// When the grant leaves the scheduler toward /G/ generation.
    pub issued_at: SimTime,
    pub release_at: SimTime,
    pub data_blocks: u64,
    pub completes_record: bool,
}

impl IssuedGrant {
    pub fn data_kind(&self) -> MessageKind {
        match self.kind {
            GrantKind::WriteChunk => MessageKind::Wreq,
            _ => MessageKind::Rres,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RoundOutcome {
    pub grants: Vec<IssuedGrant>,
    /// Iterations run, including the final one that finds no proposal.
    pub iterations: u32,
    /// Iterations that matched at least one pair.
    pub productive_iterations: u32,
    /// Full modeled pipeline latency of the round.
    pub latency: SimTime,
    /// Part of `latency` not hidden behind the switch control path.
    pub charged: SimTime,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchedEventKind {
    Ntf,
    Grant,
    Release,
    Pause,
    Resume,
}

impl SchedEventKind {
    fn as_str(self) -> &'static str {
        match self {
            SchedEventKind::Ntf => "NTF",
            SchedEventKind::Grant => "GRANT",
            SchedEventKind::Release => "RELEASE",
            SchedEventKind::Pause => "PAUSE",
            SchedEventKind::Resume => "RESUME",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SchedEvent {
    pub time: SimTime,
    pub kind: SchedEventKind,
    pub src: u16,
    pub dst: u16,
    pub id: u8,
    pub bytes: u32,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SchedulerStats {
    pub notifications: u64,
    pub rejected: u64,
    pub rounds: u64,
    pub iterations: u64,
    pub productive_iterations: u64,
    pub grants: u64,
    pub granted_bytes: u64,
    pub max_queue_len: usize,
}

pub struct Scheduler {
    cfg: SchedulerConfig,
    n: usize,
    slab: Vec<Option<NotificationRecord>>,
    free: Vec<u32>,
    pairs: Vec<VecDeque<u32>>,
    head_key: Vec<Option<PrioKey>>,
    dest_heads: Vec<BTreeSet<PrioKey>>,
    /// Per source: destinations ordered by the pair head's priority.
    src_sorted: Vec<BTreeSet<(PrioKey, u16)>>,
    busy_src: Vec<bool>,
    busy_dst: Vec<bool>,
    paused: Vec<bool>,
    active: Vec<u32>,
    queue_len: Vec<usize>,
    candidates: BTreeSet<u16>,
    insert_pending: bool,
    request_mask: Vec<bool>,
    log: Option<Vec<SchedEvent>>,
    stats: SchedulerStats,
}

impl Scheduler {
    pub fn new(cfg: SchedulerConfig) -> Self {
        let n = cfg.n_ports;
        Scheduler {
            n,
            slab: Vec::new(),
            free: Vec::new(),
            pairs: vec![VecDeque::new(); n * n],
            head_key: vec![None; n * n],
            dest_heads: vec![BTreeSet::new(); n],
            src_sorted: vec![BTreeSet::new(); n],
            busy_src: vec![false; n],
            busy_dst: vec![false; n],
            paused: vec![false; n],
            active: vec![0; n * n],
            queue_len: vec![0; n],
            candidates: BTreeSet::new(),
            insert_pending: false,
            request_mask: vec![false; n],
            log: None,
            stats: SchedulerStats::default(),
            cfg,
        }
    }

    /// Builds a scheduler for `c`, warning when the chunk is below the
    /// line-rate minimum.
    pub fn for_cluster(c: &ClusterConfig) -> Self {
        let min = min_chunk_size(c.n_ports, c.scheduler_clock_ghz, c.link_gbps);
        if c.chunk_bytes < min {
            warn!(
                "chunk {} B below minimum {} B for N={}: scheduling will not keep up with line rate",
                c.chunk_bytes, min, c.n_ports
            );
        }
        Self::new(SchedulerConfig::from_cluster(c))
    }

    pub fn config(&self) -> &SchedulerConfig {
        &self.cfg
    }

    pub fn stats(&self) -> &SchedulerStats {
        &self.stats
    }

    pub fn enable_log(&mut self) {
        self.log.get_or_insert_with(Vec::new);
    }

    pub fn log(&self) -> &[SchedEvent] {
        self.log.as_deref().unwrap_or(&[])
    }

    /// `time_ps,event,src,dst,id,bytes`.
    pub fn log_csv(&self) -> String {
        let mut out = String::from("time_ps,event,src,dst,id,bytes\n");
        for e in self.log() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                e.time.ps(),
                e.kind.as_str(),
                e.src,
                e.dst,
                e.id,
                e.bytes
            );
        }
        out
    }

    fn record(&mut self, time: SimTime, kind: SchedEventKind, s: PortId, d: PortId, id: u8, bytes: u32) {
        if let Some(log) = self.log.as_mut() {
            log.push(SchedEvent {
                time,
                kind,
                src: s.index() as u16,
                dst: d.index() as u16,
                id,
                bytes,
            });
        }
    }

    pub fn queue_len(&self, d: PortId) -> usize {
        self.queue_len[d.index()]
    }

    pub fn pending_records(&self) -> usize {
        self.queue_len.iter().sum()
    }

    pub fn is_idle(&self) -> bool {
        self.pending_records() == 0 && !self.busy_src.iter().any(|&b| b)
    }

    pub fn is_busy_src(&self, p: PortId) -> bool {
        self.busy_src[p.index()]
    }

    pub fn is_busy_dst(&self, p: PortId) -> bool {
        self.busy_dst[p.index()]
    }

    pub fn is_paused(&self, p: PortId) -> bool {
        self.paused[p.index()]
    }

    pub fn active_notifications(&self, origin: PortId, peer: PortId) -> u32 {
        self.active[origin.index() * self.n + peer.index()]
    }

    fn key_for(&self, rec: &NotificationRecord) -> PrioKey {
        let primary = match self.cfg.policy {
            PriorityPolicy::Srpt => rec.remaining_bytes as u64,
            PriorityPolicy::Fcfs => rec.enqueued_at.ps(),
        };
        PrioKey {
            primary,
            enqueued_at: rec.enqueued_at.ps(),
            src: rec.src.index() as u16,
            id: rec.id.0,
        }
    }

    /// Re-derives the indexed head of pair (s, d) after its queue changed.
    fn refresh_head(&mut self, s: usize, d: usize) {
        let pair = s * self.n + d;
        if let Some(old) = self.head_key[pair].take() {
            self.dest_heads[d].remove(&old);
            self.src_sorted[s].remove(&(old, d as u16));
        }
        if let Some(&h) = self.pairs[pair].front() {
            let rec = self.slab[h as usize].as_mut().expect("live handle");
            let key = match self.cfg.policy {
                PriorityPolicy::Srpt => rec.remaining_bytes as u64,
                PriorityPolicy::Fcfs => rec.enqueued_at.ps(),
            };
            rec.priority = key;
            let key = PrioKey {
                primary: key,
                enqueued_at: rec.enqueued_at.ps(),
                src: s as u16,
                id: rec.id.0,
            };
            self.head_key[pair] = Some(key);
            self.dest_heads[d].insert(key);
            self.src_sorted[s].insert((key, d as u16));
            self.candidates.insert(d as u16);
        }
    }

    pub fn on_notification(
        &mut self,
        mut rec: NotificationRecord,
        now: SimTime,
    ) -> Result<(), Rejection> {
        let (s, d) = (rec.src.index(), rec.dst.index());
        if rec.remaining_bytes == 0 && !rec.is_implicit_rreq {
            self.stats.rejected += 1;
            return Err(Rejection::Empty {
                src: rec.src,
                dst: rec.dst,
            });
        }
        let (origin, peer) = (rec.origin(), rec.peer_of_origin());
        let slot = origin.index() * self.n + peer.index();
        if self.active[slot] >= self.cfg.max_active {
            self.stats.rejected += 1;
            return Err(Rejection::ActiveLimit {
                origin,
                peer,
                limit: self.cfg.max_active,
            });
        }
        if self.queue_len[d] >= self.cfg.queue_bound {
            self.stats.rejected += 1;
            return Err(Rejection::QueueFull {
                dst: rec.dst,
                bound: self.cfg.queue_bound,
            });
        }
        rec.enqueued_at = now;
        rec.priority = self.key_for(&rec).primary;
        self.record(now, SchedEventKind::Ntf, rec.src, rec.dst, rec.id.0, rec.total_bytes);
        let handle = match self.free.pop() {
            Some(h) => {
                self.slab[h as usize] = Some(rec);
                h
            }
            None => {
                self.slab.push(Some(rec));
                (self.slab.len() - 1) as u32
            }
        };
        let pair = s * self.n + d;
        self.pairs[pair].push_back(handle);
        if self.pairs[pair].len() == 1 {
            self.refresh_head(s, d);
        }
        self.active[slot] += 1;
        self.queue_len[d] += 1;
        self.stats.notifications += 1;
        self.stats.max_queue_len = self.stats.max_queue_len.max(self.queue_len[d]);
        self.insert_pending = true;
        Ok(())
    }

    /// One request/accept/mark pass. Matched endpoints become busy.
    pub fn pim_iteration(&mut self) -> Vec<(PortId, PortId)> {
        // Phase 1: each free destination proposes its best eligible head.
        let mut proposals: Vec<(u16, u16)> = Vec::new();
        let cands: Vec<u16> = self.candidates.iter().copied().collect();
        for d in cands {
            let du = d as usize;
            if self.busy_dst[du] || self.paused[du] {
                self.candidates.remove(&d);
                continue;
            }
            let busy_src = &self.busy_src;
            match self.dest_heads[du]
                .iter()
                .find(|k| !busy_src[k.src as usize])
            {
                Some(k) => proposals.push((k.src, d)),
                None => {
                    self.candidates.remove(&d);
                }
            }
        }
        // Phase 2: each source accepts via its sorted array and a priority
        // encoder over the request mask.
        proposals.sort_unstable();
        let mut matches = Vec::new();
        let mut i = 0;
        while i < proposals.len() {
            let s = proposals[i].0;
            let mut j = i;
            while j < proposals.len() && proposals[j].0 == s {
                self.request_mask[proposals[j].1 as usize] = true;
                j += 1;
            }
            let mask = &self.request_mask;
            let (_, d) = *self.src_sorted[s as usize]
                .iter()
                .find(|(_, d)| mask[*d as usize])
                .expect("a proposal implies an entry in the source's array");
            for &(_, dd) in &proposals[i..j] {
                self.request_mask[dd as usize] = false;
            }
            matches.push((s, d));
            i = j;
        }
        // Phase 3: mark matched endpoints busy.
        for &(s, d) in &matches {
            self.busy_src[s as usize] = true;
            self.busy_dst[d as usize] = true;
            self.candidates.remove(&d);
        }
        matches
            .into_iter()
            .map(|(s, d)| (PortId::at(s as usize), PortId::at(d as usize)))
            .collect()
    }

    fn has_eligible_candidate(&self) -> bool {
        self.candidates.iter().any(|&d| {
            let d = d as usize;
            !self.busy_dst[d]
                && !self.paused[d]
                && self.dest_heads[d]
                    .iter()
                    .any(|k| !self.busy_src[k.src as usize])
        })
    }

    /// Matches until maximal and issues one grant per match.
    pub fn run_matching_round(&mut self, now: SimTime) -> RoundOutcome {
        let mut out = RoundOutcome::default();
        let insert = std::mem::take(&mut self.insert_pending);
        if !self.has_eligible_candidate() {
            self.candidates.clear();
            return out;
        }
        let mut matches = Vec::new();
        loop {
            let m = self.pim_iteration();
            out.iterations += 1;
            if m.is_empty() {
                break;
            }
            out.productive_iterations += 1;
            matches.extend(m);
        }
        self.candidates.clear();
        let cycles = 3 * out.iterations as u64 + if insert { 2 } else { 0 };
        out.latency = self.cfg.scheduler_cycles(cycles);
        out.charged = out.latency.saturating_sub(self.cfg.hidden_latency);
        let issued_at = now + out.charged;
        for (s, d) in matches {
            let g = self.issue_grant(s, d, issued_at);
            out.grants.push(g);
        }
        self.stats.rounds += 1;
        self.stats.iterations += out.iterations as u64;
        self.stats.productive_iterations += out.productive_iterations as u64;
        out
    }

    /// Grants min(c, remaining) bytes of the head record of (s, d).
    pub fn issue_grant(&mut self, s: PortId, d: PortId, at: SimTime) -> IssuedGrant {
        let (su, du) = (s.index(), d.index());
        let pair = su * self.n + du;
        let h = *self.pairs[pair].front().expect("matched pair has a record");
        let c = self.cfg.chunk_bytes;
        let slot = self.cfg.slot;
        let rec = self.slab[h as usize].as_mut().expect("live handle");
        let len = c.min(rec.remaining_bytes);
        let offset = rec.total_bytes - rec.remaining_bytes;
        rec.remaining_bytes -= len;
        let kind = match (rec.is_implicit_rreq, offset) {
            (false, _) => GrantKind::WriteChunk,
            (true, 0) => GrantKind::ForwardRequest(rec.rreq.expect("implicit record keeps its request")),
            (true, _) => GrantKind::ResponseChunk,
        };
        let data_kind = rec.data_kind();
        let data_blocks = memory_block_count(data_kind, len, offset as u64);
        // Endpoints free up after the chunk's wire time. A response starts
        // later than a write chunk would (request forwarding and memory
        // access), but every response on a given link shares that offset.
        let release_at = at + slot * data_blocks;
        let id = rec.id;
        let total = rec.total_bytes;
        let done = rec.remaining_bytes == 0;
        let (origin, peer) = (rec.origin(), rec.peer_of_origin());
        if done {
            self.pairs[pair].pop_front();
            self.slab[h as usize] = None;
            self.free.push(h);
            self.active[origin.index() * self.n + peer.index()] -= 1;
            self.queue_len[du] -= 1;
            self.refresh_head(su, du);
        } else if self.cfg.policy == PriorityPolicy::Srpt {
            self.refresh_head(su, du);
        }
        self.stats.grants += 1;
        self.stats.granted_bytes += len as u64;
        self.record(at, SchedEventKind::Grant, s, d, id.0, len);
        IssuedGrant {
            src: s,
            dst: d,
            id,
            offset,
            len,
            total,
            kind,
            issued_at: at,
            release_at,
            data_blocks,
            completes_record: done,
        }
    }

    pub fn release_endpoints(&mut self, s: PortId, d: PortId, now: SimTime) {
        self.release_src(s);
        self.release_dst(d);
        self.record(now, SchedEventKind::Release, s, d, 0, 0);
    }

    /// Frees a source alone; its destination stays reserved.
    pub fn release_src(&mut self, s: PortId) {
        let su = s.index();
        self.busy_src[su] = false;
        let dests: Vec<u16> = self.src_sorted[su].iter().map(|&(_, d)| d).collect();
        self.candidates.extend(dests);
    }

    /// Frees a destination alone.
    pub fn release_dst(&mut self, d: PortId) {
        let du = d.index();
        self.busy_dst[du] = false;
        if !self.dest_heads[du].is_empty() {
            self.candidates.insert(du as u16);
        }
    }

    pub fn pause(&mut self, d: PortId, now: SimTime) {
        self.paused[d.index()] = true;
        self.candidates.remove(&(d.index() as u16));
        self.record(now, SchedEventKind::Pause, d, d, 0, 0);
    }

    pub fn resume(&mut self, d: PortId, now: SimTime) {
        if !self.paused[d.index()] {
            return;
        }
        self.paused[d.index()] = false;
        if !self.dest_heads[d.index()].is_empty() {
            self.candidates.insert(d.index() as u16);
        }
        self.record(now, SchedEventKind::Resume, d, d, 0, 0);
    }

    /// Exhaustive check that no eligible record has both endpoints free.
    pub fn is_maximal(&self) -> bool {
        (0..self.n).all(|d| {
            self.busy_dst[d]
                || self.paused[d]
                || self.dest_heads[d]
                    .iter()
                    .all(|k| self.busy_src[k.src as usize])
        })
    }

    /// Eligible (src, dst) pairs, for oracles.
    pub fn eligible_pairs(&self) -> Vec<(PortId, PortId)> {
        let mut out = Vec::new();
        for d in 0..self.n {
            for k in &self.dest_heads[d] {
                out.push((PortId::at(k.src as usize), PortId::at(d)));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, policy: PriorityPolicy) -> SchedulerConfig {
        SchedulerConfig {
            n_ports: n,
            chunk_bytes: 256,
            max_active: 3,
            policy,
            clock_ghz: 3.0,
            slot: SimTime(660),
            hidden_latency: SimTime(12_800),
            queue_bound: 6 * n,
        }
    }

    fn rec(s: usize, d: usize, id: u8, bytes: u32) -> NotificationRecord {
        NotificationRecord::explicit(PortId::at(s), PortId::at(d), MessageId(id), bytes, SimTime(0))
    }

    #[test]
    fn min_chunk_examples() {
        assert_eq!(min_chunk_size(512, 3.0, 100.0), 128);
        assert_eq!(min_chunk_size(2, 3.0, 100.0), 16);
        assert!(min_chunk_size(144, 3.0, 100.0) <= 256);
    }

    #[test]
    fn first_notification_is_accepted() {
        let mut s = Scheduler::new(cfg(4, PriorityPolicy::Srpt));
        s.on_notification(rec(0, 1, 0, 64), SimTime(0)).unwrap();
        assert_eq!(s.queue_len(PortId::at(1)), 1);
    }

    #[test]
    fn fourth_notification_for_a_pair_is_rejected() {
        let mut s = Scheduler::new(cfg(4, PriorityPolicy::Srpt));
        for id in 0..3 {
            s.on_notification(rec(0, 1, id, 64), SimTime(0)).unwrap();
        }
        assert!(matches!(
            s.on_notification(rec(0, 1, 3, 64), SimTime(0)),
            Err(Rejection::ActiveLimit { limit: 3, .. })
        ));
    }

    #[test]
    fn srpt_source_accepts_smaller_remaining() {
        let mut s = Scheduler::new(cfg(4, PriorityPolicy::Srpt));
        s.on_notification(rec(0, 1, 0, 4096), SimTime(0)).unwrap();
        s.on_notification(rec(0, 2, 0, 512), SimTime(0)).unwrap();
        let m = s.pim_iteration();
        assert_eq!(m, vec![(PortId::at(0), PortId::at(2))]);
    }

    #[test]
    fn grant_arithmetic() {
        let mut s = Scheduler::new(cfg(4, PriorityPolicy::Srpt));
        s.on_notification(rec(0, 1, 0, 1000), SimTime(0)).unwrap();
        let out = s.run_matching_round(SimTime(0));
        let g = out.grants[0];
        assert_eq!((g.len, g.offset), (256, 0));
        assert_eq!(g.release_at - g.issued_at, SimTime(660 * 34));
        assert_eq!(s.queue_len(PortId::at(1)), 1);
        s.release_endpoints(g.src, g.dst, g.release_at);
        let g2 = s.run_matching_round(g.release_at).grants[0];
        assert_eq!((g2.len, g2.offset), (256, 256));
    }

    #[test]
    fn short_record_is_removed_after_one_grant() {
        let mut s = Scheduler::new(cfg(4, PriorityPolicy::Fcfs));
        s.on_notification(rec(0, 1, 0, 64), SimTime(0)).unwrap();
        let g = s.run_matching_round(SimTime(0)).grants[0];
        assert_eq!(g.len, 64);
        assert!(g.completes_record);
        assert_eq!(s.pending_records(), 0);
        assert_eq!(s.active_notifications(PortId::at(0), PortId::at(1)), 0);
    }

    #[test]
    fn implicit_record_first_grant_forwards_request() {
        let mut s = Scheduler::new(cfg(4, PriorityPolicy::Srpt));
        let req = BufferedRequest {
            kind: MessageKind::Rreq,
            requester: PortId::at(0),
            memory: PortId::at(3),
            id: MessageId(5),
            size_bytes: 1024,
            remote_addr: 0x40,
            opcode: None,
            args: None,
            block_count: 1,
        };
        let r = NotificationRecord::implicit(req, 1024, SimTime(0));
        assert_eq!((r.src, r.dst, r.remaining_bytes), (PortId::at(3), PortId::at(0), 1024));
        s.on_notification(r, SimTime(0)).unwrap();
        assert_eq!(s.active_notifications(PortId::at(0), PortId::at(3)), 1);
        let g = s.run_matching_round(SimTime(0)).grants[0];
        assert!(matches!(g.kind, GrantKind::ForwardRequest(_)));
        assert_eq!(g.release_at - g.issued_at, SimTime(660 * 34));
    }

    #[test]
    fn empty_round_costs_nothing() {
        let mut s = Scheduler::new(cfg(4, PriorityPolicy::Srpt));
        let out = s.run_matching_round(SimTime(0));
        assert!(out.grants.is_empty());
        assert_eq!(out.iterations, 0);
        assert_eq!(out.latency, SimTime(0));
    }

    #[test]
    fn permutation_matches_in_one_productive_iteration() {
        let n = 8;
        let mut s = Scheduler::new(cfg(n, PriorityPolicy::Srpt));
        for i in 0..n {
            s.on_notification(rec(i, (i + 3) % n, 0, 64), SimTime(0)).unwrap();
        }
        let out = s.run_matching_round(SimTime(0));
        assert_eq!(out.grants.len(), n);
        assert_eq!(out.productive_iterations, 1);
        assert_eq!(out.iterations, 2);
    }

    #[test]
    fn all_busy_gives_empty_iteration() {
        let mut s = Scheduler::new(cfg(4, PriorityPolicy::Srpt));
        s.on_notification(rec(0, 1, 0, 4096), SimTime(0)).unwrap();
        s.run_matching_round(SimTime(0));
        s.on_notification(rec(0, 1, 1, 64), SimTime(0)).unwrap();
        assert!(s.pim_iteration().is_empty());
    }

    #[test]
    fn pause_blocks_grants_until_resume() {
        let mut s = Scheduler::new(cfg(4, PriorityPolicy::Srpt));
        s.pause(PortId::at(1), SimTime(0));
        s.on_notification(rec(0, 1, 0, 64), SimTime(0)).unwrap();
        assert!(s.run_matching_round(SimTime(0)).grants.is_empty());
        s.resume(PortId::at(1), SimTime(10));
        assert_eq!(s.run_matching_round(SimTime(10)).grants.len(), 1);
        s.resume(PortId::at(1), SimTime(20));
        assert!(!s.is_paused(PortId::at(1)));
    }

    #[test]
    fn second_record_granted_at_release_instant() {
        let mut s = Scheduler::new(cfg(4, PriorityPolicy::Fcfs));
        s.enable_log();
        s.on_notification(rec(0, 2, 0, 64), SimTime(0)).unwrap();
        s.on_notification(rec(1, 2, 0, 64), SimTime(0)).unwrap();
        let g1 = s.run_matching_round(SimTime(0)).grants;
        assert_eq!(g1.len(), 1);
        let r = g1[0].release_at;
        assert!(s.run_matching_round(SimTime(1)).grants.is_empty());
        s.release_endpoints(g1[0].src, g1[0].dst, r);
        let g2 = s.run_matching_round(r).grants;
        assert_eq!(g2[0].issued_at, r);
        assert!(s.log_csv().contains(",RELEASE,0,2,"));
    }
}
