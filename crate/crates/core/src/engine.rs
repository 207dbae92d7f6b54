//! Discrete-event core: a deterministic event queue, per-component RNG
//! streams and the slot-quantized link transmitter.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::SimTime;

struct Entry<E> {
    at: SimTime,
    seq: u64,
    ev: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        (self.at, self.seq) == (other.at, other.seq)
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.at, other.seq).cmp(&(self.at, self.seq))
    }
}

/// Events dispatch in (time, insertion order).
pub struct EventQueue<E> {
    heap: BinaryHeap<Entry<E>>,
    seq: u64,
    now: SimTime,
    dispatched: u64,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            seq: 0,
            now: SimTime::ZERO,
            dispatched: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    /// Panics if `at` precedes the current time.
    pub fn schedule(&mut self, at: SimTime, ev: E) {
        assert!(
            at >= self.now,
            "event scheduled in the past: {at} < now {}",
            self.now
        );
        self.heap.push(Entry {
            at,
            seq: self.seq,
            ev,
        });
        self.seq += 1;
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|e| e.at)
    }

    pub fn pop(&mut self) -> Option<(SimTime, E)> {
        let e = self.heap.pop()?;
        self.now = e.at;
        self.dispatched += 1;
        Some((e.at, e.ev))
    }

    /// Pops the next event at or before `until`.
    pub fn pop_until(&mut self, until: SimTime) -> Option<(SimTime, E)> {
        match self.peek_time() {
            Some(t) if t <= until => self.pop(),
            _ => None,
        }
    }

    /// Dispatches events up to `until`; the handler may schedule more.
    pub fn run<F: FnMut(&mut Self, SimTime, E)>(&mut self, until: SimTime, mut handler: F) {
        while let Some((t, ev)) = self.pop_until(until) {
            handler(self, t, ev);
        }
    }
}

/// RNG stream for one component, independent of how other components draw.
pub fn component_rng(global_seed: u64, component: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(
        global_seed ^ component.wrapping_mul(0x9e37_79b9_7f4a_7c15),
    ))
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Fixed timing of one simplex link.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Link {
    pub slot: SimTime,
    /// TX PCS/PMA, propagation and RX PMA/PCS; paid once per block.
    pub latency: SimTime,
}

impl Link {
    /// Arrival of block `i` of a run whose first block starts at `start`.
    pub fn arrival(&self, start: SimTime, i: u64) -> SimTime {
        start + self.slot * i + self.latency
    }
}

/// Handle to a committed data run on a [`TxPort`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RunId(pub u64);

#[derive(Clone, Copy, Debug)]
struct Run {
    id: RunId,
    start: SimTime,
    end: SimTime,
    retired: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TxStats {
    pub data_blocks: u64,
    pub ctrl_blocks: u64,
    /// Control blocks that displaced already-committed data slots.
    pub stolen_slots: u64,
    /// Worst delay of a data run behind its ready time, in slots.
    pub max_data_wait_slots: u64,
    pub total_data_wait: SimTime,
    pub first_busy: Option<SimTime>,
    pub last_busy: SimTime,
    pub first_data_start: Option<SimTime>,
    pub last_data_end: SimTime,
}

impl TxStats {
    /// Fraction of the span from the first data slot to the last one that
    /// carried data.
    pub fn data_occupancy(&self, slot: SimTime) -> Option<f64> {
        let first = self.first_data_start?;
        let span = self.last_data_end.saturating_sub(first).ps();
        (span > 0).then(|| (self.data_blocks * slot.ps()) as f64 / span as f64)
    }
}

/// Transmitter of one simplex link with a data lane (atomic runs, FIFO)
/// and a control lane. A control unit takes the next slot boundary; if that
/// lands inside committed data, the remaining data slots shift later.
#[derive(Clone, Debug)]
pub struct TxPort {
    pub link: Link,
    runs: VecDeque<Run>,
    next_run: u64,
    data_free_at: SimTime,
    ctrl_free_at: SimTime,
    stats: TxStats,
    util: Option<UtilSeries>,
}

/// Busy time per fixed-width bucket.
#[derive(Clone, Debug, PartialEq)]
pub struct UtilSeries {
    pub bucket: SimTime,
    pub busy_ps: Vec<u64>,
}

impl UtilSeries {
    fn add(&mut self, start: SimTime, end: SimTime) {
        let w = self.bucket.ps();
        let (mut a, b) = (start.ps(), end.ps());
        while a < b {
            let idx = (a / w) as usize;
            let edge = ((idx as u64) + 1) * w;
            let seg = edge.min(b) - a;
            if self.busy_ps.len() <= idx {
                self.busy_ps.resize(idx + 1, 0);
            }
            self.busy_ps[idx] += seg;
            a += seg;
        }
    }
}

impl TxPort {
    pub fn new(link: Link) -> Self {
        TxPort {
            link,
            runs: VecDeque::new(),
            next_run: 0,
            data_free_at: SimTime::ZERO,
            ctrl_free_at: SimTime::ZERO,
            stats: TxStats::default(),
            util: None,
        }
    }

    pub fn track_utilization(&mut self, bucket: SimTime) {
        self.util = Some(UtilSeries {
            bucket,
            busy_ps: Vec::new(),
        });
    }

    pub fn utilization(&self) -> Option<&UtilSeries> {
        self.util.as_ref()
    }

    pub fn stats(&self) -> &TxStats {
        &self.stats
    }

    pub fn data_free_at(&self) -> SimTime {
        self.data_free_at
    }

    /// Marks a run as delivered. Runs stay shiftable and visible to
    /// [`TxPort::run_last_arrival`] until retired, since a ready time can lie
    /// ahead of the caller's clock and time alone cannot tell when a pending
    /// arrival has been handled.
    pub fn retire(&mut self, id: RunId) {
        if let Some(r) = self.runs.iter_mut().find(|r| r.id == id) {
            r.retired = true;
        }
        while self.runs.front().is_some_and(|r| r.retired) {
            self.runs.pop_front();
        }
    }

    /// Committed runs not yet retired.
    pub fn open_runs(&self) -> usize {
        self.runs.len()
    }

    fn mark_busy(&mut self, start: SimTime, end: SimTime) {
        if self.stats.first_busy.is_none() {
            self.stats.first_busy = Some(start);
        }
        self.stats.last_busy = self.stats.last_busy.max(end);
        if let Some(u) = self.util.as_mut() {
            u.add(start, end);
        }
    }

    /// Commits a data run of `blocks` ready at `ready`. Returns its handle
    /// and first-slot start.
    pub fn send_data(&mut self, ready: SimTime, blocks: u64) -> (RunId, SimTime) {
        assert!(blocks > 0);
        let start = ready.max(self.data_free_at).max(self.ctrl_free_at);
        let end = start + self.link.slot * blocks;
        let id = RunId(self.next_run);
        self.next_run += 1;
        self.runs.push_back(Run {
            id,
            start,
            end,
            retired: false,
        });
        self.data_free_at = end;
        let wait = start - ready;
        self.stats.data_blocks += blocks;
        self.stats.first_data_start.get_or_insert(start);
        self.stats.last_data_end = self.stats.last_data_end.max(end);
        self.stats.total_data_wait += wait;
        self.stats.max_data_wait_slots = self
            .stats
            .max_data_wait_slots
            .max(wait.ps().div_ceil(self.link.slot.ps()));
        self.mark_busy(start, end);
        (id, start)
    }

    /// Commits `blocks` control blocks ready at `ready`; returns their start.
    pub fn send_ctrl(&mut self, ready: SimTime, blocks: u64) -> SimTime {
        assert!(blocks > 0);
        let slot = self.link.slot;
        let mut start = ready.max(self.ctrl_free_at);
        let len = slot * blocks;
        let mut shift_from = None;
        for (i, r) in self.runs.iter().enumerate() {
            if r.retired || start >= r.end {
                continue;
            }
            if start > r.start {
                let into = (start - r.start).ps().div_ceil(slot.ps());
                start = r.start + slot * into;
                if start >= r.end {
                    continue;
                }
            }
            if start + len > r.start {
                shift_from = Some(i);
            }
            break;
        }
        if let Some(i) = shift_from {
            // Data at or after `start` moves back by the control length,
            // cascading while runs collide.
            let mut stolen = false;
            let mut prev_end = None::<SimTime>;
            for r in self.runs.iter_mut().skip(i) {
                let shift = match prev_end {
                    None => {
                        stolen = true;
                        len
                    }
                    Some(pe) => pe.saturating_sub(r.start),
                };
                if shift == SimTime::ZERO {
                    break;
                }
                if r.start >= start {
                    r.start += shift;
                }
                r.end += shift;
                prev_end = Some(r.end);
            }
            if stolen {
                self.stats.stolen_slots += blocks;
            }
            self.data_free_at = self.runs.back().map_or(self.data_free_at, |r| r.end);
            self.stats.last_data_end = self.stats.last_data_end.max(self.data_free_at);
        }
        self.ctrl_free_at = start + len;
        self.stats.ctrl_blocks += blocks;
        self.mark_busy(start, start + len);
        start
    }

    /// Current end of a committed run; `None` once it has been retired.
    pub fn run_end(&self, id: RunId) -> Option<SimTime> {
        self.runs.iter().find(|r| r.id == id).map(|r| r.end)
    }

    /// Arrival time of the last block of run `id` at the far end.
    pub fn run_last_arrival(&self, id: RunId) -> Option<SimTime> {
        self.run_end(id).map(|e| e - self.link.slot + self.link.latency)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_times_keep_insertion_order() {
        let mut q = EventQueue::new();
        q.schedule(SimTime(5), 'a');
        q.schedule(SimTime(5), 'b');
        q.schedule(SimTime(1), 'c');
        let order: Vec<char> = std::iter::from_fn(|| q.pop().map(|(_, e)| e)).collect();
        assert_eq!(order, ['c', 'a', 'b']);
    }

    #[test]
    fn empty_run_returns() {
        let mut q: EventQueue<()> = EventQueue::new();
        q.run(SimTime::MAX, |_, _, _| panic!("no events"));
        assert_eq!(q.dispatched(), 0);
    }

    #[test]
    #[should_panic(expected = "scheduled in the past")]
    fn past_scheduling_panics() {
        let mut q = EventQueue::new();
        q.schedule(SimTime(10), ());
        q.pop();
        q.schedule(SimTime(9), ());
    }

    #[test]
    fn link_slot_arrivals() {
        let l = Link {
            slot: SimTime(2_640),
            latency: SimTime(58_240),
        };
        assert_eq!(l.arrival(SimTime(0), 0), SimTime(58_240));
        assert_eq!(l.arrival(SimTime(0), 9) - l.arrival(SimTime(0), 0), SimTime(9 * 2_640));
    }

    fn port() -> TxPort {
        TxPort::new(Link {
            slot: SimTime(100),
            latency: SimTime(1_000),
        })
    }

    #[test]
    fn data_runs_queue_back_to_back() {
        let mut p = port();
        let (_, s1) = p.send_data(SimTime(0), 10);
        let (_, s2) = p.send_data(SimTime(500), 5);
        assert_eq!((s1, s2), (SimTime(0), SimTime(1_000)));
        assert_eq!(p.stats().max_data_wait_slots, 5);
    }

    #[test]
    fn control_steals_next_slot_and_shifts_data() {
        let mut p = port();
        let (a, _) = p.send_data(SimTime(0), 10);
        let (b, _) = p.send_data(SimTime(1_000), 4);
        let c = p.send_ctrl(SimTime(250), 1);
        assert_eq!(c, SimTime(300));
        assert_eq!(p.run_end(a), Some(SimTime(1_100)));
        assert_eq!(p.run_end(b), Some(SimTime(1_500)));
        assert_eq!(p.stats().stolen_slots, 1);
    }

    #[test]
    fn control_in_gap_does_not_shift() {
        let mut p = port();
        let (a, _) = p.send_data(SimTime(0), 2);
        let c = p.send_ctrl(SimTime(500), 1);
        assert_eq!(c, SimTime(500));
        assert_eq!(p.run_end(a), Some(SimTime(200)));
        assert_eq!(p.stats().stolen_slots, 0);
    }

    #[test]
    fn runs_stay_visible_until_retired() {
        let mut p = port();
        let (a, _) = p.send_data(SimTime(0), 2);
        let (b, _) = p.send_data(SimTime(0), 1);
        // A later ready time far past both runs must not hide them.
        p.send_data(SimTime(50_000), 1);
        assert_eq!(p.run_last_arrival(a), Some(SimTime(1_100)));
        p.retire(b);
        assert_eq!(p.open_runs(), 3);
        p.retire(a);
        assert_eq!(p.open_runs(), 1);
        assert_eq!(p.run_end(b), None);
    }

    #[test]
    fn utilization_buckets() {
        let mut p = port();
        p.track_utilization(SimTime(1_000));
        p.send_data(SimTime(500), 10);
        assert_eq!(p.utilization().unwrap().busy_ps, vec![500, 500]);
    }
}
