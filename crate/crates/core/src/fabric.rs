//! Interface shared by the EDM fabric and the baseline fabrics, plus the
//! result record every run produces.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::engine::{TxPort, TxStats};
use crate::host::{Completion, CompletionStatus};
use crate::model::{MessageId, MessageKind, PortId, SimTime};
use crate::workloads::{NodeRoles, TraceRecord};

/// Injection stops at `inject_until`; the run then drains until every
/// message completes or `hard_stop` is reached.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunLimits {
    pub inject_until: SimTime,
    pub hard_stop: SimTime,
}

impl RunLimits {
    pub fn unbounded() -> Self {
        RunLimits {
            inject_until: SimTime::MAX,
            hard_stop: SimTime::MAX,
        }
    }

    pub fn window(inject: SimTime, drain: SimTime) -> Self {
        RunLimits {
            inject_until: inject,
            hard_stop: inject + drain,
        }
    }
}

/// Mean link utilization per bucket for each link class.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct UtilSummary {
    pub bucket: SimTime,
    /// Rows of (bucket start, compute up, compute down, memory up, memory down).
    pub rows: Vec<(SimTime, [f64; 4])>,
}

impl UtilSummary {
    /// `uplinks[i]` carries host i -> switch, `downlinks[i]` switch -> host i.
    pub fn from_ports(roles: NodeRoles, uplinks: &[TxPort], downlinks: &[TxPort]) -> Option<Self> {
        let bucket = uplinks.first()?.utilization()?.bucket;
        let len = uplinks
            .iter()
            .chain(downlinks)
            .filter_map(|p| p.utilization().map(|u| u.busy_ps.len()))
            .max()
            .unwrap_or(0);
        let mut rows = Vec::with_capacity(len);
        let compute = |i: usize| i < roles.n_compute;
        for b in 0..len {
            let mut sum = [0.0f64; 4];
            let mut cnt = [0usize; 4];
            for (i, (up, down)) in uplinks.iter().zip(downlinks).enumerate() {
                let base = if compute(i) { 0 } else { 2 };
                for (k, p) in [(base, up), (base + 1, down)] {
                    let busy = p
                        .utilization()
                        .and_then(|u| u.busy_ps.get(b).copied())
                        .unwrap_or(0);
                    sum[k] += busy as f64 / bucket.ps() as f64;
                    cnt[k] += 1;
                }
            }
            let mut row = [0.0; 4];
            for k in 0..4 {
                if cnt[k] > 0 {
                    row[k] = sum[k] / cnt[k] as f64;
                }
            }
            rows.push((bucket * b as u64, row));
        }
        Some(UtilSummary { bucket, rows })
    }

    /// `time_ps,compute_up,compute_down,memory_up,memory_down`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_ps,compute_up,compute_down,memory_up,memory_down\n");
        for (t, r) in &self.rows {
            let _ = writeln!(out, "{},{:.6},{:.6},{:.6},{:.6}", t.ps(), r[0], r[1], r[2], r[3]);
        }
        out
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunResult {
    pub fabric: String,
    pub completions: Vec<Completion>,
    pub submitted: usize,
    /// Submitted messages with no completion at the end of the run.
    pub incomplete: usize,
    pub end_time: SimTime,
    pub events: u64,
    pub util: Option<UtilSummary>,
    /// Per-host link statistics: host -> switch and switch -> host.
    pub uplinks: Vec<TxStats>,
    pub downlinks: Vec<TxStats>,
    pub slot: SimTime,
    /// Model-specific counters.
    pub counters: BTreeMap<String, f64>,
    /// Invariant breaches observed during the run; empty on a clean run.
    pub violations: Vec<String>,
    pub scheduler_log_csv: Option<String>,
    pub audit_csv: Option<String>,
}

impl RunResult {
    pub fn counter(&self, k: &str) -> f64 {
        self.counters.get(k).copied().unwrap_or(0.0)
    }

    pub fn ok_completions(&self) -> impl Iterator<Item = &Completion> {
        self.completions
            .iter()
            .filter(|c| c.status != CompletionStatus::Null)
    }

    /// `submit_ps,complete_ps,kind,src,dst,id,bytes,status`, one line per
    /// completion in completion order.
    pub fn completion_csv(&self) -> String {
        completion_csv(&self.completions)
    }
}

pub fn completion_csv(cs: &[Completion]) -> String {
    let mut out = String::from("submit_ps,complete_ps,kind,src,dst,id,bytes,status\n");
    for c in cs {
        let status = match c.status {
            CompletionStatus::Ok => "ok",
            CompletionStatus::Nack => "nack",
            CompletionStatus::Null => "null",
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            c.submitted_at.ps(),
            c.completed_at.ps(),
            c.kind.as_str(),
            c.src.index(),
            c.dst.index(),
            c.id.0,
            c.bytes,
            status
        );
    }
    out
}

/// Parses a log written by [`completion_csv`]. Fields not in the log
/// (tag, first-block time, RMW value) come back as zero or `None`.
pub fn parse_completion_csv(text: &str) -> Result<Vec<Completion>, String> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |what: &str| format!("line {}: bad {what}", n + 1);
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(bad("field count"));
        }
        let num = |i: usize, what: &str| f[i].trim().parse::<u64>().map_err(|_| bad(what));
        let completed_at = SimTime(num(1, "complete_ps")?);
        out.push(Completion {
            tag: 0,
            kind: f[2].parse::<MessageKind>().map_err(|_| bad("kind"))?,
            src: PortId::new(num(3, "src")? as usize).map_err(|_| bad("src"))?,
            dst: PortId::new(num(4, "dst")? as usize).map_err(|_| bad("dst"))?,
            id: MessageId(num(5, "id")? as u8),
            bytes: num(6, "bytes")? as u32,
            submitted_at: SimTime(num(0, "submit_ps")?),
            completed_at,
            first_block_at: completed_at,
            status: match f[7].trim() {
                "ok" => CompletionStatus::Ok,
                "nack" => CompletionStatus::Nack,
                "null" => CompletionStatus::Null,
                _ => return Err(bad("status")),
            },
            value: None,
        });
    }
    Ok(out)
}

/// A fabric that can replay a trace. The event-level hooks (message
/// submitted, block arrival, timer) live inside each model's event loop;
/// this trait is the part experiments drive.
pub trait FabricModel {
    fn name(&self) -> &'static str;

    /// Completion time of one message alone in an idle network.
    fn ideal_completion(&self, kind: MessageKind, size_bytes: u32) -> SimTime;

    fn run(&mut self, trace: &[TraceRecord], limits: &RunLimits) -> RunResult;
}
