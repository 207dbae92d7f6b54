//! Latency and normalized-MCT statistics over completion logs.

use std::fmt::Write as _;

use edm_core::edm::{EdmConfig, EdmSim};
use edm_core::fabric::{FabricModel, RunResult};
use edm_core::host::{Completion, CompletionStatus};
use edm_core::model::{ClusterConfig, MessageKind, SimTime};

/// Unloaded completion time of a lone message on an idle EDM fabric, from
/// the latency profile and block serialization. Every fabric is
/// normalized by this same ideal.
pub struct Ideal {
    edm: EdmSim,
}

impl Ideal {
    pub fn new(cluster: &ClusterConfig) -> Self {
        Ideal {
            edm: EdmSim::new(EdmConfig::with_cluster(cluster.clone())),
        }
    }

    pub fn of(&self, kind: MessageKind, bytes: u32) -> SimTime {
        self.edm.ideal_completion(kind, bytes)
    }
}

/// Completions that carry data back to the application; timed-out reads
/// (NULL responses) are excluded.
fn counted(c: &Completion) -> bool {
    c.status != CompletionStatus::Null
}

/// Per-message slowdown, in completion-log order.
pub fn normalized_mct(completions: &[Completion], cluster: &ClusterConfig) -> Vec<f64> {
    let ideal = Ideal::new(cluster);
    completions
        .iter()
        .filter(|c| counted(c))
        .map(|c| c.latency().ps() as f64 / ideal.of(c.kind, c.bytes).ps() as f64)
        .collect()
}

/// Nearest-rank percentile of an unsorted sample.
pub fn percentile(xs: &[f64], p: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let rank = ((p / 100.0) * v.len() as f64).ceil().max(1.0) as usize;
    v[rank.min(v.len()) - 1]
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// One row of results. Latencies in ns.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub fabric: String,
    pub workload: String,
    pub load: f64,
    pub submitted: usize,
    pub completed: usize,
    pub incomplete: usize,
    pub null_reads: usize,
    pub violations: usize,
    pub mean_latency_ns: f64,
    pub p50_latency_ns: f64,
    pub p99_latency_ns: f64,
    pub mean_read_latency_ns: f64,
    pub mean_write_latency_ns: f64,
    pub mean_read_slowdown: f64,
    pub mean_write_slowdown: f64,
    pub mean_slowdown: f64,
    pub p50_slowdown: f64,
    pub p99_slowdown: f64,
    pub min_slowdown: f64,
}

pub const SUMMARY_HEADER: &str = "fabric,workload,load,submitted,completed,incomplete,null_reads,violations,mean_latency_ns,p50_latency_ns,p99_latency_ns,mean_read_latency_ns,mean_write_latency_ns,mean_read_slowdown,mean_write_slowdown,mean_slowdown,p50_slowdown,p99_slowdown,min_slowdown";

impl Summary {
    pub fn from_result(r: &RunResult, workload: &str, load: f64, cluster: &ClusterConfig) -> Self {
        Self::from_completions(
            &r.fabric,
            workload,
            load,
            &r.completions,
            r.submitted,
            r.incomplete,
            r.violations.len(),
            cluster,
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_completions(
        fabric: &str,
        workload: &str,
        load: f64,
        completions: &[Completion],
        submitted: usize,
        incomplete: usize,
        violations: usize,
        cluster: &ClusterConfig,
    ) -> Self {
        let ideal = Ideal::new(cluster);
        let mut lat = Vec::new();
        let mut slow = Vec::new();
        let (mut rl, mut wl, mut rs, mut ws) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for c in completions.iter().filter(|c| counted(c)) {
            let l = c.latency().as_ns();
            let s = c.latency().ps() as f64 / ideal.of(c.kind, c.bytes).ps() as f64;
            lat.push(l);
            slow.push(s);
            if c.kind.is_read_like() {
                rl.push(l);
                rs.push(s);
            } else {
                wl.push(l);
                ws.push(s);
            }
        }
        Summary {
            fabric: fabric.to_string(),
            workload: workload.to_string(),
            load,
            submitted,
            completed: lat.len(),
            incomplete,
            null_reads: completions.len() - lat.len(),
            violations,
            mean_latency_ns: mean(&lat),
            p50_latency_ns: percentile(&lat, 50.0),
            p99_latency_ns: percentile(&lat, 99.0),
            mean_read_latency_ns: mean(&rl),
            mean_write_latency_ns: mean(&wl),
            mean_read_slowdown: mean(&rs),
            mean_write_slowdown: mean(&ws),
            mean_slowdown: mean(&slow),
            p50_slowdown: percentile(&slow, 50.0),
            p99_slowdown: percentile(&slow, 99.0),
            min_slowdown: slow.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{:.3},{:.3},{:.3},{:.3},{:.3},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            self.fabric,
            self.workload,
            self.load,
            self.submitted,
            self.completed,
            self.incomplete,
            self.null_reads,
            self.violations,
            self.mean_latency_ns,
            self.p50_latency_ns,
            self.p99_latency_ns,
            self.mean_read_latency_ns,
            self.mean_write_latency_ns,
            self.mean_read_slowdown,
            self.mean_write_slowdown,
            self.mean_slowdown,
            self.p50_slowdown,
            self.p99_slowdown,
            self.min_slowdown
        )
    }

    /// Parses a row written by [`Summary::csv_row`].
    pub fn parse_row(line: &str) -> Option<Summary> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 19 {
            return None;
        }
        let n = |i: usize| f[i].parse::<f64>().ok();
        let u = |i: usize| f[i].parse::<usize>().ok();
        Some(Summary {
            fabric: f[0].to_string(),
            workload: f[1].to_string(),
            load: n(2)?,
            submitted: u(3)?,
            completed: u(4)?,
            incomplete: u(5)?,
            null_reads: u(6)?,
            violations: u(7)?,
            mean_latency_ns: n(8)?,
            p50_latency_ns: n(9)?,
            p99_latency_ns: n(10)?,
            mean_read_latency_ns: n(11)?,
            mean_write_latency_ns: n(12)?,
            mean_read_slowdown: n(13)?,
            mean_write_slowdown: n(14)?,
            mean_slowdown: n(15)?,
            p50_slowdown: n(16)?,
            p99_slowdown: n(17)?,
            min_slowdown: n(18)?,
        })
    }

    /// `key = value` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let header: Vec<&str> = SUMMARY_HEADER.split(',').collect();
        let row = self.csv_row();
        for (k, v) in header.iter().zip(row.split(',')) {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

pub fn summaries_csv(rows: &[Summary]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}
