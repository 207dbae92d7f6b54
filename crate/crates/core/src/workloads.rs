//! Trace generation: load-controlled Poisson arrivals, size distributions
//! from CDF profiles, key-value read/write mixes, and the trace CSV format.
//!
//! Offered load is the expected occupancy of a compute node's uplink in
//! 66-bit slots, counting /N/ blocks, request blocks and chunk framing.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use thiserror::Error;

use crate::engine::{component_rng, splitmix64};
use crate::model::{MessageKind, PortId, SimTime, BLOCK_BITS};
use crate::phy::memory_block_count;

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("invalid CDF profile {name}: {reason}")]
    BadProfile { name: String, reason: String },
    #[error("unknown profile {0}")]
    UnknownProfile(String),
    #[error("trace line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TraceRecord {
    pub arrival: SimTime,
    pub src: PortId,
    pub dst: PortId,
    pub kind: MessageKind,
    pub size_bytes: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceHeader {
    pub profile: String,
    pub seed: u64,
    pub n_ports: usize,
    pub link_gbps: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub records: Vec<TraceRecord>,
}

/// Compute nodes are ports `0..n_compute`, memory nodes the rest. With
/// `n_compute == n_ports` every node does both and picks any other peer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeRoles {
    pub n_ports: usize,
    pub n_compute: usize,
}

impl NodeRoles {
    pub fn split(n_ports: usize) -> Self {
        NodeRoles {
            n_ports,
            n_compute: n_ports / 2,
        }
    }

    pub fn symmetric(n_ports: usize) -> Self {
        NodeRoles {
            n_ports,
            n_compute: n_ports,
        }
    }

    fn is_symmetric(&self) -> bool {
        self.n_compute == self.n_ports
    }

    pub fn sources(&self) -> std::ops::Range<usize> {
        0..self.n_compute
    }

    fn pick_dst(&self, src: usize, rng: &mut ChaCha8Rng) -> usize {
        if self.is_symmetric() {
            let d = rng.gen_range(0..self.n_ports - 1);
            if d >= src {
                d + 1
            } else {
                d
            }
        } else {
            rng.gen_range(self.n_compute..self.n_ports)
        }
    }
}

/// Piecewise CDF over message sizes. Below the first knot all mass sits on
/// the first size; between knots the CDF is linear in log(size).
#[derive(Clone, Debug, PartialEq)]
pub struct CdfProfile {
    pub name: String,
    pub knots: Vec<(u32, f64)>,
}

pub const PROFILE_NAMES: [&str; 5] = ["hadoop-sort", "spark-sort", "spark-sql", "graphlab", "memcached"];

impl CdfProfile {
    pub fn new(name: &str, knots: Vec<(u32, f64)>) -> Result<Self, WorkloadError> {
        let bad = |reason: &str| WorkloadError::BadProfile {
            name: name.to_string(),
            reason: reason.to_string(),
        };
        if knots.is_empty() {
            return Err(bad("no knots"));
        }
        if knots[0].0 == 0 || knots[0].1 <= 0.0 {
            return Err(bad("first knot needs size >= 1 and positive probability"));
        }
        for w in knots.windows(2) {
            if w[1].0 <= w[0].0 || w[1].1 <= w[0].1 {
                return Err(bad("sizes and probabilities must strictly increase"));
            }
        }
        if (knots.last().unwrap().1 - 1.0).abs() > 1e-12 {
            return Err(bad("last probability must be 1"));
        }
        Ok(CdfProfile {
            name: name.to_string(),
            knots,
        })
    }

    /// Parses `size_bytes,cdf` rows; a header row and `#` comments are skipped.
    pub fn from_csv(name: &str, text: &str) -> Result<Self, WorkloadError> {
        let mut knots = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("size") {
                continue;
            }
            let parse_err = || WorkloadError::Parse {
                line: i + 1,
                reason: format!("expected size,cdf in {line:?}"),
            };
            let (s, p) = line.split_once(',').ok_or_else(parse_err)?;
            knots.push((
                s.trim().parse().map_err(|_| parse_err())?,
                p.trim().parse().map_err(|_| parse_err())?,
            ));
        }
        Self::new(name, knots)
    }

    /// One of the bundled application profiles.
    pub fn builtin(name: &str) -> Result<Self, WorkloadError> {
        let text = match name {
            "hadoop-sort" => include_str!("../data/profiles/hadoop-sort.csv"),
            "spark-sort" => include_str!("../data/profiles/spark-sort.csv"),
            "spark-sql" => include_str!("../data/profiles/spark-sql.csv"),
            "graphlab" => include_str!("../data/profiles/graphlab.csv"),
            "memcached" => include_str!("../data/profiles/memcached.csv"),
            other => return Err(WorkloadError::UnknownProfile(other.to_string())),
        };
        Self::from_csv(name, text)
    }

    pub fn max_size(&self) -> u32 {
        self.knots.last().unwrap().0
    }

    /// Inverse transform of `u` in (0, 1].
    pub fn quantile(&self, u: f64) -> u32 {
        let (s0, p0) = self.knots[0];
        if u <= p0 {
            return s0;
        }
        let i = self.knots.partition_point(|&(_, p)| p < u);
        let i = i.min(self.knots.len() - 1);
        let (a, pa) = self.knots[i - 1];
        let (b, pb) = self.knots[i];
        let frac = (u - pa) / (pb - pa);
        let x = ((a as f64).ln() + frac * ((b as f64).ln() - (a as f64).ln())).exp();
        // Ceil keeps F(knot) exact: u <= p_k never exceeds s_k.
        (x - 1e-9).ceil().clamp(a as f64 + 1.0, b as f64) as u32
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> u32 {
        let u: f64 = 1.0 - rng.gen::<f64>();
        self.quantile(u)
    }

    /// Model CDF at `size`.
    pub fn cdf(&self, size: f64) -> f64 {
        if size < self.knots[0].0 as f64 {
            return 0.0;
        }
        for w in self.knots.windows(2) {
            let ((a, pa), (b, pb)) = (w[0], w[1]);
            if size < b as f64 {
                let f = (size / a as f64).ln() / (b as f64 / a as f64).ln();
                return pa + (pb - pa) * f;
            }
        }
        1.0
    }

    /// Exact probability mass of every size the sampler can return.
    pub fn pmf(&self) -> Vec<(u32, f64)> {
        let mut out = vec![self.knots[0]];
        for w in self.knots.windows(2) {
            let (a, _) = w[0];
            let (b, _) = w[1];
            let mut prev = self.cdf(a as f64);
            for s in a + 1..=b {
                let c = if s == b { w[1].1 } else { self.cdf(s as f64) };
                out.push((s, c - prev));
                prev = c;
            }
        }
        out
    }

    pub fn expect<F: Fn(u32) -> f64>(&self, f: F) -> f64 {
        self.pmf().into_iter().map(|(s, p)| p * f(s)).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SizeDist {
    Fixed(u32),
    Cdf(CdfProfile),
}

impl SizeDist {
    fn sample<R: Rng>(&self, rng: &mut R) -> u32 {
        match self {
            SizeDist::Fixed(s) => *s,
            SizeDist::Cdf(p) => p.sample(rng),
        }
    }

    fn expect<F: Fn(u32) -> f64>(&self, f: F) -> f64 {
        match self {
            SizeDist::Fixed(s) => f(*s),
            SizeDist::Cdf(p) => p.expect(f),
        }
    }
}

/// Uplink blocks a write of `size` bytes costs its sender: /N/ plus one
/// framed chunk per `chunk_bytes`.
pub fn write_uplink_blocks(size: u32, chunk_bytes: u32) -> u64 {
    let full = (size / chunk_bytes) as u64;
    let tail = size % chunk_bytes;
    let mut blocks = 1 + full * (2 + (chunk_bytes as u64).div_ceil(8));
    if tail > 0 {
        blocks += 2 + (tail as u64).div_ceil(8);
    }
    blocks
}

/// Uplink blocks of a read request to a random (above 4 KiB) address.
pub fn read_uplink_blocks() -> u64 {
    memory_block_count(MessageKind::Rreq, 0, 1 << 12)
}

pub fn record_uplink_blocks(r: &TraceRecord, chunk_bytes: u32) -> u64 {
    match r.kind {
        MessageKind::Wreq => write_uplink_blocks(r.size_bytes, chunk_bytes),
        MessageKind::RmwReq => 5,
        _ => read_uplink_blocks(),
    }
}

/// Open-loop Poisson generator specification.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadSpec {
    pub roles: NodeRoles,
    pub link_gbps: f64,
    pub chunk_bytes: u32,
    pub load: f64,
    pub read_fraction: f64,
    pub read_sizes: SizeDist,
    pub write_sizes: SizeDist,
    pub seed: u64,
    pub profile: String,
}

impl LoadSpec {
    pub fn mean_uplink_blocks(&self) -> f64 {
        let r = read_uplink_blocks() as f64;
        let w = self
            .write_sizes
            .expect(|s| write_uplink_blocks(s, self.chunk_bytes) as f64);
        self.read_fraction * r + (1.0 - self.read_fraction) * w
    }

    /// Mean inter-arrival per source, in ps.
    pub fn mean_gap_ps(&self) -> f64 {
        let slot_ps = BLOCK_BITS as f64 * 1_000.0 / self.link_gbps;
        self.mean_uplink_blocks() * slot_ps / self.load
    }

    pub fn header(&self) -> TraceHeader {
        TraceHeader {
            profile: self.profile.clone(),
            seed: self.seed,
            n_ports: self.roles.n_ports,
            link_gbps: self.link_gbps,
        }
    }

    pub fn stream(&self) -> PoissonStream {
        PoissonStream::new(self.clone())
    }

    /// All arrivals before `until`.
    pub fn generate(&self, until: SimTime) -> Trace {
        Trace {
            header: self.header(),
            records: self.stream().take_while(|r| r.arrival < until).collect(),
        }
    }
}

struct SourceState {
    rng: ChaCha8Rng,
    next_ps: f64,
}

/// Arrivals of all sources merged in time order; equal times break by
/// source index.
pub struct PoissonStream {
    spec: LoadSpec,
    exp: Option<Exp<f64>>,
    sources: Vec<SourceState>,
    heap: BinaryHeap<Reverse<(u64, usize)>>,
}

impl PoissonStream {
    fn new(spec: LoadSpec) -> Self {
        let exp = (spec.load > 0.0).then(|| Exp::new(1.0 / spec.mean_gap_ps()).expect("positive rate"));
        let mut sources = Vec::new();
        let mut heap = BinaryHeap::new();
        if let Some(exp) = exp {
            for s in spec.roles.sources() {
                let mut rng = component_rng(spec.seed, s as u64);
                let t = exp.sample(&mut rng);
                heap.push(Reverse((t as u64, s)));
                sources.push(SourceState { rng, next_ps: t });
            }
        }
        PoissonStream {
            spec,
            exp,
            sources,
            heap,
        }
    }
}

impl Iterator for PoissonStream {
    type Item = TraceRecord;

    fn next(&mut self) -> Option<TraceRecord> {
        let exp = self.exp?;
        let Reverse((t, s)) = self.heap.pop()?;
        let st = &mut self.sources[s];
        let rng = &mut st.rng;
        let dst = self.spec.roles.pick_dst(s, rng);
        let read = rng.gen::<f64>() < self.spec.read_fraction;
        let (kind, size) = if read {
            (MessageKind::Rreq, self.spec.read_sizes.sample(rng))
        } else {
            (MessageKind::Wreq, self.spec.write_sizes.sample(rng))
        };
        st.next_ps += exp.sample(rng);
        self.heap.push(Reverse((st.next_ps as u64, s)));
        Some(TraceRecord {
            arrival: SimTime(t),
            src: PortId::at(s),
            dst: PortId::at(dst),
            kind,
            size_bytes: size,
        })
    }
}

/// All-to-all fixed-size reads and writes between compute and memory nodes.
pub fn gen_all_to_all(
    roles: NodeRoles,
    load: f64,
    read_fraction: f64,
    size: u32,
    link_gbps: f64,
    chunk_bytes: u32,
    seed: u64,
) -> LoadSpec {
    LoadSpec {
        roles,
        link_gbps,
        chunk_bytes,
        load,
        read_fraction,
        read_sizes: SizeDist::Fixed(size),
        write_sizes: SizeDist::Fixed(size),
        seed,
        profile: format!("all-to-all-{size}B"),
    }
}

/// Equal read/write mix with sizes drawn from `profile`.
pub fn gen_heavy_tailed(
    profile: &CdfProfile,
    roles: NodeRoles,
    load: f64,
    link_gbps: f64,
    chunk_bytes: u32,
    seed: u64,
) -> LoadSpec {
    LoadSpec {
        roles,
        link_gbps,
        chunk_bytes,
        load,
        read_fraction: 0.5,
        read_sizes: SizeDist::Cdf(profile.clone()),
        write_sizes: SizeDist::Cdf(profile.clone()),
        seed,
        profile: profile.name.clone(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KvWorkload {
    A,
    B,
    F,
}

impl KvWorkload {
    pub fn write_fraction(self) -> f64 {
        match self {
            KvWorkload::A => 0.5,
            KvWorkload::B => 0.05,
            KvWorkload::F => 1.0 / 3.0,
        }
    }
}

impl FromStr for KvWorkload {
    type Err = WorkloadError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(KvWorkload::A),
            "B" => Ok(KvWorkload::B),
            "F" => Ok(KvWorkload::F),
            other => Err(WorkloadError::UnknownProfile(format!("kv-{other}"))),
        }
    }
}

pub const KV_READ_BYTES: u32 = 1024;
pub const KV_WRITE_BYTES: u32 = 100;

/// Key-value mix: reads fetch 1 KiB with an 8 B request, writes carry 100 B.
pub fn gen_kv_profile(
    w: KvWorkload,
    roles: NodeRoles,
    load: f64,
    link_gbps: f64,
    chunk_bytes: u32,
    seed: u64,
) -> LoadSpec {
    LoadSpec {
        roles,
        link_gbps,
        chunk_bytes,
        load,
        read_fraction: 1.0 - w.write_fraction(),
        read_sizes: SizeDist::Fixed(KV_READ_BYTES),
        write_sizes: SizeDist::Fixed(KV_WRITE_BYTES),
        seed,
        profile: format!("kv-{w:?}"),
    }
}

/// Deterministic 64 B-aligned remote address for record `index`.
pub fn derived_address(seed: u64, index: u64, capacity_bytes: u64) -> u64 {
    let lines = (capacity_bytes / 64).max(1);
    (splitmix64(seed ^ index.wrapping_mul(0xd6e8_feb8_6659_fd93)) % lines) * 64
}

const LOAD_NOTE: &str =
    "# load = compute uplink occupancy in 66-bit PCS slots, including control blocks and chunk framing";

pub fn write_trace<W: Write>(t: &Trace, mut out: W) -> Result<(), WorkloadError> {
    let h = &t.header;
    writeln!(out, "# profile,seed,n_ports,link_gbps")?;
    writeln!(out, "# {},{},{},{}", h.profile, h.seed, h.n_ports, h.link_gbps)?;
    writeln!(out, "{LOAD_NOTE}")?;
    let mut buf = String::from("arrival_ps,src,dst,kind,size_bytes\n");
    for r in &t.records {
        let _ = writeln!(
            buf,
            "{},{},{},{},{}",
            r.arrival.ps(),
            r.src.index(),
            r.dst.index(),
            r.kind.as_str(),
            r.size_bytes
        );
    }
    out.write_all(buf.as_bytes())?;
    Ok(())
}

pub fn read_trace<R: BufRead>(mut input: R) -> Result<Trace, WorkloadError> {
    let mut header = TraceHeader {
        profile: String::from("unknown"),
        seed: 0,
        n_ports: 0,
        link_gbps: 0.0,
    };
    // The second comment line carries the header values.
    let mut comments = Vec::new();
    let mut first = String::new();
    loop {
        first.clear();
        if input.read_line(&mut first)? == 0 {
            break;
        }
        if first.starts_with('#') {
            comments.push(first.trim_start_matches('#').trim().to_string());
        } else {
            break;
        }
    }
    if let Some(vals) = comments.get(1) {
        let v: Vec<&str> = vals.split(',').collect();
        if v.len() == 4 {
            header.profile = v[0].to_string();
            header.seed = v[1].parse().unwrap_or(0);
            header.n_ports = v[2].parse().unwrap_or(0);
            header.link_gbps = v[3].parse().unwrap_or(0.0);
        }
    }
    let rest = first.clone() + &{
        let mut s = String::new();
        input.read_to_string(&mut s)?;
        s
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .from_reader(rest.as_bytes());
    let mut records = Vec::new();
    let mut last = SimTime::ZERO;
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i + 2 + comments.len();
        let field = |k: usize| -> Result<&str, WorkloadError> {
            row.get(k).ok_or(WorkloadError::Parse {
                line,
                reason: format!("missing column {k}"),
            })
        };
        let num = |k: usize| -> Result<u64, WorkloadError> {
            field(k)?.trim().parse().map_err(|_| WorkloadError::Parse {
                line,
                reason: format!("column {k} is not an integer"),
            })
        };
        let kind = MessageKind::from_str(field(3)?).map_err(|e| WorkloadError::Parse {
            line,
            reason: e.to_string(),
        })?;
        let rec = TraceRecord {
            arrival: SimTime(num(0)?),
            src: PortId::new(num(1)? as usize).map_err(|e| WorkloadError::Parse {
                line,
                reason: e.to_string(),
            })?,
            dst: PortId::new(num(2)? as usize).map_err(|e| WorkloadError::Parse {
                line,
                reason: e.to_string(),
            })?,
            kind,
            size_bytes: num(4)? as u32,
        };
        if rec.arrival < last {
            return Err(WorkloadError::Parse {
                line,
                reason: "arrivals not sorted".into(),
            });
        }
        if rec.size_bytes == 0 && kind != MessageKind::RmwReq {
            return Err(WorkloadError::Parse {
                line,
                reason: "size must be >= 1".into(),
            });
        }
        last = rec.arrival;
        records.push(rec);
    }
    Ok(Trace { header, records })
}
