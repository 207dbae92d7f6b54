//! Experiment specification: everything that determines a run. Stored as
//! TOML next to the results.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use edm_baselines::{Baseline, BaselineConfig, BaselineFabric};
use edm_core::edm::{EdmConfig, EdmSim};
use edm_core::fabric::{FabricModel, RunLimits};
use edm_core::model::{ClusterConfig, PriorityPolicy, SimTime};
use edm_core::workloads::{
    gen_all_to_all, gen_heavy_tailed, gen_kv_profile, read_trace, CdfProfile, KvWorkload,
    NodeRoles, Trace,
};

pub const FABRICS: [&str; 7] = ["edm", "ird", "dctcp", "pfabric", "pfc", "fastpass", "cxl"];
pub const PROFILES: [&str; 5] = ["hadoop-sort", "spark-sort", "spark-sql", "graphlab", "memcached"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub fabric: String,
    pub seed: u64,
    /// Injection window.
    pub duration_ms: f64,
    /// Extra time after injection for in-flight messages to finish.
    pub drain_ms: f64,
    /// EDM read timeout; unset uses 10 us, or 1 ms on CDF workloads.
    pub read_timeout_us: Option<f64>,
    /// Record every scheduler decision (EDM only; large).
    pub scheduler_log: bool,
    pub out: Option<PathBuf>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            fabric: "edm".into(),
            seed: 1,
            duration_ms: 0.05,
            drain_ms: 5.0,
            read_timeout_us: None,
            scheduler_log: false,
            out: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSection {
    pub nodes: usize,
    /// Compute nodes are ports `0..compute_nodes`; unset splits 50:50.
    pub compute_nodes: Option<usize>,
    pub link_gbps: f64,
    pub chunk_bytes: u32,
    pub max_notifications: u32,
    pub policy: String,
    pub scheduler_clock_ghz: f64,
}

impl Default for ClusterSection {
    fn default() -> Self {
        let c = ClusterConfig::default();
        ClusterSection {
            nodes: c.n_ports,
            compute_nodes: None,
            link_gbps: c.link_gbps,
            chunk_bytes: c.chunk_bytes,
            max_notifications: c.max_active_notifications,
            policy: "srpt".into(),
            scheduler_clock_ghz: c.scheduler_clock_ghz,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadSection {
    /// `all-to-all`, `heavy-tailed`, `kv` or `trace`.
    pub kind: String,
    pub load: f64,
    /// all-to-all: fraction of reads.
    pub read_fraction: f64,
    /// all-to-all: message size in bytes.
    pub size: u32,
    /// heavy-tailed: a bundled profile name or a CDF CSV path.
    pub profile: String,
    /// kv: `A`, `B` or `F`.
    pub kv: String,
    /// trace: CSV path.
    pub trace: Option<PathBuf>,
}

impl Default for WorkloadSection {
    fn default() -> Self {
        WorkloadSection {
            kind: "all-to-all".into(),
            load: 0.5,
            read_fraction: 0.5,
            size: 64,
            profile: "hadoop-sort".into(),
            kv: "A".into(),
            trace: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub run: RunSection,
    pub cluster: ClusterSection,
    pub workload: WorkloadSection,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in config file {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if !FABRICS.contains(&self.run.fabric.as_str()) {
            bail!("unknown fabric `{}` (expected one of {})", self.run.fabric, FABRICS.join(", "));
        }
        if !(self.run.duration_ms > 0.0) || self.run.drain_ms < 0.0 {
            bail!("duration_ms must be positive and drain_ms non-negative");
        }
        let w = &self.workload;
        match w.kind.as_str() {
            "all-to-all" | "heavy-tailed" | "kv" => {
                if !(w.load >= 0.0 && w.load <= 1.0) {
                    bail!("load {} outside [0, 1]", w.load);
                }
            }
            "trace" if w.trace.is_some() => {}
            "trace" => bail!("workload kind `trace` needs a trace path"),
            other => bail!("unknown workload kind `{other}`"),
        }
        PriorityPolicy::from_str(&self.cluster.policy)?;
        self.cluster_config().validate()?;
        Ok(())
    }

    pub fn cluster_config(&self) -> ClusterConfig {
        let c = &self.cluster;
        ClusterConfig {
            n_ports: c.nodes,
            link_gbps: c.link_gbps,
            chunk_bytes: c.chunk_bytes,
            max_active_notifications: c.max_notifications,
            scheduler_clock_ghz: c.scheduler_clock_ghz,
            priority_policy: PriorityPolicy::from_str(&c.policy).unwrap_or(PriorityPolicy::Srpt),
            ..ClusterConfig::default()
        }
    }

    pub fn roles(&self) -> NodeRoles {
        NodeRoles {
            n_ports: self.cluster.nodes,
            n_compute: self.cluster.compute_nodes.unwrap_or(self.cluster.nodes / 2),
        }
    }

    pub fn inject_until(&self) -> SimTime {
        SimTime::from_ps((self.run.duration_ms * 1e9).round() as u64)
    }

    pub fn limits(&self) -> RunLimits {
        RunLimits::window(
            self.inject_until(),
            SimTime::from_ps((self.run.drain_ms * 1e9).round() as u64),
        )
    }

    /// Short workload label for result tables.
    pub fn workload_label(&self) -> String {
        let w = &self.workload;
        match w.kind.as_str() {
            "all-to-all" => format!("all-to-all-{}B", w.size),
            "heavy-tailed" => w.profile.clone(),
            "kv" => format!("kv-{}", w.kv),
            _ => w
                .trace
                .as_ref()
                .and_then(|p| p.file_stem())
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "trace".into()),
        }
    }

    pub fn read_timeout(&self) -> SimTime {
        let us = self.run.read_timeout_us.unwrap_or(match self.workload.kind.as_str() {
            "heavy-tailed" => 1_000.0,
            _ => 10.0,
        });
        SimTime::from_ps((us * 1e6).round() as u64)
    }

    pub fn build_trace(&self) -> Result<Trace> {
        let w = &self.workload;
        let c = &self.cluster;
        let (roles, seed, until) = (self.roles(), self.run.seed, self.inject_until());
        let spec = match w.kind.as_str() {
            "all-to-all" => gen_all_to_all(
                roles,
                w.load,
                w.read_fraction,
                w.size,
                c.link_gbps,
                c.chunk_bytes,
                seed,
            ),
            "heavy-tailed" => {
                let profile = if w.profile.ends_with(".csv") {
                    let text = std::fs::read_to_string(&w.profile)
                        .with_context(|| format!("reading profile {}", w.profile))?;
                    CdfProfile::from_csv(&w.profile, &text)?
                } else {
                    CdfProfile::builtin(&w.profile)?
                };
                gen_heavy_tailed(&profile, roles, w.load, c.link_gbps, c.chunk_bytes, seed)
            }
            "kv" => gen_kv_profile(
                KvWorkload::from_str(&w.kv)?,
                roles,
                w.load,
                c.link_gbps,
                c.chunk_bytes,
                seed,
            ),
            _ => {
                let path = w.trace.as_ref().expect("validated");
                let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
                return Ok(read_trace(BufReader::new(f))
                    .with_context(|| format!("in trace {}", path.display()))?);
            }
        };
        Ok(spec.generate(until))
    }

    pub fn build_fabric(&self) -> Box<dyn FabricModel + Send> {
        let cluster = self.cluster_config();
        match self.run.fabric.as_str() {
            "edm" => {
                let cfg = EdmConfig {
                    roles: self.roles(),
                    read_timeout: self.read_timeout(),
                    util_bucket: Some(SimTime::from_us(1)),
                    address_seed: self.run.seed,
                    scheduler_log: self.run.scheduler_log,
                    ..EdmConfig::with_cluster(cluster)
                };
                Box::new(EdmSim::new(cfg))
            }
            name => {
                let kind = Baseline::from_name(name).expect("validated fabric");
                let cfg = BaselineConfig::with_ports(cluster.n_ports, cluster.link_gbps);
                Box::new(BaselineFabric::new(kind, cfg))
            }
        }
    }
}
