//! Comparison fabrics for the EDM simulator. All of them replay the same
//! traces and report the same completion records as the EDM fabric; only
//! the transport and switch logic differ.
//!
//! | name       | transport                         | switch                       |
//! |------------|-----------------------------------|------------------------------|
//! | `dctcp`    | window, ECN-driven (DCTCP)        | FIFO, tail drop, ECN marking |
//! | `pfabric`  | same as `dctcp`, rank = bytes left | rank order, worst-rank drop  |
//! | `pfc`      | rate, DCQCN                       | FIFO, lossless, PFC pause    |
//! | `ird`      | receiver grants, SRPT             | FIFO                         |
//! | `fastpass` | central arbiter allocations       | FIFO                         |
//! | `cxl`      | per-link credits, 68 B flits      | input-queued FIFO            |

pub mod arbiter;
pub mod common;
pub mod cxl;
pub mod flow;
pub mod ird;
pub mod net;
pub mod rate;
pub mod window;

use edm_core::fabric::{FabricModel, RunLimits, RunResult};
use edm_core::model::{MessageKind, SimTime};
use edm_core::workloads::TraceRecord;

pub use common::BaselineConfig;
use common::{lone_trace, IdealCache};
use net::{run_net, Discipline, DropPolicy, SwitchPolicy};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Baseline {
    Dctcp,
    PFabric,
    PfcDcqcn,
    Ird,
    Fastpass,
    Cxl,
}

impl Baseline {
    pub const ALL: [Baseline; 6] = [
        Baseline::Dctcp,
        Baseline::PFabric,
        Baseline::PfcDcqcn,
        Baseline::Ird,
        Baseline::Fastpass,
        Baseline::Cxl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::Dctcp => "dctcp",
            Baseline::PFabric => "pfabric",
            Baseline::PfcDcqcn => "pfc",
            Baseline::Ird => "ird",
            Baseline::Fastpass => "fastpass",
            Baseline::Cxl => "cxl",
        }
    }

    pub fn from_name(s: &str) -> Option<Baseline> {
        Baseline::ALL
            .into_iter()
            .find(|b| b.name() == s.trim().to_ascii_lowercase())
    }
}

pub struct BaselineFabric {
    pub kind: Baseline,
    pub cfg: BaselineConfig,
    ideal: IdealCache,
}

impl BaselineFabric {
    pub fn new(kind: Baseline, cfg: BaselineConfig) -> Self {
        BaselineFabric {
            kind,
            cfg,
            ideal: IdealCache::default(),
        }
    }

    fn simulate(&self, trace: &[TraceRecord], limits: &RunLimits) -> RunResult {
        let cfg = &self.cfg;
        let n = cfg.n_ports;
        let lossy = |discipline, drop| SwitchPolicy {
            discipline,
            drop,
            ecn: true,
        };
        let name = self.kind.name();
        match self.kind {
            Baseline::Dctcp => run_net(
                name,
                cfg,
                lossy(Discipline::Fifo, DropPolicy::Tail),
                n,
                trace,
                limits,
                &mut window::WindowTransport::new(false),
            ),
            Baseline::PFabric => run_net(
                name,
                cfg,
                lossy(Discipline::Rank, DropPolicy::WorstRank),
                n,
                trace,
                limits,
                &mut window::WindowTransport::new(true),
            ),
            Baseline::PfcDcqcn => run_net(
                name,
                cfg,
                lossy(Discipline::Fifo, DropPolicy::Lossless),
                n,
                trace,
                limits,
                &mut rate::RateTransport::new(),
            ),
            Baseline::Ird => {
                let limit = cfg.ird_outstanding_bytes.unwrap_or_else(|| cfg.bdp_bytes());
                let policy = SwitchPolicy {
                    discipline: Discipline::Fifo,
                    drop: DropPolicy::Unbounded,
                    ecn: false,
                };
                let mut t = ird::IrdTransport::new(n, limit);
                run_net(name, cfg, policy, n, trace, limits, &mut t)
            }
            Baseline::Fastpass => {
                let policy = SwitchPolicy {
                    discipline: Discipline::Fifo,
                    drop: DropPolicy::Unbounded,
                    ecn: false,
                };
                let mut t = arbiter::ArbiterTransport::new(n);
                run_net(name, cfg, policy, n + 1, trace, limits, &mut t)
            }
            Baseline::Cxl => cxl::run_cxl(cfg, trace, limits),
        }
    }
}

impl FabricModel for BaselineFabric {
    fn name(&self) -> &'static str {
        self.kind.name()
    }

    fn ideal_completion(&self, kind: MessageKind, size_bytes: u32) -> SimTime {
        self.ideal.get_or(kind, size_bytes, || {
            let r = self.simulate(&lone_trace(kind, size_bytes), &RunLimits::unbounded());
            let c = r.completions.first().expect("lone message completes");
            c.completed_at - c.submitted_at
        })
    }

    fn run(&mut self, trace: &[TraceRecord], limits: &RunLimits) -> RunResult {
        self.simulate(trace, limits)
    }
}
