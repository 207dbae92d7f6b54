use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use edm_cli::experiment::{cell_dir, run_experiment, run_sweep, sweep_cells};
use edm_cli::plot::emit_plots;
use edm_cli::spec::{ExperimentSpec, FABRICS};
use edm_core::edm::verify_table1;
use edm_core::workloads::write_trace;

#[derive(Parser)]
#[command(name = "edmsim", version, about = "EDM memory fabric simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a workload trace CSV.
    GenTrace(SpecArgs),
    /// Run one experiment and write its result files.
    Run(SpecArgs),
    /// Run a grid of fabrics x loads in parallel.
    Sweep {
        #[command(flatten)]
        spec: SpecArgs,
        /// Comma-separated fabrics, or `all`.
        #[arg(long, default_value = "all")]
        fabrics: String,
        /// Comma-separated offered loads.
        #[arg(long, default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
        loads: String,
    },
    /// Draw figures from the summary CSVs in a results directory.
    Plot {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Check unloaded 64 B read/write head latency against the reference.
    VerifyTable1,
}

/// Every field overrides the config file, which overrides the defaults.
#[derive(Args, Clone, Default)]
struct SpecArgs {
    /// TOML config with [run], [cluster] and [workload] sections.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    fabric: Option<String>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    compute_nodes: Option<usize>,
    #[arg(long)]
    link_gbps: Option<f64>,
    #[arg(long)]
    chunk_bytes: Option<u32>,
    #[arg(long)]
    max_notifications: Option<u32>,
    /// fcfs or srpt.
    #[arg(long)]
    policy: Option<String>,
    /// all-to-all, heavy-tailed, kv or trace.
    #[arg(long)]
    workload: Option<String>,
    #[arg(long)]
    load: Option<f64>,
    #[arg(long)]
    read_fraction: Option<f64>,
    #[arg(long)]
    size: Option<u32>,
    /// Bundled profile name or CDF CSV path.
    #[arg(long)]
    profile: Option<String>,
    /// KV mix: A, B or F.
    #[arg(long)]
    kv: Option<String>,
    /// Replay a trace CSV (implies --workload trace).
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    duration_ms: Option<f64>,
    #[arg(long)]
    drain_ms: Option<f64>,
    #[arg(long)]
    read_timeout_us: Option<f64>,
    #[arg(long)]
    scheduler_log: bool,
    /// Output directory (run, sweep) or file (gen-trace).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl SpecArgs {
    fn resolve(&self) -> Result<ExperimentSpec> {
        let mut s = match &self.config {
            Some(p) => ExperimentSpec::load(p)?,
            None => ExperimentSpec::default(),
        };
        macro_rules! set {
            ($field:ident => $($dst:tt)+) => {
                if let Some(v) = &self.$field {
                    s.$($dst)+ = v.clone();
                }
            };
        }
        set!(fabric => run.fabric);
        set!(seed => run.seed);
        set!(duration_ms => run.duration_ms);
        set!(drain_ms => run.drain_ms);
        set!(nodes => cluster.nodes);
        set!(link_gbps => cluster.link_gbps);
        set!(chunk_bytes => cluster.chunk_bytes);
        set!(max_notifications => cluster.max_notifications);
        set!(policy => cluster.policy);
        set!(workload => workload.kind);
        set!(load => workload.load);
        set!(read_fraction => workload.read_fraction);
        set!(size => workload.size);
        set!(profile => workload.profile);
        set!(kv => workload.kv);
        if self.compute_nodes.is_some() {
            s.cluster.compute_nodes = self.compute_nodes;
        }
        if self.read_timeout_us.is_some() {
            s.run.read_timeout_us = self.read_timeout_us;
        }
        if self.scheduler_log {
            s.run.scheduler_log = true;
        }
        if let Some(t) = &self.trace {
            s.workload.kind = "trace".into();
            s.workload.trace = Some(t.clone());
        }
        if self.out.is_some() {
            s.run.out = self.out.clone();
        }
        s.validate()?;
        Ok(s)
    }
}

fn out_dir(s: &ExperimentSpec) -> PathBuf {
    s.run.out.clone().unwrap_or_else(|| PathBuf::from("results"))
}

fn gen_trace(args: &SpecArgs) -> Result<()> {
    let spec = args.resolve()?;
    let trace = spec.build_trace()?;
    let path = spec.run.out.clone().unwrap_or_else(|| PathBuf::from("trace.csv"));
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    write_trace(&trace, BufWriter::new(f))?;
    println!("wrote {} records to {}", trace.records.len(), path.display());
    Ok(())
}

fn run(args: &SpecArgs) -> Result<bool> {
    let spec = args.resolve()?;
    let dir = out_dir(&spec);
    let o = run_experiment(&spec, &dir)?;
    print!("{}", o.summary.to_text());
    for v in &o.result.violations {
        eprintln!("invariant violation: {v}");
    }
    println!("results in {}", dir.display());
    Ok(o.result.violations.is_empty())
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| anyhow::anyhow!("bad {what} `{x}`"))
        })
        .collect()
}

fn sweep(args: &SpecArgs, fabrics: &str, loads: &str) -> Result<bool> {
    let base = args.resolve()?;
    let fabrics: Vec<String> = if fabrics == "all" {
        FABRICS.iter().map(|s| s.to_string()).collect()
    } else {
        parse_list(fabrics, "fabric")?
    };
    for f in &fabrics {
        if !FABRICS.contains(&f.as_str()) {
            anyhow::bail!("unknown fabric `{f}`");
        }
    }
    let loads: Vec<f64> = parse_list(loads, "load")?;
    let dir = out_dir(&base);
    let cells = sweep_cells(&base, &fabrics, &loads);
    let rows = run_sweep(&cells, &dir)?;
    let mut clean = true;
    for (c, (s, violations)) in cells.iter().zip(&rows) {
        println!(
            "{:9} load {:.2}: mean slowdown {:.3}, p99 {:.3}, mean latency {:.1} ns",
            c.fabric, c.load, s.mean_slowdown, s.p99_slowdown, s.mean_latency_ns
        );
        if *violations > 0 {
            eprintln!("{} invariant violations in {}", violations, cell_dir(&dir, c).display());
            clean = false;
        }
    }
    println!("summary in {}", dir.join("summary.csv").display());
    Ok(clean)
}

fn plot(dir: &Path) -> Result<()> {
    let e = emit_plots(dir)?;
    for f in &e.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn verify() -> bool {
    let check = verify_table1(&Default::default());
    println!("read  {} (reference {})", check.read, check.ref_read);
    println!("write {} (reference {})", check.write, check.ref_write);
    println!("{}", if check.passes() { "PASS" } else { "FAIL" });
    check.passes()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let r = match &cli.cmd {
        Cmd::GenTrace(a) => gen_trace(a).map(|_| true),
        Cmd::Run(a) => run(a),
        Cmd::Sweep { spec, fabrics, loads } => sweep(spec, fabrics, loads),
        Cmd::Plot { dir } => plot(dir).map(|_| true),
        Cmd::VerifyTable1 => Ok(verify()),
    };
    match r {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
