//! Single runs and load sweeps. Every output file is a pure function of the
//! spec, so repeating a run reproduces it byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use log::info;
use rayon::prelude::*;

use edm_core::fabric::RunResult;

use crate::metrics::{summaries_csv, Summary};
use crate::spec::ExperimentSpec;

/// In-memory outcome of one run.
pub struct Outcome {
    pub result: RunResult,
    pub summary: Summary,
}

pub fn execute(spec: &ExperimentSpec) -> Result<Outcome> {
    let trace = spec.build_trace()?;
    let mut fabric = spec.build_fabric();
    info!(
        "{} on {}: {} messages, load {}",
        spec.run.fabric,
        spec.workload_label(),
        trace.records.len(),
        spec.workload.load
    );
    let result = fabric.run(&trace.records, &spec.limits());
    let summary = Summary::from_result(
        &result,
        &spec.workload_label(),
        spec.workload.load,
        &spec.cluster_config(),
    );
    Ok(Outcome { result, summary })
}

fn counters_csv(r: &RunResult) -> String {
    let mut out = String::from("counter,value\n");
    let _ = writeln!(out, "events,{}", r.events);
    let _ = writeln!(out, "end_time_ps,{}", r.end_time.ps());
    for (k, v) in &r.counters {
        let _ = writeln!(out, "{k},{v}");
    }
    out
}

fn violations_text(r: &RunResult) -> String {
    r.violations.iter().map(|v| format!("{v}\n")).collect()
}

/// Runs `spec` and writes its result files into `out`:
/// `spec.toml`, `completions.csv`, `counters.csv`, `summary.txt`,
/// `violations.txt`, plus `utilization.csv`, `audit.csv` and
/// `scheduler.csv` when the fabric produces them.
pub fn run_experiment(spec: &ExperimentSpec, out: &Path) -> Result<Outcome> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let o = execute(spec)?;
    let r = &o.result;
    let write = |name: &str, body: &str| -> Result<()> {
        let p = out.join(name);
        fs::write(&p, body).with_context(|| format!("writing {}", p.display()))
    };
    write("spec.toml", &spec.to_toml())?;
    write("completions.csv", &r.completion_csv())?;
    write("counters.csv", &counters_csv(r))?;
    write("summary.txt", &o.summary.to_text())?;
    write("violations.txt", &violations_text(r))?;
    if let Some(u) = &r.util {
        write("utilization.csv", &u.to_csv())?;
    }
    if let Some(a) = &r.audit_csv {
        write("audit.csv", a)?;
    }
    if let Some(s) = &r.scheduler_log_csv {
        write("scheduler.csv", s)?;
    }
    Ok(o)
}

/// One sweep cell: a copy of the base spec at another fabric and load.
#[derive(Clone, Debug)]
pub struct Cell {
    pub fabric: String,
    pub load: f64,
    pub spec: ExperimentSpec,
}

pub fn sweep_cells(base: &ExperimentSpec, fabrics: &[String], loads: &[f64]) -> Vec<Cell> {
    let mut cells = Vec::new();
    for f in fabrics {
        for &load in loads {
            let mut spec = base.clone();
            spec.run.fabric = f.clone();
            spec.workload.load = load;
            cells.push(Cell {
                fabric: f.clone(),
                load,
                spec,
            });
        }
    }
    cells
}

pub fn cell_dir(out: &Path, c: &Cell) -> PathBuf {
    out.join(format!("{}-{}-load{:.2}", c.fabric, c.spec.workload_label(), c.load))
}

/// Runs every cell in parallel, each on its own simulator, then merges the
/// summaries in cell order into `out/summary.csv`.
pub fn run_sweep(cells: &[Cell], out: &Path) -> Result<Vec<(Summary, usize)>> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let results: Vec<Result<(Summary, usize)>> = cells
        .par_iter()
        .map(|c| {
            let o = run_experiment(&c.spec, &cell_dir(out, c))?;
            Ok((o.summary, o.result.violations.len()))
        })
        .collect();
    let rows = results.into_iter().collect::<Result<Vec<_>>>()?;
    let mut merged: Vec<Summary> = rows.iter().map(|(s, _)| s.clone()).collect();
    // A file that already has rows from other workloads keeps them.
    let path = out.join("summary.csv");
    if let Ok(old) = fs::read_to_string(&path) {
        let mut kept: Vec<Summary> = old
            .lines()
            .skip(1)
            .filter_map(Summary::parse_row)
            .filter(|o| !merged.iter().any(|n| same_cell(n, o)))
            .collect();
        kept.append(&mut merged);
        merged = kept;
    }
    fs::write(&path, summaries_csv(&merged)).with_context(|| format!("writing {}", path.display()))?;
    Ok(rows)
}

fn same_cell(a: &Summary, b: &Summary) -> bool {
    a.fabric == b.fabric && a.workload == b.workload && a.load == b.load
}
