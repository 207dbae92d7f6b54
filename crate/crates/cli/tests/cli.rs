use std::fs;
use std::path::Path;
use std::process::Command;

use edm_cli::experiment::{run_experiment, run_sweep, sweep_cells};
use edm_cli::metrics::Summary;
use edm_cli::plot::emit_plots;
use edm_cli::spec::ExperimentSpec;
use edm_core::fabric::parse_completion_csv;

fn small(fabric: &str, kind: &str) -> ExperimentSpec {
    let mut s = ExperimentSpec::default();
    s.run.fabric = fabric.into();
    s.run.duration_ms = 0.01;
    s.run.drain_ms = 2.0;
    s.cluster.nodes = 16;
    s.workload.kind = kind.into();
    s.workload.load = 0.6;
    s
}

fn tmp(name: &str) -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("edmsim-test-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&d);
    d
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn same_spec_gives_byte_identical_outputs() {
    for fabric in ["edm", "ird", "cxl"] {
        let spec = small(fabric, "heavy-tailed");
        let (a, b) = (tmp(&format!("det-a-{fabric}")), tmp(&format!("det-b-{fabric}")));
        run_experiment(&spec, &a).unwrap();
        run_experiment(&spec, &b).unwrap();
        let (fa, fb) = (files(&a), files(&b));
        assert!(fa.iter().any(|f| f.0 == "completions.csv"));
        assert_eq!(fa, fb, "{fabric}");
    }
}

#[test]
fn summary_recomputes_from_stored_spec_and_log() {
    for (fabric, kind) in [("edm", "all-to-all"), ("edm", "heavy-tailed"), ("dctcp", "kv"), ("fastpass", "heavy-tailed")] {
        let dir = tmp(&format!("recompute-{fabric}-{kind}"));
        run_experiment(&small(fabric, kind), &dir).unwrap();
        // Everything below comes from the files alone.
        let spec = ExperimentSpec::load(&dir.join("spec.toml")).unwrap();
        let completions = parse_completion_csv(&fs::read_to_string(dir.join("completions.csv")).unwrap()).unwrap();
        let submitted = spec.build_trace().unwrap().records.len();
        let violations = fs::read_to_string(dir.join("violations.txt")).unwrap().lines().count();
        let s = Summary::from_completions(
            &spec.run.fabric,
            &spec.workload_label(),
            spec.workload.load,
            &completions,
            submitted,
            submitted - completions.len(),
            violations,
            &spec.cluster_config(),
        );
        assert_eq!(s.to_text(), fs::read_to_string(dir.join("summary.txt")).unwrap(), "{fabric} {kind}");
    }
}

#[test]
fn sweep_rows_and_plots() {
    let dir = tmp("sweep");
    let fabrics = vec!["edm".to_string(), "pfabric".to_string()];
    let loads = [0.3, 0.6];
    let a2a = sweep_cells(&small("edm", "all-to-all"), &fabrics, &loads);
    run_sweep(&a2a, &dir).unwrap();
    let ht = sweep_cells(&small("edm", "heavy-tailed"), &fabrics, &loads);
    run_sweep(&ht, &dir).unwrap();
    let csv = fs::read_to_string(dir.join("summary.csv")).unwrap();
    // One row per cell; the second sweep kept the first one's rows.
    assert_eq!(csv.lines().count(), 1 + 8);
    let e = emit_plots(&dir).unwrap();
    let names: Vec<String> = e.files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert_eq!(
        names,
        ["latency_vs_load.csv", "latency_vs_load.svg", "slowdown_by_workload.csv", "slowdown_by_workload.svg"]
    );
    let lat = fs::read_to_string(dir.join("latency_vs_load.csv")).unwrap();
    // Two fabrics x read/write x two loads.
    assert_eq!(lat.lines().count(), 1 + 8);
    let svg = fs::read_to_string(dir.join("slowdown_by_workload.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
}

#[test]
fn single_fabric_plot_has_one_series_per_op() {
    let dir = tmp("single");
    run_sweep(&sweep_cells(&small("edm", "all-to-all"), &["edm".to_string()], &[0.2, 0.4]), &dir).unwrap();
    let e = emit_plots(&dir).unwrap();
    assert_eq!(e.files.len(), 2, "no heavy-tailed rows, so one figure");
    let svg = fs::read_to_string(dir.join("latency_vs_load.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
}

#[test]
fn empty_dir_plots_nothing() {
    let dir = tmp("empty");
    fs::create_dir_all(&dir).unwrap();
    assert!(emit_plots(&dir).unwrap().files.is_empty());
    assert_eq!(fs::read_dir(&dir).unwrap().count(), 0);
}

#[test]
fn binary_verify_and_config_errors() {
    let bin = env!("CARGO_BIN_EXE_edmsim");
    let out = Command::new(bin).arg("verify-table1").output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));

    let dir = tmp("badcfg");
    fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("bad.toml");
    fs::write(&cfg, "[cluster]\nnodes = 16\n[workload]\nload = \"high\"\n").unwrap();
    let out = Command::new(bin).args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.toml") && err.contains("line 4"), "{err}");
}

#[test]
fn binary_run_writes_results_and_flags_override_config() {
    let bin = env!("CARGO_BIN_EXE_edmsim");
    let dir = tmp("binrun");
    fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("exp.toml");
    fs::write(&cfg, "[run]\nfabric = \"pfc\"\nduration_ms = 0.005\n[cluster]\nnodes = 8\n").unwrap();
    let out_dir = dir.join("out");
    let out = Command::new(bin)
        .args(["run", "--fabric", "edm", "--load", "0.4", "--seed", "9", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let spec = ExperimentSpec::load(&out_dir.join("spec.toml")).unwrap();
    assert_eq!(spec.run.fabric, "edm");
    assert_eq!(spec.run.seed, 9);
    assert_eq!(spec.cluster.nodes, 8);
    assert_eq!(spec.workload.load, 0.4);
    for f in ["completions.csv", "utilization.csv", "audit.csv", "summary.txt"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }

    let trace = dir.join("t.csv");
    let out = Command::new(bin)
        .args(["gen-trace", "--nodes", "8", "--duration-ms", "0.002", "--out"])
        .arg(&trace)
        .output()
        .unwrap();
    assert!(out.status.success());
    let replay = dir.join("replay");
    let out = Command::new(bin)
        .args(["run", "--nodes", "8", "--trace"])
        .arg(&trace)
        .arg("--out")
        .arg(&replay)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let direct = dir.join("direct");
    Command::new(bin)
        .args(["run", "--nodes", "8", "--duration-ms", "0.002", "--out"])
        .arg(&direct)
        .output()
        .unwrap();
    assert_eq!(
        fs::read(replay.join("completions.csv")).unwrap(),
        fs::read(direct.join("completions.csv")).unwrap()
    );
}
