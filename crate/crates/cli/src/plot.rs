//! Figures from `summary.csv`: mean latency against load for the fixed-size
//! workloads, and mean slowdown per heavy-tailed workload on a log axis.
//! Each SVG is written next to the CSV holding exactly its points.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use log::warn;

use crate::metrics::Summary;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// Loads every summary row found in `dir/summary.csv` and in one level of
/// subdirectories.
pub fn load_summaries(dir: &Path) -> Vec<Summary> {
    let mut files = vec![dir.join("summary.csv")];
    if let Ok(rd) = fs::read_dir(dir) {
        let mut subs: Vec<PathBuf> = rd.filter_map(|e| e.ok()).map(|e| e.path()).collect();
        subs.sort();
        files.extend(subs.into_iter().map(|p| p.join("summary.csv")));
    }
    let mut rows: Vec<Summary> = Vec::new();
    for f in files {
        let Ok(text) = fs::read_to_string(&f) else {
            continue;
        };
        for r in text.lines().skip(1).filter_map(Summary::parse_row) {
            if !rows
                .iter()
                .any(|o| o.fabric == r.fabric && o.workload == r.workload && o.load == r.load)
            {
                rows.push(r);
            }
        }
    }
    rows
}

/// A named polyline of (x, y) points.
struct Series {
    name: String,
    pts: Vec<(f64, f64)>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn nice_max(v: f64) -> f64 {
    if !(v > 0.0) {
        return 1.0;
    }
    let p = 10f64.powf(v.log10().floor());
    for m in [1.0, 2.0, 5.0, 10.0] {
        if m * p >= v {
            return m * p;
        }
    }
    10.0 * p
}

fn svg_open(out: &mut String, title: &str, xlabel: &str, ylabel: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + (W - LEFT - RIGHT) / 2.0,
        esc(title)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + (W - LEFT - RIGHT) / 2.0,
        H - 15.0,
        esc(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        TOP + (H - TOP - BOTTOM) / 2.0,
        TOP + (H - TOP - BOTTOM) / 2.0,
        esc(ylabel)
    );
    let _ = writeln!(
        out,
        r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - LEFT - RIGHT,
        H - TOP - BOTTOM
    );
}

fn legend(out: &mut String, names: &[String]) {
    for (i, n) in names.iter().enumerate() {
        let y = TOP + 10.0 + 18.0 * i as f64;
        let x = W - RIGHT + 12.0;
        let _ = writeln!(
            out,
            r#"<rect x="{x}" y="{}" width="12" height="12" fill="{}"/><text x="{}" y="{}">{}</text>"#,
            y - 10.0,
            COLORS[i % COLORS.len()],
            x + 18.0,
            y,
            esc(n)
        );
    }
}

/// Line chart on linear axes; x spans [0, 1] (offered load).
fn line_chart(title: &str, ylabel: &str, series: &[Series]) -> String {
    let ymax = nice_max(
        series
            .iter()
            .flat_map(|s| s.pts.iter().map(|p| p.1))
            .fold(0.0, f64::max),
    );
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |x: f64| LEFT + x * pw;
    let sy = |y: f64| TOP + ph - y / ymax * ph;
    let mut out = String::new();
    svg_open(&mut out, title, "offered load", ylabel);
    for k in 0..=5 {
        let x = k as f64 / 5.0;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{:.1}</text>"#,
            sx(x),
            TOP + ph + 16.0,
            x
        );
        let y = ymax * k as f64 / 5.0;
        let _ = writeln!(
            out,
            r##"<line x1="{LEFT}" x2="{x2}" y1="{yy}" y2="{yy}" stroke="#ddd"/><text x="{tx}" y="{ty}" text-anchor="end">{label}</text>"##,
            x2 = LEFT + pw,
            yy = sy(y),
            tx = LEFT - 4.0,
            ty = sy(y) + 4.0,
            label = fmt_tick(y)
        );
    }
    for (i, s) in series.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        let pts: Vec<String> = s
            .pts
            .iter()
            .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="2"/>"#,
            pts.join(" ")
        );
        for (x, y) in &s.pts {
            let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{c}"/>"#, sx(*x), sy(*y));
        }
    }
    legend(&mut out, &series.iter().map(|s| s.name.clone()).collect::<Vec<_>>());
    out.push_str("</svg>\n");
    out
}

fn fmt_tick(v: f64) -> String {
    if v >= 100.0 || v == v.trunc() {
        format!("{v:.0}")
    } else {
        format!("{v:.1}")
    }
}

/// Grouped bars on a log y axis: one group per category, one bar per
/// series. Missing cells leave a gap.
fn bar_chart_log(title: &str, ylabel: &str, cats: &[String], series: &[(String, Vec<Option<f64>>)]) -> String {
    let vals = series.iter().flat_map(|s| s.1.iter().flatten().copied());
    let top = vals.fold(1.0f64, f64::max);
    let decades = top.log10().ceil().max(1.0);
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    // The axis starts at 1: slowdown cannot drop below the ideal.
    let sy = |y: f64| TOP + ph - (y.max(1.0).log10() / decades) * ph;
    let mut out = String::new();
    svg_open(&mut out, title, "workload", ylabel);
    for d in 0..=decades as i32 {
        let y = 10f64.powi(d);
        let _ = writeln!(
            out,
            r##"<line x1="{LEFT}" x2="{x2}" y1="{yy}" y2="{yy}" stroke="#ddd"/><text x="{tx}" y="{ty}" text-anchor="end">{label}</text>"##,
            x2 = LEFT + pw,
            yy = sy(y),
            tx = LEFT - 4.0,
            ty = sy(y) + 4.0,
            label = fmt_tick(y)
        );
    }
    let group = pw / cats.len().max(1) as f64;
    let bar = group * 0.8 / series.len().max(1) as f64;
    for (ci, cat) in cats.iter().enumerate() {
        let gx = LEFT + group * ci as f64 + group * 0.1;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="10">{}</text>"#,
            gx + group * 0.4,
            TOP + ph + 16.0,
            esc(cat)
        );
        for (si, (_, v)) in series.iter().enumerate() {
            if let Some(y) = v[ci] {
                let x = gx + bar * si as f64;
                let _ = writeln!(
                    out,
                    r#"<rect x="{x:.2}" y="{:.2}" width="{bar:.2}" height="{:.2}" fill="{}"/>"#,
                    sy(y),
                    TOP + ph - sy(y),
                    COLORS[si % COLORS.len()]
                );
            }
        }
    }
    legend(&mut out, &series.iter().map(|s| s.0.clone()).collect::<Vec<_>>());
    out.push_str("</svg>\n");
    out
}

/// Files written by [`emit_plots`].
#[derive(Debug, Default, PartialEq)]
pub struct Emitted {
    pub files: Vec<PathBuf>,
}

/// Writes `latency_vs_load.{svg,csv}` and `slowdown_by_workload.{svg,csv}`
/// into `dir`. A figure with no data is skipped with a warning.
pub fn emit_plots(dir: &Path) -> Result<Emitted> {
    let rows = load_summaries(dir);
    let mut done = Emitted::default();
    if rows.is_empty() {
        warn!("no summary rows under {}; nothing to plot", dir.display());
        return Ok(done);
    }
    let mut write = |name: &str, body: String| -> Result<()> {
        let p = dir.join(name);
        fs::write(&p, body).with_context(|| format!("writing {}", p.display()))?;
        done.files.push(p);
        Ok(())
    };

    // Latency against load, read and write separately per fabric.
    let fixed: Vec<&Summary> = rows.iter().filter(|r| r.workload.starts_with("all-to-all")).collect();
    let mut lines: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for r in &fixed {
        for (op, v) in [("read", r.mean_read_latency_ns), ("write", r.mean_write_latency_ns)] {
            if v.is_finite() {
                lines
                    .entry(format!("{} {} {}", r.fabric, r.workload, op))
                    .or_default()
                    .push((r.load, v));
            }
        }
    }
    if lines.is_empty() {
        warn!("no all-to-all rows; skipping latency_vs_load");
    } else {
        let mut csv = String::from("series,load,mean_latency_ns\n");
        let series: Vec<Series> = lines
            .into_iter()
            .map(|(name, mut pts)| {
                pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                for (x, y) in &pts {
                    let _ = writeln!(csv, "{name},{x},{y:.3}");
                }
                Series { name, pts }
            })
            .collect();
        write("latency_vs_load.csv", csv)?;
        write("latency_vs_load.svg", line_chart("Mean latency vs load", "mean latency (ns)", &series))?;
    }

    // Slowdown per workload at the highest load each cell was run at.
    let mut best: BTreeMap<(String, String), &Summary> = BTreeMap::new();
    for r in rows.iter().filter(|r| !r.workload.starts_with("all-to-all")) {
        if !r.mean_slowdown.is_finite() {
            warn!("{} on {} at load {} has no completions; skipped", r.fabric, r.workload, r.load);
            continue;
        }
        let e = best.entry((r.workload.clone(), r.fabric.clone())).or_insert(r);
        if r.load > e.load {
            *e = r;
        }
    }
    if best.is_empty() {
        warn!("no heavy-tailed rows; skipping slowdown_by_workload");
        return Ok(done);
    }
    let mut cats: Vec<String> = best.keys().map(|k| k.0.clone()).collect();
    cats.dedup();
    let mut fabrics: Vec<String> = best.keys().map(|k| k.1.clone()).collect();
    fabrics.sort();
    fabrics.dedup();
    let mut csv = String::from("workload,fabric,load,mean_slowdown,p99_slowdown\n");
    for ((w, f), r) in &best {
        let _ = writeln!(csv, "{w},{f},{},{:.6},{:.6}", r.load, r.mean_slowdown, r.p99_slowdown);
    }
    let series: Vec<(String, Vec<Option<f64>>)> = fabrics
        .iter()
        .map(|f| {
            let v = cats
                .iter()
                .map(|c| best.get(&(c.clone(), f.clone())).map(|r| r.mean_slowdown))
                .collect();
            (f.clone(), v)
        })
        .collect();
    write("slowdown_by_workload.csv", csv)?;
    write(
        "slowdown_by_workload.svg",
        bar_chart_log("Mean normalized MCT", "mean slowdown (log)", &cats, &series),
    )?;
    Ok(done)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nice_max_rounds_up_to_1_2_5() {
        assert_eq!(nice_max(0.7), 1.0);
        assert_eq!(nice_max(130.0), 200.0);
        assert_eq!(nice_max(400.0), 500.0);
        assert_eq!(nice_max(0.0), 1.0);
    }
}
