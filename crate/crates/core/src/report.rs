//! Markdown summary of a directory of sweep CSVs.
//!
//! Each standard sweep gets a per-group table plus a comparison against
//! reference values. Other CSVs get the per-group table only.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{CopaError, Result};
use crate::sweep::{geomean, read_sweep_csv, CsvRow, Regime};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Metric {
    Speedup,
    TrafficReduction,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Stat {
    /// Geomean speedup, or mean reduction, over the group.
    Central,
    /// Largest single-workload value in the group.
    Max,
    /// Central value at the point divided by the central value at another point.
    RatioTo(&'static str),
}

#[derive(Debug, Clone, Copy)]
struct Reference {
    group: &'static str,
    point: &'static str,
    stat: Stat,
    value: f64,
}

struct Figure {
    stem: &'static str,
    title: &'static str,
    metric: Metric,
    references: &'static [Reference],
}

const fn r(group: &'static str, point: &'static str, stat: Stat, value: f64) -> Reference {
    Reference { group, point, stat, value }
}

const FIGURES: [Figure; 6] = [
    Figure {
        stem: "llc_capacity",
        title: "DRAM traffic reduction vs LLC capacity",
        metric: Metric::TrafficReduction,
        references: &[
            r("training", "120", Stat::Max, 0.53),
            r("training", "960", Stat::Max, 0.82),
            r("infer_lb", "960", Stat::Max, 0.9375),
        ],
    },
    Figure {
        stem: "dram_bw_multiplier",
        title: "Speedup vs DRAM bandwidth",
        metric: Metric::Speedup,
        references: &[
            r("hpc", "0.5", Stat::Central, 0.86),
            r("hpc", "0.75", Stat::Central, 0.96),
            r("hpc", "inf", Stat::Central, 1.05),
            r("training", "1.5", Stat::Max, 1.18),
            r("inference", "1.5", Stat::Max, 1.21),
        ],
    },
    Figure {
        stem: "llc_capacity",
        title: "Speedup vs LLC capacity",
        metric: Metric::Speedup,
        references: &[
            r("train_lb", "perfect", Stat::RatioTo("3840"), 1.08),
            r("train_sb", "perfect", Stat::RatioTo("3840"), 1.13),
        ],
    },
    Figure {
        stem: "l3_link_bw",
        title: "Speedup vs L3 link bandwidth",
        metric: Metric::Speedup,
        references: &[
            r("training", "2", Stat::RatioTo("inf"), 0.97),
            r("inference", "2", Stat::RatioTo("inf"), 0.94),
        ],
    },
    Figure {
        stem: "named_designs",
        title: "Design comparison",
        metric: Metric::Speedup,
        references: &[
            r("train_lb", "HBM+L3", Stat::Central, 1.21),
            r("train_sb", "HBM+L3", Stat::Central, 1.18),
            r("train_lb", "HBML+L3", Stat::Central, 1.31),
            r("train_sb", "HBML+L3", Stat::Central, 1.27),
            r("infer_lb", "HBM+L3", Stat::Central, 1.29),
            r("infer_lb", "HBM+L3L", Stat::Central, 1.40),
            r("infer_lb", "HBML+L3", Stat::Central, 1.35),
            r("infer_sb", "HBML+L3", Stat::Central, 1.08),
        ],
    },
    Figure {
        stem: "gpu_count",
        title: "Scale-out vs a single improved GPU",
        metric: Metric::Speedup,
        references: &[
            r("training", "2", Stat::Central, 1.29),
            r("training", "4", Stat::Central, 1.43),
            r("training", "HBML+L3", Stat::Central, 1.27),
        ],
    },
];

/// CSV stems the report knows how to compare against reference values.
pub fn expected_inputs() -> Vec<String> {
    let mut stems: Vec<String> = Vec::new();
    for f in &FIGURES {
        let name = format!("{}.csv", f.stem);
        if !stems.contains(&name) {
            stems.push(name);
        }
    }
    stems
}

fn in_group(row: &CsvRow, group: &str) -> bool {
    match group {
        "all" => true,
        "training" => matches!(row.regime.as_str(), "train_lb" | "train_sb"),
        "inference" => matches!(row.regime.as_str(), "infer_lb" | "infer_sb"),
        g => row.regime == g,
    }
}

fn values(rows: &[CsvRow], group: &str, point: &str, metric: Metric) -> Vec<f64> {
    rows.iter()
        .filter(|r| r.axis_value == point && in_group(r, group))
        .filter_map(|r| match metric {
            Metric::Speedup => Some(r.speedup),
            Metric::TrafficReduction => r.traffic_reduction.parse().ok(),
        })
        .collect()
}

fn central(rows: &[CsvRow], group: &str, point: &str, metric: Metric) -> Option<f64> {
    let v = values(rows, group, point, metric);
    match metric {
        Metric::Speedup => geomean(&v).ok(),
        Metric::TrafficReduction if v.is_empty() => None,
        Metric::TrafficReduction => Some(v.iter().sum::<f64>() / v.len() as f64),
    }
}

fn statistic(rows: &[CsvRow], reference: &Reference, metric: Metric) -> Option<f64> {
    let (g, p) = (reference.group, reference.point);
    match reference.stat {
        Stat::Central => central(rows, g, p, metric),
        Stat::Max => values(rows, g, p, metric).into_iter().reduce(f64::max),
        Stat::RatioTo(other) => Some(central(rows, g, p, metric)? / central(rows, g, other, metric)?),
    }
}

fn stat_label(stat: Stat, metric: Metric) -> String {
    match (stat, metric) {
        (Stat::Central, Metric::Speedup) => "geomean".into(),
        (Stat::Central, Metric::TrafficReduction) => "mean".into(),
        (Stat::Max, _) => "max".into(),
        (Stat::RatioTo(other), _) => format!("ratio to {other}"),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |v| format!("{v:.3}"))
}

/// Per-point table with one column per regime present plus `all`.
fn group_table(out: &mut String, axis: &str, rows: &[CsvRow], metric: Metric) {
    let mut groups: Vec<&str> = Regime::ALL
        .iter()
        .map(|r| r.as_str())
        .filter(|g| rows.iter().any(|r| r.regime == *g))
        .collect();
    groups.push("all");
    let mut points: Vec<&str> = Vec::new();
    for r in rows {
        if !points.contains(&r.axis_value.as_str()) {
            points.push(&r.axis_value);
        }
    }
    let _ = writeln!(out, "| {axis} | {} |", groups.join(" | "));
    let _ = writeln!(out, "|---|{}", "---|".repeat(groups.len()));
    for p in points {
        let cells: Vec<String> = groups.iter().map(|g| fmt_opt(central(rows, g, p, metric))).collect();
        let _ = writeln!(out, "| {p} | {} |", cells.join(" | "));
    }
    out.push('\n');
}

fn reference_table(out: &mut String, rows: &[CsvRow], figure: &Figure) {
    let _ = writeln!(out, "| group | point | statistic | measured | reference |");
    let _ = writeln!(out, "|---|---|---|---|---|");
    for rf in figure.references {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {:.3} |",
            rf.group,
            rf.point,
            stat_label(rf.stat, figure.metric),
            fmt_opt(statistic(rows, rf, figure.metric)),
            rf.value
        );
    }
    out.push('\n');
}

/// Renders the report for already-loaded CSVs, keyed by file stem.
pub fn render_report(inputs: &[(String, Vec<CsvRow>)]) -> String {
    let mut out = String::from("# Sweep summary\n\n");
    let find = |stem: &str| inputs.iter().find(|(s, _)| s == stem).map(|(_, r)| r.as_slice());
    for figure in &FIGURES {
        let Some(rows) = find(figure.stem) else { continue };
        let what = match figure.metric {
            Metric::Speedup => "geomean speedup",
            Metric::TrafficReduction => "mean DRAM traffic reduction",
        };
        let _ = writeln!(out, "## {} (`{}.csv`)\n\n{what} per group:\n", figure.title, figure.stem);
        group_table(&mut out, figure.stem, rows, figure.metric);
        reference_table(&mut out, rows, figure);
    }
    for (stem, rows) in inputs {
        if FIGURES.iter().any(|f| f.stem == stem) {
            continue;
        }
        let _ = writeln!(out, "## {stem} (`{stem}.csv`)\n\ngeomean speedup per group:\n");
        group_table(&mut out, stem, rows, Metric::Speedup);
    }
    let missing: Vec<String> = expected_inputs()
        .into_iter()
        .filter(|f| find(f.trim_end_matches(".csv")).is_none())
        .collect();
    if !missing.is_empty() {
        let _ = writeln!(out, "Not found: {}", missing.join(", "));
    }
    out
}

/// Reads every `*.csv` in `dir` (in name order) and renders the report.
/// A directory without sweep CSVs is an error naming the expected files.
pub fn build_report(dir: &Path) -> Result<String> {
    let missing = || CopaError::MissingInputs { dir: dir.display().to_string(), missing: expected_inputs() };
    if !dir.is_dir() {
        return Err(missing());
    }
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "csv"));
    paths.sort();
    if paths.is_empty() {
        return Err(missing());
    }
    let mut inputs = Vec::new();
    for p in paths {
        let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let rows = read_sweep_csv(fs::File::open(&p)?).map_err(|e| CopaError::Parse {
            path: p.display().to_string(),
            message: e.to_string(),
        })?;
        if rows.is_empty() {
            return Err(CopaError::Parse { path: p.display().to_string(), message: "no rows".into() });
        }
        inputs.push((stem, rows));
    }
    Ok(render_report(&inputs))
}
