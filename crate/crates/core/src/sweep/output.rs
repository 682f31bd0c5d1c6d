//! Sweep CSVs and the summary document.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Geomean, SweepResult};
use crate::error::Result;
use crate::units::Relative;

/// One CSV line as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub workload: String,
    pub regime: String,
    pub axis_value: String,
    pub speedup: f64,
    /// A fraction, or `no-traffic`.
    pub traffic_reduction: String,
    pub dram_gb: f64,
    /// A ratio, or `no-traffic`.
    pub energy_ratio: String,
}

fn fmt_relative(r: Relative, decimals: usize) -> String {
    match r {
        Relative::Value(v) => format!("{v:.decimals$}"),
        Relative::NoTraffic => "no-traffic".into(),
    }
}

pub fn write_sweep_csv<W: Write>(result: &SweepResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["workload", "regime", "axis_value", "speedup", "traffic_reduction", "dram_gb", "energy_ratio"])?;
    for r in &result.rows {
        w.write_record([
            r.workload.clone(),
            r.regime.as_str().to_string(),
            r.axis_value.clone(),
            format!("{:.6}", r.speedup),
            fmt_relative(r.traffic_reduction, 6),
            format!("{:.4}", r.dram_gb),
            fmt_relative(r.energy_ratio, 4),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep_csv<R: Read>(input: R) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_reader(input);
    let rows = r.deserialize().collect::<std::result::Result<Vec<CsvRow>, _>>()?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub name: String,
    pub axis: String,
    pub base_design: String,
    pub csv: String,
    pub points: Vec<String>,
    pub geomeans: Vec<SummaryGeomean>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryGeomean {
    pub group: String,
    pub axis_value: String,
    pub geomean: f64,
}

impl From<&Geomean> for SummaryGeomean {
    fn from(g: &Geomean) -> Self {
        SummaryGeomean { group: g.group.clone(), axis_value: g.axis_value.clone(), geomean: g.geomean }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub sweeps: Vec<SummaryEntry>,
}

/// Writes `<name>.csv` per sweep and `summary.json` into `dir`.
pub fn write_sweep_outputs(results: &[SweepResult], dir: &Path) -> Result<Summary> {
    fs::create_dir_all(dir)?;
    let mut sweeps = Vec::new();
    for r in results {
        let csv = format!("{}.csv", r.name);
        write_sweep_csv(r, fs::File::create(dir.join(&csv))?)?;
        sweeps.push(SummaryEntry {
            name: r.name.clone(),
            axis: r.axis.as_str().to_string(),
            base_design: r.base_design.clone(),
            csv,
            points: r.points.clone(),
            geomeans: r.geomeans.iter().map(SummaryGeomean::from).collect(),
            warnings: r.warnings.clone(),
        });
    }
    let summary = Summary { sweeps };
    let text = serde_json::to_string_pretty(&summary).map_err(std::io::Error::from)?;
    fs::write(dir.join("summary.json"), text + "\n")?;
    Ok(summary)
}
