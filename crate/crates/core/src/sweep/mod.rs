//! Parameter sweeps over (workload suite x design variants).
//!
//! Every sweep evaluates each suite trace at each axis point, normalizes the
//! runtime against a reference run and aggregates per-regime geomeans. Cache
//! traffic depends only on the cache organization, so it is simulated once
//! per distinct (trace, caches) pair and shared by every point that differs
//! only in bandwidths.

mod output;
mod suite;

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;
use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};

use crate::arch::{resolve_design, CopaDesign};
use crate::cache::{simulate, traffic_reduction, TrafficReport};
use crate::energy::{memory_energy, EnergyParams};
use crate::error::{CopaError, Result};
use crate::perf::{time_trace, Idealization};
use crate::units::{Bandwidth, Capacity, Relative, GB, MB};
use crate::workload::Trace;

pub use output::{read_sweep_csv, write_sweep_csv, write_sweep_outputs, CsvRow, Summary, SummaryEntry};
pub use suite::{default_suite, Regime, SuiteEntry, WorkloadSource, DEFAULT_MINIATURIZATION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    DramBwMultiplier,
    LlcCapacity,
    L3LinkBw,
    NamedDesigns,
    GpuCount,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::DramBwMultiplier => "dram_bw_multiplier",
            Axis::LlcCapacity => "llc_capacity",
            Axis::L3LinkBw => "l3_link_bw",
            Axis::NamedDesigns => "named_designs",
            Axis::GpuCount => "gpu_count",
        }
    }

    pub fn default_points(self) -> Vec<Point> {
        let nums = |v: &[f64]| v.iter().map(|&x| Point::Value(x)).collect();
        match self {
            Axis::DramBwMultiplier => nums(&[0.5, 0.75, 1.0, 1.5, 2.0, 3.0, f64::INFINITY]),
            Axis::LlcCapacity => {
                let mut p: Vec<Point> = nums(&[60.0, 120.0, 240.0, 480.0, 960.0, 1920.0, 3840.0]);
                p.push(Point::Perfect);
                p
            }
            Axis::L3LinkBw => nums(&[0.5, 1.0, 2.0, 4.0, f64::INFINITY]),
            Axis::NamedDesigns => ["GPU-N", "HBM+L3", "HBML+L3", "HBM+L3L", "HBML+L3L", "HBMLL+L3L", "PerfectL2"]
                .iter()
                .map(|n| Point::Design(n.to_string()))
                .collect(),
            Axis::GpuCount => {
                let mut p: Vec<Point> = nums(&[1.0, 2.0, 4.0]);
                p.push(Point::Design("HBML+L3".into()));
                p
            }
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One axis value: a number (multiplier, MB or GPU count, possibly infinite),
/// a design name, or the perfect (unbounded) LLC.
#[derive(Debug, Clone, PartialEq)]
pub enum Point {
    Value(f64),
    Design(String),
    Perfect,
}

impl Point {
    pub fn label(&self) -> String {
        match self {
            Point::Value(v) if v.is_infinite() => "inf".into(),
            Point::Value(v) => format!("{v}"),
            Point::Design(n) => n.clone(),
            Point::Perfect => "perfect".into(),
        }
    }

    fn value(&self, axis: Axis) -> Result<f64> {
        match self {
            Point::Value(v) => Ok(*v),
            other => Err(CopaError::contract(format!("axis {axis} needs numeric points, got `{}`", other.label()))),
        }
    }
}

impl Serialize for Point {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Point::Value(v) if v.is_finite() => s.serialize_f64(*v),
            other => s.serialize_str(&other.label()),
        }
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        Ok(match Raw::deserialize(d)? {
            Raw::Num(v) => Point::Value(v),
            Raw::Text(t) => match t.to_ascii_lowercase().as_str() {
                "inf" | "infinite" | "infinity" => Point::Value(f64::INFINITY),
                "perfect" => Point::Perfect,
                _ => match t.parse::<f64>() {
                    Ok(v) => Point::Value(v),
                    Err(_) if t.is_empty() => return Err(de::Error::custom("empty sweep point")),
                    Err(_) => Point::Design(t),
                },
            },
        })
    }
}

/// A design given by preset name / file path, or inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DesignRef {
    Name(String),
    Inline(Box<CopaDesign>),
}

impl DesignRef {
    pub fn resolve(&self) -> Result<CopaDesign> {
        match self {
            DesignRef::Name(n) => resolve_design(n),
            DesignRef::Inline(d) => {
                let v = d.validate();
                if v.is_empty() {
                    Ok((**d).clone())
                } else {
                    Err(CopaError::Validation(v))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SuiteRef {
    /// `"default"`: the calibrated suite.
    Named(String),
    Entries(Vec<SuiteEntry>),
}

impl SuiteRef {
    fn entries(&self) -> Result<Vec<SuiteEntry>> {
        match self {
            SuiteRef::Named(n) if n == "default" => Ok(default_suite()),
            SuiteRef::Named(n) => Err(CopaError::UnknownPreset { name: n.clone(), valid: vec!["default".into()] }),
            SuiteRef::Entries(e) => Ok(e.clone()),
        }
    }
}

fn default_suite_ref() -> SuiteRef {
    SuiteRef::Named("default".into())
}

fn default_miniaturization() -> u64 {
    DEFAULT_MINIATURIZATION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Output file stem; defaults to the axis name.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "default_suite_ref")]
    pub suite: SuiteRef,
    /// Keep only these regimes (all when absent).
    #[serde(default)]
    pub regimes: Option<Vec<Regime>>,
    pub base_design: DesignRef,
    /// Runs every point is normalized against; the base design when absent.
    #[serde(default)]
    pub reference_design: Option<DesignRef>,
    pub axis: Axis,
    /// Axis values; the axis defaults when absent.
    #[serde(default)]
    pub points: Option<Vec<Point>>,
    #[serde(default = "default_miniaturization")]
    pub miniaturization: u64,
}

impl SweepSpec {
    pub fn new(axis: Axis, base_design: &str) -> Self {
        SweepSpec {
            name: None,
            suite: default_suite_ref(),
            regimes: None,
            base_design: DesignRef::Name(base_design.into()),
            reference_design: None,
            axis,
            points: None,
            miniaturization: DEFAULT_MINIATURIZATION,
        }
    }

    pub fn file_stem(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.axis.as_str().to_string())
    }

    pub fn points(&self) -> Vec<Point> {
        self.points.clone().unwrap_or_else(|| self.axis.default_points())
    }

    pub fn suite_entries(&self) -> Result<Vec<SuiteEntry>> {
        let mut entries = self.suite.entries()?;
        if let Some(keep) = &self.regimes {
            entries.retain(|e| keep.contains(&e.regime));
        }
        Ok(entries)
    }
}

/// A spec file holds one sweep or a list of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepFile {
    Many { sweeps: Vec<SweepSpec> },
    One(SweepSpec),
}

impl SweepFile {
    pub fn into_specs(self) -> Vec<SweepSpec> {
        match self {
            SweepFile::Many { sweeps } => sweeps,
            SweepFile::One(s) => vec![s],
        }
    }
}

pub fn load_sweep_file(document: &str) -> Result<Vec<SweepSpec>> {
    let de = &mut serde_json::Deserializer::from_str(document);
    let file: SweepFile = serde_path_to_error::deserialize(de).map_err(|e| CopaError::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    Ok(file.into_specs())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub workload: String,
    pub regime: Regime,
    pub axis_value: String,
    pub speedup: f64,
    pub traffic_reduction: Relative,
    /// DRAM traffic at full (un-miniaturized) scale, in GB.
    pub dram_gb: f64,
    pub energy_ratio: Relative,
    pub footprint_mb: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Geomean {
    /// A regime name, or `all`.
    pub group: String,
    pub axis_value: String,
    pub geomean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub name: String,
    pub axis: Axis,
    pub base_design: String,
    pub points: Vec<String>,
    /// Ordered by point, then suite order.
    pub rows: Vec<SweepRow>,
    /// Ordered by point, then regime, then `all`.
    pub geomeans: Vec<Geomean>,
    pub warnings: Vec<String>,
}

impl SweepResult {
    pub fn geomean(&self, group: &str, axis_value: &str) -> Option<f64> {
        self.geomeans.iter().find(|g| g.group == group && g.axis_value == axis_value).map(|g| g.geomean)
    }

    pub fn rows_at<'a>(&'a self, axis_value: &'a str) -> impl Iterator<Item = &'a SweepRow> + 'a {
        self.rows.iter().filter(move |r| r.axis_value == axis_value)
    }

    /// Geomean of the rows selected by `keep` at one point.
    pub fn geomean_where(&self, axis_value: &str, keep: impl Fn(&SweepRow) -> bool) -> Option<f64> {
        let v: Vec<f64> = self.rows_at(axis_value).filter(|r| keep(r)).map(|r| r.speedup).collect();
        geomean(&v).ok()
    }
}

pub fn geomean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(CopaError::contract("geomean of an empty list"));
    }
    if let Some(bad) = values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(CopaError::contract(format!("geomean needs positive finite values, got {bad}")));
    }
    Ok((values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64).exp())
}

/// One design evaluation on one suite trace.
struct Job {
    entry: usize,
    batch: Option<u64>,
    design: CopaDesign,
    /// GPUs sharing the global batch (scale-out only).
    gpus: u64,
}

fn cache_key(design: &CopaDesign) -> String {
    let l3 = if design.msm_present { design.l3.as_ref() } else { None };
    serde_json::to_string(&(&design.l2.capacity, &design.l2.associativity, &design.l2.index_hash, design.l2.line_size, l3.map(|l| (&l.capacity, &l.associativity, &l.index_hash))))
        .expect("cache organization serializes")
}

fn llc_with_capacity(base: &CopaDesign, capacity: Capacity) -> CopaDesign {
    let mut d = base.clone().fully_associative();
    d.llc_mut().capacity = capacity;
    d.name = format!("{}@{}", base.name, capacity);
    d
}

/// Design evaluated at `point` before miniaturization.
fn design_at(axis: Axis, base: &CopaDesign, point: &Point) -> Result<(CopaDesign, u64)> {
    Ok(match axis {
        Axis::DramBwMultiplier => {
            let m = point.value(axis)?;
            if !(m > 0.0) {
                return Err(CopaError::contract(format!("DRAM multiplier {m} must be positive")));
            }
            (base.clone().with_dram_multiplier(m), 1)
        }
        Axis::LlcCapacity => {
            let cap = match point {
                Point::Perfect => Capacity::Infinite,
                Point::Value(v) if v.is_infinite() => Capacity::Infinite,
                p => {
                    let mb = p.value(axis)?;
                    if !(mb > 0.0) || mb.fract() != 0.0 {
                        return Err(CopaError::contract(format!("LLC capacity {mb} MB must be a positive whole number")));
                    }
                    Capacity::mb(mb as u64)
                }
            };
            (llc_with_capacity(base, cap), 1)
        }
        Axis::L3LinkBw => {
            let m = point.value(axis)?;
            if !(m > 0.0) {
                return Err(CopaError::contract(format!("link multiplier {m} must be positive")));
            }
            let mut d = base.clone();
            let dram = d.dram.total_bandwidth();
            let uhb = d
                .uhb
                .as_mut()
                .ok_or_else(|| CopaError::contract(format!("{} has no UHB link to sweep", base.name)))?;
            uhb.read_bandwidth = Bandwidth(dram.0 * m);
            uhb.write_bandwidth = Bandwidth(dram.0 * m);
            (d, 1)
        }
        Axis::NamedDesigns => match point {
            Point::Design(n) => (resolve_design(n)?, 1),
            p => return Err(CopaError::contract(format!("named_designs points must be preset names, got `{}`", p.label()))),
        },
        Axis::GpuCount => match point {
            Point::Design(n) => (resolve_design(n)?, 1),
            Point::Value(v) if *v >= 1.0 && v.fract() == 0.0 && v.is_finite() => (base.clone(), *v as u64),
            p => return Err(CopaError::contract(format!("gpu_count points must be whole GPU counts or preset names, got `{}`", p.label()))),
        },
    })
}

/// Per-GPU batch when `global` is split over `gpus`, rounded to the nearest
/// whole sample (at least one).
fn per_gpu_batch(global: u64, gpus: u64) -> u64 {
    ((global as f64 / gpus as f64).round() as u64).max(1)
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let threads = jobs
        .or_else(|| std::env::var("COPA_JOBS").ok().and_then(|v| v.parse().ok()))
        .unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CopaError::contract(format!("cannot start worker pool: {e}")))
}

/// Runs one sweep on a bounded pool (`jobs`, else `COPA_JOBS`, else all cores).
pub fn run_sweep(spec: &SweepSpec, jobs: Option<usize>) -> Result<SweepResult> {
    pool(jobs)?.install(|| run_sweep_in_pool(spec))
}

fn run_sweep_in_pool(spec: &SweepSpec) -> Result<SweepResult> {
    let mut entries = spec.suite_entries()?;
    let mut warnings = Vec::new();
    if spec.axis == Axis::GpuCount {
        entries.retain(|e| {
            if e.batch().is_none() {
                warnings.push(format!("{}: not a batched workload; skipped in the scale-out sweep", e.name));
            }
            e.batch().is_some()
        });
    }
    if entries.is_empty() {
        return Err(CopaError::contract("sweep suite is empty"));
    }
    let points = spec.points();
    if points.is_empty() {
        return Err(CopaError::contract("sweep has no points"));
    }
    let shrink = spec.miniaturization.max(1);
    let base = spec.base_design.resolve()?;
    let mut reference = match &spec.reference_design {
        Some(r) => r.resolve()?,
        None => base.clone(),
    };
    if spec.axis == Axis::LlcCapacity && spec.reference_design.is_none() {
        // Normalize against the base LLC in the same (fully-associative) organization.
        reference = llc_with_capacity(&base, base.llc().capacity);
    }

    // Jobs: index 0..entries are reference runs, then one block per point.
    let mut jobs: Vec<Job> = Vec::new();
    for entry in 0..entries.len() {
        jobs.push(Job { entry, batch: None, design: reference.clone().miniaturized(shrink)?, gpus: 1 });
    }
    for point in &points {
        let (design, gpus) = design_at(spec.axis, &base, point)?;
        let design = design.miniaturized(shrink)?;
        for (i, e) in entries.iter().enumerate() {
            let batch = match (gpus, e.batch()) {
                (1, _) => None,
                (n, Some(global)) => {
                    let b = per_gpu_batch(global, n);
                    if b * n != global {
                        let w = format!("{}: global batch {global} is not divisible by {n}; using per-GPU batch {b}", e.name);
                        if !warnings.contains(&w) {
                            warnings.push(w);
                        }
                    }
                    Some(b)
                }
                (_, None) => unreachable!("unbatched entries are dropped from scale-out sweeps"),
            };
            jobs.push(Job { entry: i, batch, design: design.clone(), gpus });
        }
    }

    // Distinct traces.
    let mut trace_keys: Vec<(usize, Option<u64>)> = jobs.iter().map(|j| (j.entry, j.batch)).collect();
    trace_keys.sort();
    trace_keys.dedup();
    let traces: Vec<Trace> = trace_keys
        .par_iter()
        .map(|&(entry, batch)| entries[entry].trace(shrink, batch))
        .collect::<Result<_>>()?;
    let trace_index: HashMap<(usize, Option<u64>), usize> = trace_keys.iter().enumerate().map(|(i, k)| (*k, i)).collect();

    // Distinct (trace, cache organization) simulations.
    let mut sims: Vec<(usize, String, usize)> = jobs
        .iter()
        .enumerate()
        .map(|(j, job)| (trace_index[&(job.entry, job.batch)], cache_key(&job.design), j))
        .collect();
    sims.sort();
    sims.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
    let reports: Vec<TrafficReport> = sims
        .par_iter()
        .map(|(t, _, j)| simulate(&traces[*t], &jobs[*j].design))
        .collect::<Result<_>>()?;
    let report_index: HashMap<(usize, String), usize> =
        sims.iter().enumerate().map(|(i, (t, k, _))| ((*t, k.clone()), i)).collect();

    struct Outcome {
        runtime: f64,
        dram_bytes: u64,
        report: usize,
        energy: Relative,
        footprint: u64,
    }
    let outcomes: Vec<Outcome> = jobs
        .par_iter()
        .map(|job| {
            let t = trace_index[&(job.entry, job.batch)];
            let r = report_index[&(t, cache_key(&job.design))];
            let result = time_trace(&traces[t], &reports[r], &job.design, Idealization::default())?;
            let energy = memory_energy(&reports[r], &EnergyParams::for_design(&job.design)).ratio_vs_no_l3;
            Ok(Outcome {
                runtime: result.total_runtime,
                dram_bytes: reports[r].dram_bytes(),
                report: r,
                energy,
                footprint: traces[t].footprint,
            })
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (p, point) in points.iter().enumerate() {
        for (i, e) in entries.iter().enumerate() {
            let job_idx = entries.len() * (p + 1) + i;
            let (job, out, base_out) = (&jobs[job_idx], &outcomes[job_idx], &outcomes[i]);
            if !(out.runtime > 0.0) {
                return Err(CopaError::contract(format!("{} ran in zero time at {}", e.name, point.label())));
            }
            let speedup = if job.gpus > 1 {
                // Iteration throughput of N GPUs, each on its share of the global batch.
                let samples = (job.gpus * job.batch.unwrap_or(1)) as f64;
                let global = e.batch().unwrap_or(1) as f64;
                (samples / out.runtime) / (global / base_out.runtime)
            } else {
                base_out.runtime / out.runtime
            };
            rows.push(SweepRow {
                workload: e.name.clone(),
                regime: e.regime,
                axis_value: point.label(),
                speedup,
                traffic_reduction: traffic_reduction(&reports[base_out.report], &reports[out.report]),
                dram_gb: out.dram_bytes as f64 * shrink as f64 / GB as f64,
                energy_ratio: out.energy,
                footprint_mb: out.footprint as f64 * shrink as f64 / MB as f64,
            });
        }
    }

    let mut geomeans = Vec::new();
    for point in &points {
        let label = point.label();
        let groups = Regime::ALL.iter().map(|r| Some(*r)).chain([None]);
        for group in groups {
            let v: Vec<f64> = rows
                .iter()
                .filter(|r| r.axis_value == label && group.is_none_or(|g| r.regime == g))
                .map(|r| r.speedup)
                .collect();
            if v.is_empty() {
                continue;
            }
            geomeans.push(Geomean {
                group: group.map_or("all".to_string(), |g| g.as_str().to_string()),
                axis_value: label.clone(),
                geomean: geomean(&v)?,
            });
        }
    }

    Ok(SweepResult {
        name: spec.file_stem(),
        axis: spec.axis,
        base_design: base.name.clone(),
        points: points.iter().map(Point::label).collect(),
        rows,
        geomeans,
        warnings,
    })
}

fn expect_axis(spec: &SweepSpec, axis: Axis) -> Result<()> {
    if spec.axis == axis {
        Ok(())
    } else {
        Err(CopaError::contract(format!("expected a {axis} sweep, got {}", spec.axis)))
    }
}

pub fn sweep_dram_bw(spec: &SweepSpec, jobs: Option<usize>) -> Result<SweepResult> {
    expect_axis(spec, Axis::DramBwMultiplier)?;
    run_sweep(spec, jobs)
}

pub fn sweep_llc(spec: &SweepSpec, jobs: Option<usize>) -> Result<SweepResult> {
    expect_axis(spec, Axis::LlcCapacity)?;
    run_sweep(spec, jobs)
}

pub fn sweep_l3_link_bw(spec: &SweepSpec, jobs: Option<usize>) -> Result<SweepResult> {
    expect_axis(spec, Axis::L3LinkBw)?;
    if spec.base_design.resolve()?.l3.is_none() {
        return Err(CopaError::contract("the link sweep needs a base design with an L3"));
    }
    run_sweep(spec, jobs)
}

pub fn compare_designs(spec: &SweepSpec, jobs: Option<usize>) -> Result<SweepResult> {
    expect_axis(spec, Axis::NamedDesigns)?;
    run_sweep(spec, jobs)
}

pub fn scale_out(spec: &SweepSpec, jobs: Option<usize>) -> Result<SweepResult> {
    expect_axis(spec, Axis::GpuCount)?;
    run_sweep(spec, jobs)
}

/// The six standard sweeps behind the report, on the default suite.
pub fn standard_sweeps(miniaturization: u64) -> Vec<SweepSpec> {
    let mk = |axis, base: &str, name: Option<&str>, regimes: Option<Vec<Regime>>| SweepSpec {
        name: name.map(str::to_string),
        regimes,
        miniaturization,
        ..SweepSpec::new(axis, base)
    };
    let dl = vec![Regime::TrainLb, Regime::TrainSb, Regime::InferLb, Regime::InferSb];
    vec![
        mk(Axis::DramBwMultiplier, "GPU-N", None, None),
        mk(Axis::LlcCapacity, "GPU-N", None, Some(dl.clone())),
        mk(Axis::L3LinkBw, "HBM+L3", None, Some(dl.clone())),
        mk(Axis::NamedDesigns, "GPU-N", None, Some(dl)),
        mk(Axis::GpuCount, "GPU-N", None, Some(vec![Regime::TrainSb])),
    ]
}
