//! `copa`: generate traces, run designs, check packages, sweep and report.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use copa::arch::{resolve_design, CopaDesign, PRESET_NAMES};
use copa::energy::{memory_energy, EnergyParams};
use copa::package::{check_feasibility, default_dies, TechParams};
use copa::perf::{attribute_traffic, time_trace, Idealization};
use copa::report::build_report;
use copa::sweep::{
    compare_designs, load_sweep_file, scale_out, standard_sweeps, sweep_dram_bw, sweep_l3_link_bw, sweep_llc,
    write_sweep_outputs, Axis, SweepSpec, DEFAULT_MINIATURIZATION,
};
use copa::units::parse_size;
use copa::workload::{dl_preset, gen_dl_trace, gen_hpc_trace, read_trace_file, write_trace_file, Mode, DL_PRESETS};
use copa::CopaError;

#[derive(Parser)]
#[command(name = "copa", version, about = "Design-space simulator for composable GPU memory systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List design presets (or DL workload presets).
    Presets {
        #[arg(long)]
        workloads: bool,
    },
    /// Generate a synthetic trace.
    Gen(GenArgs),
    /// Simulate one trace on one design and print JSON.
    Run(RunArgs),
    /// Run sweeps and write CSVs plus summary.json.
    Sweep(SweepArgs),
    /// Package feasibility.
    Package {
        #[command(subcommand)]
        command: PackageCommand,
    },
    /// Summarize a directory of sweep CSVs as markdown.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Train,
    Infer,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Train => Mode::Training,
            ModeArg::Infer => Mode::Inference,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    /// DL workload preset, e.g. `resnet`.
    #[arg(long, conflicts_with = "hpc", required_unless_present = "hpc")]
    preset: Option<String>,
    #[arg(long, value_enum, default_value = "train")]
    mode: ModeArg,
    /// Per-GPU batch; defaults to the preset's large batch.
    #[arg(long)]
    batch: Option<u64>,
    /// Generate a synthetic HPC trace instead of a DL one.
    #[arg(long)]
    hpc: bool,
    /// HPC working set, e.g. `64MB`.
    #[arg(long, default_value = "64MB")]
    working_set: String,
    #[arg(long, default_value_t = 0.5)]
    reuse: f64,
    #[arg(long, default_value_t = 8.0)]
    flop_byte: f64,
    #[arg(long, default_value_t = 8)]
    kernels: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Shrink capacities and bytes by this factor.
    #[arg(long, default_value_t = 1)]
    scale: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Preset name or design JSON path.
    #[arg(long)]
    design: String,
    #[arg(long)]
    trace: PathBuf,
    /// Add the DRAM / other-memory / SM-idle / math breakdown.
    #[arg(long)]
    attribute: bool,
    /// Shrink factor the trace was generated with; applied to the design.
    #[arg(long, default_value_t = 1)]
    scale: u64,
    /// Include per-kernel timings and traffic.
    #[arg(long)]
    kernels: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep spec JSON (one sweep or `{"sweeps": [...]}`).
    #[arg(long, required_unless_present = "standard", conflicts_with = "standard")]
    spec: Option<PathBuf>,
    /// Run the standard sweep set on the default suite.
    #[arg(long)]
    standard: bool,
    /// Shrink factor for `--standard`.
    #[arg(long, default_value_t = DEFAULT_MINIATURIZATION)]
    scale: u64,
    #[arg(short, long)]
    output: PathBuf,
    /// Worker threads; falls back to COPA_JOBS, then all cores.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum PackageCommand {
    /// Check a design against the packaging constraints; exit 1 on violations.
    Check {
        #[arg(long)]
        design: String,
        /// Link technology; defaults to the design's integration.
        #[arg(long, value_enum)]
        tech: Option<TechArg>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TechArg {
    Planar,
    Stacked,
}

#[derive(Args)]
struct ReportArgs {
    dir: PathBuf,
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Omit the timestamp header.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    deterministic: bool,
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn presets(workloads: bool) {
    if workloads {
        for p in DL_PRESETS {
            let mode = if p.mode == Mode::Training { "train" } else { "infer" };
            println!("{}\t{mode}\tbatch {} / {}", p.name, p.small_batch, p.large_batch);
        }
    } else {
        for n in PRESET_NAMES {
            println!("{n}");
        }
    }
}

fn gen(a: GenArgs) -> Result<()> {
    if a.scale == 0 {
        bail!("--scale must be at least 1");
    }
    let trace = if a.hpc {
        let ws = parse_size(&a.working_set)?
            .bytes()
            .context("--working-set must be finite")?;
        gen_hpc_trace((ws / a.scale).max(1), a.reuse, a.flop_byte, a.kernels, a.seed)?
    } else {
        let name = a.preset.context("--preset is required without --hpc")?;
        let mode = Mode::from(a.mode);
        let model = dl_preset(&name, mode)?;
        let batch = match a.batch {
            Some(b) => b,
            None => copa::workload::dl_preset_info(&name, mode)
                .or_else(|| DL_PRESETS.iter().find(|p| p.name == name))
                .map_or(1, |p| p.large_batch),
        };
        gen_dl_trace(&model.miniaturized(a.scale), batch, a.seed)?
    };
    write_trace_file(&trace, &a.output)?;
    eprintln!("wrote {} ({} kernels, footprint {} B)", a.output.display(), trace.kernels.len(), trace.footprint);
    Ok(())
}

fn run(a: RunArgs) -> Result<()> {
    let design: CopaDesign = resolve_design(&a.design)?.miniaturized(a.scale)?;
    let trace = read_trace_file(&a.trace)?;
    let traffic = copa::cache::simulate(&trace, &design)?;
    let mut result = time_trace(&trace, &traffic, &design, Idealization::default())?;
    let energy = memory_energy(&traffic, &EnergyParams::for_design(&design));
    let breakdown = if a.attribute { Some(attribute_traffic(&trace, &traffic, &design)?) } else { None };
    if !a.kernels {
        result.kernels.clear();
        result.traffic.kernels.clear();
    }
    let doc = json!({ "result": result, "breakdown": breakdown, "energy": energy });
    write_out(a.output.as_deref(), &(serde_json::to_string_pretty(&doc)? + "\n"))
}

fn sweep(a: SweepArgs) -> Result<()> {
    let specs: Vec<SweepSpec> = match &a.spec {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            load_sweep_file(&text).with_context(|| format!("in {}", p.display()))?
        }
        None => standard_sweeps(a.scale),
    };
    let mut results = Vec::new();
    for spec in &specs {
        let r = match spec.axis {
            Axis::DramBwMultiplier => sweep_dram_bw(spec, a.jobs),
            Axis::LlcCapacity => sweep_llc(spec, a.jobs),
            Axis::L3LinkBw => sweep_l3_link_bw(spec, a.jobs),
            Axis::NamedDesigns => compare_designs(spec, a.jobs),
            Axis::GpuCount => scale_out(spec, a.jobs),
        }
        .with_context(|| format!("sweep {}", spec.file_stem()))?;
        for w in &r.warnings {
            eprintln!("warning: {}: {w}", r.name);
        }
        eprintln!("{}: {} rows", r.name, r.rows.len());
        results.push(r);
    }
    write_sweep_outputs(&results, &a.output)?;
    Ok(())
}

/// Returns whether the design is feasible.
fn package_check(design: &str, tech: Option<TechArg>) -> Result<bool> {
    let design = resolve_design(design)?;
    let tech = match tech {
        Some(TechArg::Planar) => TechParams::planar(),
        Some(TechArg::Stacked) => TechParams::stacked(),
        None => TechParams::for_integration(design.integration),
    };
    let (gpm, msm) = default_dies(&design);
    let report = check_feasibility(&design, &tech, &gpm, &msm);
    println!("{}", serde_json::to_string_pretty(&report)?);
    for v in &report.violations {
        eprintln!("violation: {v}");
    }
    Ok(report.is_feasible())
}

fn report(a: ReportArgs) -> Result<()> {
    let mut text = build_report(&a.dir)?;
    if !a.deterministic {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        text = format!("<!-- generated at unix time {secs} -->\n{text}");
    }
    write_out(a.output.as_deref(), &text)
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Presets { workloads } => presets(workloads),
        Command::Gen(a) => gen(a)?,
        Command::Run(a) => run(a)?,
        Command::Sweep(a) => sweep(a)?,
        Command::Package { command: PackageCommand::Check { design, tech } } => {
            if !package_check(&design, tech)? {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Report(a) => report(a)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = matches!(e.downcast_ref::<CopaError>(), Some(CopaError::UnknownPreset { .. }));
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
