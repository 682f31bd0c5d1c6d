//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails. Tolerances and thresholds are pinned below.

mod common;

use std::collections::HashMap;
use std::fs;
use std::process::ExitCode;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use copa::arch::{preset, CopaDesign, Integration, PRESET_NAMES};
use copa::cache::{oracle_simulate, simulate};
use copa::energy::{closed_form_ratio, EnergyParams};
use copa::package::{hbm_resources, l3_budget, link_power, uhb_area_3d, DieSpec, TechParams, RETICLE_DIE_MM2};
use copa::perf::{attribute_traffic, time_trace, Idealization};
use copa::report::build_report;
use copa::sweep::{
    default_suite, run_sweep, standard_sweeps, write_sweep_outputs, Axis, Point, Regime, SweepResult, SweepRow, SweepSpec,
    DEFAULT_MINIATURIZATION,
};
use copa::units::Capacity;
use common::{fa_design, random_capacity, random_trace, LINE};

const AREA_TOL_MM2: f64 = 0.1;
const POWER_TOL_W: f64 = 0.005;
const HBM_REL_TOL: f64 = 0.01;
const L3_BUDGET_TOL_MB: f64 = 0.5;
const ENERGY_TOL: f64 = 0.01;
const ORACLE_TRACES: u64 = 200;
const ORACLE_SEED: u64 = 0xC0FA;
const ATTRIBUTION_REL_TOL: f64 = 1e-9;
const MIN_DL_LARGE_BATCH_GAIN: f64 = 1.25;
const MAX_HPC_GAIN: f64 = 1.10;
const MIN_LINK_FRACTION: f64 = 0.9;
const MIN_SCALE_OUT_FRACTION: f64 = 0.9;
const TABLE6: [&str; 7] = ["GPU-N", "HBM+L3", "HBML+L3", "HBM+L3L", "HBML+L3L", "HBMLL+L3L", "PerfectL2"];

struct Verdict {
    pass: bool,
    summary: String,
    details: Vec<String>,
}

impl Verdict {
    fn new(pass: bool, summary: impl Into<String>) -> Self {
        Verdict { pass, summary: summary.into(), details: Vec::new() }
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs()
}

fn c1_uhb_area() -> Verdict {
    let area = uhb_area_3d(14.7, &TechParams::stacked()).unwrap();
    let fraction = area / RETICLE_DIE_MM2;
    Verdict::new(
        close(area, 28.7, AREA_TOL_MM2) && fraction < 0.04,
        format!("uhb_area_3d(14.7 TB/s) = {area:.2} mm2, {:.2}% of the die", fraction * 100.0),
    )
}

fn c2_link_power() -> Verdict {
    let planar = link_power(14.7, &TechParams::planar(), 0.25).unwrap();
    let stacked = link_power(14.7, &TechParams::stacked(), 0.25).unwrap();
    Verdict::new(
        close(planar, 8.82, POWER_TOL_W) && planar < 9.0 && close(stacked, 1.47, POWER_TOL_W) && stacked < 2.0,
        format!("link_power = {planar:.3} W at 0.3 pJ/b, {stacked:.3} W at 0.05 pJ/b"),
    )
}

fn c3_hbm_resources() -> Verdict {
    let per_site = preset("GPU-N").unwrap().dram;
    let (bw6, cap6) = hbm_resources(6, &per_site);
    let (bw10, cap10) = hbm_resources(10, &per_site);
    let (bw14, cap14) = hbm_resources(14, &per_site);
    let pass = close(bw6, 2687.0, 1e-9)
        && close(cap6, 100.0, 1e-9)
        && rel_close(bw10, 4500.0, HBM_REL_TOL)
        && rel_close(cap10, 167.0, HBM_REL_TOL)
        && rel_close(bw14, 6300.0, HBM_REL_TOL)
        && rel_close(cap14, 233.0, HBM_REL_TOL);
    Verdict::new(
        pass,
        format!("6 sites ({bw6:.0} GB/s, {cap6:.1} GB), 10 ({bw10:.0}, {cap10:.1}), 14 ({bw14:.0}, {cap14:.1})"),
    )
}

fn c4_l3_budget() -> Verdict {
    let die = DieSpec::reticle();
    let one = l3_budget(826.0, &die);
    let two = l3_budget(1652.0, &die);
    Verdict::new(
        close(one, 960.0, L3_BUDGET_TOL_MB) && close(two, 1920.0, L3_BUDGET_TOL_MB),
        format!("l3_budget: 826 mm2 -> {one:.1} MB, 1652 mm2 -> {two:.1} MB"),
    )
}

/// Rounds to the number of decimals a table prints.
fn printed(v: f64, decimals: i32) -> f64 {
    let p = 10f64.powi(decimals);
    (v * p).round() / p
}

fn c5_presets() -> Verdict {
    let mut bad = Vec::new();
    // (name, SMs, GHz, FP32, FP16, L2 MB, DRAM GB/s, DRAM GB)
    let detailed = [
        ("V100", 80, 1.4, 15.7, 125.0, 6, 900.0, 16.0),
        ("A100", 108, 1.4, 19.5, 312.0, 40, 1555.0, 40.0),
        ("GPU-N", 134, 1.4, 24.2, 779.0, 60, 2687.0, 100.0),
    ];
    for (name, sms, ghz, fp32, fp16, l2, bw, cap) in detailed {
        let d = preset(name).unwrap();
        let row = (
            d.core.sm_count,
            d.core.frequency_ghz,
            d.core.peak_fp32_tflops,
            d.core.peak_fp16_tflops,
            d.l2.capacity,
            printed(d.dram.total_bandwidth().as_gbps(), 0),
            printed(d.dram.total_capacity_gb(), 0),
        );
        if row != (sms, ghz, fp32, fp16, Capacity::mb(l2), bw, cap) {
            bad.push(format!("{name}: {row:?}"));
        }
    }
    // (name, LLC MB, DRAM TB/s, DRAM GB); None is infinite.
    type ArchRow = (&'static str, Option<u64>, Option<f64>, Option<f64>);
    let arch: [ArchRow; 7] = [
        ("GPU-N", Some(60), Some(2.7), Some(100.0)),
        ("HBM+L3", Some(960), Some(2.7), Some(100.0)),
        ("HBML+L3", Some(960), Some(4.5), Some(167.0)),
        ("HBM+L3L", Some(1920), Some(2.7), Some(100.0)),
        ("HBML+L3L", Some(1920), Some(4.5), Some(167.0)),
        ("HBMLL+L3L", Some(1920), Some(6.3), Some(233.0)),
        ("PerfectL2", None, None, None),
    ];
    for (name, llc, bw, cap) in arch {
        let d = preset(name).unwrap();
        let got_llc = d.llc().capacity;
        let got_bw = d.dram.total_bandwidth().as_tbps();
        let got_cap = d.dram.total_capacity_gb();
        let ok = got_llc == llc.map_or(Capacity::Infinite, Capacity::mb)
            && bw.map_or(got_bw.is_infinite(), |b| printed(got_bw, 1) == b)
            && cap.map_or(got_cap.is_infinite(), |c| printed(got_cap, 0) == c);
        if !ok {
            bad.push(format!("{name}: llc {got_llc}, {got_bw:.3} TB/s, {got_cap:.1} GB"));
        }
    }
    for name in PRESET_NAMES {
        let v = preset(name).unwrap().validate();
        if !v.is_empty() {
            bad.push(format!("{name} invalid: {v:?}"));
        }
    }
    let stacked = preset("HBM+L3").unwrap();
    assert_eq!(stacked.integration, Integration::Stacked3d);
    let mut big_l3 = stacked.clone();
    big_l3.l3.as_mut().unwrap().capacity = Capacity::mb(1920);
    let mut many_sites = stacked;
    many_sites.dram.hbm_sites = 14;
    if big_l3.validate().is_empty() {
        bad.push("3D design accepted a 1920 MB L3".into());
    }
    if many_sites.validate().is_empty() {
        bad.push("3D design accepted 14 HBM sites".into());
    }
    let mut v = Verdict::new(
        bad.is_empty(),
        format!("{} presets match their tables and validate; 3D rejects 1920 MB L3 and 14 sites", PRESET_NAMES.len()),
    );
    v.details = bad;
    v
}

fn c6_energy_ratio() -> Verdict {
    let p = EnergyParams::default();
    let r94 = closed_form_ratio(0.94, &p);
    let r98 = closed_form_ratio(0.98, &p);
    Verdict::new(
        close(r94, 3.23, ENERGY_TOL) && close(r98, 3.70, ENERGY_TOL) && r94 < 3.4 && 3.4 < r98,
        format!("energy ratio {r94:.3} at 94% reduction, {r98:.3} at 98%"),
    )
}

fn c7_oracle() -> Verdict {
    use rand::RngExt;
    let mut rng = ChaCha8Rng::seed_from_u64(ORACLE_SEED);
    let mut mismatches = Vec::new();
    let mut accesses = 0;
    for i in 0..ORACLE_TRACES {
        let trace = random_trace(rng.random());
        accesses += trace.access_count();
        let l2 = random_capacity(&mut rng, 1, 512);
        let l3 = (i % 2 == 1).then(|| random_capacity(&mut rng, 1, 2048));
        let fast = simulate(&trace, &fa_design(l2, l3)).unwrap();
        let caps: Vec<Capacity> = [Some(l2), l3].into_iter().flatten().collect();
        let slow = oracle_simulate(&trace, &caps).unwrap();
        if fast != slow {
            mismatches.push(format!("{} with {caps:?}", trace.name));
        }
    }
    let mut v = Verdict::new(
        mismatches.is_empty(),
        format!(
            "simulate equals oracle_simulate on {}/{ORACLE_TRACES} random traces ({accesses} accesses)",
            ORACLE_TRACES - mismatches.len() as u64
        ),
    );
    v.details = mismatches;
    v
}

fn c8_stack_monotonicity() -> Verdict {
    let spec = SweepSpec {
        points: Some([60.0, 120.0, 240.0, 480.0, 960.0, 1920.0, 3840.0].map(Point::Value).to_vec()),
        ..SweepSpec::new(Axis::LlcCapacity, "GPU-N")
    };
    let r = run_sweep(&spec, None).unwrap();
    let mut by_workload: HashMap<&str, Vec<f64>> = HashMap::new();
    for row in &r.rows {
        by_workload.entry(&row.workload).or_default().push(row.dram_gb);
    }
    let mut bad: Vec<String> = by_workload
        .iter()
        .filter(|(_, v)| v.windows(2).any(|w| w[1] > w[0]))
        .map(|(w, v)| format!("{w}: {v:?}"))
        .collect();
    bad.sort();
    let mut v = Verdict::new(
        bad.is_empty(),
        format!("DRAM traffic non-increasing over 60..3840 MB for {} suite traces", by_workload.len()),
    );
    v.details = bad;
    v
}

fn scaled_preset(name: &str) -> CopaDesign {
    preset(name).unwrap().miniaturized(DEFAULT_MINIATURIZATION).unwrap()
}

/// Baseline runtime of every suite trace on every preset.
struct PresetRuns {
    runtimes: HashMap<(String, String), f64>,
    attribution_errors: Vec<String>,
    worst_attribution: f64,
}

fn preset_runs() -> PresetRuns {
    let mut out = PresetRuns { runtimes: HashMap::new(), attribution_errors: Vec::new(), worst_attribution: 0.0 };
    for entry in default_suite() {
        let trace = entry.trace(DEFAULT_MINIATURIZATION, None).unwrap();
        for name in PRESET_NAMES {
            let design = scaled_preset(name);
            let traffic = simulate(&trace, &design).unwrap();
            let base = time_trace(&trace, &traffic, &design, Idealization::default()).unwrap().total_runtime;
            out.runtimes.insert((entry.name.clone(), name.to_string()), base);
            if !TABLE6.contains(&name) {
                continue;
            }
            let b = attribute_traffic(&trace, &traffic, &design).unwrap();
            let sum = b.math + b.sm_idle + b.mem_other + b.dram_bw;
            let err = (sum - base).abs() / base;
            out.worst_attribution = out.worst_attribution.max(err);
            let segments = [b.math, b.sm_idle, b.mem_other, b.dram_bw];
            if err > ATTRIBUTION_REL_TOL || segments.iter().any(|s| *s < -ATTRIBUTION_REL_TOL * base) {
                out.attribution_errors.push(format!("{} on {name}: {b:?} vs {base}", entry.name));
            }
        }
    }
    out
}

fn c9_attribution(runs: &PresetRuns) -> Verdict {
    let cases = default_suite().len() * TABLE6.len();
    let mut v = Verdict::new(
        runs.attribution_errors.is_empty(),
        format!("breakdown sums to runtime on {cases} trace x design pairs, worst relative error {:.1e}", runs.worst_attribution),
    );
    v.details = runs.attribution_errors.clone();
    v
}

fn c10_bounds(runs: &PresetRuns, sweeps: &[SweepResult]) -> Verdict {
    let mut bad = Vec::new();
    for entry in default_suite() {
        let perfect = runs.runtimes[&(entry.name.clone(), "PerfectL2".to_string())];
        for name in PRESET_NAMES.iter().filter(|n| **n != "PerfectL2") {
            let t = runs.runtimes[&(entry.name.clone(), name.to_string())];
            if perfect > t {
                bad.push(format!("{}: PerfectL2 {perfect:e} s slower than {name} {t:e} s", entry.name));
            }
        }
    }
    let mut infinite = 0;
    for axis in [Axis::DramBwMultiplier, Axis::L3LinkBw] {
        for row in sweep(sweeps, axis).rows_at("inf") {
            infinite += 1;
            if row.speedup < 1.0 {
                bad.push(format!("{axis} inf: {} speedup {}", row.workload, row.speedup));
            }
        }
    }
    let mut scale_rows = 0;
    for row in &sweep(sweeps, Axis::GpuCount).rows {
        if let Ok(n) = row.axis_value.parse::<f64>() {
            scale_rows += 1;
            if row.speedup > n {
                bad.push(format!("scale-out {}: speedup {} at N={n}", row.workload, row.speedup));
            }
        }
    }
    let mut v = Verdict::new(
        bad.is_empty(),
        format!("PerfectL2 fastest on every trace, {infinite} infinite-bandwidth speedups >= 1, {scale_rows} scale-out speedups <= N"),
    );
    v.details = bad;
    v
}

fn sweep(sweeps: &[SweepResult], axis: Axis) -> &SweepResult {
    sweeps.iter().find(|s| s.axis == axis).expect("standard sweep present")
}

fn group_geomean(r: &SweepResult, point: &str, keep: impl Fn(&SweepRow) -> bool) -> f64 {
    r.geomean_where(point, keep).expect("non-empty group")
}

fn c11_trends(sweeps: &[SweepResult]) -> Verdict {
    let mut parts: Vec<(bool, String)> = Vec::new();

    let dram = sweep(sweeps, Axis::DramBwMultiplier);
    let dl_lb = group_geomean(dram, "inf", |r| r.regime.is_large_batch_dl());
    let hpc = group_geomean(dram, "inf", |r| r.regime == Regime::Hpc);
    parts.push((
        dl_lb >= MIN_DL_LARGE_BATCH_GAIN && hpc <= MAX_HPC_GAIN,
        format!("a: infinite DRAM BW gives DL large-batch {dl_lb:.3} (>= {MIN_DL_LARGE_BATCH_GAIN}), HPC {hpc:.3} (<= {MAX_HPC_GAIN})"),
    ));

    let mut diminishing = true;
    let mut notes = Vec::new();
    for group in Regime::ALL.iter().map(|r| r.as_str()).chain(["all"]) {
        let g = |p: &str| dram.geomean(group, p).expect("geomean present");
        let early = g("1.5") / g("1");
        let late = g("inf") / g("3");
        diminishing &= late < early;
        notes.push(format!("{group} {late:.3} < {early:.3}"));
    }
    parts.push((diminishing, format!("b: gain 3x->inf below gain 1x->1.5x: {}", notes.join(", "))));

    let link = sweep(sweeps, Axis::L3LinkBw);
    let train = group_geomean(link, "2", |r| r.regime.is_training()) / group_geomean(link, "inf", |r| r.regime.is_training());
    let infer = group_geomean(link, "2", |r| !r.regime.is_training()) / group_geomean(link, "inf", |r| !r.regime.is_training());
    parts.push((
        train >= MIN_LINK_FRACTION && infer >= MIN_LINK_FRACTION,
        format!("c: 2xRD+2xWR link reaches {train:.3} (training) and {infer:.3} (inference) of infinite (>= {MIN_LINK_FRACTION})"),
    ));

    let mut saturated = 0;
    let mut unsaturated = Vec::new();
    for entry in default_suite().into_iter().filter(|e| matches!(e.regime, Regime::InferLb | Regime::InferSb)) {
        let trace = entry.trace(DEFAULT_MINIATURIZATION, None).unwrap();
        let fits = Capacity::Finite(trace.footprint.div_ceil(LINE) * LINE);
        let finite = simulate(&trace, &fa_design(fits, None)).unwrap().dram_bytes();
        let compulsory = simulate(&trace, &fa_design(Capacity::Infinite, None)).unwrap().dram_bytes();
        if finite == compulsory {
            saturated += 1;
        } else {
            unsaturated.push(format!("{}: {finite} vs {compulsory}", entry.name));
        }
    }
    parts.push((
        unsaturated.is_empty(),
        format!("d: {saturated} inference traces see only compulsory DRAM traffic once the LLC holds the footprint {unsaturated:?}"),
    ));

    let designs = sweep(sweeps, Axis::NamedDesigns);
    let order = ["HBMLL+L3L", "HBML+L3", "HBM+L3", "GPU-N"];
    let train_g: Vec<f64> = order.iter().map(|d| group_geomean(designs, d, |r| r.regime.is_training())).collect();
    parts.push((
        train_g.windows(2).all(|w| w[0] >= w[1]),
        format!(
            "e: training geomean {}",
            order.iter().zip(&train_g).map(|(d, g)| format!("{d} {g:.3}")).collect::<Vec<_>>().join(" >= ")
        ),
    ));

    let scale = sweep(sweeps, Axis::GpuCount);
    let copa = group_geomean(scale, "HBML+L3", |_| true);
    let two = group_geomean(scale, "2", |_| true);
    parts.push((
        copa >= MIN_SCALE_OUT_FRACTION * two,
        format!("f: HBML+L3 {copa:.3} vs 2x GPU-N {two:.3} (>= {MIN_SCALE_OUT_FRACTION}x)"),
    ));

    let pass = parts.iter().all(|(ok, _)| *ok);
    let mut v = Verdict::new(pass, format!("{}/6 trend inequalities hold on the calibrated suite", parts.iter().filter(|p| p.0).count()));
    v.details = parts.into_iter().map(|(ok, s)| format!("{} {s}", if ok { "ok  " } else { "FAIL" })).collect();
    v
}

fn c12_determinism(first: &[SweepResult]) -> Verdict {
    let second: Vec<SweepResult> = standard_sweeps(DEFAULT_MINIATURIZATION)
        .iter()
        .map(|s| run_sweep(s, Some(2)).unwrap())
        .collect();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_sweep_outputs(first, a.path()).unwrap();
    write_sweep_outputs(&second, b.path()).unwrap();
    let mut differing = Vec::new();
    let mut files = 0;
    for s in first {
        let name = format!("{}.csv", s.name);
        files += 1;
        if fs::read(a.path().join(&name)).unwrap() != fs::read(b.path().join(&name)).unwrap() {
            differing.push(name);
        }
    }
    if fs::read(a.path().join("summary.json")).unwrap() != fs::read(b.path().join("summary.json")).unwrap() {
        differing.push("summary.json".into());
    }
    if build_report(a.path()).unwrap() != build_report(b.path()).unwrap() {
        differing.push("report".into());
    }
    let mut v = Verdict::new(
        differing.is_empty(),
        format!("two runs (1 worker and 2 workers) give byte-identical CSVs ({files} files), summary and report"),
    );
    v.details = differing;
    v
}

fn main() -> ExitCode {
    let started = Instant::now();
    let mut verdicts: Vec<(u32, Verdict, f64)> = Vec::new();
    let mut timed = |id: u32, f: &mut dyn FnMut() -> Verdict| {
        let t = Instant::now();
        let v = f();
        verdicts.push((id, v, t.elapsed().as_secs_f64()));
    };
    timed(1, &mut c1_uhb_area);
    timed(2, &mut c2_link_power);
    timed(3, &mut c3_hbm_resources);
    timed(4, &mut c4_l3_budget);
    timed(5, &mut c5_presets);
    timed(6, &mut c6_energy_ratio);
    timed(7, &mut c7_oracle);
    timed(8, &mut c8_stack_monotonicity);
    let mut runs = None;
    timed(9, &mut || {
        let r = preset_runs();
        let v = c9_attribution(&r);
        runs = Some(r);
        v
    });
    let runs = runs.expect("criterion 9 ran");
    let t = Instant::now();
    let sweeps: Vec<SweepResult> =
        standard_sweeps(DEFAULT_MINIATURIZATION).iter().map(|s| run_sweep(s, Some(1)).unwrap()).collect();
    let sweep_secs = t.elapsed().as_secs_f64();
    timed(10, &mut || c10_bounds(&runs, &sweeps));
    timed(11, &mut || {
        let mut v = c11_trends(&sweeps);
        v.summary += &format!(" (sweeps {sweep_secs:.1} s)");
        v
    });
    timed(12, &mut || c12_determinism(&sweeps));

    let failed = verdicts.iter().filter(|(_, v, _)| !v.pass).count();
    for (id, v, secs) in &verdicts {
        println!("{} {id:>2}  {} [{secs:.2} s]", if v.pass { "PASS" } else { "FAIL" }, v.summary);
        for d in &v.details {
            println!("         {d}");
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1} s",
        verdicts.len() - failed,
        started.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
