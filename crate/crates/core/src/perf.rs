//! Limiter-based kernel timing and idealization-based time attribution.
//!
//! Each kernel takes as long as its slowest resource (math, L2, link, L3,
//! DRAM, or a latency floor) plus a fixed launch cost. Kernels run strictly
//! back to back.

use serde::{Deserialize, Serialize};

use crate::arch::CopaDesign;
use crate::cache::{simulate, KernelTraffic, TrafficReport};
use crate::error::{CopaError, Result};
use crate::units::Bandwidth;
use crate::workload::{KernelDescriptor, Precision, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Limiter {
    Math,
    L2,
    Link,
    L3,
    Dram,
    Latency,
    Launch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelTiming {
    pub kernel_id: u32,
    pub utilization: f64,
    pub t_math: f64,
    pub t_l2: f64,
    pub t_link_read: f64,
    pub t_link_write: f64,
    pub t_l3: f64,
    pub t_dram: f64,
    pub t_latency_floor: f64,
    pub t_launch: f64,
    pub t_total: f64,
    pub limiter: Limiter,
}

/// Resources treated as ideal when timing a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Idealization {
    pub infinite_dram_bandwidth: bool,
    /// Infinite L2, link and L3 bandwidth and no latency floor.
    pub ideal_memory: bool,
    /// Full SM utilization and free kernel launches.
    pub ideal_sm: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AchievedBandwidth {
    pub l2_downstream_gbps: f64,
    pub link_gbps: f64,
    pub dram_gbps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub design: String,
    pub trace: String,
    pub total_runtime: f64,
    pub kernels: Vec<KernelTiming>,
    pub traffic: TrafficReport,
    pub achieved_bandwidth: AchievedBandwidth,
}

/// Baseline runtime split by cause. The four segments sum to `total`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeBreakdown {
    pub math: f64,
    pub sm_idle: f64,
    pub mem_other: f64,
    pub dram_bw: f64,
    pub total: f64,
}

fn transfer(bytes: u64, bw: Bandwidth, what: &str) -> Result<f64> {
    if bytes == 0 || bw.is_infinite() {
        return Ok(0.0);
    }
    if !(bw.0 > 0.0) {
        return Err(CopaError::contract(format!("{what} has zero bandwidth but moves {bytes} bytes")));
    }
    Ok(bytes as f64 / bw.bytes_per_sec())
}

fn peak_flops(design: &CopaDesign, p: Precision) -> f64 {
    let tflops = match p {
        Precision::Fp16 => design.core.peak_fp16_tflops,
        Precision::Fp32 => design.core.peak_fp32_tflops,
    };
    tflops * 1e12
}

pub fn kernel_time(kernel: &KernelDescriptor, traffic: &KernelTraffic, design: &CopaDesign) -> Result<KernelTiming> {
    kernel_time_with(kernel, traffic, design, Idealization::default())
}

pub fn kernel_time_with(
    kernel: &KernelDescriptor,
    traffic: &KernelTraffic,
    design: &CopaDesign,
    ideal: Idealization,
) -> Result<KernelTiming> {
    let line = u64::from(design.line_size());
    let utilization = if ideal.ideal_sm {
        1.0
    } else {
        (kernel.parallelism as f64 / design.core.sm_work_capacity()).min(1.0)
    };
    let t_math = kernel.flops.iter().map(|(&p, &f)| f / (peak_flops(design, p) * utilization)).sum::<f64>();
    let t_launch = if ideal.ideal_sm { 0.0 } else { design.core.kernel_launch_overhead_us * 1e-6 };

    let msm = match (&design.l3, &design.uhb, design.msm_present) {
        (Some(l3), Some(uhb), true) => Some((l3, uhb)),
        _ => None,
    };
    let (mut t_l2, mut t_link_read, mut t_link_write, mut t_l3, mut t_latency_floor) = (0.0, 0.0, 0.0, 0.0, 0.0);
    if !ideal.ideal_memory {
        t_l2 = transfer(traffic.l2.accesses * line, design.l2.read_bandwidth, "L2")?;
        let ns = match msm {
            None => traffic.l2.misses as f64 * design.dram.access_latency_ns,
            Some((l3, uhb)) => {
                t_link_read = transfer(traffic.link.read_bytes, uhb.read_bandwidth, "link read")?;
                t_link_write = transfer(traffic.link.write_bytes, uhb.write_bandwidth, "link write")?;
                let l3_read = transfer(traffic.l3_fill_hits * line, l3.read_bandwidth, "L3 read")?;
                let l3_written = traffic.l3_fill_misses * line + traffic.l3_writeback_in_bytes(design.line_size());
                let l3_write = transfer(l3_written, l3.write_bandwidth, "L3 write")?;
                t_l3 = l3_read.max(l3_write);
                let to_l3 = uhb.round_trip_latency_ns + l3.access_latency_ns;
                traffic.l3_fill_hits as f64 * to_l3
                    + traffic.l3_fill_misses as f64 * (to_l3 + design.dram.access_latency_ns)
            }
        };
        t_latency_floor = ns * 1e-9 / design.core.memory_concurrency();
    }
    let t_dram = if ideal.infinite_dram_bandwidth || ideal.ideal_memory {
        0.0
    } else {
        transfer(traffic.dram.total(), design.dram.total_bandwidth(), "DRAM")?
    };

    let candidates = [
        (t_math, Limiter::Math),
        (t_l2, Limiter::L2),
        (t_link_read.max(t_link_write), Limiter::Link),
        (t_l3, Limiter::L3),
        (t_dram, Limiter::Dram),
        (t_latency_floor, Limiter::Latency),
    ];
    let (t_max, mut limiter) = candidates
        .iter()
        .copied()
        .fold((0.0, Limiter::Math), |best, c| if c.0 > best.0 { c } else { best });
    if t_max == 0.0 && t_launch > 0.0 {
        limiter = Limiter::Launch;
    }
    Ok(KernelTiming {
        kernel_id: kernel.kernel_id,
        utilization,
        t_math,
        t_l2,
        t_link_read,
        t_link_write,
        t_l3,
        t_dram,
        t_latency_floor,
        t_launch,
        t_total: t_max + t_launch,
        limiter,
    })
}

/// Times a trace whose traffic has already been simulated on `design`'s caches.
pub fn time_trace(trace: &Trace, traffic: &TrafficReport, design: &CopaDesign, ideal: Idealization) -> Result<SimResult> {
    if traffic.kernels.len() != trace.kernels.len() {
        return Err(CopaError::contract("traffic report does not belong to this trace"));
    }
    let kernels = trace
        .kernels
        .iter()
        .zip(&traffic.kernels)
        .map(|(k, t)| kernel_time_with(k, t, design, ideal))
        .collect::<Result<Vec<_>>>()?;
    let total_runtime: f64 = kernels.iter().map(|k| k.t_total).sum();
    let rate = |bytes: u64| if total_runtime > 0.0 { bytes as f64 / total_runtime / 1e9 } else { 0.0 };
    Ok(SimResult {
        design: design.name.clone(),
        trace: trace.name.clone(),
        total_runtime,
        kernels,
        achieved_bandwidth: AchievedBandwidth {
            l2_downstream_gbps: rate(traffic.total.l2_downstream.total()),
            link_gbps: rate(traffic.total.link.total()),
            dram_gbps: rate(traffic.total.dram.total()),
        },
        traffic: traffic.clone(),
    })
}

/// Simulates the caches, then times every kernel.
pub fn run(trace: &Trace, design: &CopaDesign) -> Result<SimResult> {
    let traffic = simulate(trace, design)?;
    time_trace(trace, &traffic, design, Idealization::default())
}

/// Splits the baseline runtime into DRAM-bandwidth, other-memory, SM-idle
/// and math segments by idealizing resources in that order.
pub fn attribute(trace: &Trace, design: &CopaDesign) -> Result<TimeBreakdown> {
    let traffic = simulate(trace, design)?;
    attribute_traffic(trace, &traffic, design)
}

pub fn attribute_traffic(trace: &Trace, traffic: &TrafficReport, design: &CopaDesign) -> Result<TimeBreakdown> {
    let steps = [
        Idealization::default(),
        Idealization { infinite_dram_bandwidth: true, ..Default::default() },
        Idealization { infinite_dram_bandwidth: true, ideal_memory: true, ideal_sm: false },
        Idealization { infinite_dram_bandwidth: true, ideal_memory: true, ideal_sm: true },
    ];
    let mut r = [0.0; 4];
    for (slot, ideal) in r.iter_mut().zip(steps) {
        *slot = time_trace(trace, traffic, design, ideal)?.total_runtime;
    }
    Ok(TimeBreakdown { dram_bw: r[0] - r[1], mem_other: r[1] - r[2], sm_idle: r[2] - r[3], math: r[3], total: r[0] })
}

/// `a.total / b.total`: how much faster `b` is than `a`.
pub fn speedup(a: &SimResult, b: &SimResult) -> Result<f64> {
    if !(b.total_runtime > 0.0) {
        return Err(CopaError::contract(format!("run of {} on {} has zero runtime", b.trace, b.design)));
    }
    Ok(a.total_runtime / b.total_runtime)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::arch::preset;
    use crate::cache::{BoundaryBytes, LevelCounters};

    fn math_kernel(flops: f64, parallelism: u64) -> KernelDescriptor {
        KernelDescriptor {
            kernel_id: 0,
            name: String::new(),
            flops: BTreeMap::from([(Precision::Fp16, flops)]),
            parallelism,
            accesses: vec![],
            dependency: None,
        }
    }

    #[test]
    fn peak_math_takes_one_second() {
        let d = preset("GPU-N").unwrap();
        let t = kernel_time(&math_kernel(779e12, 1 << 20), &KernelTraffic::default(), &d).unwrap();
        assert!((t.t_math - 1.0).abs() < 1e-12);
        assert_eq!(t.limiter, Limiter::Math);
        assert!((t.t_total - 1.0 - 2e-6).abs() < 1e-12);
    }

    #[test]
    fn streaming_at_dram_bandwidth_takes_one_second() {
        let d = preset("GPU-N").unwrap();
        let bytes = 2_687_000_000_000_u64;
        let traffic = KernelTraffic {
            dram: BoundaryBytes { read_bytes: bytes, write_bytes: 0 },
            ..Default::default()
        };
        let t = kernel_time(&math_kernel(0.0, 1 << 20), &traffic, &d).unwrap();
        assert!((t.t_dram - 1.0).abs() < 1e-12);
        assert_eq!(t.limiter, Limiter::Dram);
    }

    #[test]
    fn low_parallelism_slows_math() {
        let d = preset("GPU-N").unwrap();
        let full = kernel_time(&math_kernel(1e12, 134 * 32), &KernelTraffic::default(), &d).unwrap();
        let quarter = kernel_time(&math_kernel(1e12, 134 * 8), &KernelTraffic::default(), &d).unwrap();
        assert!((quarter.t_math / full.t_math - 4.0).abs() < 1e-9);
    }

    #[test]
    fn zero_bandwidth_with_bytes_is_a_contract_error() {
        let mut d = preset("GPU-N").unwrap();
        d.dram.bandwidth_per_site = Bandwidth(0.0);
        let traffic = KernelTraffic { dram: BoundaryBytes { read_bytes: 1, write_bytes: 0 }, ..Default::default() };
        assert!(kernel_time(&math_kernel(1.0, 1), &traffic, &d).is_err());
        assert!(kernel_time(&math_kernel(1.0, 1), &KernelTraffic::default(), &d).is_ok());
    }

    #[test]
    fn launch_only_kernels_are_launch_limited() {
        let d = preset("GPU-N").unwrap();
        let t = kernel_time(&math_kernel(0.0, 1), &KernelTraffic::default(), &d).unwrap();
        assert_eq!(t.limiter, Limiter::Launch);
    }

    #[test]
    fn latency_floor_uses_the_l3_path_with_an_msm() {
        let d = preset("HBM+L3").unwrap();
        let traffic = KernelTraffic {
            l2: LevelCounters { accesses: 1000, hits: 0, misses: 1000, writebacks: 0 },
            l3: LevelCounters { accesses: 1000, hits: 1000, misses: 0, writebacks: 0 },
            l3_fill_hits: 1000,
            ..Default::default()
        };
        let t = kernel_time(&math_kernel(0.0, 1 << 20), &traffic, &d).unwrap();
        let expected = 1000.0 * 180e-9 / d.core.memory_concurrency();
        assert!((t.t_latency_floor - expected).abs() < 1e-18);
    }

    #[test]
    fn empty_trace_runs_in_zero_time() {
        let r = run(&Trace::new("empty", 1, 128, vec![]), &preset("GPU-N").unwrap()).unwrap();
        assert_eq!(r.total_runtime, 0.0);
        assert!(speedup(&r, &r).is_err());
    }
}
