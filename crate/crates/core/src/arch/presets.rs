//! Named designs: two shipping GPUs for calibration, the projected GPU-N
//! baseline, the composable variants built around it, and a perfect-L2 bound.

use super::*;
use crate::units::{Bandwidth, Capacity};

pub const PRESET_NAMES: [&str; 9] = [
    "V100", "A100", "GPU-N", "HBM+L3", "HBML+L3", "HBM+L3L", "HBML+L3L", "HBMLL+L3L", "PerfectL2",
];

/// L2 bytes delivered per SM per clock, for both reads and writes.
const L2_BYTES_PER_CLK_PER_SM: f64 = 48.0;

const GPU_N_DRAM_GBPS: f64 = 2687.0;
const GPU_N_DRAM_GB: f64 = 100.0;
const GPU_N_HBM_SITES: u32 = 6;

const DRAM_LATENCY_NS: f64 = 360.0;
const UHB_ROUND_TRIP_NS: f64 = 40.0;
/// L3 access time; together with the link round trip this is half the DRAM latency.
const L3_ACCESS_NS: f64 = 140.0;
const L2_ACCESS_NS: f64 = 100.0;

fn core(sm_count: u32, fp32: f64, fp16: f64) -> GpuCoreConfig {
    GpuCoreConfig {
        sm_count,
        frequency_ghz: 1.4,
        peak_fp32_tflops: fp32,
        peak_fp16_tflops: fp16,
        kernel_launch_overhead_us: 2.0,
        work_units_per_sm: default_work_units_per_sm(),
        outstanding_misses_per_sm: default_outstanding_misses_per_sm(),
    }
}

fn l2(core: &GpuCoreConfig, mb: u64) -> CacheLevelSpec {
    let bw = Bandwidth(L2_BYTES_PER_CLK_PER_SM * f64::from(core.sm_count) * core.frequency_ghz);
    CacheLevelSpec {
        capacity: Capacity::mb(mb),
        line_size: DEFAULT_LINE_SIZE,
        associativity: Associativity::Ways(DEFAULT_ASSOCIATIVITY),
        read_bandwidth: bw,
        write_bandwidth: bw,
        access_latency_ns: L2_ACCESS_NS,
        index_hash: IndexHash::LowBits,
    }
}

fn dram(sites: u32, total_gbps: f64, total_gb: f64) -> DramSpec {
    DramSpec {
        hbm_sites: sites,
        bandwidth_per_site: Bandwidth(total_gbps / f64::from(sites)),
        capacity_per_site_gb: total_gb / f64::from(sites),
        access_latency_ns: DRAM_LATENCY_NS,
    }
}

fn monolithic(name: &str, core: GpuCoreConfig, l2_mb: u64, dram: DramSpec) -> CopaDesign {
    let l2 = l2(&core, l2_mb);
    CopaDesign {
        name: name.to_string(),
        integration: Integration::Monolithic,
        core,
        l2,
        msm_present: false,
        l3: None,
        uhb: None,
        dram,
        dram_attach: DramAttach::OnGpm,
    }
}

fn gpu_n() -> CopaDesign {
    monolithic(
        "GPU-N",
        core(134, 24.2, 779.0),
        60,
        dram(GPU_N_HBM_SITES, GPU_N_DRAM_GBPS, GPU_N_DRAM_GB),
    )
}

/// GPU-N's GPM with an MSM carrying `l3_mb` of L3 and `sites` HBM sites.
fn composable(name: &str, integration: Integration, l3_mb: u64, sites: u32) -> CopaDesign {
    let base = gpu_n();
    let per_site_gbps = GPU_N_DRAM_GBPS / f64::from(GPU_N_HBM_SITES);
    let per_site_gb = GPU_N_DRAM_GB / f64::from(GPU_N_HBM_SITES);
    // 2xRD + 2xWR of the baseline DRAM bandwidth.
    let link_dir = Bandwidth(2.0 * GPU_N_DRAM_GBPS);
    let l3_bw = Bandwidth(4.0 * GPU_N_DRAM_GBPS);
    let energy_per_bit_pj = match integration {
        Integration::Stacked3d => 0.05,
        _ => 0.3,
    };
    CopaDesign {
        name: name.to_string(),
        integration,
        l3: Some(CacheLevelSpec {
            capacity: Capacity::mb(l3_mb),
            line_size: DEFAULT_LINE_SIZE,
            associativity: Associativity::Ways(DEFAULT_ASSOCIATIVITY),
            read_bandwidth: l3_bw,
            write_bandwidth: l3_bw,
            access_latency_ns: L3_ACCESS_NS,
            index_hash: IndexHash::LowBits,
        }),
        msm_present: true,
        uhb: Some(UhbLinkSpec {
            read_bandwidth: link_dir,
            write_bandwidth: link_dir,
            round_trip_latency_ns: UHB_ROUND_TRIP_NS,
            energy_per_bit_pj,
            toggle_rate: 0.25,
        }),
        dram: DramSpec {
            hbm_sites: sites,
            bandwidth_per_site: Bandwidth(per_site_gbps),
            capacity_per_site_gb: per_site_gb,
            access_latency_ns: DRAM_LATENCY_NS,
        },
        dram_attach: DramAttach::OnMsm,
        ..base
    }
}

/// Looks up a named design.
pub fn preset(name: &str) -> Result<CopaDesign> {
    let design = match name {
        "V100" => monolithic("V100", core(80, 15.7, 125.0), 6, dram(4, 900.0, 16.0)),
        "A100" => monolithic("A100", core(108, 19.5, 312.0), 40, dram(5, 1555.0, 40.0)),
        "GPU-N" => gpu_n(),
        "HBM+L3" => composable("HBM+L3", Integration::Stacked3d, 960, 6),
        "HBML+L3" => composable("HBML+L3", Integration::Planar2p5d, 960, 10),
        "HBM+L3L" => composable("HBM+L3L", Integration::Planar2p5d, 1920, 6),
        "HBML+L3L" => composable("HBML+L3L", Integration::Planar2p5d, 1920, 10),
        "HBMLL+L3L" => composable("HBMLL+L3L", Integration::Planar2p5d, 1920, 14),
        "PerfectL2" => {
            let mut d = gpu_n();
            d.name = "PerfectL2".into();
            d.l2.capacity = Capacity::Infinite;
            d.dram.bandwidth_per_site = Bandwidth::INFINITE;
            d.dram.capacity_per_site_gb = f64::INFINITY;
            d
        }
        _ => {
            return Err(CopaError::UnknownPreset {
                name: name.to_string(),
                valid: PRESET_NAMES.iter().map(|s| s.to_string()).collect(),
            })
        }
    };
    Ok(design)
}
