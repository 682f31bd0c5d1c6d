//! Memory-system energy and its ratio against an all-DRAM counterfactual.

use serde::{Deserialize, Serialize};

use crate::arch::CopaDesign;
use crate::cache::TrafficReport;
use crate::package::TechParams;
use crate::units::Relative;

pub const DEFAULT_DRAM_PJ_PER_BIT: f64 = 7.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub e_dram_pj_per_bit: f64,
    /// Round trip over the link plus the SRAM access on the MSM.
    pub e_l3_total_pj_per_bit: f64,
    pub link: TechParams,
    pub toggle_rate: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        EnergyParams {
            e_dram_pj_per_bit: DEFAULT_DRAM_PJ_PER_BIT,
            e_l3_total_pj_per_bit: DEFAULT_DRAM_PJ_PER_BIT / 4.0,
            link: TechParams::planar(),
            toggle_rate: 0.25,
        }
    }
}

impl EnergyParams {
    /// Defaults with the link technology and toggle rate taken from `design`.
    pub fn for_design(design: &CopaDesign) -> Self {
        let mut p = EnergyParams { link: TechParams::for_integration(design.integration), ..Default::default() };
        if let Some(uhb) = &design.uhb {
            p.link.energy_per_bit_pj = uhb.energy_per_bit_pj;
            p.toggle_rate = uhb.toggle_rate;
        }
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReport {
    pub dram_energy: f64,
    pub l3_energy: f64,
    /// Link share of the traffic energy; already included in `l3_energy`.
    pub link_energy: f64,
    pub total: f64,
    pub ratio_vs_no_l3: Relative,
}

const PJ: f64 = 1e-12;

pub fn memory_energy(traffic: &TrafficReport, params: &EnergyParams) -> EnergyReport {
    let line_bits = f64::from(traffic.line_size) * 8.0;
    let t = &traffic.total;
    let dram_energy = t.dram.total() as f64 * 8.0 * params.e_dram_pj_per_bit * PJ;
    let l3_energy = t.l3.accesses as f64 * line_bits * params.e_l3_total_pj_per_bit * PJ;
    let link_energy = t.link.total() as f64 * 8.0 * params.link.energy_per_bit_pj * params.toggle_rate * PJ;
    let total = dram_energy + l3_energy;
    let counterfactual = traffic.post_l2_bytes() as f64 * 8.0 * params.e_dram_pj_per_bit * PJ;
    let ratio_vs_no_l3 = if total > 0.0 { Relative::Value(counterfactual / total) } else { Relative::NoTraffic };
    EnergyReport { dram_energy, l3_energy, link_energy, total, ratio_vs_no_l3 }
}

/// Energy ratio when a fraction `reduction` of post-L2 traffic is served by
/// the L3 and every post-L2 line pays the L3 cost.
pub fn closed_form_ratio(reduction: f64, params: &EnergyParams) -> f64 {
    let l3 = params.e_l3_total_pj_per_bit / params.e_dram_pj_per_bit;
    1.0 / (l3 + (1.0 - reduction))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cache::{BoundaryBytes, KernelTraffic, LevelCounters};

    fn report(post_l2_lines: u64, l3_accesses: u64, dram_lines: u64) -> TrafficReport {
        let total = KernelTraffic {
            l2_downstream: BoundaryBytes { read_bytes: post_l2_lines * 128, write_bytes: 0 },
            l3: LevelCounters { accesses: l3_accesses, hits: l3_accesses - dram_lines.min(l3_accesses), misses: dram_lines.min(l3_accesses), writebacks: 0 },
            dram: BoundaryBytes { read_bytes: dram_lines * 128, write_bytes: 0 },
            ..Default::default()
        };
        TrafficReport { trace: "t".into(), line_size: 128, msm_present: l3_accesses > 0, kernels: vec![total], total }
    }

    #[test]
    fn ninety_four_percent_filtering_gives_about_3_23() {
        let e = memory_energy(&report(100, 100, 6), &EnergyParams::default());
        let r = e.ratio_vs_no_l3.value().unwrap();
        assert!((r - 1.0 / 0.31).abs() < 1e-9, "{r}");
        assert!((closed_form_ratio(0.94, &EnergyParams::default()) - r).abs() < 1e-9);
    }

    #[test]
    fn no_l3_means_ratio_one() {
        let e = memory_energy(&report(100, 0, 100), &EnergyParams::default());
        assert_eq!(e.l3_energy, 0.0);
        assert_eq!(e.ratio_vs_no_l3, Relative::Value(1.0));
    }

    #[test]
    fn zero_traffic_is_marked() {
        let e = memory_energy(&report(0, 0, 0), &EnergyParams::default());
        assert_eq!(e.total, 0.0);
        assert_eq!(e.ratio_vs_no_l3, Relative::NoTraffic);
    }

    #[test]
    fn dram_energy_uses_seven_pj_per_bit() {
        let e = memory_energy(&report(1, 0, 1), &EnergyParams::default());
        assert!((e.dram_energy - 128.0 * 8.0 * 7e-12).abs() < 1e-24);
    }
}
