//! Package-level arithmetic: UHB link area, edge and power; HBM-site scaling;
//! L3 area budgeting; whole-design feasibility.

use serde::{Deserialize, Serialize};

use crate::arch::{CopaDesign, DramSpec, Integration};
use crate::error::{CopaError, Result};
use crate::units::{Bandwidth, Capacity, MB};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkTech {
    #[serde(alias = "2.5d")]
    Planar2p5d,
    #[serde(alias = "3d")]
    Stacked3d,
}

/// Link technology assumptions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TechParams {
    pub tech: LinkTech,
    /// GB/s per mm of die edge (2.5D) or per mm² of bonded area (3D).
    pub bw_density: f64,
    pub energy_per_bit_pj: f64,
    pub signaling_rate_gbps: Option<f64>,
}

impl TechParams {
    pub fn planar() -> Self {
        TechParams {
            tech: LinkTech::Planar2p5d,
            bw_density: 256.0,
            energy_per_bit_pj: 0.3,
            signaling_rate_gbps: Some(20.0),
        }
    }

    pub fn stacked() -> Self {
        TechParams {
            tech: LinkTech::Stacked3d,
            bw_density: 512.0,
            energy_per_bit_pj: 0.05,
            signaling_rate_gbps: None,
        }
    }

    pub fn for_integration(integration: Integration) -> Self {
        match integration {
            Integration::Stacked3d => Self::stacked(),
            _ => Self::planar(),
        }
    }
}

/// Reticle-limited die size shared by the GPM and a full MSM.
pub const RETICLE_DIE_MM2: f64 = 826.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DieSpec {
    pub area_mm2: f64,
    pub l3_density_mb_per_mm2: f64,
}

impl DieSpec {
    pub fn new(area_mm2: f64) -> Self {
        DieSpec { area_mm2, l3_density_mb_per_mm2: 960.0 / RETICLE_DIE_MM2 }
    }

    pub fn reticle() -> Self {
        Self::new(RETICLE_DIE_MM2)
    }

    pub fn side_mm(&self) -> f64 {
        self.area_mm2.sqrt()
    }

    /// Perimeter of a square die.
    pub fn edge_length_mm(&self) -> f64 {
        4.0 * self.side_mm()
    }
}

/// Tunable budgets for [`check_feasibility_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PackageBudgets {
    pub uhb_area_fraction_3d: f64,
    pub uhb_area_fraction_2p5d: f64,
    /// Share of the GPM perimeter a planar link may occupy (two of four edges).
    pub uhb_edge_fraction: f64,
    /// Depth of a planar link PHY into the die; sized so a link using two full
    /// reticle-die edges costs about 6% of the die.
    pub uhb_phy_depth_mm: f64,
    /// Share of the GPM perimeter available to HBM PHYs when DRAM attaches to it.
    pub gpm_hbm_edge_fraction: f64,
    pub hbm_site_edge_mm: f64,
}

impl Default for PackageBudgets {
    fn default() -> Self {
        PackageBudgets {
            uhb_area_fraction_3d: 0.04,
            uhb_area_fraction_2p5d: 0.06,
            uhb_edge_fraction: 0.5,
            uhb_phy_depth_mm: 0.86,
            gpm_hbm_edge_fraction: 0.65,
            hbm_site_edge_mm: 12.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub uhb_area_mm2: f64,
    pub uhb_area_fraction: f64,
    pub uhb_edge_mm: f64,
    pub link_power_w: f64,
    pub l3_area_required_mm2: f64,
    pub violations: Vec<String>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

fn check_bandwidth(bandwidth_tbps: f64) -> Result<f64> {
    if bandwidth_tbps >= 0.0 && bandwidth_tbps.is_finite() {
        Ok(bandwidth_tbps * 1e3)
    } else {
        Err(CopaError::contract(format!("link bandwidth {bandwidth_tbps} TB/s must be finite and non-negative")))
    }
}

/// Bonded area (mm²) a 3D link of `bandwidth_tbps` occupies.
pub fn uhb_area_3d(bandwidth_tbps: f64, tech: &TechParams) -> Result<f64> {
    if tech.tech != LinkTech::Stacked3d {
        return Err(CopaError::contract("uhb_area_3d requires stacked 3D link parameters"));
    }
    Ok(check_bandwidth(bandwidth_tbps)? / tech.bw_density)
}

/// Die edge (mm) a planar link of `bandwidth_tbps` occupies.
pub fn uhb_edge_2p5d(bandwidth_tbps: f64, tech: &TechParams) -> Result<f64> {
    if tech.tech != LinkTech::Planar2p5d {
        return Err(CopaError::contract("uhb_edge_2p5d requires planar 2.5D link parameters"));
    }
    Ok(check_bandwidth(bandwidth_tbps)? / tech.bw_density)
}

/// Link power (W) at full utilization.
pub fn link_power(bandwidth_tbps: f64, tech: &TechParams, toggle_rate: f64) -> Result<f64> {
    if !(toggle_rate > 0.0 && toggle_rate <= 1.0) {
        return Err(CopaError::contract(format!("toggle rate {toggle_rate} outside (0, 1]")));
    }
    let bytes_per_s = check_bandwidth(bandwidth_tbps)? * 1e9;
    Ok(bytes_per_s * 8.0 * tech.energy_per_bit_pj * 1e-12 * toggle_rate)
}

/// Total (GB/s, GB) delivered by `sites` copies of the per-site HBM figures.
pub fn hbm_resources(sites: u32, per_site: &DramSpec) -> (f64, f64) {
    let n = f64::from(sites);
    (n * per_site.bandwidth_per_site.as_gbps(), n * per_site.capacity_per_site_gb)
}

/// L3 capacity (MB) that fits in `msm_area_mm2` of MSM silicon.
pub fn l3_budget(msm_area_mm2: f64, die: &DieSpec) -> f64 {
    msm_area_mm2.max(0.0) * die.l3_density_mb_per_mm2
}

/// MSM dies in the package: one stacked under the GPM, or two flanking it.
pub fn msm_count(integration: Integration) -> u32 {
    match integration {
        Integration::Monolithic => 0,
        Integration::Stacked3d => 1,
        Integration::Planar2p5d => 2,
    }
}

pub fn check_feasibility(design: &CopaDesign, tech: &TechParams, gpm_die: &DieSpec, msm_die: &DieSpec) -> FeasibilityReport {
    check_feasibility_with(design, tech, gpm_die, msm_die, &PackageBudgets::default())
}

pub fn check_feasibility_with(
    design: &CopaDesign,
    tech: &TechParams,
    gpm_die: &DieSpec,
    msm_die: &DieSpec,
    budgets: &PackageBudgets,
) -> FeasibilityReport {
    let mut violations = Vec::new();

    let link_tbps = design
        .uhb
        .as_ref()
        .filter(|_| design.msm_present)
        .map(|u| u.total_bandwidth())
        .unwrap_or(Bandwidth(0.0))
        .as_tbps();
    let link_tbps = if link_tbps.is_finite() {
        link_tbps
    } else {
        violations.push("UHB link bandwidth is unbounded".into());
        0.0
    };
    if design.msm_present && link_tbps <= 0.0 {
        violations.push("MSM present but link bandwidth is zero".into());
    }

    let gbps = link_tbps * 1e3;
    let (uhb_area_mm2, uhb_edge_mm) = match tech.tech {
        LinkTech::Stacked3d => (gbps / tech.bw_density, 0.0),
        LinkTech::Planar2p5d => {
            let edge = gbps / tech.bw_density;
            (edge * budgets.uhb_phy_depth_mm, edge)
        }
    };
    let uhb_area_fraction = if gpm_die.area_mm2 > 0.0 { uhb_area_mm2 / gpm_die.area_mm2 } else { 0.0 };
    let area_budget = match tech.tech {
        LinkTech::Stacked3d => budgets.uhb_area_fraction_3d,
        LinkTech::Planar2p5d => budgets.uhb_area_fraction_2p5d,
    };
    if uhb_area_fraction > area_budget {
        violations.push(format!(
            "UHB link area {:.1}% of the GPM exceeds the {:.0}% budget",
            uhb_area_fraction * 100.0,
            area_budget * 100.0
        ));
    }
    if tech.tech == LinkTech::Planar2p5d {
        let edge_budget = gpm_die.edge_length_mm() * budgets.uhb_edge_fraction;
        if uhb_edge_mm > edge_budget + 1e-9 {
            violations.push(format!(
                "UHB link needs {uhb_edge_mm:.1} mm of GPM edge but only {edge_budget:.1} mm is available"
            ));
        }
    }

    let toggle = design.uhb.as_ref().map(|u| u.toggle_rate).unwrap_or(0.25);
    let link_power_w = if toggle > 0.0 && toggle <= 1.0 {
        gbps * 1e9 * 8.0 * tech.energy_per_bit_pj * 1e-12 * toggle
    } else {
        violations.push(format!("UHB toggle rate {toggle} outside (0, 1]"));
        0.0
    };

    let msms = if design.msm_present { msm_count(design.integration) } else { 0 };
    let msm_area = f64::from(msms) * msm_die.area_mm2;
    let l3_area_required_mm2 = match design.l3.as_ref().filter(|_| design.msm_present).map(|l3| l3.capacity) {
        Some(Capacity::Finite(bytes)) => bytes as f64 / MB as f64 / msm_die.l3_density_mb_per_mm2,
        Some(Capacity::Infinite) => {
            violations.push("L3 capacity is unbounded".into());
            f64::INFINITY
        }
        None => 0.0,
    };
    if l3_area_required_mm2.is_finite() && l3_area_required_mm2 > msm_area + 1e-6 {
        violations.push(format!(
            "L3 exceeds MSM area budget: needs {l3_area_required_mm2:.0} mm² but {msms} MSM die(s) provide {msm_area:.0} mm²"
        ));
    }

    let sites = design.dram.hbm_sites;
    let site_edge = f64::from(sites) * budgets.hbm_site_edge_mm;
    match (design.integration, design.msm_present) {
        (Integration::Planar2p5d, true) => {
            if sites > crate::arch::MAX_HBM_SITES_2P5D {
                violations.push(format!("{sites} HBM sites exceed the 2.5D limit"));
            }
            // Each flanking MSM gives one edge to the link and three to HBM.
            let available = f64::from(msms) * 3.0 * msm_die.side_mm();
            if site_edge > available + 1e-9 {
                violations.push(format!(
                    "{sites} HBM sites need {site_edge:.1} mm of MSM edge but only {available:.1} mm is available"
                ));
            }
        }
        (integration, _) => {
            if integration == Integration::Stacked3d && sites > crate::arch::MAX_HBM_SITES_3D {
                violations.push(format!("{sites} HBM sites exceed the 3D limit (stacking adds no die edge)"));
            }
            let available = gpm_die.edge_length_mm() * budgets.gpm_hbm_edge_fraction;
            if site_edge > available + 1e-9 {
                violations.push(format!(
                    "{sites} HBM sites need {site_edge:.1} mm of package edge but only {available:.1} mm is available"
                ));
            }
        }
    }

    FeasibilityReport {
        uhb_area_mm2,
        uhb_area_fraction,
        uhb_edge_mm,
        link_power_w,
        l3_area_required_mm2: if l3_area_required_mm2.is_finite() { l3_area_required_mm2 } else { 0.0 },
        violations,
    }
}

/// Die sizes a named design is built from: a reticle GPM plus MSMs sized to
/// carry the design's L3 (half-reticle pairs suffice for 960 MB in 2.5D).
pub fn default_dies(design: &CopaDesign) -> (DieSpec, DieSpec) {
    let gpm = DieSpec::reticle();
    let msm = match (design.integration, design.l3.as_ref().and_then(|l3| l3.capacity.bytes())) {
        (Integration::Planar2p5d, Some(bytes)) if bytes <= 960 * MB => DieSpec::new(RETICLE_DIE_MM2 / 2.0),
        _ => DieSpec::reticle(),
    };
    (gpm, msm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::preset;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn stacked_area_examples() {
        let t = TechParams::stacked();
        assert!(close(uhb_area_3d(14.7, &t).unwrap(), 28.71, 0.005));
        assert_eq!(uhb_area_3d(0.0, &t).unwrap(), 0.0);
        assert!(close(uhb_area_3d(7.35, &t).unwrap(), 7350.0 / 512.0, 1e-12));
        assert!(close(uhb_area_3d(7.35, &t).unwrap(), 14.36, 0.005));
        assert!(uhb_area_3d(1.0, &TechParams::planar()).is_err());
    }

    #[test]
    fn planar_edge_examples() {
        let t = TechParams::planar();
        assert!(close(uhb_edge_2p5d(14.7, &t).unwrap(), 57.42, 0.005));
        assert_eq!(uhb_edge_2p5d(0.0, &t).unwrap(), 0.0);
        assert!(close(uhb_edge_2p5d(2.56, &t).unwrap(), 10.0, 1e-12));
        assert!(uhb_edge_2p5d(1.0, &TechParams::stacked()).is_err());
        // Two full edges of a reticle die.
        assert!(uhb_edge_2p5d(14.7, &t).unwrap() <= 2.0 * DieSpec::reticle().side_mm());
    }

    #[test]
    fn link_power_examples() {
        assert!(close(link_power(14.7, &TechParams::planar(), 0.25).unwrap(), 8.82, 1e-9));
        assert!(close(link_power(14.7, &TechParams::stacked(), 0.25).unwrap(), 1.47, 1e-9));
        assert_eq!(link_power(0.0, &TechParams::planar(), 0.25).unwrap(), 0.0);
        assert!(link_power(1.0, &TechParams::planar(), 0.0).is_err());
        assert!(link_power(1.0, &TechParams::planar(), 1.5).is_err());
    }

    #[test]
    fn hbm_resource_examples() {
        let per_site = preset("GPU-N").unwrap().dram;
        let (bw, cap) = hbm_resources(6, &per_site);
        assert!(close(bw, 2687.0, 1e-9) && close(cap, 100.0, 1e-9));
        let (bw, cap) = hbm_resources(10, &per_site);
        assert!(close(bw, 4478.33, 0.01) && close(cap, 166.67, 0.01));
        assert_eq!(hbm_resources(0, &per_site), (0.0, 0.0));
    }

    #[test]
    fn l3_budget_examples() {
        let die = DieSpec::reticle();
        assert!(close(l3_budget(826.0, &die), 960.0, 1e-9));
        assert!(close(l3_budget(1652.0, &die), 1920.0, 1e-9));
        assert_eq!(l3_budget(0.0, &die), 0.0);
    }

    #[test]
    fn stacked_hbm_l3_is_feasible_under_4_percent() {
        let d = preset("HBM+L3").unwrap();
        let r = check_feasibility(&d, &TechParams::stacked(), &DieSpec::reticle(), &DieSpec::reticle());
        assert!(r.is_feasible(), "{:?}", r.violations);
        assert!(r.uhb_area_fraction < 0.04);
    }

    #[test]
    fn single_msm_cannot_hold_1920mb() {
        let mut d = preset("HBM+L3").unwrap();
        d.l3.as_mut().unwrap().capacity = Capacity::mb(1920);
        let r = check_feasibility(&d, &TechParams::stacked(), &DieSpec::reticle(), &DieSpec::reticle());
        assert_eq!(r.violations.len(), 1, "{:?}", r.violations);
        assert!(r.violations.iter().any(|v| v.contains("L3 exceeds MSM area budget")));
    }

    #[test]
    fn zero_bandwidth_link_is_flagged() {
        let mut d = preset("HBM+L3").unwrap();
        let uhb = d.uhb.as_mut().unwrap();
        uhb.read_bandwidth = Bandwidth(0.0);
        uhb.write_bandwidth = Bandwidth(0.0);
        let r = check_feasibility(&d, &TechParams::stacked(), &DieSpec::reticle(), &DieSpec::reticle());
        assert_eq!(r.violations, vec!["MSM present but link bandwidth is zero".to_string()]);
    }

    #[test]
    fn maximal_planar_link_costs_about_six_percent() {
        let mut d = preset("HBMLL+L3L").unwrap();
        let uhb = d.uhb.as_mut().unwrap();
        uhb.read_bandwidth = Bandwidth(7350.0);
        uhb.write_bandwidth = Bandwidth(7350.0);
        let (gpm, msm) = default_dies(&d);
        let r = check_feasibility(&d, &TechParams::planar(), &gpm, &msm);
        assert!(r.is_feasible(), "{:?}", r.violations);
        assert!(close(r.uhb_area_fraction, 0.06, 0.002), "{}", r.uhb_area_fraction);
        assert!(r.link_power_w < 9.0);
    }

    #[test]
    fn every_composable_preset_is_feasible() {
        for name in ["GPU-N", "HBM+L3", "HBML+L3", "HBM+L3L", "HBML+L3L", "HBMLL+L3L"] {
            let d = preset(name).unwrap();
            let (gpm, msm) = default_dies(&d);
            let r = check_feasibility(&d, &TechParams::for_integration(d.integration), &gpm, &msm);
            assert!(r.is_feasible(), "{name}: {:?}", r.violations);
        }
        // The 960 MB variant also fits as two half-size planar MSMs.
        let mut d = preset("HBM+L3").unwrap();
        d.integration = Integration::Planar2p5d;
        let r = check_feasibility(&d, &TechParams::planar(), &DieSpec::reticle(), &DieSpec::new(413.0));
        assert!(r.is_feasible(), "{:?}", r.violations);
    }

    #[test]
    fn half_size_msms_cannot_feed_14_sites() {
        let d = preset("HBMLL+L3L").unwrap();
        let r = check_feasibility(&d, &TechParams::planar(), &DieSpec::reticle(), &DieSpec::new(413.0));
        assert!(r.violations.iter().any(|v| v.contains("HBM sites")), "{:?}", r.violations);
    }
}
