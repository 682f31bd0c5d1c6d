//! Architecture configurations: GPU core, cache levels, UHB link, HBM and the
//! composed [`CopaDesign`], plus validation and JSON design files.

mod presets;

use serde::{Deserialize, Serialize};

use crate::error::{CopaError, Result};
use crate::units::{f64_or_inf, Bandwidth, Capacity, MB};

pub use presets::{preset, PRESET_NAMES};

/// Largest L3 a single reticle-sized MSM carries.
pub const MAX_L3_3D: Capacity = Capacity::Finite(960 * MB);
/// Two MSM dies in a planar package.
pub const MAX_L3_2P5D: Capacity = Capacity::Finite(1920 * MB);
pub const MAX_HBM_SITES_3D: u32 = 6;
pub const MAX_HBM_SITES_2P5D: u32 = 14;

pub const DEFAULT_LINE_SIZE: u32 = 128;
pub const DEFAULT_ASSOCIATIVITY: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integration {
    Monolithic,
    #[serde(alias = "3d")]
    Stacked3d,
    #[serde(alias = "2.5d")]
    Planar2p5d,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DramAttach {
    OnGpm,
    OnMsm,
}

fn default_work_units_per_sm() -> u32 {
    32
}

fn default_outstanding_misses_per_sm() -> u32 {
    256
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpuCoreConfig {
    pub sm_count: u32,
    pub frequency_ghz: f64,
    pub peak_fp32_tflops: f64,
    pub peak_fp16_tflops: f64,
    pub kernel_launch_overhead_us: f64,
    /// Concurrent work units one SM keeps resident.
    #[serde(default = "default_work_units_per_sm")]
    pub work_units_per_sm: u32,
    /// Outstanding post-L2 misses one SM can sustain.
    #[serde(default = "default_outstanding_misses_per_sm")]
    pub outstanding_misses_per_sm: u32,
}

impl GpuCoreConfig {
    pub fn sm_work_capacity(&self) -> f64 {
        f64::from(self.sm_count) * f64::from(self.work_units_per_sm)
    }

    pub fn memory_concurrency(&self) -> f64 {
        f64::from(self.sm_count) * f64::from(self.outstanding_misses_per_sm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Associativity {
    Ways(u32),
    Full,
}

impl Serialize for Associativity {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Associativity::Ways(w) => s.serialize_u32(*w),
            Associativity::Full => s.serialize_str("full"),
        }
    }
}

impl<'de> Deserialize<'de> for Associativity {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Ways(u32),
            Name(String),
        }
        match Raw::deserialize(d)? {
            Raw::Ways(w) => Ok(Associativity::Ways(w)),
            Raw::Name(n) if matches!(n.as_str(), "full" | "fully-associative" | "fully_associative") => {
                Ok(Associativity::Full)
            }
            Raw::Name(n) => Err(serde::de::Error::custom(format!(
                "associativity must be a way count or \"full\", got `{n}`"
            ))),
        }
    }
}

/// Set-index function for set-associative levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexHash {
    #[default]
    LowBits,
    XorFold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheLevelSpec {
    pub capacity: Capacity,
    pub line_size: u32,
    pub associativity: Associativity,
    pub read_bandwidth: Bandwidth,
    pub write_bandwidth: Bandwidth,
    pub access_latency_ns: f64,
    #[serde(default)]
    pub index_hash: IndexHash,
}

impl CacheLevelSpec {
    /// Lines the level holds; `None` when unbounded.
    pub fn lines(&self) -> Option<u64> {
        self.capacity.bytes().map(|b| b / u64::from(self.line_size))
    }

    /// `allow_empty` admits a zero-byte level (a pass-through L3).
    fn check(&self, level: &str, allow_empty: bool, out: &mut Vec<String>) {
        if !self.line_size.is_power_of_two() {
            out.push(format!("{level}: line_size {} is not a power of two", self.line_size));
        }
        if let Capacity::Finite(bytes) = self.capacity {
            let granule = match self.associativity {
                Associativity::Ways(0) => {
                    out.push(format!("{level}: associativity must be at least 1"));
                    return;
                }
                Associativity::Ways(w) => u64::from(self.line_size) * u64::from(w),
                Associativity::Full => u64::from(self.line_size),
            };
            if (bytes == 0 && !allow_empty) || bytes % granule != 0 {
                out.push(format!(
                    "{level}: capacity {} is not a positive multiple of line_size x associativity ({granule} B)",
                    self.capacity
                ));
            }
        }
        if !(self.read_bandwidth.0 > 0.0 && self.write_bandwidth.0 > 0.0) {
            out.push(format!("{level}: bandwidths must be positive"));
        }
        if !(self.access_latency_ns >= 0.0) {
            out.push(format!("{level}: access_latency_ns must be non-negative"));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UhbLinkSpec {
    pub read_bandwidth: Bandwidth,
    pub write_bandwidth: Bandwidth,
    pub round_trip_latency_ns: f64,
    pub energy_per_bit_pj: f64,
    pub toggle_rate: f64,
}

impl UhbLinkSpec {
    pub fn total_bandwidth(&self) -> Bandwidth {
        Bandwidth(self.read_bandwidth.0 + self.write_bandwidth.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DramSpec {
    pub hbm_sites: u32,
    pub bandwidth_per_site: Bandwidth,
    #[serde(with = "f64_or_inf")]
    pub capacity_per_site_gb: f64,
    pub access_latency_ns: f64,
}

impl DramSpec {
    pub fn total_bandwidth(&self) -> Bandwidth {
        Bandwidth(f64::from(self.hbm_sites) * self.bandwidth_per_site.0)
    }

    pub fn total_capacity_gb(&self) -> f64 {
        f64::from(self.hbm_sites) * self.capacity_per_site_gb
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopaDesign {
    pub name: String,
    pub integration: Integration,
    pub core: GpuCoreConfig,
    pub l2: CacheLevelSpec,
    pub msm_present: bool,
    pub l3: Option<CacheLevelSpec>,
    pub uhb: Option<UhbLinkSpec>,
    pub dram: DramSpec,
    pub dram_attach: DramAttach,
}

impl CopaDesign {
    pub fn line_size(&self) -> u32 {
        self.l2.line_size
    }

    /// The last cache level before DRAM.
    pub fn llc(&self) -> &CacheLevelSpec {
        match (&self.l3, self.msm_present) {
            (Some(l3), true) => l3,
            _ => &self.l2,
        }
    }

    pub fn llc_mut(&mut self) -> &mut CacheLevelSpec {
        match (&mut self.l3, self.msm_present) {
            (Some(l3), true) => l3,
            _ => &mut self.l2,
        }
    }

    /// Every violated invariant; empty when the design is valid.
    pub fn validate(&self) -> Vec<String> {
        validate(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("design serializes")
    }

    /// Scales DRAM bandwidth by `factor` (`f64::INFINITY` idealizes it).
    pub fn with_dram_multiplier(mut self, factor: f64) -> Self {
        self.dram.bandwidth_per_site = self.dram.bandwidth_per_site.scaled(factor);
        self
    }

    /// Converts every cache level to fully-associative with the same capacity.
    pub fn fully_associative(mut self) -> Self {
        self.l2.associativity = Associativity::Full;
        if let Some(l3) = self.l3.as_mut() {
            l3.associativity = Associativity::Full;
        }
        self
    }

    /// Shrinks every capacity and fixed per-kernel cost by `factor`, leaving
    /// bandwidths and latencies untouched. Paired with a trace shrunk by the
    /// same factor this preserves every runtime ratio the timing model
    /// produces, which is how desk-scale sweeps stand in for GB-scale traces.
    pub fn miniaturized(mut self, factor: u64) -> Result<Self> {
        if factor == 0 {
            return Err(CopaError::contract("miniaturization factor must be at least 1"));
        }
        fn shrink(level: &mut CacheLevelSpec, factor: u64, name: &str) -> Result<()> {
            if let Capacity::Finite(bytes) = level.capacity {
                let granule = match level.associativity {
                    Associativity::Ways(w) => u64::from(level.line_size) * u64::from(w),
                    Associativity::Full => u64::from(level.line_size),
                };
                let scaled = bytes / factor;
                if bytes % factor != 0 || !scaled.is_multiple_of(granule) {
                    return Err(CopaError::contract(format!(
                        "{name} capacity {} does not shrink by {factor} into whole sets",
                        level.capacity
                    )));
                }
                level.capacity = Capacity::Finite(scaled);
            }
            Ok(())
        }
        shrink(&mut self.l2, factor, "L2")?;
        if let Some(l3) = self.l3.as_mut() {
            shrink(l3, factor, "L3")?;
        }
        self.core.kernel_launch_overhead_us /= factor as f64;
        Ok(self)
    }
}

/// Checks every design invariant and reports all violations.
pub fn validate(design: &CopaDesign) -> Vec<String> {
    let mut out = Vec::new();
    let core = &design.core;
    if core.sm_count == 0 {
        out.push("core: sm_count must be positive".into());
    }
    if !(core.frequency_ghz > 0.0) {
        out.push("core: frequency must be positive".into());
    }
    if !(core.peak_fp32_tflops > 0.0) {
        out.push("core: peak_fp32 must be positive".into());
    }
    if !(core.peak_fp16_tflops >= core.peak_fp32_tflops) {
        out.push("core: peak_fp16 must be at least peak_fp32".into());
    }
    if !(core.kernel_launch_overhead_us >= 0.0) {
        out.push("core: kernel_launch_overhead must be non-negative".into());
    }

    design.l2.check("L2", false, &mut out);

    if design.msm_present {
        if design.integration == Integration::Monolithic {
            out.push("MSM requires a stacked_3d or planar_2p5d integration".into());
        }
        match &design.uhb {
            None => out.push("MSM requires a UHB link".into()),
            Some(uhb) => {
                if !(uhb.read_bandwidth.0 > 0.0 && uhb.write_bandwidth.0 > 0.0) {
                    out.push("UHB link bandwidths must be positive".into());
                }
                if !(uhb.round_trip_latency_ns >= 0.0) {
                    out.push("UHB round_trip_latency must be non-negative".into());
                }
                if !(uhb.toggle_rate > 0.0 && uhb.toggle_rate <= 1.0) {
                    out.push("UHB toggle_rate must lie in (0, 1]".into());
                }
            }
        }
        if let Some(l3) = &design.l3 {
            l3.check("L3", true, &mut out);
            if l3.line_size != design.l2.line_size {
                out.push("L3 line_size must equal L2 line_size".into());
            }
        }
    } else {
        if design.l3.is_some() {
            out.push("L3 requires MSM".into());
        }
        if design.uhb.is_some() {
            out.push("UHB link requires MSM".into());
        }
        if design.dram_attach != DramAttach::OnGpm {
            out.push("without an MSM, DRAM must attach on the GPM".into());
        }
    }

    let l3_cap = design.l3.as_ref().map(|l3| l3.capacity);
    match design.integration {
        Integration::Stacked3d => {
            if let Some(cap) = l3_cap.filter(|c| *c > MAX_L3_3D) {
                out.push(format!("3D L3 {cap} exceeds the single-MSM limit of {MAX_L3_3D}"));
            }
            if design.dram.hbm_sites > MAX_HBM_SITES_3D {
                out.push(format!(
                    "3D edge limit: {} HBM sites exceed {MAX_HBM_SITES_3D} (stacking adds no die edge)",
                    design.dram.hbm_sites
                ));
            }
        }
        Integration::Planar2p5d => {
            if let Some(cap) = l3_cap.filter(|c| *c > MAX_L3_2P5D) {
                out.push(format!("2.5D L3 {cap} exceeds the two-MSM limit of {MAX_L3_2P5D}"));
            }
            if design.dram.hbm_sites > MAX_HBM_SITES_2P5D {
                out.push(format!(
                    "2.5D edge limit: {} HBM sites exceed {MAX_HBM_SITES_2P5D}",
                    design.dram.hbm_sites
                ));
            }
        }
        Integration::Monolithic => {}
    }

    if design.dram.hbm_sites == 0 {
        out.push("DRAM: at least one HBM site is required".into());
    }
    if !(design.dram.bandwidth_per_site.0 > 0.0) {
        out.push("DRAM: bandwidth_per_site must be positive".into());
    }
    if !(design.dram.capacity_per_site_gb > 0.0) {
        out.push("DRAM: capacity_per_site must be positive".into());
    }
    if !(design.dram.access_latency_ns >= 0.0) {
        out.push("DRAM: access_latency must be non-negative".into());
    }
    out
}

/// Parses and validates a JSON design document.
pub fn load_design(document: &str) -> Result<CopaDesign> {
    let de = &mut serde_json::Deserializer::from_str(document);
    let design: CopaDesign = serde_path_to_error::deserialize(de).map_err(|e| CopaError::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    let violations = validate(&design);
    if violations.is_empty() {
        Ok(design)
    } else {
        Err(CopaError::Validation(violations))
    }
}

/// Resolves `name` as a preset first, then as a design file path.
pub fn resolve_design(name: &str) -> Result<CopaDesign> {
    match preset(name) {
        Ok(d) => Ok(d),
        Err(preset_err) => {
            let path = std::path::Path::new(name);
            if path.exists() {
                load_design(&std::fs::read_to_string(path)?)
            } else {
                Err(preset_err)
            }
        }
    }
}
