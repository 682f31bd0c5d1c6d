//! Functional simulation of the L2 -> (link -> L3) -> DRAM path.
//!
//! The L3 is non-inclusive/non-exclusive: it is filled by L2 demand misses
//! and by L2 dirty evictions, and never back-invalidates the L2.

mod oracle;
mod store;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::arch::CopaDesign;
use crate::error::{CopaError, Result};
use crate::units::Relative;
use crate::workload::{expand, Trace};

pub use oracle::{oracle_simulate, ORACLE_ACCESS_LIMIT};
pub use store::{FullyAssoc, Lookup, SetAssoc, TagStore};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelCounters {
    pub accesses: u64,
    pub hits: u64,
    pub misses: u64,
    /// Dirty lines evicted to the next level.
    pub writebacks: u64,
}

impl LevelCounters {
    fn add(&mut self, o: &LevelCounters) {
        self.accesses += o.accesses;
        self.hits += o.hits;
        self.misses += o.misses;
        self.writebacks += o.writebacks;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryBytes {
    pub read_bytes: u64,
    pub write_bytes: u64,
}

impl BoundaryBytes {
    pub fn total(&self) -> u64 {
        self.read_bytes + self.write_bytes
    }

    fn add(&mut self, o: &BoundaryBytes) {
        self.read_bytes += o.read_bytes;
        self.write_bytes += o.write_bytes;
    }
}

/// Traffic produced by one kernel (or a whole trace).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelTraffic {
    pub kernel_id: u32,
    pub l2: LevelCounters,
    pub l3: LevelCounters,
    /// L3 lookups made on behalf of L2 read fills, split by outcome.
    pub l3_fill_hits: u64,
    pub l3_fill_misses: u64,
    /// Leaving the L2, towards the memory controller or the link.
    pub l2_downstream: BoundaryBytes,
    /// Crossing the UHB link; zero without an MSM.
    pub link: BoundaryBytes,
    pub dram: BoundaryBytes,
}

impl KernelTraffic {
    fn add(&mut self, o: &KernelTraffic) {
        self.l2.add(&o.l2);
        self.l3.add(&o.l3);
        self.l3_fill_hits += o.l3_fill_hits;
        self.l3_fill_misses += o.l3_fill_misses;
        self.l2_downstream.add(&o.l2_downstream);
        self.link.add(&o.link);
        self.dram.add(&o.dram);
    }

    /// Bytes written into the L3 by L2 evictions.
    pub fn l3_writeback_in_bytes(&self, line_size: u32) -> u64 {
        self.l3.accesses.saturating_sub(self.l3_fill_hits + self.l3_fill_misses) * u64::from(line_size)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficReport {
    pub trace: String,
    pub line_size: u32,
    pub msm_present: bool,
    pub kernels: Vec<KernelTraffic>,
    pub total: KernelTraffic,
}

impl TrafficReport {
    fn from_kernels(trace: &Trace, msm_present: bool, kernels: Vec<KernelTraffic>) -> Self {
        let mut total = KernelTraffic::default();
        for k in &kernels {
            total.add(k);
        }
        TrafficReport { trace: trace.name.clone(), line_size: trace.line_size, msm_present, kernels, total }
    }

    pub fn dram_bytes(&self) -> u64 {
        self.total.dram.total()
    }

    /// Bytes that left the L2 in either direction.
    pub fn post_l2_bytes(&self) -> u64 {
        self.total.l2_downstream.total()
    }

    /// One row per kernel: kernel_id, l2_acc, l2_hit, l3_acc, l3_hit, dram_rd_bytes, dram_wr_bytes.
    pub fn write_kernel_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["kernel_id", "l2_acc", "l2_hit", "l3_acc", "l3_hit", "dram_rd_bytes", "dram_wr_bytes"])?;
        for k in &self.kernels {
            w.write_record(
                [k.kernel_id as u64, k.l2.accesses, k.l2.hits, k.l3.accesses, k.l3.hits, k.dram.read_bytes, k.dram.write_bytes]
                    .map(|v| v.to_string()),
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Tag state for the whole hierarchy plus the running counters.
struct Hierarchy {
    l2: TagStore,
    l3: Option<TagStore>,
    line: u64,
    counters: KernelTraffic,
}

impl Hierarchy {
    fn new(design: &CopaDesign) -> Self {
        let l3 = match (&design.l3, design.msm_present) {
            (Some(spec), true) => Some(TagStore::new(spec)),
            _ => None,
        };
        Hierarchy { l2: TagStore::new(&design.l2), l3, line: u64::from(design.line_size()), counters: KernelTraffic::default() }
    }

    fn access(&mut self, line: u64, write: bool) {
        let c = &mut self.counters;
        c.l2.accesses += 1;
        let victim = match self.l2.access(line, write) {
            Lookup::Hit => {
                c.l2.hits += 1;
                return;
            }
            Lookup::Miss { victim } => victim,
        };
        c.l2.misses += 1;
        c.l2_downstream.read_bytes += self.line;

        // Demand fill first, then the L2 victim's writeback.
        match self.l3.as_mut() {
            None => c.dram.read_bytes += self.line,
            Some(l3) => {
                c.link.read_bytes += self.line;
                c.l3.accesses += 1;
                match l3.access(line, false) {
                    Lookup::Hit => {
                        c.l3.hits += 1;
                        c.l3_fill_hits += 1;
                    }
                    Lookup::Miss { victim } => {
                        c.l3.misses += 1;
                        c.l3_fill_misses += 1;
                        c.dram.read_bytes += self.line;
                        if let Some((_, true)) = victim {
                            c.l3.writebacks += 1;
                            c.dram.write_bytes += self.line;
                        }
                    }
                }
            }
        }

        let Some((evicted, true)) = victim else { return };
        c.l2.writebacks += 1;
        c.l2_downstream.write_bytes += self.line;
        match self.l3.as_mut() {
            None => c.dram.write_bytes += self.line,
            Some(l3) => {
                c.link.write_bytes += self.line;
                c.l3.accesses += 1;
                match l3.access(evicted, true) {
                    Lookup::Hit => c.l3.hits += 1,
                    Lookup::Miss { victim } => {
                        // Whole-line writes allocate without fetching from DRAM.
                        c.l3.misses += 1;
                        if let Some((_, true)) = victim {
                            c.l3.writebacks += 1;
                            c.dram.write_bytes += self.line;
                        }
                    }
                }
            }
        }
    }
}

/// Replays `trace` through the cache hierarchy of `design`.
pub fn simulate(trace: &Trace, design: &CopaDesign) -> Result<TrafficReport> {
    if trace.line_size != design.line_size() {
        return Err(CopaError::contract(format!(
            "trace line size {} does not match design line size {}",
            trace.line_size,
            design.line_size()
        )));
    }
    if let Some(l3) = &design.l3 {
        if design.msm_present && l3.line_size != design.line_size() {
            return Err(CopaError::contract("L2 and L3 line sizes differ"));
        }
    }
    let shift = trace.line_size.trailing_zeros();
    let mut h = Hierarchy::new(design);
    let mut kernels = Vec::with_capacity(trace.kernels.len());
    for kernel in &trace.kernels {
        h.counters = KernelTraffic { kernel_id: kernel.kernel_id, ..Default::default() };
        for (addr, direction) in expand(kernel, trace.line_size) {
            h.access(addr >> shift, direction.writes());
        }
        kernels.push(h.counters);
    }
    Ok(TrafficReport::from_kernels(trace, h.l3.is_some(), kernels))
}

/// `1 - dram(b) / dram(a)`.
pub fn traffic_reduction(a: &TrafficReport, b: &TrafficReport) -> Relative {
    match a.dram_bytes() {
        0 => Relative::NoTraffic,
        base => Relative::Value(1.0 - b.dram_bytes() as f64 / base as f64),
    }
}
