//! Synthetic post-L1 memory/compute traces.
//!
//! A [`Trace`] is an ordered list of [`KernelDescriptor`]s, each touching a few
//! tensors through [`TensorAccess`] descriptors. Descriptors are expanded to
//! line-address streams lazily (see [`expand`]); GB-scale traces never exist
//! as raw address logs.

mod dl;
mod expand;
mod hpc;
mod io;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{CopaError, Result};

pub use dl::{
    dl_preset, dl_preset_info, gen_dl_trace, DlModelSpec, DlPresetInfo, LayerSpec, Mode, ReuseClass, DL_PRESETS,
    WORK_UNIT_ELEMENTS,
};
pub use expand::{expand, Expansion};
pub use hpc::{gen_hpc_trace, HPC_PARALLELISM};
pub use io::{read_trace, read_trace_file, write_trace, write_trace_file, TraceHeader, TRACE_SCHEMA_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Fp16,
    Fp32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Read,
    Write,
    ReadWrite,
}

impl Direction {
    /// Whether the access leaves the line dirty.
    pub fn writes(self) -> bool {
        !matches!(self, Direction::Read)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum AccessOrder {
    Sequential,
    /// Visits every line of the extent, `stride` bytes apart, wrapping around
    /// with successive offsets until all lines are covered.
    Strided { stride: u64 },
    /// A seeded permutation of every line of the extent.
    PseudoRandom { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorAccess {
    pub tensor_id: u32,
    pub base_address: u64,
    pub extent: u64,
    pub direction: Direction,
    pub order: AccessOrder,
    pub repetitions: u32,
}

impl TensorAccess {
    pub fn end(&self) -> u64 {
        self.base_address + self.extent
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelDescriptor {
    pub kernel_id: u32,
    #[serde(default)]
    pub name: String,
    pub flops: BTreeMap<Precision, f64>,
    pub parallelism: u64,
    pub accesses: Vec<TensorAccess>,
    pub dependency: Option<u32>,
}

impl KernelDescriptor {
    pub fn total_flops(&self) -> f64 {
        self.flops.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub name: String,
    pub batch_size: u64,
    pub line_size: u32,
    pub kernels: Vec<KernelDescriptor>,
    pub footprint: u64,
}

impl Trace {
    /// Assembles a trace and derives its footprint.
    pub fn new(name: impl Into<String>, batch_size: u64, line_size: u32, kernels: Vec<KernelDescriptor>) -> Self {
        let mut trace = Trace { name: name.into(), batch_size, line_size, kernels, footprint: 0 };
        trace.footprint = footprint(&trace);
        trace
    }

    /// Number of line accesses the trace expands to.
    pub fn access_count(&self) -> u64 {
        let shift = self.line_size.trailing_zeros();
        self.kernels
            .iter()
            .flat_map(|k| &k.accesses)
            .map(|a| line_span(a, shift).1 * u64::from(a.repetitions))
            .sum()
    }

    /// Checks the structural invariants of the trace.
    pub fn check(&self) -> Result<()> {
        if !self.line_size.is_power_of_two() {
            return Err(CopaError::contract(format!("line size {} is not a power of two", self.line_size)));
        }
        let mut ranges: BTreeMap<u32, (u64, u64)> = BTreeMap::new();
        for k in &self.kernels {
            if k.parallelism == 0 {
                return Err(CopaError::contract(format!("kernel {} has zero parallelism", k.kernel_id)));
            }
            if k.accesses.is_empty() && k.total_flops() <= 0.0 {
                return Err(CopaError::contract(format!("kernel {} neither computes nor accesses memory", k.kernel_id)));
            }
            for a in &k.accesses {
                if a.extent == 0 {
                    return Err(CopaError::contract(format!("tensor {} has an empty extent", a.tensor_id)));
                }
                let r = ranges.entry(a.tensor_id).or_insert((a.base_address, a.end()));
                r.0 = r.0.min(a.base_address);
                r.1 = r.1.max(a.end());
            }
        }
        let mut spans: Vec<_> = ranges.into_iter().collect();
        spans.sort_by_key(|(_, (lo, _))| *lo);
        for w in spans.windows(2) {
            let (id_a, (_, end_a)) = w[0];
            let (id_b, (start_b, _)) = w[1];
            if start_b < end_a {
                return Err(CopaError::contract(format!("tensors {id_a} and {id_b} overlap")));
            }
        }
        Ok(())
    }
}

/// First line number and line count covered by an access.
pub(crate) fn line_span(access: &TensorAccess, line_shift: u32) -> (u64, u64) {
    let first = access.base_address >> line_shift;
    let last = (access.end() - 1) >> line_shift;
    (first, last - first + 1)
}

/// Bytes in the union of all line-aligned ranges the trace touches.
pub fn footprint(trace: &Trace) -> u64 {
    let shift = trace.line_size.trailing_zeros();
    let mut spans: Vec<(u64, u64)> = trace
        .kernels
        .iter()
        .flat_map(|k| &k.accesses)
        .filter(|a| a.extent > 0)
        .map(|a| {
            let (first, n) = line_span(a, shift);
            (first, first + n)
        })
        .collect();
    spans.sort_unstable();
    let mut lines = 0;
    let mut current: Option<(u64, u64)> = None;
    for (lo, hi) in spans {
        match current {
            Some((clo, chi)) if lo <= chi => current = Some((clo, chi.max(hi))),
            Some((clo, chi)) => {
                lines += chi - clo;
                current = Some((lo, hi));
            }
            None => current = Some((lo, hi)),
        }
    }
    if let Some((clo, chi)) = current {
        lines += chi - clo;
    }
    lines << shift
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::MB;

    fn read(tensor_id: u32, base: u64, extent: u64) -> TensorAccess {
        TensorAccess {
            tensor_id,
            base_address: base,
            extent,
            direction: Direction::Read,
            order: AccessOrder::Sequential,
            repetitions: 1,
        }
    }

    fn kernel(id: u32, accesses: Vec<TensorAccess>) -> KernelDescriptor {
        KernelDescriptor {
            kernel_id: id,
            name: String::new(),
            flops: BTreeMap::new(),
            parallelism: 1,
            accesses,
            dependency: id.checked_sub(1),
        }
    }

    #[test]
    fn footprint_is_union_of_touched_lines() {
        let t = Trace::new("twice", 1, 128, vec![kernel(0, vec![read(0, 0, MB)]), kernel(1, vec![read(0, 0, MB)])]);
        assert_eq!(t.footprint, MB);
        let t = Trace::new("disjoint", 1, 128, vec![kernel(0, vec![read(0, 0, MB), read(1, MB, MB)])]);
        assert_eq!(t.footprint, 2 * MB);
    }

    #[test]
    fn footprint_rounds_to_lines() {
        let t = Trace::new("odd", 1, 128, vec![kernel(0, vec![read(0, 64, 100)])]);
        assert_eq!(t.footprint, 256);
        assert_eq!(t.access_count(), 2);
    }

    #[test]
    fn overlapping_tensors_are_rejected() {
        let t = Trace::new("overlap", 1, 128, vec![kernel(0, vec![read(0, 0, 1024), read(1, 512, 1024)])]);
        assert!(t.check().is_err());
        let t = Trace::new("ok", 1, 128, vec![kernel(0, vec![read(0, 0, 1024), read(1, 1024, 1024)])]);
        assert!(t.check().is_ok());
    }

    #[test]
    fn idle_kernels_are_rejected() {
        let mut k = kernel(0, vec![]);
        k.parallelism = 1;
        assert!(Trace::new("idle", 1, 128, vec![k.clone()]).check().is_err());
        k.flops.insert(Precision::Fp16, 1.0);
        assert!(Trace::new("math", 1, 128, vec![k]).check().is_ok());
    }
}
