//! Brute-force reference for [`simulate`](super::simulate).
//!
//! Each level is a plain recency list searched linearly, with no sets, no
//! hashing and no shared code with the production tag stores.

use super::{KernelTraffic, TrafficReport};
use crate::error::{CopaError, Result};
use crate::units::Capacity;
use crate::workload::{expand, Trace};

pub const ORACLE_ACCESS_LIMIT: u64 = 1_000_000;

/// Most recently used line first.
struct RecencyList {
    lines: Vec<(u64, bool)>,
    limit: Option<usize>,
}

impl RecencyList {
    fn new(capacity: Capacity, line_size: u32) -> Self {
        let limit = capacity.bytes().map(|b| (b / u64::from(line_size)) as usize);
        RecencyList { lines: Vec::new(), limit }
    }

    /// Returns whether the line was present and whatever fell off the end.
    fn touch(&mut self, line: u64, dirty: bool) -> (bool, Option<(u64, bool)>) {
        if let Some(pos) = self.lines.iter().position(|&(l, _)| l == line) {
            let (_, was_dirty) = self.lines.remove(pos);
            self.lines.insert(0, (line, was_dirty || dirty));
            return (true, None);
        }
        self.lines.insert(0, (line, dirty));
        let overflow = match self.limit {
            Some(limit) if self.lines.len() > limit => self.lines.pop(),
            _ => None,
        };
        (false, overflow)
    }
}

/// Fully-associative LRU simulation of an L2 (first capacity) and, when a
/// second capacity is given, a memory-side L3 behind it.
pub fn oracle_simulate(trace: &Trace, capacities: &[Capacity]) -> Result<TrafficReport> {
    if capacities.is_empty() || capacities.len() > 2 {
        return Err(CopaError::contract("the oracle models one or two cache levels"));
    }
    let n = trace.access_count();
    if n > ORACLE_ACCESS_LIMIT {
        return Err(CopaError::contract(format!("trace expands to {n} accesses; the oracle handles at most {ORACLE_ACCESS_LIMIT}")));
    }
    let line_bytes = u64::from(trace.line_size);
    let shift = trace.line_size.trailing_zeros();
    let mut l2 = RecencyList::new(capacities[0], trace.line_size);
    let mut l3 = capacities.get(1).map(|&c| RecencyList::new(c, trace.line_size));

    let mut kernels = Vec::new();
    for kernel in &trace.kernels {
        let mut c = KernelTraffic { kernel_id: kernel.kernel_id, ..Default::default() };
        for (addr, direction) in expand(kernel, trace.line_size) {
            let line = addr >> shift;
            let write = direction.writes();
            c.l2.accesses += 1;
            let (hit, l2_out) = l2.touch(line, write);
            if hit {
                c.l2.hits += 1;
                continue;
            }
            c.l2.misses += 1;
            c.l2_downstream.read_bytes += line_bytes;

            // Fill from below.
            match l3.as_mut() {
                None => c.dram.read_bytes += line_bytes,
                Some(l3) => {
                    c.link.read_bytes += line_bytes;
                    c.l3.accesses += 1;
                    let (l3_hit, l3_out) = l3.touch(line, false);
                    if l3_hit {
                        c.l3.hits += 1;
                        c.l3_fill_hits += 1;
                    } else {
                        c.l3.misses += 1;
                        c.l3_fill_misses += 1;
                        c.dram.read_bytes += line_bytes;
                    }
                    if matches!(l3_out, Some((_, true))) {
                        c.l3.writebacks += 1;
                        c.dram.write_bytes += line_bytes;
                    }
                }
            }

            // Write back the L2 victim if dirty.
            let Some((victim, true)) = l2_out else { continue };
            c.l2.writebacks += 1;
            c.l2_downstream.write_bytes += line_bytes;
            match l3.as_mut() {
                None => c.dram.write_bytes += line_bytes,
                Some(l3) => {
                    c.link.write_bytes += line_bytes;
                    c.l3.accesses += 1;
                    let (l3_hit, l3_out) = l3.touch(victim, true);
                    if l3_hit {
                        c.l3.hits += 1;
                    } else {
                        c.l3.misses += 1;
                    }
                    if matches!(l3_out, Some((_, true))) {
                        c.l3.writebacks += 1;
                        c.dram.write_bytes += line_bytes;
                    }
                }
            }
        }
        kernels.push(c);
    }
    Ok(TrafficReport::from_kernels(trace, l3.is_some(), kernels))
}
