//! Parameterized streaming traces standing in for HPC applications.

use std::collections::BTreeMap;

use super::{AccessOrder, Direction, KernelDescriptor, Precision, TensorAccess, Trace};
use crate::arch::DEFAULT_LINE_SIZE;
use crate::error::{CopaError, Result};

/// HPC kernels are launched over large grids; they never starve the SMs.
pub const HPC_PARALLELISM: u64 = 1 << 20;

/// Passes over the reused region inside each kernel.
const REUSE_PASSES: u32 = 2;

/// Builds `kernels` kernels over a `working_set`-byte footprint. A resident
/// region of `reuse_fraction * working_set` bytes is re-read by every kernel;
/// the remainder is streamed once, split evenly across kernels, half read
/// and half written.
pub fn gen_hpc_trace(working_set: u64, reuse_fraction: f64, flop_byte_ratio: f64, kernels: u32, seed: u64) -> Result<Trace> {
    if working_set == 0 {
        return Err(CopaError::contract("working set must be positive"));
    }
    if kernels == 0 {
        return Err(CopaError::contract("an HPC trace needs at least one kernel"));
    }
    if !(0.0..=1.0).contains(&reuse_fraction) {
        return Err(CopaError::contract(format!("reuse fraction {reuse_fraction} is outside [0, 1]")));
    }
    if !(flop_byte_ratio >= 0.0 && flop_byte_ratio.is_finite()) {
        return Err(CopaError::contract(format!("invalid FLOP/byte ratio {flop_byte_ratio}")));
    }
    let line = u64::from(DEFAULT_LINE_SIZE);
    let lines = working_set.div_ceil(line);
    let reused_lines = ((lines as f64) * reuse_fraction).round() as u64;
    let stream_lines = lines - reused_lines;
    let reused = reused_lines * line;

    let mut out = Vec::with_capacity(kernels as usize);
    let mut cursor = reused;
    for k in 0..u64::from(kernels) {
        // Even split of the streaming lines; earlier kernels take the remainder.
        let chunk_lines = stream_lines / u64::from(kernels) + u64::from(k < stream_lines % u64::from(kernels));
        let mut accesses = Vec::new();
        if reused > 0 {
            accesses.push(TensorAccess {
                tensor_id: 0,
                base_address: 0,
                extent: reused,
                direction: Direction::Read,
                order: AccessOrder::PseudoRandom { seed },
                repetitions: REUSE_PASSES,
            });
        }
        let read_lines = chunk_lines.div_ceil(2);
        let write_lines = chunk_lines - read_lines;
        for (n, direction, offset) in [(read_lines, Direction::Read, 1), (write_lines, Direction::Write, 2)] {
            if n > 0 {
                accesses.push(TensorAccess {
                    tensor_id: (2 * k + offset) as u32,
                    base_address: cursor,
                    extent: n * line,
                    direction,
                    order: AccessOrder::Sequential,
                    repetitions: 1,
                });
                cursor += n * line;
            }
        }
        let bytes: u64 = accesses.iter().map(|a| a.extent * u64::from(a.repetitions)).sum();
        let mut flops = BTreeMap::new();
        if flop_byte_ratio > 0.0 {
            flops.insert(Precision::Fp32, flop_byte_ratio * bytes as f64);
        }
        if accesses.is_empty() && flops.is_empty() {
            // More kernels than streaming lines and nothing reused: keep the kernel non-degenerate.
            flops.insert(Precision::Fp32, 1.0);
        }
        out.push(KernelDescriptor {
            kernel_id: k as u32,
            name: format!("hpc{k}"),
            flops,
            parallelism: HPC_PARALLELISM,
            accesses,
            dependency: (k as u32).checked_sub(1),
        });
    }
    let name = format!("hpc-{}MB-r{:.2}-i{}", working_set.div_ceil(crate::units::MB), reuse_fraction, flop_byte_ratio);
    Ok(Trace::new(name, 1, DEFAULT_LINE_SIZE, out))
}
