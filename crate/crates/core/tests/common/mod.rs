#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use copa::arch::{preset, Associativity, CopaDesign};
use copa::units::Capacity;
use copa::workload::{AccessOrder, Direction, KernelDescriptor, Precision, TensorAccess, Trace};

pub const LINE: u64 = 128;
/// Address space reserved per tensor so tensors never overlap.
const REGION: u64 = 1 << 20;

/// A small random trace: a few tensors touched by a few kernels with mixed
/// orders, directions and repetitions. Expands to well under 10^5 accesses.
pub fn random_trace(seed: u64) -> Trace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tensors = rng.random_range(1..=5u32);
    let kernel_count = rng.random_range(1..=6u32);
    let mut kernels = Vec::new();
    for kernel_id in 0..kernel_count {
        let mut accesses = Vec::new();
        for _ in 0..rng.random_range(1..=4) {
            let tensor_id = rng.random_range(0..tensors);
            let lines = rng.random_range(1..=400u64);
            let offset = rng.random_range(0..=(REGION / LINE - lines)) * LINE;
            let order = match rng.random_range(0..3) {
                0 => AccessOrder::Sequential,
                1 => AccessOrder::Strided { stride: LINE * rng.random_range(2..=9u64) },
                _ => AccessOrder::PseudoRandom { seed: rng.random() },
            };
            let direction = match rng.random_range(0..3) {
                0 => Direction::Read,
                1 => Direction::Write,
                _ => Direction::ReadWrite,
            };
            accesses.push(TensorAccess {
                tensor_id,
                base_address: u64::from(tensor_id) * REGION + offset,
                extent: lines * LINE - rng.random_range(0..LINE),
                direction,
                order,
                repetitions: rng.random_range(1..=3),
            });
        }
        kernels.push(KernelDescriptor {
            kernel_id,
            name: format!("k{kernel_id}"),
            flops: BTreeMap::from([(Precision::Fp16, rng.random_range(0.0..1e9))]),
            parallelism: rng.random_range(1..=1u64 << 20),
            accesses,
            dependency: kernel_id.checked_sub(1),
        });
    }
    Trace::new(format!("random-{seed}"), 1, LINE as u32, kernels)
}

/// Fully-associative design with the given L2 and, optionally, L3 capacity.
pub fn fa_design(l2: Capacity, l3: Option<Capacity>) -> CopaDesign {
    let mut d = match l3 {
        Some(c) => {
            let mut d = preset("HBM+L3").unwrap();
            let spec = d.l3.as_mut().unwrap();
            spec.capacity = c;
            spec.associativity = Associativity::Full;
            d
        }
        None => preset("GPU-N").unwrap(),
    };
    d.l2.capacity = l2;
    d.l2.associativity = Associativity::Full;
    d
}

/// Random line-multiple capacity between `lo` and `hi` lines.
pub fn random_capacity(rng: &mut impl Rng, lo: u64, hi: u64) -> Capacity {
    Capacity::Finite(rng.random_range(lo..=hi) * LINE)
}
