use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{line_span, AccessOrder, Direction, KernelDescriptor, TensorAccess};

/// Lazily expands a kernel into its `(line_address, direction)` stream.
///
/// Tensor accesses are emitted in descriptor order; each access replays its
/// pattern `repetitions` times before the next one starts.
pub fn expand(kernel: &KernelDescriptor, line_size: u32) -> Expansion<'_> {
    assert!(line_size.is_power_of_two(), "line size must be a power of two");
    Expansion {
        accesses: &kernel.accesses,
        line_shift: line_size.trailing_zeros(),
        next: 0,
        current: None,
    }
}

pub struct Expansion<'a> {
    accesses: &'a [TensorAccess],
    line_shift: u32,
    next: usize,
    current: Option<Cursor>,
}

struct Cursor {
    direction: Direction,
    first: u64,
    lines: u64,
    reps_left: u32,
    pattern: Pattern,
}

enum Pattern {
    Sequential { pos: u64 },
    Strided { step: u64, offset: u64, pos: u64 },
    Permuted { order: Vec<u64>, pos: usize },
}

impl Pattern {
    fn new(order: AccessOrder, lines: u64, line_shift: u32) -> Self {
        match order {
            AccessOrder::Sequential => Pattern::Sequential { pos: 0 },
            AccessOrder::Strided { stride } => {
                let step = (stride >> line_shift).max(1);
                if step == 1 {
                    Pattern::Sequential { pos: 0 }
                } else {
                    Pattern::Strided { step, offset: 0, pos: 0 }
                }
            }
            AccessOrder::PseudoRandom { seed } => {
                let mut order: Vec<u64> = (0..lines).collect();
                order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
                Pattern::Permuted { order, pos: 0 }
            }
        }
    }

    /// Next line offset within the extent, or `None` at the end of one pass.
    fn next(&mut self, lines: u64) -> Option<u64> {
        match self {
            Pattern::Sequential { pos } => {
                (*pos < lines).then(|| {
                    *pos += 1;
                    *pos - 1
                })
            }
            Pattern::Strided { step, offset, pos } => {
                while *offset < *step {
                    if *pos < lines {
                        let out = *pos;
                        *pos += *step;
                        return Some(out);
                    }
                    *offset += 1;
                    *pos = *offset;
                }
                None
            }
            Pattern::Permuted { order, pos } => {
                let out = order.get(*pos).copied();
                *pos += 1;
                out
            }
        }
    }

    fn rewind(&mut self) {
        match self {
            Pattern::Sequential { pos } => *pos = 0,
            Pattern::Strided { offset, pos, .. } => {
                *offset = 0;
                *pos = 0;
            }
            Pattern::Permuted { pos, .. } => *pos = 0,
        }
    }
}

impl Iterator for Expansion<'_> {
    type Item = (u64, Direction);

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(cur) = self.current.as_mut() {
                if let Some(offset) = cur.pattern.next(cur.lines) {
                    return Some(((cur.first + offset) << self.line_shift, cur.direction));
                }
                cur.reps_left -= 1;
                if cur.reps_left > 0 {
                    cur.pattern.rewind();
                    continue;
                }
                self.current = None;
            }
            let access = self.accesses.get(self.next)?;
            self.next += 1;
            if access.extent == 0 || access.repetitions == 0 {
                continue;
            }
            let (first, lines) = line_span(access, self.line_shift);
            self.current = Some(Cursor {
                direction: access.direction,
                first,
                lines,
                reps_left: access.repetitions,
                pattern: Pattern::new(access.order, lines, self.line_shift),
            });
        }
    }
}
