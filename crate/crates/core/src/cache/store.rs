//! Tag stores with LRU replacement.

use rustc_hash::FxHashMap;

use crate::arch::{Associativity, CacheLevelSpec, IndexHash};
use crate::units::Capacity;

/// Result of presenting one line to a store.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lookup {
    Hit,
    /// The line was allocated; `victim` is the evicted line and its dirty bit.
    Miss { victim: Option<(u64, bool)> },
}

/// One cache level's tag state. Every access allocates on a miss and marks
/// the line dirty when `write` is set (write-allocate, write-back).
#[derive(Debug, Clone)]
pub enum TagStore {
    SetAssoc(SetAssoc),
    Full(FullyAssoc),
    Unbounded(FxHashMap<u64, bool>),
    /// Zero-capacity level: nothing is retained, dirty lines pass straight through.
    Empty,
}

impl TagStore {
    pub fn new(spec: &CacheLevelSpec) -> Self {
        match (spec.capacity, spec.associativity) {
            (Capacity::Infinite, _) => TagStore::Unbounded(FxHashMap::default()),
            (Capacity::Finite(_), _) if spec.lines() == Some(0) => TagStore::Empty,
            (Capacity::Finite(_), Associativity::Full) => TagStore::Full(FullyAssoc::new(spec.lines().unwrap())),
            (Capacity::Finite(_), Associativity::Ways(ways)) => {
                let lines = spec.lines().unwrap();
                let ways = u64::from(ways).min(lines);
                TagStore::SetAssoc(SetAssoc::new(lines / ways, ways as usize, spec.index_hash))
            }
        }
    }

    pub fn access(&mut self, line: u64, write: bool) -> Lookup {
        match self {
            TagStore::SetAssoc(s) => s.access(line, write),
            TagStore::Full(f) => f.access(line, write),
            TagStore::Unbounded(map) => match map.get_mut(&line) {
                Some(dirty) => {
                    *dirty |= write;
                    Lookup::Hit
                }
                None => {
                    map.insert(line, write);
                    Lookup::Miss { victim: None }
                }
            },
            TagStore::Empty => Lookup::Miss { victim: write.then_some((line, true)) },
        }
    }
}

const INVALID: u64 = u64::MAX;

/// Set-associative store. Each set is a slice of `ways` entries kept in
/// MRU-to-LRU order; an entry packs `line << 1 | dirty`.
#[derive(Debug, Clone)]
pub struct SetAssoc {
    entries: Vec<u64>,
    sets: u64,
    ways: usize,
    set_bits: u32,
    hash: IndexHash,
}

impl SetAssoc {
    fn new(sets: u64, ways: usize, hash: IndexHash) -> Self {
        SetAssoc {
            entries: vec![INVALID; (sets as usize) * ways],
            sets,
            ways,
            set_bits: 64 - sets.saturating_sub(1).leading_zeros(),
            hash,
        }
    }

    fn index(&self, line: u64) -> usize {
        let key = match self.hash {
            IndexHash::LowBits => line,
            IndexHash::XorFold => {
                let bits = self.set_bits.max(1);
                let mut folded = 0;
                let mut rest = line;
                while rest != 0 {
                    folded ^= rest;
                    rest = rest.checked_shr(bits).unwrap_or(0);
                }
                folded
            }
        };
        (key % self.sets) as usize
    }

    fn access(&mut self, line: u64, write: bool) -> Lookup {
        let start = self.index(line) * self.ways;
        let set = &mut self.entries[start..start + self.ways];
        let mut filled = self.ways;
        for (i, &e) in set.iter().enumerate() {
            if e == INVALID {
                filled = i;
                break;
            }
            if e >> 1 == line {
                set[..=i].rotate_right(1);
                set[0] |= u64::from(write);
                return Lookup::Hit;
            }
        }
        let victim = if filled == self.ways {
            let e = set[self.ways - 1];
            set.rotate_right(1);
            Some((e >> 1, e & 1 == 1))
        } else {
            set[..=filled].rotate_right(1);
            None
        };
        set[0] = line << 1 | u64::from(write);
        Lookup::Miss { victim }
    }
}

const NIL: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct Node {
    line: u64,
    dirty: bool,
    prev: u32,
    next: u32,
}

/// Fully-associative LRU: hash map into an index-linked recency list.
#[derive(Debug, Clone)]
pub struct FullyAssoc {
    map: FxHashMap<u64, u32>,
    nodes: Vec<Node>,
    capacity: usize,
    head: u32,
    tail: u32,
}

impl FullyAssoc {
    fn new(lines: u64) -> Self {
        let capacity = usize::try_from(lines).expect("fully-associative capacity fits in memory");
        FullyAssoc {
            map: FxHashMap::default(),
            nodes: Vec::new(),
            capacity,
            head: NIL,
            tail: NIL,
        }
    }

    fn unlink(&mut self, i: u32) {
        let (prev, next) = (self.nodes[i as usize].prev, self.nodes[i as usize].next);
        match prev {
            NIL => self.head = next,
            p => self.nodes[p as usize].next = next,
        }
        match next {
            NIL => self.tail = prev,
            n => self.nodes[n as usize].prev = prev,
        }
    }

    fn push_front(&mut self, i: u32) {
        self.nodes[i as usize].prev = NIL;
        self.nodes[i as usize].next = self.head;
        if self.head != NIL {
            self.nodes[self.head as usize].prev = i;
        }
        self.head = i;
        if self.tail == NIL {
            self.tail = i;
        }
    }

    fn access(&mut self, line: u64, write: bool) -> Lookup {
        if let Some(&i) = self.map.get(&line) {
            self.nodes[i as usize].dirty |= write;
            if self.head != i {
                self.unlink(i);
                self.push_front(i);
            }
            return Lookup::Hit;
        }
        if self.nodes.len() < self.capacity {
            let i = self.nodes.len() as u32;
            self.nodes.push(Node { line, dirty: write, prev: NIL, next: NIL });
            self.map.insert(line, i);
            self.push_front(i);
            return Lookup::Miss { victim: None };
        }
        let i = self.tail;
        self.unlink(i);
        let node = &mut self.nodes[i as usize];
        let victim = (node.line, node.dirty);
        node.line = line;
        node.dirty = write;
        self.map.remove(&victim.0);
        self.map.insert(line, i);
        self.push_front(i);
        Lookup::Miss { victim: Some(victim) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::Bandwidth;

    fn spec(capacity: Capacity, associativity: Associativity) -> CacheLevelSpec {
        CacheLevelSpec {
            capacity,
            line_size: 128,
            associativity,
            read_bandwidth: Bandwidth(1.0),
            write_bandwidth: Bandwidth(1.0),
            access_latency_ns: 0.0,
            index_hash: IndexHash::LowBits,
        }
    }

    #[test]
    fn set_assoc_evicts_lru_within_a_set() {
        // 2 sets x 2 ways; even lines map to set 0.
        let mut s = TagStore::new(&spec(Capacity::Finite(4 * 128), Associativity::Ways(2)));
        assert_eq!(s.access(0, false), Lookup::Miss { victim: None });
        assert_eq!(s.access(2, true), Lookup::Miss { victim: None });
        assert_eq!(s.access(0, false), Lookup::Hit);
        assert_eq!(s.access(1, false), Lookup::Miss { victim: None });
        assert_eq!(s.access(4, false), Lookup::Miss { victim: Some((2, true)) });
        assert_eq!(s.access(0, false), Lookup::Hit);
    }

    #[test]
    fn fully_assoc_tracks_recency_and_dirt() {
        let mut s = TagStore::new(&spec(Capacity::Finite(2 * 128), Associativity::Full));
        s.access(10, true);
        s.access(11, false);
        assert_eq!(s.access(10, false), Lookup::Hit);
        assert_eq!(s.access(12, false), Lookup::Miss { victim: Some((11, false)) });
        assert_eq!(s.access(13, false), Lookup::Miss { victim: Some((10, true)) });
    }

    #[test]
    fn unbounded_never_evicts() {
        let mut s = TagStore::new(&spec(Capacity::Infinite, Associativity::Ways(16)));
        for l in 0..1000 {
            assert_eq!(s.access(l, true), Lookup::Miss { victim: None });
        }
        for l in 0..1000 {
            assert_eq!(s.access(l, false), Lookup::Hit);
        }
    }

    #[test]
    fn empty_store_passes_writes_through() {
        let mut s = TagStore::new(&spec(Capacity::Finite(0), Associativity::Ways(16)));
        assert_eq!(s.access(5, false), Lookup::Miss { victim: None });
        assert_eq!(s.access(5, true), Lookup::Miss { victim: Some((5, true)) });
    }

    #[test]
    fn xor_fold_spreads_power_of_two_strides() {
        let mut low = spec(Capacity::Finite(64 * 128), Associativity::Ways(4));
        let mut folded = low.clone();
        folded.index_hash = IndexHash::XorFold;
        low.index_hash = IndexHash::LowBits;
        let mut a = TagStore::new(&low);
        let mut b = TagStore::new(&folded);
        let lines: Vec<u64> = (0..8).map(|i| i * 16).collect();
        let mut hits = [0, 0];
        for _ in 0..2 {
            for &l in &lines {
                hits[0] += u32::from(a.access(l, false) == Lookup::Hit);
                hits[1] += u32::from(b.access(l, false) == Lookup::Hit);
            }
        }
        // Eight lines 16 apart all land in set 0 of a 16-set cache under low bits.
        assert_eq!(hits[0], 0);
        assert_eq!(hits[1], 8);
    }
}
