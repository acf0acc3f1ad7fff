//! Fixed-stride 256-ary trie over 32-bit keys.
//!
//! Every key is split into four bytes, most significant first; each byte
//! indexes one node level, so every stored key sits exactly four levels
//! deep. Nodes are a 256-bit occupancy bitmap plus a compact child (or
//! value) array addressed by popcount, the same layout a hardware table
//! would use. Storage is estimated as `(nodes + values) * node_bytes` and
//! checked against a fixed ceiling on every insert.

use std::fmt::{self, Display};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const LEVELS: usize = 4;

/// Cycles for one full traversal (dual-edge clocked, four levels).
pub const LOOKUP_CYCLES: u32 = 3;
/// Extra cycles to retrieve a collision override once the leaf is found.
pub const RETRIEVAL_CYCLES: u32 = 3;

#[derive(Debug, Clone)]
enum Slots<V> {
    Inner(Vec<u32>),
    Leaf(Vec<V>),
}

#[derive(Debug, Clone)]
struct Node<V> {
    bitmap: [u64; 4],
    slots: Slots<V>,
}

impl<V> Node<V> {
    fn new(leaf: bool) -> Self {
        Self {
            bitmap: [0; 4],
            slots: if leaf {
                Slots::Leaf(Vec::new())
            } else {
                Slots::Inner(Vec::new())
            },
        }
    }

    fn has(&self, b: u8) -> bool {
        self.bitmap[(b >> 6) as usize] >> (b & 63) & 1 == 1
    }

    /// Position of byte `b` in the compact slot array.
    fn rank(&self, b: u8) -> usize {
        let w = (b >> 6) as usize;
        let below: u32 = self.bitmap[..w].iter().map(|x| x.count_ones()).sum();
        let mask = (1u64 << (b & 63)) - 1;
        (below + (self.bitmap[w] & mask).count_ones()) as usize
    }

    fn set(&mut self, b: u8) {
        self.bitmap[(b >> 6) as usize] |= 1 << (b & 63);
    }

    fn clear(&mut self, b: u8) {
        self.bitmap[(b >> 6) as usize] &= !(1 << (b & 63));
    }

    fn is_empty(&self) -> bool {
        self.bitmap.iter().all(|&w| w == 0)
    }

    /// Set bytes in ascending order.
    fn bytes(&self) -> impl Iterator<Item = u8> + '_ {
        (0..4).flat_map(move |w| {
            let mut bits = self.bitmap[w];
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let tz = bits.trailing_zeros();
                bits &= bits - 1;
                Some((w as u32 * 64 + tz) as u8)
            })
        })
    }
}

#[inline]
fn byte_at(key: u32, level: usize) -> u8 {
    (key >> (24 - 8 * level)) as u8
}

/// Storage accounting of one trie.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrieStats {
    pub keys: usize,
    pub nodes: usize,
    pub storage_bytes: u64,
    pub peak_bytes: u64,
    pub capacity_bytes: u64,
}

#[derive(Debug, Clone)]
pub struct Trie<V> {
    nodes: Vec<Option<Node<V>>>,
    free: Vec<u32>,
    live_nodes: usize,
    len: usize,
    node_bytes: u64,
    capacity_bytes: u64,
    peak_bytes: u64,
}

impl<V: Clone> Trie<V> {
    pub fn new(capacity_bytes: u64, node_bytes: u64) -> Self {
        let mut t = Self {
            nodes: vec![Some(Node::new(false))],
            free: Vec::new(),
            live_nodes: 1,
            len: 0,
            node_bytes,
            capacity_bytes,
            peak_bytes: 0,
        };
        t.peak_bytes = t.storage_bytes();
        t
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn node_count(&self) -> usize {
        self.live_nodes
    }

    pub fn storage_bytes(&self) -> u64 {
        (self.live_nodes + self.len) as u64 * self.node_bytes
    }

    pub fn capacity_bytes(&self) -> u64 {
        self.capacity_bytes
    }

    pub fn peak_bytes(&self) -> u64 {
        self.peak_bytes
    }

    /// Storage in use as a fraction of the ceiling.
    pub fn utilization(&self) -> f64 {
        if self.capacity_bytes == 0 {
            return f64::INFINITY;
        }
        self.storage_bytes() as f64 / self.capacity_bytes as f64
    }

    pub fn stats(&self) -> TrieStats {
        TrieStats {
            keys: self.len,
            nodes: self.live_nodes,
            storage_bytes: self.storage_bytes(),
            peak_bytes: self.peak_bytes,
            capacity_bytes: self.capacity_bytes,
        }
    }

    fn node(&self, i: u32) -> &Node<V> {
        self.nodes[i as usize].as_ref().expect("live node")
    }

    fn node_mut(&mut self, i: u32) -> &mut Node<V> {
        self.nodes[i as usize].as_mut().expect("live node")
    }

    fn alloc(&mut self, leaf: bool) -> u32 {
        self.live_nodes += 1;
        let node = Some(Node::new(leaf));
        match self.free.pop() {
            Some(i) => {
                self.nodes[i as usize] = node;
                i
            }
            None => {
                self.nodes.push(node);
                (self.nodes.len() - 1) as u32
            }
        }
    }

    fn release(&mut self, i: u32) {
        self.nodes[i as usize] = None;
        self.free.push(i);
        self.live_nodes -= 1;
    }

    /// Leaf node holding `key`, if the path exists.
    fn find_leaf(&self, key: u32) -> Option<u32> {
        let mut cur = 0u32;
        for level in 0..LEVELS - 1 {
            let n = self.node(cur);
            let b = byte_at(key, level);
            if !n.has(b) {
                return None;
            }
            match &n.slots {
                Slots::Inner(c) => cur = c[n.rank(b)],
                Slots::Leaf(_) => unreachable!("leaf above level 3"),
            }
        }
        Some(cur)
    }

    pub fn get(&self, key: u32) -> Option<&V> {
        let leaf = self.node(self.find_leaf(key)?);
        let b = byte_at(key, LEVELS - 1);
        if !leaf.has(b) {
            return None;
        }
        match &leaf.slots {
            Slots::Leaf(v) => Some(&v[leaf.rank(b)]),
            Slots::Inner(_) => unreachable!("inner node at level 3"),
        }
    }

    pub fn contains(&self, key: u32) -> bool {
        self.get(key).is_some()
    }

    /// Inserts or overwrites. Fails without modifying the trie when the new
    /// key would push storage past the ceiling.
    pub fn insert(&mut self, key: u32, value: V) -> Result<Option<V>> {
        // count nodes that must be created
        let mut missing = 0;
        let mut cur = Some(0u32);
        for level in 0..LEVELS - 1 {
            match cur {
                Some(i) => {
                    let n = self.node(i);
                    let b = byte_at(key, level);
                    cur = if n.has(b) {
                        match &n.slots {
                            Slots::Inner(c) => Some(c[n.rank(b)]),
                            Slots::Leaf(_) => unreachable!(),
                        }
                    } else {
                        missing += 1;
                        None
                    };
                }
                None => missing += 1,
            }
        }
        let exists = cur.map_or(false, |i| self.node(i).has(byte_at(key, LEVELS - 1)));
        if !exists {
            let needed = (self.live_nodes + missing + self.len + 1) as u64 * self.node_bytes;
            if needed > self.capacity_bytes {
                return Err(Error::CapacityExceeded {
                    needed,
                    capacity: self.capacity_bytes,
                });
            }
        }

        let mut cur = 0u32;
        for level in 0..LEVELS - 1 {
            let b = byte_at(key, level);
            let n = self.node(cur);
            if n.has(b) {
                cur = match &n.slots {
                    Slots::Inner(c) => c[n.rank(b)],
                    Slots::Leaf(_) => unreachable!(),
                };
            } else {
                let child = self.alloc(level + 1 == LEVELS - 1);
                let n = self.node_mut(cur);
                let pos = n.rank(b);
                n.set(b);
                match &mut n.slots {
                    Slots::Inner(c) => c.insert(pos, child),
                    Slots::Leaf(_) => unreachable!(),
                }
                cur = child;
            }
        }
        let b = byte_at(key, LEVELS - 1);
        let leaf = self.node_mut(cur);
        let pos = leaf.rank(b);
        let old = if leaf.has(b) {
            match &mut leaf.slots {
                Slots::Leaf(v) => Some(std::mem::replace(&mut v[pos], value)),
                Slots::Inner(_) => unreachable!(),
            }
        } else {
            leaf.set(b);
            match &mut leaf.slots {
                Slots::Leaf(v) => v.insert(pos, value),
                Slots::Inner(_) => unreachable!(),
            }
            self.len += 1;
            None
        };
        self.peak_bytes = self.peak_bytes.max(self.storage_bytes());
        Ok(old)
    }

    /// Removes a key, releasing nodes that become empty (never the root).
    pub fn remove(&mut self, key: u32) -> Option<V> {
        let mut path = [(0u32, 0u8); LEVELS];
        let mut cur = 0u32;
        for (level, step) in path.iter_mut().enumerate() {
            let b = byte_at(key, level);
            *step = (cur, b);
            let n = self.node(cur);
            if !n.has(b) {
                return None;
            }
            if level < LEVELS - 1 {
                cur = match &n.slots {
                    Slots::Inner(c) => c[n.rank(b)],
                    Slots::Leaf(_) => unreachable!(),
                };
            }
        }
        let (leaf, b) = path[LEVELS - 1];
        let n = self.node_mut(leaf);
        let pos = n.rank(b);
        n.clear(b);
        let old = match &mut n.slots {
            Slots::Leaf(v) => v.remove(pos),
            Slots::Inner(_) => unreachable!(),
        };
        self.len -= 1;
        for level in (1..LEVELS).rev() {
            let (node, _) = path[level];
            if !self.node(node).is_empty() {
                break;
            }
            self.release(node);
            let (parent, pb) = path[level - 1];
            let p = self.node_mut(parent);
            let pos = p.rank(pb);
            p.clear(pb);
            match &mut p.slots {
                Slots::Inner(c) => {
                    c.remove(pos);
                }
                Slots::Leaf(_) => unreachable!(),
            }
        }
        Some(old)
    }

    /// Visits keys in `[lo, hi]` in ascending order until `f` returns false.
    pub fn visit_range<F: FnMut(u32, &V) -> bool>(&self, lo: u32, hi: u32, mut f: F) {
        if lo <= hi {
            self.visit_node(0, 0, 0, lo, hi, &mut f);
        }
    }

    fn visit_node<F: FnMut(u32, &V) -> bool>(
        &self,
        node: u32,
        level: usize,
        prefix: u32,
        lo: u32,
        hi: u32,
        f: &mut F,
    ) -> bool {
        let n = self.node(node);
        let shift = 24 - 8 * level as u32;
        let span = if shift == 0 { 0 } else { (1u32 << shift) - 1 };
        for (i, b) in n.bytes().enumerate() {
            let first = prefix | (b as u32) << shift;
            let last = first | span;
            if last < lo {
                continue;
            }
            if first > hi {
                break;
            }
            let keep_going = match &n.slots {
                Slots::Inner(c) => self.visit_node(c[i], level + 1, first, lo, hi, f),
                Slots::Leaf(v) => f(first, &v[i]),
            };
            if !keep_going {
                return false;
            }
        }
        true
    }

    pub fn range(&self, lo: u32, hi: u32) -> Vec<(u32, V)> {
        let mut out = Vec::new();
        self.visit_range(lo, hi, |k, v| {
            out.push((k, v.clone()));
            true
        });
        out
    }

    pub fn any_in_range(&self, lo: u32, hi: u32) -> bool {
        let mut found = false;
        self.visit_range(lo, hi, |_, _| {
            found = true;
            false
        });
        found
    }

    pub fn count_in_range(&self, lo: u32, hi: u32) -> usize {
        let mut n = 0;
        self.visit_range(lo, hi, |_, _| {
            n += 1;
            true
        });
        n
    }

    pub fn iter(&self) -> Vec<(u32, V)> {
        self.range(0, u32::MAX)
    }
}

impl<V: Clone + Display> Trie<V> {
    /// One `0x<key> <payload>` line per key, ascending.
    pub fn dump<W: Write>(&self, mut w: W) -> Result<()> {
        let mut res = Ok(());
        self.visit_range(0, u32::MAX, |k, v| {
            res = writeln!(w, "{k:#010x} {v}");
            res.is_ok()
        });
        res.map_err(Error::from)
    }
}

/// Payload of the translation (primary) trie.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RemapEntry {
    /// Plain victim-to-target translation; row and column are kept.
    Pair { rank: u32, bank: u32 },
    /// Full relocation after a collision.
    Override {
        rank: u32,
        bank: u32,
        row: u32,
        column: u32,
    },
}

impl Display for RemapEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RemapEntry::Pair { rank, bank } => write!(f, "pair {rank} {bank}"),
            RemapEntry::Override {
                rank,
                bank,
                row,
                column,
            } => write!(f, "override {rank} {bank} {row} {column}"),
        }
    }
}

impl RemapEntry {
    pub fn is_override(&self) -> bool {
        matches!(self, RemapEntry::Override { .. })
    }
}

pub type RemapTrie = Trie<RemapEntry>;

impl RemapTrie {
    /// Lookup with its hardware cycle cost: 3 cycles to traverse, 3 more
    /// to retrieve a collision override.
    pub fn lookup(&self, key: u32) -> (Option<RemapEntry>, u32) {
        match self.get(key) {
            Some(e) if e.is_override() => (Some(*e), LOOKUP_CYCLES + RETRIEVAL_CYCLES),
            Some(e) => (Some(*e), LOOKUP_CYCLES),
            None => (None, LOOKUP_CYCLES),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big() -> Trie<u64> {
        Trie::new(u64::MAX, 40)
    }

    #[test]
    fn insert_then_lookup() {
        let mut t = big();
        t.insert(0xdead_beef, 7).unwrap();
        assert_eq!(t.get(0xdead_beef), Some(&7));
        assert_eq!(t.get(0xdead_bee0), None);
        // root + three levels + the value
        assert_eq!(t.node_count(), 4);
        assert_eq!(t.storage_bytes(), 5 * 40);
    }

    #[test]
    fn overwrite_keeps_latest() {
        let mut t = big();
        assert_eq!(t.insert(5, 1).unwrap(), None);
        assert_eq!(t.insert(5, 2).unwrap(), Some(1));
        assert_eq!(t.get(5), Some(&2));
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn remove_releases_nodes() {
        let mut t = big();
        t.insert(0x0102_0304, 1).unwrap();
        t.insert(0x0102_0305, 2).unwrap();
        t.insert(0xff00_0000, 3).unwrap();
        assert_eq!(t.node_count(), 7);
        assert_eq!(t.remove(0xff00_0000), Some(3));
        assert_eq!(t.node_count(), 4);
        assert_eq!(t.remove(0x0102_0304), Some(1));
        assert_eq!(t.remove(0x0102_0304), None);
        assert_eq!(t.remove(0x0102_0305), Some(2));
        assert_eq!(t.node_count(), 1);
        assert!(t.is_empty());
        assert!(t.peak_bytes() >= 10 * 40);
    }

    #[test]
    fn capacity_is_enforced_before_mutation() {
        let mut t: Trie<u64> = Trie::new(5 * 40, 40);
        t.insert(1, 1).unwrap();
        // same leaf, but one more value needs a sixth unit
        assert!(matches!(t.insert(2, 2), Err(Error::CapacityExceeded { .. })));
        assert_eq!(t.len(), 1);
        assert_eq!(t.node_count(), 4);
        // overwrite needs no space
        t.insert(1, 9).unwrap();
    }

    #[test]
    fn range_is_ordered_and_bounded() {
        let mut t = big();
        for k in [9u32, 0x100, 0x1_0000, 3, 0x0100_0000, 0xffff_ffff, 0x1_00ff] {
            t.insert(k, k as u64).unwrap();
        }
        let keys: Vec<u32> = t.iter().into_iter().map(|(k, _)| k).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        let mid: Vec<u32> = t.range(0x100, 0x1_00ff).into_iter().map(|(k, _)| k).collect();
        assert_eq!(mid, vec![0x100, 0x1_0000, 0x1_00ff]);
        assert_eq!(t.count_in_range(0, 8), 1);
        assert!(!t.any_in_range(10, 0xff));
        assert!(t.any_in_range(0xffff_fff0, 0xffff_ffff));
    }

    #[test]
    fn lookup_costs() {
        let mut t = RemapTrie::new(u64::MAX, 40);
        assert_eq!(t.lookup(1), (None, 3));
        t.insert(1, RemapEntry::Pair { rank: 0, bank: 5 }).unwrap();
        assert_eq!(t.lookup(1).1, 3);
        let o = RemapEntry::Override {
            rank: 0,
            bank: 5,
            row: 7,
            column: 10,
        };
        t.insert(2, o).unwrap();
        assert_eq!(t.lookup(2), (Some(o), 6));
    }

    #[test]
    fn dump_lists_every_key() {
        let mut t = RemapTrie::new(u64::MAX, 40);
        t.insert(0x10, RemapEntry::Pair { rank: 0, bank: 1 }).unwrap();
        t.insert(
            0x2,
            RemapEntry::Override {
                rank: 0,
                bank: 1,
                row: 2,
                column: 3,
            },
        )
        .unwrap();
        let mut out = Vec::new();
        t.dump(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "0x00000002 override 0 1 2 3\n0x00000010 pair 0 1\n"
        );
    }
}
