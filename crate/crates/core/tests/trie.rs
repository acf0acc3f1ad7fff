use std::collections::BTreeMap;

use proptest::prelude::*;

use vardram::remap::{RemapEntry, RemapTrie, Trie};

#[derive(Debug, Clone)]
enum TrieOp {
    Insert(u32, u64),
    Remove(u32),
    Get(u32),
}

fn key() -> impl Strategy<Value = u32> {
    // clustered keys exercise shared paths, spread keys exercise node churn
    prop_oneof![0u32..512, any::<u32>(), (0u32..64).prop_map(|k| k << 24 | k)]
}

fn op() -> impl Strategy<Value = TrieOp> {
    prop_oneof![
        (key(), any::<u64>()).prop_map(|(k, v)| TrieOp::Insert(k, v)),
        key().prop_map(TrieOp::Remove),
        key().prop_map(TrieOp::Get),
    ]
}

proptest! {
    #[test]
    fn trie_matches_ordered_map(ops in proptest::collection::vec(op(), 1..400)) {
        let mut t: Trie<u64> = Trie::new(u64::MAX, 40);
        let mut m = BTreeMap::new();
        for op in ops {
            match op {
                TrieOp::Insert(k, v) => prop_assert_eq!(t.insert(k, v).unwrap(), m.insert(k, v)),
                TrieOp::Remove(k) => prop_assert_eq!(t.remove(k), m.remove(&k)),
                TrieOp::Get(k) => prop_assert_eq!(t.get(k).copied(), m.get(&k).copied()),
            }
            prop_assert_eq!(t.len(), m.len());
            prop_assert_eq!(t.storage_bytes(), (t.node_count() + t.len()) as u64 * 40);
            prop_assert!(t.peak_bytes() >= t.storage_bytes());
        }
        let all: Vec<(u32, u64)> = m.iter().map(|(&k, &v)| (k, v)).collect();
        prop_assert_eq!(t.iter(), all);
        for k in m.keys().copied().collect::<Vec<_>>() {
            t.remove(k);
        }
        prop_assert_eq!(t.node_count(), 1);
    }

    #[test]
    fn range_queries_match(keys in proptest::collection::btree_set(0u32..1 << 20, 0..200), lo in 0u32..1 << 20, span in 0u32..1 << 18) {
        let mut t: Trie<u32> = Trie::new(u64::MAX, 20);
        for &k in &keys {
            t.insert(k, k).unwrap();
        }
        let hi = lo.saturating_add(span);
        let want: Vec<(u32, u32)> = keys.range(lo..=hi).map(|&k| (k, k)).collect();
        prop_assert_eq!(t.count_in_range(lo, hi), want.len());
        prop_assert_eq!(t.any_in_range(lo, hi), !want.is_empty());
        prop_assert_eq!(t.range(lo, hi), want);
    }

    #[test]
    fn lookup_cost_depends_only_on_entry_kind(k in any::<u32>(), over in any::<bool>()) {
        let mut t = RemapTrie::new(u64::MAX, 40);
        prop_assert_eq!(t.lookup(k), (None, 3));
        let e = if over {
            RemapEntry::Override { rank: 0, bank: 1, row: 2, column: 3 }
        } else {
            RemapEntry::Pair { rank: 0, bank: 1 }
        };
        t.insert(k, e).unwrap();
        prop_assert_eq!(t.lookup(k), (Some(e), if over { 6 } else { 3 }));
    }
}

#[test]
fn full_trie_rejects_without_changing() {
    // root + 3 path nodes + 1 key = 5 nodes of 10 B
    let mut t: Trie<u8> = Trie::new(50, 10);
    t.insert(0x0102_0304, 1).unwrap();
    assert_eq!(t.storage_bytes(), 50);
    // same leaf but a new key needs one more unit
    assert!(t.insert(0x0102_0305, 2).is_err());
    assert_eq!((t.len(), t.node_count(), t.storage_bytes()), (1, 4, 50));
    // overwriting never needs room
    assert_eq!(t.insert(0x0102_0304, 9).unwrap(), Some(1));
    assert!((t.utilization() - 1.0).abs() < 1e-12);
}

#[test]
fn dump_lists_every_key() {
    let mut t = RemapTrie::new(u64::MAX, 40);
    t.insert(5, RemapEntry::Pair { rank: 0, bank: 2 }).unwrap();
    t.insert(1, RemapEntry::Override { rank: 1, bank: 3, row: 4, column: 5 }).unwrap();
    let mut out = Vec::new();
    t.dump(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].contains("override 1 3 4 5"));
    assert!(lines[1].contains("pair 0 2"));
}
