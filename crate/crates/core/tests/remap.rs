use std::collections::HashMap;

use proptest::prelude::*;

use vardram::dram::{BankId, DecodedAddress, Geometry, Op, TimingParams};
use vardram::remap::{
    collision_resolve, translate, Direction, FlagState, PairState, RemapEngine, RemapParams, RemapTrie,
};
use vardram::variation::{BankPair, VariationMatrix};

fn geometry() -> Geometry {
    Geometry {
        channels: 1,
        ranks_per_channel: 2,
        banks_per_rank: 4,
        rows_per_bank: 8,
        cols_per_row: 8,
        bytes_per_column: 8,
    }
}

fn matrix(g: &Geometry) -> VariationMatrix {
    VariationMatrix::from_pairs(
        vec![
            BankPair { victim: BankId::new(0, 1), target: BankId::new(0, 2) },
            BankPair { victim: BankId::new(1, 3), target: BankId::new(0, 0) },
        ],
        g.ranks_per_channel,
        g.banks_per_rank,
        None,
        &TimingParams::default(),
        &Default::default(),
    )
    .unwrap()
}

fn engine() -> RemapEngine {
    let g = geometry();
    let params = RemapParams { trie_capacity_fraction: 1.0, occupancy_threshold: 1.0, trie_threshold: 1.0, ..Default::default() };
    RemapEngine::new(g, &matrix(&g), params).unwrap()
}

#[derive(Debug, Clone)]
enum Step {
    Access { write: bool, bank: usize, row: u32, col: u32, tag: u64 },
    Copy,
    Forward(usize),
    Reverse(usize),
    Settle,
}

fn step() -> impl Strategy<Value = Step> {
    // paired banks get most of the traffic
    let bank = prop_oneof![3 => Just(1usize), 3 => Just(2usize), 2 => Just(7usize), 2 => Just(0usize), 1 => 0usize..8];
    prop_oneof![
        6 => (any::<bool>(), bank, 0u32..8, 0u32..8, any::<u64>())
            .prop_map(|(write, bank, row, col, tag)| Step::Access { write, bank, row, col, tag }),
        4 => Just(Step::Copy),
        1 => (0usize..2).prop_map(Step::Forward),
        1 => (0usize..2).prop_map(Step::Reverse),
        2 => Just(Step::Settle),
    ]
}

fn expected_flag(e: &RemapEngine) -> FlagState {
    let ps = e.pairs();
    if ps.iter().any(|p| p.is_migrating()) {
        FlagState::Migrating
    } else if ps.iter().any(|p| p.state == PairState::Gated) {
        FlagState::Gated
    } else {
        FlagState::Idle
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn engine_preserves_data_and_protocol(steps in proptest::collection::vec(step(), 1..300)) {
        let g = geometry();
        let mut e = engine();
        let mut last: HashMap<DecodedAddress, u64> = HashMap::new();
        for s in steps {
            match s {
                Step::Access { write, bank, row, col, tag } => {
                    let (_, b) = g.bank_of_index(bank);
                    let d = DecodedAddress::new(0, b.rank, b.bank, row, col);
                    let op = if write { Op::Write } else { Op::Read };
                    let r = e.access(op, &d, tag).unwrap();
                    if write {
                        last.insert(d, tag);
                    } else {
                        prop_assert_eq!(r.read_tag, last.get(&d).copied());
                    }
                    // the served location is never inside a gated victim
                    let pb = g.bank_index_of(&r.physical);
                    prop_assert!(e.pairs().iter().all(|p| !(p.state == PairState::Gated && p.victim == pb)));
                    prop_assert!(r.translation_stall_cycles % 3 == 0 && r.translation_stall_cycles <= 6);
                }
                Step::Copy => {
                    e.next_copy().unwrap();
                }
                Step::Forward(p) => {
                    let (v, t) = (e.pairs()[p].victim, e.pairs()[p].target);
                    e.migrate_and_remap(&[v], &[t], Direction::Forward).unwrap();
                }
                Step::Reverse(p) => {
                    let (v, t) = (e.pairs()[p].victim, e.pairs()[p].target);
                    e.migrate_and_remap(&[t], &[v], Direction::Reverse).unwrap();
                }
                Step::Settle => {
                    for p in e.drained_pairs() {
                        e.settle(p).unwrap();
                    }
                }
            }
            prop_assert_eq!(e.flag(), expected_flag(&e));
            for p in e.pairs() {
                prop_assert!(e.bank_occupancy(p.target) <= g.slots_per_bank());
            }
        }
        while e.next_copy().unwrap().is_some() {}
        for p in e.drained_pairs() {
            e.settle(p).unwrap();
        }
        for (d, tag) in &last {
            prop_assert_eq!(e.read_logical(d), Some(*tag));
        }
        // one logical owner per physical slot
        let mut seen = HashMap::new();
        for (l, p) in e.live_mappings() {
            prop_assert!(seen.insert(p, l).is_none(), "slot {} held twice", p);
        }
    }

    #[test]
    fn collision_resolve_finds_first_free_slot_in_scan_order(rows in 1u32..6, cols in 1u32..6, ro in 0u32..6, co in 0u32..6, mask in any::<u64>()) {
        let (ro, co) = (ro % rows, co % cols);
        let taken = |r: u32, c: u32| mask >> ((r * cols + c) % 64) & 1 == 1;
        let total = rows * cols;
        let start = ro * cols + co;
        let want = (1..total)
            .map(|s| (start + s) % total)
            .map(|s| (s / cols, s % cols))
            .find(|&(r, c)| !taken(r, c));
        prop_assert_eq!(collision_resolve(rows, cols, ro, co, taken), want);
    }
}

#[test]
fn translation_follows_the_flag_msb() {
    let g = geometry();
    let m = matrix(&g);
    let trie = RemapTrie::new(u64::MAX, 40);
    let a = DecodedAddress::new(0, 0, 1, 3, 4);
    for flag in [FlagState::Idle, FlagState::Migrating] {
        assert_eq!(translate(&a, &g, &m, &trie, flag).effective, a);
    }
    let t = translate(&a, &g, &m, &trie, FlagState::Gated);
    assert_eq!(t.effective, DecodedAddress::new(0, 0, 2, 3, 4));
    assert!(!t.interrupted);
}

#[test]
fn flag_transitions_are_exactly_the_protocol() {
    use FlagState::*;
    let allowed = [(Idle, Migrating), (Migrating, Gated), (Gated, Migrating), (Migrating, Idle)];
    for from in [Idle, Migrating, Gated] {
        for to in [Idle, Migrating, Gated] {
            assert_eq!(from.transition(to).is_ok(), allowed.contains(&(from, to)), "{from} -> {to}");
        }
    }
    for bits in 0..4u8 {
        assert_eq!(FlagState::from_bits(bits).map(|f| f.bits()).ok(), (bits != 3).then_some(bits));
    }
}

#[test]
fn pairs_must_be_configured() {
    let mut e = engine();
    assert!(e.migrate_and_remap(&[1], &[0], Direction::Forward).is_err());
    assert!(e.migrate_and_remap(&[1, 7], &[2], Direction::Forward).is_err());
    assert_eq!(e.migrate_and_remap(&[1], &[2], Direction::Forward).unwrap(), 0);
    assert_eq!(e.flag(), FlagState::Migrating);
}
