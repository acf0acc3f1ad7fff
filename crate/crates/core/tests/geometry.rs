use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vardram::dram::{DecodedAddress, Geometry};

fn geometries() -> Vec<Geometry> {
    vec![
        Geometry::default(),
        Geometry {
            channels: 2,
            ranks_per_channel: 4,
            banks_per_rank: 8,
            rows_per_bank: 1 << 15,
            cols_per_row: 1024,
            bytes_per_column: 8,
        },
        Geometry {
            channels: 1,
            ranks_per_channel: 2,
            banks_per_rank: 16,
            rows_per_bank: 64,
            cols_per_row: 32,
            bytes_per_column: 1,
        },
    ]
}

#[test]
fn decode_encode_inverts_on_random_addresses() {
    for g in geometries() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let step = g.bytes_per_column as u64;
        for _ in 0..100_000 {
            let a = rng.gen_range(0..g.capacity_bytes() / step) * step;
            let d = g.decode(a).unwrap();
            assert!(g.contains(&d));
            assert_eq!(g.encode(&d), a, "{g:?} {d}");
        }
    }
}

#[test]
fn out_of_range_addresses_are_rejected() {
    let g = Geometry::default();
    assert!(g.decode(g.capacity_bytes()).is_err());
    assert!(g.decode(u64::MAX).is_err());
}

#[test]
fn consecutive_banks_are_one_stride_apart() {
    let g = Geometry::default();
    let a = g.encode(&DecodedAddress::new(0, 0, 3, 100, 5));
    let b = g.encode(&DecodedAddress::new(0, 0, 4, 100, 5));
    assert_eq!(b - a, g.bank_stride());
}

fn geometry_strategy() -> impl Strategy<Value = Geometry> {
    (0u32..2, 0u32..3, 1u32..4, 2u32..10, 2u32..8, 0u32..4).prop_map(|(ch, rk, bk, rw, cl, by)| Geometry {
        channels: 1 << ch,
        ranks_per_channel: 1 << rk,
        banks_per_rank: 1 << bk,
        rows_per_bank: 1 << rw,
        cols_per_row: 1 << cl,
        bytes_per_column: 1 << by,
    })
}

proptest! {
    #[test]
    fn decoded_fields_roundtrip(g in geometry_strategy(), raw in any::<u64>()) {
        prop_assert!(g.validate().is_ok());
        let d = DecodedAddress::new(
            (raw % g.channels as u64) as u32,
            ((raw >> 8) % g.ranks_per_channel as u64) as u32,
            ((raw >> 16) % g.banks_per_rank as u64) as u32,
            ((raw >> 24) % g.rows_per_bank as u64) as u32,
            ((raw >> 40) % g.cols_per_row as u64) as u32,
        );
        let a = g.encode(&d);
        prop_assert!(a < g.capacity_bytes());
        prop_assert_eq!(g.decode(a).unwrap(), d);
        prop_assert_eq!(g.slot_of_key(g.slot_key(&d)), d);
        prop_assert_eq!(g.row_of_id(g.row_id(&d)).unwrap().row, d.row);
        let idx = g.bank_index_of(&d);
        let (lo, hi) = g.bank_key_range(idx);
        let k = g.slot_key(&d);
        prop_assert!(lo <= k && k <= hi);
        let (ch, b) = g.bank_of_index(idx);
        prop_assert_eq!((ch, b), (d.channel, d.bank_id()));
    }
}
