use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::MemoryRequest;
use crate::dram::{DecodedAddress, Geometry, Op};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    /// Independent accesses spread over the whole device.
    Uniform,
    /// Accesses confined to a few rows of a few banks.
    Hotspot,
    /// Fills target-bank slots, then writes and reads the same slots of the
    /// paired victim bank so that every victim access collides.
    CollisionStress,
    /// Short bursts separated by long idle gaps.
    IdleHeavy,
}

impl SyntheticKind {
    pub const ALL: [SyntheticKind; 4] = [
        SyntheticKind::Uniform,
        SyntheticKind::Hotspot,
        SyntheticKind::CollisionStress,
        SyntheticKind::IdleHeavy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SyntheticKind::Uniform => "uniform",
            SyntheticKind::Hotspot => "hotspot",
            SyntheticKind::CollisionStress => "collision_stress",
            SyntheticKind::IdleHeavy => "idle_heavy",
        }
    }
}

impl fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SyntheticKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s || k.name().replace('_', "-") == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown trace kind '{s}'")))
    }
}

/// Generator knobs. Bank numbers are flat bank indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticParams {
    /// Number of requests (collision_stress: number of victim slots, each
    /// producing one pre-fill, one write and one read).
    pub requests: usize,
    /// Mean gap between consecutive requests, in cycles.
    pub mean_gap_cycles: u64,
    pub write_fraction: f64,
    pub hotspot_banks: usize,
    pub hotspot_rows: u32,
    pub burst_length: usize,
    pub burst_gap_cycles: u64,
    pub idle_gap_cycles: u64,
    /// collision_stress banks; unset means the first classified pair.
    pub victim_bank: Option<usize>,
    pub target_bank: Option<usize>,
    /// Fraction of victim slots whose target slot is pre-filled.
    pub overlap_fraction: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            requests: 20_000,
            mean_gap_cycles: 40,
            write_fraction: 0.3,
            hotspot_banks: 2,
            hotspot_rows: 64,
            burst_length: 32,
            burst_gap_cycles: 8,
            idle_gap_cycles: 20_000,
            victim_bank: None,
            target_bank: None,
            overlap_fraction: 1.0,
        }
    }
}

impl SyntheticParams {
    pub fn validate(&self, kind: SyntheticKind, g: &Geometry) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(0.0..=1.0).contains(&self.write_fraction) {
            return bad(format!("write_fraction must lie in [0, 1], got {}", self.write_fraction));
        }
        match kind {
            SyntheticKind::Hotspot => {
                if self.hotspot_banks == 0 || self.hotspot_banks > g.total_banks() {
                    return bad(format!("hotspot_banks must lie in 1..={}", g.total_banks()));
                }
                if self.hotspot_rows == 0 || self.hotspot_rows > g.rows_per_bank {
                    return bad(format!("hotspot_rows must lie in 1..={}", g.rows_per_bank));
                }
            }
            SyntheticKind::CollisionStress => {
                let n = g.total_banks();
                let (Some(v), Some(t)) = (self.victim_bank, self.target_bank) else {
                    return bad("collision_stress needs victim_bank and target_bank".into());
                };
                if v >= n || t >= n || v == t {
                    return bad("collision_stress needs two distinct in-range banks".into());
                }
                if !(0.0..=1.0).contains(&self.overlap_fraction) {
                    return bad("overlap_fraction must lie in [0, 1]".into());
                }
                if self.requests as u64 > g.slots_per_bank() {
                    return bad(format!("at most {} victim slots fit in a bank", g.slots_per_bank()));
                }
            }
            SyntheticKind::IdleHeavy => {
                if self.burst_length == 0 {
                    return bad("burst_length must be at least 1".into());
                }
            }
            SyntheticKind::Uniform => {}
        }
        Ok(())
    }
}

struct Gen<'a> {
    g: &'a Geometry,
    rng: ChaCha8Rng,
    cycle: u64,
    out: Vec<MemoryRequest>,
}

impl Gen<'_> {
    fn addr(&self, bank_index: usize, row: u32, column: u32) -> u64 {
        let (channel, b) = self.g.bank_of_index(bank_index);
        self.g.encode(&DecodedAddress::new(channel, b.rank, b.bank, row, column))
    }

    fn push(&mut self, op: Op, address: u64) {
        let tag = match op {
            Op::Write => self.rng.gen(),
            Op::Read => 0,
        };
        self.out.push(MemoryRequest::new(self.cycle, op, address, tag));
    }

    fn random_op(&mut self, write_fraction: f64) -> Op {
        if self.rng.gen::<f64>() < write_fraction {
            Op::Write
        } else {
            Op::Read
        }
    }

    fn advance(&mut self, mean: u64) {
        self.cycle += if mean == 0 { 0 } else { self.rng.gen_range(0..=2 * mean) };
    }
}

/// Generates a trace. The output is a pure function of the arguments.
pub fn generate_synthetic(
    kind: SyntheticKind,
    p: &SyntheticParams,
    geometry: &Geometry,
    seed: u64,
) -> Result<Vec<MemoryRequest>> {
    p.validate(kind, geometry)?;
    let g = geometry;
    let mut s = Gen {
        g,
        rng: ChaCha8Rng::seed_from_u64(seed),
        cycle: 0,
        out: Vec::with_capacity(p.requests),
    };
    let banks = g.total_banks();
    match kind {
        SyntheticKind::Uniform => {
            for _ in 0..p.requests {
                let b = s.rng.gen_range(0..banks);
                let (r, c) = (s.rng.gen_range(0..g.rows_per_bank), s.rng.gen_range(0..g.cols_per_row));
                let op = s.random_op(p.write_fraction);
                let a = s.addr(b, r, c);
                s.push(op, a);
                s.advance(p.mean_gap_cycles);
            }
        }
        SyntheticKind::Hotspot => {
            let mut all: Vec<usize> = (0..banks).collect();
            all.shuffle(&mut s.rng);
            let chosen: Vec<(usize, u32)> = all[..p.hotspot_banks]
                .iter()
                .map(|&b| (b, s.rng.gen_range(0..=g.rows_per_bank - p.hotspot_rows)))
                .collect();
            for _ in 0..p.requests {
                let (b, base) = chosen[s.rng.gen_range(0..chosen.len())];
                let r = base + s.rng.gen_range(0..p.hotspot_rows);
                let c = s.rng.gen_range(0..g.cols_per_row);
                let op = s.random_op(p.write_fraction);
                let a = s.addr(b, r, c);
                s.push(op, a);
                s.advance(p.mean_gap_cycles);
            }
        }
        SyntheticKind::IdleHeavy => {
            let mut left = p.requests;
            while left > 0 {
                let b = s.rng.gen_range(0..banks);
                let r = s.rng.gen_range(0..g.rows_per_bank);
                for _ in 0..p.burst_length.min(left) {
                    let c = s.rng.gen_range(0..g.cols_per_row);
                    let op = s.random_op(p.write_fraction);
                    let a = s.addr(b, r, c);
                    s.push(op, a);
                    s.cycle += p.burst_gap_cycles;
                }
                left = left.saturating_sub(p.burst_length);
                s.cycle += p.idle_gap_cycles;
            }
        }
        SyntheticKind::CollisionStress => {
            let mut seen = HashSet::new();
            let mut slots = Vec::with_capacity(p.requests);
            while slots.len() < p.requests {
                let rc = (s.rng.gen_range(0..g.rows_per_bank), s.rng.gen_range(0..g.cols_per_row));
                if seen.insert(rc) {
                    slots.push(rc);
                }
            }
            let (victim, target) = (p.victim_bank.unwrap(), p.target_bank.unwrap());
            let prefill = (p.overlap_fraction * p.requests as f64).round() as usize;
            for &(r, c) in &slots[..prefill] {
                let a = s.addr(target, r, c);
                s.push(Op::Write, a);
                s.advance(p.mean_gap_cycles);
            }
            for &(r, c) in &slots {
                let a = s.addr(victim, r, c);
                s.push(Op::Write, a);
                s.advance(p.mean_gap_cycles);
            }
            for &(r, c) in &slots {
                let a = s.addr(victim, r, c);
                s.push(Op::Read, a);
                s.advance(p.mean_gap_cycles);
            }
        }
    }
    Ok(s.out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_and_deterministic() {
        let g = Geometry::default();
        let p = SyntheticParams {
            requests: 0,
            ..Default::default()
        };
        assert!(generate_synthetic(SyntheticKind::Uniform, &p, &g, 1).unwrap().is_empty());
        let p = SyntheticParams::default();
        for k in SyntheticKind::ALL {
            let p = SyntheticParams {
                requests: 300,
                victim_bank: Some(2),
                target_bank: Some(5),
                ..p.clone()
            };
            let a = generate_synthetic(k, &p, &g, 5).unwrap();
            assert_eq!(a, generate_synthetic(k, &p, &g, 5).unwrap());
            assert!(a.windows(2).all(|w| w[0].issue_cycle <= w[1].issue_cycle));
            assert!(a.iter().all(|r| r.address < g.capacity_bytes()));
        }
    }

    #[test]
    fn kind_names_roundtrip() {
        for k in SyntheticKind::ALL {
            assert_eq!(k.name().parse::<SyntheticKind>().unwrap(), k);
        }
        assert!("zipf".parse::<SyntheticKind>().is_err());
    }
}
