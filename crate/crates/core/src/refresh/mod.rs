//! Refresh scheduling, weak-row statistics and weak-row remapping.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dram::{Geometry, Picos, TimingParams};
use crate::remap::{CopyOp, RemapEngine};
use crate::{Error, Result};

/// Refresh-window stretch. `X4` refreshes every 4 tREFI (tREFW = 256 ms).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum RefreshMultiplier {
    #[default]
    #[serde(rename = "1x")]
    X1,
    #[serde(rename = "4x")]
    X4,
}

impl RefreshMultiplier {
    pub fn factor(self) -> u64 {
        match self {
            RefreshMultiplier::X1 => 1,
            RefreshMultiplier::X4 => 4,
        }
    }
}

impl fmt::Display for RefreshMultiplier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x", self.factor())
    }
}

impl FromStr for RefreshMultiplier {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1x" | "1" => Ok(RefreshMultiplier::X1),
            "4x" | "4" => Ok(RefreshMultiplier::X4),
            other => Err(Error::InvalidParameter(format!("unknown refresh multiplier '{other}'"))),
        }
    }
}

/// Refresh settings. tREFI and tREFW themselves live in [`TimingParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefreshConfig {
    pub multiplier: RefreshMultiplier,
    /// Bit error rate per cell over the extended window.
    pub ber: f64,
    /// Refresh banks one at a time instead of all banks of a rank at once.
    pub per_bank: bool,
    /// Optional weak-row profile (one global row id per line).
    pub weak_row_file: Option<std::path::PathBuf>,
}

impl Default for RefreshConfig {
    fn default() -> Self {
        Self {
            multiplier: RefreshMultiplier::X1,
            ber: 4e-9,
            per_bank: false,
            weak_row_file: None,
        }
    }
}

impl RefreshConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.ber) {
            return Err(Error::InvalidParameter(format!("ber must lie in [0, 1], got {}", self.ber)));
        }
        Ok(())
    }

    /// Interval between refresh commands to one rank.
    pub fn period(&self, timing: &TimingParams) -> Picos {
        timing.t_refi * self.multiplier.factor()
    }
}

/// Probability that a row of `cells_per_row` cells holds at least one weak
/// cell: `1 - (1 - ber)^cells`, evaluated as `-expm1(cells * ln1p(-ber))` so
/// that tiny error rates do not cancel.
pub fn weak_row_probability(ber: f64, cells_per_row: u64) -> Result<f64> {
    if !(0.0..=1.0).contains(&ber) {
        return Err(Error::InvalidParameter(format!("ber must lie in [0, 1], got {ber}")));
    }
    if cells_per_row == 0 {
        return Err(Error::InvalidParameter("cells_per_row must be at least 1".into()));
    }
    if ber == 1.0 {
        return Ok(1.0);
    }
    Ok(-(cells_per_row as f64 * (-ber).ln_1p()).exp_m1())
}

/// One independent Bernoulli draw per row. Returns sorted global row ids
/// (`bank_index * rows_per_bank + row`).
pub fn sample_weak_rows(geometry: &Geometry, probability: f64, seed: u64) -> Result<Vec<u64>> {
    if !(0.0..=1.0).contains(&probability) {
        return Err(Error::InvalidParameter(format!(
            "probability must lie in [0, 1], got {probability}"
        )));
    }
    let rows = geometry.total_banks() as u64 * geometry.rows_per_bank as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..rows).filter(|_| rng.gen::<f64>() < probability).collect())
}

/// Refresh command times of one rank over a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RefreshSchedule {
    pub period: Picos,
    pub run_length: Picos,
}

impl RefreshSchedule {
    /// Commands at `k * period` for every `k >= 1` with `k * period <= run_length`.
    pub fn times(&self) -> impl Iterator<Item = Picos> + '_ {
        (1..=self.count()).map(move |k| k * self.period)
    }

    pub fn count(&self) -> u64 {
        self.run_length / self.period
    }
}

/// Builds the per-rank refresh schedule and returns it with its total
/// command count over all ranks.
pub fn schedule_refresh(
    config: &RefreshConfig,
    timing: &TimingParams,
    ranks: usize,
    run_length: Picos,
) -> (RefreshSchedule, u64) {
    let s = RefreshSchedule {
        period: config.period(timing),
        run_length,
    };
    (s, s.count() * ranks as u64)
}

/// Reads a weak-row profile: one global row id per line, `#` comments.
pub fn read_weak_rows<R: BufRead>(r: R, geometry: &Geometry) -> Result<Vec<u64>> {
    let limit = geometry.total_banks() as u64 * geometry.rows_per_bank as u64;
    let mut rows = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.split('#').next().unwrap_or("").trim();
        if t.is_empty() {
            continue;
        }
        let id: u64 = t.parse().map_err(|_| Error::Parse {
            line: i + 1,
            msg: format!("'{t}' is not a row id"),
        })?;
        if id >= limit {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("row id {id} exceeds the {limit} rows of the device"),
            });
        }
        rows.push(id);
    }
    rows.sort_unstable();
    rows.dedup();
    Ok(rows)
}

pub fn write_weak_rows<W: Write>(mut w: W, rows: &[u64]) -> Result<()> {
    writeln!(w, "# weak rows (bank_index * rows_per_bank + row)")?;
    for r in rows {
        writeln!(w, "{r}")?;
    }
    Ok(())
}

/// Outcome of remapping a weak-row set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeakRowRemap {
    pub entries: usize,
    /// Serialized time of the row copies.
    pub upfront_latency: Picos,
    pub copies: Vec<CopyOp>,
}

/// Installs one row-granular override per weak row and reports the copy
/// latency of moving each row into its host (`row_copy_cost` per row).
pub fn remap_weak_rows(weak_rows: &[u64], engine: &mut RemapEngine, row_copy_cost: Picos) -> Result<WeakRowRemap> {
    let copies = engine.install_weak_rows(weak_rows)?;
    Ok(WeakRowRemap {
        entries: copies.len(),
        upfront_latency: copies.len() as Picos * row_copy_cost,
        copies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probability_endpoints() {
        assert_eq!(weak_row_probability(0.0, 65536).unwrap(), 0.0);
        assert_eq!(weak_row_probability(1.0, 65536).unwrap(), 1.0);
        assert_eq!(weak_row_probability(0.5, 1).unwrap(), 0.5);
        assert!(weak_row_probability(-0.1, 1).is_err());
        assert!(weak_row_probability(0.1, 0).is_err());
    }

    #[test]
    fn sampling_extremes() {
        let g = Geometry {
            rows_per_bank: 64,
            ..Geometry::default()
        };
        assert!(sample_weak_rows(&g, 0.0, 1).unwrap().is_empty());
        assert_eq!(sample_weak_rows(&g, 1.0, 1).unwrap().len(), 8 * 64);
        assert_eq!(sample_weak_rows(&g, 0.3, 9).unwrap(), sample_weak_rows(&g, 0.3, 9).unwrap());
    }

    #[test]
    fn schedule_counts() {
        let t = TimingParams::default();
        let one = RefreshConfig::default();
        let four = RefreshConfig {
            multiplier: RefreshMultiplier::X4,
            ..one.clone()
        };
        let (s1, n1) = schedule_refresh(&one, &t, 1, t.t_refw);
        let (_, n4) = schedule_refresh(&four, &t, 1, t.t_refw);
        assert_eq!((n1, n4), (8192, 2048));
        assert_eq!(s1.times().last(), Some(t.t_refw));
        assert_eq!(schedule_refresh(&one, &t, 4, t.t_refw).1, 4 * 8192);
    }

    #[test]
    fn profile_file_roundtrip() {
        let g = Geometry::default();
        let mut buf = Vec::new();
        write_weak_rows(&mut buf, &[3, 17, 99]).unwrap();
        assert_eq!(read_weak_rows(buf.as_slice(), &g).unwrap(), vec![3, 17, 99]);
        assert!(read_weak_rows("12\nx\n".as_bytes(), &g).is_err());
        assert!(read_weak_rows("999999999\n".as_bytes(), &g).is_err());
    }
}
