use serde::{Deserialize, Serialize};

use crate::dram::BankId;
use crate::{Error, Result};

/// Half-open rectangle `[row0, row1) x [col0, col1)` of grid cells owned by
/// one bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub bank: BankId,
    pub row0: usize,
    pub col0: usize,
    pub row1: usize,
    pub col1: usize,
}

impl Region {
    pub fn cells(&self) -> usize {
        (self.row1 - self.row0) * (self.col1 - self.col0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.row0..self.row1).flat_map(move |r| (self.col0..self.col1).map(move |c| (r, c)))
    }
}

/// Assignment of grid regions to `(rank, bank)` pairs of one channel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Floorplan {
    pub ranks: u32,
    pub banks: u32,
    /// Indexed by `rank * banks + bank`.
    regions: Vec<Region>,
}

impl Floorplan {
    /// Standard layout: each rank is a horizontal strip holding its banks
    /// in two rows (one row when there is a single bank).
    pub fn tiled(ranks: u32, banks: u32, grid_rows: usize, grid_cols: usize) -> Result<Self> {
        if ranks == 0 || banks == 0 {
            return Err(Error::InvalidParameter("floorplan needs at least one bank".into()));
        }
        let bank_rows = if banks >= 2 && banks % 2 == 0 { 2 } else { 1 };
        let bank_cols = banks / bank_rows;
        let tile_rows = (ranks * bank_rows) as usize;
        let tile_cols = bank_cols as usize;
        if grid_rows < tile_rows || grid_cols < tile_cols {
            return Err(Error::InvalidParameter(format!(
                "grid {grid_rows}x{grid_cols} too small for a {tile_rows}x{tile_cols} bank layout"
            )));
        }
        let edge = |i: usize, n: usize, len: usize| i * len / n;
        let mut regions = Vec::with_capacity((ranks * banks) as usize);
        for rank in 0..ranks {
            for bank in 0..banks {
                let tr = (rank * bank_rows + bank / bank_cols) as usize;
                let tc = (bank % bank_cols) as usize;
                regions.push(Region {
                    bank: BankId::new(rank, bank),
                    row0: edge(tr, tile_rows, grid_rows),
                    row1: edge(tr + 1, tile_rows, grid_rows),
                    col0: edge(tc, tile_cols, grid_cols),
                    col1: edge(tc + 1, tile_cols, grid_cols),
                });
            }
        }
        Ok(Self {
            ranks,
            banks,
            regions,
        })
    }

    /// Builds a floorplan from explicit regions (e.g. a manufacturer map).
    pub fn from_regions(ranks: u32, banks: u32, mut regions: Vec<Region>) -> Result<Self> {
        if regions.len() != (ranks * banks) as usize {
            return Err(Error::InvalidParameter(format!(
                "expected {} regions, got {}",
                ranks * banks,
                regions.len()
            )));
        }
        regions.sort_by_key(|r| (r.bank.rank, r.bank.bank));
        for (i, r) in regions.iter().enumerate() {
            let expect = BankId::new(i as u32 / banks, i as u32 % banks);
            if r.bank != expect {
                return Err(Error::InvalidParameter(format!(
                    "floorplan is missing bank {expect} (or lists a bank twice)"
                )));
            }
        }
        Ok(Self {
            ranks,
            banks,
            regions,
        })
    }

    pub fn region(&self, bank: BankId) -> &Region {
        &self.regions[(bank.rank * self.banks + bank.bank) as usize]
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn bank_count(&self) -> usize {
        self.regions.len()
    }

    /// Checks that regions are non-empty and tile the grid exactly.
    pub fn validate(&self, grid_rows: usize, grid_cols: usize) -> Result<()> {
        let mut cover = vec![0u8; grid_rows * grid_cols];
        for r in &self.regions {
            if r.row0 >= r.row1 || r.col0 >= r.col1 {
                return Err(Error::InvalidParameter(format!("region of bank {} is empty", r.bank)));
            }
            if r.row1 > grid_rows || r.col1 > grid_cols {
                return Err(Error::InvalidParameter(format!(
                    "region of bank {} exceeds the {grid_rows}x{grid_cols} grid",
                    r.bank
                )));
            }
            for (row, col) in r.iter() {
                let c = &mut cover[row * grid_cols + col];
                if *c != 0 {
                    return Err(Error::InvalidParameter(format!(
                        "regions overlap at cell ({row}, {col})"
                    )));
                }
                *c = 1;
            }
        }
        if let Some(i) = cover.iter().position(|&c| c == 0) {
            return Err(Error::InvalidParameter(format!(
                "cell ({}, {}) belongs to no bank",
                i / grid_cols,
                i % grid_cols
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiled_layouts_cover_the_grid() {
        for (ranks, banks, rows, cols) in [(1, 8, 32, 32), (2, 8, 30, 17), (4, 8, 64, 64), (1, 1, 2, 2), (2, 4, 5, 7)] {
            let fp = Floorplan::tiled(ranks, banks, rows, cols).unwrap();
            fp.validate(rows, cols).unwrap();
            assert_eq!(fp.bank_count(), (ranks * banks) as usize);
        }
    }

    #[test]
    fn too_small_grid_is_rejected() {
        assert!(Floorplan::tiled(4, 8, 4, 4).is_err());
    }

    #[test]
    fn overlap_and_gaps_are_detected() {
        let fp = Floorplan::tiled(1, 2, 4, 4).unwrap();
        let mut regions = fp.regions().to_vec();
        regions[1].row0 = 0;
        regions[1].row1 = 4;
        regions[1].col0 = 1;
        let bad = Floorplan::from_regions(1, 2, regions).unwrap();
        assert!(bad.validate(4, 4).is_err());

        let mut regions = fp.regions().to_vec();
        regions[0].col1 -= 1;
        let gap = Floorplan::from_regions(1, 2, regions).unwrap();
        assert!(gap.validate(4, 4).is_err());
    }
}
