use std::io::{BufRead, Write};

use super::{Floorplan, Region};
use crate::dram::BankId;
use crate::{Error, Result};

/// Per-cell deviations from the mean (in multiples of the mean) over a
/// floorplan of banks.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationMap {
    rows: usize,
    cols: usize,
    grid: Vec<f64>,
    floorplan: Floorplan,
}

impl VariationMap {
    pub fn new(rows: usize, cols: usize, grid: Vec<f64>, floorplan: Floorplan) -> Result<Self> {
        if grid.len() != rows * cols {
            return Err(Error::InvalidParameter(format!(
                "grid has {} values, expected {rows}x{cols}",
                grid.len()
            )));
        }
        if let Some(i) = grid.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid value {i} is not finite")));
        }
        floorplan.validate(rows, cols)?;
        Ok(Self {
            rows,
            cols,
            grid,
            floorplan,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.grid[row * self.cols + col]
    }

    pub fn floorplan(&self) -> &Floorplan {
        &self.floorplan
    }

    /// Adds `delta` to every cell of one bank's region.
    pub fn offset_region(&mut self, bank: BankId, delta: f64) {
        let region = *self.floorplan.region(bank);
        for (r, c) in region.iter() {
            self.grid[r * self.cols + c] += delta;
        }
    }

    /// Mean absolute deviation over a bank's region.
    pub fn severity(&self, bank: BankId) -> f64 {
        let region = self.floorplan.region(bank);
        let sum: f64 = region.iter().map(|(r, c)| self.get(r, c).abs()).sum();
        sum / region.cells() as f64
    }

    /// Severity of every bank, indexed `rank * banks + bank`.
    pub fn severities(&self) -> Vec<f64> {
        self.floorplan
            .regions()
            .iter()
            .map(|r| self.severity(r.bank))
            .collect()
    }

    /// Writes the text format:
    ///
    /// ```text
    /// # vardram variation map
    /// grid <rows> <cols>
    /// floorplan <ranks> <banks>
    /// region <rank> <bank> <row0> <col0> <row1> <col1>
    /// ...
    /// data
    /// <cols space-separated values>   (one line per grid row)
    /// ```
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# vardram variation map")?;
        writeln!(w, "grid {} {}", self.rows, self.cols)?;
        writeln!(w, "floorplan {} {}", self.floorplan.ranks, self.floorplan.banks)?;
        for r in self.floorplan.regions() {
            writeln!(
                w,
                "region {} {} {} {} {} {}",
                r.bank.rank, r.bank.bank, r.row0, r.col0, r.row1, r.col1
            )?;
        }
        writeln!(w, "data")?;
        for row in self.grid.chunks(self.cols) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut dims = None;
        let mut plan = None;
        let mut regions = Vec::new();
        let mut grid = Vec::new();
        let mut in_data = false;
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            let err = |msg: &str| Error::Parse {
                line: lineno,
                msg: msg.to_string(),
            };
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            if in_data {
                for tok in t.split_whitespace() {
                    grid.push(tok.parse::<f64>().map_err(|_| err("bad grid value"))?);
                }
                continue;
            }
            let toks: Vec<&str> = t.split_whitespace().collect();
            let nums = |n: usize| -> Result<Vec<usize>> {
                if toks.len() != n + 1 {
                    return Err(err(&format!("expected {n} fields after '{}'", toks[0])));
                }
                toks[1..]
                    .iter()
                    .map(|s| s.parse::<usize>().map_err(|_| err("bad integer")))
                    .collect()
            };
            match toks[0] {
                "grid" => {
                    let v = nums(2)?;
                    dims = Some((v[0], v[1]));
                }
                "floorplan" => {
                    let v = nums(2)?;
                    plan = Some((v[0] as u32, v[1] as u32));
                }
                "region" => {
                    let v = nums(6)?;
                    regions.push(Region {
                        bank: BankId::new(v[0] as u32, v[1] as u32),
                        row0: v[2],
                        col0: v[3],
                        row1: v[4],
                        col1: v[5],
                    });
                }
                "data" => in_data = true,
                other => return Err(err(&format!("unknown directive '{other}'"))),
            }
        }
        let missing = |what: &str| Error::Parse {
            line: 0,
            msg: format!("variation map is missing its {what} header"),
        };
        let (rows, cols) = dims.ok_or_else(|| missing("grid"))?;
        let (ranks, banks) = plan.ok_or_else(|| missing("floorplan"))?;
        let floorplan = Floorplan::from_regions(ranks, banks, regions)?;
        Self::new(rows, cols, grid, floorplan)
    }
}
