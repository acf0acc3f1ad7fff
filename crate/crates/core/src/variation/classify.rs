use serde::{Deserialize, Serialize};

use super::VariationMap;
use crate::dram::{BankId, Picos, TimingParams};
use crate::{Error, Result};

/// Linear-with-saturation mapping from bank severity to extra tRAS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DerateParams {
    /// tRAS increment at (and beyond) `severity_max`.
    pub delta_t_ras_max: Picos,
    pub severity_max: f64,
}

impl Default for DerateParams {
    fn default() -> Self {
        Self {
            delta_t_ras_max: 18_000,
            severity_max: 0.1,
        }
    }
}

/// Returns `nominal` with tRAS raised by
/// `delta_t_ras_max * min(severity / severity_max, 1)`; tRC follows.
pub fn derate_timing(
    nominal: &TimingParams,
    severity: f64,
    derate: &DerateParams,
) -> Result<TimingParams> {
    if !(severity >= 0.0) {
        return Err(Error::InvalidParameter(format!("severity must be >= 0, got {severity}")));
    }
    if !(derate.severity_max > 0.0) {
        return Err(Error::InvalidParameter("severity_max must be positive".into()));
    }
    let frac = (severity / derate.severity_max).min(1.0);
    let delta = (derate.delta_t_ras_max as f64 * frac).round() as Picos;
    Ok(nominal.with_t_ras(nominal.t_ras + delta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BankPair {
    pub victim: BankId,
    pub target: BankId,
}

/// Victim-to-target pairing with the derated timing of every victim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationMatrix {
    pairs: Vec<BankPair>,
    victim_timing: Vec<TimingParams>,
    /// Per-bank severity, indexed `rank * banks_per_rank + bank`.
    severity: Vec<f64>,
    banks_per_rank: u32,
    requested: usize,
}

impl VariationMatrix {
    /// A matrix with no victims.
    pub fn empty(ranks: u32, banks_per_rank: u32) -> Self {
        Self {
            pairs: Vec::new(),
            victim_timing: Vec::new(),
            severity: vec![0.0; (ranks * banks_per_rank) as usize],
            banks_per_rank,
            requested: 0,
        }
    }

    /// Builds a matrix from externally supplied pairs. Victims whose
    /// severity is unknown are derated at `severity_max`.
    pub fn from_pairs(
        pairs: Vec<BankPair>,
        ranks: u32,
        banks_per_rank: u32,
        severity: Option<Vec<f64>>,
        nominal: &TimingParams,
        derate: &DerateParams,
    ) -> Result<Self> {
        let n = (ranks * banks_per_rank) as usize;
        let severity = match severity {
            Some(s) if s.len() == n => s,
            Some(s) => {
                return Err(Error::InvalidParameter(format!(
                    "severity table has {} entries, expected {n}",
                    s.len()
                )))
            }
            None => {
                let mut s = vec![0.0; n];
                for p in &pairs {
                    if p.victim.rank < ranks && p.victim.bank < banks_per_rank {
                        s[(p.victim.rank * banks_per_rank + p.victim.bank) as usize] =
                            derate.severity_max;
                    }
                }
                s
            }
        };
        let mut m = Self {
            victim_timing: Vec::with_capacity(pairs.len()),
            requested: pairs.len(),
            pairs,
            severity,
            banks_per_rank,
        };
        for p in &m.pairs {
            for b in [p.victim, p.target] {
                if b.rank >= ranks || b.bank >= banks_per_rank {
                    return Err(Error::InvalidParameter(format!("bank {b} outside the device")));
                }
            }
        }
        m.validate()?;
        for p in &m.pairs {
            let sev = m.severity_of(p.victim);
            m.victim_timing.push(derate_timing(nominal, sev, derate)?);
        }
        Ok(m)
    }

    /// Checks that no bank is both a victim and a target and that no bank
    /// appears twice.
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for p in &self.pairs {
            for b in [p.victim, p.target] {
                if !seen.insert(b) {
                    return Err(Error::InvalidParameter(format!(
                        "bank {b} appears more than once in the variation matrix"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn pairs(&self) -> &[BankPair] {
        &self.pairs
    }

    pub fn victims(&self) -> impl Iterator<Item = BankId> + '_ {
        self.pairs.iter().map(|p| p.victim)
    }

    pub fn targets(&self) -> impl Iterator<Item = BankId> + '_ {
        self.pairs.iter().map(|p| p.target)
    }

    pub fn is_victim(&self, bank: BankId) -> bool {
        self.pairs.iter().any(|p| p.victim == bank)
    }

    pub fn is_target(&self, bank: BankId) -> bool {
        self.pairs.iter().any(|p| p.target == bank)
    }

    pub fn target_of(&self, victim: BankId) -> Option<BankId> {
        self.pairs.iter().find(|p| p.victim == victim).map(|p| p.target)
    }

    /// Derated timing of a victim bank.
    pub fn victim_timing(&self, victim: BankId) -> Option<&TimingParams> {
        self.pairs
            .iter()
            .position(|p| p.victim == victim)
            .map(|i| &self.victim_timing[i])
    }

    pub fn severity_of(&self, bank: BankId) -> f64 {
        self.severity[(bank.rank * self.banks_per_rank + bank.bank) as usize]
    }

    pub fn severities(&self) -> &[f64] {
        &self.severity
    }

    /// How many requested victims could not be found.
    pub fn shortfall(&self) -> usize {
        self.requested.saturating_sub(self.pairs.len())
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Ranks banks by mean absolute deviation, makes the `victim_count` worst
/// banks above `threshold` victims and pairs each with the healthiest free
/// bank, preferring its own rank and then the following ranks in turn.
///
/// Returns fewer pairs than requested when not enough banks qualify; see
/// [`VariationMatrix::shortfall`].
pub fn classify_banks(
    map: &VariationMap,
    threshold: f64,
    victim_count: usize,
    nominal: &TimingParams,
    derate: &DerateParams,
) -> Result<VariationMatrix> {
    let fp = map.floorplan();
    let total = fp.bank_count();
    if victim_count * 2 > total {
        return Err(Error::InvalidParameter(format!(
            "victim_count {victim_count} exceeds half of the {total} banks"
        )));
    }
    let severity = map.severities();
    let id = |i: usize| BankId::new(i as u32 / fp.banks, i as u32 % fp.banks);

    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&a, &b| severity[b].total_cmp(&severity[a]).then(a.cmp(&b)));
    let victims: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| severity[i] > threshold)
        .take(victim_count)
        .collect();

    let mut taken = vec![false; total];
    for &v in &victims {
        taken[v] = true;
    }
    let mut pairs = Vec::with_capacity(victims.len());
    for &v in &victims {
        let vrank = v as u32 / fp.banks;
        let healthiest_in = |rank: u32, taken: &[bool]| {
            (0..fp.banks)
                .map(|b| (rank * fp.banks + b) as usize)
                .filter(|&i| !taken[i])
                .min_by(|&a, &b| severity[a].total_cmp(&severity[b]).then(a.cmp(&b)))
        };
        let target = (0..fp.ranks)
            .map(|k| (vrank + k) % fp.ranks)
            .find_map(|rank| healthiest_in(rank, &taken))
            .expect("victim_count <= half the banks leaves a free target");
        taken[target] = true;
        pairs.push(BankPair {
            victim: id(v),
            target: id(target),
        });
    }

    let mut m = VariationMatrix::from_pairs(
        pairs,
        fp.ranks,
        fp.banks,
        Some(severity),
        nominal,
        derate,
    )?;
    m.requested = victim_count;
    Ok(m)
}
