//! Run reports (JSON and per-bank CSV) and baseline comparison.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{GatingMode, ScenarioConfig, ScenarioKind};
use super::controller::{SimOutcome, TriggerRecord};
use crate::dram::{Geometry, Picos, PowerState};
use crate::energy::{energy_report, EnergyBreakdown};
use crate::refresh::RefreshMultiplier;
use crate::remap::{PairState, RemapStats, TrieStats};
use crate::trace::{Fnv, MemoryRequest};
use crate::variation::VariationMatrix;
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestSummary {
    pub reads: u64,
    pub writes: u64,
    pub total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub mean_ns: f64,
    pub max_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefreshSummary {
    /// Refresh commands over all ranks (bank commands in per-bank mode).
    pub count: u64,
    pub per_rank: Vec<u64>,
    /// Individual bank refresh operations.
    pub bank_operations: u64,
}

/// One CSV row per bank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankRow {
    pub index: usize,
    pub channel: u32,
    pub rank: u32,
    pub bank: u32,
    /// `victim`, `target` or `normal`.
    pub role: String,
    pub t_ras_ns: f64,
    pub severity: f64,
    pub active_idle_ns: f64,
    pub row_open_ns: f64,
    pub powered_down_ns: f64,
    pub gated_ns: f64,
    pub acts: u64,
    pub read_bursts: u64,
    pub write_bursts: u64,
    pub refreshes: u64,
    pub copy_acts: u64,
    pub copy_read_bursts: u64,
    pub copy_write_bursts: u64,
    pub transients: u64,
    pub occupancy: u64,
    pub background_nj: f64,
    pub act_pre_nj: f64,
    pub burst_nj: f64,
    pub refresh_nj: f64,
    pub odt_nj: f64,
    pub overhead_nj: f64,
    pub total_nj: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub victim: usize,
    pub target: usize,
    pub state: PairState,
    pub reopened: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemapSummary {
    /// Final FLAG value as two bits.
    pub flag: String,
    pub pairs: Vec<PairRow>,
    pub stats: RemapStats,
    pub primary_trie: TrieStats,
    pub aux_trie: TrieStats,
    pub weak_trie: TrieStats,
    /// Peak storage of the primary and auxiliary tries together.
    pub trie_peak_bytes: u64,
    pub write_log_peak: usize,
    pub copies: u64,
    pub row_copies: u64,
    pub migration_bytes: u64,
    /// Migration bytes over what the channels could move during the span.
    pub bandwidth_fraction: f64,
    pub migration_stall_ns: f64,
    pub copy_busy_ns: f64,
    pub triggers: Vec<TriggerRecord>,
    pub weak_rows: usize,
    pub upfront_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub label: String,
    pub kind: ScenarioKind,
    pub lp_mode: bool,
    pub refresh_multiplier: RefreshMultiplier,
    pub weak_row_remap: bool,
    pub gating_mode: GatingMode,
    pub seed: u64,
    pub trace_fingerprint: String,
    pub geometry_fingerprint: String,
    pub requests: RequestSummary,
    pub latency: LatencySummary,
    pub span_cycles: u64,
    pub span_ns: f64,
    pub refresh: RefreshSummary,
    pub lp_entries: u64,
    pub energy: EnergyBreakdown,
    pub banks: Vec<BankRow>,
    /// Commands that reached a gated bank; always 0 in a correct run.
    pub gated_bank_commands: u64,
    pub weak_row_violations: u64,
    /// Reads that did not observe the latest write to their address.
    pub read_mismatches: u64,
    pub remap: Option<RemapSummary>,
}

fn ns(ps: Picos) -> f64 {
    ps as f64 / 1000.0
}

pub fn geometry_fingerprint(g: &Geometry) -> u64 {
    let mut h = Fnv::new();
    for v in [
        g.channels,
        g.ranks_per_channel,
        g.banks_per_rank,
        g.rows_per_bank,
        g.cols_per_row,
        g.bytes_per_column,
    ] {
        h.write(&v.to_le_bytes());
    }
    h.finish()
}

pub(crate) fn build_report(
    cfg: &ScenarioConfig,
    matrix: &VariationMatrix,
    trace: &[MemoryRequest],
    o: &SimOutcome,
) -> RunReport {
    let g = &cfg.geometry;
    let t = cfg.timing_params();
    let energy = energy_report(
        &cfg.energy,
        g.banks_per_rank,
        &o.activity,
        o.span_end,
        cfg.kind == ScenarioKind::Var,
    );
    let victims: Vec<usize> = (0..g.channels)
        .flat_map(|ch| matrix.pairs().iter().map(move |p| g.bank_index(ch, p.victim)))
        .collect();
    let targets: Vec<usize> = (0..g.channels)
        .flat_map(|ch| matrix.pairs().iter().map(move |p| g.bank_index(ch, p.target)))
        .collect();
    let banks = (0..g.total_banks())
        .map(|i| {
            let (channel, id) = g.bank_of_index(i);
            let a = &o.activity[i];
            let e = &energy.per_bank[i];
            let role = if victims.contains(&i) {
                "victim"
            } else if targets.contains(&i) {
                "target"
            } else {
                "normal"
            };
            BankRow {
                index: i,
                channel,
                rank: id.rank,
                bank: id.bank,
                role: role.into(),
                t_ras_ns: ns(o.banks[i].timing.t_ras),
                severity: matrix.severity_of(id),
                active_idle_ns: ns(a.residency.get(PowerState::ActiveIdle)),
                row_open_ns: ns(a.residency.get(PowerState::RowOpen)),
                powered_down_ns: ns(a.residency.get(PowerState::PoweredDownLp)),
                gated_ns: ns(a.residency.get(PowerState::GatedOff)),
                acts: a.acts,
                read_bursts: a.read_bursts,
                write_bursts: a.write_bursts,
                refreshes: a.refreshes,
                copy_acts: a.copy_acts,
                copy_read_bursts: a.copy_read_bursts,
                copy_write_bursts: a.copy_write_bursts,
                transients: a.transients,
                occupancy: o.banks[i].occupancy,
                background_nj: e.background_nj,
                act_pre_nj: e.act_pre_nj,
                burst_nj: e.burst_nj,
                refresh_nj: e.refresh_nj,
                odt_nj: e.odt_nj,
                overhead_nj: e.overhead_nj,
                total_nj: e.total(),
            }
        })
        .collect();
    let total = o.reads + o.writes;
    let remap = o.engine.as_ref().map(|e| {
        let (p, a) = (e.primary_stats(), e.aux_stats());
        let migration_bytes = o.inter_bank_columns * g.bytes_per_column as u64;
        // every channel moves one column per burst slot at peak
        let peak = if o.span_end == 0 {
            0.0
        } else {
            g.channels as f64 * g.bytes_per_column as f64 * o.span_end as f64
                / (t.read_burst_time().max(1) as f64)
        };
        RemapSummary {
            flag: e.flag().to_string(),
            pairs: e
                .pairs()
                .iter()
                .map(|p| PairRow {
                    victim: p.victim,
                    target: p.target,
                    state: p.state,
                    reopened: p.reopened,
                })
                .collect(),
            stats: e.stats().clone(),
            primary_trie: p,
            aux_trie: a,
            weak_trie: e.weak_trie_stats(),
            trie_peak_bytes: p.peak_bytes + a.peak_bytes,
            write_log_peak: e.write_log().peak(),
            copies: o.copies,
            row_copies: o.row_copies,
            migration_bytes,
            bandwidth_fraction: if peak > 0.0 { migration_bytes as f64 / peak } else { 0.0 },
            migration_stall_ns: ns(o.migration_stall),
            copy_busy_ns: ns(o.copy_busy),
            triggers: o.triggers.clone(),
            weak_rows: e.weak_row_count(),
            upfront_ns: ns(o.upfront),
        }
    });
    RunReport {
        schema_version: SCHEMA_VERSION,
        label: cfg.scenario.clone(),
        kind: cfg.kind,
        lp_mode: cfg.lp_mode,
        refresh_multiplier: cfg.refresh.multiplier,
        weak_row_remap: cfg.weak_row_remap,
        gating_mode: cfg.gating_mode,
        seed: cfg.seed,
        trace_fingerprint: format!("{:016x}", crate::trace::fingerprint(trace)),
        geometry_fingerprint: format!("{:016x}", geometry_fingerprint(g)),
        requests: RequestSummary {
            reads: o.reads,
            writes: o.writes,
            total,
        },
        latency: LatencySummary {
            mean_ns: if total == 0 {
                0.0
            } else {
                o.latency_sum as f64 / total as f64 / 1000.0
            },
            max_ns: ns(o.latency_max),
        },
        span_cycles: o.span_end / t.t_ck,
        span_ns: ns(o.span_end),
        refresh: RefreshSummary {
            count: o.refresh_per_rank.iter().sum(),
            per_rank: o.refresh_per_rank.clone(),
            bank_operations: o.bank_refreshes,
        },
        lp_entries: o.lp_entries,
        energy,
        banks,
        gated_bank_commands: o.gated_bank_commands,
        weak_row_violations: o.weak_row_violations,
        read_mismatches: o.read_mismatches,
        remap,
    }
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: RunReport = serde_json::from_str(text)?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(Error::Mismatch(format!(
                "report schema {} is not supported (expected {SCHEMA_VERSION})",
                r.schema_version
            )));
        }
        Ok(r)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut c = csv::Writer::from_writer(w);
        for row in &self.banks {
            c.serialize(row)?;
        }
        c.flush()?;
        Ok(())
    }

    /// Writes `<label>.json` and `<label>.banks.csv` into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir)?;
        let json = dir.join(format!("{}.json", self.label));
        let csv_path = dir.join(format!("{}.banks.csv", self.label));
        fs::write(&json, self.to_json()?)?;
        self.write_csv(fs::File::create(&csv_path)?)?;
        Ok((json, csv_path))
    }
}

/// One compared metric. `delta_pct` is `(candidate - baseline) / baseline`
/// in percent; it is absent when the baseline is 0 and the candidate is not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub metric: String,
    pub baseline: f64,
    pub candidate: f64,
    pub delta_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline: String,
    pub candidate: String,
    pub rows: Vec<DeltaRow>,
}

pub fn delta_pct(baseline: f64, candidate: f64) -> Option<f64> {
    if baseline == 0.0 {
        (candidate == 0.0).then_some(0.0)
    } else {
        Some((candidate - baseline) / baseline * 100.0)
    }
}

/// Per-component energy, latency, refresh and span deltas of `candidate`
/// relative to `baseline`. Both must come from the same trace and geometry.
pub fn compare(baseline: &RunReport, candidate: &RunReport) -> Result<Comparison> {
    if baseline.trace_fingerprint != candidate.trace_fingerprint {
        return Err(Error::Mismatch(format!(
            "trace fingerprints differ ({} vs {})",
            baseline.trace_fingerprint, candidate.trace_fingerprint
        )));
    }
    if baseline.geometry_fingerprint != candidate.geometry_fingerprint {
        return Err(Error::Mismatch(format!(
            "geometry fingerprints differ ({} vs {})",
            baseline.geometry_fingerprint, candidate.geometry_fingerprint
        )));
    }
    let mut rows = Vec::new();
    let mut push = |m: &str, b: f64, c: f64| {
        rows.push(DeltaRow {
            metric: m.into(),
            baseline: b,
            candidate: c,
            delta_pct: delta_pct(b, c),
        })
    };
    let (be, ce) = (&baseline.energy, &candidate.energy);
    for ((name, b), (_, c)) in be.components.components().into_iter().zip(ce.components.components()) {
        push(&format!("energy.{name}"), b, c);
    }
    push("energy.controller_nj", be.controller_nj, ce.controller_nj);
    push("energy.total_nj", be.total_nj, ce.total_nj);
    push("latency.mean_ns", baseline.latency.mean_ns, candidate.latency.mean_ns);
    push("latency.max_ns", baseline.latency.max_ns, candidate.latency.max_ns);
    push("refresh.count", baseline.refresh.count as f64, candidate.refresh.count as f64);
    push("span_cycles", baseline.span_cycles as f64, candidate.span_cycles as f64);
    Ok(Comparison {
        baseline: baseline.label.clone(),
        candidate: candidate.label.clone(),
        rows,
    })
}

impl Comparison {
    pub fn row(&self, metric: &str) -> Option<&DeltaRow> {
        self.rows.iter().find(|r| r.metric == metric)
    }

    /// Energy saved by the candidate, in percent of the baseline total.
    pub fn energy_savings_pct(&self) -> Option<f64> {
        self.row("energy.total_nj").and_then(|r| r.delta_pct).map(|d| -d)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("baseline: {}  candidate: {}\n", self.baseline, self.candidate);
        let _ = writeln!(s, "{:<24} {:>16} {:>16} {:>10}", "metric", "baseline", "candidate", "delta %");
        for r in &self.rows {
            let d = r.delta_pct.map_or("n/a".to_string(), |d| format!("{d:+.3}"));
            let _ = writeln!(s, "{:<24} {:>16.4} {:>16.4} {:>10}", r.metric, r.baseline, r.candidate, d);
        }
        s
    }
}
