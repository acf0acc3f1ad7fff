//! Scenario orchestration: configuration, the controller and reports.
//!
//! [`run`] builds the variation map (unless IDEAL), classifies banks,
//! replays the trace through the controller with remapping where the
//! scenario needs it, and turns the outcome into a [`RunReport`].

pub mod config;
pub mod controller;
pub mod report;

pub use config::{
    DerateConfig, ForcedPair, GatingMode, LpConfig, RemapConfig, ScenarioConfig, ScenarioKind,
    TimingConfig, VariationConfig, PRESETS,
};
pub use controller::{Controller, ControllerParams, SimOutcome, TriggerRecord};
pub use report::{
    compare, delta_pct, geometry_fingerprint, BankRow, Comparison, DeltaRow, RunReport, SCHEMA_VERSION,
};

use std::fs::File;
use std::io::BufReader;

use crate::dram::BankId;
use crate::refresh::{read_weak_rows, sample_weak_rows, weak_row_probability};
use crate::remap::RemapEngine;
use crate::trace::{generate_synthetic, read_trace_file, MemoryRequest, SyntheticKind, SyntheticParams};
use crate::variation::{
    classify_banks, generate_variation_map, BankPair, Floorplan, VariationMap, VariationMatrix,
};
use crate::{Error, Result};

/// Mixed into the master seed for weak-row sampling.
const WEAK_ROW_SEED_SALT: u64 = 0x5745_414b_524f_5753;

/// The variation map of a config: read from `variation_map` or sampled.
pub fn variation_map(cfg: &ScenarioConfig) -> Result<VariationMap> {
    if let Some(path) = &cfg.variation_map {
        return VariationMap::read_from(BufReader::new(File::open(path)?));
    }
    let v = &cfg.variation;
    let plan = Floorplan::tiled(
        cfg.geometry.ranks_per_channel,
        cfg.geometry.banks_per_rank,
        v.grid_rows,
        v.grid_cols,
    )?;
    generate_variation_map(&v.params(cfg.seed), v.grid_rows, v.grid_cols, plan)
}

/// Victim/target pairing as if variation were present, whatever the
/// scenario kind (forced pairs win over classification).
pub fn classified_matrix(cfg: &ScenarioConfig) -> Result<VariationMatrix> {
    let nominal = cfg.timing_params();
    let derate = cfg.derate.params();
    let map = variation_map(cfg)?;
    if map.floorplan().ranks != cfg.geometry.ranks_per_channel
        || map.floorplan().banks != cfg.geometry.banks_per_rank
    {
        return Err(Error::Config("variation map floorplan does not match the geometry".into()));
    }
    match &cfg.forced_pairs {
        Some(fp) => {
            let pairs = fp
                .iter()
                .map(|p| BankPair {
                    victim: BankId::new(p.victim_rank, p.victim_bank),
                    target: BankId::new(p.target_rank, p.target_bank),
                })
                .collect();
            VariationMatrix::from_pairs(
                pairs,
                cfg.geometry.ranks_per_channel,
                cfg.geometry.banks_per_rank,
                Some(map.severities()),
                &nominal,
                &derate,
            )
        }
        None => classify_banks(&map, cfg.severity_threshold, cfg.victim_count, &nominal, &derate),
    }
}

/// The matrix a run uses: empty for IDEAL.
pub fn variation_matrix(cfg: &ScenarioConfig) -> Result<VariationMatrix> {
    match cfg.kind {
        ScenarioKind::Ideal => Ok(VariationMatrix::empty(
            cfg.geometry.ranks_per_channel,
            cfg.geometry.banks_per_rank,
        )),
        _ => classified_matrix(cfg),
    }
}

/// Weak rows for reduced refresh: read from the profile file or sampled.
pub fn weak_rows(cfg: &ScenarioConfig) -> Result<Vec<u64>> {
    if let Some(path) = &cfg.refresh.weak_row_file {
        return read_weak_rows(BufReader::new(File::open(path)?), &cfg.geometry);
    }
    let p = weak_row_probability(cfg.refresh.ber, cfg.geometry.cells_per_row())?;
    sample_weak_rows(&cfg.geometry, p, cfg.seed ^ WEAK_ROW_SEED_SALT)
}

/// Generator parameters with the collision banks filled in from the first
/// classified pair when the config leaves them unset.
pub fn synthetic_params(cfg: &ScenarioConfig, kind: SyntheticKind) -> Result<SyntheticParams> {
    let mut p = cfg.synthetic.clone();
    if kind == SyntheticKind::CollisionStress && (p.victim_bank.is_none() || p.target_bank.is_none()) {
        let m = classified_matrix(cfg)?;
        let first = m.pairs().first().ok_or_else(|| {
            Error::Config("collision_stress needs a victim/target pair; none was classified".into())
        })?;
        p.victim_bank.get_or_insert(cfg.geometry.bank_index(0, first.victim));
        p.target_bank.get_or_insert(cfg.geometry.bank_index(0, first.target));
    }
    Ok(p)
}

/// The trace of a config: the `trace` file, or a synthetic trace.
pub fn load_trace(cfg: &ScenarioConfig) -> Result<Vec<MemoryRequest>> {
    match &cfg.trace {
        Some(path) => read_trace_file(path),
        None => {
            let p = synthetic_params(cfg, cfg.synthetic_kind)?;
            generate_synthetic(cfg.synthetic_kind, &p, &cfg.geometry, cfg.seed)
        }
    }
}

/// Everything [`run_prepared`] needs besides the trace.
pub struct Prepared {
    pub matrix: VariationMatrix,
    pub controller: Controller,
}

/// Builds the controller (and engine) for a config.
pub fn prepare(cfg: &ScenarioConfig) -> Result<Prepared> {
    cfg.validate()?;
    let g = cfg.geometry;
    let nominal = cfg.timing_params();
    let matrix = variation_matrix(cfg)?;
    let mut timing = vec![nominal; g.total_banks()];
    for ch in 0..g.channels {
        for p in matrix.pairs() {
            if let Some(t) = matrix.victim_timing(p.victim) {
                timing[g.bank_index(ch, p.victim)] = *t;
            }
        }
    }
    let engine = if cfg.uses_engine() {
        let pairs = if cfg.kind == ScenarioKind::Var {
            matrix.clone()
        } else {
            VariationMatrix::empty(g.ranks_per_channel, g.banks_per_rank)
        };
        Some(RemapEngine::new(g, &pairs, cfg.remap.params())?)
    } else {
        None
    };
    let gate_at = match (cfg.kind, cfg.gating_mode) {
        (ScenarioKind::Var, GatingMode::StaticClose) => Some(0),
        (ScenarioKind::Var, GatingMode::DynamicClose) => Some(cfg.dynamic_trigger_cycle * nominal.t_ck),
        _ => None,
    };
    let params = ControllerParams {
        lp_mode: cfg.lp_mode,
        lp_threshold: cfg.lp.idle_threshold_cycles * nominal.t_ck,
        refresh_period: cfg.refresh.period(&nominal),
        per_bank_refresh: cfg.refresh.per_bank,
        copy_cost: cfg.remap.copy_cost(&nominal),
        row_copy_cost: cfg.remap.row_copy_cost(&nominal),
        check_interval: cfg.remap.check_interval_cycles * nominal.t_ck,
        gate_at,
        reopen_at: cfg.reopen_at_cycle.map(|c| c * nominal.t_ck),
        run_min: cfg.run_length(),
        extended_refresh: cfg.refresh.multiplier.factor() > 1,
    };
    let mut controller = Controller::new(g, nominal, timing, params, engine)?;
    if cfg.weak_row_remap {
        controller.install_weak_rows(&weak_rows(cfg)?)?;
    }
    Ok(Prepared { matrix, controller })
}

/// Runs a config on an explicit trace.
pub fn run_with_trace(cfg: &ScenarioConfig, trace: &[MemoryRequest]) -> Result<(RunReport, SimOutcome)> {
    let Prepared { matrix, controller } = prepare(cfg)?;
    let outcome = controller.run(trace)?;
    let report = report::build_report(cfg, &matrix, trace, &outcome);
    Ok((report, outcome))
}

/// Runs a config end to end on its own trace.
pub fn run(cfg: &ScenarioConfig) -> Result<RunReport> {
    let trace = load_trace(cfg)?;
    Ok(run_with_trace(cfg, &trace)?.0)
}
