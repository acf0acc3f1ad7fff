use std::path::PathBuf;

use proptest::prelude::*;

use vardram::refresh::RefreshMultiplier;
use vardram::sim::{self, compare, delta_pct, RunReport, ScenarioConfig, ScenarioKind, PRESETS};
use vardram::trace::{generate_synthetic, SyntheticKind};
use vardram::Error;

fn short(name: &str, kind: SyntheticKind, seed: u64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::preset(name).unwrap();
    cfg.synthetic_kind = kind;
    cfg.synthetic.requests = 2000;
    cfg.seed = seed;
    cfg
}

fn default_toml() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml")
}

#[test]
fn every_scenario_runs_every_workload() {
    for (name, kind, lp, reduced) in PRESETS {
        for w in SyntheticKind::ALL {
            let cfg = short(name, w, 3);
            let trace = sim::load_trace(&cfg).unwrap();
            let (r, out) = sim::run_with_trace(&cfg, &trace).unwrap();
            let ctx = format!("{name} on {w}");
            assert_eq!(r.kind, kind, "{ctx}");
            assert_eq!(r.lp_mode, lp, "{ctx}");
            assert_eq!(r.weak_row_remap, reduced, "{ctx}");
            assert_eq!(r.requests.total as usize, trace.len(), "{ctx}");
            assert_eq!(r.gated_bank_commands, 0, "{ctx}");
            assert_eq!(r.read_mismatches, 0, "{ctx}");
            assert_eq!(r.weak_row_violations, 0, "{ctx}");
            assert!(r.energy.total_nj > 0.0 && r.latency.mean_ns > 0.0, "{ctx}");
            assert_eq!(r.banks.len(), 8, "{ctx}");
            assert_eq!(out.reads + out.writes, trace.len() as u64, "{ctx}");
            if kind == ScenarioKind::Ideal {
                assert!(r.banks.iter().all(|b| b.role == "normal" && b.gated_ns == 0.0), "{ctx}");
            }
            if !lp {
                assert_eq!(r.lp_entries, 0, "{ctx}");
            }
        }
    }
}

#[test]
fn gating_needs_var() {
    let trace = generate_synthetic(SyntheticKind::Uniform, &Default::default(), &Default::default(), 1).unwrap();
    for name in ["IDEAL", "PV", "VAR"] {
        let r = sim::run_with_trace(&ScenarioConfig::preset(name).unwrap(), &trace).unwrap().0;
        let gated: f64 = r.banks.iter().map(|b| b.gated_ns).sum();
        assert_eq!(gated > 0.0, name == "VAR", "{name}");
        assert_eq!(r.energy.controller_nj > 0.0, name == "VAR", "{name}");
    }
}

#[test]
fn report_energy_reconciles_with_bank_rows() {
    let r = sim::run(&short("VAR-LP", SyntheticKind::IdleHeavy, 5)).unwrap();
    let rows: f64 = r.banks.iter().map(|b| b.total_nj).sum();
    assert!((rows + r.energy.controller_nj - r.energy.total_nj).abs() < 1e-6 * r.energy.total_nj);
    for b in &r.banks {
        let parts = b.background_nj + b.act_pre_nj + b.burst_nj + b.refresh_nj + b.odt_nj + b.overhead_nj;
        assert!((parts - b.total_nj).abs() <= 1e-9 * b.total_nj.max(1.0));
        let resid = b.active_idle_ns + b.row_open_ns + b.powered_down_ns + b.gated_ns;
        assert!((resid - r.span_ns).abs() < 1e-6, "bank {} residency {resid} vs span {}", b.index, r.span_ns);
    }
}

#[test]
fn comparing_a_report_with_itself_gives_zero_deltas() {
    let r = sim::run(&short("VAR", SyntheticKind::Hotspot, 2)).unwrap();
    let c = compare(&r, &r).unwrap();
    assert!(c.rows.iter().all(|row| row.delta_pct == Some(0.0)), "{c:?}");
    assert_eq!(c.energy_savings_pct(), Some(-0.0));
}

#[test]
fn comparisons_require_the_same_trace() {
    let a = sim::run(&short("VAR", SyntheticKind::Uniform, 1)).unwrap();
    let b = sim::run(&short("PV", SyntheticKind::Uniform, 2)).unwrap();
    assert!(matches!(compare(&a, &b), Err(Error::Mismatch(_))));
    assert_eq!(delta_pct(0.0, 0.0), Some(0.0));
    assert_eq!(delta_pct(0.0, 1.0), None);
    assert_eq!(delta_pct(200.0, 150.0), Some(-25.0));
}

#[test]
fn reports_roundtrip_through_json_and_csv() {
    let r = sim::run(&short("VAR-N-R", SyntheticKind::Uniform, 4)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (json, csv) = r.write_to_dir(dir.path()).unwrap();
    assert_eq!(json.file_name().unwrap(), "VAR-N-R.json");
    assert_eq!(RunReport::load(&json).unwrap(), r);
    let text = std::fs::read_to_string(csv).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("index,channel,rank,bank,role"));
    assert_eq!(lines.count(), 8);
    let bumped = r.to_json().unwrap().replacen("\"schema_version\": 1", "\"schema_version\": 99", 1);
    assert!(RunReport::from_json(&bumped).is_err());
}

#[test]
fn translation_stalls_are_three_cycles_per_redirect() {
    for name in ["VAR", "VAR-N-R", "VAR-LP-R"] {
        for kind in [SyntheticKind::CollisionStress, SyntheticKind::Uniform] {
            let r = sim::run(&short(name, kind, 6)).unwrap();
            let s = &r.remap.unwrap().stats;
            assert!(s.translation_stall_cycles <= 6 * (s.interrupts + s.weak_row_accesses));
            assert_eq!(s.translation_stall_cycles, 3 * (s.interrupts + s.weak_row_accesses), "{name} {kind}");
        }
    }
}

#[test]
fn four_times_window_cuts_refresh_by_three_quarters() {
    let mut one = short("VAR-N-R", SyntheticKind::Uniform, 8);
    one.refresh.multiplier = RefreshMultiplier::X1;
    one.run_length_ns = 10e6;
    let mut four = one.clone();
    four.refresh.multiplier = RefreshMultiplier::X4;
    let (a, b) = (sim::run(&one).unwrap(), sim::run(&four).unwrap());
    let c = compare(&a, &b).unwrap();
    let d = c.row("refresh.count").unwrap().delta_pct.unwrap();
    // within one command of rounding
    let one_cmd = 100.0 / a.refresh.count as f64;
    assert!((d + 75.0).abs() <= one_cmd, "delta {d}");
    assert!(b.refresh.count > 0);
}

#[test]
fn reduced_refresh_remaps_weak_rows() {
    let r = sim::run(&short("VAR-N-R", SyntheticKind::Uniform, 42)).unwrap();
    let m = r.remap.unwrap();
    assert!(m.weak_rows > 0);
    assert_eq!(m.row_copies as usize, m.weak_rows);
    assert!(m.upfront_ns > 0.0);
    assert!(m.weak_trie.keys == m.weak_rows);
    assert_eq!(r.weak_row_violations, 0);
}

#[test]
fn low_power_mode_saves_energy_on_idle_workloads() {
    let pv = sim::run(&short("PV", SyntheticKind::IdleHeavy, 3)).unwrap();
    let lp = sim::run(&short("PV-LP", SyntheticKind::IdleHeavy, 3)).unwrap();
    assert!(lp.lp_entries > 0);
    assert!(lp.energy.total_nj < pv.energy.total_nj);
}

#[test]
fn default_config_file_matches_the_builtin_presets() {
    for (name, ..) in PRESETS {
        let from_file = ScenarioConfig::load(&default_toml(), Some(name)).unwrap();
        assert_eq!(from_file, ScenarioConfig::preset(name).unwrap(), "{name}");
    }
}

#[test]
fn scenario_tables_override_presets() {
    let text = "seed = 9\n[scenarios.mine]\nkind = \"PV\"\nlp_mode = true\n[scenarios.mine.geometry]\nrows_per_bank = 1024\n";
    let cfg = ScenarioConfig::from_toml_str(text, Some("mine")).unwrap();
    assert_eq!((cfg.kind, cfg.lp_mode, cfg.seed, cfg.geometry.rows_per_bank), (ScenarioKind::Pv, true, 9, 1024));
    assert!(ScenarioConfig::from_toml_str(text, Some("nope")).is_err());
    assert!(ScenarioConfig::from_toml_str("bogus = 1", None).is_err());
    assert!(ScenarioConfig::from_toml_str("[geometry]\nrows_per_bank = 1000", None).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn runs_are_deterministic(seed in any::<u64>(), k in 0usize..4, p in 0usize..8) {
        let cfg = short(PRESETS[p].0, SyntheticKind::ALL[k], seed);
        let a = sim::run(&cfg).unwrap().to_json().unwrap();
        let b = sim::run(&cfg).unwrap().to_json().unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn var_never_serves_a_gated_bank(seed in any::<u64>(), gate in 0u64..50_000, reopen in proptest::option::of(0u64..200_000)) {
        let mut cfg = short("VAR", SyntheticKind::CollisionStress, seed);
        cfg.gating_mode = vardram::sim::GatingMode::DynamicClose;
        cfg.dynamic_trigger_cycle = gate;
        cfg.reopen_at_cycle = reopen;
        let r = sim::run(&cfg).unwrap();
        prop_assert_eq!(r.gated_bank_commands, 0);
        prop_assert_eq!(r.read_mismatches, 0);
    }
}
