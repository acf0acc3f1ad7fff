//! Scenario configuration: one TOML file, built-in scenario presets and
//! per-scenario override tables.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dram::{Geometry, Picos, TimingParams};
use crate::energy::DeviceEnergyProfile;
use crate::refresh::{RefreshConfig, RefreshMultiplier};
use crate::remap::RemapParams;
use crate::trace::{SyntheticKind, SyntheticParams};
use crate::variation::{DerateParams, VariationParams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioKind {
    /// No variation: every bank runs at nominal timing.
    #[serde(rename = "IDEAL")]
    Ideal,
    /// Variation present, victims run derated and stay powered.
    #[serde(rename = "PV")]
    Pv,
    /// Victims are drained into their targets and power gated.
    #[serde(rename = "VAR")]
    Var,
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioKind::Ideal => "IDEAL",
            ScenarioKind::Pv => "PV",
            ScenarioKind::Var => "VAR",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GatingMode {
    /// Gate at cycle 0 from a manufacturer-supplied map.
    #[default]
    StaticClose,
    /// Gate at `dynamic_trigger_cycle`, after the map is sensed at runtime.
    DynamicClose,
}

impl FromStr for GatingMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "static_close" => Ok(GatingMode::StaticClose),
            "dynamic_close" => Ok(GatingMode::DynamicClose),
            o => Err(Error::Config(format!("unknown gating mode '{o}'"))),
        }
    }
}

/// Built-in scenario names and what they select:
/// (name, kind, lp_mode, reduced refresh with weak-row remap).
pub const PRESETS: [(&str, ScenarioKind, bool, bool); 8] = [
    ("IDEAL", ScenarioKind::Ideal, false, false),
    ("PV", ScenarioKind::Pv, false, false),
    ("VAR", ScenarioKind::Var, false, false),
    ("ID-LP", ScenarioKind::Ideal, true, false),
    ("PV-LP", ScenarioKind::Pv, true, false),
    ("VAR-LP", ScenarioKind::Var, true, false),
    ("VAR-N-R", ScenarioKind::Var, false, true),
    ("VAR-LP-R", ScenarioKind::Var, true, true),
];

/// Timing in nanoseconds as written in the config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingConfig {
    pub t_ck_ns: f64,
    pub t_ras_ns: f64,
    pub t_rp_ns: f64,
    pub t_refi_ns: f64,
    pub t_refw_ns: f64,
    pub t_rfc_ns: f64,
    pub t_xp_ns: f64,
    pub read_burst: u32,
    pub write_burst: u32,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            t_ck_ns: 1.25,
            t_ras_ns: 32.0,
            t_rp_ns: 13.75,
            t_refi_ns: 7812.5,
            t_refw_ns: 64e6,
            t_rfc_ns: 350.0,
            t_xp_ns: 7.5,
            read_burst: 4,
            write_burst: 4,
        }
    }
}

pub(crate) fn ns_to_ps(ns: f64) -> Picos {
    (ns * 1000.0).round() as Picos
}

impl TimingConfig {
    pub fn to_params(&self) -> Result<TimingParams> {
        for (name, v) in [
            ("t_ck_ns", self.t_ck_ns),
            ("t_ras_ns", self.t_ras_ns),
            ("t_rp_ns", self.t_rp_ns),
            ("t_refi_ns", self.t_refi_ns),
            ("t_refw_ns", self.t_refw_ns),
            ("t_rfc_ns", self.t_rfc_ns),
            ("t_xp_ns", self.t_xp_ns),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("timing.{name} must be a non-negative number")));
            }
        }
        let t = TimingParams {
            t_ras: ns_to_ps(self.t_ras_ns),
            t_rp: ns_to_ps(self.t_rp_ns),
            t_rc: ns_to_ps(self.t_ras_ns) + ns_to_ps(self.t_rp_ns),
            t_ck: ns_to_ps(self.t_ck_ns),
            t_refi: ns_to_ps(self.t_refi_ns),
            t_refw: ns_to_ps(self.t_refw_ns),
            t_rfc: ns_to_ps(self.t_rfc_ns),
            t_xp: ns_to_ps(self.t_xp_ns),
            read_burst: self.read_burst,
            write_burst: self.write_burst,
        };
        t.validate()?;
        Ok(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariationConfig {
    pub mean: f64,
    pub sigma_over_mean: f64,
    pub systematic_fraction: f64,
    pub phi: f64,
    pub grid_rows: usize,
    pub grid_cols: usize,
}

impl Default for VariationConfig {
    fn default() -> Self {
        let p = VariationParams::default();
        Self {
            mean: p.mean,
            sigma_over_mean: p.sigma_over_mean,
            systematic_fraction: p.systematic_fraction,
            phi: p.phi,
            grid_rows: 32,
            grid_cols: 32,
        }
    }
}

impl VariationConfig {
    pub fn params(&self, seed: u64) -> VariationParams {
        VariationParams {
            mean: self.mean,
            sigma_over_mean: self.sigma_over_mean,
            systematic_fraction: self.systematic_fraction,
            phi: self.phi,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DerateConfig {
    pub delta_t_ras_max_ns: f64,
    pub severity_max: f64,
}

impl Default for DerateConfig {
    fn default() -> Self {
        Self {
            delta_t_ras_max_ns: 18.0,
            severity_max: 0.1,
        }
    }
}

impl DerateConfig {
    pub fn params(&self) -> DerateParams {
        DerateParams {
            delta_t_ras_max: ns_to_ps(self.delta_t_ras_max_ns),
            severity_max: self.severity_max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemapConfig {
    pub trie_capacity_fraction: f64,
    pub primary_node_bytes: u64,
    pub aux_node_bytes: u64,
    pub occupancy_threshold: f64,
    pub trie_threshold: f64,
    /// Cycles between background occupancy checks.
    pub check_interval_cycles: u64,
    /// Cost of one column copy; unset means 2 bursts + tRC.
    pub copy_cost_ns: Option<f64>,
    /// Cost of one whole-row copy; unset means 2 tRC.
    pub row_copy_cost_ns: Option<f64>,
}

impl Default for RemapConfig {
    fn default() -> Self {
        let p = RemapParams::default();
        Self {
            trie_capacity_fraction: p.trie_capacity_fraction,
            primary_node_bytes: p.primary_node_bytes,
            aux_node_bytes: p.aux_node_bytes,
            occupancy_threshold: p.occupancy_threshold,
            trie_threshold: p.trie_threshold,
            check_interval_cycles: 10_000,
            copy_cost_ns: None,
            row_copy_cost_ns: None,
        }
    }
}

impl RemapConfig {
    pub fn params(&self) -> RemapParams {
        RemapParams {
            trie_capacity_fraction: self.trie_capacity_fraction,
            primary_node_bytes: self.primary_node_bytes,
            aux_node_bytes: self.aux_node_bytes,
            occupancy_threshold: self.occupancy_threshold,
            trie_threshold: self.trie_threshold,
        }
    }

    pub fn copy_cost(&self, t: &TimingParams) -> Picos {
        match self.copy_cost_ns {
            Some(ns) => ns_to_ps(ns),
            None => t.read_burst_time() + t.write_burst_time() + t.t_rc,
        }
    }

    pub fn row_copy_cost(&self, t: &TimingParams) -> Picos {
        match self.row_copy_cost_ns {
            Some(ns) => ns_to_ps(ns),
            None => 2 * t.t_rc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LpConfig {
    /// Idle cycles with empty queues before a rank powers down.
    pub idle_threshold_cycles: u64,
}

impl Default for LpConfig {
    fn default() -> Self {
        Self {
            idle_threshold_cycles: 100,
        }
    }
}

/// A victim/target assignment given explicitly instead of by classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcedPair {
    pub victim_rank: u32,
    pub victim_bank: u32,
    pub target_rank: u32,
    pub target_bank: u32,
}

/// Everything one run needs, after preset and override resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Scenario label; a built-in preset name or a `[scenarios.*]` table.
    pub scenario: String,
    pub kind: ScenarioKind,
    pub lp_mode: bool,
    pub weak_row_remap: bool,
    pub gating_mode: GatingMode,
    pub dynamic_trigger_cycle: u64,
    /// Reopens every gated bank at this cycle.
    pub reopen_at_cycle: Option<u64>,
    /// Master seed: variation map, weak rows and synthetic traces.
    pub seed: u64,
    pub victim_count: usize,
    pub severity_threshold: f64,
    /// Minimum simulated time; the run also covers the whole trace.
    pub run_length_ns: f64,
    /// Trace file; without one a synthetic trace of `synthetic_kind` is used.
    pub trace: Option<PathBuf>,
    pub synthetic_kind: SyntheticKind,
    pub forced_pairs: Option<Vec<ForcedPair>>,
    /// Variation map file; without one a map is sampled.
    pub variation_map: Option<PathBuf>,
    pub geometry: Geometry,
    pub timing: TimingConfig,
    pub energy: DeviceEnergyProfile,
    pub variation: VariationConfig,
    pub derate: DerateConfig,
    pub remap: RemapConfig,
    pub refresh: RefreshConfig,
    pub lp: LpConfig,
    pub synthetic: SyntheticParams,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario: "VAR".into(),
            kind: ScenarioKind::Var,
            lp_mode: false,
            weak_row_remap: false,
            gating_mode: GatingMode::StaticClose,
            dynamic_trigger_cycle: 0,
            reopen_at_cycle: None,
            seed: 42,
            victim_count: 4,
            severity_threshold: 0.02,
            run_length_ns: 0.0,
            trace: None,
            synthetic_kind: SyntheticKind::Uniform,
            forced_pairs: None,
            variation_map: None,
            geometry: Geometry::default(),
            timing: TimingConfig::default(),
            energy: DeviceEnergyProfile::default(),
            variation: VariationConfig::default(),
            derate: DerateConfig::default(),
            remap: RemapConfig::default(),
            refresh: RefreshConfig::default(),
            lp: LpConfig::default(),
            synthetic: SyntheticParams::default(),
        }
    }
}

fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn preset_table(name: &str) -> Option<toml::Value> {
    let &(_, kind, lp, reduced) = PRESETS.iter().find(|p| p.0 == name)?;
    let mut t = toml::Table::new();
    t.insert("kind".into(), toml::Value::String(kind.to_string()));
    t.insert("lp_mode".into(), toml::Value::Boolean(lp));
    t.insert("weak_row_remap".into(), toml::Value::Boolean(reduced));
    let mut r = toml::Table::new();
    let m = if reduced { "4x" } else { "1x" };
    r.insert("multiplier".into(), toml::Value::String(m.into()));
    t.insert("refresh".into(), toml::Value::Table(r));
    Some(toml::Value::Table(t))
}

impl ScenarioConfig {
    /// Resolves a config text. The scenario is `scenario` if given, else the
    /// file's top-level `scenario` key. Precedence, lowest first: the file's
    /// top-level settings, the built-in preset of that name (which fixes
    /// `kind`, `lp_mode`, `weak_row_remap` and the refresh multiplier), then
    /// the file's `[scenarios.NAME]` table.
    pub fn from_toml_str(text: &str, scenario: Option<&str>) -> Result<Self> {
        let mut root: toml::Value =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let table = root
            .as_table_mut()
            .ok_or_else(|| Error::Config("config root must be a table".into()))?;
        let mut overrides = match table.remove("scenarios") {
            Some(toml::Value::Table(t)) => t,
            Some(_) => return Err(Error::Config("'scenarios' must be a table of tables".into())),
            None => toml::Table::new(),
        };
        let name = match scenario {
            Some(n) => n.to_string(),
            None => match table.get("scenario") {
                Some(toml::Value::String(s)) => s.clone(),
                Some(_) => return Err(Error::Config("'scenario' must be a string".into())),
                None => "VAR".to_string(),
            },
        };
        let preset = preset_table(&name);
        let over = overrides.remove(&name);
        if preset.is_none() && over.is_none() {
            let known: Vec<&str> = PRESETS.iter().map(|p| p.0).collect();
            return Err(Error::Config(format!(
                "unknown scenario '{name}' (built-in: {}; or add a [scenarios.{name}] table)",
                known.join(", ")
            )));
        }
        if let Some(p) = preset {
            merge(&mut root, p);
        }
        if let Some(o) = over {
            merge(&mut root, o);
        }
        if let Some(t) = root.as_table_mut() {
            t.insert("scenario".into(), toml::Value::String(name));
        }
        let cfg: ScenarioConfig = root.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path, scenario: Option<&str>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml_str(&text, scenario)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(x) = p {
                if x.is_relative() {
                    *x = dir.join(&*x);
                }
            }
        };
        fix(&mut cfg.trace);
        fix(&mut cfg.variation_map);
        fix(&mut cfg.refresh.weak_row_file);
        Ok(cfg)
    }

    /// Built-in preset with default settings.
    pub fn preset(name: &str) -> Result<Self> {
        Self::from_toml_str("", Some(name))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.geometry.validate()?;
        self.timing.to_params()?;
        self.energy.validate()?;
        self.variation.params(self.seed).validate()?;
        self.remap.params().validate()?;
        self.refresh.validate()?;
        if self.kind == ScenarioKind::Var && self.victim_count == 0 && self.forced_pairs.is_none() {
            return bad("a VAR scenario needs victim_count >= 1".into());
        }
        if self.victim_count * 2 > self.geometry.total_banks() / self.geometry.channels as usize {
            return bad(format!(
                "victim_count {} exceeds half of the banks of a channel",
                self.victim_count
            ));
        }
        if !(self.severity_threshold >= 0.0) {
            return bad("severity_threshold must be >= 0".into());
        }
        if !(self.run_length_ns.is_finite() && self.run_length_ns >= 0.0) {
            return bad("run_length_ns must be >= 0".into());
        }
        if self.refresh.multiplier == RefreshMultiplier::X4 && !self.weak_row_remap {
            return bad("a 4x refresh window needs weak_row_remap = true".into());
        }
        if self.remap.check_interval_cycles == 0 {
            return bad("remap.check_interval_cycles must be at least 1".into());
        }
        if self.variation.grid_rows * self.variation.grid_cols == 0 {
            return bad("variation grid must be non-empty".into());
        }
        Ok(())
    }

    pub fn timing_params(&self) -> TimingParams {
        self.timing.to_params().expect("validated")
    }

    pub fn run_length(&self) -> Picos {
        ns_to_ps(self.run_length_ns)
    }

    /// Whether the run needs a remapping engine.
    pub fn uses_engine(&self) -> bool {
        self.kind == ScenarioKind::Var || self.weak_row_remap
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_resolve() {
        for (name, kind, lp, reduced) in PRESETS {
            let c = ScenarioConfig::preset(name).unwrap();
            assert_eq!((c.kind, c.lp_mode, c.weak_row_remap), (kind, lp, reduced), "{name}");
            assert_eq!(c.refresh.multiplier == RefreshMultiplier::X4, reduced);
            assert_eq!(c.scenario, name);
        }
        assert!(ScenarioConfig::preset("NOPE").is_err());
    }

    #[test]
    fn overrides_apply_on_top_of_presets() {
        let text = r#"
            scenario = "PV"
            seed = 7
            [geometry]
            rows_per_bank = 1024
            [scenarios.VAR-LP]
            seed = 9
            [scenarios.VAR-LP.lp]
            idle_threshold_cycles = 50
            [scenarios.mine]
            kind = "IDEAL"
        "#;
        let c = ScenarioConfig::from_toml_str(text, None).unwrap();
        assert_eq!((c.kind, c.seed, c.geometry.rows_per_bank), (ScenarioKind::Pv, 7, 1024));
        let c = ScenarioConfig::from_toml_str(text, Some("VAR-LP")).unwrap();
        assert_eq!((c.kind, c.lp_mode, c.seed, c.lp.idle_threshold_cycles), (ScenarioKind::Var, true, 9, 50));
        assert_eq!(c.geometry.rows_per_bank, 1024);
        let c = ScenarioConfig::from_toml_str(text, Some("mine")).unwrap();
        assert_eq!(c.kind, ScenarioKind::Ideal);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ScenarioConfig::from_toml_str("bogus = 1", None).is_err());
        assert!(ScenarioConfig::from_toml_str("[timing]\nt_ras = 3", None).is_err());
        let four = "[scenarios.VAR.refresh]\nmultiplier = \"4x\"";
        assert!(ScenarioConfig::from_toml_str(four, Some("VAR")).is_err());
        assert!(ScenarioConfig::from_toml_str("victim_count = 0", Some("VAR")).is_err());
    }

    #[test]
    fn timing_converts_to_picoseconds() {
        let t = TimingConfig::default().to_params().unwrap();
        assert_eq!(t, TimingParams::default());
    }
}
