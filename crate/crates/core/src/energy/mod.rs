//! Per-bank energy accounting.
//!
//! The controller only counts integers: picoseconds spent in each power
//! state and numbers of events. Conversion to energy happens once, at
//! report time, in a fixed summation order so that reports are exactly
//! reproducible and totals reconcile bit-for-bit with the per-bank rows.

use serde::{Deserialize, Serialize};

use crate::dram::{Picos, PowerState, Residency};
use crate::{Error, Result};

/// Device currents, per-event charges and gating overheads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceEnergyProfile {
    /// Supply voltage (V).
    pub vdd: f64,
    /// Rank current with a row open (mA).
    pub idd_active_standby: f64,
    /// Rank current with all banks precharged (mA).
    pub idd_precharge_standby: f64,
    /// Rank current in power-down (mA).
    pub idd_powerdown: f64,
    /// nJ per ACT+PRE pair.
    pub act_pre_energy: f64,
    /// nJ per read burst.
    pub read_burst_energy: f64,
    /// nJ per write burst.
    pub write_burst_energy: f64,
    /// nJ per all-bank refresh command of one rank.
    pub refresh_energy: f64,
    /// nJ of termination energy per burst.
    pub odt_energy_per_burst: f64,
    /// Sleep-transistor leakage of one gated bank (nW).
    pub sleep_leakage: f64,
    /// Gating controller power (uW), drawn for the whole run.
    pub controller_power: f64,
    /// Energy of one gate or ungate transition (pJ).
    pub wake_transient: f64,
}

impl Default for DeviceEnergyProfile {
    fn default() -> Self {
        Self {
            vdd: 1.2,
            idd_active_standby: 392.0,
            idd_precharge_standby: 272.0,
            idd_powerdown: 200.0,
            act_pre_energy: 5.93,
            read_burst_energy: 4.85,
            write_burst_energy: 4.13,
            refresh_energy: 725.8,
            odt_energy_per_burst: 0.0,
            sleep_leakage: 8.89,
            controller_power: 42.84,
            wake_transient: 1.2,
        }
    }
}

impl DeviceEnergyProfile {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("vdd", self.vdd),
            ("idd_active_standby", self.idd_active_standby),
            ("idd_precharge_standby", self.idd_precharge_standby),
            ("idd_powerdown", self.idd_powerdown),
            ("act_pre_energy", self.act_pre_energy),
            ("read_burst_energy", self.read_burst_energy),
            ("write_burst_energy", self.write_burst_energy),
            ("refresh_energy", self.refresh_energy),
            ("odt_energy_per_burst", self.odt_energy_per_burst),
            ("sleep_leakage", self.sleep_leakage),
            ("controller_power", self.controller_power),
            ("wake_transient", self.wake_transient),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!("energy.{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Energy component a quantity is booked under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Background,
    ActPre,
    Burst,
    Refresh,
    Odt,
    Overhead,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyEvent {
    ActPre,
    ReadBurst,
    WriteBurst,
    /// One bank's share of a rank refresh.
    Refresh,
    GateTransient,
}

fn ps_to_ns(ps: Picos) -> f64 {
    ps as f64 / 1000.0
}

/// Energy (nJ) of one bank spending `duration` in `state`. Background for
/// the active and low-power states; sleep leakage, booked as overhead, when
/// gated.
pub fn accrue_background(
    profile: &DeviceEnergyProfile,
    banks_per_rank: u32,
    state: PowerState,
    duration: Picos,
) -> (Component, f64) {
    let idd = match state {
        PowerState::RowOpen => profile.idd_active_standby,
        PowerState::ActiveIdle => profile.idd_precharge_standby,
        PowerState::PoweredDownLp => profile.idd_powerdown,
        PowerState::GatedOff => {
            // nW * s = nJ
            return (Component::Overhead, profile.sleep_leakage * duration as f64 * 1e-12);
        }
    };
    // V * mA = mW, mW * ns = pJ
    let share = idd / banks_per_rank as f64;
    (Component::Background, profile.vdd * share * ps_to_ns(duration) / 1000.0)
}

/// Energy (nJ) of one event.
pub fn accrue_event(profile: &DeviceEnergyProfile, banks_per_rank: u32, event: EnergyEvent) -> (Component, f64) {
    match event {
        EnergyEvent::ActPre => (Component::ActPre, profile.act_pre_energy),
        EnergyEvent::ReadBurst => (Component::Burst, profile.read_burst_energy),
        EnergyEvent::WriteBurst => (Component::Burst, profile.write_burst_energy),
        EnergyEvent::Refresh => (Component::Refresh, profile.refresh_energy / banks_per_rank as f64),
        EnergyEvent::GateTransient => (Component::Overhead, profile.wake_transient / 1000.0),
    }
}

/// Integer activity of one bank over a run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BankActivity {
    pub residency: Residency,
    pub acts: u64,
    pub read_bursts: u64,
    pub write_bursts: u64,
    /// Refresh commands that reached this bank.
    pub refreshes: u64,
    /// Bank activations caused by in-DRAM copies.
    pub copy_acts: u64,
    pub copy_read_bursts: u64,
    pub copy_write_bursts: u64,
    /// Gate and ungate transitions.
    pub transients: u64,
}

/// Energy per component (nJ).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyCounters {
    pub background_nj: f64,
    pub act_pre_nj: f64,
    pub burst_nj: f64,
    pub refresh_nj: f64,
    pub odt_nj: f64,
    pub overhead_nj: f64,
}

impl EnergyCounters {
    pub fn add(&mut self, component: Component, nj: f64) {
        let slot = match component {
            Component::Background => &mut self.background_nj,
            Component::ActPre => &mut self.act_pre_nj,
            Component::Burst => &mut self.burst_nj,
            Component::Refresh => &mut self.refresh_nj,
            Component::Odt => &mut self.odt_nj,
            Component::Overhead => &mut self.overhead_nj,
        };
        *slot += nj;
    }

    /// Sum of the components, always in the same order.
    pub fn total(&self) -> f64 {
        self.background_nj + self.act_pre_nj + self.burst_nj + self.refresh_nj + self.odt_nj + self.overhead_nj
    }

    pub fn accumulate(&mut self, other: &EnergyCounters) {
        self.background_nj += other.background_nj;
        self.act_pre_nj += other.act_pre_nj;
        self.burst_nj += other.burst_nj;
        self.refresh_nj += other.refresh_nj;
        self.odt_nj += other.odt_nj;
        self.overhead_nj += other.overhead_nj;
    }

    pub fn components(&self) -> [(&'static str, f64); 6] {
        [
            ("background", self.background_nj),
            ("act_pre", self.act_pre_nj),
            ("burst", self.burst_nj),
            ("refresh", self.refresh_nj),
            ("odt", self.odt_nj),
            ("overhead", self.overhead_nj),
        ]
    }
}

/// Converts one bank's activity into energy.
pub fn bank_energy(profile: &DeviceEnergyProfile, banks_per_rank: u32, a: &BankActivity) -> EnergyCounters {
    let mut e = EnergyCounters::default();
    for state in PowerState::ALL {
        let (c, nj) = accrue_background(profile, banks_per_rank, state, a.residency.get(state));
        e.add(c, nj);
    }
    let n = |count: u64, ev: EnergyEvent| {
        let (c, per) = accrue_event(profile, banks_per_rank, ev);
        (c, count as f64 * per)
    };
    for (c, nj) in [
        n(a.acts, EnergyEvent::ActPre),
        n(a.read_bursts, EnergyEvent::ReadBurst),
        n(a.write_bursts, EnergyEvent::WriteBurst),
        n(a.refreshes, EnergyEvent::Refresh),
        n(a.transients, EnergyEvent::GateTransient),
    ] {
        e.add(c, nj);
    }
    e.odt_nj += (a.read_bursts + a.write_bursts) as f64 * profile.odt_energy_per_burst;
    // in-DRAM copies are a cost of gating, not of the workload
    e.overhead_nj += a.copy_acts as f64 * profile.act_pre_energy
        + a.copy_read_bursts as f64 * profile.read_burst_energy
        + a.copy_write_bursts as f64 * profile.write_burst_energy;
    e
}

/// Whole-run energy: per-bank rows, their component sums and the total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub per_bank: Vec<EnergyCounters>,
    /// Component sums over banks (controller excluded).
    pub components: EnergyCounters,
    pub controller_nj: f64,
    /// Sum of per-bank totals plus the controller.
    pub total_nj: f64,
    pub gate_transient_events: u64,
    pub gate_transient_pj: f64,
    pub gated_time_s: f64,
    pub gated_leakage_nj: f64,
}

/// Builds the breakdown. The gating controller draws power for the whole
/// `span` only when `controller_active`.
pub fn energy_report(
    profile: &DeviceEnergyProfile,
    banks_per_rank: u32,
    activity: &[BankActivity],
    span: Picos,
    controller_active: bool,
) -> EnergyBreakdown {
    let per_bank: Vec<EnergyCounters> = activity
        .iter()
        .map(|a| bank_energy(profile, banks_per_rank, a))
        .collect();
    let mut components = EnergyCounters::default();
    for e in &per_bank {
        components.accumulate(e);
    }
    // uW * s = uJ -> nJ
    let controller_nj = if controller_active {
        profile.controller_power * span as f64 * 1e-12 * 1000.0
    } else {
        0.0
    };
    let mut total_nj = 0.0;
    for e in &per_bank {
        total_nj += e.total();
    }
    total_nj += controller_nj;
    let events: u64 = activity.iter().map(|a| a.transients).sum();
    let gated_ps: Picos = activity.iter().map(|a| a.residency.get(PowerState::GatedOff)).sum();
    let gated_time_s = gated_ps as f64 * 1e-12;
    EnergyBreakdown {
        per_bank,
        components,
        controller_nj,
        total_nj,
        gate_transient_events: events,
        gate_transient_pj: events as f64 * profile.wake_transient,
        gated_time_s,
        gated_leakage_nj: profile.sleep_leakage * gated_time_s,
    }
}
