use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Op, Picos, TimingParams};
use crate::{Error, Result};

/// Power/activation state of one bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PowerState {
    ActiveIdle,
    RowOpen,
    PoweredDownLp,
    GatedOff,
}

impl PowerState {
    pub const ALL: [PowerState; 4] = [
        PowerState::ActiveIdle,
        PowerState::RowOpen,
        PowerState::PoweredDownLp,
        PowerState::GatedOff,
    ];

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for PowerState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PowerState::ActiveIdle => "ACTIVE_IDLE",
            PowerState::RowOpen => "ROW_OPEN",
            PowerState::PoweredDownLp => "POWERED_DOWN_LP",
            PowerState::GatedOff => "GATED_OFF",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Act(u32),
    Pre,
    Read(u32),
    Write(u32),
    Refresh,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::Act(r) => write!(f, "ACT({r})"),
            Command::Pre => f.write_str("PRE"),
            Command::Read(c) => write!(f, "READ({c})"),
            Command::Write(c) => write!(f, "WRITE({c})"),
            Command::Refresh => f.write_str("REFRESH"),
        }
    }
}

/// Time spent in each power state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Residency([Picos; 4]);

impl Residency {
    pub fn get(&self, state: PowerState) -> Picos {
        self.0[state.index()]
    }

    fn add(&mut self, state: PowerState, dt: Picos) {
        self.0[state.index()] += dt;
    }

    pub fn total(&self) -> Picos {
        self.0.iter().sum()
    }
}

/// How a request was served by the open-page policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowOutcome {
    Hit,
    /// Row buffer held a different row: PRE + ACT.
    Conflict,
    /// Row buffer was empty: ACT.
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServiceOutcome {
    pub completion: Picos,
    pub row: RowOutcome,
}

impl ServiceOutcome {
    pub fn activated(&self) -> bool {
        self.row != RowOutcome::Hit
    }
}

/// One bank: power state, row buffer, busy horizon and its own timing.
#[derive(Debug, Clone, PartialEq)]
pub struct BankState {
    pub power: PowerState,
    pub open_row: Option<u32>,
    pub busy_until: Picos,
    /// Live column slots held by the bank.
    pub occupancy: u64,
    pub timing: TimingParams,
    /// Gate/ungate transitions, each one wake/sleep transient.
    pub transients: u64,
    residency: Residency,
    state_since: Picos,
}

impl BankState {
    pub fn new(timing: TimingParams) -> Self {
        Self {
            power: PowerState::ActiveIdle,
            open_row: None,
            busy_until: 0,
            occupancy: 0,
            timing,
            transients: 0,
            residency: Residency::default(),
            state_since: 0,
        }
    }

    pub fn residency(&self) -> &Residency {
        &self.residency
    }

    /// Accounts residency up to `at` without changing state.
    pub fn close_residency(&mut self, at: Picos) {
        let at = at.max(self.state_since);
        self.residency.add(self.power, at - self.state_since);
        self.state_since = at;
    }

    fn transition(&mut self, to: PowerState, at: Picos) {
        debug_assert!(at >= self.state_since, "state change at {at} before {}", self.state_since);
        let at = at.max(self.state_since);
        self.residency.add(self.power, at - self.state_since);
        self.power = to;
        self.state_since = at;
    }

    fn illegal(&self, cmd: Command) -> Error {
        Error::IllegalCommand {
            command: cmd.to_string(),
            state: match self.open_row {
                Some(r) if self.power == PowerState::RowOpen => format!("{} (row {r})", self.power),
                _ => self.power.to_string(),
            },
        }
    }

    /// Issues one command at `now` and returns when the bank is free again.
    pub fn issue(&mut self, cmd: Command, now: Picos) -> Result<Picos> {
        if now < self.busy_until {
            return Err(Error::BankBusy(format!(
                "{cmd} at {now} ps while busy until {} ps",
                self.busy_until
            )));
        }
        let t = &self.timing;
        let done = match (cmd, self.power) {
            (_, PowerState::GatedOff) | (_, PowerState::PoweredDownLp) => {
                return Err(self.illegal(cmd))
            }
            (Command::Act(row), PowerState::ActiveIdle) => {
                let done = now + t.t_ras;
                self.transition(PowerState::RowOpen, now);
                self.open_row = Some(row);
                done
            }
            (Command::Pre, PowerState::RowOpen) => {
                let done = now + t.t_rp;
                self.transition(PowerState::ActiveIdle, now);
                self.open_row = None;
                done
            }
            (Command::Read(_), PowerState::RowOpen) => now + t.read_burst_time(),
            (Command::Write(_), PowerState::RowOpen) => now + t.write_burst_time(),
            (Command::Refresh, PowerState::ActiveIdle) => now + t.t_rfc,
            _ => return Err(self.illegal(cmd)),
        };
        self.busy_until = done;
        Ok(done)
    }

    /// Serves one access under the open-page policy. The data burst starts
    /// no earlier than `burst_not_before` (channel data-bus availability).
    pub fn service(
        &mut self,
        op: Op,
        row: u32,
        column: u32,
        now: Picos,
        burst_not_before: Picos,
    ) -> Result<ServiceOutcome> {
        let mut t = now;
        let outcome = match (self.power, self.open_row) {
            (PowerState::RowOpen, Some(open)) if open == row => RowOutcome::Hit,
            (PowerState::RowOpen, Some(_)) => {
                t = self.issue(Command::Pre, t)?;
                t = self.issue(Command::Act(row), t)?;
                RowOutcome::Conflict
            }
            _ => {
                t = self.issue(Command::Act(row), t)?;
                RowOutcome::Closed
            }
        };
        let t = t.max(burst_not_before);
        let cmd = match op {
            Op::Read => Command::Read(column),
            Op::Write => Command::Write(column),
        };
        let completion = self.issue(cmd, t)?;
        Ok(ServiceOutcome {
            completion,
            row: outcome,
        })
    }

    /// Precharges an open row (if any) and returns when the bank is idle.
    pub fn precharge(&mut self, now: Picos) -> Result<Picos> {
        let now = now.max(self.busy_until);
        if self.power == PowerState::RowOpen {
            self.issue(Command::Pre, now)
        } else {
            Ok(now)
        }
    }

    /// Occupies the bank for an in-DRAM copy of `cost` starting no earlier
    /// than `now`; the row buffer is left precharged.
    pub fn occupy_for_copy(&mut self, now: Picos, cost: Picos) -> Result<Picos> {
        if matches!(self.power, PowerState::GatedOff | PowerState::PoweredDownLp) {
            return Err(self.illegal(Command::Act(0)));
        }
        let start = self.precharge(now)?;
        self.transition(PowerState::RowOpen, start);
        let done = start + cost;
        self.transition(PowerState::ActiveIdle, done);
        self.open_row = None;
        self.busy_until = done;
        Ok(done)
    }

    /// Moves the bank between idle, low-power and gated states at time `at`.
    /// Entering or leaving `GatedOff` counts one transient event.
    pub fn set_power_state(&mut self, to: PowerState, at: Picos) -> Result<()> {
        if to == PowerState::RowOpen {
            return Err(Error::InvalidParameter(
                "ROW_OPEN is entered only through ACT".into(),
            ));
        }
        if to == self.power {
            return Ok(());
        }
        if self.power == PowerState::RowOpen || self.open_row.is_some() {
            return Err(Error::BankBusy(format!(
                "cannot enter {to} with row {:?} open",
                self.open_row
            )));
        }
        if at < self.busy_until {
            return Err(Error::BankBusy(format!(
                "cannot enter {to} at {at} ps, busy until {} ps",
                self.busy_until
            )));
        }
        if to == PowerState::GatedOff || self.power == PowerState::GatedOff {
            self.transients += 1;
        }
        self.transition(to, at);
        Ok(())
    }

    pub fn is_gated(&self) -> bool {
        self.power == PowerState::GatedOff
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bank() -> BankState {
        BankState::new(TimingParams::default())
    }

    #[test]
    fn act_then_read_completes_after_tras_and_burst() {
        let mut b = bank();
        let t = b.timing;
        let now = 1_000;
        let after_act = b.issue(Command::Act(5), now).unwrap();
        let done = b.issue(Command::Read(3), after_act).unwrap();
        assert_eq!(done, now + t.t_ras + t.read_burst as u64 * t.t_ck);
        assert_eq!(b.open_row, Some(5));
        assert_eq!(b.power, PowerState::RowOpen);
    }

    #[test]
    fn read_on_closed_row_is_illegal() {
        let mut b = bank();
        assert!(matches!(
            b.issue(Command::Read(0), 0),
            Err(Error::IllegalCommand { .. })
        ));
    }

    #[test]
    fn act_on_open_row_is_illegal() {
        let mut b = bank();
        let t = b.issue(Command::Act(1), 0).unwrap();
        assert!(matches!(
            b.issue(Command::Act(2), t),
            Err(Error::IllegalCommand { .. })
        ));
    }

    #[test]
    fn gated_bank_accepts_no_commands() {
        let mut b = bank();
        b.set_power_state(PowerState::GatedOff, 0).unwrap();
        for cmd in [
            Command::Read(0),
            Command::Write(0),
            Command::Act(0),
            Command::Pre,
            Command::Refresh,
        ] {
            assert!(matches!(b.issue(cmd, 10), Err(Error::IllegalCommand { .. })));
        }
    }

    #[test]
    fn victim_activation_is_later_by_the_derate() {
        let mut healthy = bank();
        let mut victim = BankState::new(TimingParams::default().with_t_ras(50_000));
        let a = healthy.issue(Command::Act(0), 0).unwrap();
        let b = victim.issue(Command::Act(0), 0).unwrap();
        assert_eq!(b - a, 18_000);
    }

    #[test]
    fn refresh_requires_precharged_bank() {
        let mut b = bank();
        let t = b.issue(Command::Act(0), 0).unwrap();
        assert!(b.issue(Command::Refresh, t).is_err());
        let t = b.issue(Command::Pre, t).unwrap();
        let done = b.issue(Command::Refresh, t).unwrap();
        assert_eq!(done - t, b.timing.t_rfc);
    }

    #[test]
    fn busy_bank_rejects_commands() {
        let mut b = bank();
        b.issue(Command::Act(0), 0).unwrap();
        assert!(matches!(b.issue(Command::Pre, 1), Err(Error::BankBusy(_))));
    }

    #[test]
    fn open_page_hit_conflict_and_closed_costs() {
        let mut b = bank();
        let t = b.timing;
        let first = b.service(Op::Read, 7, 0, 0, 0).unwrap();
        assert_eq!(first.row, RowOutcome::Closed);
        assert_eq!(first.completion, t.t_ras + t.read_burst_time());

        let hit = b.service(Op::Read, 7, 1, first.completion, 0).unwrap();
        assert_eq!(hit.row, RowOutcome::Hit);
        assert_eq!(hit.completion - first.completion, t.read_burst_time());

        let conflict = b.service(Op::Read, 9, 1, hit.completion, 0).unwrap();
        assert_eq!(conflict.row, RowOutcome::Conflict);
        assert_eq!(
            conflict.completion - hit.completion,
            t.t_rp + t.t_ras + t.read_burst_time()
        );
    }

    #[test]
    fn gating_records_transients_and_rejects_open_row() {
        let mut b = bank();
        b.set_power_state(PowerState::GatedOff, 0).unwrap();
        b.set_power_state(PowerState::ActiveIdle, 100).unwrap();
        assert_eq!(b.transients, 2);

        let t = b.issue(Command::Act(1), 200).unwrap();
        assert!(matches!(
            b.set_power_state(PowerState::GatedOff, t),
            Err(Error::BankBusy(_))
        ));
    }

    #[test]
    fn gated_time_is_not_background_time() {
        let mut b = bank();
        b.set_power_state(PowerState::GatedOff, 1_000).unwrap();
        b.set_power_state(PowerState::ActiveIdle, 5_000).unwrap();
        b.close_residency(6_000);
        let r = b.residency();
        assert_eq!(r.get(PowerState::GatedOff), 4_000);
        assert_eq!(r.get(PowerState::ActiveIdle), 2_000);
        assert_eq!(r.get(PowerState::RowOpen), 0);
        assert_eq!(r.total(), 6_000);
    }

    #[test]
    fn copy_leaves_bank_precharged() {
        let mut b = bank();
        let t = b.timing;
        let c = b.service(Op::Write, 3, 0, 0, 0).unwrap().completion;
        let done = b.occupy_for_copy(c, 10_000).unwrap();
        assert_eq!(done, c + t.t_rp + 10_000);
        assert_eq!(b.open_row, None);
        assert_eq!(b.power, PowerState::ActiveIdle);
    }
}
