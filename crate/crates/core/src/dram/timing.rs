use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Simulated time in picoseconds. Every interval in the simulator is an
/// integer number of picoseconds so that DDR4 values such as tRP = 13.75 ns
/// and tREFI = 7.8125 us stay exact.
pub type Picos = u64;

/// Per-bank timing parameters.
///
/// `t_rc` always equals `t_ras + t_rp`; use [`TimingParams::with_t_ras`] to
/// change the activation time so the identity is preserved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingParams {
    pub t_ras: Picos,
    pub t_rp: Picos,
    pub t_rc: Picos,
    /// Memory clock period.
    pub t_ck: Picos,
    pub t_refi: Picos,
    pub t_refw: Picos,
    /// Time a bank stays blocked by one refresh command.
    pub t_rfc: Picos,
    /// Power-down exit latency.
    pub t_xp: Picos,
    /// Read burst length in clock cycles.
    pub read_burst: u32,
    /// Write burst length in clock cycles.
    pub write_burst: u32,
}

impl Default for TimingParams {
    /// DDR4-1600-class values.
    fn default() -> Self {
        Self {
            t_ras: 32_000,
            t_rp: 13_750,
            t_rc: 45_750,
            t_ck: 1_250,
            t_refi: 7_812_500,
            t_refw: 64_000_000_000,
            t_rfc: 350_000,
            t_xp: 7_500,
            read_burst: 4,
            write_burst: 4,
        }
    }
}

impl TimingParams {
    pub fn validate(&self) -> Result<()> {
        if self.t_ck == 0 {
            return Err(Error::InvalidParameter("tCK must be positive".into()));
        }
        if self.t_rc != self.t_ras + self.t_rp {
            return Err(Error::InvalidParameter(format!(
                "tRC ({}) must equal tRAS + tRP ({} + {})",
                self.t_rc, self.t_ras, self.t_rp
            )));
        }
        if self.t_refi == 0 || self.t_refw == 0 || self.t_refw % self.t_refi != 0 {
            return Err(Error::InvalidParameter(format!(
                "tREFW ({}) must be a positive multiple of tREFI ({})",
                self.t_refw, self.t_refi
            )));
        }
        Ok(())
    }

    /// Returns a copy with a new tRAS and tRC recomputed as tRAS + tRP.
    pub fn with_t_ras(self, t_ras: Picos) -> Self {
        Self {
            t_ras,
            t_rc: t_ras + self.t_rp,
            ..self
        }
    }

    pub fn cycles(&self, n: u64) -> Picos {
        n * self.t_ck
    }

    pub fn read_burst_time(&self) -> Picos {
        self.cycles(self.read_burst as u64)
    }

    pub fn write_burst_time(&self) -> Picos {
        self.cycles(self.write_burst as u64)
    }

    /// Number of refresh commands per refresh window.
    pub fn refreshes_per_window(&self) -> u64 {
        self.t_refw / self.t_refi
    }
}
