use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Two-bit gating protocol state. Translation is active iff the MSB is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FlagState {
    /// `00`: all banks operational, no translation.
    Idle,
    /// `01`: migration (forward or reverse) in progress.
    Migrating,
    /// `10`: victim banks gated, translation active.
    Gated,
}

impl FlagState {
    pub fn bits(self) -> u8 {
        match self {
            FlagState::Idle => 0b00,
            FlagState::Migrating => 0b01,
            FlagState::Gated => 0b10,
        }
    }

    pub fn from_bits(bits: u8) -> Result<Self> {
        match bits {
            0b00 => Ok(FlagState::Idle),
            0b01 => Ok(FlagState::Migrating),
            0b10 => Ok(FlagState::Gated),
            b => Err(Error::InvalidParameter(format!("FLAG value {b:02b} is not defined"))),
        }
    }

    /// The MSB drives the translation DEMUX/MUX select line.
    pub fn translation_active(self) -> bool {
        self.bits() & 0b10 != 0
    }

    pub fn can_transition(self, to: FlagState) -> bool {
        use FlagState::*;
        matches!(
            (self, to),
            (Idle, Migrating) | (Migrating, Gated) | (Gated, Migrating) | (Migrating, Idle)
        )
    }

    pub fn transition(self, to: FlagState) -> Result<FlagState> {
        if self.can_transition(to) {
            Ok(to)
        } else {
            Err(Error::IllegalFlagTransition { from: self, to })
        }
    }
}

impl fmt::Display for FlagState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02b}", self.bits())
    }
}
