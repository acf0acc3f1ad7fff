//! DRAM geometry, address decoding and the per-bank command state machine.

mod bank;
mod geometry;
mod timing;

pub use bank::{BankState, Command, PowerState, Residency, RowOutcome, ServiceOutcome};
pub use geometry::{BankId, DecodedAddress, Geometry};
pub use timing::{Picos, TimingParams};

/// Read or write, as seen by the controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Op {
    Read,
    Write,
}
