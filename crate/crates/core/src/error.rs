use thiserror::Error;

use crate::remap::FlagState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("covariance is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("grid {rows}x{cols} exceeds the field-generation budget of {max_cells} cells")]
    GridTooLarge {
        rows: usize,
        cols: usize,
        max_cells: usize,
    },

    #[error("address {address:#x} out of range (capacity {capacity:#x})")]
    AddressOutOfRange { address: u64, capacity: u64 },

    #[error("illegal command {command} for bank in state {state}")]
    IllegalCommand { command: String, state: String },

    #[error("bank is not quiesced: {0}")]
    BankBusy(String),

    #[error("trie capacity exceeded: {needed} bytes needed, ceiling is {capacity} bytes")]
    CapacityExceeded { needed: u64, capacity: u64 },

    #[error("illegal FLAG transition {from} -> {to}")]
    IllegalFlagTransition { from: FlagState, to: FlagState },

    #[error("source and destination bank lists differ in length ({src} vs {dst})")]
    LengthMismatch { src: usize, dst: usize },

    #[error("no free slot left in bank {0}")]
    BankFull(usize),

    #[error("translation produced an access to gated bank {0}")]
    TranslationToGatedBank(usize),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: issue cycle {cycle} precedes previous cycle {prev}")]
    Order { line: usize, cycle: u64, prev: u64 },

    #[error("config: {0}")]
    Config(String),

    #[error("reports are not comparable: {0}")]
    Mismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
