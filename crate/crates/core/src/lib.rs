//! Trace-driven DRAM memory-subsystem simulator for process-variation-aware
//! bank gating.
//!
//! The crate models a DDR4-style device whose banks are affected by
//! spatially correlated process variation. Slow ("victim") banks can be
//! drained into healthy ("target") banks through a 4-level trie translation
//! table and then power gated; weak rows can be remapped so the array
//! tolerates a 4x longer refresh window. A scenario runner replays memory
//! traces and reports energy, latency, refresh and remapping statistics.
//!
//! Module map:
//!
//! * [`variation`]: correlated variation maps, victim/target classification,
//!   timing derate.
//! * [`dram`]: geometry, address decoding, per-bank state machine.
//! * [`remap`]: translation tries, FLAG protocol, migration, collisions,
//!   overflow handling.
//! * [`energy`]: per-bank energy accounting including gating overheads.
//! * [`refresh`]: refresh scheduling and weak-row modeling.
//! * [`trace`]: trace parsing/emission and synthetic workload generators.
//! * [`sim`]: configuration, the event-driven controller, reports.

pub mod dram;
pub mod energy;
pub mod error;
pub mod refresh;
pub mod remap;
pub mod sim;
pub mod trace;
pub mod variation;

pub use error::{Error, Result};

/// Chapters of the guide under `book/`, compiled so that their Rust
/// snippets run as doctests.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/variation.md")]
    pub mod variation {}
    #[doc = include_str!("../../../book/src/dram.md")]
    pub mod dram {}
    #[doc = include_str!("../../../book/src/remapping.md")]
    pub mod remapping {}
    #[doc = include_str!("../../../book/src/energy.md")]
    pub mod energy {}
    #[doc = include_str!("../../../book/src/refresh.md")]
    pub mod refresh {}
    #[doc = include_str!("../../../book/src/traces.md")]
    pub mod traces {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    pub mod scenarios {}
}
