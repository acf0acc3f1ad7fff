//! Translation tries, the FLAG protocol and the migrate-and-remap engine.

mod engine;
mod flag;
mod trie;
mod write_log;

pub use flag::FlagState;
pub use trie::{RemapEntry, RemapTrie, Trie, TrieStats, LEVELS, LOOKUP_CYCLES, RETRIEVAL_CYCLES};
pub use engine::{
    collision_resolve, translate, CopyKind, CopyOp, Direction, EngineTrigger, OccupancyAction, Pair,
    PairState, RemapEngine, RemapParams, RemapStats, Routed, Translation, TriggerReason,
    COLLISION_STALL_CYCLES, LOG_SEARCH_CYCLES, WEAK_ROW_STALL_CYCLES,
};
pub use write_log::WriteLog;
