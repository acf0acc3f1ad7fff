//! Address remapping, migration and overflow handling.
//!
//! The engine owns the logical view of memory: which physical column slot
//! holds which logical address, and the payload tag stored there. A logical
//! address lives at the location named by its primary-trie entry if it has
//! one, otherwise at its home slot (redirected to a host row when its home
//! row is weak). Everything else, bank timing and power included, belongs to
//! the controller, which executes the [`CopyOp`]s the engine emits.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::trie::{RemapEntry, RemapTrie, Trie, TrieStats, LOOKUP_CYCLES};
use super::write_log::WriteLog;
use super::FlagState;
use crate::dram::{DecodedAddress, Geometry, Op};
use crate::variation::VariationMatrix;
use crate::{Error, Result};

/// Stall charged when an access is redirected by a collision override.
pub const COLLISION_STALL_CYCLES: u64 = 3;
/// Stall charged for every access that lands on a remapped weak row.
pub const WEAK_ROW_STALL_CYCLES: u64 = 3;
/// Time to search the migration write log.
pub const LOG_SEARCH_CYCLES: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemapParams {
    /// Ceiling of each trie as a fraction of DRAM capacity.
    pub trie_capacity_fraction: f64,
    /// Bytes per primary node: 256-bit bitmap + 4 B child base + 4 B payload.
    pub primary_node_bytes: u64,
    /// Bytes per auxiliary node: the payload is a 4 B owner key only.
    pub aux_node_bytes: u64,
    /// Target-bank occupancy that forces a reverse migration.
    pub occupancy_threshold: f64,
    /// Trie fill level that reopens every bank.
    pub trie_threshold: f64,
}

impl Default for RemapParams {
    fn default() -> Self {
        Self {
            trie_capacity_fraction: 0.02,
            primary_node_bytes: 40,
            aux_node_bytes: 20,
            occupancy_threshold: 0.9,
            trie_threshold: 0.9,
        }
    }
}

impl RemapParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if !(self.trie_capacity_fraction > 0.0 && self.trie_capacity_fraction <= 1.0) {
            return bad("trie_capacity_fraction must lie in (0, 1]");
        }
        if self.primary_node_bytes == 0 || self.aux_node_bytes == 0 {
            return bad("trie node sizes must be positive");
        }
        for v in [self.occupancy_threshold, self.trie_threshold] {
            if !(v > 0.0 && v <= 1.0) {
                return bad("occupancy thresholds must lie in (0, 1]");
            }
        }
        Ok(())
    }

    pub fn trie_capacity_bytes(&self, geometry: &Geometry) -> u64 {
        (geometry.capacity_bytes() as f64 * self.trie_capacity_fraction).floor() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairState {
    Normal,
    Forwarding,
    Gated,
    Reversing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Reverse,
}

/// One victim/target pair, by flat bank index.
#[derive(Debug, Clone)]
pub struct Pair {
    pub victim: usize,
    pub target: usize,
    pub state: PairState,
    /// Set once the pair has been reverse-migrated; it is never gated again.
    pub reopened: bool,
    schedule: VecDeque<u32>,
}

impl Pair {
    pub fn pending_copies(&self) -> usize {
        self.schedule.len()
    }

    pub fn is_migrating(&self) -> bool {
        matches!(self.state, PairState::Forwarding | PairState::Reversing)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CopyKind {
    /// Scheduled background copy of a migration.
    Migration,
    /// Copy forced by a write to a not-yet-migrated address.
    Priority,
    /// A relocated victim moved out of a slot claimed by its native owner.
    Displacement,
    /// A hosted weak row moved out of a row claimed by native data.
    HostRelocation,
    /// Initial copy of a weak row into its host.
    WeakRowInstall,
}

/// An in-DRAM copy the controller must perform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CopyOp {
    pub src: DecodedAddress,
    pub dst: DecodedAddress,
    /// Column slots moved (a whole row for row copies).
    pub columns: u32,
    pub kind: CopyKind,
}

impl CopyOp {
    pub fn is_row_copy(&self) -> bool {
        matches!(self.kind, CopyKind::HostRelocation | CopyKind::WeakRowInstall)
    }
}

/// Result of routing one request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Routed {
    pub physical: DecodedAddress,
    /// Collision and weak-row stalls, in clock cycles.
    pub translation_stall_cycles: u64,
    /// Write-log search time spent on a priority copy, in clock cycles.
    pub log_search_cycles: u64,
    pub interrupted: bool,
    pub weak_row: bool,
    /// Copies that must complete before the request is served.
    pub copies: Vec<CopyOp>,
    /// Tag observed by a read (none if the address was never written).
    pub read_tag: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OccupancyAction {
    None,
    ReopenAll,
    ReverseMigrate(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerReason {
    TargetOccupancy,
    PrimaryTrie,
    AuxTrie,
    PrimaryCapacity,
    /// Requested by the controller at a configured cycle.
    Scheduled,
}

/// A reverse migration or reopen decided by the engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineTrigger {
    pub action: OccupancyAction,
    pub reason: TriggerReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemapStats {
    /// Accesses redirected through a collision override.
    pub interrupts: u64,
    /// Placements that found their natural slot taken.
    pub collisions: u64,
    pub translation_stall_cycles: u64,
    /// Lookups of the translation trie on the request path.
    pub translations: u64,
    pub weak_row_accesses: u64,
    pub migration_copies: u64,
    pub priority_copies: u64,
    pub displacements: u64,
    pub host_relocations: u64,
    /// Scheduled copies skipped because a logged write already moved the address.
    pub skipped_logged: u64,
    pub reverse_migrations: u64,
    pub reopen_all: u64,
    pub occupancy_checks: u64,
}

/// Free-slot search inside one bank: the first slot after `(ro, co)` in
/// column-major scan order (wrapping to the next row, then to row 0) for
/// which `occupied` is false.
pub fn collision_resolve(
    rows: u32,
    cols: u32,
    ro: u32,
    co: u32,
    mut occupied: impl FnMut(u32, u32) -> bool,
) -> Option<(u32, u32)> {
    let total = rows as u64 * cols as u64;
    let start = ro as u64 * cols as u64 + co as u64;
    (1..total)
        .map(|step| (start + step) % total)
        .map(|s| ((s / cols as u64) as u32, (s % cols as u64) as u32))
        .find(|&(r, c)| !occupied(r, c))
}

/// Stateless translation of one address as the hardware select line sees it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Translation {
    pub effective: DecodedAddress,
    pub stall_cycles: u64,
    pub interrupted: bool,
}

/// Translates `addr` given the variation matrix, translation trie and FLAG.
/// Only victim addresses under FLAG 10 are translated; the base trie walk is
/// hidden inside tRAS, an override costs a 3-cycle interrupt.
pub fn translate(
    addr: &DecodedAddress,
    geometry: &Geometry,
    matrix: &VariationMatrix,
    trie: &RemapTrie,
    flag: FlagState,
) -> Translation {
    let identity = Translation {
        effective: *addr,
        stall_cycles: 0,
        interrupted: false,
    };
    if !flag.translation_active() {
        return identity;
    }
    let Some(target) = matrix.target_of(addr.bank_id()) else {
        return identity;
    };
    let mut effective = DecodedAddress::new(addr.channel, target.rank, target.bank, addr.row, addr.column);
    let (entry, cycles) = trie.lookup(geometry.slot_key(addr));
    match entry {
        Some(RemapEntry::Override {
            rank,
            bank,
            row,
            column,
        }) => {
            effective = DecodedAddress::new(addr.channel, rank, bank, row, column);
            Translation {
                effective,
                stall_cycles: (cycles - LOOKUP_CYCLES) as u64,
                interrupted: true,
            }
        }
        Some(RemapEntry::Pair { rank, bank }) => {
            effective.rank = rank;
            effective.bank = bank;
            Translation {
                effective,
                ..identity
            }
        }
        None => Translation {
            effective,
            ..identity
        },
    }
}

#[derive(Debug, Clone)]
struct WeakRows {
    active: bool,
    weak: HashSet<u32>,
    /// host row key -> weak row key
    hosts: HashMap<u32, u32>,
    /// weak row key -> host override
    trie: RemapTrie,
}

#[derive(Debug, Clone)]
pub struct RemapEngine {
    geometry: Geometry,
    params: RemapParams,
    row_bits: u32,
    col_bits: u32,
    pairs: Vec<Pair>,
    victim_pair: Vec<Option<usize>>,
    target_pair: Vec<Option<usize>>,
    flag: FlagState,
    primary: RemapTrie,
    aux: Trie<u32>,
    aux_overflow: bool,
    weak: WeakRows,
    /// physical slot -> logical owner
    owner: HashMap<u32, u32>,
    /// physical slot -> payload tag
    data: HashMap<u32, u64>,
    row_live: HashMap<u32, u32>,
    bank_live: Vec<u64>,
    log: WriteLog,
    gating_suppressed: bool,
    triggers: Vec<EngineTrigger>,
    ungate: Vec<usize>,
    stats: RemapStats,
}

impl RemapEngine {
    /// Builds an engine for the pairs of `matrix`, replicated on every
    /// channel (migration never crosses channels).
    pub fn new(geometry: Geometry, matrix: &VariationMatrix, params: RemapParams) -> Result<Self> {
        geometry.validate()?;
        geometry.validate_key_width()?;
        params.validate()?;
        let nb = geometry.total_banks();
        let mut pairs = Vec::new();
        let mut victim_pair = vec![None; nb];
        let mut target_pair = vec![None; nb];
        for ch in 0..geometry.channels {
            for p in matrix.pairs() {
                let victim = geometry.bank_index(ch, p.victim);
                let target = geometry.bank_index(ch, p.target);
                if victim >= nb || target >= nb {
                    return Err(Error::InvalidParameter(format!(
                        "pair {:?} -> {:?} lies outside the geometry",
                        p.victim, p.target
                    )));
                }
                victim_pair[victim] = Some(pairs.len());
                target_pair[target] = Some(pairs.len());
                pairs.push(Pair {
                    victim,
                    target,
                    state: PairState::Normal,
                    reopened: false,
                    schedule: VecDeque::new(),
                });
            }
        }
        let cap = params.trie_capacity_bytes(&geometry);
        Ok(Self {
            row_bits: geometry.rows_per_bank.trailing_zeros(),
            col_bits: geometry.cols_per_row.trailing_zeros(),
            geometry,
            params,
            pairs,
            victim_pair,
            target_pair,
            flag: FlagState::Idle,
            primary: RemapTrie::new(cap, params.primary_node_bytes),
            aux: Trie::new(cap, params.aux_node_bytes),
            aux_overflow: false,
            weak: WeakRows {
                active: false,
                weak: HashSet::new(),
                hosts: HashMap::new(),
                trie: RemapTrie::new(cap, params.primary_node_bytes),
            },
            owner: HashMap::new(),
            data: HashMap::new(),
            row_live: HashMap::new(),
            bank_live: vec![0; nb],
            log: WriteLog::new(),
            gating_suppressed: false,
            triggers: Vec::new(),
            ungate: Vec::new(),
            stats: RemapStats::default(),
        })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn flag(&self) -> FlagState {
        self.flag
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    pub fn pair_of_victim(&self, bank: usize) -> Option<usize> {
        self.victim_pair[bank]
    }

    pub fn pair_of_target(&self, bank: usize) -> Option<usize> {
        self.target_pair[bank]
    }

    pub fn stats(&self) -> &RemapStats {
        &self.stats
    }

    pub fn primary(&self) -> &RemapTrie {
        &self.primary
    }

    pub fn primary_stats(&self) -> TrieStats {
        self.primary.stats()
    }

    pub fn aux_stats(&self) -> TrieStats {
        self.aux.stats()
    }

    pub fn weak_trie_stats(&self) -> TrieStats {
        self.weak.trie.stats()
    }

    pub fn write_log(&self) -> &WriteLog {
        &self.log
    }

    pub fn gating_suppressed(&self) -> bool {
        self.gating_suppressed
    }

    /// Live column slots physically held by a bank.
    pub fn bank_occupancy(&self, bank: usize) -> u64 {
        self.bank_live[bank]
    }

    pub fn take_triggers(&mut self) -> Vec<EngineTrigger> {
        std::mem::take(&mut self.triggers)
    }

    /// Victim banks that must be powered up now (reverse migration started).
    pub fn take_ungates(&mut self) -> Vec<usize> {
        std::mem::take(&mut self.ungate)
    }

    pub fn dump_primary<W: Write>(&self, w: W) -> Result<()> {
        self.primary.dump(w)
    }

    // ---- key helpers ----

    fn key_at(&self, bank: usize, row: u32, col: u32) -> u32 {
        ((bank as u32) << (self.row_bits + self.col_bits)) | (row << self.col_bits) | col
    }

    fn bank_of(&self, key: u32) -> usize {
        (key >> (self.row_bits + self.col_bits)) as usize
    }

    fn row_key(&self, key: u32) -> u32 {
        key >> self.col_bits
    }

    fn row_in_bank(&self, key: u32) -> u32 {
        (key >> self.col_bits) & (self.geometry.rows_per_bank - 1)
    }

    fn col(&self, key: u32) -> u32 {
        key & (self.geometry.cols_per_row - 1)
    }

    fn decode_key(&self, key: u32) -> DecodedAddress {
        self.geometry.slot_of_key(key)
    }

    fn row_blocked(&self, row_key: u32) -> bool {
        self.weak.active && (self.weak.weak.contains(&row_key) || self.weak.hosts.contains_key(&row_key))
    }

    fn is_tracked(&self, bank: usize) -> bool {
        self.victim_pair[bank].is_some() || self.target_pair[bank].is_some()
    }

    /// Where a logical address lives when it has no translation entry.
    fn home(&self, lkey: u32) -> u32 {
        let rk = self.row_key(lkey);
        if self.weak.active && self.weak.weak.contains(&rk) {
            if let Some(RemapEntry::Override { row, .. }) = self.weak.trie.get(rk) {
                return self.key_at(self.bank_of(lkey), *row, self.col(lkey));
            }
        }
        lkey
    }

    fn entry_slot(&self, lkey: u32, entry: RemapEntry) -> u32 {
        let channel = self.geometry.slot_of_key(lkey).channel;
        let (rank, bank, row, col) = match entry {
            RemapEntry::Pair { rank, bank } => (rank, bank, self.row_in_bank(lkey), self.col(lkey)),
            RemapEntry::Override {
                rank,
                bank,
                row,
                column,
            } => (rank, bank, row, column),
        };
        let b = self.geometry.bank_index(channel, crate::dram::BankId::new(rank, bank));
        self.key_at(b, row, col)
    }

    fn location_key(&self, lkey: u32) -> u32 {
        match self.primary.get(lkey) {
            Some(e) => self.entry_slot(lkey, *e),
            None => self.home(lkey),
        }
    }

    /// Physical location of a logical address right now.
    pub fn location(&self, logical: &DecodedAddress) -> DecodedAddress {
        self.decode_key(self.location_key(self.geometry.slot_key(logical)))
    }

    /// Whether the address has been touched.
    pub fn is_live(&self, logical: &DecodedAddress) -> bool {
        let l = self.geometry.slot_key(logical);
        self.owner.get(&self.location_key(l)) == Some(&l)
    }

    /// Tag currently stored for a logical address.
    pub fn read_logical(&self, logical: &DecodedAddress) -> Option<u64> {
        let l = self.geometry.slot_key(logical);
        let p = self.location_key(l);
        if self.owner.get(&p) == Some(&l) {
            self.data.get(&p).copied()
        } else {
            None
        }
    }

    /// Every live logical address with its physical slot, ascending.
    pub fn live_mappings(&self) -> Vec<(DecodedAddress, DecodedAddress)> {
        let mut v: Vec<(u32, u32)> = self.owner.iter().map(|(&p, &l)| (l, p)).collect();
        v.sort_unstable();
        v.into_iter()
            .map(|(l, p)| (self.decode_key(l), self.decode_key(p)))
            .collect()
    }

    pub fn is_weak_row(&self, physical: &DecodedAddress) -> bool {
        self.weak.active && self.weak.weak.contains(&self.geometry.row_key(physical))
    }

    pub fn weak_row_count(&self) -> usize {
        self.weak.weak.len()
    }

    // ---- slot bookkeeping ----

    fn occupy(&mut self, slot: u32, lkey: u32) {
        let prev = self.owner.insert(slot, lkey);
        debug_assert!(prev.is_none(), "slot {slot:#x} already owned");
        *self.row_live.entry(self.row_key(slot)).or_insert(0) += 1;
        let b = self.bank_of(slot);
        self.bank_live[b] += 1;
        if self.is_tracked(b) && !self.aux_overflow && self.aux.insert(slot, lkey).is_err() {
            self.aux_overflow = true;
            self.reopen_all(TriggerReason::AuxTrie);
        }
    }

    fn vacate(&mut self, slot: u32) -> Option<u32> {
        let lkey = self.owner.remove(&slot)?;
        let rk = self.row_key(slot);
        if let Some(n) = self.row_live.get_mut(&rk) {
            *n -= 1;
            if *n == 0 {
                self.row_live.remove(&rk);
            }
        }
        let b = self.bank_of(slot);
        self.bank_live[b] -= 1;
        self.aux.remove(slot);
        Some(lkey)
    }

    /// Moves whatever lives in `from` (owner and tag) to the free slot `to`.
    fn move_slot(&mut self, from: u32, to: u32) {
        if let Some(l) = self.vacate(from) {
            self.occupy(to, l);
        }
        if let Some(tag) = self.data.remove(&from) {
            self.data.insert(to, tag);
        }
    }

    fn resolve_in_bank(&self, bank: usize, row: u32, col: u32) -> Result<(u32, u32)> {
        collision_resolve(
            self.geometry.rows_per_bank,
            self.geometry.cols_per_row,
            row,
            col,
            |r, c| {
                let k = self.key_at(bank, r, c);
                self.owner.contains_key(&k) || self.row_blocked(self.row_key(k))
            },
        )
        .ok_or(Error::BankFull(bank))
    }

    fn find_free_row(&self, bank: usize) -> Result<u32> {
        (0..self.geometry.rows_per_bank)
            .find(|&r| {
                let rk = self.row_key(self.key_at(bank, r, 0));
                !self.row_live.contains_key(&rk)
                    && !self.weak.weak.contains(&rk)
                    && !self.weak.hosts.contains_key(&rk)
            })
            .ok_or(Error::BankFull(bank))
    }

    fn copy_op(&self, src: u32, dst: u32, columns: u32, kind: CopyKind) -> CopyOp {
        CopyOp {
            src: self.decode_key(src),
            dst: self.decode_key(dst),
            columns,
            kind,
        }
    }

    /// Makes `lkey` the owner of `slot`, moving any other occupant away.
    fn claim(&mut self, slot: u32, lkey: u32, copies: &mut Vec<CopyOp>) -> Result<()> {
        let rk = self.row_key(slot);
        if let Some(&w) = self.weak.hosts.get(&rk) {
            if w != self.row_key(lkey) {
                self.relocate_host(rk, copies)?;
            }
        }
        if let Some(o) = self.owner.get(&slot).copied() {
            if o == lkey {
                return Ok(());
            }
            // only relocated victims live away from home outside host rows
            let Some(entry) = self.primary.get(o).copied() else {
                return Err(Error::InvalidParameter(format!(
                    "slot {slot:#x} owned by {o:#x} without a translation entry"
                )));
            };
            let b = self.bank_of(slot);
            let (r, c) = self.resolve_in_bank(b, self.row_in_bank(slot), self.col(slot))?;
            let to = self.key_at(b, r, c);
            let (RemapEntry::Pair { rank, bank } | RemapEntry::Override { rank, bank, .. }) = entry;
            self.move_slot(slot, to);
            // same key, so no extra storage is needed
            self.primary.insert(
                o,
                RemapEntry::Override {
                    rank,
                    bank,
                    row: r,
                    column: c,
                },
            )?;
            self.stats.displacements += 1;
            self.stats.collisions += 1;
            copies.push(self.copy_op(slot, to, 1, CopyKind::Displacement));
        }
        self.occupy(slot, lkey);
        Ok(())
    }

    fn relocate_host(&mut self, host: u32, copies: &mut Vec<CopyOp>) -> Result<()> {
        let weak_row = self.weak.hosts.remove(&host).expect("host row");
        let bank = self.bank_of(host << self.col_bits);
        let new_row = match self.find_free_row(bank) {
            Ok(r) => r,
            Err(e) => {
                self.weak.hosts.insert(host, weak_row);
                return Err(e);
            }
        };
        let new_host = self.row_key(self.key_at(bank, new_row, 0));
        let d = self.decode_key(new_host << self.col_bits);
        self.weak.trie.insert(
            weak_row,
            RemapEntry::Override {
                rank: d.rank,
                bank: d.bank,
                row: new_row,
                column: 0,
            },
        )?;
        self.weak.hosts.insert(new_host, weak_row);
        for c in 0..self.geometry.cols_per_row {
            let from = (host << self.col_bits) | c;
            if self.owner.contains_key(&from) || self.data.contains_key(&from) {
                self.move_slot(from, (new_host << self.col_bits) | c);
            }
        }
        self.stats.host_relocations += 1;
        copies.push(self.copy_op(
            host << self.col_bits,
            new_host << self.col_bits,
            self.geometry.cols_per_row,
            CopyKind::HostRelocation,
        ));
        Ok(())
    }

    /// Picks the target slot for a victim address: its own (row, column) in
    /// the target bank when free, else the next free slot.
    fn allocate_in_target(&mut self, pair: usize, lkey: u32) -> Result<(u32, RemapEntry)> {
        let t = self.pairs[pair].target;
        let (row, col) = (self.row_in_bank(lkey), self.col(lkey));
        let natural = self.key_at(t, row, col);
        let tb = self.geometry.bank_of_index(t).1;
        let (slot, entry) = if !self.owner.contains_key(&natural) && !self.row_blocked(self.row_key(natural)) {
            (
                natural,
                RemapEntry::Pair {
                    rank: tb.rank,
                    bank: tb.bank,
                },
            )
        } else {
            let (r, c) = self.resolve_in_bank(t, row, col)?;
            (
                self.key_at(t, r, c),
                RemapEntry::Override {
                    rank: tb.rank,
                    bank: tb.bank,
                    row: r,
                    column: c,
                },
            )
        };
        self.primary.insert(lkey, entry)?;
        if entry.is_override() {
            self.stats.collisions += 1;
        }
        Ok((slot, entry))
    }

    /// Moves a live victim address from home into its target bank.
    fn copy_forward(&mut self, pair: usize, lkey: u32, kind: CopyKind) -> Result<CopyOp> {
        let src = self.home(lkey);
        let (dst, _) = self.allocate_in_target(pair, lkey)?;
        self.move_slot(src, dst);
        Ok(self.copy_op(src, dst, 1, kind))
    }

    /// Moves a relocated victim address back home and drops its entry.
    fn copy_reverse(&mut self, lkey: u32, kind: CopyKind, copies: &mut Vec<CopyOp>) -> Result<()> {
        let entry = *self.primary.get(lkey).expect("entry for reverse copy");
        let src = self.entry_slot(lkey, entry);
        let home = self.home(lkey);
        let tag = self.data.remove(&src);
        self.vacate(src);
        self.primary.remove(lkey);
        self.claim(home, lkey, copies)?;
        if let Some(tag) = tag {
            self.data.insert(home, tag);
        }
        copies.push(self.copy_op(src, home, 1, kind));
        Ok(())
    }

    // ---- request path ----

    /// Routes one request, applies its functional effect (a write stores
    /// `tag`, a read observes the stored tag) and returns where it must be
    /// served and what it costs.
    pub fn access(&mut self, op: Op, logical: &DecodedAddress, tag: u64) -> Result<Routed> {
        if !self.geometry.contains(logical) {
            return Err(Error::AddressOutOfRange {
                address: self.geometry.encode(logical),
                capacity: self.geometry.capacity_bytes(),
            });
        }
        let lkey = self.geometry.slot_key(logical);
        let mut r = Routed {
            physical: *logical,
            translation_stall_cycles: 0,
            log_search_cycles: 0,
            interrupted: false,
            weak_row: false,
            copies: Vec::new(),
            read_tag: None,
        };
        let vb = self.bank_of(lkey);
        let slot = match self.victim_pair[vb] {
            Some(p) => match self.route_victim(p, op, lkey, &mut r) {
                Err(Error::CapacityExceeded { .. }) => {
                    self.reopen_all(TriggerReason::PrimaryCapacity);
                    self.route_victim(p, op, lkey, &mut r)?
                }
                other => other?,
            },
            None => self.route_home(lkey, &mut r)?,
        };
        match op {
            Op::Write => {
                self.data.insert(slot, tag);
            }
            Op::Read => r.read_tag = self.data.get(&slot).copied(),
        }
        r.physical = self.decode_key(slot);
        self.stats.translation_stall_cycles += r.translation_stall_cycles;
        self.apply_check();
        Ok(r)
    }

    fn route_home(&mut self, lkey: u32, r: &mut Routed) -> Result<u32> {
        let slot = self.home(lkey);
        if slot != lkey {
            r.weak_row = true;
            r.translation_stall_cycles += WEAK_ROW_STALL_CYCLES;
            self.stats.weak_row_accesses += 1;
        }
        self.claim(slot, lkey, &mut r.copies)?;
        Ok(slot)
    }

    fn charge_entry(&mut self, entry: RemapEntry, r: &mut Routed) {
        self.stats.translations += 1;
        if entry.is_override() {
            r.interrupted = true;
            r.translation_stall_cycles += COLLISION_STALL_CYCLES;
            self.stats.interrupts += 1;
        }
    }

    fn route_victim(&mut self, p: usize, op: Op, lkey: u32, r: &mut Routed) -> Result<u32> {
        match self.pairs[p].state {
            PairState::Normal => self.route_home(lkey, r),
            PairState::Gated | PairState::Forwarding => {
                if let Some(entry) = self.primary.get(lkey).copied() {
                    self.charge_entry(entry, r);
                    return Ok(self.entry_slot(lkey, entry));
                }
                let home = self.home(lkey);
                let pending = self.pairs[p].state == PairState::Forwarding
                    && self.owner.get(&home) == Some(&lkey);
                if pending {
                    if op == Op::Read {
                        if home != lkey {
                            r.weak_row = true;
                            r.translation_stall_cycles += WEAK_ROW_STALL_CYCLES;
                            self.stats.weak_row_accesses += 1;
                        }
                        return Ok(home);
                    }
                    let copy = self.copy_forward(p, lkey, CopyKind::Priority)?;
                    self.log.record(lkey);
                    self.stats.priority_copies += 1;
                    r.log_search_cycles += LOG_SEARCH_CYCLES;
                    r.copies.push(copy);
                    return Ok(self.location_key(lkey));
                }
                // first touch while the victim is (being) drained
                let (slot, entry) = self.allocate_in_target(p, lkey)?;
                self.charge_entry(entry, r);
                self.occupy(slot, lkey);
                Ok(slot)
            }
            PairState::Reversing => match self.primary.get(lkey).copied() {
                Some(entry) if op == Op::Write => {
                    let _ = entry;
                    self.copy_reverse(lkey, CopyKind::Priority, &mut r.copies)?;
                    self.log.record(lkey);
                    self.stats.priority_copies += 1;
                    r.log_search_cycles += LOG_SEARCH_CYCLES;
                    Ok(self.home(lkey))
                }
                Some(entry) => {
                    self.charge_entry(entry, r);
                    Ok(self.entry_slot(lkey, entry))
                }
                None => self.route_home(lkey, r),
            },
        }
    }

    // ---- migration ----

    /// Starts migrating `src[i]` into `dst[i]` (forward) or back (reverse).
    /// Every `(src[i], dst[i])` must be a configured pair (victim, target)
    /// for forward or (target, victim) for reverse. Returns the number of
    /// copies scheduled.
    pub fn migrate_and_remap(&mut self, src: &[usize], dst: &[usize], direction: Direction) -> Result<usize> {
        if src.len() != dst.len() {
            return Err(Error::LengthMismatch {
                src: src.len(),
                dst: dst.len(),
            });
        }
        let mut ids = Vec::with_capacity(src.len());
        for (&s, &d) in src.iter().zip(dst) {
            let (victim, target) = match direction {
                Direction::Forward => (s, d),
                Direction::Reverse => (d, s),
            };
            match self.victim_pair.get(victim).copied().flatten() {
                Some(p) if self.pairs[p].target == target => ids.push(p),
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "banks {s} -> {d} are not a configured pair"
                    )))
                }
            }
        }
        match direction {
            Direction::Forward => self.begin_forward(&ids),
            Direction::Reverse => self.begin_reverse(&ids),
        }
    }

    /// Starts draining victims into their targets: FLAG 00 -> 01.
    pub fn begin_forward(&mut self, pairs: &[usize]) -> Result<usize> {
        if self.gating_suppressed {
            return Ok(0);
        }
        let pairs: Vec<usize> = pairs
            .iter()
            .copied()
            .filter(|&p| self.pairs[p].state == PairState::Normal && !self.pairs[p].reopened)
            .collect();
        if pairs.is_empty() {
            return Ok(0);
        }
        if self.flag != FlagState::Migrating {
            self.flag = self.flag.transition(FlagState::Migrating)?;
        }
        let mut scheduled = 0;
        for p in pairs {
            let (lo, hi) = self.geometry.bank_key_range(self.pairs[p].victim);
            // recursive walk of the victim bank's live slots
            let mut owners: Vec<u32> = Vec::new();
            self.aux.visit_range(lo, hi, |_, &o| {
                owners.push(o);
                true
            });
            scheduled += owners.len();
            let pair = &mut self.pairs[p];
            pair.state = PairState::Forwarding;
            pair.schedule = owners.into();
        }
        Ok(scheduled)
    }

    /// Starts moving relocated addresses back home. Gated victims are
    /// queued for ungating; a forward migration in flight is turned around.
    pub fn begin_reverse(&mut self, pairs: &[usize]) -> Result<usize> {
        let mut scheduled = 0;
        for &p in pairs {
            let state = self.pairs[p].state;
            if !matches!(state, PairState::Gated | PairState::Forwarding) {
                continue;
            }
            if self.flag != FlagState::Migrating {
                self.flag = self.flag.transition(FlagState::Migrating)?;
            }
            if state == PairState::Gated {
                self.ungate.push(self.pairs[p].victim);
            }
            let (lo, hi) = self.geometry.bank_key_range(self.pairs[p].victim);
            let keys: VecDeque<u32> = self.primary.range(lo, hi).into_iter().map(|(k, _)| k).collect();
            scheduled += keys.len();
            let pair = &mut self.pairs[p];
            pair.state = PairState::Reversing;
            pair.schedule = keys;
            self.stats.reverse_migrations += 1;
        }
        Ok(scheduled)
    }

    pub fn migration_active(&self) -> bool {
        self.pairs.iter().any(|p| p.is_migrating())
    }

    pub fn pending_copies(&self) -> usize {
        self.pairs.iter().map(|p| p.schedule.len()).sum()
    }

    /// Performs the next scheduled copy (functionally) and returns the
    /// copies the controller must time, or `None` when nothing is left.
    pub fn next_copy(&mut self) -> Result<Option<Vec<CopyOp>>> {
        loop {
            let Some(p) = self
                .pairs
                .iter()
                .position(|p| p.is_migrating() && !p.schedule.is_empty())
            else {
                return Ok(None);
            };
            let lkey = self.pairs[p].schedule.pop_front().expect("non-empty");
            let mut copies = Vec::new();
            match self.pairs[p].state {
                PairState::Forwarding => {
                    if self.primary.contains(lkey) {
                        if self.log.contains(lkey) {
                            self.stats.skipped_logged += 1;
                        }
                        continue;
                    }
                    if self.owner.get(&self.home(lkey)) != Some(&lkey) {
                        continue;
                    }
                    match self.copy_forward(p, lkey, CopyKind::Migration) {
                        Ok(c) => copies.push(c),
                        Err(Error::CapacityExceeded { .. }) => {
                            self.reopen_all(TriggerReason::PrimaryCapacity);
                            continue;
                        }
                        Err(e) => return Err(e),
                    }
                }
                PairState::Reversing => {
                    if !self.primary.contains(lkey) {
                        if self.log.contains(lkey) {
                            self.stats.skipped_logged += 1;
                        }
                        continue;
                    }
                    self.copy_reverse(lkey, CopyKind::Migration, &mut copies)?;
                }
                _ => unreachable!("only migrating pairs have schedules"),
            }
            self.stats.migration_copies += 1;
            self.apply_check();
            return Ok(Some(copies));
        }
    }

    /// Migrating pairs whose copy schedule is exhausted.
    pub fn drained_pairs(&self) -> Vec<usize> {
        (0..self.pairs.len())
            .filter(|&p| self.pairs[p].is_migrating() && self.pairs[p].schedule.is_empty())
            .collect()
    }

    /// Completes a drained pair: a forward pair becomes gated (the caller has
    /// powered the victim off), a reverse pair returns to normal. When no
    /// migration remains, FLAG leaves 01 and the write log is cleared.
    pub fn settle(&mut self, p: usize) -> Result<()> {
        let pair = &mut self.pairs[p];
        if !pair.schedule.is_empty() {
            return Err(Error::InvalidParameter(format!("pair {p} still has copies pending")));
        }
        match pair.state {
            PairState::Forwarding => pair.state = PairState::Gated,
            PairState::Reversing => {
                pair.state = PairState::Normal;
                pair.reopened = true;
            }
            _ => return Ok(()),
        }
        if !self.migration_active() {
            self.log.clear();
            let next = if self.pairs.iter().any(|p| p.state == PairState::Gated) {
                FlagState::Gated
            } else {
                FlagState::Idle
            };
            self.flag = self.flag.transition(next)?;
        }
        Ok(())
    }

    // ---- overflow handling ----

    pub fn occupancy_check(&self) -> OccupancyAction {
        self.check_with_reason().0
    }

    fn check_with_reason(&self) -> (OccupancyAction, TriggerReason) {
        let slots = self.geometry.slots_per_bank() as f64;
        for (i, p) in self.pairs.iter().enumerate() {
            if matches!(p.state, PairState::Gated | PairState::Forwarding)
                && self.bank_live[p.target] as f64 >= self.params.occupancy_threshold * slots
            {
                return (OccupancyAction::ReverseMigrate(i), TriggerReason::TargetOccupancy);
            }
        }
        if self.primary.utilization() >= self.params.trie_threshold {
            return (OccupancyAction::ReopenAll, TriggerReason::PrimaryTrie);
        }
        if self.aux.utilization() >= self.params.trie_threshold {
            return (OccupancyAction::ReopenAll, TriggerReason::AuxTrie);
        }
        (OccupancyAction::None, TriggerReason::TargetOccupancy)
    }

    /// Periodic check from the controller.
    pub fn periodic_check(&mut self) -> OccupancyAction {
        self.stats.occupancy_checks += 1;
        self.apply_check()
    }

    fn apply_check(&mut self) -> OccupancyAction {
        let (action, reason) = self.check_with_reason();
        match action {
            OccupancyAction::None => {}
            OccupancyAction::ReverseMigrate(p) => {
                if self.begin_reverse(&[p]).is_ok() {
                    self.triggers.push(EngineTrigger { action, reason });
                }
            }
            OccupancyAction::ReopenAll => self.reopen_all(reason),
        }
        action
    }

    /// Reverses every gated or draining pair and suppresses further gating.
    pub fn reopen_now(&mut self) {
        self.reopen_all(TriggerReason::Scheduled);
    }

    fn reopen_all(&mut self, reason: TriggerReason) {
        let live: Vec<usize> = (0..self.pairs.len())
            .filter(|&p| matches!(self.pairs[p].state, PairState::Gated | PairState::Forwarding))
            .collect();
        if self.gating_suppressed && live.is_empty() {
            return;
        }
        self.gating_suppressed = true;
        self.stats.reopen_all += 1;
        self.triggers.push(EngineTrigger {
            action: OccupancyAction::ReopenAll,
            reason,
        });
        // begin_reverse only fails on an impossible FLAG transition
        self.begin_reverse(&live).expect("reverse from gated or migrating");
    }

    // ---- weak rows ----

    /// Redirects every weak row (global row ids) to the lowest-numbered
    /// free healthy row of the same bank. Returns the row copies performed.
    pub fn install_weak_rows(&mut self, row_ids: &[u64]) -> Result<Vec<CopyOp>> {
        let mut ids: Vec<u64> = row_ids.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let mut rows = Vec::with_capacity(ids.len());
        for id in ids {
            let d = self.geometry.row_of_id(id)?;
            rows.push(self.geometry.row_key(&d));
        }
        self.weak.active = true;
        self.weak.weak.extend(rows.iter().copied());
        let mut copies = Vec::new();
        for rk in rows {
            let bank = self.bank_of(rk << self.col_bits);
            let host_row = self.find_free_row(bank)?;
            let host = self.row_key(self.key_at(bank, host_row, 0));
            let d = self.decode_key(host << self.col_bits);
            self.weak.trie.insert(
                rk,
                RemapEntry::Override {
                    rank: d.rank,
                    bank: d.bank,
                    row: host_row,
                    column: 0,
                },
            )?;
            self.weak.hosts.insert(host, rk);
            for c in 0..self.geometry.cols_per_row {
                let from = (rk << self.col_bits) | c;
                if self.owner.contains_key(&from) || self.data.contains_key(&from) {
                    self.move_slot(from, (host << self.col_bits) | c);
                }
            }
            copies.push(self.copy_op(
                rk << self.col_bits,
                host << self.col_bits,
                self.geometry.cols_per_row,
                CopyKind::WeakRowInstall,
            ));
        }
        Ok(copies)
    }

    /// Weak row -> host row pairs as global row ids, ascending.
    pub fn weak_row_hosts(&self) -> BTreeMap<u64, u64> {
        self.weak
            .hosts
            .iter()
            .map(|(&h, &w)| (w as u64, h as u64))
            .collect()
    }
}
