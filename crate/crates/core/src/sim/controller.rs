//! Event-driven memory controller: per-bank FIFO queues, one command slot
//! per channel per clock, open-page service, refresh, low-power entry and
//! background migration.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::dram::{BankState, Command, Geometry, Op, Picos, PowerState, TimingParams};
use crate::energy::BankActivity;
use crate::remap::{CopyOp, EngineTrigger, OccupancyAction, PairState, RemapEngine, TriggerReason};
use crate::trace::MemoryRequest;
use crate::{Error, Result};

/// Controller knobs, all in picoseconds.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerParams {
    pub lp_mode: bool,
    pub lp_threshold: Picos,
    pub refresh_period: Picos,
    pub per_bank_refresh: bool,
    /// Cost of one column copy.
    pub copy_cost: Picos,
    /// Cost of one whole-row copy.
    pub row_copy_cost: Picos,
    pub check_interval: Picos,
    /// When victims start draining (None: never).
    pub gate_at: Option<Picos>,
    pub reopen_at: Option<Picos>,
    /// Minimum simulated time.
    pub run_min: Picos,
    /// Extended refresh window in force: accesses to weak rows are violations.
    pub extended_refresh: bool,
}

/// One reverse-migration or reopen decision, stamped with its cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerRecord {
    pub cycle: u64,
    pub action: OccupancyAction,
    pub reason: TriggerReason,
}

/// Raw results of one simulation.
#[derive(Debug)]
pub struct SimOutcome {
    pub banks: Vec<BankState>,
    pub activity: Vec<BankActivity>,
    pub span_end: Picos,
    pub reads: u64,
    pub writes: u64,
    pub latency_sum: u128,
    pub latency_max: Picos,
    pub refresh_per_rank: Vec<u64>,
    pub bank_refreshes: u64,
    pub lp_entries: u64,
    pub engine: Option<RemapEngine>,
    pub triggers: Vec<TriggerRecord>,
    pub copies: u64,
    /// Columns moved between banks (migration, priority and displacement copies).
    pub inter_bank_columns: u64,
    pub row_copies: u64,
    /// Time banks spent busy with copies, summed over banks.
    pub copy_busy: Picos,
    /// Request delay spent waiting for copies the request depended on.
    pub migration_stall: Picos,
    pub gated_bank_commands: u64,
    pub weak_row_violations: u64,
    /// Duration of the weak-row copies performed before the first request.
    pub upfront: Picos,
    /// Reads whose observed tag differed from the most recent write.
    pub read_mismatches: u64,
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    arrival: Picos,
    ready: Picos,
    op: Op,
    row: u32,
    column: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Ev {
    Refresh(usize),
    Gate,
    Reopen,
    Arrival,
    Service(usize),
    Settle(usize),
    Copy(usize),
    Check,
    LpEnter(usize),
}

impl Ev {
    fn priority(self) -> u8 {
        match self {
            Ev::Refresh(_) => 0,
            Ev::Gate => 1,
            Ev::Reopen => 2,
            Ev::Arrival => 3,
            Ev::Service(_) => 4,
            Ev::Settle(_) => 5,
            Ev::Copy(_) => 6,
            Ev::Check => 7,
            Ev::LpEnter(_) => 8,
        }
    }
}

pub struct Controller {
    g: Geometry,
    t: TimingParams,
    p: ControllerParams,
    banks: Vec<BankState>,
    act: Vec<BankActivity>,
    queues: Vec<VecDeque<Pending>>,
    engine: Option<RemapEngine>,
    cmd_free: Vec<Picos>,
    bus_free: Vec<Picos>,
    rr: Vec<usize>,
    last_activity: Vec<Picos>,
    /// Next refresh time per rank, or per bank in per-bank mode.
    next_refresh: Vec<Picos>,
    next_check: Picos,
    gate_pending: bool,
    reopen_pending: bool,
    now: Picos,
    last_done: Picos,
    out: Counters,
    expected: std::collections::HashMap<u64, u64>,
}

#[derive(Default)]
struct Counters {
    reads: u64,
    writes: u64,
    latency_sum: u128,
    latency_max: Picos,
    refresh_per_rank: Vec<u64>,
    bank_refreshes: u64,
    lp_entries: u64,
    triggers: Vec<TriggerRecord>,
    copies: u64,
    inter_bank_columns: u64,
    row_copies: u64,
    copy_busy: Picos,
    migration_stall: Picos,
    gated_bank_commands: u64,
    weak_row_violations: u64,
    upfront: Picos,
    read_mismatches: u64,
}

impl Controller {
    /// `bank_timing[i]` is the timing of flat bank `i`.
    pub fn new(
        geometry: Geometry,
        nominal: TimingParams,
        bank_timing: Vec<TimingParams>,
        params: ControllerParams,
        engine: Option<RemapEngine>,
    ) -> Result<Self> {
        let nb = geometry.total_banks();
        if bank_timing.len() != nb {
            return Err(Error::InvalidParameter(format!(
                "{} bank timings for {nb} banks",
                bank_timing.len()
            )));
        }
        if params.refresh_period == 0 {
            return Err(Error::InvalidParameter("refresh period must be positive".into()));
        }
        let ranks = geometry.total_ranks();
        let next_refresh = if params.per_bank_refresh {
            let per = geometry.banks_per_rank as u64;
            (0..nb)
                .map(|b| params.refresh_period + params.refresh_period * (b as u64 % per) / per)
                .collect()
        } else {
            vec![params.refresh_period; ranks]
        };
        let channels = geometry.channels as usize;
        Ok(Self {
            g: geometry,
            t: nominal,
            next_check: params.check_interval,
            gate_pending: params.gate_at.is_some(),
            reopen_pending: params.reopen_at.is_some(),
            p: params,
            banks: bank_timing.into_iter().map(BankState::new).collect(),
            act: vec![BankActivity::default(); nb],
            queues: vec![VecDeque::new(); nb],
            engine,
            cmd_free: vec![0; channels],
            bus_free: vec![0; channels],
            rr: vec![0; channels],
            last_activity: vec![0; ranks],
            next_refresh,
            now: 0,
            last_done: 0,
            out: Counters {
                refresh_per_rank: vec![0; ranks],
                ..Counters::default()
            },
            expected: std::collections::HashMap::new(),
        })
    }

    fn bpc(&self) -> usize {
        self.g.banks_per_channel() as usize
    }

    fn channel_of_bank(&self, b: usize) -> usize {
        b / self.bpc()
    }

    fn rank_of_bank(&self, b: usize) -> usize {
        b / self.g.banks_per_rank as usize
    }

    fn rank_banks(&self, r: usize) -> std::ops::Range<usize> {
        let per = self.g.banks_per_rank as usize;
        r * per..(r + 1) * per
    }

    fn cycle_of(&self, t: Picos) -> u64 {
        t / self.t.t_ck
    }

    /// Installs weak-row redirections before the first request and times
    /// their row copies.
    pub fn install_weak_rows(&mut self, rows: &[u64]) -> Result<usize> {
        let Some(engine) = self.engine.as_mut() else {
            return Err(Error::InvalidParameter("weak-row remapping needs an engine".into()));
        };
        let copies = engine.install_weak_rows(rows)?;
        let start = self.now;
        let done = self.exec_copies(&copies, start)?;
        self.out.upfront = done - start;
        Ok(copies.len())
    }

    fn ready_time(&self, b: usize) -> Option<Picos> {
        self.queues[b].front().map(|h| h.ready.max(self.banks[b].busy_until))
    }

    fn next_event(&self, trace: &[MemoryRequest], idx: usize) -> Option<(Picos, Ev)> {
        let mut best: Option<(Picos, Ev)> = None;
        let mut consider = |t: Picos, ev: Ev| {
            let t = t.max(self.now);
            let better = match best {
                None => true,
                Some((bt, bev)) => (t, ev.priority()) < (bt, bev.priority()),
            };
            if better {
                best = Some((t, ev));
            }
        };
        for (i, &t) in self.next_refresh.iter().enumerate() {
            consider(t, Ev::Refresh(i));
        }
        if self.gate_pending {
            consider(self.p.gate_at.unwrap_or(0), Ev::Gate);
        }
        if self.reopen_pending {
            consider(self.p.reopen_at.unwrap_or(0), Ev::Reopen);
        }
        if let Some(r) = trace.get(idx) {
            consider(r.issue_cycle * self.t.t_ck, Ev::Arrival);
        }
        let bpc = self.bpc();
        for ch in 0..self.g.channels as usize {
            let ready = (ch * bpc..(ch + 1) * bpc).filter_map(|b| self.ready_time(b)).min();
            if let Some(r) = ready {
                consider(r.max(self.cmd_free[ch]), Ev::Service(ch));
            }
        }
        if let Some(e) = &self.engine {
            for p in e.drained_pairs() {
                let pair = &e.pairs()[p];
                match pair.state {
                    PairState::Forwarding if self.queues[pair.victim].is_empty() => {
                        consider(self.banks[pair.victim].busy_until, Ev::Settle(p))
                    }
                    PairState::Reversing => consider(self.now, Ev::Settle(p)),
                    _ => {}
                }
            }
            if let Some(pair) = e.pairs().iter().find(|p| p.is_migrating() && p.pending_copies() > 0) {
                let ch = self.channel_of_bank(pair.victim);
                let t = self.cmd_free[ch]
                    .max(self.banks[pair.victim].busy_until)
                    .max(self.banks[pair.target].busy_until);
                consider(t, Ev::Copy(ch));
            }
            if !e.pairs().is_empty() {
                consider(self.next_check, Ev::Check);
            }
        }
        if self.p.lp_mode {
            for r in 0..self.g.total_ranks() {
                let banks = self.rank_banks(r);
                let quiet = banks.clone().all(|b| self.queues[b].is_empty());
                let awake = banks
                    .clone()
                    .any(|b| matches!(self.banks[b].power, PowerState::ActiveIdle | PowerState::RowOpen));
                if quiet && awake {
                    let busy = banks.map(|b| self.banks[b].busy_until).max().unwrap_or(0);
                    consider(busy.max(self.last_activity[r] + self.p.lp_threshold), Ev::LpEnter(r));
                }
            }
        }
        best
    }

    fn alive(&self, trace: &[MemoryRequest], idx: usize) -> bool {
        idx < trace.len()
            || self.gate_pending
            || self.reopen_pending
            || self.queues.iter().any(|q| !q.is_empty())
            || self.engine.as_ref().is_some_and(|e| e.migration_active())
    }

    /// Replays `trace` and returns the raw outcome.
    pub fn run(mut self, trace: &[MemoryRequest]) -> Result<SimOutcome> {
        let mut idx = 0;
        let mut horizon;
        loop {
            horizon = if self.alive(trace, idx) {
                Picos::MAX
            } else {
                self.p.run_min.max(self.last_done)
            };
            let Some((t, ev)) = self.next_event(trace, idx) else { break };
            if t > horizon {
                break;
            }
            self.now = t;
            match ev {
                Ev::Refresh(i) => self.refresh(i, t)?,
                Ev::Gate => {
                    self.gate_pending = false;
                    if let Some(e) = self.engine.as_mut() {
                        let all: Vec<usize> = (0..e.pairs().len()).collect();
                        e.begin_forward(&all)?;
                    }
                    self.post_engine(t)?;
                }
                Ev::Reopen => {
                    self.reopen_pending = false;
                    if let Some(e) = self.engine.as_mut() {
                        e.reopen_now();
                    }
                    self.post_engine(t)?;
                }
                Ev::Arrival => {
                    self.arrive(&trace[idx], t)?;
                    idx += 1;
                }
                Ev::Service(ch) => self.service(ch, t)?,
                Ev::Settle(p) => self.settle(p, t)?,
                Ev::Copy(ch) => {
                    let copies = self.engine.as_mut().expect("copy needs engine").next_copy()?;
                    if let Some(c) = copies {
                        self.post_engine(t)?;
                        self.exec_copies(&c, t)?;
                        self.cmd_free[ch] = t + self.t.t_ck;
                    } else {
                        self.post_engine(t)?;
                    }
                }
                Ev::Check => {
                    self.next_check = t + self.p.check_interval;
                    if let Some(e) = self.engine.as_mut() {
                        e.periodic_check();
                    }
                    self.post_engine(t)?;
                }
                Ev::LpEnter(r) => self.enter_lp(r, t)?,
            }
        }
        if horizon == Picos::MAX {
            horizon = self.p.run_min.max(self.last_done);
        }
        let span_end = self
            .banks
            .iter()
            .map(|b| b.busy_until)
            .fold(horizon.max(self.now), Picos::max);
        for b in &mut self.banks {
            b.close_residency(span_end);
        }
        for (i, a) in self.act.iter_mut().enumerate() {
            a.residency = *self.banks[i].residency();
            a.transients = self.banks[i].transients;
        }
        if let Some(e) = &self.engine {
            for (i, b) in self.banks.iter_mut().enumerate() {
                b.occupancy = e.bank_occupancy(i);
            }
        }
        let c = self.out;
        Ok(SimOutcome {
            banks: self.banks,
            activity: self.act,
            span_end,
            reads: c.reads,
            writes: c.writes,
            latency_sum: c.latency_sum,
            latency_max: c.latency_max,
            refresh_per_rank: c.refresh_per_rank,
            bank_refreshes: c.bank_refreshes,
            lp_entries: c.lp_entries,
            engine: self.engine,
            triggers: c.triggers,
            copies: c.copies,
            inter_bank_columns: c.inter_bank_columns,
            row_copies: c.row_copies,
            copy_busy: c.copy_busy,
            migration_stall: c.migration_stall,
            gated_bank_commands: c.gated_bank_commands,
            weak_row_violations: c.weak_row_violations,
            upfront: c.upfront,
            read_mismatches: c.read_mismatches,
        })
    }

    fn gated_error(&mut self, b: usize) -> Error {
        self.out.gated_bank_commands += 1;
        Error::TranslationToGatedBank(b)
    }

    /// Brings every powered-down bank of rank `r` back to idle.
    fn wake_rank(&mut self, r: usize, t: Picos) -> Result<()> {
        for b in self.rank_banks(r) {
            let bank = &mut self.banks[b];
            if bank.power == PowerState::PoweredDownLp {
                let at = t.max(bank.busy_until);
                bank.set_power_state(PowerState::ActiveIdle, at)?;
                bank.busy_until = at + self.t.t_xp;
            }
        }
        self.last_activity[r] = self.last_activity[r].max(t);
        Ok(())
    }

    fn enter_lp(&mut self, r: usize, t: Picos) -> Result<()> {
        for b in self.rank_banks(r) {
            let bank = &mut self.banks[b];
            if matches!(bank.power, PowerState::GatedOff | PowerState::PoweredDownLp) {
                continue;
            }
            let idle_at = bank.precharge(t)?;
            bank.set_power_state(PowerState::PoweredDownLp, idle_at)?;
        }
        self.out.lp_entries += 1;
        Ok(())
    }

    fn refresh_bank(&mut self, b: usize, t: Picos) -> Result<bool> {
        if self.banks[b].is_gated() {
            return Ok(false);
        }
        let r = self.rank_of_bank(b);
        if self.banks[b].power == PowerState::PoweredDownLp {
            self.wake_rank(r, t)?;
        }
        let bank = &mut self.banks[b];
        let start = bank.precharge(t)?;
        let done = bank.issue(Command::Refresh, start)?;
        self.act[b].refreshes += 1;
        self.out.bank_refreshes += 1;
        self.last_activity[r] = self.last_activity[r].max(done);
        Ok(true)
    }

    fn refresh(&mut self, i: usize, t: Picos) -> Result<()> {
        self.next_refresh[i] += self.p.refresh_period;
        if self.p.per_bank_refresh {
            if self.refresh_bank(i, t)? {
                let r = self.rank_of_bank(i);
                self.out.refresh_per_rank[r] += 1;
            }
        } else {
            let mut any = false;
            for b in self.rank_banks(i) {
                any |= self.refresh_bank(b, t)?;
            }
            if any {
                self.out.refresh_per_rank[i] += 1;
            }
        }
        Ok(())
    }

    /// Drains ungate requests and triggers left by the engine.
    fn post_engine(&mut self, t: Picos) -> Result<()> {
        let Some(e) = self.engine.as_mut() else { return Ok(()) };
        let ungates = e.take_ungates();
        let triggers: Vec<EngineTrigger> = e.take_triggers();
        for b in ungates {
            let bank = &mut self.banks[b];
            if bank.is_gated() {
                let at = t.max(bank.busy_until);
                bank.set_power_state(PowerState::ActiveIdle, at)?;
                bank.busy_until = at + self.t.t_xp;
            }
        }
        let cycle = self.cycle_of(t);
        self.out.triggers.extend(triggers.into_iter().map(|tr| TriggerRecord {
            cycle,
            action: tr.action,
            reason: tr.reason,
        }));
        Ok(())
    }

    /// Times a list of copies issued at `t`; returns when the last finishes.
    fn exec_copies(&mut self, copies: &[CopyOp], t: Picos) -> Result<Picos> {
        let mut done_all = t;
        for c in copies {
            let src = self.g.bank_index_of(&c.src);
            let dst = self.g.bank_index_of(&c.dst);
            for b in [src, dst] {
                if self.banks[b].is_gated() {
                    return Err(self.gated_error(b));
                }
                if self.banks[b].power == PowerState::PoweredDownLp {
                    self.wake_rank(self.rank_of_bank(b), t)?;
                }
            }
            let cost = if c.is_row_copy() {
                self.p.row_copy_cost
            } else {
                self.p.copy_cost * c.columns as u64
            };
            let start = t.max(self.banks[src].busy_until).max(self.banks[dst].busy_until);
            let mut done = self.banks[src].occupy_for_copy(start, cost)?;
            if dst != src {
                done = done.max(self.banks[dst].occupy_for_copy(start, cost)?);
                self.act[src].copy_acts += 1;
                self.act[src].copy_read_bursts += c.columns as u64;
                self.act[dst].copy_acts += 1;
                self.act[dst].copy_write_bursts += c.columns as u64;
                self.out.inter_bank_columns += c.columns as u64;
                self.out.copy_busy += 2 * cost;
            } else {
                self.act[src].copy_acts += 2;
                self.out.copy_busy += cost;
            }
            if c.is_row_copy() {
                self.out.row_copies += 1;
            }
            self.out.copies += 1;
            for b in [src, dst] {
                let r = self.rank_of_bank(b);
                self.last_activity[r] = self.last_activity[r].max(done);
            }
            done_all = done_all.max(done);
        }
        self.last_done = self.last_done.max(done_all);
        Ok(done_all)
    }

    fn arrive(&mut self, req: &MemoryRequest, t: Picos) -> Result<()> {
        let logical = self.g.decode(req.address)?;
        match req.op {
            Op::Read => self.out.reads += 1,
            Op::Write => self.out.writes += 1,
        }
        let (physical, stall, copies) = match self.engine.as_mut() {
            Some(e) => {
                let r = e.access(req.op, &logical, req.tag)?;
                match req.op {
                    Op::Write => {
                        self.expected.insert(self.g.encode(&logical), req.tag);
                    }
                    Op::Read => {
                        if let Some(&want) = self.expected.get(&self.g.encode(&logical)) {
                            if r.read_tag != Some(want) {
                                self.out.read_mismatches += 1;
                            }
                        }
                    }
                }
                if self.p.extended_refresh && e.is_weak_row(&r.physical) {
                    self.out.weak_row_violations += 1;
                }
                (r.physical, r.translation_stall_cycles + r.log_search_cycles, r.copies)
            }
            None => (logical, 0, Vec::new()),
        };
        self.post_engine(t)?;
        let copies_done = self.exec_copies(&copies, t)?;
        self.out.migration_stall += copies_done - t;
        let ready = copies_done + stall * self.t.t_ck;
        let b = self.g.bank_index_of(&physical);
        let r = self.rank_of_bank(b);
        self.last_activity[r] = self.last_activity[r].max(t);
        self.queues[b].push_back(Pending {
            arrival: t,
            ready,
            op: req.op,
            row: physical.row,
            column: physical.column,
        });
        Ok(())
    }

    fn service(&mut self, ch: usize, t: Picos) -> Result<()> {
        let bpc = self.bpc();
        let base = ch * bpc;
        let Some(b) = (0..bpc)
            .map(|i| base + (self.rr[ch] + i) % bpc)
            .find(|&b| self.ready_time(b).is_some_and(|r| r <= t))
        else {
            return Ok(());
        };
        self.rr[ch] = (b - base + 1) % bpc;
        let req = self.queues[b].pop_front().expect("ready bank has a request");
        if self.banks[b].is_gated() {
            return Err(self.gated_error(b));
        }
        let r = self.rank_of_bank(b);
        if self.banks[b].power == PowerState::PoweredDownLp {
            self.wake_rank(r, t)?;
        }
        let start = t.max(self.banks[b].busy_until);
        let out = self.banks[b].service(req.op, req.row, req.column, start, self.bus_free[ch])?;
        self.bus_free[ch] = out.completion;
        self.cmd_free[ch] = t + self.t.t_ck;
        let a = &mut self.act[b];
        a.acts += out.activated() as u64;
        match req.op {
            Op::Read => a.read_bursts += 1,
            Op::Write => a.write_bursts += 1,
        }
        let lat = out.completion - req.arrival;
        self.out.latency_sum += lat as u128;
        self.out.latency_max = self.out.latency_max.max(lat);
        self.last_done = self.last_done.max(out.completion);
        self.last_activity[r] = self.last_activity[r].max(out.completion);
        Ok(())
    }

    fn settle(&mut self, p: usize, t: Picos) -> Result<()> {
        let e = self.engine.as_mut().expect("settle needs engine");
        let (state, victim) = (e.pairs()[p].state, e.pairs()[p].victim);
        if state == PairState::Forwarding {
            let bank = &mut self.banks[victim];
            let idle_at = bank.precharge(t)?;
            bank.set_power_state(PowerState::GatedOff, idle_at)?;
        }
        e.settle(p)?;
        self.post_engine(t)
    }
}
