//! The `(alpha, beta)`-window shortlist algorithm.
//!
//! Every window of `alpha * beta` slots keeps one tracker per ordered slot
//! subsequence `tau` with `|tau| <= alpha`. A tracker holds the greedy picks
//! `gamma(tau)`, their repair sets `zeta(tau)` and the working set
//! `V = (S ∪ gamma) \ zeta`. Each tracker with `|tau| < alpha` runs one
//! replacement secretary per slot over the replacement gains `g(., V)`; the
//! secretary's picks form the shortlist `A`. At the end of a window the best
//! complete tracker `tau*` becomes the new solution `S`.
//!
//! Three modes share this logic:
//!
//! - `Full` keeps every arrival and picks each slot's argmax from a stored
//!   gain table.
//! - `Streaming` keeps only what later steps can reference and tracks the
//!   buffer high-water mark.
//! - `Preemption` requires `alpha = beta = 1` and shortlists at most the
//!   secretary's final pick per slot, so `|A| <= k`.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constraints::{Constraint, GainResult};
use crate::error::{Error, Result};
use crate::secretary::{ReplacementConfig, ReplacementState};
use crate::submodular::{CountingOracle, ItemId, ItemSet, SubmodularFn};
use crate::windows::{build_window_plan, stream, ArrivalOrder, StreamEvent, WindowPlan};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Full,
    Preemption,
    Streaming,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Full => "full",
            Mode::Preemption => "preemption",
            Mode::Streaming => "streaming",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Mode::Full),
            "preemption" => Ok(Mode::Preemption),
            "streaming" => Ok(Mode::Streaming),
            other => Err(Error::InvalidParameter(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgoConfig {
    pub epsilon: f64,
    pub alpha: usize,
    pub beta: usize,
    pub mode: Mode,
    /// Rank or largest feasible set size; defaults to the constraint's.
    #[serde(default)]
    pub k: Option<usize>,
    /// Streaming mode fails the run if the buffer ever exceeds this.
    #[serde(default)]
    pub buffer_budget: Option<usize>,
    /// Record a per-window trace.
    #[serde(default)]
    pub trace: bool,
}

impl Default for AlgoConfig {
    fn default() -> Self {
        AlgoConfig {
            epsilon: 0.2,
            alpha: 1,
            beta: 1,
            mode: Mode::Full,
            k: None,
            buffer_budget: None,
            trace: false,
        }
    }
}

impl AlgoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in (0, 1], got {}",
                self.epsilon
            )));
        }
        if self.alpha == 0 || self.beta == 0 {
            return Err(Error::InvalidParameter("alpha and beta must be at least 1".into()));
        }
        if self.mode == Mode::Preemption && (self.alpha, self.beta) != (1, 1) {
            return Err(Error::InvalidParameter(format!(
                "preemption mode requires alpha = beta = 1, got ({}, {})",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }

    /// Failure probability handed to each secretary.
    pub fn delta(&self) -> f64 {
        self.epsilon / 2.0
    }
}

fn binomial(n: usize, r: usize) -> f64 {
    if r > n {
        return 0.0;
    }
    (0..r.min(n - r)).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Cap on `|A|`: `k` in preemption mode, otherwise
/// `ceil(4 k beta C(alpha beta, alpha) ln(2 / epsilon))`.
pub fn shortlist_bound(k: usize, alpha: usize, beta: usize, epsilon: f64, mode: Mode) -> usize {
    if mode == Mode::Preemption {
        return k;
    }
    let raw = 4.0 * k as f64 * beta as f64 * binomial(alpha * beta, alpha) * (2.0 / epsilon).ln();
    (raw - 1e-9).ceil().max(0.0) as usize
}

/// A tracker's greedy choice for one slot: item `i_j` with repair set `C_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pick {
    pub item: ItemId,
    pub removal: ItemSet,
    pub gain: f64,
}

impl Pick {
    fn from_gain(item: ItemId, g: GainResult) -> Option<Pick> {
        g.feasible.then_some(Pick {
            item,
            removal: g.removal,
            gain: g.gain,
        })
    }

    /// Strict order used for every argmax: larger gain, then smaller removal
    /// set, then smaller id.
    pub fn outranks(&self, other: &Pick) -> bool {
        self.gain > other.gain
            || (self.gain == other.gain
                && (self.removal < other.removal
                    || (self.removal == other.removal && self.item < other.item)))
    }
}

fn keep_best(best: &mut Option<Pick>, candidate: Pick) {
    if best.as_ref().is_none_or(|b| candidate.outranks(b)) {
        *best = Some(candidate);
    }
}

#[derive(Clone, Debug)]
struct Tracker {
    /// Window-local slot indices, increasing.
    tau: Vec<usize>,
    picks: Vec<Option<Pick>>,
    /// `V = (S ∪ gamma) \ zeta`.
    working: ItemSet,
    /// `zeta`: every removal made so far.
    removed: ItemSet,
}

impl Tracker {
    fn root(s: &ItemSet) -> Self {
        Tracker {
            tau: Vec::new(),
            picks: Vec::new(),
            working: s.clone(),
            removed: ItemSet::new(),
        }
    }

    fn child(&self, slot: usize, pick: Option<Pick>) -> Self {
        let mut child = self.clone();
        child.tau.push(slot);
        if let Some(p) = &pick {
            child.working = child.working.swap(p.item, &p.removal);
            child.removed = child.removed.union(&p.removal);
        }
        child.picks.push(pick);
        child
    }

    fn is_candidate(&self, item: ItemId) -> bool {
        !self.working.contains(item) && !self.removed.contains(item)
    }

    fn added(&self) -> ItemSet {
        self.picks.iter().flatten().map(|p| p.item).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Candidate {
    Dummy,
    Item(ItemId),
}

/// One tracker's work within the current slot.
struct SlotPass {
    secretary: ReplacementState<Candidate>,
    /// Streaming: running argmax.
    best: Option<Pick>,
    /// Full: every feasible candidate with its gain.
    table: Vec<Pick>,
}

/// What happened at one window boundary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WindowTrace {
    pub window: usize,
    /// Arrivals of each slot of the window, in order.
    pub slot_items: Vec<Vec<ItemId>>,
    pub s_before: ItemSet,
    pub r_before: ItemSet,
    pub tau_star: Vec<usize>,
    pub picks: Vec<Option<Pick>>,
    pub s_w: ItemSet,
    pub s_bar: ItemSet,
    pub s_hat: ItemSet,
    pub r_w: ItemSet,
    pub s_after: ItemSet,
    pub a_star_after: ItemSet,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub f_out: f64,
    pub shortlist_len: usize,
    pub shortlist_bound: usize,
    pub buffer_hw: usize,
    pub eval_count: u64,
    pub amortized_evals: f64,
    pub windows: usize,
    pub max_slot: usize,
    /// Most trackers alive at once.
    pub max_trackers: usize,
    /// Items of `S_w` over all windows, and how many of them were in `A`.
    pub selected: usize,
    pub selected_in_shortlist: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunOutput {
    /// `A`, in the order items were shortlisted.
    pub shortlist: Vec<ItemId>,
    /// `A*`.
    pub output: ItemSet,
    /// Final `S`.
    pub solution: ItemSet,
    pub metrics: RunMetrics,
    pub trace: Vec<WindowTrace>,
}

/// The evolving state of one run.
pub struct ShortlistRun<'a, F: SubmodularFn + ?Sized> {
    f: &'a F,
    constraint: &'a Constraint,
    plan: &'a WindowPlan,
    config: &'a AlgoConfig,
    s: ItemSet,
    r: ItemSet,
    a: Vec<ItemId>,
    a_set: ItemSet,
    a_star: ItemSet,
    trackers: Vec<Tracker>,
    passes: Vec<SlotPass>,
    window_items: Vec<Vec<ItemId>>,
    window_s: ItemSet,
    window_r: ItemSet,
    arrived: usize,
    buffer_hw: usize,
    max_trackers: usize,
    selected: usize,
    selected_in_shortlist: usize,
    trace: Vec<WindowTrace>,
    stamp: Vec<u32>,
    generation: u32,
}

impl<'a, F: SubmodularFn + ?Sized> ShortlistRun<'a, F> {
    pub fn new(f: &'a F, constraint: &'a Constraint, plan: &'a WindowPlan, config: &'a AlgoConfig) -> Result<Self> {
        config.validate()?;
        let n = constraint.ground_size();
        if f.ground_size() != n || plan.n != n {
            return Err(Error::DimensionMismatch(format!(
                "objective has {} items, constraint {n}, plan {}",
                f.ground_size(),
                plan.n
            )));
        }
        if (plan.alpha, plan.beta) != (config.alpha, config.beta) {
            return Err(Error::InvalidParameter(format!(
                "plan built for (alpha, beta) = ({}, {}), config has ({}, {})",
                plan.alpha, plan.beta, config.alpha, config.beta
            )));
        }
        let s = ItemSet::new();
        Ok(ShortlistRun {
            f,
            constraint,
            plan,
            config,
            trackers: vec![Tracker::root(&s)],
            window_s: s.clone(),
            s,
            r: ItemSet::new(),
            a: Vec::new(),
            a_set: ItemSet::new(),
            a_star: ItemSet::new(),
            passes: Vec::new(),
            window_items: Vec::new(),
            window_r: ItemSet::new(),
            arrived: 0,
            buffer_hw: 0,
            max_trackers: 1,
            selected: 0,
            selected_in_shortlist: 0,
            trace: Vec::new(),
            stamp: vec![0; n],
            generation: 0,
        })
    }

    pub fn solution(&self) -> &ItemSet {
        &self.s
    }

    pub fn tracked(&self) -> &ItemSet {
        &self.r
    }

    pub fn shortlist(&self) -> &[ItemId] {
        &self.a
    }

    pub fn output(&self) -> &ItemSet {
        &self.a_star
    }

    fn live(&self) -> impl Iterator<Item = (usize, &Tracker)> {
        let alpha = self.config.alpha;
        self.trackers.iter().enumerate().filter(move |(_, t)| t.tau.len() < alpha)
    }

    fn gain(&self, tracker: &Tracker, item: ItemId) -> Result<Option<Pick>> {
        Ok(Pick::from_gain(item, self.constraint.gain(self.f, item, &tracker.working)?))
    }

    fn begin_slot(&mut self, slot: usize) -> Result<()> {
        let horizon = self.plan.slot_sizes[slot] + 1;
        let rc = ReplacementConfig::new(horizon, self.config.delta())?;
        let mut passes = Vec::new();
        for (_, tracker) in self.live() {
            let mut pass = SlotPass {
                secretary: ReplacementState::new(rc),
                best: None,
                table: Vec::new(),
            };
            let mut dummy = f64::NEG_INFINITY;
            for x in self.r.iter().filter(|&x| tracker.is_candidate(x)) {
                if let Some(p) = self.gain(tracker, x)? {
                    dummy = dummy.max(p.gain);
                    self.record(&mut pass, p);
                }
            }
            pass.secretary.step(dummy, Candidate::Dummy)?;
            passes.push(pass);
        }
        self.passes = passes;
        if self.config.trace || self.config.mode != Mode::Streaming {
            self.window_items.push(Vec::new());
        }
        Ok(())
    }

    fn record(&self, pass: &mut SlotPass, pick: Pick) {
        match self.config.mode {
            Mode::Streaming => keep_best(&mut pass.best, pick),
            Mode::Full | Mode::Preemption => pass.table.push(pick),
        }
    }

    fn arrive(&mut self, item: ItemId) -> Result<()> {
        self.arrived += 1;
        let mut passes = std::mem::take(&mut self.passes);
        for (pass, (_, tracker)) in passes.iter_mut().zip(self.live()) {
            let pick = if tracker.is_candidate(item) {
                self.gain(tracker, item)?
            } else {
                None
            };
            let value = pick.as_ref().map_or(f64::NEG_INFINITY, |p| p.gain);
            pass.secretary.step(value, Candidate::Item(item))?;
            if let Some(p) = pick {
                self.record(pass, p);
            }
        }
        self.passes = passes;
        if let Some(items) = self.window_items.last_mut() {
            items.push(item);
        }
        let in_use = match self.config.mode {
            Mode::Streaming => self.streaming_buffer(Some(item)),
            Mode::Full | Mode::Preemption => self.arrived,
        };
        self.buffer_hw = self.buffer_hw.max(in_use);
        if let Some(budget) = self.config.buffer_budget {
            if self.buffer_hw > budget {
                return Err(Error::BufferBudget {
                    high_water: self.buffer_hw,
                    budget,
                });
            }
        }
        Ok(())
    }

    /// Items a streaming run must hold: `A`, `R`, `S`, tracker picks, every
    /// slot's running argmax and pending secretary picks, and `current`.
    fn streaming_buffer(&mut self, current: Option<ItemId>) -> usize {
        self.generation += 1;
        let generation = self.generation;
        let stamp = &mut self.stamp;
        let mut count = 0;
        let mut mark = |e: ItemId| {
            if stamp[e.index()] != generation {
                stamp[e.index()] = generation;
                count += 1;
            }
        };
        self.a.iter().copied().for_each(&mut mark);
        self.r.iter().for_each(&mut mark);
        self.s.iter().for_each(&mut mark);
        for t in &self.trackers {
            t.picks.iter().flatten().for_each(|p| mark(p.item));
        }
        for pass in &self.passes {
            if let Some(b) = &pass.best {
                mark(b.item);
            }
            for entry in pass.secretary.shortlist() {
                if let Candidate::Item(e) = entry.item {
                    mark(e);
                }
            }
        }
        if let Some(e) = current {
            mark(e);
        }
        count
    }

    /// Drops raw arrivals that nothing references any more and returns the
    /// number of items still held.
    pub fn streaming_evict(&mut self) -> usize {
        match self.config.mode {
            Mode::Streaming => {
                let held = self.streaming_buffer(None);
                self.buffer_hw = self.buffer_hw.max(held);
                held
            }
            Mode::Full | Mode::Preemption => self.arrived,
        }
    }

    fn push_shortlist(&mut self, item: ItemId) {
        if self.a_set.insert(item) {
            self.a.push(item);
        }
    }

    fn end_slot(&mut self, window: usize, slot: usize) -> Result<()> {
        let local = slot - self.plan.window_slots(window).start;
        let passes = std::mem::take(&mut self.passes);
        let live: Vec<usize> = self.live().map(|(i, _)| i).collect();
        let mut children = Vec::with_capacity(live.len());
        for (pass, idx) in passes.into_iter().zip(live) {
            let best = match self.config.mode {
                Mode::Streaming => pass.best,
                Mode::Full | Mode::Preemption => pass.table.into_iter().fold(None, |mut best, p| {
                    keep_best(&mut best, p);
                    best
                }),
            };
            let (entries, final_pick) = pass.secretary.finalize();
            match self.config.mode {
                Mode::Preemption => {
                    if let Some(Candidate::Item(e)) = final_pick {
                        self.push_shortlist(e);
                    }
                }
                Mode::Full | Mode::Streaming => {
                    for entry in entries {
                        if let Candidate::Item(e) = entry.item {
                            self.push_shortlist(e);
                        }
                    }
                }
            }
            children.push(self.trackers[idx].child(local, best));
        }
        self.trackers.extend(children);
        self.trackers.sort_by(|a, b| a.tau.cmp(&b.tau));
        self.max_trackers = self.max_trackers.max(self.trackers.len());
        self.streaming_evict();
        Ok(())
    }

    /// Runs one slot end to end.
    pub fn process_slot(&mut self, window: usize, slot: usize, items: &[ItemId]) -> Result<()> {
        if items.len() != self.plan.slot_sizes[slot] {
            return Err(Error::DimensionMismatch(format!(
                "slot {slot} has {} items, plan says {}",
                items.len(),
                self.plan.slot_sizes[slot]
            )));
        }
        self.begin_slot(slot)?;
        for &e in items {
            self.arrive(e)?;
        }
        self.end_slot(window, slot)
    }

    pub fn close_window(&mut self, window: usize) -> Result<()> {
        let alpha = self.config.alpha;
        let mut best: Option<(f64, usize)> = None;
        let mut r_w = ItemSet::new();
        for (i, t) in self.trackers.iter().enumerate().filter(|(_, t)| t.tau.len() == alpha) {
            r_w = r_w.union(&t.added());
            let value = self.f.eval(&t.working);
            if best.is_none_or(|(v, _)| value > v) {
                best = Some((value, i));
            }
        }
        let (_, star) = best.ok_or_else(|| Error::Invariant(format!("window {window} has no complete subsequence")))?;
        let star = self.trackers.swap_remove(star);
        let s_w = star.added();
        let s_bar = star.removed.clone();
        let s_hat: ItemSet = star
            .picks
            .iter()
            .flatten()
            .filter(|p| self.a_set.contains(p.item))
            .flat_map(|p| p.removal.iter())
            .collect();
        let s_new = self.s.union(&s_w).difference(&s_bar);
        if s_new != star.working || !self.constraint.is_feasible(&s_new) {
            return Err(Error::Invariant(format!(
                "window {window}: solution {s_new} is infeasible or inconsistent with its tracker"
            )));
        }
        let kept = s_w.intersection(&self.a_set);
        self.selected += s_w.len();
        self.selected_in_shortlist += kept.len();
        self.a_star = self.a_star.union(&kept).difference(&s_hat).intersection(&s_new);
        if !self.constraint.is_feasible(&self.a_star) {
            return Err(Error::Invariant(format!("window {window}: A* = {} is infeasible", self.a_star)));
        }
        if self.config.trace {
            self.trace.push(WindowTrace {
                window,
                slot_items: std::mem::take(&mut self.window_items),
                s_before: self.window_s.clone(),
                r_before: self.window_r.clone(),
                tau_star: star.tau.clone(),
                picks: star.picks.clone(),
                s_w,
                s_bar,
                s_hat,
                r_w: r_w.clone(),
                s_after: s_new.clone(),
                a_star_after: self.a_star.clone(),
            });
        }
        self.window_items.clear();
        self.s = s_new;
        self.r = self.r.union(&r_w);
        self.window_s = self.s.clone();
        self.window_r = self.r.clone();
        self.trackers = vec![Tracker::root(&self.s)];
        self.streaming_evict();
        Ok(())
    }

    fn finish(self, calls: u64) -> RunOutput {
        let plan = self.plan;
        let k = plan.k;
        let metrics = RunMetrics {
            f_out: 0.0,
            shortlist_len: self.a.len(),
            shortlist_bound: shortlist_bound(k, plan.alpha, plan.beta, self.config.epsilon, self.config.mode),
            buffer_hw: self.buffer_hw,
            eval_count: calls,
            amortized_evals: if plan.n == 0 { 0.0 } else { calls as f64 / plan.n as f64 },
            windows: plan.windows,
            max_slot: plan.max_slot_size(),
            max_trackers: self.max_trackers,
            selected: self.selected,
            selected_in_shortlist: self.selected_in_shortlist,
        };
        RunOutput {
            shortlist: self.a,
            output: self.a_star,
            solution: self.s,
            metrics,
            trace: self.trace,
        }
    }
}

/// Runs the algorithm over a given arrival order and window plan.
pub fn run<F: SubmodularFn + ?Sized>(
    f: &F,
    constraint: &Constraint,
    order: &ArrivalOrder,
    plan: &WindowPlan,
    config: &AlgoConfig,
) -> Result<RunOutput> {
    let oracle = CountingOracle::new(f);
    let mut state = ShortlistRun::new(&oracle, constraint, plan, config)?;
    for event in stream(order, plan)? {
        match event {
            StreamEvent::Arrival { slot, position, item, .. } => {
                if position == 0 {
                    state.begin_slot(slot)?;
                }
                state.arrive(item)?;
            }
            StreamEvent::SlotBoundary { window, slot } => {
                if plan.slot_sizes[slot] == 0 {
                    state.begin_slot(slot)?;
                }
                state.end_slot(window, slot)?;
                if slot + 1 == plan.window_slots(window).end {
                    state.close_window(window)?;
                }
            }
        }
    }
    let calls = oracle.calls();
    let mut out = state.finish(calls);
    if !constraint.is_feasible(&out.output) || !out.output.is_subset(&out.solution) {
        return Err(Error::Invariant(format!("final output {} is infeasible", out.output)));
    }
    out.metrics.f_out = f.eval(&out.output);
    Ok(out)
}

/// The arrival order and window plan for `seed`: a ChaCha8 stream seeded
/// with `seed` shuffles the items, then draws the slot sizes.
pub fn seeded_inputs(n: usize, k: usize, config: &AlgoConfig, seed: u64) -> Result<(ArrivalOrder, WindowPlan)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order = ArrivalOrder::shuffled(n, &mut rng);
    let plan = build_window_plan(n, k, config.alpha, config.beta, &mut rng)?;
    Ok((order, plan))
}

/// `k` for a run: the configured value or the constraint's largest feasible
/// set size, clamped to `1..=n`.
pub fn effective_k(constraint: &Constraint, config: &AlgoConfig) -> usize {
    let n = constraint.ground_size();
    config.k.unwrap_or_else(|| constraint.largest_feasible()).clamp(1, n.max(1))
}

/// Runs one seeded trial.
pub fn run_seeded<F: SubmodularFn + ?Sized>(
    f: &F,
    constraint: &Constraint,
    config: &AlgoConfig,
    seed: u64,
) -> Result<RunOutput> {
    let n = constraint.ground_size();
    let (order, plan) = seeded_inputs(n, effective_k(constraint, config), config, seed)?;
    run(f, constraint, &order, &plan, config)
}
