//! The replacement secretary: an online record tracker that keeps a short
//! list of records seen after a warm-up prefix.
//!
//! With `N` items and failure probability `delta`, items at positions
//! `i >= u = ceil(N * delta / 2)` (1-based) that set a strict new record are
//! shortlisted until `L = ceil(4 ln(2 / delta))` have been kept.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::windows::ArrivalOrder;

/// Guards `ceil` against values like `8.000000000000002` produced by `ln`.
fn ceil_tolerant(x: f64) -> usize {
    (x - 1e-9).ceil().max(0.0) as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReplacementConfig {
    pub horizon: usize,
    pub delta: f64,
}

impl ReplacementConfig {
    pub fn new(horizon: usize, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::InvalidParameter(format!("delta must lie in (0, 1], got {delta}")));
        }
        Ok(ReplacementConfig { horizon, delta })
    }

    /// First 1-based position eligible for the shortlist.
    pub fn warmup(&self) -> usize {
        ceil_tolerant(self.horizon as f64 * self.delta / 2.0)
    }

    /// Shortlist capacity, at least 1.
    pub fn capacity(&self) -> usize {
        ceil_tolerant(4.0 * (2.0 / self.delta).ln()).max(1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Shortlisted<T> {
    /// 1-based arrival position.
    pub position: usize,
    pub item: T,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Selected,
    Skipped,
}

#[derive(Clone, Debug)]
pub struct ReplacementState<T> {
    config: ReplacementConfig,
    warmup: usize,
    capacity: usize,
    running_max: f64,
    position: usize,
    shortlist: Vec<Shortlisted<T>>,
}

impl<T: Clone> ReplacementState<T> {
    pub fn new(config: ReplacementConfig) -> Self {
        ReplacementState {
            warmup: config.warmup(),
            capacity: config.capacity(),
            config,
            running_max: f64::NEG_INFINITY,
            position: 0,
            shortlist: Vec::new(),
        }
    }

    pub fn config(&self) -> &ReplacementConfig {
        &self.config
    }

    pub fn running_max(&self) -> f64 {
        self.running_max
    }

    pub fn position(&self) -> usize {
        self.position
    }

    pub fn shortlist(&self) -> &[Shortlisted<T>] {
        &self.shortlist
    }

    pub fn step(&mut self, value: f64, item: T) -> Result<Decision> {
        if self.position == self.config.horizon {
            return Err(Error::HorizonExceeded {
                horizon: self.config.horizon,
            });
        }
        self.position += 1;
        if !(value > self.running_max) {
            return Ok(Decision::Skipped);
        }
        self.running_max = value;
        if self.position >= self.warmup && self.shortlist.len() < self.capacity {
            self.shortlist.push(Shortlisted {
                position: self.position,
                item,
                value,
            });
            Ok(Decision::Selected)
        } else {
            Ok(Decision::Skipped)
        }
    }

    /// The shortlist and its maximum-value entry. Shortlist values increase
    /// strictly, so the best entry is the last one.
    pub fn finalize(self) -> (Vec<Shortlisted<T>>, Option<T>) {
        let best = self.shortlist.last().map(|s| s.item.clone());
        (self.shortlist, best)
    }
}

/// Outcome of repeatedly running the classic secretary-with-shortlist game.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CaptureStats {
    pub trials: usize,
    pub captures: usize,
    pub capture_rate: f64,
    pub capacity: usize,
    /// `length_histogram[l]` counts trials whose shortlist had length `l`.
    pub length_histogram: Vec<usize>,
    pub max_length: usize,
}

/// Feeds `values` in `trials` random orders (trial `t` shuffles with seed
/// `seed + t`) and records how often the final pick is a maximum value.
pub fn capture_experiment(values: &[f64], delta: f64, trials: usize, seed: u64) -> Result<CaptureStats> {
    let config = ReplacementConfig::new(values.len(), delta)?;
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut histogram = vec![0usize; config.capacity() + 1];
    let mut captures = 0;
    for t in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t as u64));
        let order = ArrivalOrder::shuffled(values.len(), &mut rng);
        let mut state = ReplacementState::new(config);
        for &e in order.items() {
            state.step(values[e.index()], e)?;
        }
        let (shortlist, best) = state.finalize();
        histogram[shortlist.len()] += 1;
        if best.is_some_and(|b| values[b.index()] == top) {
            captures += 1;
        }
    }
    let max_length = histogram.iter().rposition(|&c| c > 0).unwrap_or(0);
    Ok(CaptureStats {
        trials,
        captures,
        capture_rate: if trials == 0 { 0.0 } else { captures as f64 / trials as f64 },
        capacity: config.capacity(),
        length_histogram: histogram,
        max_length,
    })
}
