//! Random arrival orders and the `(alpha, beta)` window plan.
//!
//! Arrival positions `0..n` are cut into `m = W * alpha * beta` consecutive
//! slots with multinomial sizes, and every `alpha * beta` consecutive slots
//! form a window. `W = ceil(k / alpha)`.

use std::ops::Range;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::submodular::ItemId;

/// A permutation of the ground set: `items()[t]` arrives at position `t`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrivalOrder(Vec<ItemId>);

impl ArrivalOrder {
    pub fn identity(n: usize) -> Self {
        ArrivalOrder((0..n).map(ItemId::from).collect())
    }

    /// Uniformly random order.
    pub fn shuffled<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut order = Self::identity(n);
        order.0.shuffle(rng);
        order
    }

    pub fn from_permutation(items: Vec<ItemId>) -> Result<Self> {
        let mut seen = vec![false; items.len()];
        for &e in &items {
            match seen.get_mut(e.index()) {
                Some(s) if !*s => *s = true,
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "arrival order is not a permutation of 0..{} (item {e})",
                        items.len()
                    )))
                }
            }
        }
        Ok(ArrivalOrder(items))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn items(&self) -> &[ItemId] {
        &self.0
    }
}

/// Throws `n` balls into `m` bins uniformly and independently.
pub fn balls_in_bins<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<Vec<usize>> {
    if m == 0 {
        return Err(Error::InvalidParameter("balls_in_bins needs at least one bin".into()));
    }
    let mut counts = vec![0usize; m];
    for _ in 0..n {
        counts[rng.gen_range(0..m)] += 1;
    }
    Ok(counts)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPlan {
    pub n: usize,
    pub k: usize,
    pub alpha: usize,
    pub beta: usize,
    pub windows: usize,
    pub slot_sizes: Vec<usize>,
}

pub fn build_window_plan<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    alpha: usize,
    beta: usize,
    rng: &mut R,
) -> Result<WindowPlan> {
    if alpha == 0 || beta == 0 {
        return Err(Error::InvalidParameter(format!(
            "alpha and beta must be at least 1 (got {alpha}, {beta})"
        )));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("need 1 <= k <= n (k = {k}, n = {n})")));
    }
    let windows = k.div_ceil(alpha);
    let slot_sizes = balls_in_bins(n, windows * alpha * beta, rng)?;
    Ok(WindowPlan {
        n,
        k,
        alpha,
        beta,
        windows,
        slot_sizes,
    })
}

impl WindowPlan {
    pub fn slots(&self) -> usize {
        self.slot_sizes.len()
    }

    pub fn slots_per_window(&self) -> usize {
        self.alpha * self.beta
    }

    pub fn window_of_slot(&self, slot: usize) -> usize {
        slot / self.slots_per_window()
    }

    pub fn max_slot_size(&self) -> usize {
        self.slot_sizes.iter().copied().max().unwrap_or(0)
    }

    /// Arrival positions covered by `slot`.
    pub fn slot_positions(&self, slot: usize) -> Range<usize> {
        let start: usize = self.slot_sizes[..slot].iter().sum();
        start..start + self.slot_sizes[slot]
    }

    pub fn window_slots(&self, window: usize) -> Range<usize> {
        let per = self.slots_per_window();
        window * per..(window + 1) * per
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StreamEvent {
    Arrival {
        window: usize,
        slot: usize,
        position: usize,
        item: ItemId,
    },
    /// Emitted after the last arrival of every slot, including empty ones.
    SlotBoundary { window: usize, slot: usize },
}

/// Annotates the arrival order with slot and window indices. `position` is
/// the index within the slot.
pub fn stream<'a>(
    order: &'a ArrivalOrder,
    plan: &'a WindowPlan,
) -> Result<impl Iterator<Item = StreamEvent> + 'a> {
    if order.len() != plan.n {
        return Err(Error::DimensionMismatch(format!(
            "arrival order has {} items, plan expects {}",
            order.len(),
            plan.n
        )));
    }
    Ok((0..plan.slots()).flat_map(move |slot| {
        let window = plan.window_of_slot(slot);
        let arrivals = order.items()[plan.slot_positions(slot)]
            .iter()
            .enumerate()
            .map(move |(position, &item)| StreamEvent::Arrival {
                window,
                slot,
                position,
                item,
            });
        arrivals.chain(std::iter::once(StreamEvent::SlotBoundary { window, slot }))
    }))
}
