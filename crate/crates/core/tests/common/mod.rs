//! Brute-force oracles written independently of the library internals.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shortlist_core::algorithm::WindowTrace;
use shortlist_core::constraints::{Constraint, Matchoid, Matroid, MatroidKind};
use shortlist_core::submodular::{ItemId, ItemSet, SubmodularFn};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn ids(set: &ItemSet) -> Vec<u32> {
    set.iter().map(|e| e.0).collect()
}

pub fn from_ids(v: &[u32]) -> ItemSet {
    v.iter().map(|&i| ItemId(i)).collect()
}

/// Best `(gain, removal)` over the given repair sets, ties to the smaller
/// sorted removal vector. `None` when no repair is given.
fn best_of(f: &dyn SubmodularFn, s: &ItemSet, e: ItemId, repairs: BTreeSet<Vec<u32>>) -> Option<(f64, Vec<u32>)> {
    let base = f.eval(s);
    let mut best: Option<(f64, Vec<u32>)> = None;
    for d in repairs {
        let mut next: Vec<u32> = ids(s).into_iter().filter(|x| !d.contains(x)).collect();
        next.push(e.0);
        let gain = f.eval(&from_ids(&next)) - base;
        let better = match &best {
            None => true,
            Some((g, r)) => gain > *g || (gain == *g && d < *r),
        };
        if better {
            best = Some((gain, d));
        }
    }
    best
}

/// Matroid repair: no removal if `S + e` is independent, else any single
/// element whose removal restores independence.
pub fn brute_theta(f: &dyn SubmodularFn, m: &dyn Matroid, e: ItemId, s: &ItemSet) -> Option<(f64, Vec<u32>)> {
    let mut repairs = BTreeSet::new();
    let plus: Vec<u32> = ids(s).into_iter().chain([e.0]).collect();
    if m.is_independent(&from_ids(&plus)) {
        repairs.insert(vec![]);
    }
    for x in ids(s) {
        let swapped: Vec<u32> = plus.iter().copied().filter(|&y| y != x).collect();
        if m.is_independent(&from_ids(&swapped)) {
            repairs.insert(vec![x]);
        }
    }
    best_of(f, s, e, repairs)
}

/// Matchoid repair: for each member containing `e`, the options that make
/// its restriction independent again, combined over members by union.
pub fn brute_lambda(f: &dyn SubmodularFn, q: &Matchoid, e: ItemId, s: &ItemSet) -> Option<(f64, Vec<u32>)> {
    let mut combos: BTreeSet<Vec<u32>> = BTreeSet::from([vec![]]);
    for member in q.members().iter().filter(|m| m.ground.contains(e)) {
        let local: Vec<u32> = ids(s).into_iter().filter(|&x| member.ground.contains(ItemId(x))).collect();
        let indep = |v: Vec<u32>| member.matroid.is_independent(&from_ids(&v));
        let mut options: Vec<Option<u32>> = Vec::new();
        let with_e: Vec<u32> = local.iter().copied().chain([e.0]).collect();
        if indep(with_e.clone()) {
            options.push(None);
        }
        for &x in &local {
            if indep(with_e.iter().copied().filter(|&y| y != x).collect()) {
                options.push(Some(x));
            }
        }
        let mut next = BTreeSet::new();
        for c in &combos {
            for o in &options {
                let mut u = c.clone();
                if let Some(x) = o {
                    if !u.contains(x) {
                        u.push(*x);
                        u.sort();
                    }
                }
                next.insert(u);
            }
        }
        combos = next;
    }
    best_of(f, s, e, combos)
}

pub fn brute_gain(f: &dyn SubmodularFn, c: &Constraint, e: ItemId, s: &ItemSet) -> Option<(f64, Vec<u32>)> {
    match c {
        Constraint::Matroid(m) => brute_theta(f, m, e, s),
        Constraint::Matchoid(q) => brute_lambda(f, q, e, s),
    }
}

/// A uniformly shuffled greedy basis.
pub fn random_basis<R: Rng>(m: &MatroidKind, rng: &mut R) -> ItemSet {
    let mut order: Vec<u32> = (0..m.ground_size() as u32).collect();
    order.shuffle(rng);
    let mut basis = ItemSet::new();
    for e in order {
        if m.is_independent(&basis.with(ItemId(e))) {
            basis.insert(ItemId(e));
        }
    }
    basis
}

/// Whether some bijection `A -> B` fixing `A ∩ B` keeps `A - x + y`
/// independent, by trying every permutation of `B \ A`.
pub fn exchange_bijection_exists(m: &MatroidKind, a: &ItemSet, b: &ItemSet) -> bool {
    let left: Vec<u32> = ids(&a.difference(b));
    let right: Vec<u32> = ids(&b.difference(a));
    fn search(m: &MatroidKind, a: &ItemSet, left: &[u32], right: &mut Vec<u32>, i: usize) -> bool {
        if i == left.len() {
            return true;
        }
        for j in i..right.len() {
            right.swap(i, j);
            let ok = m.is_independent(&a.without(ItemId(left[i])).with(ItemId(right[i])))
                && search(m, a, left, right, i + 1);
            right.swap(i, j);
            if ok {
                return true;
            }
        }
        false
    }
    left.len() == right.len() && search(m, a, &left, &mut right.clone(), 0)
}

/// What a window's boundary update should be, recomputed from the window's
/// stored arrivals and the state before it.
#[derive(Debug, PartialEq)]
pub struct Resimulated {
    pub tau_star: Vec<usize>,
    pub s_w: Vec<u32>,
    pub s_bar: Vec<u32>,
    pub s_after: Vec<u32>,
}

fn subsets(n: usize, r: usize) -> Vec<Vec<usize>> {
    if r == 0 {
        return vec![vec![]];
    }
    if n < r {
        return vec![];
    }
    let mut out = Vec::new();
    for first in 0..n {
        for rest in subsets(n, r - 1).into_iter().filter(|t| t.iter().all(|&x| x > first)) {
            let mut t = vec![first];
            t.extend(rest);
            out.push(t);
        }
    }
    out
}

/// Re-simulates a window for a matroid constraint: every length-`alpha`
/// slot subsequence greedily adds, per slot, the best-gain candidate among
/// that slot's arrivals and the tracked items, skipping anything already in
/// the working set or removed earlier. The best final working set wins, the
/// lexicographically smallest subsequence on ties.
pub fn resimulate_window(f: &dyn SubmodularFn, m: &dyn Matroid, alpha: usize, w: &WindowTrace) -> Resimulated {
    let slots = w.slot_items.len();
    let mut best: Option<(f64, Resimulated)> = None;
    for tau in subsets(slots, alpha) {
        let mut v: Vec<u32> = ids(&w.s_before);
        let mut removed: Vec<u32> = Vec::new();
        let mut added: Vec<u32> = Vec::new();
        for &j in &tau {
            let mut pool: Vec<u32> = w.slot_items[j].iter().map(|e| e.0).chain(ids(&w.r_before)).collect();
            pool.sort();
            pool.dedup();
            let mut pick: Option<(f64, Vec<u32>, u32)> = None;
            for x in pool.into_iter().filter(|x| !v.contains(x) && !removed.contains(x)) {
                if let Some((g, d)) = brute_theta(f, m, ItemId(x), &from_ids(&v)) {
                    let better = match &pick {
                        None => true,
                        Some((pg, pd, px)) => g > *pg || (g == *pg && (d < *pd || (d == *pd && x < *px))),
                    };
                    if better {
                        pick = Some((g, d, x));
                    }
                }
            }
            if let Some((_, d, x)) = pick {
                v.retain(|y| !d.contains(y));
                v.push(x);
                v.sort();
                removed.extend(d);
                added.push(x);
            }
        }
        let value = f.eval(&from_ids(&v));
        if best.as_ref().is_none_or(|(bv, _)| value > *bv) {
            added.sort();
            removed.sort();
            removed.dedup();
            best = Some((
                value,
                Resimulated {
                    tau_star: tau,
                    s_w: added,
                    s_bar: removed,
                    s_after: v,
                },
            ));
        }
    }
    best.expect("a window always has a complete subsequence").1
}
