//! Value oracles for monotone submodular objectives.
//!
//! Every objective is a pure function of a sorted [`ItemSet`], so evaluation
//! never depends on the order in which a caller assembled the set.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of an element of the ground set.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemId(pub u32);

impl ItemId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for ItemId {
    fn from(i: usize) -> Self {
        ItemId(u32::try_from(i).expect("item index fits in u32"))
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A finite set of items, stored sorted and deduplicated.
///
/// The derived ordering is lexicographic on the sorted members, which is the
/// tie-break order used for removal sets throughout the crate (the empty set
/// sorts first).
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<ItemId>", into = "Vec<ItemId>")]
pub struct ItemSet(Vec<ItemId>);

impl ItemSet {
    pub fn new() -> Self {
        ItemSet(Vec::new())
    }

    pub fn singleton(item: ItemId) -> Self {
        ItemSet(vec![item])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, item: ItemId) -> bool {
        self.0.binary_search(&item).is_ok()
    }

    /// Inserts `item`, returning `false` if it was already present.
    pub fn insert(&mut self, item: ItemId) -> bool {
        match self.0.binary_search(&item) {
            Ok(_) => false,
            Err(pos) => {
                self.0.insert(pos, item);
                true
            }
        }
    }

    /// Removes `item`, returning `false` if it was absent.
    pub fn remove(&mut self, item: ItemId) -> bool {
        match self.0.binary_search(&item) {
            Ok(pos) => {
                self.0.remove(pos);
                true
            }
            Err(_) => false,
        }
    }

    pub fn with(&self, item: ItemId) -> ItemSet {
        let mut out = self.clone();
        out.insert(item);
        out
    }

    pub fn without(&self, item: ItemId) -> ItemSet {
        let mut out = self.clone();
        out.remove(item);
        out
    }

    pub fn union(&self, other: &ItemSet) -> ItemSet {
        self.iter().chain(other.iter()).collect()
    }

    pub fn difference(&self, other: &ItemSet) -> ItemSet {
        ItemSet(self.iter().filter(|&e| !other.contains(e)).collect())
    }

    pub fn intersection(&self, other: &ItemSet) -> ItemSet {
        ItemSet(self.iter().filter(|&e| other.contains(e)).collect())
    }

    pub fn is_subset(&self, other: &ItemSet) -> bool {
        self.iter().all(|e| other.contains(e))
    }

    /// `self + add - remove`, the swap used by replacement gains.
    pub fn swap(&self, add: ItemId, remove: &ItemSet) -> ItemSet {
        let mut out = self.difference(remove);
        out.insert(add);
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = ItemId> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[ItemId] {
        &self.0
    }

    pub fn max_item(&self) -> Option<ItemId> {
        self.0.last().copied()
    }
}

impl From<Vec<ItemId>> for ItemSet {
    fn from(mut v: Vec<ItemId>) -> Self {
        v.sort_unstable();
        v.dedup();
        ItemSet(v)
    }
}

impl From<ItemSet> for Vec<ItemId> {
    fn from(s: ItemSet) -> Self {
        s.0
    }
}

impl FromIterator<ItemId> for ItemSet {
    fn from_iter<I: IntoIterator<Item = ItemId>>(iter: I) -> Self {
        ItemSet::from(iter.into_iter().collect::<Vec<_>>())
    }
}

impl<'a> IntoIterator for &'a ItemSet {
    type Item = ItemId;
    type IntoIter = std::iter::Copied<std::slice::Iter<'a, ItemId>>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter().copied()
    }
}

impl fmt::Display for ItemSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, e) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, "}}")
    }
}

/// Shorthand for building sets in tests and examples.
pub fn set_of(ids: &[u32]) -> ItemSet {
    ids.iter().map(|&i| ItemId(i)).collect()
}

/// Value-oracle access to a set function `f: 2^U -> R`.
///
/// Implementations assume every member of `set` lies in the ground set; use
/// [`check_members`] at API boundaries.
pub trait SubmodularFn: Send + Sync {
    fn ground_size(&self) -> usize;

    fn eval(&self, set: &ItemSet) -> f64;
}

impl<T: SubmodularFn + ?Sized> SubmodularFn for &T {
    fn ground_size(&self) -> usize {
        (**self).ground_size()
    }

    fn eval(&self, set: &ItemSet) -> f64 {
        (**self).eval(set)
    }
}

impl<T: SubmodularFn + ?Sized> SubmodularFn for Box<T> {
    fn ground_size(&self) -> usize {
        (**self).ground_size()
    }

    fn eval(&self, set: &ItemSet) -> f64 {
        (**self).eval(set)
    }
}

pub fn check_item(ground_size: usize, item: ItemId) -> Result<()> {
    if item.index() < ground_size {
        Ok(())
    } else {
        Err(Error::UnknownItem { item, ground_size })
    }
}

pub fn check_members(ground_size: usize, set: &ItemSet) -> Result<()> {
    match set.max_item() {
        Some(e) => check_item(ground_size, e),
        None => Ok(()),
    }
}

/// `f(S + e) - f(S)`, zero when `e` is already in `S`.
pub fn marginal<F: SubmodularFn + ?Sized>(f: &F, item: ItemId, set: &ItemSet) -> Result<f64> {
    check_item(f.ground_size(), item)?;
    check_members(f.ground_size(), set)?;
    if set.contains(item) {
        return Ok(0.0);
    }
    Ok(f.eval(&set.with(item)) - f.eval(set))
}

fn check_weights(weights: &[f64]) -> Result<()> {
    for (index, &weight) in weights.iter().enumerate() {
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(Error::NegativeWeight { index, weight });
        }
    }
    Ok(())
}

/// Weighted coverage: each item covers a subset of a universe and
/// `f(S)` is the total weight of the universe elements covered by `S`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CoverageParams", into = "CoverageParams")]
pub struct Coverage {
    universe_size: usize,
    covers: Vec<Vec<usize>>,
    weights: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct CoverageParams {
    universe_size: usize,
    covers: Vec<Vec<usize>>,
    weights: Vec<f64>,
}

impl TryFrom<CoverageParams> for Coverage {
    type Error = Error;

    fn try_from(p: CoverageParams) -> Result<Self> {
        make_coverage(p.universe_size, p.covers, p.weights)
    }
}

impl From<Coverage> for CoverageParams {
    fn from(c: Coverage) -> Self {
        CoverageParams {
            universe_size: c.universe_size,
            covers: c.covers,
            weights: c.weights,
        }
    }
}

pub fn make_coverage(
    universe_size: usize,
    covers: Vec<Vec<usize>>,
    weights: Vec<f64>,
) -> Result<Coverage> {
    if weights.len() != universe_size {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for a universe of {universe_size}",
            weights.len()
        )));
    }
    check_weights(&weights)?;
    let mut covers = covers;
    for (i, cover) in covers.iter_mut().enumerate() {
        if let Some(&u) = cover.iter().find(|&&u| u >= universe_size) {
            return Err(Error::DimensionMismatch(format!(
                "item {i} covers {u}, outside a universe of {universe_size}"
            )));
        }
        cover.sort_unstable();
        cover.dedup();
    }
    Ok(Coverage {
        universe_size,
        covers,
        weights,
    })
}

impl Coverage {
    pub fn universe_size(&self) -> usize {
        self.universe_size
    }

    pub fn covers(&self) -> &[Vec<usize>] {
        &self.covers
    }
}

impl SubmodularFn for Coverage {
    fn ground_size(&self) -> usize {
        self.covers.len()
    }

    fn eval(&self, set: &ItemSet) -> f64 {
        let mut covered = vec![false; self.universe_size];
        for e in set {
            for &u in &self.covers[e.index()] {
                covered[u] = true;
            }
        }
        covered
            .iter()
            .zip(&self.weights)
            .filter(|(c, _)| **c)
            .map(|(_, w)| w)
            .sum()
    }
}

/// `f(S) = sum of w_e over e in S`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModularParams", into = "ModularParams")]
pub struct Modular {
    weights: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ModularParams {
    weights: Vec<f64>,
}

impl TryFrom<ModularParams> for Modular {
    type Error = Error;

    fn try_from(p: ModularParams) -> Result<Self> {
        make_modular(p.weights)
    }
}

impl From<Modular> for ModularParams {
    fn from(m: Modular) -> Self {
        ModularParams { weights: m.weights }
    }
}

pub fn make_modular(weights: Vec<f64>) -> Result<Modular> {
    check_weights(&weights)?;
    Ok(Modular { weights })
}

impl Modular {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl SubmodularFn for Modular {
    fn ground_size(&self) -> usize {
        self.weights.len()
    }

    fn eval(&self, set: &ItemSet) -> f64 {
        set.iter().map(|e| self.weights[e.index()]).sum()
    }
}

/// Facility location: `f(S) = sum over clients of max_{e in S} sim[client][e]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FacilityParams", into = "FacilityParams")]
pub struct FacilityLocation {
    similarity: Vec<Vec<f64>>,
    items: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct FacilityParams {
    similarity: Vec<Vec<f64>>,
}

impl TryFrom<FacilityParams> for FacilityLocation {
    type Error = Error;

    fn try_from(p: FacilityParams) -> Result<Self> {
        let clients = p.similarity.len();
        make_facility_location(p.similarity, clients)
    }
}

impl From<FacilityLocation> for FacilityParams {
    fn from(f: FacilityLocation) -> Self {
        FacilityParams {
            similarity: f.similarity,
        }
    }
}

/// `similarity` is indexed `[client][item]`.
pub fn make_facility_location(similarity: Vec<Vec<f64>>, clients: usize) -> Result<FacilityLocation> {
    if similarity.len() != clients {
        return Err(Error::DimensionMismatch(format!(
            "{} similarity rows for {clients} clients",
            similarity.len()
        )));
    }
    let items = similarity.first().map_or(0, Vec::len);
    for (c, row) in similarity.iter().enumerate() {
        if row.len() != items {
            return Err(Error::DimensionMismatch(format!(
                "client {c} has {} similarities, expected {items}",
                row.len()
            )));
        }
        check_weights(row)?;
    }
    Ok(FacilityLocation { similarity, items })
}

impl SubmodularFn for FacilityLocation {
    fn ground_size(&self) -> usize {
        self.items
    }

    fn eval(&self, set: &ItemSet) -> f64 {
        self.similarity
            .iter()
            .map(|row| set.iter().map(|e| row[e.index()]).fold(0.0, f64::max))
            .sum()
    }
}

/// Role of an element in the adversarial hardness construction.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HardnessRole {
    /// Type-A element `a_1^l`, anchoring the block `l`.
    A { block: usize },
    /// Type-A element with no matched block.
    UnmatchedA,
    /// Special type-B element `b_j^l` of block `l`.
    B { block: usize },
    /// Filler type-B element.
    Filler,
}

/// The piecewise adversarial function used to bound any shortlist algorithm.
///
/// With `t = |S| - 1` and `i = floor(t / k)`:
/// - two or more type-A elements: `2k + 1`
/// - no type-A element: `1 + g(t)`
/// - exactly `a_1^l`: `min(2k + 1, k + g(t)/2 + k'/2^(i+1))` where `k'` counts
///   the members of block `l` in `S`
/// - exactly one unmatched type-A element: `k + g(t)/2`
///
/// and `f(empty) = 0`. Here `g(t) = k + k/2 + ... + (t - ik)/2^i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HardnessParams", into = "HardnessParams")]
pub struct HardnessFunction {
    k: usize,
    blocks: usize,
    active: Option<usize>,
    roles: Vec<HardnessRole>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct HardnessParams {
    k: usize,
    blocks: usize,
    n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    active: Option<usize>,
}

impl TryFrom<HardnessParams> for HardnessFunction {
    type Error = Error;

    fn try_from(p: HardnessParams) -> Result<Self> {
        match p.active {
            None => make_hardness_function(p.k, p.blocks, p.n),
            Some(active) => HardnessFunction::instance(p.k, p.blocks, p.n, active),
        }
    }
}

impl From<HardnessFunction> for HardnessParams {
    fn from(h: HardnessFunction) -> Self {
        HardnessParams {
            k: h.k,
            blocks: h.blocks,
            n: h.roles.len(),
            active: h.active,
        }
    }
}

/// Full universe: `blocks` type-A elements, then `blocks * k` matched type-B
/// elements (block-major), then fillers up to `n` items.
pub fn make_hardness_function(k: usize, blocks: usize, n: usize) -> Result<HardnessFunction> {
    if k == 0 || blocks == 0 {
        return Err(Error::InvalidParameter(format!(
            "hardness needs k >= 1 and at least one block (k={k}, blocks={blocks})"
        )));
    }
    let fixed = blocks + blocks * k;
    if n < fixed {
        return Err(Error::InvalidParameter(format!(
            "hardness universe needs at least {fixed} items, got n={n}"
        )));
    }
    let mut roles: Vec<HardnessRole> = (0..blocks).map(|block| HardnessRole::A { block }).collect();
    roles.extend((0..blocks).flat_map(|block| std::iter::repeat_n(HardnessRole::B { block }, k)));
    roles.resize(n, HardnessRole::Filler);
    Ok(HardnessFunction {
        k,
        blocks,
        active: None,
        roles,
    })
}

impl HardnessFunction {
    /// The input instance `I_active`: the single type-A element `a_1^active`
    /// (item 0), all matched type-B elements and fillers, `n` items in total.
    pub fn instance(k: usize, blocks: usize, n: usize, active: usize) -> Result<HardnessFunction> {
        if k == 0 || blocks == 0 || active >= blocks {
            return Err(Error::InvalidParameter(format!(
                "hardness instance needs k >= 1 and active < blocks (k={k}, blocks={blocks}, active={active})"
            )));
        }
        let fixed = 1 + blocks * k;
        if n < fixed {
            return Err(Error::InvalidParameter(format!(
                "hardness instance needs at least {fixed} items, got n={n}"
            )));
        }
        let mut roles = vec![HardnessRole::A { block: active }];
        roles.extend((0..blocks).flat_map(|block| std::iter::repeat_n(HardnessRole::B { block }, k)));
        roles.resize(n, HardnessRole::Filler);
        Ok(HardnessFunction {
            k,
            blocks,
            active: Some(active),
            roles,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn roles(&self) -> &[HardnessRole] {
        &self.roles
    }

    /// Items of the set `T^l = {a_1^l, b_1^l, ..., b_k^l}` present in the ground set.
    pub fn t_set(&self, block: usize) -> ItemSet {
        self.roles
            .iter()
            .enumerate()
            .filter(|(_, r)| matches!(r, HardnessRole::A { block: b } | HardnessRole::B { block: b } if *b == block))
            .map(|(i, _)| ItemId::from(i))
            .collect()
    }

    /// `g(t) = k + k/2 + ... + (t - ik)/2^i` with `i = floor(t/k)`.
    pub fn helper_g(&self, t: usize) -> f64 {
        let k = self.k as f64;
        let i = t / self.k;
        let full: f64 = (0..i).map(|m| k / 2f64.powi(m as i32)).sum();
        full + (t - i * self.k) as f64 / 2f64.powi(i as i32)
    }
}

impl SubmodularFn for HardnessFunction {
    fn ground_size(&self) -> usize {
        self.roles.len()
    }

    fn eval(&self, set: &ItemSet) -> f64 {
        if set.is_empty() {
            return 0.0;
        }
        let k = self.k as f64;
        let cap = 2.0 * k + 1.0;
        let t = set.len() - 1;
        let mut type_a = set.iter().map(|e| self.roles[e.index()]).filter(|r| {
            matches!(r, HardnessRole::A { .. } | HardnessRole::UnmatchedA)
        });
        let first = type_a.next();
        if type_a.next().is_some() {
            return cap;
        }
        match first {
            None => 1.0 + self.helper_g(t),
            Some(HardnessRole::A { block }) => {
                let matched = set
                    .iter()
                    .filter(|e| self.roles[e.index()] == HardnessRole::B { block })
                    .count() as f64;
                let i = (t / self.k) as i32;
                cap.min(k + 0.5 * self.helper_g(t) + matched / 2f64.powi(i + 1))
            }
            Some(_) => k + 0.5 * self.helper_g(t),
        }
    }
}

/// Any shipped objective family, as stored in instance files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Objective {
    Coverage(Coverage),
    Modular(Modular),
    Facility(FacilityLocation),
    Hardness(HardnessFunction),
}

impl SubmodularFn for Objective {
    fn ground_size(&self) -> usize {
        match self {
            Objective::Coverage(f) => f.ground_size(),
            Objective::Modular(f) => f.ground_size(),
            Objective::Facility(f) => f.ground_size(),
            Objective::Hardness(f) => f.ground_size(),
        }
    }

    fn eval(&self, set: &ItemSet) -> f64 {
        match self {
            Objective::Coverage(f) => f.eval(set),
            Objective::Modular(f) => f.eval(set),
            Objective::Facility(f) => f.eval(set),
            Objective::Hardness(f) => f.eval(set),
        }
    }
}

/// Wraps an oracle and counts evaluations. Values pass through untouched.
#[derive(Debug)]
pub struct CountingOracle<F> {
    inner: F,
    calls: AtomicU64,
}

impl<F: SubmodularFn> CountingOracle<F> {
    pub fn new(inner: F) -> Self {
        CountingOracle {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::Relaxed);
    }

    pub fn inner(&self) -> &F {
        &self.inner
    }
}

impl<F: SubmodularFn> SubmodularFn for CountingOracle<F> {
    fn ground_size(&self) -> usize {
        self.inner.ground_size()
    }

    fn eval(&self, set: &ItemSet) -> f64 {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.eval(set)
    }
}
