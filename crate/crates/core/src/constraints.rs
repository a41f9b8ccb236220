//! Matroid and p-matchoid independence oracles, and the replacement gain
//! `g(e, S) = max_D f(S + e - D) - f(S)` over the repair sets `D` that keep
//! `S + e - D` feasible.
//!
//! Candidate repair sets always include the empty set when `e` can be added
//! outright. Ties between equal gains go to the lexicographically smaller
//! removal set, so every gain computation is deterministic.

use std::collections::{BTreeMap, BTreeSet};

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::submodular::{check_item, check_members, ItemId, ItemSet, SubmodularFn};

/// Independence-oracle access to a matroid over items `0..ground_size()`.
pub trait Matroid {
    fn ground_size(&self) -> usize;

    fn is_independent(&self, set: &ItemSet) -> bool;

    /// Size of every maximal independent set.
    fn rank(&self) -> usize;
}

/// Every set of at most `k` items is independent.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniformMatroid {
    pub n: usize,
    pub k: usize,
}

impl Matroid for UniformMatroid {
    fn ground_size(&self) -> usize {
        self.n
    }

    fn is_independent(&self, set: &ItemSet) -> bool {
        set.len() <= self.k
    }

    fn rank(&self) -> usize {
        self.k.min(self.n)
    }
}

/// Items are split into blocks; a set is independent when no block exceeds
/// its capacity.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PartitionParams", into = "PartitionParams")]
pub struct PartitionMatroid {
    block_of: Vec<usize>,
    capacities: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct PartitionParams {
    block_of: Vec<usize>,
    capacities: Vec<usize>,
}

impl TryFrom<PartitionParams> for PartitionMatroid {
    type Error = Error;

    fn try_from(p: PartitionParams) -> Result<Self> {
        PartitionMatroid::new(p.block_of, p.capacities)
    }
}

impl From<PartitionMatroid> for PartitionParams {
    fn from(m: PartitionMatroid) -> Self {
        PartitionParams {
            block_of: m.block_of,
            capacities: m.capacities,
        }
    }
}

impl PartitionMatroid {
    pub fn new(block_of: Vec<usize>, capacities: Vec<usize>) -> Result<Self> {
        if let Some((item, &b)) = block_of.iter().enumerate().find(|(_, &b)| b >= capacities.len()) {
            return Err(Error::DimensionMismatch(format!(
                "item {item} assigned to block {b}, but only {} blocks exist",
                capacities.len()
            )));
        }
        Ok(PartitionMatroid {
            block_of,
            capacities,
        })
    }

    pub fn block_of(&self, item: ItemId) -> usize {
        self.block_of[item.index()]
    }

    pub fn capacities(&self) -> &[usize] {
        &self.capacities
    }
}

impl Matroid for PartitionMatroid {
    fn ground_size(&self) -> usize {
        self.block_of.len()
    }

    fn is_independent(&self, set: &ItemSet) -> bool {
        let mut used = vec![0usize; self.capacities.len()];
        for e in set {
            let b = self.block_of[e.index()];
            used[b] += 1;
            if used[b] > self.capacities[b] {
                return false;
            }
        }
        true
    }

    fn rank(&self) -> usize {
        let mut sizes = vec![0usize; self.capacities.len()];
        for &b in &self.block_of {
            sizes[b] += 1;
        }
        sizes.iter().zip(&self.capacities).map(|(s, c)| s.min(c)).sum()
    }
}

/// Edges of an undirected multigraph; a set of edges is independent when it
/// is a forest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphicParams", into = "GraphicParams")]
pub struct GraphicMatroid {
    vertices: usize,
    edges: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct GraphicParams {
    vertices: usize,
    edges: Vec<(usize, usize)>,
}

impl TryFrom<GraphicParams> for GraphicMatroid {
    type Error = Error;

    fn try_from(p: GraphicParams) -> Result<Self> {
        GraphicMatroid::new(p.vertices, p.edges)
    }
}

impl From<GraphicMatroid> for GraphicParams {
    fn from(m: GraphicMatroid) -> Self {
        GraphicParams {
            vertices: m.vertices,
            edges: m.edges,
        }
    }
}

impl GraphicMatroid {
    pub fn new(vertices: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if let Some((i, e)) = edges.iter().enumerate().find(|(_, &(u, v))| u >= vertices || v >= vertices) {
            return Err(Error::DimensionMismatch(format!(
                "edge {i} = {e:?} references a vertex outside 0..{vertices}"
            )));
        }
        Ok(GraphicMatroid { vertices, edges })
    }

    pub fn vertices(&self) -> usize {
        self.vertices
    }

    pub fn edge(&self, item: ItemId) -> (usize, usize) {
        self.edges[item.index()]
    }

    fn forest_size<I: IntoIterator<Item = usize>>(&self, edges: I) -> (usize, bool) {
        let mut uf = UnionFind::<usize>::new(self.vertices);
        let mut size = 0;
        let mut acyclic = true;
        for i in edges {
            let (u, v) = self.edges[i];
            if uf.union(u, v) {
                size += 1;
            } else {
                acyclic = false;
            }
        }
        (size, acyclic)
    }
}

impl Matroid for GraphicMatroid {
    fn ground_size(&self) -> usize {
        self.edges.len()
    }

    fn is_independent(&self, set: &ItemSet) -> bool {
        self.forest_size(set.iter().map(ItemId::index)).1
    }

    fn rank(&self) -> usize {
        self.forest_size(0..self.edges.len()).0
    }
}

/// The built-in matroid families, as stored in instance files.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum MatroidKind {
    Uniform(UniformMatroid),
    Partition(PartitionMatroid),
    Graphic(GraphicMatroid),
}

impl Matroid for MatroidKind {
    fn ground_size(&self) -> usize {
        match self {
            MatroidKind::Uniform(m) => m.ground_size(),
            MatroidKind::Partition(m) => m.ground_size(),
            MatroidKind::Graphic(m) => m.ground_size(),
        }
    }

    fn is_independent(&self, set: &ItemSet) -> bool {
        match self {
            MatroidKind::Uniform(m) => m.is_independent(set),
            MatroidKind::Partition(m) => m.is_independent(set),
            MatroidKind::Graphic(m) => m.is_independent(set),
        }
    }

    fn rank(&self) -> usize {
        match self {
            MatroidKind::Uniform(m) => m.rank(),
            MatroidKind::Partition(m) => m.rank(),
            MatroidKind::Graphic(m) => m.rank(),
        }
    }
}

/// One matroid `M_l` of a matchoid, restricted to the ground subset `N_l`.
/// The matroid itself is indexed by global item ids.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchoidMember {
    pub ground: ItemSet,
    pub matroid: MatroidKind,
}

impl MatchoidMember {
    pub fn restrict(&self, set: &ItemSet) -> ItemSet {
        set.intersection(&self.ground)
    }

    pub fn is_independent(&self, set: &ItemSet) -> bool {
        self.matroid.is_independent(&self.restrict(set))
    }
}

/// A p-matchoid: `q` matroids over overlapping ground subsets, with every
/// item in at most `p` of them. `S` is feasible iff `S ∩ N_l` is independent
/// in every `M_l`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "MatchoidParams", into = "MatchoidParams")]
pub struct Matchoid {
    n: usize,
    p: usize,
    members: Vec<MatchoidMember>,
    largest_feasible: Option<usize>,
    membership: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct MatchoidParams {
    n: usize,
    p: usize,
    members: Vec<MatchoidMember>,
    /// Size of the largest feasible set, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
}

impl TryFrom<MatchoidParams> for Matchoid {
    type Error = Error;

    fn try_from(p: MatchoidParams) -> Result<Self> {
        let mut m = Matchoid::new(p.n, p.p, p.members)?;
        m.largest_feasible = p.k;
        Ok(m)
    }
}

impl From<Matchoid> for MatchoidParams {
    fn from(m: Matchoid) -> Self {
        MatchoidParams {
            n: m.n,
            p: m.p,
            members: m.members,
            k: m.largest_feasible,
        }
    }
}

impl Matchoid {
    pub fn new(n: usize, p: usize, members: Vec<MatchoidMember>) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidParameter("matchoid needs p >= 1".into()));
        }
        let mut membership = vec![Vec::new(); n];
        for (l, member) in members.iter().enumerate() {
            if member.matroid.ground_size() != n {
                return Err(Error::DimensionMismatch(format!(
                    "member {l} matroid has ground size {}, matchoid has {n}",
                    member.matroid.ground_size()
                )));
            }
            check_members(n, &member.ground)?;
            for e in &member.ground {
                membership[e.index()].push(l);
            }
        }
        if let Some((e, ls)) = membership.iter().enumerate().find(|(_, ls)| ls.len() > p) {
            return Err(Error::InvalidParameter(format!(
                "item {e} belongs to {} ground sets, more than p = {p}",
                ls.len()
            )));
        }
        Ok(Matchoid {
            n,
            p,
            members,
            largest_feasible: None,
            membership,
        })
    }

    /// Matchings of a bipartite graph: one capacity-1 partition matroid per
    /// side, keyed by the edge's endpoint on that side.
    pub fn bipartite_matching(left: usize, right: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let n = edges.len();
        if let Some(&(u, v)) = edges.iter().find(|&&(u, v)| u >= left || v >= right) {
            return Err(Error::DimensionMismatch(format!(
                "edge ({u}, {v}) outside a {left}x{right} bipartite graph"
            )));
        }
        let all: ItemSet = (0..n).map(ItemId::from).collect();
        let side = |block_of: Vec<usize>, blocks: usize| -> Result<MatchoidMember> {
            Ok(MatchoidMember {
                ground: all.clone(),
                matroid: MatroidKind::Partition(PartitionMatroid::new(block_of, vec![1; blocks])?),
            })
        };
        let members = vec![
            side(edges.iter().map(|e| e.0).collect(), left)?,
            side(edges.iter().map(|e| e.1).collect(), right)?,
        ];
        let mut m = Matchoid::new(n, 2, members)?;
        let adjacency: Vec<Vec<usize>> = (0..left)
            .map(|u| edges.iter().filter(|e| e.0 == u).map(|e| e.1).collect())
            .collect();
        let matched = max_bipartite_matching(right, &adjacency);
        m.largest_feasible = Some(matched.iter().filter(|m| m.is_some()).count());
        Ok(m)
    }

    /// The matchoid with a single member covering the whole ground set.
    pub fn from_matroid(matroid: MatroidKind) -> Result<Self> {
        let n = matroid.ground_size();
        let rank = matroid.rank();
        let ground = (0..n).map(ItemId::from).collect();
        let mut m = Matchoid::new(n, 1, vec![MatchoidMember { ground, matroid }])?;
        m.largest_feasible = Some(rank);
        Ok(m)
    }

    pub fn ground_size(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn members(&self) -> &[MatchoidMember] {
        &self.members
    }

    /// Indices `l` with `item ∈ N_l`, ascending.
    pub fn memberships(&self, item: ItemId) -> &[usize] {
        &self.membership[item.index()]
    }

    pub fn is_feasible(&self, set: &ItemSet) -> bool {
        self.members.iter().all(|m| m.is_independent(set))
    }

    pub fn largest_feasible(&self) -> Option<usize> {
        self.largest_feasible
    }
}

/// Outcome of a replacement-gain query for adding `e` to `S`.
#[derive(Clone, Debug, PartialEq)]
pub struct GainResult {
    /// `f(S + e - removal) - f(S)`, or `-inf` when no repair exists.
    pub gain: f64,
    pub removal: ItemSet,
    pub feasible: bool,
}

impl GainResult {
    pub fn infeasible() -> Self {
        GainResult {
            gain: f64::NEG_INFINITY,
            removal: ItemSet::new(),
            feasible: false,
        }
    }

    /// Whether `self` beats `other`: larger gain, then smaller removal set.
    pub fn beats(&self, other: &GainResult) -> bool {
        self.feasible
            && (!other.feasible
                || self.gain > other.gain
                || (self.gain == other.gain && self.removal < other.removal))
    }
}

fn best_repair<F, I>(f: &F, set: &ItemSet, item: ItemId, removals: I) -> GainResult
where
    F: SubmodularFn + ?Sized,
    I: IntoIterator<Item = ItemSet>,
{
    let mut removals = removals.into_iter().peekable();
    if removals.peek().is_none() {
        return GainResult::infeasible();
    }
    let base = f.eval(set);
    let mut best = GainResult::infeasible();
    for removal in removals {
        let candidate = GainResult {
            gain: f.eval(&set.swap(item, &removal)) - base,
            removal,
            feasible: true,
        };
        if candidate.beats(&best) {
            best = candidate;
        }
    }
    best
}

fn check_addition(ground_size: usize, item: ItemId, set: &ItemSet) -> Result<()> {
    check_item(ground_size, item)?;
    check_members(ground_size, set)?;
    if set.contains(item) {
        return Err(Error::AlreadyPresent(item));
    }
    Ok(())
}

/// Best single-element repair `θ(e, S)` for a matroid, and its gain.
///
/// Candidates are the empty removal (when `S + e` is independent) and every
/// `e' ∈ S` with `S + e - e'` independent.
pub fn theta_matroid<F, M>(f: &F, matroid: &M, item: ItemId, set: &ItemSet) -> Result<GainResult>
where
    F: SubmodularFn + ?Sized,
    M: Matroid + ?Sized,
{
    check_addition(matroid.ground_size(), item, set)?;
    if !matroid.is_independent(set) {
        return Err(Error::Infeasible(set.to_string()));
    }
    let mut removals = Vec::new();
    if matroid.is_independent(&set.with(item)) {
        removals.push(ItemSet::new());
    }
    for other in set {
        let single = ItemSet::singleton(other);
        if matroid.is_independent(&set.swap(item, &single)) {
            removals.push(single);
        }
    }
    let result = best_repair(f, set, item, removals);
    debug_assert!(!result.feasible || matroid.is_independent(&set.swap(item, &result.removal)));
    Ok(result)
}

/// `Ω_l(e, S)`: the elements of `S ∩ N_l` whose removal lets `e` in, plus
/// `None` (the empty removal) when `(S ∩ N_l) + e` is already independent.
pub fn omega(member: &MatchoidMember, item: ItemId, set: &ItemSet) -> Vec<Option<ItemId>> {
    let local = member.restrict(set);
    let mut out = Vec::new();
    if member.matroid.is_independent(&local.with(item)) {
        out.push(None);
    }
    for other in &local {
        if member.matroid.is_independent(&local.swap(item, &ItemSet::singleton(other))) {
            out.push(Some(other));
        }
    }
    out
}

/// Replacement gain under a p-matchoid: the best `μ(r)` over the product of
/// `Ω_l(e, S)` for the (at most p) members containing `e`.
pub fn gain_matchoid<F>(f: &F, matchoid: &Matchoid, item: ItemId, set: &ItemSet) -> Result<GainResult>
where
    F: SubmodularFn + ?Sized,
{
    check_addition(matchoid.ground_size(), item, set)?;
    if !matchoid.is_feasible(set) {
        return Err(Error::Infeasible(set.to_string()));
    }
    let factors: Vec<Vec<Option<ItemId>>> = matchoid
        .memberships(item)
        .iter()
        .map(|&l| omega(&matchoid.members[l], item, set))
        .collect();
    if factors.iter().any(Vec::is_empty) {
        return Ok(GainResult::infeasible());
    }
    // Odometer over the product; distinct unions in ascending order.
    let mut removals = BTreeSet::new();
    let mut digits = vec![0usize; factors.len()];
    loop {
        removals.insert(
            digits
                .iter()
                .zip(&factors)
                .filter_map(|(&d, factor)| factor[d])
                .collect::<ItemSet>(),
        );
        let mut pos = 0;
        while pos < digits.len() {
            digits[pos] += 1;
            if digits[pos] < factors[pos].len() {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
        if pos == digits.len() {
            break;
        }
    }
    let result = best_repair(f, set, item, removals);
    debug_assert!(!result.feasible || matchoid.is_feasible(&set.swap(item, &result.removal)));
    Ok(result)
}

/// The feasibility constraint of an instance: a matroid or a p-matchoid.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Constraint {
    Matroid(MatroidKind),
    Matchoid(Matchoid),
}

impl Constraint {
    pub fn ground_size(&self) -> usize {
        match self {
            Constraint::Matroid(m) => m.ground_size(),
            Constraint::Matchoid(m) => m.ground_size(),
        }
    }

    pub fn is_feasible(&self, set: &ItemSet) -> bool {
        match self {
            Constraint::Matroid(m) => m.is_independent(set),
            Constraint::Matchoid(m) => m.is_feasible(set),
        }
    }

    pub fn p(&self) -> usize {
        match self {
            Constraint::Matroid(_) => 1,
            Constraint::Matchoid(m) => m.p(),
        }
    }

    /// Replacement gain `g(e, S)` with its repair set.
    pub fn gain<F: SubmodularFn + ?Sized>(&self, f: &F, item: ItemId, set: &ItemSet) -> Result<GainResult> {
        match self {
            Constraint::Matroid(m) => theta_matroid(f, m, item, set),
            Constraint::Matchoid(m) => gain_matchoid(f, m, item, set),
        }
    }

    /// Size of the largest feasible set: the rank for a matroid, the stored
    /// value for a matchoid, falling back to a greedy maximal feasible set.
    pub fn largest_feasible(&self) -> usize {
        match self {
            Constraint::Matroid(m) => m.rank(),
            Constraint::Matchoid(m) => m
                .largest_feasible()
                .unwrap_or_else(|| greedy_maximal(self).len()),
        }
    }

    /// Upper bound on the size of any feasible set.
    pub fn size_bound(&self) -> usize {
        match self {
            Constraint::Matroid(m) => m.rank(),
            Constraint::Matchoid(m) => {
                let free = (0..m.n).filter(|&e| m.membership[e].is_empty()).count();
                let ranked: usize = m.members.iter().map(|mem| mem.matroid.rank()).sum();
                m.largest_feasible().unwrap_or((free + ranked).min(m.n))
            }
        }
    }
}

fn greedy_maximal(constraint: &Constraint) -> ItemSet {
    let mut set = ItemSet::new();
    for e in (0..constraint.ground_size()).map(ItemId::from) {
        if constraint.is_feasible(&set.with(e)) {
            set.insert(e);
        }
    }
    set
}

/// Extends an independent set to a basis, adding the lowest ids first.
pub fn extend_to_basis<M: Matroid + ?Sized>(matroid: &M, set: &ItemSet) -> Result<ItemSet> {
    check_members(matroid.ground_size(), set)?;
    if !matroid.is_independent(set) {
        return Err(Error::Infeasible(set.to_string()));
    }
    let mut basis = set.clone();
    for e in (0..matroid.ground_size()).map(ItemId::from) {
        if !basis.contains(e) && matroid.is_independent(&basis.with(e)) {
            basis.insert(e);
        }
    }
    Ok(basis)
}

/// Maximum bipartite matching by augmenting paths. Left vertices are tried in
/// order; each takes its first free neighbour when it has one and only
/// reroutes earlier matches otherwise. Returns `match_of_left`.
pub fn max_bipartite_matching(right: usize, adjacency: &[Vec<usize>]) -> Vec<Option<usize>> {
    fn augment(
        u: usize,
        adjacency: &[Vec<usize>],
        seen: &mut [bool],
        match_right: &mut [Option<usize>],
    ) -> bool {
        if let Some(&v) = adjacency[u].iter().find(|&&v| match_right[v].is_none()) {
            match_right[v] = Some(u);
            return true;
        }
        for &v in &adjacency[u] {
            if seen[v] {
                continue;
            }
            seen[v] = true;
            if match_right[v].is_some_and(|w| augment(w, adjacency, seen, match_right)) {
                match_right[v] = Some(u);
                return true;
            }
        }
        false
    }

    let mut match_right = vec![None; right];
    for u in 0..adjacency.len() {
        let mut seen = vec![false; right];
        augment(u, adjacency, &mut seen, &mut match_right);
    }
    let mut match_left = vec![None; adjacency.len()];
    for (v, u) in match_right.iter().enumerate() {
        if let Some(u) = *u {
            match_left[u] = Some(v);
        }
    }
    match_left
}

/// Brualdi's exchange bijection `π: A -> B` between two bases: fixes `A ∩ B`
/// and satisfies `A - x + π(x)` independent for every `x ∈ A`.
///
/// Found as a perfect matching on the exchange graph between `A \ B` and
/// `B \ A`. A failure means the oracle is not a matroid.
pub fn brualdi_bijection<M: Matroid + ?Sized>(
    matroid: &M,
    a: &ItemSet,
    b: &ItemSet,
) -> Result<BTreeMap<ItemId, ItemId>> {
    let rank = matroid.rank();
    for (name, basis) in [("A", a), ("B", b)] {
        check_members(matroid.ground_size(), basis)?;
        if basis.len() != rank || !matroid.is_independent(basis) {
            return Err(Error::InvalidParameter(format!("{name} = {basis} is not a basis")));
        }
    }
    let left: Vec<ItemId> = a.difference(b).iter().collect();
    let right: Vec<ItemId> = b.difference(a).iter().collect();
    let adjacency: Vec<Vec<usize>> = left
        .iter()
        .map(|&x| {
            let without_x = a.without(x);
            right
                .iter()
                .enumerate()
                .filter(|(_, &y)| matroid.is_independent(&without_x.with(y)))
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    let matching = max_bipartite_matching(right.len(), &adjacency);
    let mut pi: BTreeMap<ItemId, ItemId> = a.intersection(b).iter().map(|x| (x, x)).collect();
    for (i, m) in matching.iter().enumerate() {
        match m {
            Some(j) => {
                pi.insert(left[i], right[*j]);
            }
            None => {
                return Err(Error::NoExchangeBijection(format!(
                    "{} has no exchange partner in {b}",
                    left[i]
                )))
            }
        }
    }
    Ok(pi)
}
