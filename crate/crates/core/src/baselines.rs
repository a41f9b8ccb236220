//! Offline references: greedy, exact optima, a brute-force submodularity
//! checker and ratio summaries.

use serde::{Deserialize, Serialize};

use crate::constraints::Constraint;
use crate::error::{Error, Result};
use crate::submodular::{ItemId, ItemSet, SubmodularFn};

pub const DEFAULT_EXHAUSTIVE_LIMIT: usize = 20;
pub const CHECK_LIMIT: usize = 12;
const TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptMethod {
    Exhaustive,
    BranchAndBound,
    Greedy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub best_set: ItemSet,
    pub value: f64,
    pub method: OptMethod,
}

/// Greedy over all items. Adds the feasible item with the largest strictly
/// positive marginal, lowest id on ties, until nothing improves.
pub fn offline_greedy<F: SubmodularFn + ?Sized>(f: &F, constraint: &Constraint) -> OptResult {
    let all: ItemSet = (0..constraint.ground_size()).map(ItemId::from).collect();
    greedy_over(f, constraint, &all)
}

/// Greedy restricted to `candidates`.
pub fn greedy_over<F: SubmodularFn + ?Sized>(f: &F, constraint: &Constraint, candidates: &ItemSet) -> OptResult {
    let mut set = ItemSet::new();
    let mut value = f.eval(&set);
    loop {
        let mut best: Option<(f64, ItemId, f64)> = None;
        for e in candidates.iter().filter(|&e| !set.contains(e)) {
            let next = set.with(e);
            if !constraint.is_feasible(&next) {
                continue;
            }
            let v = f.eval(&next);
            let gain = v - value;
            if gain > 0.0 && best.is_none_or(|(g, _, _)| gain > g) {
                best = Some((gain, e, v));
            }
        }
        match best {
            Some((_, e, v)) => {
                set.insert(e);
                value = v;
            }
            None => break,
        }
    }
    OptResult {
        best_set: set,
        value,
        method: OptMethod::Greedy,
    }
}

/// Exact optimum by enumerating feasible sets; infeasible sets are never
/// extended.
pub fn exhaustive_opt<F: SubmodularFn + ?Sized>(f: &F, constraint: &Constraint, limit: usize) -> Result<OptResult> {
    let n = constraint.ground_size();
    if n > limit {
        return Err(Error::TooLarge { n, limit });
    }
    fn dfs<F: SubmodularFn + ?Sized>(f: &F, c: &Constraint, next: usize, set: &mut ItemSet, best: &mut (f64, ItemSet)) {
        let v = f.eval(set);
        if v > best.0 {
            *best = (v, set.clone());
        }
        for e in (next..c.ground_size()).map(ItemId::from) {
            set.insert(e);
            if c.is_feasible(set) {
                dfs(f, c, e.index() + 1, set, best);
            }
            set.remove(e);
        }
    }
    let mut best = (f64::NEG_INFINITY, ItemSet::new());
    dfs(f, constraint, 0, &mut ItemSet::new(), &mut best);
    Ok(OptResult {
        best_set: best.1,
        value: best.0,
        method: OptMethod::Exhaustive,
    })
}

/// Exact optimum for submodular `f` by branch and bound.
///
/// A node `S` with allowed extensions `C` is bounded by `f(S)` plus the
/// largest `size_bound - |S|` positive marginals over `C`, which submodularity
/// makes an upper bound on every feasible superset. The greedy value seeds
/// the incumbent.
pub fn branch_and_bound_opt<F: SubmodularFn + ?Sized>(f: &F, constraint: &Constraint) -> OptResult {
    struct Search<'a, F: ?Sized> {
        f: &'a F,
        c: &'a Constraint,
        max_size: usize,
        best: (f64, ItemSet),
    }

    impl<F: SubmodularFn + ?Sized> Search<'_, F> {
        fn visit(&mut self, set: &mut ItemSet, value: f64, allowed: &[ItemId]) {
            if value > self.best.0 {
                self.best = (value, set.clone());
            }
            let room = self.max_size.saturating_sub(set.len());
            if room == 0 {
                return;
            }
            let mut scored: Vec<(f64, ItemId, f64)> = allowed
                .iter()
                .filter_map(|&e| {
                    let next = set.with(e);
                    self.c.is_feasible(&next).then(|| {
                        let v = self.f.eval(&next);
                        (v - value, e, v)
                    })
                })
                .collect();
            scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let bound: f64 = value + scored.iter().take(room).map(|s| s.0.max(0.0)).sum::<f64>();
            if bound + TOLERANCE <= self.best.0 {
                return;
            }
            let order: Vec<ItemId> = scored.iter().map(|s| s.1).collect();
            for (i, &(_, e, v)) in scored.iter().enumerate() {
                // Later siblings only see candidates after `e`, so the
                // remaining bound shrinks as we go.
                let rest: f64 = scored[i..].iter().take(room).map(|s| s.0.max(0.0)).sum();
                if value + rest + TOLERANCE <= self.best.0 {
                    break;
                }
                set.insert(e);
                self.visit(set, v, &order[i + 1..]);
                set.remove(e);
            }
        }
    }

    let greedy = offline_greedy(f, constraint);
    let all: Vec<ItemId> = (0..constraint.ground_size()).map(ItemId::from).collect();
    let mut search = Search {
        f,
        c: constraint,
        max_size: constraint.size_bound(),
        best: (greedy.value, greedy.best_set),
    };
    let empty = ItemSet::new();
    let v0 = f.eval(&empty);
    search.visit(&mut ItemSet::new(), v0, &all);
    OptResult {
        best_set: search.best.1,
        value: search.best.0,
        method: OptMethod::BranchAndBound,
    }
}

/// The optimum, exhaustively when `n <= limit`, otherwise by branch and bound.
pub fn exact_opt<F: SubmodularFn + ?Sized>(f: &F, constraint: &Constraint, limit: usize) -> OptResult {
    exhaustive_opt(f, constraint, limit).unwrap_or_else(|_| branch_and_bound_opt(f, constraint))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Monotonicity {
        set: ItemSet,
        item: ItemId,
        before: f64,
        after: f64,
    },
    DiminishingReturns {
        set: ItemSet,
        extra: ItemId,
        item: ItemId,
        gain_small: f64,
        gain_large: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubmodularCheck {
    pub n: usize,
    pub monotone: bool,
    pub submodular: bool,
    pub violations: usize,
    pub first_violation: Option<Violation>,
}

impl SubmodularCheck {
    pub fn passed(&self) -> bool {
        self.monotone && self.submodular
    }
}

fn mask_set(mask: usize) -> ItemSet {
    (0..usize::BITS as usize)
        .filter(|b| mask >> b & 1 == 1)
        .map(ItemId::from)
        .collect()
}

/// Exhaustively checks monotonicity and diminishing returns on the first `n`
/// items. Uses the local form `Δ(e | S) >= Δ(e | S + j)`, which is
/// equivalent to submodularity.
pub fn check_submodular<F: SubmodularFn + ?Sized>(f: &F, n: usize) -> Result<SubmodularCheck> {
    if n > CHECK_LIMIT {
        return Err(Error::TooLarge { n, limit: CHECK_LIMIT });
    }
    if n > f.ground_size() {
        return Err(Error::DimensionMismatch(format!(
            "asked to check {n} items of a ground set of {}",
            f.ground_size()
        )));
    }
    let table: Vec<f64> = (0..1usize << n).map(|m| f.eval(&mask_set(m))).collect();
    let mut report = SubmodularCheck {
        n,
        monotone: true,
        submodular: true,
        violations: 0,
        first_violation: None,
    };
    let flag = |report: &mut SubmodularCheck, v: Violation| {
        match v {
            Violation::Monotonicity { .. } => report.monotone = false,
            Violation::DiminishingReturns { .. } => report.submodular = false,
        }
        report.violations += 1;
        report.first_violation.get_or_insert(v);
    };
    for mask in 0..table.len() {
        for e in (0..n).filter(|e| mask >> e & 1 == 0) {
            let with_e = mask | 1 << e;
            let gain_small = table[with_e] - table[mask];
            if gain_small < -TOLERANCE {
                flag(
                    &mut report,
                    Violation::Monotonicity {
                        set: mask_set(mask),
                        item: ItemId::from(e),
                        before: table[mask],
                        after: table[with_e],
                    },
                );
            }
            for j in (0..n).filter(|&j| j != e && mask >> j & 1 == 0) {
                let bigger = mask | 1 << j;
                let gain_large = table[bigger | 1 << e] - table[bigger];
                if gain_small < gain_large - TOLERANCE {
                    flag(
                        &mut report,
                        Violation::DiminishingReturns {
                            set: mask_set(mask),
                            extra: ItemId::from(j),
                            item: ItemId::from(e),
                            gain_small,
                            gain_large,
                        },
                    );
                }
            }
        }
    }
    Ok(report)
}

/// `num / den`, with `0 / 0 = 1`.
pub fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        if num == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

/// The asymptotic guarantee `(1 - e^{-(p+1)} - epsilon) / (p + 1)`; `p = 1`
/// is the matroid case.
pub fn reference_ratio(p: usize, epsilon: f64) -> f64 {
    let q = (p + 1) as f64;
    (1.0 - (-q).exp() - epsilon) / q
}

/// `½ (1 - 1/e)(1 - 1/e²)`, the preemption-mode reference.
pub fn preemption_reference() -> f64 {
    0.5 * (1.0 - (-1f64).exp()) * (1.0 - (-2f64).exp())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioSummary {
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub min: f64,
    pub reference: f64,
}

/// Mean, sample standard deviation and a normal 95% interval.
pub fn ratio_report(ratios: &[f64], reference: f64) -> RatioSummary {
    let count = ratios.len();
    let mean = if count == 0 { 0.0 } else { ratios.iter().sum::<f64>() / count as f64 };
    let sd = if count < 2 {
        0.0
    } else {
        (ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
    };
    let half = if count == 0 { 0.0 } else { 1.96 * sd / (count as f64).sqrt() };
    RatioSummary {
        count,
        mean,
        sd,
        ci_low: mean - half,
        ci_high: mean + half,
        min: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        reference,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{MatroidKind, UniformMatroid};
    use crate::submodular::{make_coverage, make_modular, set_of};

    fn uniform(n: usize, k: usize) -> Constraint {
        Constraint::Matroid(MatroidKind::Uniform(UniformMatroid { n, k }))
    }

    #[test]
    fn greedy_takes_top_weights() {
        let f = make_modular(vec![3.0, 1.0, 2.0, 5.0]).unwrap();
        let r = offline_greedy(&f, &uniform(4, 2));
        assert_eq!(r.best_set, set_of(&[0, 3]));
        assert_eq!(r.value, 8.0);
        let empty = make_modular(vec![]).unwrap();
        assert!(offline_greedy(&empty, &uniform(0, 2)).best_set.is_empty());
    }

    #[test]
    fn greedy_on_coverage_toy() {
        let f = make_coverage(2, vec![vec![0, 1], vec![1]], vec![1.0, 1.0]).unwrap();
        assert_eq!(offline_greedy(&f, &uniform(2, 1)).best_set, set_of(&[0]));
    }

    #[test]
    fn exhaustive_small() {
        let f = make_modular(vec![3.0, 1.0, 2.0]).unwrap();
        let r = exhaustive_opt(&f, &uniform(3, 2), 20).unwrap();
        assert_eq!((r.best_set, r.value), (set_of(&[0, 2]), 5.0));
        assert!(matches!(
            exhaustive_opt(&f, &uniform(3, 2), 2),
            Err(Error::TooLarge { n: 3, limit: 2 })
        ));
    }

    #[test]
    fn branch_and_bound_agrees_on_modular() {
        let f = make_modular(vec![3.0, 1.0, 2.0, 7.0, 0.5]).unwrap();
        let c = uniform(5, 3);
        assert_eq!(branch_and_bound_opt(&f, &c).value, 12.0);
    }

    #[test]
    fn checker_flags_supermodular_pair() {
        struct Pair;
        impl SubmodularFn for Pair {
            fn ground_size(&self) -> usize {
                2
            }
            fn eval(&self, s: &ItemSet) -> f64 {
                if s.len() == 2 {
                    3.0
                } else {
                    s.len() as f64
                }
            }
        }
        let report = check_submodular(&Pair, 2).unwrap();
        assert!(report.monotone && !report.submodular);
        assert!(matches!(report.first_violation, Some(Violation::DiminishingReturns { .. })));
        let m = make_modular(vec![1.0, 2.0, 3.0]).unwrap();
        assert!(check_submodular(&m, 3).unwrap().passed());
    }

    #[test]
    fn references() {
        assert!((reference_ratio(1, 0.0) - 0.432332).abs() < 1e-6);
        assert!((preemption_reference() - 0.273286).abs() < 1e-6);
        assert_eq!(ratio(2.0, 2.0), 1.0);
        assert_eq!(ratio(0.0, 0.0), 1.0);
        let s = ratio_report(&[1.0, 1.0], 0.4);
        assert_eq!((s.mean, s.sd), (1.0, 0.0));
    }
}
