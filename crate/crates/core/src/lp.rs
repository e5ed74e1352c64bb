//! The effective-size LP and its cutting-plane solver.
//!
//! For a target `t` and constant `b` the relaxation asks for `y in [0,1]^n`
//! with
//!
//! * `sum_j y_j >= t`,
//! * `sum_j E[X''_j] y_j <= 2`,
//! * `sum_{j in L(K)} beta_k(X'_j) y_j <= b k` for every `k` and every set
//!   `K` of `k` resources.
//!
//! The last family is exponential. [`solve_relaxation`] keeps an explicit pool
//! of those constraints, solves the explicit LP exactly and asks
//! [`separate`] for a violated member, which runs greedy maximum coverage for
//! every `k`. When no cut is found, every constraint of the family holds with
//! right-hand side [`crate::COVERAGE_SLACK`]` * b k`.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};
use std::sync::{Arc, Mutex};

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use serde::{Deserialize, Serialize};

use crate::error::{argument, Error, Result};
use crate::setsystem::SetSystemInstance;
use crate::stochastic::{DiscreteDistribution, SplitDistribution};
use crate::LP_TOLERANCE;

/// One committed constraint: the resource set `K` at scale `k = |K|`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cut {
    pub k: usize,
    pub resources: Vec<usize>,
}

/// Effective sizes of the truncated parts, computed lazily per `k`.
#[derive(Debug)]
pub struct EffectiveSizes {
    truncated: Vec<DiscreteDistribution>,
    /// Lookups above this scale use the cap instead.
    k_cap: u64,
    cache: Mutex<HashMap<u64, Arc<Vec<f64>>>>,
}

impl EffectiveSizes {
    /// `n_resources` fixes the cap `max(m, 2)^2` on requested scales.
    pub fn new(truncated: Vec<DiscreteDistribution>, n_resources: usize) -> Self {
        let m = n_resources.max(2) as u64;
        Self {
            truncated,
            k_cap: m.saturating_mul(m),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.truncated.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truncated.is_empty()
    }

    pub fn k_cap(&self) -> u64 {
        self.k_cap
    }

    /// `beta_k(X'_j)` for every task, `k` capped at [`Self::k_cap`].
    pub fn table(&self, k: u64) -> Arc<Vec<f64>> {
        let k = k.clamp(1, self.k_cap);
        if let Some(t) = self.cache.lock().expect("cache lock").get(&k) {
            return Arc::clone(t);
        }
        let table: Arc<Vec<f64>> = Arc::new(
            self.truncated
                .iter()
                .map(|d| d.effective_size(k).expect("k >= 1"))
                .collect(),
        );
        self.cache
            .lock()
            .expect("cache lock")
            .entry(k)
            .or_insert(table)
            .clone()
    }
}

/// The relaxation for one scaled instance.
#[derive(Debug)]
pub struct LpRelaxation {
    pub t: usize,
    pub b: f64,
    pub exceptional_means: Vec<f64>,
    /// Upper bound per variable: 1, or 0 for tasks removed from consideration.
    pub upper: Vec<f64>,
    pub sizes: EffectiveSizes,
    pub cut_pool: Vec<Cut>,
}

impl LpRelaxation {
    pub fn new(split: &[SplitDistribution], t: usize, b: f64, n_resources: usize) -> Result<Self> {
        if t > split.len() {
            return argument(format!("target t = {t} exceeds n = {}", split.len()));
        }
        if !(b.is_finite() && b > 0.0) {
            return argument(format!("constraint constant b must be positive, got {b}"));
        }
        Ok(Self {
            t,
            b,
            exceptional_means: split.iter().map(|s| s.exceptional_mean).collect(),
            upper: vec![1.0; split.len()],
            sizes: EffectiveSizes::new(
                split.iter().map(|s| s.truncated.clone()).collect(),
                n_resources,
            ),
            cut_pool: Vec::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.exceptional_means.len()
    }

    /// Left-hand side of the coverage constraint `(k, K)` at `y`.
    pub fn cut_load(&self, sys: &SetSystemInstance, cut: &Cut, y: &[f64]) -> f64 {
        let beta = self.sizes.table(cut.k as u64);
        sys.union_tasks(&cut.resources)
            .iter()
            .map(|&j| beta[j] * y[j])
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Feasible,
    Infeasible,
}

/// One cutting-plane round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Optimum of `sum_j y_j` over the explicit constraints.
    pub objective: f64,
    /// `(k, |K|, load / (b k))` of the cut found this round.
    pub cut: Option<(usize, usize, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub y: Vec<f64>,
    pub status: LpStatus,
    /// Largest `load - b k` over the pool cuts at `y`.
    pub violation_slack: f64,
    pub trace: Vec<RoundRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpOptions {
    pub max_cuts: usize,
    /// Sweep only the scales the rounding consumes instead of all of `1..=m`.
    pub fast_k: bool,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            max_cuts: 500,
            fast_k: false,
        }
    }
}

/// Greedy maximum coverage: `k` resources chosen one at a time by largest
/// uncovered weight, ties to the smaller id. Returns the chosen ids (in
/// selection order) and the covered weight.
pub fn greedy_max_coverage(
    weights: &[f64],
    sys: &SetSystemInstance,
    k: usize,
) -> Result<(Vec<usize>, f64)> {
    if k == 0 {
        return argument("max coverage needs k >= 1");
    }
    if k > sys.n_resources() {
        return argument(format!("k = {k} exceeds m = {}", sys.n_resources()));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return argument("coverage weights must be finite and nonnegative");
    }
    let mut covered = vec![false; sys.n_tasks()];
    let gain = |i: usize, covered: &[bool]| -> f64 {
        sys.tasks_of(i)
            .iter()
            .filter(|&&j| !covered[j])
            .map(|&j| weights[j])
            .sum()
    };

    #[derive(PartialEq)]
    struct Key(f64, Reverse<usize>);
    impl Eq for Key {}
    impl PartialOrd for Key {
        fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Key {
        fn cmp(&self, other: &Self) -> Ordering {
            self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
        }
    }

    // lazy evaluation: stale gains are upper bounds since coverage is
    // submodular, so a refreshed top that still beats the next key is the
    // true maximum under the same tie-break
    let mut heap: BinaryHeap<Key> = (0..sys.n_resources())
        .map(|i| Key(gain(i, &covered), Reverse(i)))
        .collect();
    let mut chosen = Vec::with_capacity(k);
    let mut total = 0.0;
    while chosen.len() < k {
        let Key(_, Reverse(i)) = heap.pop().expect("k <= m");
        let fresh = Key(gain(i, &covered), Reverse(i));
        if heap.peek().is_some_and(|top| *top > fresh) {
            heap.push(fresh);
            continue;
        }
        total += fresh.0;
        for &j in sys.tasks_of(i) {
            covered[j] = true;
        }
        chosen.push(i);
    }
    Ok((chosen, total))
}

/// Scales examined by the separation oracle.
pub fn separation_scales(m: usize, fast_k: bool) -> Vec<usize> {
    if !fast_k {
        return (1..=m).collect();
    }
    let mut ks = vec![1];
    let mut exp = 1u32;
    while exp < usize::BITS && (1usize << exp) <= m {
        ks.push(1usize << exp);
        exp *= 2;
    }
    ks.retain(|&k| k <= m);
    ks.dedup();
    ks
}

fn violated_at(
    y: &[f64],
    rel: &LpRelaxation,
    sys: &SetSystemInstance,
    k: usize,
) -> Option<(Cut, f64)> {
    let beta = rel.sizes.table(k as u64);
    let weights: Vec<f64> = beta.iter().zip(y).map(|(b, y)| b * y).collect();
    let (mut chosen, covered) = greedy_max_coverage(&weights, sys, k).expect("valid scale");
    let rhs = rel.b * k as f64;
    (covered > rhs + LP_TOLERANCE).then(|| {
        chosen.sort_unstable();
        (Cut { k, resources: chosen }, covered / rhs)
    })
}

/// First `(k, K)` in increasing `k` whose greedy coverage exceeds `b k`.
pub fn separate(
    y: &[f64],
    rel: &LpRelaxation,
    sys: &SetSystemInstance,
    fast_k: bool,
) -> Option<Cut> {
    separate_with_ratio(y, rel, sys, fast_k).map(|(cut, _)| cut)
}

fn separate_with_ratio(
    y: &[f64],
    rel: &LpRelaxation,
    sys: &SetSystemInstance,
    fast_k: bool,
) -> Option<(Cut, f64)> {
    let scales = separation_scales(sys.n_resources(), fast_k);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        for chunk in scales.chunks(16) {
            let found: Vec<Option<(Cut, f64)>> = chunk
                .par_iter()
                .map(|&k| violated_at(y, rel, sys, k))
                .collect();
            if let Some(hit) = found.into_iter().flatten().next() {
                return Some(hit);
            }
        }
        None
    }
    #[cfg(not(feature = "parallel"))]
    {
        scales.into_iter().find_map(|k| violated_at(y, rel, sys, k))
    }
}

/// Maximizes `sum_j y_j` (capped at `t`) over the explicit constraints.
fn solve_explicit(rel: &LpRelaxation, sys: &SetSystemInstance) -> Result<Option<Vec<f64>>> {
    let n = rel.n();
    if n == 0 {
        return Ok(Some(Vec::new()));
    }
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = rel.upper.iter().map(|&u| lp.add_var(1.0, (0.0, u))).collect();
    let all: Vec<_> = vars.iter().map(|&v| (v, 1.0)).collect();
    lp.add_constraint(all.as_slice(), ComparisonOp::Le, rel.t as f64);
    let exceptional: Vec<_> = vars
        .iter()
        .zip(&rel.exceptional_means)
        .filter(|(_, &c)| c > 0.0)
        .map(|(&v, &c)| (v, c))
        .collect();
    if !exceptional.is_empty() {
        lp.add_constraint(exceptional.as_slice(), ComparisonOp::Le, 2.0);
    }
    for cut in &rel.cut_pool {
        let beta = rel.sizes.table(cut.k as u64);
        let row: Vec<_> = sys
            .union_tasks(&cut.resources)
            .into_iter()
            .filter(|&j| beta[j] > 0.0)
            .map(|j| (vars[j], beta[j]))
            .collect();
        if !row.is_empty() {
            lp.add_constraint(row.as_slice(), ComparisonOp::Le, rel.b * cut.k as f64);
        }
    }
    match lp.solve() {
        Ok(outcome) => {
            let solution = outcome
                .into_solution()
                .map_err(|_| Error::Lp("explicit LP solve was interrupted".into()))?;
            Ok(Some(
                vars.iter()
                    .zip(&rel.upper)
                    .map(|(&v, &u)| solution.var_value(v).clamp(0.0, u))
                    .collect(),
            ))
        }
        Err(microlp::Error::Infeasible) => Ok(None),
        Err(e) => Err(Error::Lp(e.to_string())),
    }
}

/// Cutting-plane loop. The pool of `rel` grows in place.
pub fn solve_relaxation(
    rel: &mut LpRelaxation,
    sys: &SetSystemInstance,
    options: &LpOptions,
) -> Result<LpSolution> {
    if sys.n_tasks() != rel.n() {
        return argument("relaxation and set system disagree on n");
    }
    let mut trace = Vec::new();
    for round in 0.. {
        let y = solve_explicit(rel, sys)?;
        let Some(y) = y else {
            return Ok(infeasible(rel.n(), trace));
        };
        let objective: f64 = y.iter().sum();
        if objective < rel.t as f64 - LP_TOLERANCE {
            trace.push(RoundRecord {
                round,
                objective,
                cut: None,
            });
            log::debug!("lp infeasible after {round} rounds: optimum {objective}");
            return Ok(infeasible(rel.n(), trace));
        }
        match separate_with_ratio(&y, rel, sys, options.fast_k) {
            None => {
                trace.push(RoundRecord {
                    round,
                    objective,
                    cut: None,
                });
                let violation_slack = rel
                    .cut_pool
                    .iter()
                    .map(|c| rel.cut_load(sys, c, &y) - rel.b * c.k as f64)
                    .fold(f64::NEG_INFINITY, f64::max);
                return Ok(LpSolution {
                    y,
                    status: LpStatus::Feasible,
                    violation_slack,
                    trace,
                });
            }
            Some((cut, ratio)) => {
                trace.push(RoundRecord {
                    round,
                    objective,
                    cut: Some((cut.k, cut.resources.len(), ratio)),
                });
                if rel.cut_pool.len() >= options.max_cuts {
                    return Err(Error::ResourceLimit(format!(
                        "cutting-plane loop exceeded {} cuts",
                        options.max_cuts
                    )));
                }
                if rel.cut_pool.contains(&cut) {
                    return Err(Error::Lp(format!(
                        "separation returned pool cut k = {} again",
                        cut.k
                    )));
                }
                rel.cut_pool.push(cut);
            }
        }
    }
    unreachable!("the round loop only exits by returning")
}

fn infeasible(n: usize, trace: Vec<RoundRecord>) -> LpSolution {
    LpSolution {
        y: vec![0.0; n],
        status: LpStatus::Infeasible,
        violation_slack: 0.0,
        trace,
    }
}
