//! Expected-makespan evaluation, a brute-force optimum and property checkers.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{argument, Error, Result};
use crate::lp::{greedy_max_coverage, Cut, LpRelaxation};
use crate::seeds;
use crate::setsystem::{ExtendResult, SetSystemInstance};
use crate::stochastic::DiscreteDistribution;

/// Outcome-count cap for [`evaluate_exact`].
pub const EXACT_OUTCOME_LIMIT: u64 = 1_000_000;

/// Subset-count cap for [`brute_force_opt`].
pub const BRUTE_FORCE_LIMIT: u64 = 100_000;

/// Samples per independently seeded Monte Carlo chunk.
pub const MC_CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateMethod {
    Exact,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MakespanEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
    pub method: EstimateMethod,
}

impl MakespanEstimate {
    /// `mean ± z stderr`.
    pub fn interval(&self, z: f64) -> (f64, f64) {
        (self.mean - z * self.stderr, self.mean + z * self.stderr)
    }
}

/// Resources touched by `chosen`, renumbered densely, and each chosen task's
/// local resource list.
struct LocalLoads {
    n_local: usize,
    lists: Vec<Vec<usize>>,
}

fn check_set(chosen: &[usize], sys: &SetSystemInstance, dists: &[DiscreteDistribution]) -> Result<()> {
    if dists.len() != sys.n_tasks() {
        return argument("one distribution per task required");
    }
    let mut seen = BTreeSet::new();
    for &j in chosen {
        if j >= sys.n_tasks() || !seen.insert(j) {
            return argument(format!("task {j} out of range or repeated"));
        }
    }
    Ok(())
}

fn local_loads(chosen: &[usize], sys: &SetSystemInstance) -> LocalLoads {
    let mut map = std::collections::HashMap::new();
    let lists = chosen
        .iter()
        .map(|&j| {
            sys.resources_of(j)
                .iter()
                .map(|&i| {
                    let next = map.len();
                    *map.entry(i).or_insert(next)
                })
                .collect()
        })
        .collect();
    LocalLoads {
        n_local: map.len(),
        lists,
    }
}

/// Number of joint outcomes of the chosen sizes, saturating.
pub fn outcome_count(chosen: &[usize], dists: &[DiscreteDistribution]) -> u64 {
    chosen
        .iter()
        .fold(1u64, |acc, &j| acc.saturating_mul(dists[j].len() as u64))
}

/// Exact `E[max_i sum_{j in S ∩ L_i} X_j]` by enumerating all outcomes.
pub fn evaluate_exact(
    chosen: &[usize],
    sys: &SetSystemInstance,
    dists: &[DiscreteDistribution],
) -> Result<MakespanEstimate> {
    check_set(chosen, sys, dists)?;
    let outcomes = outcome_count(chosen, dists);
    if outcomes > EXACT_OUTCOME_LIMIT {
        return Err(Error::ResourceLimit(format!(
            "{outcomes} joint outcomes exceed {EXACT_OUTCOME_LIMIT}"
        )));
    }
    let local = local_loads(chosen, sys);
    let mut loads = vec![0.0; local.n_local];

    fn recurse(
        depth: usize,
        prob: f64,
        chosen: &[usize],
        dists: &[DiscreteDistribution],
        lists: &[Vec<usize>],
        loads: &mut [f64],
    ) -> f64 {
        if depth == chosen.len() {
            return prob * loads.iter().copied().fold(0.0, f64::max);
        }
        let mut acc = 0.0;
        for &(v, p) in dists[chosen[depth]].support() {
            for &i in &lists[depth] {
                loads[i] += v;
            }
            acc += recurse(depth + 1, prob * p, chosen, dists, lists, loads);
            for &i in &lists[depth] {
                loads[i] -= v;
            }
        }
        acc
    }

    let mean = recurse(0, 1.0, chosen, dists, &local.lists, &mut loads);
    Ok(MakespanEstimate {
        mean,
        stderr: 0.0,
        samples: outcomes,
        method: EstimateMethod::Exact,
    })
}

/// Count, mean and sum of squared deviations of a sample batch.
#[derive(Clone, Copy, Debug, Default)]
struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.count as f64 / count as f64;
        let m2 = self.m2 + other.m2 + delta * delta * (self.count as f64 * other.count as f64) / count as f64;
        Moments { count, mean, m2 }
    }
}

/// Monte Carlo estimate of the expected makespan from `samples` independent
/// draws. Chunk `c` of [`MC_CHUNK`] samples uses seed `derive(seed, c)`, so
/// the result does not depend on the thread count.
pub fn evaluate_mc(
    chosen: &[usize],
    sys: &SetSystemInstance,
    dists: &[DiscreteDistribution],
    samples: u64,
    seed: u64,
) -> Result<MakespanEstimate> {
    check_set(chosen, sys, dists)?;
    if samples == 0 {
        return argument("Monte Carlo needs at least one sample");
    }
    let local = local_loads(chosen, sys);
    let chunks = samples.div_ceil(MC_CHUNK as u64);
    let run = |c: u64| {
        let mut rng = seeds::sub_rng(seed, c);
        let count = (samples - c * MC_CHUNK as u64).min(MC_CHUNK as u64);
        let mut loads = vec![0.0; local.n_local];
        let mut moments = Moments::default();
        for _ in 0..count {
            loads.iter_mut().for_each(|l| *l = 0.0);
            for (pos, &j) in chosen.iter().enumerate() {
                let x = dists[j].sample(&mut rng);
                if x != 0.0 {
                    for &i in &local.lists[pos] {
                        loads[i] += x;
                    }
                }
            }
            moments.push(loads.iter().copied().fold(0.0, f64::max));
        }
        moments
    };
    #[cfg(feature = "parallel")]
    let parts: Vec<Moments> = {
        use rayon::prelude::*;
        (0..chunks).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Moments> = (0..chunks).map(run).collect();
    let total = parts.into_iter().fold(Moments::default(), Moments::merge);
    let stderr = if total.count > 1 {
        (total.m2 / (total.count - 1) as f64).sqrt() / (total.count as f64).sqrt()
    } else {
        0.0
    };
    Ok(MakespanEstimate {
        mean: total.mean,
        stderr,
        samples: total.count,
        method: EstimateMethod::MonteCarlo,
    })
}

/// How [`brute_force_opt`] and the solver evaluate candidate sets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum Evaluator {
    Exact,
    MonteCarlo { samples: u64, seed: u64 },
    /// Exact when the outcome count allows it, Monte Carlo otherwise.
    Auto { samples: u64, seed: u64 },
}

impl Evaluator {
    pub fn evaluate(
        &self,
        chosen: &[usize],
        sys: &SetSystemInstance,
        dists: &[DiscreteDistribution],
    ) -> Result<MakespanEstimate> {
        match *self {
            Evaluator::Exact => evaluate_exact(chosen, sys, dists),
            Evaluator::MonteCarlo { samples, seed } => evaluate_mc(chosen, sys, dists, samples, seed),
            Evaluator::Auto { samples, seed } => {
                if outcome_count(chosen, dists) <= EXACT_OUTCOME_LIMIT {
                    evaluate_exact(chosen, sys, dists)
                } else {
                    evaluate_mc(chosen, sys, dists, samples, seed)
                }
            }
        }
    }
}

/// `C(n, t)`, saturating.
pub fn binomial(n: usize, t: usize) -> u64 {
    if t > n {
        return 0;
    }
    let t = t.min(n - t);
    let mut acc: u128 = 1;
    for i in 0..t {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Best size-`t` subset by exhaustive search; ties go to the
/// lexicographically first subset.
pub fn brute_force_opt(
    sys: &SetSystemInstance,
    dists: &[DiscreteDistribution],
    t: usize,
    evaluator: &Evaluator,
) -> Result<(Vec<usize>, MakespanEstimate)> {
    let n = sys.n_tasks();
    if t > n {
        return argument(format!("t = {t} exceeds n = {n}"));
    }
    let count = binomial(n, t);
    if count > BRUTE_FORCE_LIMIT {
        return Err(Error::ResourceLimit(format!(
            "C({n}, {t}) = {count} subsets exceed {BRUTE_FORCE_LIMIT}"
        )));
    }
    let mut subset: Vec<usize> = (0..t).collect();
    let mut best: Option<(Vec<usize>, MakespanEstimate)> = None;
    loop {
        let est = evaluator.evaluate(&subset, sys, dists)?;
        if best.as_ref().is_none_or(|(_, b)| est.mean < b.mean) {
            best = Some((subset.clone(), est));
        }
        // next combination in lexicographic order
        let Some(pos) = (0..t).rev().find(|&p| subset[p] < n - t + p) else {
            break;
        };
        subset[pos] += 1;
        for q in pos + 1..t {
            subset[q] = subset[q - 1] + 1;
        }
    }
    Ok(best.expect("at least one subset"))
}

/// Machine-readable outcome of a checker.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub pass: bool,
    /// First counterexample found, if any.
    pub witness: Option<String>,
}

impl CheckReport {
    fn ok() -> Self {
        Self {
            pass: true,
            witness: None,
        }
    }

    fn fail(witness: String) -> Self {
        Self {
            pass: false,
            witness: Some(witness),
        }
    }
}

/// Brute-force check of an Extend output: `D ⊆ M`, `R_i ⊆ M`,
/// `|R_i| <= lambda` and `L_i ∩ L(D) ⊆ L(R_i)` for every resource `i`.
pub fn check_lambda_safe(
    sys: &SetSystemInstance,
    dangerous: &[usize],
    result: &ExtendResult,
    lambda: usize,
) -> CheckReport {
    let m = sys.n_resources();
    let safe: BTreeSet<usize> = result.safe.iter().copied().collect();
    if let Some(&i) = dangerous.iter().find(|i| !safe.contains(i)) {
        return CheckReport::fail(format!("dangerous resource {i} missing from M"));
    }
    if let Some(&i) = safe.iter().find(|&&i| i >= m) {
        return CheckReport::fail(format!("M holds out-of-range resource {i}"));
    }
    if result.covers.len() != m {
        return CheckReport::fail(format!("{} covers for {m} resources", result.covers.len()));
    }
    let mut in_ld = vec![false; sys.n_tasks()];
    for j in sys.union_tasks(dangerous) {
        in_ld[j] = true;
    }
    for (i, cover) in result.covers.iter().enumerate() {
        if cover.len() > lambda {
            return CheckReport::fail(format!("|R_{i}| = {} exceeds lambda = {lambda}", cover.len()));
        }
        if let Some(r) = cover.iter().find(|r| !safe.contains(r)) {
            return CheckReport::fail(format!("R_{i} holds {r}, not in M"));
        }
        let covered: BTreeSet<usize> = sys.union_tasks(cover).into_iter().collect();
        if let Some(&j) = sys
            .tasks_of(i)
            .iter()
            .find(|&&j| in_ld[j] && !covered.contains(&j))
        {
            return CheckReport::fail(format!(
                "task {j} loads resource {i} and L(D) but no resource of R_{i} = {cover:?}"
            ));
        }
    }
    CheckReport::ok()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum LpCheckMode {
    /// Every nonempty `K`; requires `m <= 12`.
    Exhaustive,
    /// `per_k` uniformly random `K` of each size plus the greedy maximizer.
    Sampled { per_k: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpCheckReport {
    /// Largest `load(K) / (b |K|)` seen, 0 when `y = 0`.
    pub max_ratio: f64,
    pub worst: Option<Cut>,
    pub checked: u64,
}

impl LpCheckReport {
    pub fn pass(&self) -> bool {
        self.max_ratio <= 1.0 + crate::LP_TOLERANCE
    }
}

/// Evaluates the coverage constraints `sum_{j in L(K)} beta_|K|(X'_j) y_j <= b |K|`.
pub fn check_lp_constraints(
    y: &[f64],
    rel: &LpRelaxation,
    sys: &SetSystemInstance,
    mode: &LpCheckMode,
) -> Result<LpCheckReport> {
    let m = sys.n_resources();
    if y.len() != sys.n_tasks() || rel.n() != sys.n_tasks() {
        return argument("y, relaxation and system disagree on n");
    }
    let mut report = LpCheckReport {
        max_ratio: 0.0,
        worst: None,
        checked: 0,
    };
    let consider = |k: usize, resources: Vec<usize>, report: &mut LpCheckReport| {
        let cut = Cut { k, resources };
        let ratio = rel.cut_load(sys, &cut, y) / (rel.b * k as f64);
        report.checked += 1;
        if ratio > report.max_ratio {
            report.max_ratio = ratio;
            report.worst = Some(cut);
        }
    };
    match mode {
        LpCheckMode::Exhaustive => {
            if m > 12 {
                return argument(format!("exhaustive check needs m <= 12, got {m}"));
            }
            for mask in 1u32..1 << m {
                let k = mask.count_ones() as usize;
                let resources = (0..m).filter(|&i| mask >> i & 1 == 1).collect();
                consider(k, resources, &mut report);
            }
        }
        LpCheckMode::Sampled { per_k, seed } => {
            for k in 1..=m {
                let mut rng = seeds::sub_rng(*seed, k as u64);
                for _ in 0..*per_k {
                    let mut resources = sample(&mut rng, m, k).into_vec();
                    resources.sort_unstable();
                    consider(k, resources, &mut report);
                }
                let beta = rel.sizes.table(k as u64);
                let weights: Vec<f64> = beta.iter().zip(y).map(|(b, y)| b * y.max(0.0)).collect();
                let (mut resources, _) = greedy_max_coverage(&weights, sys, k)?;
                resources.sort_unstable();
                consider(k, resources, &mut report);
            }
        }
    }
    Ok(report)
}
