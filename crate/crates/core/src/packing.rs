//! Deterministic packing subproblems and their rounders.
//!
//! A [`PackingInstance`] is the reward-maximization problem
//! `max sum r_j y_j` subject to `sum_{j in L_i} s_j y_j <= theta` for every
//! resource. A [`PackableRounder`] turns a fractional solution into a feasible
//! integral set whose support lies inside the support of `y`.
//! [`solve_detcost`] reduces the cardinality problem with a global cost
//! budget to one rounder call plus a merging step.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{argument, validation, Result};
use crate::seeds;
use crate::setsystem::SetSystemInstance;
use crate::LP_TOLERANCE;

#[derive(Clone, Debug, PartialEq)]
pub struct PackingInstance {
    pub sys: SetSystemInstance,
    pub sizes: Vec<f64>,
    pub rewards: Vec<f64>,
    pub theta: f64,
}

impl PackingInstance {
    pub fn new(sys: SetSystemInstance, sizes: Vec<f64>, rewards: Vec<f64>, theta: f64) -> Result<Self> {
        let n = sys.n_tasks();
        if sizes.len() != n || rewards.len() != n {
            return validation("sizes and rewards need one entry per task");
        }
        if sizes.iter().chain(&rewards).any(|v| !v.is_finite()) || sizes.iter().any(|&s| s < 0.0) {
            return validation("sizes must be finite and nonnegative, rewards finite");
        }
        let max_size = sizes.iter().copied().fold(0.0, f64::max);
        if !(theta.is_finite() && theta >= max_size) {
            return validation(format!("theta = {theta} below the largest size {max_size}"));
        }
        Ok(Self {
            sys,
            sizes,
            rewards,
            theta,
        })
    }

    pub fn n(&self) -> usize {
        self.sys.n_tasks()
    }

    /// `sum_j r_j y_j`.
    pub fn lp_value(&self, y: &[f64]) -> f64 {
        self.rewards.iter().zip(y).map(|(r, y)| r * y).sum()
    }

    pub fn reward(&self, chosen: &[usize]) -> f64 {
        chosen.iter().map(|&j| self.rewards[j]).sum()
    }

    /// Exact capacity check of an integral set.
    pub fn is_feasible(&self, chosen: &[usize]) -> bool {
        let mut load = vec![0.0; self.sys.n_resources()];
        for &j in chosen {
            for &i in self.sys.resources_of(j) {
                load[i] += self.sizes[j];
            }
        }
        load.iter().all(|&l| l <= self.theta)
    }

    /// Checks `y` against the fractional constraints within `LP_TOLERANCE`.
    pub fn check_fractional(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.n() {
            return argument("fractional solution has the wrong length");
        }
        if y
            .iter()
            .any(|&v| !v.is_finite() || !(-LP_TOLERANCE..=1.0 + LP_TOLERANCE).contains(&v))
        {
            return argument("fractional solution outside [0, 1]");
        }
        let slack = LP_TOLERANCE * self.theta.max(1.0);
        for i in 0..self.sys.n_resources() {
            let load: f64 = self.sys.tasks_of(i).iter().map(|&j| self.sizes[j] * y[j]).sum();
            if load > self.theta + slack {
                return argument(format!(
                    "fractional load {load} on resource {i} exceeds theta = {}",
                    self.theta
                ));
            }
        }
        Ok(())
    }

    fn rounded(&self, mut chosen: Vec<usize>) -> RoundedSet {
        chosen.sort_unstable();
        RoundedSet {
            achieved_reward: self.reward(&chosen),
            capacity_feasible: self.is_feasible(&chosen),
            chosen,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundedSet {
    /// Sorted task ids.
    pub chosen: Vec<usize>,
    pub achieved_reward: f64,
    pub capacity_feasible: bool,
}

/// Integral rounding of the packing LP.
pub trait PackableRounder: Send + Sync {
    fn round(&self, inst: &PackingInstance, y: &[f64], seed: u64) -> Result<RoundedSet>;

    /// Proven ratio between LP value and (expected) rounded reward, when one
    /// is known.
    fn alpha(&self) -> Option<f64>;

    fn name(&self) -> &'static str;
}

/// Randomized rounding for paths in a rooted tree (intervals on a line are
/// paths in a path tree).
///
/// One repetition scans tasks by increasing depth of their topmost vertex,
/// keeps each with probability `y_j / 4` and adds it to the small
/// (`s_j <= theta / 2`) or large solution when capacities allow; the better of
/// the two is that repetition's result. Expected reward per repetition is at
/// least `1/16` of the LP value.
#[derive(Clone, Debug)]
pub struct TreeUfpRounder {
    /// Depth of the least-depth vertex of each task's path.
    pub depths: Vec<usize>,
    pub repetitions: usize,
}

impl TreeUfpRounder {
    fn one_pass(&self, inst: &PackingInstance, y: &[f64], order: &[usize], seed: u64) -> Vec<usize> {
        let mut rng = seeds::rng(seed);
        let m = inst.sys.n_resources();
        let mut loads = [vec![0.0; m], vec![0.0; m]];
        let mut picked: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        for &j in order {
            let u: f64 = rng.random();
            if u >= y[j] / 4.0 {
                continue;
            }
            let class = usize::from(inst.sizes[j] > inst.theta / 2.0);
            let load = &mut loads[class];
            let s = inst.sizes[j];
            if inst.sys.resources_of(j).iter().all(|&i| load[i] + s <= inst.theta) {
                for &i in inst.sys.resources_of(j) {
                    load[i] += s;
                }
                picked[class].push(j);
            }
        }
        let [small, large] = picked;
        if inst.reward(&large) > inst.reward(&small) {
            large
        } else {
            small
        }
    }
}

impl PackableRounder for TreeUfpRounder {
    fn round(&self, inst: &PackingInstance, y: &[f64], seed: u64) -> Result<RoundedSet> {
        inst.check_fractional(y)?;
        if self.depths.len() != inst.n() {
            return argument("tree rounder needs one depth per task");
        }
        let mut order: Vec<usize> = (0..inst.n())
            .filter(|&j| y[j] > 0.0 && inst.rewards[j] >= 0.0)
            .collect();
        order.sort_by_key(|&j| (self.depths[j], j));
        let reps = self.repetitions.max(1);
        let run = |rep: usize| self.one_pass(inst, y, &order, seeds::derive(seed, rep as u64));
        #[cfg(feature = "parallel")]
        let results: Vec<Vec<usize>> = {
            use rayon::prelude::*;
            (0..reps).into_par_iter().map(run).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let results: Vec<Vec<usize>> = (0..reps).map(run).collect();
        let best = results
            .into_iter()
            .map(|s| inst.rounded(s))
            .reduce(|a, b| if b.achieved_reward > a.achieved_reward { b } else { a })
            .expect("at least one repetition");
        Ok(best)
    }

    fn alpha(&self) -> Option<f64> {
        Some(16.0)
    }

    fn name(&self) -> &'static str {
        "tree-ufp"
    }
}

/// Independent-set rounding for unit sizes and unit capacity: every resource
/// may hold at most one chosen task.
pub trait IndependentSetRounder: Send + Sync {
    /// Chooses pairwise resource-disjoint tasks among those with
    /// `allowed[j]` and `y_j > 0`.
    fn independent_set(&self, sys: &SetSystemInstance, rewards: &[f64], y: &[f64], allowed: &[bool]) -> Vec<usize>;

    fn name(&self) -> &'static str;
}

/// Scans tasks by decreasing `r_j y_j` (ties to the smaller id) and keeps a
/// task when it shares no resource with the tasks kept so far.
#[derive(Clone, Copy, Debug, Default)]
pub struct GreedyIndependentSet;

impl IndependentSetRounder for GreedyIndependentSet {
    fn independent_set(&self, sys: &SetSystemInstance, rewards: &[f64], y: &[f64], allowed: &[bool]) -> Vec<usize> {
        let mut order: Vec<usize> = (0..sys.n_tasks())
            .filter(|&j| allowed[j] && y[j] > 0.0 && rewards[j] >= 0.0)
            .collect();
        order.sort_by(|&a, &b| (rewards[b] * y[b]).total_cmp(&(rewards[a] * y[a])).then(a.cmp(&b)));
        let mut used = vec![false; sys.n_resources()];
        let mut chosen = Vec::new();
        for j in order {
            if sys.resources_of(j).iter().all(|&i| !used[i]) {
                for &i in sys.resources_of(j) {
                    used[i] = true;
                }
                chosen.push(j);
            }
        }
        chosen.sort_unstable();
        chosen
    }

    fn name(&self) -> &'static str {
        "greedy-independent-set"
    }
}

/// [`GreedyIndependentSet`] on a packing instance, ignoring sizes.
pub fn greedy_independent_set(inst: &PackingInstance, y: &[f64]) -> RoundedSet {
    let allowed = vec![true; inst.n()];
    let chosen = GreedyIndependentSet.independent_set(&inst.sys, &inst.rewards, y, &allowed);
    let achieved_reward = inst.reward(&chosen);
    RoundedSet {
        chosen,
        achieved_reward,
        capacity_feasible: true,
    }
}

/// Size-grouping framework for families with an independent-set rounder.
///
/// With `tau = theta / (2 log2 m)`, tasks of size in `[2^(k-1) tau, 2^k tau)`
/// form group `k >= 1` and are rounded by repeated independent-set calls;
/// tasks below `tau` are kept with probability `y_j / 2` and then evicted
/// greedily until every capacity holds. The best group wins.
#[derive(Clone, Debug, Default)]
pub struct SizeGroupRounder<P> {
    pub plug_in: P,
}

/// Which branch of [`SizeGroupRounder`] produced the returned set.
pub fn size_groups(inst: &PackingInstance) -> Vec<usize> {
    let m = inst.sys.n_resources().max(2) as f64;
    let tau = inst.theta / (2.0 * m.log2());
    inst.sizes
        .iter()
        .map(|&s| {
            if s < tau || tau <= 0.0 {
                0
            } else {
                // smallest k >= 1 with s < 2^k tau
                let mut k = 1;
                while s >= tau * 2f64.powi(k as i32) {
                    k += 1;
                }
                k
            }
        })
        .collect()
}

impl<P: IndependentSetRounder> SizeGroupRounder<P> {
    fn round_group(&self, inst: &PackingInstance, y: &[f64], members: &[usize]) -> Vec<usize> {
        let max_size = members.iter().map(|&j| inst.sizes[j]).fold(0.0, f64::max);
        let copies = if max_size > 0.0 {
            (inst.theta / max_size).floor().max(1.0) as usize
        } else {
            members.len().max(1)
        };
        let copies = copies.min(members.len().max(1));
        let mut z = vec![0.0; inst.n()];
        for &j in members {
            z[j] = y[j] / 4.0 / copies as f64;
        }
        let mut allowed = vec![false; inst.n()];
        for &j in members {
            allowed[j] = true;
        }
        let mut taken = Vec::new();
        for _ in 0..copies {
            let s = self.plug_in.independent_set(&inst.sys, &inst.rewards, &z, &allowed);
            if s.is_empty() {
                break;
            }
            for &j in &s {
                allowed[j] = false;
            }
            taken.extend(s);
        }
        taken
    }

    fn round_small(&self, inst: &PackingInstance, y: &[f64], members: &[usize], seed: u64) -> Vec<usize> {
        let mut rng = seeds::rng(seed);
        let mut kept = vec![false; inst.n()];
        for &j in members {
            let u: f64 = rng.random();
            if u < y[j] / 2.0 && inst.rewards[j] >= 0.0 {
                kept[j] = true;
            }
        }
        let mut load = vec![0.0; inst.sys.n_resources()];
        for j in (0..inst.n()).filter(|&j| kept[j]) {
            for &i in inst.sys.resources_of(j) {
                load[i] += inst.sizes[j];
            }
        }
        for i in 0..inst.sys.n_resources() {
            while load[i] > inst.theta {
                let victim = inst
                    .sys
                    .tasks_of(i)
                    .iter()
                    .copied()
                    .filter(|&j| kept[j])
                    .min_by(|&a, &b| inst.rewards[a].total_cmp(&inst.rewards[b]).then(a.cmp(&b)))
                    .expect("an overloaded resource holds a kept task");
                kept[victim] = false;
                for &r in inst.sys.resources_of(victim) {
                    load[r] -= inst.sizes[victim];
                }
            }
        }
        (0..inst.n()).filter(|&j| kept[j]).collect()
    }
}

impl<P: IndependentSetRounder> PackableRounder for SizeGroupRounder<P> {
    fn round(&self, inst: &PackingInstance, y: &[f64], seed: u64) -> Result<RoundedSet> {
        inst.check_fractional(y)?;
        let groups = size_groups(inst);
        let n_groups = groups.iter().copied().max().map_or(0, |g| g + 1);
        let mut best: Option<RoundedSet> = None;
        for g in 0..n_groups {
            let members: Vec<usize> = (0..inst.n())
                .filter(|&j| groups[j] == g && y[j] > 0.0)
                .collect();
            if members.is_empty() {
                continue;
            }
            let chosen = if g == 0 {
                self.round_small(inst, y, &members, seed)
            } else {
                self.round_group(inst, y, &members)
            };
            let candidate = inst.rounded(chosen);
            if best
                .as_ref()
                .is_none_or(|b| candidate.achieved_reward > b.achieved_reward)
            {
                best = Some(candidate);
            }
        }
        Ok(best.unwrap_or_else(|| inst.rounded(Vec::new())))
    }

    fn alpha(&self) -> Option<f64> {
        None
    }

    fn name(&self) -> &'static str {
        "size-groups"
    }
}

/// Exact rounder for tiny instances: the best feasible subset of the support
/// of `y` by exhaustive search.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExhaustiveRounder;

/// Support size above which [`ExhaustiveRounder`] refuses to enumerate.
pub const EXHAUSTIVE_LIMIT: usize = 20;

impl PackableRounder for ExhaustiveRounder {
    fn round(&self, inst: &PackingInstance, y: &[f64], _seed: u64) -> Result<RoundedSet> {
        let support: Vec<usize> = (0..inst.n()).filter(|&j| y[j] > 0.0).collect();
        if support.len() > EXHAUSTIVE_LIMIT {
            return Err(crate::Error::ResourceLimit(format!(
                "exhaustive rounding over {} tasks (limit {EXHAUSTIVE_LIMIT})",
                support.len()
            )));
        }
        let mut best = (f64::NEG_INFINITY, Vec::new());
        for mask in 0u32..1 << support.len() {
            let set: Vec<usize> = support
                .iter()
                .enumerate()
                .filter(|(b, _)| mask >> b & 1 == 1)
                .map(|(_, &j)| j)
                .collect();
            let reward = inst.reward(&set);
            if reward > best.0 && inst.is_feasible(&set) {
                best = (reward, set);
            }
        }
        Ok(inst.rounded(best.1))
    }

    /// The integral optimum can sit below the LP value, so no ratio is
    /// claimed for arbitrary systems.
    fn alpha(&self) -> Option<f64> {
        None
    }

    fn name(&self) -> &'static str {
        "exhaustive"
    }
}

/// Cardinality maximization under per-resource size budget `theta` and a
/// global cost budget `psi`.
#[derive(Clone, Debug, PartialEq)]
pub struct DetCostInstance {
    pub sys: SetSystemInstance,
    pub sizes: Vec<f64>,
    pub costs: Vec<f64>,
    pub theta: f64,
    pub psi: f64,
}

impl DetCostInstance {
    pub fn new(sys: SetSystemInstance, sizes: Vec<f64>, costs: Vec<f64>, theta: f64, psi: f64) -> Result<Self> {
        let n = sys.n_tasks();
        if sizes.len() != n || costs.len() != n {
            return validation("sizes and costs need one entry per task");
        }
        let max_size = sizes.iter().copied().fold(0.0, f64::max);
        let max_cost = costs.iter().copied().fold(0.0, f64::max);
        if costs.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return validation("costs must be finite and nonnegative");
        }
        if !(theta >= max_size && psi >= max_cost && psi > 0.0) {
            return validation(format!(
                "budgets theta = {theta}, psi = {psi} below max size {max_size} / cost {max_cost}"
            ));
        }
        Ok(Self {
            sys,
            sizes,
            costs,
            theta,
            psi,
        })
    }

    pub fn cost(&self, chosen: &[usize]) -> f64 {
        chosen.iter().map(|&j| self.costs[j]).sum()
    }

    /// Exact check of both budgets.
    pub fn is_feasible(&self, chosen: &[usize]) -> bool {
        let mut load = vec![0.0; self.sys.n_resources()];
        for &j in chosen {
            for &i in self.sys.resources_of(j) {
                load[i] += self.sizes[j];
            }
        }
        load.iter().all(|&l| l <= self.theta) && self.cost(chosen) <= self.psi
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetCostBranch {
    /// The rounded set met the cost budget and was returned whole.
    Direct,
    /// The rounded set was split into cost-feasible parts.
    Merged,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetCostOutcome {
    pub set: RoundedSet,
    pub branch: DetCostBranch,
    /// `T = sum_j y_j`.
    pub lp_value: f64,
    /// Reward of the rounder's set under `r_j = 1 - T c_j / (2 psi)`.
    pub rounder_reward: f64,
    /// `T / alpha_bar`, the reward the analysis expects from the rounder.
    pub reward_bound: f64,
    pub reward_shortfall: bool,
}

/// Rounds a fractional DetCost solution through a packable rounder.
pub fn solve_detcost(
    inst: &DetCostInstance,
    y: &[f64],
    rounder: &dyn PackableRounder,
    alpha_bar: f64,
    seed: u64,
) -> Result<DetCostOutcome> {
    if y.len() != inst.sys.n_tasks() {
        return argument("fractional solution has the wrong length");
    }
    let total: f64 = y.iter().sum();
    let cost: f64 = inst.costs.iter().zip(y).map(|(c, y)| c * y).sum();
    if cost > inst.psi + LP_TOLERANCE * inst.psi.max(1.0) {
        return argument(format!("fractional cost {cost} exceeds psi = {}", inst.psi));
    }
    let rewards: Vec<f64> = inst
        .costs
        .iter()
        .map(|&c| 1.0 - total / (2.0 * inst.psi) * c)
        .collect();
    let pack = PackingInstance::new(inst.sys.clone(), inst.sizes.clone(), rewards.clone(), inst.theta)?;
    let rounded = rounder.round(&pack, y, seed)?;
    let rounder_reward = rounded.achieved_reward;
    let reward_bound = total / alpha_bar;
    let reward_shortfall = rounder_reward < reward_bound - 1e-9;

    let (chosen, branch) = if inst.cost(&rounded.chosen) <= inst.psi {
        (rounded.chosen, DetCostBranch::Direct)
    } else {
        (merge_parts(&rounded.chosen, &inst.costs, inst.psi), DetCostBranch::Merged)
    };
    let achieved_reward = chosen.iter().map(|&j| rewards[j]).sum();
    let capacity_feasible = pack.is_feasible(&chosen);
    Ok(DetCostOutcome {
        set: RoundedSet {
            chosen,
            achieved_reward,
            capacity_feasible,
        },
        branch,
        lp_value: total,
        rounder_reward,
        reward_bound,
        reward_shortfall,
    })
}

/// Merges singletons pairwise while the merged cost stays within `psi`, then
/// returns the largest part (first on ties).
fn merge_parts(set: &[usize], costs: &[f64], psi: f64) -> Vec<usize> {
    let mut parts: Vec<(f64, Vec<usize>)> = set.iter().map(|&j| (costs[j], vec![j])).collect();
    loop {
        let mut merged = false;
        let mut a = 0;
        while a < parts.len() {
            let mut b = a + 1;
            while b < parts.len() {
                if parts[a].0 + parts[b].0 <= psi {
                    let (cost, tasks) = parts.remove(b);
                    parts[a].0 += cost;
                    parts[a].1.extend(tasks);
                    merged = true;
                } else {
                    b += 1;
                }
            }
            a += 1;
        }
        if !merged {
            break;
        }
    }
    let best = parts
        .iter()
        .enumerate()
        .max_by(|x, y| x.1 .1.len().cmp(&y.1 .1.len()).then(y.0.cmp(&x.0)))
        .map(|(idx, _)| idx);
    let mut out = best.map(|idx| parts.swap_remove(idx).1).unwrap_or_default();
    out.sort_unstable();
    out
}
