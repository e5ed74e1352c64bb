//! Class decomposition, DetCost assembly and the end-to-end driver.
//!
//! For a feasible LP solution `y`, [`decompose`] peels off resources whose
//! residual load at scale `k^2` exceeds `2b`, for `k = 2, 4, 16, 256, ...`,
//! and extends each class of dangerous resources with the family's Extend.
//! [`assemble_and_round`] keeps the tasks with large `y_j`, scales the rest up
//! by `alpha_bar` and rounds them as one DetCost instance over the disjoint
//! union of the classes. [`solve_end_to_end`] runs this for every guess of
//! the optimum and keeps the best selection under the evaluator.
//!
//! The structural guarantees of the analysis are checked on every run and
//! collected in an [`AssertionReport`].

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{argument, Error, Result};
use crate::eval::{Evaluator, MakespanEstimate};
use crate::lp::{solve_relaxation, EffectiveSizes, LpOptions, LpRelaxation, LpStatus};
use crate::packing::{
    solve_detcost, SizeGroupRounder, DetCostBranch, DetCostInstance, ExhaustiveRounder,
    GreedyIndependentSet, PackableRounder, TreeUfpRounder,
};
use crate::seeds;
use crate::setsystem::{
    disjoint_union, materialize, GeometryFamily, SafeExtender, SetSystemInstance, TrivialExtender,
};
use crate::stochastic::{build_scaling_grid, DiscreteDistribution, SplitDistribution};
use crate::{COVERAGE_SLACK, LP_TOLERANCE};

/// A GenMakespan instance ready for solving.
#[derive(Clone)]
pub struct Problem {
    pub sys: SetSystemInstance,
    pub dists: Vec<DiscreteDistribution>,
    pub t: usize,
    pub extender: Arc<dyn SafeExtender>,
    /// Depth of each task's topmost vertex for line and tree families.
    pub task_depths: Option<Vec<usize>>,
    pub family: Option<GeometryFamily>,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("n", &self.sys.n_tasks())
            .field("m", &self.sys.n_resources())
            .field("t", &self.t)
            .field("extender", &self.extender.name())
            .finish()
    }
}

impl Problem {
    pub fn from_family(family: &GeometryFamily, dists: Vec<DiscreteDistribution>, t: usize) -> Result<Self> {
        let m = materialize(family)?;
        Self::checked(Self {
            sys: m.sys,
            dists,
            t,
            extender: m.extender,
            task_depths: m.task_depths,
            family: Some(family.clone()),
        })
    }

    /// An explicit set system; Extend returns every resource.
    pub fn explicit(sys: SetSystemInstance, dists: Vec<DiscreteDistribution>, t: usize) -> Result<Self> {
        let extender = Arc::new(TrivialExtender {
            n_resources: sys.n_resources(),
        });
        Self::checked(Self {
            sys,
            dists,
            t,
            extender,
            task_depths: None,
            family: None,
        })
    }

    fn checked(self) -> Result<Self> {
        if self.dists.len() != self.sys.n_tasks() {
            return Err(Error::Validation(format!(
                "{} distributions for {} tasks",
                self.dists.len(),
                self.sys.n_tasks()
            )));
        }
        if self.t > self.sys.n_tasks() {
            return argument(format!("t = {} exceeds n = {}", self.t, self.sys.n_tasks()));
        }
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.sys.n_tasks()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RounderChoice {
    /// Tree rounding for line and tree families, size groups otherwise.
    #[default]
    Auto,
    TreeUfp,
    SizeGroups,
    /// Exact search; only for tiny instances.
    Exhaustive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub b: f64,
    pub alpha_bar: f64,
    /// Evaluation budget per guess.
    pub inner_samples: u64,
    /// Evaluation budget for the returned selection.
    pub final_samples: u64,
    /// Repetitions of the tree rounder.
    pub repetitions: usize,
    pub fast_k: bool,
    pub seed: u64,
    pub max_cuts: usize,
    pub max_retries: usize,
    pub rounder: RounderChoice,
    /// Turn failed post-rounding checks into errors.
    pub strict: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            b: 4.0,
            alpha_bar: 4.0,
            inner_samples: 10_000,
            final_samples: 100_000,
            repetitions: 64,
            fast_k: false,
            seed: 0,
            max_cuts: 500,
            max_retries: 5,
            rounder: RounderChoice::Auto,
            strict: false,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if !(self.b.is_finite() && self.b > 0.0) {
            return argument(format!("b must be positive, got {}", self.b));
        }
        if !(self.alpha_bar.is_finite() && self.alpha_bar >= 1.0) {
            return argument(format!("alpha_bar must be at least 1, got {}", self.alpha_bar));
        }
        if self.inner_samples == 0 || self.final_samples == 0 {
            return argument("sample counts must be positive");
        }
        Ok(())
    }

    fn rounder(&self, depths: Option<&[usize]>) -> Result<Box<dyn PackableRounder>> {
        let tree = |d: &[usize]| -> Box<dyn PackableRounder> {
            Box::new(TreeUfpRounder {
                depths: d.to_vec(),
                repetitions: self.repetitions,
            })
        };
        let groups = || -> Box<dyn PackableRounder> {
            Box::new(SizeGroupRounder {
                plug_in: GreedyIndependentSet,
            })
        };
        Ok(match (self.rounder, depths) {
            (RounderChoice::Auto, Some(d)) | (RounderChoice::TreeUfp, Some(d)) => tree(d),
            (RounderChoice::TreeUfp, None) => {
                return argument("tree rounding needs a line or tree family")
            }
            (RounderChoice::Auto, None) | (RounderChoice::SizeGroups, _) => groups(),
            (RounderChoice::Exhaustive, _) => Box::new(ExhaustiveRounder),
        })
    }
}

/// One class `l` of the decomposition, at scale `k = 2^(2^l)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompClass {
    pub level: usize,
    /// `2^(2^level)`, saturating.
    pub k: u64,
    /// `D_l`, in capture order.
    pub dangerous: Vec<usize>,
    /// `L~_i` for each member of `dangerous`, same order.
    pub captured: Vec<Vec<usize>>,
    /// `J_l`, sorted.
    pub tasks: Vec<usize>,
    /// `M_l`, sorted.
    pub safe: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassDecomposition {
    pub classes: Vec<DecompClass>,
    /// Index of the last class.
    pub rho: usize,
}

impl ClassDecomposition {
    /// Class of every task.
    pub fn class_of(&self, n: usize) -> Vec<usize> {
        let mut out = vec![usize::MAX; n];
        for (l, c) in self.classes.iter().enumerate() {
            for &j in &c.tasks {
                out[j] = l;
            }
        }
        out
    }
}

fn scale_of(level: usize) -> u64 {
    let exp = 1u64.checked_shl(level as u32).unwrap_or(u64::MAX);
    if exp >= 64 {
        u64::MAX
    } else {
        1u64 << exp
    }
}

/// Number of peeling iterations: `ceil(log2 log2 m) + 1` for `m >= 2`, none
/// for `m <= 1`.
pub fn peeling_rounds(m: usize) -> usize {
    if m <= 1 {
        return 0;
    }
    let ll = (m as f64).log2().log2();
    (ll - 1e-12).ceil().max(0.0) as usize + 1
}

/// Splits tasks and resources into scale classes.
///
/// Resources are scanned in increasing id; removing tasks only lowers other
/// residual loads, so one pass per class realizes the smallest-id rule.
pub fn decompose(
    y: &[f64],
    sys: &SetSystemInstance,
    sizes: &EffectiveSizes,
    b: f64,
    extender: &dyn SafeExtender,
) -> Result<ClassDecomposition> {
    let n = sys.n_tasks();
    let m = sys.n_resources();
    if y.len() != n || sizes.len() != n {
        return argument("y, sizes and system disagree on n");
    }
    let rounds = peeling_rounds(m);
    let mut remaining = vec![true; n];
    let mut used = vec![false; m];
    let mut classes = Vec::with_capacity(rounds + 1);
    for level in 0..rounds {
        let k = scale_of(level);
        let beta = sizes.table(k.saturating_mul(k));
        let mut dangerous = Vec::new();
        let mut captured = Vec::new();
        for i in 0..m {
            let load: f64 = sys
                .tasks_of(i)
                .iter()
                .filter(|&&j| remaining[j])
                .map(|&j| beta[j] * y[j])
                .sum();
            if load > 2.0 * b {
                let taken: Vec<usize> = sys.tasks_of(i).iter().copied().filter(|&j| remaining[j]).collect();
                for &j in &taken {
                    remaining[j] = false;
                }
                used[i] = true;
                dangerous.push(i);
                captured.push(taken);
            }
        }
        let mut tasks: Vec<usize> = captured.iter().flatten().copied().collect();
        tasks.sort_unstable();
        let safe = if dangerous.is_empty() {
            Vec::new()
        } else {
            extender.extend(&dangerous)?.safe
        };
        classes.push(DecompClass {
            level,
            k,
            dangerous,
            captured,
            tasks,
            safe,
        });
    }
    let leftover: Vec<usize> = (0..m).filter(|&i| !used[i]).collect();
    classes.push(DecompClass {
        level: rounds,
        k: scale_of(rounds),
        dangerous: leftover.clone(),
        captured: Vec::new(),
        tasks: (0..n).filter(|&j| remaining[j]).collect(),
        safe: leftover,
    });
    Ok(ClassDecomposition { classes, rho: rounds })
}

/// Outcome of one structural check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantCheck {
    pub name: String,
    pub pass: bool,
    /// Largest observed value of the checked quantity.
    pub observed: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AssertionReport {
    pub checks: Vec<InvariantCheck>,
    /// Rounding attempts beyond the first.
    pub retries: usize,
    /// Attempts whose DetCost set fell short of `T / alpha_bar`.
    pub shortfalls: usize,
    /// Tasks added after the last retry while keeping both DetCost budgets.
    pub augmented: usize,
    /// Tasks added without regard to the budgets.
    pub padded: usize,
}

impl AssertionReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&InvariantCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn push(&mut self, name: &str, observed: f64, bound: f64) -> bool {
        let pass = observed <= bound;
        if !pass {
            log::warn!("check {name} failed: {observed} > {bound}");
        }
        self.checks.push(InvariantCheck {
            name: name.to_string(),
            pass,
            observed,
            bound,
        });
        pass
    }
}

/// Names of the structural checks.
pub mod checks {
    pub const PARTITION: &str = "class-partition";
    pub const CLASS_LOAD: &str = "fractional-class-load";
    pub const CLASS_SIZE: &str = "dangerous-class-size";
    pub const SCALED_FEASIBLE: &str = "scaled-solution-feasible";
    pub const CARDINALITY: &str = "cardinality";
    pub const INTEGRAL_LOAD: &str = "integral-class-load";
    pub const EXCEPTIONAL: &str = "exceptional-budget";
}

/// Result of rounding one LP solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundOutcome {
    /// `N = N_H ∪ N_L` plus any repair, sorted.
    pub selected: Vec<usize>,
    pub n_high: usize,
    pub n_low: usize,
    pub branch: DetCostBranch,
    pub report: AssertionReport,
}

/// Parameters of [`assemble_and_round`].
pub struct RoundParams<'a> {
    pub t: usize,
    pub b: f64,
    pub alpha_bar: f64,
    pub max_retries: usize,
    pub rounder: &'a dyn PackableRounder,
    pub seed: u64,
}

/// Fractional checks that need only the decomposition.
fn check_decomposition(
    dec: &ClassDecomposition,
    y: &[f64],
    sys: &SetSystemInstance,
    sizes: &EffectiveSizes,
    b: f64,
    report: &mut AssertionReport,
) -> Result<()> {
    let n = sys.n_tasks();
    let mut seen = vec![0usize; n];
    for c in &dec.classes {
        for &j in &c.tasks {
            seen[j] += 1;
        }
    }
    let bad = seen.iter().filter(|&&s| s != 1).count();
    report.push(checks::PARTITION, bad as f64, 0.0);

    let load_bound = 2.0 * b * COVERAGE_SLACK + LP_TOLERANCE;
    let mut worst_load = 0.0f64;
    let mut worst_size = 0.0f64;
    for c in &dec.classes {
        let beta = sizes.table(c.k);
        let mut load = vec![0.0; sys.n_resources()];
        for &j in &c.tasks {
            for &i in sys.resources_of(j) {
                load[i] += beta[j] * y[j];
            }
        }
        worst_load = worst_load.max(load.iter().copied().fold(0.0, f64::max) / load_bound);
        let k2 = c.k.saturating_mul(c.k) as f64;
        worst_size = worst_size.max(c.dangerous.len() as f64 / k2);
    }
    let ok_load = report.push(checks::CLASS_LOAD, worst_load, 1.0);
    let ok_size = report.push(checks::CLASS_SIZE, worst_size, 1.0);
    if bad > 0 || !ok_load || !ok_size {
        return Err(Error::Internal(format!(
            "decomposition checks failed: {:?}",
            report.checks
        )));
    }
    Ok(())
}

/// Builds the DetCost instance, rounds it and assembles `N_H ∪ N_L`.
pub fn assemble_and_round(
    dec: &ClassDecomposition,
    y: &[f64],
    sys: &SetSystemInstance,
    split: &[SplitDistribution],
    sizes: &EffectiveSizes,
    params: &RoundParams<'_>,
) -> Result<RoundOutcome> {
    let n = sys.n_tasks();
    let ab = params.alpha_bar;
    if y.len() != n || split.len() != n {
        return argument("y, split and system disagree on n");
    }
    let mut report = AssertionReport::default();
    check_decomposition(dec, y, sys, sizes, params.b, &mut report)?;

    // disjoint union of the class systems (J_l, M_l)
    let mut parts = Vec::with_capacity(dec.classes.len());
    let mut origin = Vec::with_capacity(n);
    let mut union_sizes = Vec::with_capacity(n);
    for c in &dec.classes {
        let r = sys.induced(&c.tasks, &c.safe)?;
        let beta = sizes.table(c.k);
        for &j in &r.task_ids {
            origin.push(j);
            union_sizes.push(beta[j]);
        }
        parts.push(r.sys);
    }
    let union = disjoint_union(&parts);
    let costs: Vec<f64> = origin.iter().map(|&j| split[j].exceptional_mean).collect();
    let theta = 2.0 * ab * params.b * COVERAGE_SLACK;
    let psi = 2.0 * ab;
    let inst = DetCostInstance::new(union.sys, union_sizes, costs, theta, psi)?;

    let high: Vec<bool> = y.iter().map(|&v| v > 1.0 / ab).collect();
    let n_high = high.iter().filter(|&&h| h).count();
    let y_bar: Vec<f64> = origin
        .iter()
        .map(|&j| if high[j] { 0.0 } else { (ab * y[j]).min(1.0) })
        .collect();

    let usys = &inst.sys;
    let max_load = |weights: &dyn Fn(usize) -> f64| {
        (0..usys.n_resources())
            .map(|i| usys.tasks_of(i).iter().map(|&u| weights(u)).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let frac_load = max_load(&|u| inst.sizes[u] * y_bar[u]);
    let frac_cost: f64 = inst.costs.iter().zip(&y_bar).map(|(c, y)| c * y).sum();
    let slack = 1.0 + 1e-9;
    let feasible_ratio = (frac_load / (theta * slack)).max(frac_cost / (psi * slack + LP_TOLERANCE));
    if !report.push(checks::SCALED_FEASIBLE, feasible_ratio, 1.0) {
        return Err(Error::Internal(format!(
            "scaled solution infeasible for the DetCost relaxation: load {frac_load} vs {theta}, cost {frac_cost} vs {psi}"
        )));
    }

    let total: f64 = y_bar.iter().sum();
    let need = params.t.saturating_sub(n_high);
    let mut best: Option<(Vec<usize>, DetCostBranch)> = None;
    for attempt in 0..=params.max_retries {
        if attempt > 0 {
            report.retries += 1;
        }
        let out = solve_detcost(&inst, &y_bar, params.rounder, ab, seeds::derive(params.seed, attempt as u64))?;
        if (out.set.chosen.len() as f64) < total / ab - 1e-9 {
            report.shortfalls += 1;
            log::debug!(
                "DetCost attempt {attempt}: {} tasks, expected at least {}",
                out.set.chosen.len(),
                total / ab
            );
        }
        let len = out.set.chosen.len();
        if best.as_ref().is_none_or(|(s, _)| len > s.len()) {
            best = Some((out.set.chosen, out.branch));
        }
        if len >= need {
            break;
        }
    }
    let (mut low_union, branch) = best.expect("at least one attempt");
    let n_low = low_union.len();
    let mut in_n = high.clone();
    for &u in &low_union {
        in_n[origin[u]] = true;
    }
    let count = |in_n: &[bool]| in_n.iter().filter(|&&x| x).count();
    report.push(checks::CARDINALITY, params.t as f64 - count(&in_n) as f64, 0.0);

    // repair: add DetCost-feasible tasks, then anything
    if count(&in_n) < params.t {
        let mut load = vec![0.0; usys.n_resources()];
        let mut cost = 0.0;
        for &u in &low_union {
            for &i in usys.resources_of(u) {
                load[i] += inst.sizes[u];
            }
            cost += inst.costs[u];
        }
        let mut order: Vec<usize> = (0..usys.n_tasks()).filter(|&u| !in_n[origin[u]]).collect();
        order.sort_by(|&a, &c| {
            y_bar[c]
                .total_cmp(&y_bar[a])
                .then(inst.costs[a].total_cmp(&inst.costs[c]))
                .then(a.cmp(&c))
        });
        for u in order {
            if count(&in_n) >= params.t {
                break;
            }
            let s = inst.sizes[u];
            if cost + inst.costs[u] <= psi && usys.resources_of(u).iter().all(|&i| load[i] + s <= theta) {
                for &i in usys.resources_of(u) {
                    load[i] += s;
                }
                cost += inst.costs[u];
                in_n[origin[u]] = true;
                low_union.push(u);
                report.augmented += 1;
            }
        }
        let mut rest: Vec<usize> = (0..n).filter(|&j| !in_n[j]).collect();
        rest.sort_by(|&a, &c| split[a].truncated.mean().total_cmp(&split[c].truncated.mean()).then(a.cmp(&c)));
        for j in rest {
            if count(&in_n) >= params.t {
                break;
            }
            in_n[j] = true;
            report.padded += 1;
        }
        if report.augmented + report.padded > 0 {
            log::warn!(
                "cardinality repaired: {} budget-respecting additions, {} unconditional",
                report.augmented,
                report.padded
            );
        }
    }

    // integral class loads over M_l and the exceptional budget on N
    let integral = max_load(&|u| if in_n[origin[u]] { inst.sizes[u] } else { 0.0 });
    let integral_bound = 4.0 * ab * params.b * COVERAGE_SLACK + LP_TOLERANCE;
    report.push(checks::INTEGRAL_LOAD, integral / integral_bound, 1.0);
    let exceptional: f64 = (0..n).filter(|&j| in_n[j]).map(|j| split[j].exceptional_mean).sum();
    report.push(checks::EXCEPTIONAL, exceptional / (4.0 * ab + LP_TOLERANCE), 1.0);

    Ok(RoundOutcome {
        selected: (0..n).filter(|&j| in_n[j]).collect(),
        n_high,
        n_low,
        branch,
        report,
    })
}

/// What happened at one guess of the optimum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuessSummary {
    pub guess: f64,
    pub status: GuessStatus,
    /// Tasks excluded because `E[X''] > 2` after scaling.
    pub dropped: usize,
    pub lp_rounds: usize,
    pub estimate: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GuessStatus {
    Rounded,
    LpInfeasible,
    TooFewTasks,
    ResourceLimit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    /// The returned selection, exactly `t` tasks, sorted.
    pub chosen: Vec<usize>,
    /// `N` before trimming to `t` (includes zero tasks), sorted.
    pub selected: Vec<usize>,
    pub n_high: usize,
    pub n_low: usize,
    /// Tasks of size identically zero, taken before solving.
    pub n_zero: usize,
    /// Decomposition at the winning guess, in ids of the original instance.
    pub decomposition: Option<ClassDecomposition>,
    pub winning_guess: Option<f64>,
    pub b: f64,
    pub alpha_bar: f64,
    pub report: AssertionReport,
    pub estimate: MakespanEstimate,
    pub guesses: Vec<GuessSummary>,
}

struct GuessResult {
    summary: GuessSummary,
    rounded: Option<(Vec<usize>, Vec<f64>, RoundOutcome, ClassDecomposition)>,
}

/// Runs LP, decomposition and rounding at one guess on the sub-instance of
/// tasks `active` (original ids, sorted).
fn solve_guess(
    problem: &Problem,
    active: &[usize],
    t: usize,
    guess: f64,
    config: &SolverConfig,
    seed: u64,
) -> Result<GuessResult> {
    let mut summary = GuessSummary {
        guess,
        status: GuessStatus::Rounded,
        dropped: 0,
        lp_rounds: 0,
        estimate: None,
    };
    let splits: Vec<(usize, SplitDistribution)> = active
        .iter()
        .map(|&j| Ok((j, problem.dists[j].scale(guess)?.split_at_one())))
        .collect::<Result<_>>()?;
    let kept: Vec<(usize, SplitDistribution)> = splits
        .into_iter()
        .filter(|(_, s)| s.exceptional_mean <= 2.0)
        .collect();
    summary.dropped = active.len() - kept.len();
    if kept.len() < t {
        summary.status = GuessStatus::TooFewTasks;
        return Ok(GuessResult { summary, rounded: None });
    }
    let ids: Vec<usize> = kept.iter().map(|(j, _)| *j).collect();
    let split: Vec<SplitDistribution> = kept.into_iter().map(|(_, s)| s).collect();
    let restriction = problem.sys.restrict(&ids)?;
    let sys = &restriction.sys;

    let mut rel = LpRelaxation::new(&split, t, config.b, sys.n_resources())?;
    let lp = match solve_relaxation(
        &mut rel,
        sys,
        &LpOptions {
            max_cuts: config.max_cuts,
            fast_k: config.fast_k,
        },
    ) {
        Ok(lp) => lp,
        Err(Error::ResourceLimit(msg)) => {
            log::warn!("guess {guess}: {msg}");
            summary.status = GuessStatus::ResourceLimit;
            return Ok(GuessResult { summary, rounded: None });
        }
        Err(e) => return Err(e),
    };
    summary.lp_rounds = lp.trace.len();
    if lp.status == LpStatus::Infeasible {
        summary.status = GuessStatus::LpInfeasible;
        return Ok(GuessResult { summary, rounded: None });
    }
    let dec = decompose(&lp.y, sys, &rel.sizes, config.b, problem.extender.as_ref())?;
    let depths = problem
        .task_depths
        .as_ref()
        .map(|d| dec_depths(&dec, &ids, d));
    let rounder = config.rounder(depths.as_deref())?;
    let out = assemble_and_round(
        &dec,
        &lp.y,
        sys,
        &split,
        &rel.sizes,
        &RoundParams {
            t,
            b: config.b,
            alpha_bar: config.alpha_bar,
            max_retries: config.max_retries,
            rounder: rounder.as_ref(),
            seed,
        },
    )?;
    Ok(GuessResult {
        summary,
        rounded: Some((ids, lp.y, out, dec)),
    })
}

/// Depths of the DetCost union tasks, which are listed class by class.
fn dec_depths(dec: &ClassDecomposition, ids: &[usize], depths: &[usize]) -> Vec<usize> {
    dec.classes
        .iter()
        .flat_map(|c| c.tasks.iter().map(|&j| depths[ids[j]]))
        .collect()
}

fn relabel(dec: &ClassDecomposition, ids: &[usize]) -> ClassDecomposition {
    let map = |v: &[usize]| v.iter().map(|&j| ids[j]).collect::<Vec<_>>();
    ClassDecomposition {
        rho: dec.rho,
        classes: dec
            .classes
            .iter()
            .map(|c| DecompClass {
                level: c.level,
                k: c.k,
                dangerous: c.dangerous.clone(),
                captured: c.captured.iter().map(|l| map(l)).collect(),
                tasks: map(&c.tasks),
                safe: c.safe.clone(),
            })
            .collect(),
    }
}

/// Keeps `t` tasks of `selected`: largest `y` first, then smaller mean, then
/// smaller id.
fn trim(selected: &[usize], t: usize, y: &dyn Fn(usize) -> f64, mean: &dyn Fn(usize) -> f64) -> Vec<usize> {
    let mut order = selected.to_vec();
    order.sort_by(|&a, &b| {
        y(b).total_cmp(&y(a))
            .then(mean(a).total_cmp(&mean(b)))
            .then(a.cmp(&b))
    });
    order.truncate(t);
    order.sort_unstable();
    order
}

/// Solves the instance: one LP and rounding per guess of the optimum, best
/// selection by the evaluator.
pub fn solve_end_to_end(problem: &Problem, config: &SolverConfig) -> Result<Solution> {
    config.validate()?;
    let n = problem.n();
    let t = problem.t;
    if t > n {
        return argument(format!("t = {t} exceeds n = {n}"));
    }
    let final_eval = Evaluator::Auto {
        samples: config.final_samples,
        seed: seeds::derive(config.seed, u64::MAX),
    };
    let zero: Vec<usize> = (0..n).filter(|&j| problem.dists[j].max_value() == 0.0).collect();
    let active: Vec<usize> = (0..n).filter(|&j| problem.dists[j].max_value() > 0.0).collect();
    let t_active = t.saturating_sub(zero.len());

    if t_active == 0 {
        let chosen: Vec<usize> = zero[..t].to_vec();
        let estimate = final_eval.evaluate(&chosen, &problem.sys, &problem.dists)?;
        return Ok(Solution {
            selected: chosen.clone(),
            chosen,
            n_high: 0,
            n_low: 0,
            n_zero: t,
            decomposition: None,
            winning_guess: None,
            b: config.b,
            alpha_bar: config.alpha_bar,
            report: AssertionReport::default(),
            estimate,
            guesses: Vec::new(),
        });
    }

    let active_dists: Vec<DiscreteDistribution> = active.iter().map(|&j| problem.dists[j].clone()).collect();
    let grid = build_scaling_grid(&active_dists, active.len())?;
    let run = |(g, &guess): (usize, &f64)| -> Result<(GuessResult, Option<(Vec<usize>, f64)>)> {
        let seed = seeds::derive(config.seed, g as u64);
        let mut res = solve_guess(problem, &active, t_active, guess, config, seed)?;
        let mut picked = None;
        if let Some((ids, y, out, _)) = &res.rounded {
            let y_of = |j: usize| match ids.binary_search(&j) {
                Ok(p) => y[p],
                Err(_) => 0.0,
            };
            let mean = |j: usize| problem.dists[j].mean();
            let selected: Vec<usize> = out.selected.iter().map(|&j| ids[j]).collect();
            let mut chosen = trim(&selected, t_active, &y_of, &mean);
            chosen.extend(&zero);
            chosen.sort_unstable();
            let est = Evaluator::Auto {
                samples: config.inner_samples,
                seed: seeds::derive(seed, u64::MAX),
            }
            .evaluate(&chosen, &problem.sys, &problem.dists)?;
            res.summary.estimate = Some(est.mean);
            picked = Some((chosen, est.mean));
        }
        Ok((res, picked))
    };
    #[cfg(feature = "parallel")]
    let results: Vec<_> = {
        use rayon::prelude::*;
        grid.guesses.par_iter().enumerate().map(run).collect::<Result<Vec<_>>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = grid.guesses.iter().enumerate().map(run).collect::<Result<Vec<_>>>()?;

    let best = results
        .iter()
        .enumerate()
        .filter_map(|(g, (_, p))| p.as_ref().map(|(_, v)| (g, *v)))
        .fold(None::<(usize, f64)>, |acc, (g, v)| match acc {
            Some((_, bv)) if bv <= v => acc,
            _ => Some((g, v)),
        });
    let guesses: Vec<GuessSummary> = results.iter().map(|(r, _)| r.summary.clone()).collect();
    let Some((g, _)) = best else {
        if guesses.iter().all(|s| s.status == GuessStatus::ResourceLimit) {
            return Err(Error::ResourceLimit("every guess hit the cutting-plane cap".into()));
        }
        return Err(Error::Infeasible(format!(
            "no guess in [{}, {}] produced a feasible relaxation",
            grid.lower, grid.upper
        )));
    };
    let (res, picked) = &results[g];
    let (ids, _, out, dec) = res.rounded.as_ref().expect("winning guess was rounded");
    let chosen = picked.as_ref().expect("winning guess was evaluated").0.clone();
    let mut selected: Vec<usize> = out.selected.iter().map(|&j| ids[j]).collect();
    selected.extend(&zero);
    selected.sort_unstable();
    let estimate = final_eval.evaluate(&chosen, &problem.sys, &problem.dists)?;
    if config.strict && !out.report.all_pass() {
        return Err(Error::Internal(format!("post-rounding checks failed: {:?}", out.report)));
    }
    Ok(Solution {
        chosen,
        selected,
        n_high: out.n_high,
        n_low: out.n_low,
        n_zero: zero.len(),
        decomposition: Some(relabel(dec, ids)),
        winning_guess: Some(grid.guesses[g]),
        b: config.b,
        alpha_bar: config.alpha_bar,
        report: out.report.clone(),
        estimate,
        guesses,
    })
}
