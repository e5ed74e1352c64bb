//! Discrete random variables: truncation at one, effective sizes and the
//! scaling grid used to guess the optimum.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{argument, validation, Result};

/// Upper bound on support size accepted by [`DiscreteDistribution::new`].
pub const DEFAULT_SUPPORT_CAP: usize = 1 << 16;

/// Accepted deviation of the probability total from one on input.
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

/// Below this deviation the probabilities are left untouched, so that a
/// distribution which has already been normalized round-trips bit-exactly.
const RENORMALIZE_THRESHOLD: f64 = 1e-12;

/// A finite-support law: `(value, probability)` pairs with strictly increasing
/// nonnegative values and positive probabilities summing to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct DiscreteDistribution {
    support: Vec<(f64, f64)>,
}

impl TryFrom<Vec<(f64, f64)>> for DiscreteDistribution {
    type Error = crate::Error;

    fn try_from(support: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(support)
    }
}

impl From<DiscreteDistribution> for Vec<(f64, f64)> {
    fn from(d: DiscreteDistribution) -> Self {
        d.support
    }
}

impl DiscreteDistribution {
    /// Validates and renormalizes `support`.
    pub fn new(support: Vec<(f64, f64)>) -> Result<Self> {
        Self::with_cap(support, DEFAULT_SUPPORT_CAP)
    }

    pub fn with_cap(mut support: Vec<(f64, f64)>, cap: usize) -> Result<Self> {
        if support.is_empty() {
            return validation("distribution has empty support");
        }
        if support.len() > cap {
            return validation(format!(
                "support size {} exceeds cap {cap}",
                support.len()
            ));
        }
        let mut total = 0.0;
        for (idx, &(v, p)) in support.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return validation(format!("support value {v} is not a finite nonnegative real"));
            }
            if !p.is_finite() || p <= 0.0 || p > 1.0 + PROBABILITY_TOLERANCE {
                return validation(format!("probability {p} outside (0, 1]"));
            }
            if idx > 0 && support[idx - 1].0 >= v {
                return validation("support values must be strictly increasing");
            }
            total += p;
        }
        if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
            return validation(format!("probabilities sum to {total}, expected 1"));
        }
        for entry in &mut support {
            if (total - 1.0).abs() > RENORMALIZE_THRESHOLD {
                entry.1 /= total;
            }
            entry.1 = entry.1.min(1.0);
        }
        Ok(Self { support })
    }

    /// Builds a distribution from pairs in any order: values are sorted,
    /// duplicates merged and zero-probability entries dropped.
    pub fn from_unsorted(mut pairs: Vec<(f64, f64)>) -> Result<Self> {
        if pairs.iter().any(|(v, p)| v.is_nan() || p.is_nan()) {
            return validation("NaN in distribution");
        }
        pairs.retain(|&(_, p)| p != 0.0);
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
        for (v, p) in pairs {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += p,
                _ => merged.push((v, p)),
            }
        }
        Self::new(merged)
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::new(vec![(value, 1.0)])
    }

    /// `value` with probability `p`, zero otherwise.
    pub fn two_point(value: f64, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return argument(format!("probability {p} outside [0, 1]"));
        }
        if p == 0.0 || value == 0.0 {
            Self::constant(0.0)
        } else if p == 1.0 {
            Self::constant(value)
        } else {
            Self::from_unsorted(vec![(0.0, 1.0 - p), (value, p)])
        }
    }

    pub fn bernoulli(p: f64) -> Result<Self> {
        Self::two_point(1.0, p)
    }

    pub fn support(&self) -> &[(f64, f64)] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.support.iter().map(|&(v, p)| v * p).sum()
    }

    pub fn max_value(&self) -> f64 {
        self.support.last().map_or(0.0, |s| s.0)
    }

    pub fn min_value(&self) -> f64 {
        self.support.first().map_or(0.0, |s| s.0)
    }

    /// `beta_k(X)`: the mean for `k = 1`, otherwise `log_k E[k^X]`.
    ///
    /// The expectation is evaluated as a log-sum-exp over the support, so `k`
    /// may be as large as `u64::MAX` without overflow.
    pub fn effective_size(&self, k: u64) -> Result<f64> {
        match k {
            0 => argument("effective size needs k >= 1"),
            1 => Ok(self.mean()),
            _ => Ok(self.effective_size_ln(k as f64)),
        }
    }

    /// [`Self::effective_size`] for a real scale `k >= 2`.
    pub(crate) fn effective_size_ln(&self, k: f64) -> f64 {
        let ln_k = k.ln();
        let max_exp = self.max_value() * ln_k;
        // sum p * exp(v ln k - max)
        let acc: f64 = self
            .support
            .iter()
            .map(|&(v, p)| p * (v * ln_k - max_exp).exp())
            .sum();
        let beta = (max_exp + acc.ln()) / ln_k;
        // rounding can push the value marginally outside [mean, max]
        beta.clamp(0.0, self.max_value())
    }

    /// Divides every support value by `factor`.
    pub fn scale(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return argument(format!("scale factor must be positive, got {factor}"));
        }
        let support = self.support.iter().map(|&(v, p)| (v / factor, p)).collect();
        // division by a positive factor preserves strict ordering unless two
        // values collapse through underflow
        Self::from_unsorted(support)
    }

    /// Splits `X` into `X' = X 1[X <= 1]` and the mean of `X'' = X 1[X > 1]`.
    pub fn split_at_one(&self) -> SplitDistribution {
        let mut truncated = Vec::with_capacity(self.support.len() + 1);
        let mut moved = 0.0;
        let mut exceptional_mean = 0.0;
        for &(v, p) in &self.support {
            if v <= 1.0 {
                truncated.push((v, p));
            } else {
                moved += p;
                exceptional_mean += v * p;
            }
        }
        if moved > 0.0 {
            truncated.push((0.0, moved));
        }
        let truncated = Self::from_unsorted(truncated)
            .expect("truncation of a valid distribution is valid");
        SplitDistribution {
            truncated,
            exceptional_mean,
        }
    }

    /// Inverse-CDF sample.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for &(v, p) in &self.support {
            acc += p;
            if u < acc {
                return v;
            }
        }
        self.max_value()
    }
}

/// Truncated part and exceptional mean of one task size.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitDistribution {
    /// All mass at values `<= 1`; mass above one is moved to zero.
    pub truncated: DiscreteDistribution,
    /// `E[X 1[X > 1]]`.
    pub exceptional_mean: f64,
}

/// Geometric guesses `B = 2^l L` for the optimum, `L` the least positive mean
/// and `U = n * max mean`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingGrid {
    pub lower: f64,
    pub upper: f64,
    pub guesses: Vec<f64>,
}

/// Builds the grid over the tasks with positive mean. Zero-mean tasks are
/// ignored here; they carry no load and are selected before solving.
pub fn build_scaling_grid(tasks: &[DiscreteDistribution], n: usize) -> Result<ScalingGrid> {
    if tasks.is_empty() {
        return argument("scaling grid needs at least one task");
    }
    if n == 0 {
        return argument("scaling grid needs n >= 1");
    }
    let means: Vec<f64> = tasks.iter().map(|d| d.mean()).filter(|&m| m > 0.0).collect();
    if means.is_empty() {
        return argument("every task has zero mean");
    }
    let lower = means.iter().copied().fold(f64::INFINITY, f64::min);
    let upper = n as f64 * means.iter().copied().fold(0.0, f64::max);
    let span = (upper / lower).log2();
    let steps = (span - 1e-12).ceil().max(0.0) as i32 + 2;
    let guesses = (0..=steps).map(|l| lower * 2f64.powi(l)).collect();
    Ok(ScalingGrid {
        lower,
        upper,
        guesses,
    })
}
