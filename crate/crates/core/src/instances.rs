//! Instance generators and the on-disk formats.
//!
//! Instance and result files are JSON documents with a `version` field.
//! Floats are written with enough digits to read back bit-exactly.

use std::collections::BinaryHeap;
use std::cmp::Reverse;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{argument, validation, Error, Result};
use crate::rounding::{Problem, Solution, SolverConfig};
use crate::seeds;
use crate::setsystem::{GeometryFamily, SetSystemInstance};
use crate::stochastic::DiscreteDistribution;

/// Current version of both file formats.
pub const FORMAT_VERSION: u32 = 1;

/// Largest depth accepted by [`gen_line_gap`].
pub const MAX_LINE_GAP_DEPTH: u32 = 20;

/// Group-size range of [`gen_general_gap`].
pub const GENERAL_GAP_RANGE: std::ops::RangeInclusive<usize> = 2..=6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    Geometry(GeometryFamily),
    Explicit(SetSystemInstance),
}

/// A selection known to be optimal, with its value when known.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnownOptimum {
    pub chosen: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub version: u32,
    #[serde(default)]
    pub name: String,
    pub payload: Payload,
    pub distributions: Vec<DiscreteDistribution>,
    pub t: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_optimum: Option<KnownOptimum>,
}

fn check_version(v: u32) -> Result<()> {
    if v != FORMAT_VERSION {
        return validation(format!("unsupported format version {v} (expected {FORMAT_VERSION})"));
    }
    Ok(())
}

impl InstanceFile {
    pub fn new(name: impl Into<String>, payload: Payload, distributions: Vec<DiscreteDistribution>, t: usize) -> Self {
        Self {
            version: FORMAT_VERSION,
            name: name.into(),
            payload,
            distributions,
            t,
            known_optimum: None,
        }
    }

    pub fn n_tasks(&self) -> usize {
        match &self.payload {
            Payload::Geometry(g) => g.n_tasks(),
            Payload::Explicit(s) => s.n_tasks(),
        }
    }

    /// Materializes the set system; fails on any inconsistency.
    pub fn to_problem(&self) -> Result<Problem> {
        check_version(self.version)?;
        let problem = match &self.payload {
            Payload::Geometry(g) => Problem::from_family(g, self.distributions.clone(), self.t),
            Payload::Explicit(s) => Problem::explicit(s.clone(), self.distributions.clone(), self.t),
        };
        problem.map_err(|e| match e {
            Error::Argument(msg) => Error::Validation(msg),
            other => other,
        })
    }

    /// Cheap structural checks that do not materialize geometry.
    pub fn validate(&self) -> Result<()> {
        check_version(self.version)?;
        let n = self.n_tasks();
        if self.distributions.len() != n {
            return validation(format!("{} distributions for {n} tasks", self.distributions.len()));
        }
        if self.t > n {
            return validation(format!("t = {} exceeds n = {n}", self.t));
        }
        if let Some(k) = &self.known_optimum {
            if k.chosen.iter().any(|&j| j >= n) {
                return validation("known optimum names an unknown task");
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: Self = serde_json::from_str(text)?;
        file.validate()?;
        Ok(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }
}

/// Output of a solver run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub version: u32,
    pub instance: String,
    pub config: SolverConfig,
    pub solution: Solution,
}

impl ResultFile {
    pub fn new(instance: impl Into<String>, config: SolverConfig, solution: Solution) -> Self {
        Self {
            version: FORMAT_VERSION,
            instance: instance.into(),
            config,
            solution,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: Self = serde_json::from_str(text)?;
        check_version(file.version)?;
        Ok(file)
    }
}

/// Intervals of a complete binary hierarchy over `2^h` points: at depth `d`,
/// `2^d` disjoint intervals of width `2^(h-d)` with size `Ber(2^-d)`. All
/// tasks must be selected.
pub fn gen_line_gap(h: u32) -> Result<InstanceFile> {
    if !(1..=MAX_LINE_GAP_DEPTH).contains(&h) {
        return argument(format!("depth {h} outside 1..={MAX_LINE_GAP_DEPTH}"));
    }
    let points = 1usize << h;
    let mut intervals = Vec::with_capacity(2 * points - 1);
    let mut dists = Vec::with_capacity(2 * points - 1);
    for d in 0..=h {
        let width = points >> d;
        let size = DiscreteDistribution::bernoulli(0.5f64.powi(d as i32))?;
        for idx in 0..(1usize << d) {
            intervals.push([idx * width, (idx + 1) * width - 1]);
            dists.push(size.clone());
        }
    }
    let n = intervals.len();
    let mut file = InstanceFile::new(
        format!("line-gap-h{h}"),
        Payload::Geometry(GeometryFamily::Line { points, intervals }),
        dists,
        n,
    );
    file.known_optimum = Some(KnownOptimum {
        chosen: (0..n).collect(),
        value: None,
    });
    Ok(file)
}

/// `q` groups of `q` tasks, each `Ber(1/q)`, and one resource per choice of
/// one task from every group. Task `g q + a` is member `a` of group `g`;
/// resource `sum_g f(g) q^g` holds the tasks `g q + f(g)`.
pub fn gen_general_gap(q: usize) -> Result<InstanceFile> {
    if !GENERAL_GAP_RANGE.contains(&q) {
        return argument(format!("group size {q} outside {GENERAL_GAP_RANGE:?}"));
    }
    let n = q * q;
    let m = q.pow(q as u32);
    let lists = (0..m)
        .map(|i| {
            let mut rest = i;
            (0..q)
                .map(|g| {
                    let a = rest % q;
                    rest /= q;
                    g * q + a
                })
                .collect()
        })
        .collect();
    let sys = SetSystemInstance::new(n, lists)?;
    let dist = DiscreteDistribution::bernoulli(1.0 / q as f64)?;
    let mut file = InstanceFile::new(format!("general-gap-q{q}"), Payload::Explicit(sys), vec![dist; n], n);
    file.known_optimum = Some(KnownOptimum {
        chosen: (0..n).collect(),
        value: None,
    });
    Ok(file)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Line,
    Tree,
    Rectangles,
    Disks,
}

impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "line" => Ok(Self::Line),
            "tree" => Ok(Self::Tree),
            "rectangles" | "rect" => Ok(Self::Rectangles),
            "disks" | "disk" => Ok(Self::Disks),
            other => argument(format!("unknown family {other:?}")),
        }
    }
}

/// Random size distributions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SizeProfile {
    /// `value * Ber(p)` with `p` uniform in `[p_low, p_high]` and `value`
    /// uniform in `[value_low, value_high]`.
    Bernoulli {
        p_low: f64,
        p_high: f64,
        value_low: f64,
        value_high: f64,
    },
    /// `support` distinct values uniform in `(0, max_value]` with random
    /// probabilities.
    Finite { support: usize, max_value: f64 },
}

impl Default for SizeProfile {
    fn default() -> Self {
        Self::Bernoulli {
            p_low: 0.1,
            p_high: 0.9,
            value_low: 0.5,
            value_high: 2.0,
        }
    }
}

impl FromStr for SizeProfile {
    type Err = Error;

    /// `bernoulli`, `bernoulli:P_LOW:P_HIGH:V_LOW:V_HIGH`, `finite` or
    /// `finite:SUPPORT:MAX`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |x: &str| {
            x.parse::<f64>()
                .map_err(|_| Error::Argument(format!("bad number {x:?} in profile {s:?}")))
        };
        let profile = match parts.as_slice() {
            ["bernoulli"] => Self::default(),
            ["bernoulli", a, b, c, d] => Self::Bernoulli {
                p_low: num(a)?,
                p_high: num(b)?,
                value_low: num(c)?,
                value_high: num(d)?,
            },
            ["finite"] => Self::Finite {
                support: 3,
                max_value: 2.0,
            },
            ["finite", k, v] => Self::Finite {
                support: k
                    .parse()
                    .map_err(|_| Error::Argument(format!("bad support size {k:?}")))?,
                max_value: num(v)?,
            },
            _ => return argument(format!("unknown size profile {s:?}")),
        };
        profile.validate()?;
        Ok(profile)
    }
}

impl SizeProfile {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Bernoulli {
                p_low,
                p_high,
                value_low,
                value_high,
            } => {
                if !(0.0 <= p_low && p_low <= p_high && p_high <= 1.0) {
                    return argument("Bernoulli profile needs 0 <= p_low <= p_high <= 1");
                }
                if !(value_low > 0.0 && value_low <= value_high && value_high.is_finite()) {
                    return argument("Bernoulli profile needs 0 < value_low <= value_high");
                }
            }
            Self::Finite { support, max_value } => {
                if support == 0 || support > 64 {
                    return argument("finite profile needs 1..=64 support points");
                }
                if !(max_value > 0.0 && max_value.is_finite()) {
                    return argument("finite profile needs a positive max value");
                }
            }
        }
        Ok(())
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> Result<DiscreteDistribution> {
        match *self {
            Self::Bernoulli {
                p_low,
                p_high,
                value_low,
                value_high,
            } => {
                let p = uniform(rng, p_low, p_high);
                let v = uniform(rng, value_low, value_high);
                DiscreteDistribution::two_point(v, p)
            }
            Self::Finite { support, max_value } => {
                let weights: Vec<f64> = (0..support).map(|_| rng.random_range(0.05..1.0)).collect();
                let total: f64 = weights.iter().sum();
                let pairs = weights
                    .iter()
                    .map(|w| (max_value * (1.0 - rng.random::<f64>()), w / total))
                    .collect();
                DiscreteDistribution::from_unsorted(pairs)
            }
        }
    }
}

fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Uniform random labelled tree on `v` vertices via a Prüfer sequence.
fn random_tree<R: Rng>(rng: &mut R, v: usize) -> Vec<[usize; 2]> {
    if v < 2 {
        return Vec::new();
    }
    let seq: Vec<usize> = (0..v - 2).map(|_| rng.random_range(0..v)).collect();
    let mut degree = vec![1usize; v];
    for &s in &seq {
        degree[s] += 1;
    }
    let mut leaves: BinaryHeap<Reverse<usize>> = (0..v).filter(|&u| degree[u] == 1).map(Reverse).collect();
    let mut edges = Vec::with_capacity(v - 1);
    for &s in &seq {
        let Reverse(leaf) = leaves.pop().expect("a tree always has a leaf");
        edges.push([leaf, s]);
        degree[s] -= 1;
        if degree[s] == 1 {
            leaves.push(Reverse(s));
        }
    }
    let Reverse(a) = leaves.pop().expect("two leaves remain");
    let Reverse(b) = leaves.pop().expect("two leaves remain");
    edges.push([a, b]);
    edges
}

/// Seeded random instance of a family with `n` tasks.
///
/// Lines use `2n` points and uniform endpoints; trees are uniform labelled
/// trees on `n + 1` vertices with uniform path endpoints; rectangles have
/// uniform corners in the unit square; disks have uniform centers in the unit
/// square and log-uniform radii in `[0.02, 0.2]`.
pub fn gen_random(kind: FamilyKind, n: usize, profile: &SizeProfile, t: usize, seed: u64) -> Result<InstanceFile> {
    profile.validate()?;
    if n == 0 {
        return argument("random instances need n >= 1");
    }
    if t > n {
        return argument(format!("t = {t} exceeds n = {n}"));
    }
    let mut rng = seeds::rng(seed);
    let family = match kind {
        FamilyKind::Line => {
            let points = 2 * n;
            let intervals = (0..n)
                .map(|_| {
                    let a = rng.random_range(0..points);
                    let b = rng.random_range(0..points);
                    [a.min(b), a.max(b)]
                })
                .collect();
            GeometryFamily::Line { points, intervals }
        }
        FamilyKind::Tree => {
            let vertices = n + 1;
            let edges = random_tree(&mut rng, vertices);
            let paths = (0..n)
                .map(|_| [rng.random_range(0..vertices), rng.random_range(0..vertices)])
                .collect();
            GeometryFamily::Tree {
                vertices,
                edges,
                paths,
            }
        }
        FamilyKind::Rectangles => {
            let span = |rng: &mut rand_chacha::ChaCha8Rng| loop {
                let a: f64 = rng.random();
                let b: f64 = rng.random();
                if a != b {
                    return (a.min(b), a.max(b));
                }
            };
            let rects = (0..n)
                .map(|_| {
                    let (x0, x1) = span(&mut rng);
                    let (y0, y1) = span(&mut rng);
                    [x0, y0, x1, y1]
                })
                .collect();
            GeometryFamily::Rectangles { rects }
        }
        FamilyKind::Disks => {
            let (lo, hi) = (0.02f64.ln(), 0.2f64.ln());
            let disks = (0..n)
                .map(|_| {
                    let x: f64 = rng.random();
                    let y: f64 = rng.random();
                    let r = rng.random_range(lo..=hi).exp();
                    [x, y, r]
                })
                .collect();
            GeometryFamily::Disks { disks }
        }
    };
    let distributions = (0..n).map(|_| profile.sample(&mut rng)).collect::<Result<Vec<_>>>()?;
    Ok(InstanceFile::new(
        format!("random-{}-n{n}-t{t}-s{seed}", family.kind()),
        Payload::Geometry(family),
        distributions,
        t,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setsystem::materialize;

    #[test]
    fn line_gap_h1() {
        let f = gen_line_gap(1).unwrap();
        assert_eq!(f.t, 3);
        let Payload::Geometry(GeometryFamily::Line { points, intervals }) = &f.payload else {
            panic!("line payload expected")
        };
        assert_eq!(*points, 2);
        assert_eq!(intervals, &vec![[0, 1], [0, 0], [1, 1]]);
        assert_eq!(f.distributions[0].support(), &[(1.0, 1.0)]);
        assert_eq!(f.distributions[1].support(), &[(0.0, 0.5), (1.0, 0.5)]);
    }

    #[test]
    fn line_gap_structure() {
        let f = gen_line_gap(3).unwrap();
        assert_eq!(f.n_tasks(), 15);
        let Payload::Geometry(GeometryFamily::Line { points, intervals }) = &f.payload else {
            panic!("line payload expected")
        };
        assert_eq!(*points, 8);
        let widths: std::collections::BTreeSet<usize> = intervals.iter().map(|[a, b]| b - a + 1).collect();
        assert_eq!(widths.into_iter().collect::<Vec<_>>(), vec![1, 2, 4, 8]);
        for h in 1..=6 {
            let f = gen_line_gap(h).unwrap();
            let p = f.to_problem().unwrap();
            for i in 0..p.sys.n_resources() {
                assert_eq!(p.sys.tasks_of(i).len(), h as usize + 1);
            }
        }
        assert!(gen_line_gap(0).is_err());
        assert!(gen_line_gap(21).is_err());
    }

    #[test]
    fn general_gap_structure() {
        let f = gen_general_gap(2).unwrap();
        let Payload::Explicit(sys) = &f.payload else {
            panic!("explicit payload expected")
        };
        assert_eq!((sys.n_tasks(), sys.n_resources()), (4, 4));
        for i in 0..4 {
            let groups: Vec<usize> = sys.tasks_of(i).iter().map(|j| j / 2).collect();
            assert_eq!(groups, vec![0, 1]);
        }
        let f = gen_general_gap(3).unwrap();
        let Payload::Explicit(sys) = &f.payload else {
            panic!("explicit payload expected")
        };
        assert_eq!(sys.n_resources(), 27);
        for j in 0..9 {
            assert_eq!(sys.resources_of(j).len(), 9);
        }
        assert!(gen_general_gap(1).is_err());
        assert!(gen_general_gap(7).is_err());
    }

    #[test]
    fn random_is_seeded() {
        for kind in [FamilyKind::Line, FamilyKind::Tree, FamilyKind::Rectangles, FamilyKind::Disks] {
            let a = gen_random(kind, 10, &SizeProfile::default(), 5, 3).unwrap();
            let b = gen_random(kind, 10, &SizeProfile::default(), 5, 3).unwrap();
            assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
            let c = gen_random(kind, 10, &SizeProfile::default(), 5, 4).unwrap();
            assert_ne!(a.to_json().unwrap(), c.to_json().unwrap());
            materialize(match &a.payload {
                Payload::Geometry(g) => g,
                Payload::Explicit(_) => unreachable!(),
            })
            .unwrap();
        }
    }

    #[test]
    fn random_line_within_range() {
        let f = gen_random(FamilyKind::Line, 10, &SizeProfile::default(), 5, 0).unwrap();
        let Payload::Geometry(GeometryFamily::Line { points, intervals }) = &f.payload else {
            panic!("line payload expected")
        };
        assert_eq!(intervals.len(), 10);
        assert!(intervals.iter().all(|[a, b]| a <= b && *b < *points));
    }

    #[test]
    fn random_tree_is_a_tree() {
        let mut rng = seeds::rng(5);
        for v in 2..30 {
            let edges = random_tree(&mut rng, v);
            crate::setsystem::TreeExtender::new(v, &edges).unwrap();
        }
    }

    #[test]
    fn round_trip() {
        let files = [
            gen_line_gap(3).unwrap(),
            gen_general_gap(3).unwrap(),
            gen_random(FamilyKind::Disks, 6, &"finite:4:3.5".parse().unwrap(), 2, 1).unwrap(),
            gen_random(FamilyKind::Rectangles, 6, &SizeProfile::default(), 2, 1).unwrap(),
        ];
        for f in files {
            let text = f.to_json().unwrap();
            let back = InstanceFile::from_json(&text).unwrap();
            assert_eq!(back, f);
            assert_eq!(back.to_json().unwrap(), text);
        }
    }

    #[test]
    fn load_rejects_bad_files() {
        let mut f = gen_line_gap(1).unwrap();
        f.version = 99;
        assert!(matches!(InstanceFile::from_json(&f.to_json().unwrap()), Err(Error::Validation(_))));
        let mut f = gen_line_gap(1).unwrap();
        f.t = 9;
        assert!(InstanceFile::from_json(&f.to_json().unwrap()).is_err());
        assert!(matches!(InstanceFile::from_json("{"), Err(Error::Parse(_))));
        assert!("gauss".parse::<SizeProfile>().is_err());
        assert!("bernoulli:0.5:0.2:1:1".parse::<SizeProfile>().is_err());
    }
}
