//! Task/resource incidence structures and the geometric families that
//! produce them.
//!
//! A [`SetSystemInstance`] stores, for every resource `i`, the sorted list
//! `L_i` of tasks loading it, together with the inverse lists `U_j`. Concrete
//! families are described by a [`GeometryFamily`] payload and turned into an
//! instance by [`materialize`], which also returns the family's
//! [`SafeExtender`].

mod disk;
mod line;
mod rect;
mod tree;

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{argument, validation, Result};

pub use disk::{q_points, DiskExtender, DISK_LAMBDA, LATTICE_PER_AXIS};
pub use line::LineExtender;
pub use rect::RectExtender;
pub use tree::TreeExtender;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSetSystem", into = "RawSetSystem")]
pub struct SetSystemInstance {
    n_tasks: usize,
    resource_tasks: Vec<Vec<usize>>,
    task_resources: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct RawSetSystem {
    n_tasks: usize,
    resources: Vec<Vec<usize>>,
}

impl TryFrom<RawSetSystem> for SetSystemInstance {
    type Error = crate::Error;

    fn try_from(raw: RawSetSystem) -> Result<Self> {
        Self::new(raw.n_tasks, raw.resources)
    }
}

impl From<SetSystemInstance> for RawSetSystem {
    fn from(sys: SetSystemInstance) -> Self {
        RawSetSystem {
            n_tasks: sys.n_tasks,
            resources: sys.resource_tasks,
        }
    }
}

impl SetSystemInstance {
    /// Builds an instance from per-resource task lists (any order). Task ids
    /// must be `< n_tasks` and a list may not repeat a task.
    pub fn new(n_tasks: usize, mut resource_tasks: Vec<Vec<usize>>) -> Result<Self> {
        let mut task_resources = vec![Vec::new(); n_tasks];
        for (i, tasks) in resource_tasks.iter_mut().enumerate() {
            tasks.sort_unstable();
            for w in tasks.windows(2) {
                if w[0] == w[1] {
                    return validation(format!("resource {i} lists task {} twice", w[0]));
                }
            }
            for &j in tasks.iter() {
                if j >= n_tasks {
                    return validation(format!("resource {i} lists task {j} >= n = {n_tasks}"));
                }
                task_resources[j].push(i);
            }
        }
        Ok(Self {
            n_tasks,
            resource_tasks,
            task_resources,
        })
    }

    pub fn n_tasks(&self) -> usize {
        self.n_tasks
    }

    pub fn n_resources(&self) -> usize {
        self.resource_tasks.len()
    }

    /// `L_i`, sorted.
    pub fn tasks_of(&self, resource: usize) -> &[usize] {
        &self.resource_tasks[resource]
    }

    /// `U_j`, sorted.
    pub fn resources_of(&self, task: usize) -> &[usize] {
        &self.task_resources[task]
    }

    pub fn resource_lists(&self) -> &[Vec<usize>] {
        &self.resource_tasks
    }

    /// Total number of (resource, task) incidences.
    pub fn incidence_count(&self) -> usize {
        self.resource_tasks.iter().map(Vec::len).sum()
    }

    /// `L(K)`, sorted.
    pub fn union_tasks(&self, resources: &[usize]) -> Vec<usize> {
        let mut seen = vec![false; self.n_tasks];
        for &i in resources {
            for &j in &self.resource_tasks[i] {
                seen[j] = true;
            }
        }
        (0..self.n_tasks).filter(|&j| seen[j]).collect()
    }

    /// Projection onto the task subset `tasks`. Resources keep their ids; the
    /// kept tasks are renumbered in increasing order of their old id.
    pub fn restrict(&self, tasks: &[usize]) -> Result<Restriction> {
        let all: Vec<usize> = (0..self.n_resources()).collect();
        self.induced(tasks, &all)
    }

    /// Sub-system on the given tasks and resources, both renumbered in
    /// increasing order of old id.
    pub fn induced(&self, tasks: &[usize], resources: &[usize]) -> Result<Restriction> {
        let task_ids = sorted_ids(tasks, self.n_tasks, "task")?;
        let resource_ids = sorted_ids(resources, self.n_resources(), "resource")?;
        let mut new_id = vec![usize::MAX; self.n_tasks];
        for (new, &old) in task_ids.iter().enumerate() {
            new_id[old] = new;
        }
        let lists = resource_ids
            .iter()
            .map(|&i| {
                self.resource_tasks[i]
                    .iter()
                    .filter_map(|&j| (new_id[j] != usize::MAX).then_some(new_id[j]))
                    .collect()
            })
            .collect();
        Ok(Restriction {
            sys: Self::new(task_ids.len(), lists)?,
            task_ids,
            resource_ids,
        })
    }
}

fn sorted_ids(ids: &[usize], bound: usize, what: &str) -> Result<Vec<usize>> {
    let set: BTreeSet<usize> = ids.iter().copied().collect();
    if set.len() != ids.len() {
        return argument(format!("duplicate {what} id in subset"));
    }
    if let Some(&max) = set.iter().next_back() {
        if max >= bound {
            return argument(format!("{what} id {max} out of range (< {bound})"));
        }
    }
    Ok(set.into_iter().collect())
}

/// A sub-system together with the old ids of its tasks and resources.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Restriction {
    pub sys: SetSystemInstance,
    /// `task_ids[new] = old`.
    pub task_ids: Vec<usize>,
    /// `resource_ids[new] = old`.
    pub resource_ids: Vec<usize>,
}

/// Block-diagonal union; every part keeps its own copy of its resources.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DisjointUnion {
    pub sys: SetSystemInstance,
    /// Offset of part `p`'s tasks; the last entry is the total.
    pub task_offsets: Vec<usize>,
    pub resource_offsets: Vec<usize>,
}

impl DisjointUnion {
    /// `(part, local id)` for a combined task id.
    pub fn task_origin(&self, task: usize) -> (usize, usize) {
        origin(&self.task_offsets, task)
    }

    pub fn resource_origin(&self, resource: usize) -> (usize, usize) {
        origin(&self.resource_offsets, resource)
    }
}

fn origin(offsets: &[usize], id: usize) -> (usize, usize) {
    let part = offsets.partition_point(|&o| o <= id) - 1;
    (part, id - offsets[part])
}

pub fn disjoint_union(parts: &[SetSystemInstance]) -> DisjointUnion {
    let mut task_offsets = vec![0];
    let mut resource_offsets = vec![0];
    let mut lists = Vec::new();
    for part in parts {
        let base = *task_offsets.last().unwrap();
        lists.extend(
            part.resource_tasks
                .iter()
                .map(|l| l.iter().map(|&j| j + base).collect::<Vec<_>>()),
        );
        task_offsets.push(base + part.n_tasks);
        resource_offsets.push(resource_offsets.last().unwrap() + part.n_resources());
    }
    let n = *task_offsets.last().unwrap();
    DisjointUnion {
        sys: SetSystemInstance::new(n, lists).expect("union of valid parts is valid"),
        task_offsets,
        resource_offsets,
    }
}

/// Output of an Extend construction for a dangerous set `D`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtendResult {
    /// `M`, sorted, containing `D`.
    pub safe: Vec<usize>,
    /// `R_i` for every resource `i` of the system, each a subset of `M`.
    pub covers: Vec<Vec<usize>>,
    pub lambda: usize,
}

/// A `lambda`-safe Extend construction: for every `D`, a small `M` with
/// `L_i ∩ L(D) ⊆ L(R_i)` for some `R_i ⊆ M`, `|R_i| <= lambda`.
///
/// Extenders act on resource ids only, so an extender built for a system is
/// valid unchanged for every task restriction of it.
pub trait SafeExtender: Send + Sync {
    fn lambda(&self) -> usize;

    fn extend(&self, dangerous: &[usize]) -> Result<ExtendResult>;

    fn name(&self) -> &'static str;
}

/// Checks that `D` is nonempty and in range; returns it sorted.
pub(crate) fn normalize_dangerous(d: &[usize], m: usize) -> Result<Vec<usize>> {
    if d.is_empty() {
        return argument("Extend needs a nonempty dangerous set");
    }
    let set: BTreeSet<usize> = d.iter().copied().collect();
    if let Some(&max) = set.iter().next_back() {
        if max >= m {
            return argument(format!("resource {max} out of range (< {m})"));
        }
    }
    Ok(set.into_iter().collect())
}

/// Extend for arbitrary explicit systems: `M` is every resource and
/// `R_i = {i}`. Valid with `lambda = 1` but `M` is not small in `|D|`.
#[derive(Clone, Debug)]
pub struct TrivialExtender {
    pub n_resources: usize,
}

impl SafeExtender for TrivialExtender {
    fn lambda(&self) -> usize {
        1
    }

    fn extend(&self, dangerous: &[usize]) -> Result<ExtendResult> {
        normalize_dangerous(dangerous, self.n_resources)?;
        Ok(ExtendResult {
            safe: (0..self.n_resources).collect(),
            covers: (0..self.n_resources).map(|i| vec![i]).collect(),
            lambda: 1,
        })
    }

    fn name(&self) -> &'static str {
        "explicit"
    }
}

/// Geometric payload of one of the supported families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeometryFamily {
    /// Vertices `0..points` of a path; task `j` is the closed interval
    /// `intervals[j] = [a, b]`.
    Line {
        points: usize,
        intervals: Vec<[usize; 2]>,
    },
    /// Tree on vertices `0..vertices`; task `j` is the vertex set of the path
    /// between the endpoints `paths[j]`.
    Tree {
        vertices: usize,
        edges: Vec<[usize; 2]>,
        paths: Vec<[usize; 2]>,
    },
    /// Closed axis-aligned rectangles `[x1, y1, x2, y2]`.
    Rectangles { rects: Vec<[f64; 4]> },
    /// Closed disks `[cx, cy, r]`.
    Disks { disks: Vec<[f64; 3]> },
}

impl GeometryFamily {
    pub fn n_tasks(&self) -> usize {
        match self {
            Self::Line { intervals, .. } => intervals.len(),
            Self::Tree { paths, .. } => paths.len(),
            Self::Rectangles { rects } => rects.len(),
            Self::Disks { disks } => disks.len(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Line { .. } => "line",
            Self::Tree { .. } => "tree",
            Self::Rectangles { .. } => "rectangles",
            Self::Disks { .. } => "disks",
        }
    }

    /// The path tree of a line family, or the tree itself.
    pub fn as_tree(&self) -> Option<(usize, Vec<[usize; 2]>, Vec<[usize; 2]>)> {
        match self {
            Self::Line { points, intervals } => Some((
                *points,
                (1..*points).map(|v| [v - 1, v]).collect(),
                intervals.clone(),
            )),
            Self::Tree {
                vertices,
                edges,
                paths,
            } => Some((*vertices, edges.clone(), paths.clone())),
            _ => None,
        }
    }
}

/// A materialized family: the set system, one representative point per
/// resource for the planar families, and the family's Extend.
#[derive(Clone)]
pub struct Materialized {
    pub sys: SetSystemInstance,
    /// Representative points (planar families only; empty otherwise).
    pub points: Vec<[f64; 2]>,
    /// For line and tree families, the depth of the least-depth vertex of each
    /// task's path when the tree is rooted at vertex 0.
    pub task_depths: Option<Vec<usize>>,
    pub extender: Arc<dyn SafeExtender>,
}

impl std::fmt::Debug for Materialized {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Materialized")
            .field("sys", &self.sys)
            .field("points", &self.points.len())
            .field("extender", &self.extender.name())
            .finish()
    }
}

/// Builds the set system of a family.
///
/// Line and tree resources are the vertices. Planar resources are the
/// distinct nonempty containment signatures among a finite candidate point
/// set, one representative point each.
pub fn materialize(family: &GeometryFamily) -> Result<Materialized> {
    match family {
        GeometryFamily::Line { points, intervals } => line::materialize(*points, intervals),
        GeometryFamily::Tree {
            vertices,
            edges,
            paths,
        } => tree::materialize(*vertices, edges, paths),
        GeometryFamily::Rectangles { rects } => rect::materialize(rects),
        GeometryFamily::Disks { disks } => disk::materialize(disks),
    }
}

/// Maps containment signatures of arbitrary plane points back to resource ids.
#[derive(Clone, Debug)]
pub(crate) struct SignatureIndex {
    map: HashMap<Vec<usize>, usize>,
    sys: SetSystemInstance,
}

impl SignatureIndex {
    pub(crate) fn new(sys: &SetSystemInstance) -> Self {
        let map = sys
            .resource_tasks
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect();
        Self {
            map,
            sys: sys.clone(),
        }
    }

    /// Resources whose task lists jointly cover `signature`: the resource with
    /// exactly this signature when materialization found it, nothing for the
    /// empty signature, and a greedy cover otherwise.
    pub(crate) fn resolve(&self, signature: &[usize]) -> Vec<usize> {
        if signature.is_empty() {
            return Vec::new();
        }
        if let Some(&i) = self.map.get(signature) {
            return vec![i];
        }
        log::warn!("signature {signature:?} missing from the materialized arrangement");
        let mut uncovered: BTreeSet<usize> = signature.iter().copied().collect();
        let mut chosen = Vec::new();
        while !uncovered.is_empty() {
            let best = (0..self.sys.n_resources())
                .max_by_key(|&i| {
                    let gain = self.sys.tasks_of(i).iter().filter(|j| uncovered.contains(j)).count();
                    (gain, std::cmp::Reverse(i))
                })
                .expect("signature tasks exist, so resources exist");
            for j in self.sys.tasks_of(best) {
                uncovered.remove(j);
            }
            chosen.push(best);
        }
        chosen.sort_unstable();
        chosen
    }
}

/// Collects candidate points into resources by distinct nonempty signature,
/// in candidate order.
pub(crate) fn resources_from_candidates(
    candidates: impl IntoIterator<Item = [f64; 2]>,
    n_tasks: usize,
    signature: impl Fn([f64; 2]) -> Vec<usize>,
) -> Result<(SetSystemInstance, Vec<[f64; 2]>)> {
    let mut seen = HashMap::new();
    let mut lists = Vec::new();
    let mut points = Vec::new();
    for p in candidates {
        let sig = signature(p);
        if sig.is_empty() || seen.contains_key(&sig) {
            continue;
        }
        seen.insert(sig.clone(), lists.len());
        lists.push(sig);
        points.push(p);
    }
    Ok((SetSystemInstance::new(n_tasks, lists)?, points))
}
