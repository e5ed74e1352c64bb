//! Disks in the plane (a fat family). Extend lays square grids around every
//! dangerous point at every pairwise-distance scale and adds the point sets
//! `Q(B)` of their cells.
//!
//! `Q(B)` for a square `B` of side `r` is the 13 x 13 lattice of spacing
//! `r / 4` over the concentric square of side `3r`. Every disk of diameter at
//! least `r` meeting `B` contains a ball of radius `r / 2` within distance
//! `r / 2` of `B`, and every such ball contains a lattice point since the
//! lattice covering radius is `r * sqrt(2) / 8 < r / 2`.
//!
//! A grid `G(p, theta)` has side `10 theta` and cells of side `theta / 10`, so
//! the `Q(B)` of all its cells lie on one lattice of
//! [`LATTICE_PER_AXIS`]`^2` points. Lattice signatures are computed one row at
//! a time from the disks' chords.

use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use super::{
    normalize_dangerous, resources_from_candidates, ExtendResult, Materialized, SafeExtender,
    SignatureIndex,
};
use crate::error::{validation, Error, Result};

/// Cells per grid axis.
const CELLS: usize = 100;
/// Lattice points of `Q(B)` per axis.
const Q_SIDE: usize = 13;
/// Lattice points per axis of one grid: cells of side `r`, spacing `r / 4`,
/// one extra cell of margin on every side.
pub const LATTICE_PER_AXIS: usize = 4 * (CELLS + 2) + 1;
/// Bound on `|R_p|`: the type-1 points of one whole grid plus one `Q(B)`.
pub const DISK_LAMBDA: usize = LATTICE_PER_AXIS * LATTICE_PER_AXIS + Q_SIDE * Q_SIDE;
/// Cap on the number of grids one Extend call may build.
const MAX_GRIDS: usize = 20_000;

/// `Q(B)` for the axis-aligned square with lower-left corner `corner` and
/// side `r`.
pub fn q_points(corner: [f64; 2], r: f64) -> Vec<[f64; 2]> {
    let step = r / 4.0;
    (0..Q_SIDE)
        .flat_map(|j| {
            (0..Q_SIDE).map(move |i| {
                [
                    corner[0] - r + i as f64 * step,
                    corner[1] - r + j as f64 * step,
                ]
            })
        })
        .collect()
}

fn check(disks: &[[f64; 3]]) -> Result<()> {
    for (j, d) in disks.iter().enumerate() {
        if d.iter().any(|c| !c.is_finite()) || d[2] <= 0.0 {
            return validation(format!("disk {j} = {d:?} needs finite center and radius > 0"));
        }
    }
    Ok(())
}

fn contains(d: &[f64; 3], p: [f64; 2]) -> bool {
    let (dx, dy) = (p[0] - d[0], p[1] - d[1]);
    dx * dx + dy * dy <= d[2] * d[2]
}

pub(crate) fn signature(disks: &[[f64; 3]], p: [f64; 2]) -> Vec<usize> {
    disks
        .iter()
        .enumerate()
        .filter(|(_, d)| contains(d, p))
        .map(|(j, _)| j)
        .collect()
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn circle_intersections(a: &[f64; 3], b: &[f64; 3]) -> Vec<[f64; 2]> {
    let d = dist([a[0], a[1]], [b[0], b[1]]);
    if d == 0.0 || d > a[2] + b[2] || d < (a[2] - b[2]).abs() {
        return Vec::new();
    }
    let along = (a[2] * a[2] - b[2] * b[2] + d * d) / (2.0 * d);
    let h = (a[2] * a[2] - along * along).max(0.0).sqrt();
    let (ux, uy) = ((b[0] - a[0]) / d, (b[1] - a[1]) / d);
    let base = [a[0] + along * ux, a[1] + along * uy];
    if h == 0.0 {
        vec![base]
    } else {
        vec![
            [base[0] - h * uy, base[1] + h * ux],
            [base[0] + h * uy, base[1] - h * ux],
        ]
    }
}

/// Candidate points: centers, points just inside each circle on the four
/// axis directions, and every pairwise intersection point offset by `eps` in
/// the four axis directions and the four sector bisectors.
fn candidates(disks: &[[f64; 3]]) -> Vec<[f64; 2]> {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for d in disks {
        for a in 0..2 {
            lo[a] = lo[a].min(d[a] - d[2]);
            hi[a] = hi[a].max(d[a] + d[2]);
        }
    }
    let eps = 1e-6 * dist(lo, hi);
    let mut out: Vec<[f64; 2]> = disks.iter().map(|d| [d[0], d[1]]).collect();
    for d in disks {
        let inner = d[2] - eps.min(0.5 * d[2]);
        out.extend([
            [d[0] + inner, d[1]],
            [d[0] - inner, d[1]],
            [d[0], d[1] + inner],
            [d[0], d[1] - inner],
        ]);
    }
    for (ia, a) in disks.iter().enumerate() {
        for b in &disks[ia + 1..] {
            for p in circle_intersections(a, b) {
                let na = [(p[0] - a[0]) / a[2], (p[1] - a[1]) / a[2]];
                let nb = [(p[0] - b[0]) / b[2], (p[1] - b[1]) / b[2]];
                let mut dirs = vec![[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]];
                for (sa, sb) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                    let v = [sa * na[0] + sb * nb[0], sa * na[1] + sb * nb[1]];
                    let norm = v[0].hypot(v[1]);
                    if norm > 1e-12 {
                        dirs.push([v[0] / norm, v[1] / norm]);
                    }
                }
                out.extend(dirs.iter().map(|v| [p[0] + eps * v[0], p[1] + eps * v[1]]));
            }
        }
    }
    out
}

pub(super) fn materialize(disks: &[[f64; 3]]) -> Result<Materialized> {
    check(disks)?;
    let (sys, points) =
        resources_from_candidates(candidates(disks), disks.len(), |p| signature(disks, p))?;
    let index = SignatureIndex::new(&sys);
    let min_radius = disks.iter().map(|d| d[2]).fold(f64::INFINITY, f64::min);
    Ok(Materialized {
        sys,
        points: points.clone(),
        task_depths: None,
        extender: Arc::new(DiskExtender {
            disks: disks.to_vec(),
            points,
            index,
            min_radius,
            resolved: Mutex::new(HashMap::new()),
        }),
    })
}

/// `O(1)`-safe Extend for disk arrangements.
#[derive(Debug)]
pub struct DiskExtender {
    disks: Vec<[f64; 3]>,
    points: Vec<[f64; 2]>,
    index: SignatureIndex,
    min_radius: f64,
    resolved: Mutex<HashMap<Vec<usize>, Vec<usize>>>,
}

/// One grid `G(center, theta)` with the resources of its lattice points,
/// stored per lattice row as runs of constant signature.
struct Grid {
    lower: [f64; 2],
    cell: f64,
    /// Per row: `(first column, resources)` runs covering all columns.
    rows: Vec<Vec<(usize, Vec<usize>)>>,
}

impl Grid {
    fn lattice_origin(&self) -> [f64; 2] {
        [self.lower[0] - self.cell, self.lower[1] - self.cell]
    }

    /// Cell indices of the cell containing `p` (clamped to the grid).
    fn cell_of(&self, p: [f64; 2]) -> [usize; 2] {
        let idx = |a: usize| {
            let u = ((p[a] - self.lower[a]) / self.cell).floor();
            u.clamp(0.0, (CELLS - 1) as f64) as usize
        };
        [idx(0), idx(1)]
    }

    /// Resources of `Q(B)` for cell `c`.
    fn q_resources(&self, c: [usize; 2], out: &mut BTreeSet<usize>) {
        let (c0, c1) = (4 * c[0], 4 * c[0] + Q_SIDE - 1);
        for row in &self.rows[4 * c[1]..4 * c[1] + Q_SIDE] {
            let first = row.partition_point(|run| run.0 <= c0) - 1;
            for run in &row[first..] {
                if run.0 > c1 {
                    break;
                }
                out.extend(run.1.iter().copied());
            }
        }
    }

    fn all_resources(&self, out: &mut BTreeSet<usize>) {
        for row in &self.rows {
            for run in row {
                out.extend(run.1.iter().copied());
            }
        }
    }
}

impl DiskExtender {
    fn resolve(&self, sig: &[usize]) -> Vec<usize> {
        let mut cache = self.resolved.lock().expect("cache lock");
        cache
            .entry(sig.to_vec())
            .or_insert_with(|| self.index.resolve(sig))
            .clone()
    }

    fn build_grid(&self, center: [f64; 2], theta: f64) -> Grid {
        let lower = [center[0] - 5.0 * theta, center[1] - 5.0 * theta];
        let mut grid = Grid {
            lower,
            cell: theta / 10.0,
            rows: Vec::with_capacity(LATTICE_PER_AXIS),
        };
        let origin = grid.lattice_origin();
        let step = grid.cell / 4.0;
        let last = LATTICE_PER_AXIS - 1;
        for row in 0..LATTICE_PER_AXIS {
            let y = origin[1] + row as f64 * step;
            let x_at = |i: usize| origin[0] + i as f64 * step;
            let mut events: Vec<(usize, bool, usize)> = Vec::new();
            for (k, d) in self.disks.iter().enumerate() {
                let dy = y - d[1];
                if dy.abs() > d[2] {
                    continue;
                }
                let h = (d[2] * d[2] - dy * dy).max(0.0).sqrt();
                let col = |x: f64| ((x - origin[0]) / step).clamp(0.0, last as f64) as usize;
                let (mut lo, mut hi) = (col(d[0] - h), col(d[0] + h));
                let inside = |i: usize| contains(d, [x_at(i), y]);
                // align the float chord with the exact membership test
                while lo > 0 && inside(lo - 1) {
                    lo -= 1;
                }
                while lo <= hi && !inside(lo) {
                    lo += 1;
                }
                while hi < last && inside(hi + 1) {
                    hi += 1;
                }
                while hi >= lo && hi > 0 && !inside(hi) {
                    hi -= 1;
                }
                if lo > hi || !inside(lo) {
                    continue;
                }
                events.push((lo, true, k));
                events.push((hi + 1, false, k));
            }
            events.sort_unstable_by_key(|e| (e.0, e.1));
            let mut active: Vec<usize> = Vec::new();
            let mut runs: Vec<(usize, Vec<usize>)> = vec![(0, Vec::new())];
            let mut idx = 0;
            while idx < events.len() {
                let col = events[idx].0;
                while idx < events.len() && events[idx].0 == col {
                    let (_, open, k) = events[idx];
                    let pos = active.partition_point(|&a| a < k);
                    if open {
                        active.insert(pos, k);
                    } else {
                        active.remove(pos);
                    }
                    idx += 1;
                }
                if col > last {
                    break;
                }
                let res = self.resolve(&active);
                match runs.last_mut() {
                    Some(run) if run.0 == col => run.1 = res,
                    _ => runs.push((col, res)),
                }
            }
            grid.rows.push(runs);
        }
        grid
    }
}

fn pairwise_distances(pts: &[[f64; 2]]) -> Vec<f64> {
    let mut h: Vec<f64> = pts
        .iter()
        .enumerate()
        .flat_map(|(a, &p)| pts[a + 1..].iter().map(move |&q| dist(p, q)))
        .filter(|&x| x > 0.0)
        .collect();
    h.sort_by(f64::total_cmp);
    h.dedup();
    h
}

impl SafeExtender for DiskExtender {
    fn lambda(&self) -> usize {
        DISK_LAMBDA
    }

    fn extend(&self, dangerous: &[usize]) -> Result<ExtendResult> {
        let d = normalize_dangerous(dangerous, self.points.len())?;
        let pts: Vec<[f64; 2]> = d.iter().map(|&i| self.points[i]).collect();
        let scales = pairwise_distances(&pts);
        let grid_scales = if scales.is_empty() {
            vec![self.min_radius]
        } else {
            scales.clone()
        };
        if pts.len() * grid_scales.len() > MAX_GRIDS {
            return Err(Error::ResourceLimit(format!(
                "disk Extend would build {} grids (cap {MAX_GRIDS})",
                pts.len() * grid_scales.len()
            )));
        }
        // grids[point index][scale index]
        let grids: Vec<Vec<Grid>> = pts
            .iter()
            .map(|&p| grid_scales.iter().map(|&t| self.build_grid(p, t)).collect())
            .collect();
        let mut safe: BTreeSet<usize> = d.iter().copied().collect();
        for g in grids.iter().flatten() {
            g.all_resources(&mut safe);
        }
        let scale_idx = |t: f64| {
            scales
                .binary_search_by(|s| s.total_cmp(&t))
                .expect("pairwise distance is a grid scale")
        };
        let nearest = |p: [f64; 2], among: &mut dyn Iterator<Item = usize>| {
            among
                .map(|a| (dist(p, pts[a]), a))
                .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)))
        };

        let covers = self
            .points
            .iter()
            .map(|&p| {
                let mut r = BTreeSet::new();
                let (dq, q) = nearest(p, &mut (0..pts.len())).expect("D is nonempty");
                if let Some(t) = scales.iter().copied().find(|&t| dq / 5.0 <= t && t <= 5.0 * dq) {
                    let g = &grids[q][scale_idx(t)];
                    g.q_resources(g.cell_of(p), &mut r);
                } else {
                    let close: Vec<usize> = (0..pts.len())
                        .filter(|&a| dist(pts[q], pts[a]) <= dq / 5.0)
                        .collect();
                    if close.len() == 1 {
                        r.insert(d[q]);
                    } else {
                        let sub: Vec<[f64; 2]> = close.iter().map(|&a| pts[a]).collect();
                        let delta = *pairwise_distances(&sub).last().expect("two distinct points");
                        let g = &grids[q][scale_idx(delta)];
                        let cells: BTreeSet<[usize; 2]> =
                            close.iter().map(|&a| g.cell_of(pts[a])).collect();
                        for c in cells {
                            g.q_resources(c, &mut r);
                        }
                    }
                    let mut far = (0..pts.len()).filter(|a| !close.contains(a));
                    if let Some((_, q2)) = nearest(p, &mut far) {
                        let g = &grids[q2][scale_idx(dist(pts[q], pts[q2]))];
                        g.q_resources(g.cell_of(p), &mut r);
                    }
                }
                r.into_iter().collect()
            })
            .collect();
        Ok(ExtendResult {
            safe: safe.into_iter().collect(),
            covers,
            lambda: DISK_LAMBDA,
        })
    }

    fn name(&self) -> &'static str {
        "disks"
    }
}
