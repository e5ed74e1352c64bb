//! Axis-aligned rectangles in the plane. Resources are the faces of the
//! arrangement; Extend takes the coordinate grid spanned by `D`.

use std::sync::Arc;

use super::{
    normalize_dangerous, resources_from_candidates, ExtendResult, Materialized, SafeExtender,
    SignatureIndex,
};
use crate::error::{validation, Result};

fn check(rects: &[[f64; 4]]) -> Result<()> {
    for (j, r) in rects.iter().enumerate() {
        if r.iter().any(|c| !c.is_finite()) || r[0] >= r[2] || r[1] >= r[3] {
            return validation(format!("rectangle {j} = {r:?} is degenerate or not finite"));
        }
    }
    Ok(())
}

pub(crate) fn signature(rects: &[[f64; 4]], p: [f64; 2]) -> Vec<usize> {
    rects
        .iter()
        .enumerate()
        .filter(|(_, r)| r[0] <= p[0] && p[0] <= r[2] && r[1] <= p[1] && p[1] <= r[3])
        .map(|(j, _)| j)
        .collect()
}

/// Distinct values plus the midpoints between consecutive ones: one sample
/// per elementary interval of the coordinate axis.
fn axis_samples(mut coords: Vec<f64>) -> Vec<f64> {
    coords.sort_by(f64::total_cmp);
    coords.dedup();
    let mut out = Vec::with_capacity(2 * coords.len());
    for (idx, &c) in coords.iter().enumerate() {
        if idx > 0 {
            out.push(0.5 * (coords[idx - 1] + c));
        }
        out.push(c);
    }
    out
}

pub(super) fn materialize(rects: &[[f64; 4]]) -> Result<Materialized> {
    check(rects)?;
    let xs = axis_samples(rects.iter().flat_map(|r| [r[0], r[2]]).collect());
    let ys = axis_samples(rects.iter().flat_map(|r| [r[1], r[3]]).collect());
    let candidates = ys
        .iter()
        .flat_map(|&y| xs.iter().map(move |&x| [x, y]));
    let (sys, points) =
        resources_from_candidates(candidates, rects.len(), |p| signature(rects, p))?;
    let index = SignatureIndex::new(&sys);
    Ok(Materialized {
        sys,
        points: points.clone(),
        task_depths: None,
        extender: Arc::new(RectExtender {
            rects: rects.to_vec(),
            points,
            index,
        }),
    })
}

/// 4-safe Extend for rectangle arrangements.
#[derive(Clone, Debug)]
pub struct RectExtender {
    rects: Vec<[f64; 4]>,
    points: Vec<[f64; 2]>,
    index: SignatureIndex,
}

/// Largest value `<= v` and smallest value `>= v` in the sorted `grid`.
fn bracket(grid: &[f64], v: f64) -> Vec<f64> {
    let hi = grid.partition_point(|&g| g < v);
    let mut out = Vec::with_capacity(2);
    if hi < grid.len() && grid[hi] == v {
        out.push(v);
        return out;
    }
    if hi > 0 {
        out.push(grid[hi - 1]);
    }
    if hi < grid.len() {
        out.push(grid[hi]);
    }
    out
}

impl RectExtender {
    fn resolve_point(&self, p: [f64; 2]) -> Vec<usize> {
        self.index.resolve(&signature(&self.rects, p))
    }
}

impl SafeExtender for RectExtender {
    fn lambda(&self) -> usize {
        4
    }

    fn extend(&self, dangerous: &[usize]) -> Result<ExtendResult> {
        let d = normalize_dangerous(dangerous, self.points.len())?;
        let mut xs: Vec<f64> = d.iter().map(|&i| self.points[i][0]).collect();
        let mut ys: Vec<f64> = d.iter().map(|&i| self.points[i][1]).collect();
        for v in [&mut xs, &mut ys] {
            v.sort_by(f64::total_cmp);
            v.dedup();
        }
        let mut safe = d.clone();
        for &x in &xs {
            for &y in &ys {
                safe.extend(self.resolve_point([x, y]));
            }
        }
        safe.sort_unstable();
        safe.dedup();

        let covers = self
            .points
            .iter()
            .map(|&p| {
                let mut r = Vec::with_capacity(4);
                for &x in &bracket(&xs, p[0]) {
                    for &y in &bracket(&ys, p[1]) {
                        r.extend(self.resolve_point([x, y]));
                    }
                }
                r.sort_unstable();
                r.dedup();
                r
            })
            .collect();
        Ok(ExtendResult {
            safe,
            covers,
            lambda: 4,
        })
    }

    fn name(&self) -> &'static str {
        "rectangles"
    }
}
