//! Intervals on a line. Extend keeps `D` and covers every vertex by its
//! nearest dangerous neighbours on both sides.

use std::sync::Arc;

use super::{normalize_dangerous, ExtendResult, Materialized, SafeExtender, SetSystemInstance};
use crate::error::{validation, Result};

pub(super) fn materialize(points: usize, intervals: &[[usize; 2]]) -> Result<Materialized> {
    let mut lists = vec![Vec::new(); points];
    for (j, &[a, b]) in intervals.iter().enumerate() {
        if a > b || b >= points {
            return validation(format!("interval {j} = [{a}, {b}] not within 0..{points}"));
        }
        for list in &mut lists[a..=b] {
            list.push(j);
        }
    }
    Ok(Materialized {
        sys: SetSystemInstance::new(intervals.len(), lists)?,
        points: Vec::new(),
        // rooted at vertex 0, the least-depth vertex of [a, b] is a
        task_depths: Some(intervals.iter().map(|iv| iv[0]).collect()),
        extender: Arc::new(LineExtender { points }),
    })
}

/// 2-safe Extend for vertices of a line.
#[derive(Clone, Debug)]
pub struct LineExtender {
    pub points: usize,
}

impl SafeExtender for LineExtender {
    fn lambda(&self) -> usize {
        2
    }

    fn extend(&self, dangerous: &[usize]) -> Result<ExtendResult> {
        let d = normalize_dangerous(dangerous, self.points)?;
        let covers = (0..self.points)
            .map(|i| {
                let right = d.partition_point(|&v| v < i);
                let mut r = Vec::with_capacity(2);
                if right > 0 && d.get(right) != Some(&i) {
                    r.push(d[right - 1]);
                }
                if let Some(&v) = d.get(right) {
                    r.push(v);
                }
                r
            })
            .collect();
        Ok(ExtendResult {
            safe: d,
            covers,
            lambda: 2,
        })
    }

    fn name(&self) -> &'static str {
        "line"
    }
}
