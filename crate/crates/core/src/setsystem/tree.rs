//! Paths in a tree. Extend adds the branching vertices of the Steiner subtree
//! spanned by `D`.

use std::collections::VecDeque;
use std::sync::Arc;

use super::{normalize_dangerous, ExtendResult, Materialized, SafeExtender, SetSystemInstance};
use crate::error::{validation, Result};

/// Parent and depth of every vertex in a BFS from `root`, plus the BFS order.
struct Rooted {
    parent: Vec<usize>,
    depth: Vec<usize>,
    order: Vec<usize>,
}

fn bfs(adj: &[Vec<usize>], root: usize) -> Rooted {
    let n = adj.len();
    let mut parent = vec![usize::MAX; n];
    let mut depth = vec![usize::MAX; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::from([root]);
    parent[root] = root;
    depth[root] = 0;
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for &u in &adj[v] {
            if depth[u] == usize::MAX {
                depth[u] = depth[v] + 1;
                parent[u] = v;
                queue.push_back(u);
            }
        }
    }
    Rooted {
        parent,
        depth,
        order,
    }
}

pub(crate) fn adjacency(vertices: usize, edges: &[[usize; 2]]) -> Result<Vec<Vec<usize>>> {
    if vertices == 0 {
        return validation("tree needs at least one vertex");
    }
    if edges.len() + 1 != vertices {
        return validation(format!(
            "a tree on {vertices} vertices has {} edges, got {}",
            vertices - 1,
            edges.len()
        ));
    }
    let mut adj = vec![Vec::new(); vertices];
    for &[a, b] in edges {
        if a >= vertices || b >= vertices || a == b {
            return validation(format!("bad tree edge ({a}, {b})"));
        }
        adj[a].push(b);
        adj[b].push(a);
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    if bfs(&adj, 0).order.len() != vertices {
        return validation("tree is disconnected");
    }
    Ok(adj)
}

pub(super) fn materialize(
    vertices: usize,
    edges: &[[usize; 2]],
    paths: &[[usize; 2]],
) -> Result<Materialized> {
    let adj = adjacency(vertices, edges)?;
    let rooted = bfs(&adj, 0);
    let mut lists = vec![Vec::new(); vertices];
    let mut depths = Vec::with_capacity(paths.len());
    for (j, &[a, b]) in paths.iter().enumerate() {
        if a >= vertices || b >= vertices {
            return validation(format!("path {j} endpoint out of range"));
        }
        let (mut u, mut v) = (a, b);
        while u != v {
            if rooted.depth[u] >= rooted.depth[v] {
                lists[u].push(j);
                u = rooted.parent[u];
            } else {
                lists[v].push(j);
                v = rooted.parent[v];
            }
        }
        lists[u].push(j);
        depths.push(rooted.depth[u]);
    }
    Ok(Materialized {
        sys: SetSystemInstance::new(paths.len(), lists)?,
        points: Vec::new(),
        task_depths: Some(depths),
        extender: Arc::new(TreeExtender { adj }),
    })
}

/// 2-safe Extend for vertices of a tree.
#[derive(Clone, Debug)]
pub struct TreeExtender {
    adj: Vec<Vec<usize>>,
}

impl TreeExtender {
    pub fn new(vertices: usize, edges: &[[usize; 2]]) -> Result<Self> {
        Ok(Self {
            adj: adjacency(vertices, edges)?,
        })
    }

    /// Vertices of the minimal subtree containing `d` (sorted, nonempty).
    pub fn steiner_subtree(&self, d: &[usize]) -> Vec<bool> {
        let rooted = bfs(&self.adj, d[0]);
        let mut count = vec![0usize; self.adj.len()];
        for &v in d {
            count[v] = 1;
        }
        for &v in rooted.order.iter().rev() {
            let p = rooted.parent[v];
            if p != v {
                count[p] += count[v];
            }
        }
        // rooted at a member of D, a vertex lies on a D-D path iff its
        // subtree holds a member of D
        count.iter().map(|&c| c > 0).collect()
    }
}

impl SafeExtender for TreeExtender {
    fn lambda(&self) -> usize {
        2
    }

    fn extend(&self, dangerous: &[usize]) -> Result<ExtendResult> {
        let n = self.adj.len();
        let d = normalize_dangerous(dangerous, n)?;
        let in_sub = self.steiner_subtree(&d);
        let sub_degree = |v: usize| self.adj[v].iter().filter(|&&u| in_sub[u]).count();
        let mut in_safe = vec![false; n];
        for &v in &d {
            in_safe[v] = true;
        }
        for v in 0..n {
            if in_sub[v] && sub_degree(v) >= 3 {
                in_safe[v] = true;
            }
        }
        let safe: Vec<usize> = (0..n).filter(|&v| in_safe[v]).collect();

        // nearest subtree vertex; unique because the subtree is connected
        let mut nearest = vec![usize::MAX; n];
        let mut queue = VecDeque::new();
        for v in 0..n {
            if in_sub[v] {
                nearest[v] = v;
                queue.push_back(v);
            }
        }
        while let Some(v) = queue.pop_front() {
            for &u in &self.adj[v] {
                if nearest[u] == usize::MAX {
                    nearest[u] = nearest[v];
                    queue.push_back(u);
                }
            }
        }

        let walk = |from: usize, first: usize| {
            let (mut prev, mut cur) = (from, first);
            while !in_safe[cur] {
                let next = self.adj[cur]
                    .iter()
                    .copied()
                    .find(|&u| in_sub[u] && u != prev)
                    .expect("non-safe subtree vertices have subtree degree 2");
                prev = cur;
                cur = next;
            }
            cur
        };
        let covers = (0..n)
            .map(|i| {
                let v = nearest[i];
                if in_safe[v] {
                    return vec![v];
                }
                let mut ends: Vec<usize> = self.adj[v]
                    .iter()
                    .filter(|&&u| in_sub[u])
                    .map(|&u| walk(v, u))
                    .collect();
                ends.sort_unstable();
                ends.dedup();
                ends
            })
            .collect();
        Ok(ExtendResult {
            safe,
            covers,
            lambda: 2,
        })
    }

    fn name(&self) -> &'static str {
        "tree"
    }
}
