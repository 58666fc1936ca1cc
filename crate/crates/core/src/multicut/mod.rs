//! Minimum cost multicut on weighted graphs.
//!
//! An edge labeling `y` with `y_e = 1` meaning *cut* is feasible when it
//! satisfies every cycle inequality, which is the case exactly when it is
//! induced by a node partition. The solvers here therefore work on
//! [`Partition`]s directly and the objective is the summed cost of cut edges.
//! Negative costs favour cutting, positive costs favour joining.
//!
//! * [`brute_force`]: exhaustive enumeration of set partitions (small n only).
//! * [`gaec`]: greedy additive edge contraction.
//! * [`kl_refine`]: single-node moves and component merges.

mod exhaustive;
mod gaec;
pub mod io;
mod local;

pub use exhaustive::{brute_force, BRUTE_FORCE_LIMIT};
pub use gaec::gaec;
pub use local::kl_refine;

use crate::error::{Error, Result};

/// Undirected edge with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub cost: f64,
}

/// Weighted undirected graph. Absent edges behave as cost 0.
#[derive(Debug, Clone, PartialEq)]
pub struct CostGraph {
    n: usize,
    edges: Vec<Edge>,
    offsets: Vec<usize>,
    adjacency: Vec<(usize, f64)>,
}

impl CostGraph {
    /// Builds a graph from `(u, v, cost)` triples. Edges are canonicalized to
    /// `u < v` and sorted; duplicates, self-loops and non-finite costs are
    /// rejected.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut list = Vec::new();
        for (a, b, cost) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidParameter(format!(
                    "edge ({a}, {b}) out of range for {n} nodes"
                )));
            }
            if a == b {
                return Err(Error::InvalidParameter(format!("self-loop on node {a}")));
            }
            if !cost.is_finite() {
                return Err(Error::NonFinite("edge cost"));
            }
            let (u, v) = if a < b { (a, b) } else { (b, a) };
            list.push(Edge { u, v, cost });
        }
        list.sort_by_key(|e| (e.u, e.v));
        if let Some(w) = list.windows(2).find(|w| (w[0].u, w[0].v) == (w[1].u, w[1].v)) {
            return Err(Error::InvalidParameter(format!(
                "duplicate edge ({}, {})",
                w[0].u, w[0].v
            )));
        }
        Ok(Self::assemble(n, list))
    }

    /// Complete graph with `cost(u, v)` evaluated for every `u < v`.
    pub fn complete(n: usize, mut cost: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut list = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for u in 0..n {
            for v in u + 1..n {
                let c = cost(u, v);
                if !c.is_finite() {
                    return Err(Error::NonFinite("edge cost"));
                }
                list.push(Edge { u, v, cost: c });
            }
        }
        Ok(Self::assemble(n, list))
    }

    fn assemble(n: usize, edges: Vec<Edge>) -> Self {
        let mut degree = vec![0usize; n + 1];
        for e in &edges {
            degree[e.u + 1] += 1;
            degree[e.v + 1] += 1;
        }
        for i in 0..n {
            degree[i + 1] += degree[i];
        }
        let offsets = degree;
        let mut fill = offsets.clone();
        let mut adjacency = vec![(0usize, 0.0f64); 2 * edges.len()];
        for e in &edges {
            adjacency[fill[e.u]] = (e.v, e.cost);
            fill[e.u] += 1;
            adjacency[fill[e.v]] = (e.u, e.cost);
            fill[e.v] += 1;
        }
        for v in 0..n {
            adjacency[offsets[v]..offsets[v + 1]].sort_by_key(|&(u, _)| u);
        }
        CostGraph {
            n,
            edges,
            offsets,
            adjacency,
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Neighbors of `v` with edge costs, sorted by neighbor index.
    pub fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.adjacency[self.offsets[v]..self.offsets[v + 1]]
    }

    /// Cost of edge `{u, v}`, or `None` when absent.
    pub fn cost(&self, u: usize, v: usize) -> Option<f64> {
        let nb = self.neighbors(u);
        nb.binary_search_by_key(&v, |&(x, _)| x).ok().map(|i| nb[i].1)
    }

    pub fn total_cost(&self) -> f64 {
        self.edges.iter().map(|e| e.cost).sum()
    }

    /// Returns a copy with `delta` added to every edge cost.
    pub fn shifted(&self, delta: f64) -> Result<Self> {
        CostGraph::from_edges(self.n, self.edges.iter().map(|e| (e.u, e.v, e.cost + delta)))
    }

    /// Row-major `n x n` cost matrix with zeros for absent edges.
    pub fn dense(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n * self.n];
        for e in &self.edges {
            m[e.u * self.n + e.v] = e.cost;
            m[e.v * self.n + e.u] = e.cost;
        }
        m
    }
}

/// Node-to-component labeling.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    labels: Vec<usize>,
}

impl Partition {
    pub fn new(labels: Vec<usize>) -> Self {
        Partition { labels }
    }

    pub fn singletons(n: usize) -> Self {
        Partition::new((0..n).collect())
    }

    pub fn single_component(n: usize) -> Self {
        Partition::new(vec![0; n])
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<usize> {
        self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn is_cut(&self, u: usize, v: usize) -> bool {
        self.labels[u] != self.labels[v]
    }

    pub fn component_count(&self) -> usize {
        let mut seen: Vec<usize> = self.labels.clone();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    /// Relabels components to `0..k` in order of first appearance.
    pub fn normalized(&self) -> Partition {
        let mut map = std::collections::HashMap::new();
        let labels = self
            .labels
            .iter()
            .map(|&l| {
                let next = map.len();
                *map.entry(l).or_insert(next)
            })
            .collect();
        Partition { labels }
    }

    /// Cut indicator per edge of `g`, aligned with [`CostGraph::edges`].
    pub fn edge_labeling(&self, g: &CostGraph) -> EdgeLabeling {
        EdgeLabeling(g.edges().iter().map(|e| self.is_cut(e.u, e.v)).collect())
    }
}

/// `y_e` per edge, `true` meaning cut, aligned with [`CostGraph::edges`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeLabeling(pub Vec<bool>);

fn check_cover(g: &CostGraph, p: &Partition) -> Result<()> {
    if p.len() != g.node_count() {
        return Err(Error::Shape {
            expected: g.node_count(),
            actual: p.len(),
        });
    }
    Ok(())
}

/// Sum of the costs of edges whose endpoints lie in different components.
pub fn objective(g: &CostGraph, p: &Partition) -> Result<f64> {
    check_cover(g, p)?;
    Ok(g.edges()
        .iter()
        .filter(|e| p.is_cut(e.u, e.v))
        .map(|e| e.cost)
        .sum())
}

/// Checks `y_e <= sum of the other two` on every triangle of `g`, then any
/// longer cycle through a cut edge.
///
/// On complete graphs the triangles are exactly the chordless cycles and the
/// second pass never fires. On sparse graphs it catches a cut edge whose
/// endpoints are still joined by a path of uncut edges.
pub fn validate_cycles(g: &CostGraph, y: &EdgeLabeling) -> bool {
    if y.0.len() != g.edge_count() {
        return false;
    }
    triangles_hold(g, y) && cut_edges_separate(g, y)
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn cut_edges_separate(g: &CostGraph, y: &EdgeLabeling) -> bool {
    let mut parent: Vec<usize> = (0..g.node_count()).collect();
    for (e, &cut) in g.edges().iter().zip(&y.0) {
        if !cut {
            let (a, b) = (find(&mut parent, e.u), find(&mut parent, e.v));
            parent[a] = b;
        }
    }
    g.edges()
        .iter()
        .zip(&y.0)
        .all(|(e, &cut)| !cut || find(&mut parent, e.u) != find(&mut parent, e.v))
}

fn triangles_hold(g: &CostGraph, y: &EdgeLabeling) -> bool {
    let edge_index = |u: usize, v: usize| -> Option<usize> {
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        g.edges().binary_search_by_key(&(a, b), |e| (e.u, e.v)).ok()
    };
    for (i, e) in g.edges().iter().enumerate() {
        let (nu, nv) = (g.neighbors(e.u), g.neighbors(e.v));
        // Sorted-list intersection, third vertex above e.v so each triangle is visited once.
        let (mut a, mut b) = (0, 0);
        while a < nu.len() && b < nv.len() {
            let (x, y_) = (nu[a].0, nv[b].0);
            if x < y_ {
                a += 1;
            } else if y_ < x {
                b += 1;
            } else {
                if x > e.v {
                    let j = edge_index(e.u, x).unwrap();
                    let k = edge_index(e.v, x).unwrap();
                    let (yi, yj, yk) = (y.0[i] as u8, y.0[j] as u8, y.0[k] as u8);
                    if yi > yj + yk || yj > yi + yk || yk > yi + yj {
                        return false;
                    }
                }
                a += 1;
                b += 1;
            }
        }
    }
    true
}

/// [`validate_cycles`] on the labeling induced by `p`.
pub fn validate_partition(g: &CostGraph, p: &Partition) -> bool {
    p.len() == g.node_count() && validate_cycles(g, &p.edge_labeling(g))
}
