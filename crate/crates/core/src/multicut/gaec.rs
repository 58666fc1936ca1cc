use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};

use super::{CostGraph, Partition};

/// Candidate contraction. Max-heap order: larger aggregate first, then the
/// lexicographically smallest cluster pair.
#[derive(Debug, PartialEq)]
struct Candidate {
    weight: f64,
    pair: Reverse<(usize, usize)>,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.weight
            .total_cmp(&other.weight)
            .then_with(|| self.pair.cmp(&other.pair))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn candidate(weight: f64, a: usize, b: usize) -> Candidate {
    Candidate {
        weight,
        pair: Reverse((a.min(b), a.max(b))),
    }
}

/// Greedy additive edge contraction.
///
/// Starting from singletons, repeatedly contracts the pair of clusters whose
/// summed connecting cost is largest, as long as that sum is positive. Stale
/// heap entries are skipped lazily by comparing against the current
/// aggregate.
pub fn gaec(g: &CostGraph) -> Partition {
    let n = g.node_count();
    let mut adjacency: Vec<HashMap<usize, f64>> = (0..n)
        .map(|v| g.neighbors(v).iter().copied().collect())
        .collect();
    let mut members: Vec<Vec<usize>> = (0..n).map(|v| vec![v]).collect();
    let mut alive = vec![true; n];

    let mut heap: BinaryHeap<Candidate> = g
        .edges()
        .iter()
        .filter(|e| e.cost > 0.0)
        .map(|e| candidate(e.cost, e.u, e.v))
        .collect();

    while let Some(Candidate {
        weight,
        pair: Reverse((a, b)),
    }) = heap.pop()
    {
        if !alive[a] || !alive[b] {
            continue;
        }
        match adjacency[a].get(&b) {
            Some(&w) if w.to_bits() == weight.to_bits() => {}
            _ => continue,
        }

        // Keep the cluster with the larger neighborhood so contraction work
        // is proportional to the smaller side.
        let (keep, drop) = if adjacency[a].len() >= adjacency[b].len() {
            (a, b)
        } else {
            (b, a)
        };
        let dropped = std::mem::take(&mut adjacency[drop]);
        adjacency[keep].remove(&drop);
        alive[drop] = false;
        let moved = std::mem::take(&mut members[drop]);
        members[keep].extend(moved);

        for (x, c) in dropped {
            if x == keep {
                continue;
            }
            adjacency[x].remove(&drop);
            let merged = {
                let slot = adjacency[keep].entry(x).or_insert(0.0);
                *slot += c;
                *slot
            };
            adjacency[x].insert(keep, merged);
            if merged > 0.0 {
                heap.push(candidate(merged, keep, x));
            }
        }
    }

    let mut labels = vec![0; n];
    for (id, m) in members.iter().enumerate().filter(|(id, _)| alive[*id]) {
        for &v in m {
            labels[v] = id;
        }
    }
    Partition::new(labels).normalized()
}
