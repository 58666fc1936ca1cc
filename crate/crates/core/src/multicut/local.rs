use std::collections::{BTreeMap, BTreeSet};

use super::{CostGraph, Partition};

/// Minimum improvement for a move to count. Guards against cycling on
/// round-off.
const MIN_GAIN: f64 = 1e-12;

struct State {
    labels: Vec<usize>,
    sizes: Vec<usize>,
    free: BTreeSet<usize>,
}

impl State {
    fn new(p: &Partition) -> Self {
        let p = p.normalized();
        let n = p.len();
        let mut sizes = vec![0; n];
        for &l in p.labels() {
            sizes[l] += 1;
        }
        let free = (0..n).filter(|&c| sizes[c] == 0).collect();
        State {
            labels: p.into_labels(),
            sizes,
            free,
        }
    }

    fn relabel(&mut self, v: usize, to: usize) {
        let from = self.labels[v];
        self.sizes[from] -= 1;
        if self.sizes[from] == 0 {
            self.free.insert(from);
        }
        if self.sizes[to] == 0 {
            self.free.remove(&to);
        }
        self.sizes[to] += 1;
        self.labels[v] = to;
    }
}

/// One ascending sweep of single-node moves. Each node takes its best
/// improving move: into another component or out into a fresh singleton.
fn node_sweep(g: &CostGraph, s: &mut State, sums: &mut [f64], mark: &mut [bool], touched: &mut Vec<usize>) -> bool {
    let mut changed = false;
    for v in 0..g.node_count() {
        let own = s.labels[v];
        for &(u, c) in g.neighbors(v) {
            let l = s.labels[u];
            if !mark[l] {
                mark[l] = true;
                touched.push(l);
            }
            sums[l] += c;
        }
        touched.sort_unstable();
        let own_sum = sums[own];

        // Change in objective: edges to the old component become cut (+),
        // edges to the new component become joined (-).
        let mut best: Option<(f64, usize)> = None;
        for &l in touched.iter() {
            if l == own {
                continue;
            }
            let delta = own_sum - sums[l];
            if best.is_none_or(|(d, _)| delta < d) {
                best = Some((delta, l));
            }
        }
        if s.sizes[own] > 1 {
            let delta = own_sum;
            if best.is_none_or(|(d, _)| delta < d) {
                let fresh = *s.free.first().expect("a free id exists while a component has two members");
                best = Some((delta, fresh));
            }
        }
        for &l in touched.iter() {
            sums[l] = 0.0;
            mark[l] = false;
        }
        touched.clear();

        if let Some((delta, to)) = best {
            if delta < -MIN_GAIN {
                s.relabel(v, to);
                changed = true;
            }
        }
    }
    changed
}

/// Merges the pair of components with the largest positive connecting cost.
fn merge_best_pair(g: &CostGraph, s: &mut State) -> bool {
    let mut between: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for e in g.edges() {
        let (a, b) = (s.labels[e.u], s.labels[e.v]);
        if a != b {
            *between.entry((a.min(b), a.max(b))).or_insert(0.0) += e.cost;
        }
    }
    let best = between
        .into_iter()
        .filter(|&(_, w)| w > MIN_GAIN)
        .fold(None::<((usize, usize), f64)>, |acc, (pair, w)| match acc {
            Some((_, bw)) if bw >= w => acc,
            _ => Some((pair, w)),
        });
    let Some(((keep, drop), _)) = best else {
        return false;
    };
    for v in 0..s.labels.len() {
        if s.labels[v] == drop {
            s.relabel(v, keep);
        }
    }
    true
}

/// Local search on a partition with single-node moves and component merges.
///
/// A pass visits nodes in ascending order and applies each node's best
/// strictly improving move, then merges the most attractive component pair
/// if that improves the objective. Passes repeat until nothing changes, so
/// the returned objective never exceeds the input's.
pub fn kl_refine(g: &CostGraph, p: &Partition) -> Partition {
    let n = g.node_count();
    assert_eq!(p.len(), n, "partition must cover every node");
    let mut s = State::new(p);
    let mut sums = vec![0.0; n];
    let mut mark = vec![false; n];
    let mut touched = Vec::new();
    loop {
        let moved = node_sweep(g, &mut s, &mut sums, &mut mark, &mut touched);
        let merged = merge_best_pair(g, &mut s);
        if !moved && !merged {
            break;
        }
    }
    Partition::new(s.labels).normalized()
}

#[cfg(test)]
mod tests {
    use super::super::{brute_force, objective, tests::triangle};
    use super::*;
    use crate::rng::seeded;
    use rand::Rng as _;

    #[test]
    fn triangle_from_singletons_reaches_zero() {
        let g = triangle(3.0, 3.0, -1.0);
        let p = kl_refine(&g, &Partition::singletons(3));
        assert_eq!(objective(&g, &p).unwrap(), 0.0);
    }

    #[test]
    fn optimal_input_is_a_fixed_point() {
        let g = triangle(-5.0, -5.0, 1.0);
        let (opt, value) = brute_force(&g).unwrap();
        let p = kl_refine(&g, &opt);
        assert_eq!(objective(&g, &p).unwrap(), value);
    }

    #[test]
    fn splits_off_repelled_node() {
        // Everything joined, but node 3 is repelled by all others.
        let g = CostGraph::complete(4, |_, v| if v == 3 { -2.0 } else { 1.0 }).unwrap();
        let p = kl_refine(&g, &Partition::single_component(4));
        assert_eq!(p.labels(), &[0, 0, 0, 1]);
    }

    #[test]
    fn never_increases_objective() {
        let mut rng = seeded(23);
        for _ in 0..300 {
            let n = rng.random_range(2..12);
            let g = CostGraph::complete(n, |_, _| rng.random_range(-1.0..1.0)).unwrap();
            let k = rng.random_range(1..=n);
            let p = Partition::new((0..n).map(|_| rng.random_range(0..k)).collect());
            let before = objective(&g, &p).unwrap();
            let after = objective(&g, &kl_refine(&g, &p)).unwrap();
            assert!(after <= before + 1e-12, "{after} > {before}");
        }
    }
}
