use super::{CostGraph, Partition};
use crate::error::{Error, Result};

/// Largest instance [`brute_force`] accepts. Bell(12) is about 4.2 million.
pub const BRUTE_FORCE_LIMIT: usize = 12;

struct Search<'a> {
    n: usize,
    costs: &'a [f64],
    labels: Vec<usize>,
    best_labels: Vec<usize>,
    best: f64,
}

impl Search<'_> {
    /// Restricted-growth enumeration. `blocks` is the number of blocks used so
    /// far and `cut` the cost of cut edges among the first `i` nodes.
    fn visit(&mut self, i: usize, blocks: usize, cut: f64) {
        if i == self.n {
            if cut < self.best {
                self.best = cut;
                self.best_labels.copy_from_slice(&self.labels);
            }
            return;
        }
        let row = &self.costs[i * self.n..i * self.n + i];
        for b in 0..=blocks {
            let added: f64 = row
                .iter()
                .zip(&self.labels[..i])
                .filter(|(_, &l)| l != b)
                .map(|(c, _)| c)
                .sum();
            self.labels[i] = b;
            self.visit(i + 1, blocks.max(b + 1), cut + added);
        }
    }
}

/// Exhaustively finds a minimum cost multicut. On ties the first partition in
/// restricted-growth order wins.
pub fn brute_force(g: &CostGraph) -> Result<(Partition, f64)> {
    let n = g.node_count();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::SizeLimit {
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    if n == 0 {
        return Ok((Partition::new(Vec::new()), 0.0));
    }
    let costs = g.dense();
    let mut s = Search {
        n,
        costs: &costs,
        labels: vec![0; n],
        best_labels: vec![0; n],
        best: f64::INFINITY,
    };
    s.visit(1, 1, 0.0);
    Ok((Partition::new(s.best_labels), s.best))
}
