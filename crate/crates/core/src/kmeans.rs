//! Lloyd's k-means with k-means++ seeding and multiple restarts.

use rand::{Rng as _, RngCore};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{seeded, Rng};
use crate::squared_distance;

pub const MAX_ITERATIONS: usize = 300;
pub const DEFAULT_RESTARTS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub centroids: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    pub inertia: f64,
    pub iterations: usize,
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = squared_distance(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..n)].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| squared_distance(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if r < w {
                    chosen = i;
                    break;
                }
                r -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.push(points[pick].clone());
        let c = centroids.last().unwrap();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(squared_distance(p, c));
        }
    }
    centroids
}

/// Assigns every point to its nearest centroid, lowest index on ties.
fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>], assignment: &mut [usize]) -> f64 {
    let mut inertia = 0.0;
    for (a, p) in assignment.iter_mut().zip(points) {
        let (j, d) = nearest(p, centroids);
        *a = j;
        inertia += d;
    }
    inertia
}

fn update_centroids(points: &[Vec<f64>], assignment: &[usize], centroids: &mut [Vec<f64>]) {
    let dim = points[0].len();
    let k = centroids.len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignment) {
        counts[a] += 1;
        sums[a].iter_mut().zip(p).for_each(|(s, x)| *s += x);
    }
    let mut empty = Vec::new();
    for j in 0..k {
        if counts[j] == 0 {
            empty.push(j);
        } else {
            let c = counts[j] as f64;
            centroids[j] = sums[j].iter().map(|s| s / c).collect();
        }
    }
    // Empty clusters take over the point farthest from its own centroid.
    for j in empty {
        let far = points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, squared_distance(p, &centroids[assignment[i]])))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .unwrap();
        centroids[j] = points[far].clone();
    }
}

/// One k-means run. Also returns the inertia after every assignment step.
pub(crate) fn single_run(points: &[Vec<f64>], k: usize, rng: &mut Rng) -> (KMeansResult, Vec<f64>) {
    let mut centroids = plus_plus_init(points, k, rng);
    let mut assignment = vec![usize::MAX; points.len()];
    let mut next = vec![0; points.len()];
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut inertia;
    loop {
        inertia = assign(points, &centroids, &mut next);
        history.push(inertia);
        if next == assignment || iterations == MAX_ITERATIONS {
            assignment.copy_from_slice(&next);
            break;
        }
        assignment.copy_from_slice(&next);
        update_centroids(points, &assignment, &mut centroids);
        iterations += 1;
    }
    (
        KMeansResult {
            centroids,
            assignment,
            inertia,
            iterations,
        },
        history,
    )
}

/// Best-inertia result over `restarts` independently seeded runs.
pub fn kmeans(points: &[Vec<f64>], k: usize, restarts: usize, rng: &mut Rng) -> Result<KMeansResult> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    if restarts == 0 {
        return Err(Error::InvalidParameter("restarts must be positive".into()));
    }
    if k > points.len() {
        return Err(Error::SizeLimit {
            n: k,
            limit: points.len(),
        });
    }
    let dim = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::Shape {
            expected: dim,
            actual: p.len(),
        });
    }
    let seeds: Vec<u64> = (0..restarts).map(|_| rng.next_u64()).collect();
    let runs: Vec<KMeansResult> = seeds
        .par_iter()
        .map(|&s| single_run(points, k, &mut seeded(s)).0)
        .collect();
    // First run wins ties so the result does not depend on scheduling.
    Ok(runs
        .into_iter()
        .reduce(|best, r| if r.inertia < best.inertia { r } else { best })
        .unwrap())
}
