//! Clustering accuracy under the best one-to-one cluster/label map, and
//! per-class intra/inter distance statistics.

use std::collections::BTreeMap;
use std::io::Write;

use crate::calibration::pairwise_distance;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterEval {
    pub acc: f64,
    pub n_pred_clusters: usize,
    /// Predicted cluster id to true label, for matched clusters.
    pub mapping: BTreeMap<usize, usize>,
    /// `confusion[i][j]`: items in `cluster_ids[i]` carrying `label_ids[j]`.
    pub confusion: Vec<Vec<usize>>,
    pub cluster_ids: Vec<usize>,
    pub label_ids: Vec<usize>,
}

/// Minimum-cost assignment of every row to a distinct column
/// (`rows <= cols`), via shortest augmenting paths with potentials.
/// Runs in `O(rows^2 * cols)`.
fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let rows = cost.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = cost[0].len();
    assert!(rows <= cols, "more rows than columns");
    // 1-based with a virtual column 0.
    let mut u = vec![0.0; rows + 1];
    let mut v = vec![0.0; cols + 1];
    let mut col_row = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for i in 1..=rows {
        col_row[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = col_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[col_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_row[j0] = col_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_col = vec![0; rows];
    for j in 1..=cols {
        if col_row[j] != 0 {
            row_col[col_row[j] - 1] = j - 1;
        }
    }
    row_col
}

fn dense_ids(values: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut ids: Vec<usize> = values.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let index = values
        .iter()
        .map(|v| ids.binary_search(v).unwrap())
        .collect();
    (ids, index)
}

/// Fraction of items matched under the best injective map between predicted
/// clusters and true labels. Surplus clusters on either side match nothing.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<ClusterEval> {
    if pred.is_empty() {
        return Err(Error::InvalidParameter("accuracy of an empty labeling".into()));
    }
    if pred.len() != truth.len() {
        return Err(Error::Shape {
            expected: truth.len(),
            actual: pred.len(),
        });
    }
    let (cluster_ids, pi) = dense_ids(pred);
    let (label_ids, ti) = dense_ids(truth);
    let (p, l) = (cluster_ids.len(), label_ids.len());
    let mut confusion = vec![vec![0usize; l]; p];
    for (&a, &b) in pi.iter().zip(&ti) {
        confusion[a][b] += 1;
    }

    // Rectangular problem with the smaller side as rows; equivalent to
    // padding the short side with zero-count dummies.
    let mut mapping = BTreeMap::new();
    let mut matched = 0usize;
    if p <= l {
        let cost: Vec<Vec<f64>> = confusion
            .iter()
            .map(|row| row.iter().map(|&c| -(c as f64)).collect())
            .collect();
        for (c, lab) in min_cost_assignment(&cost).into_iter().enumerate() {
            matched += confusion[c][lab];
            mapping.insert(cluster_ids[c], label_ids[lab]);
        }
    } else {
        let cost: Vec<Vec<f64>> = (0..l)
            .map(|lab| (0..p).map(|c| -(confusion[c][lab] as f64)).collect())
            .collect();
        for (lab, c) in min_cost_assignment(&cost).into_iter().enumerate() {
            matched += confusion[c][lab];
            mapping.insert(cluster_ids[c], label_ids[lab]);
        }
    }
    Ok(ClusterEval {
        acc: matched as f64 / pred.len() as f64,
        n_pred_clusters: p,
        mapping,
        confusion,
        cluster_ids,
        label_ids,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassDistance {
    pub class: usize,
    pub intra_mean: f64,
    pub intra_std: f64,
    /// Mean cross distance to the nearest other class, `NaN` with one class.
    pub inter_mean: f64,
    pub inter_std: f64,
    pub nearest_class: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceStats {
    pub classes: Vec<ClassDistance>,
}

pub const STATS_CSV_HEADER: [&str; 6] = [
    "class",
    "intra_mean",
    "intra_std",
    "inter_mean",
    "inter_std",
    "nearest_class",
];

impl DistanceStats {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(STATS_CSV_HEADER)?;
        for c in &self.classes {
            w.write_record([
                c.class.to_string(),
                c.intra_mean.to_string(),
                c.intra_std.to_string(),
                c.inter_mean.to_string(),
                c.inter_std.to_string(),
                c.nearest_class.map_or_else(String::new, |n| n.to_string()),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<stats csv>", e))?;
        Ok(())
    }
}

/// Population mean and standard deviation.
fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per class: mean/std of within-class pairwise distances, and mean/std of
/// cross distances to the other class with the smallest mean cross distance.
pub fn distance_stats(embeddings: &[Vec<f64>], labels: &[usize]) -> Result<DistanceStats> {
    if embeddings.len() != labels.len() {
        return Err(Error::Shape {
            expected: labels.len(),
            actual: embeddings.len(),
        });
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    if let Some((&class, _)) = groups.iter().find(|(_, m)| m.len() < 2) {
        return Err(Error::InvalidParameter(format!(
            "class {class} has a single member; intra distance is undefined"
        )));
    }
    let groups: Vec<(usize, Vec<usize>)> = groups.into_iter().collect();
    let dist = |i: usize, j: usize| pairwise_distance(&embeddings[i], &embeddings[j]);

    let mut classes = Vec::with_capacity(groups.len());
    for (a, (class, members)) in groups.iter().enumerate() {
        let mut intra = Vec::with_capacity(members.len() * (members.len() - 1) / 2);
        for (x, &i) in members.iter().enumerate() {
            for &j in &members[x + 1..] {
                intra.push(dist(i, j)?);
            }
        }
        let (intra_mean, intra_std) = mean_std(&intra);

        let mut best: Option<(f64, f64, usize)> = None;
        for (b, (other, others)) in groups.iter().enumerate() {
            if a == b {
                continue;
            }
            let mut cross = Vec::with_capacity(members.len() * others.len());
            for &i in members {
                for &j in others {
                    cross.push(dist(i, j)?);
                }
            }
            let (m, s) = mean_std(&cross);
            if best.is_none_or(|(bm, _, _)| m < bm) {
                best = Some((m, s, *other));
            }
        }
        let (inter_mean, inter_std, nearest_class) = match best {
            Some((m, s, c)) => (m, s, Some(c)),
            None => (f64::NAN, f64::NAN, None),
        };
        classes.push(ClassDistance {
            class: *class,
            intra_mean,
            intra_std,
            inter_mean,
            inter_std,
            nearest_class,
        });
    }
    Ok(DistanceStats { classes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng as _;

    /// Maximizes matches over every injective map from the smaller side to
    /// the larger one.
    fn brute_force_acc(pred: &[usize], truth: &[usize]) -> f64 {
        let (pids, pi) = dense_ids(pred);
        let (tids, ti) = dense_ids(truth);
        let mut conf = vec![vec![0usize; tids.len()]; pids.len()];
        for (&a, &b) in pi.iter().zip(&ti) {
            conf[a][b] += 1;
        }
        fn go(conf: &[Vec<usize>], row: usize, used: &mut Vec<bool>, transpose: bool) -> usize {
            let rows = if transpose { conf[0].len() } else { conf.len() };
            if row == rows {
                return 0;
            }
            let cols = used.len();
            let mut best = 0;
            for c in 0..cols {
                if used[c] {
                    continue;
                }
                used[c] = true;
                let here = if transpose { conf[c][row] } else { conf[row][c] };
                best = best.max(here + go(conf, row + 1, used, transpose));
                used[c] = false;
            }
            best
        }
        let (p, l) = (pids.len(), tids.len());
        let m = if p <= l {
            go(&conf, 0, &mut vec![false; l], false)
        } else {
            go(&conf, 0, &mut vec![false; p], true)
        };
        m as f64 / pred.len() as f64
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap().acc, 1.0);
        let e = accuracy(&[0, 1, 2, 3], &[0, 0, 1, 1]).unwrap();
        assert_eq!(e.acc, 0.5);
        assert_eq!(e.n_pred_clusters, 4);
        assert_eq!(e.mapping.len(), 2);
        assert_eq!(accuracy(&[0, 0, 0, 0], &[0, 0, 1, 1]).unwrap().acc, 0.5);
        assert_eq!(brute_force_acc(&[0, 1, 2, 3], &[0, 0, 1, 1]), 0.5);
    }

    #[test]
    fn accuracy_errors() {
        assert!(accuracy(&[], &[]).is_err());
        assert!(accuracy(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn mapping_is_one_to_one() {
        let e = accuracy(&[5, 5, 7, 7, 9], &[1, 1, 1, 2, 2]).unwrap();
        let mut targets: Vec<usize> = e.mapping.values().copied().collect();
        targets.sort_unstable();
        targets.dedup();
        assert_eq!(targets.len(), e.mapping.len());
    }

    #[test]
    fn assignment_matches_brute_force() {
        let mut rng = seeded(8);
        for _ in 0..300 {
            let n = rng.random_range(1..25);
            let p = rng.random_range(1..=5);
            let l = rng.random_range(1..=5);
            let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..p)).collect();
            let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..l)).collect();
            let a = accuracy(&pred, &truth).unwrap().acc;
            assert!((a - brute_force_acc(&pred, &truth)).abs() < 1e-12);
        }
    }

    #[test]
    fn accuracy_is_permutation_invariant() {
        let pred = [0, 1, 1, 2, 2, 2, 0, 3];
        let truth = [1, 1, 0, 0, 2, 2, 1, 0];
        let base = accuracy(&pred, &truth).unwrap().acc;
        let pred2: Vec<usize> = pred.iter().map(|&c| [7, 2, 9, 4][c]).collect();
        let truth2: Vec<usize> = truth.iter().map(|&c| [5, 0, 3][c]).collect();
        assert_eq!(accuracy(&pred2, &truth2).unwrap().acc, base);
    }

    #[test]
    fn perfect_accuracy_iff_same_partition() {
        assert_eq!(accuracy(&[3, 3, 8, 1], &[0, 0, 2, 1]).unwrap().acc, 1.0);
        assert!(accuracy(&[3, 3, 3, 1], &[0, 0, 2, 1]).unwrap().acc < 1.0);
        assert!(accuracy(&[3, 4, 8, 1], &[0, 0, 2, 1]).unwrap().acc < 1.0);
    }

    #[test]
    fn stats_on_coincident_pairs() {
        let emb = vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 0.0]];
        let s = distance_stats(&emb, &[0, 0, 1, 1]).unwrap();
        for c in &s.classes {
            assert_eq!(c.intra_mean, 0.0);
            assert_eq!(c.inter_mean, 1.0);
        }
        assert_eq!(s.classes[0].nearest_class, Some(1));
    }

    #[test]
    fn stats_single_pair_on_a_line() {
        let s = distance_stats(&[vec![0.0], vec![2.0]], &[4, 4]).unwrap();
        assert_eq!(s.classes[0].intra_mean, 2.0);
        assert_eq!(s.classes[0].intra_std, 0.0);
        assert_eq!(s.classes[0].nearest_class, None);
    }

    #[test]
    fn stats_reject_singleton_class() {
        assert!(distance_stats(&[vec![0.0], vec![1.0], vec![2.0]], &[0, 0, 1]).is_err());
    }

    #[test]
    fn stats_pick_geometrically_nearest_blob() {
        // Blob centres at x = 0, 3, 10: class 0 and 1 are each other's
        // nearest, class 2's nearest is class 1.
        let mut rng = seeded(12);
        let centres = [0.0, 3.0, 10.0];
        let mut emb = Vec::new();
        let mut labels = Vec::new();
        for (c, &x) in centres.iter().enumerate() {
            for _ in 0..15 {
                emb.push(vec![x + rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2)]);
                labels.push(c);
            }
        }
        let s = distance_stats(&emb, &labels).unwrap();
        let nearest: Vec<_> = s.classes.iter().map(|c| c.nearest_class.unwrap()).collect();
        assert_eq!(nearest, vec![1, 0, 1]);

        // Independent recomputation of class 2's inter mean.
        let mut total = 0.0;
        let mut count = 0.0;
        for i in 30..45 {
            for j in 15..30 {
                let dx: f64 = emb[i][0] - emb[j][0];
                let dy: f64 = emb[i][1] - emb[j][1];
                total += (dx * dx + dy * dy).sqrt();
                count += 1.0;
            }
        }
        assert!((s.classes[2].inter_mean - total / count).abs() < 1e-12);
    }

    #[test]
    fn stats_are_rigid_motion_invariant() {
        let mut rng = seeded(13);
        let emb: Vec<Vec<f64>> = (0..20)
            .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let labels: Vec<usize> = (0..20).map(|i| i % 3).collect();
        let (s, c) = (0.6f64.sin(), 0.6f64.cos());
        let moved: Vec<Vec<f64>> = emb
            .iter()
            .map(|p| vec![c * p[0] - s * p[1] + 4.0, s * p[0] + c * p[1] - 2.5])
            .collect();
        let a = distance_stats(&emb, &labels).unwrap();
        let b = distance_stats(&moved, &labels).unwrap();
        for (x, y) in a.classes.iter().zip(&b.classes) {
            assert!((x.intra_mean - y.intra_mean).abs() < 1e-9);
            assert!((x.inter_mean - y.inter_mean).abs() < 1e-9);
            assert!((x.intra_std - y.intra_std).abs() < 1e-9);
            assert_eq!(x.nearest_class, y.nearest_class);
        }
    }
}
