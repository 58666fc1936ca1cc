//! Oracles shared by the integration test targets.
#![allow(dead_code)]

use rand::Rng as _;
use tripletcut::experiment::train::batch_gradient;
use tripletcut::loss::{triplet_loss, LossKind, TripletMargins};
use tripletcut::net::EmbeddingNet;
use tripletcut::rng::Rng;
use tripletcut::sampling::Triplet;
use tripletcut::squared_distance;

pub const FD_STEP: f64 = 1e-5;
pub const KINK_GAP: f64 = 1e-3;

/// `max |a - b| / max(|a|, |b|)` over all entries, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = a.iter().chain(b).map(|x| x.abs()).fold(0.0, f64::max);
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

/// Hinge arguments of a loss, to keep finite differences off the kinks.
pub fn hinge_args(kind: LossKind, fa: &[f64], fp: &[f64], fn_: &[f64], m: TripletMargins) -> Vec<f64> {
    let (dp, dn) = (squared_distance(fa, fp), squared_distance(fa, fn_));
    match kind {
        LossKind::Triplet1 => vec![dp - dn + m.alpha],
        LossKind::Triplet2 => vec![dp - dn + m.alpha, dp - m.beta],
        LossKind::Triplet3 => vec![m.alpha - dn, dp - m.beta],
    }
}

/// Central-difference gradient of `f` at `x`.
pub fn numeric_gradient(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + FD_STEP;
            let up = f(&probe);
            probe[i] = orig - FD_STEP;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// Worst relative error between analytic and numeric input gradients over
/// `configs` random non-kink triplets. Also returns how many had a nonzero
/// loss, so callers can tell the check was not vacuous.
pub fn loss_gradient_check(kind: LossKind, configs: usize, dim: usize, rng: &mut Rng) -> (f64, usize) {
    let m = TripletMargins::default();
    let mut worst = 0.0f64;
    let mut active = 0;
    let mut done = 0;
    while done < configs {
        let mut v = || -> Vec<f64> { (0..dim).map(|_| rng.random_range(-0.8..0.8)).collect() };
        let (fa, fp, fn_) = (v(), v(), v());
        if hinge_args(kind, &fa, &fp, &fn_, m).iter().any(|z| z.abs() < KINK_GAP) {
            continue;
        }
        done += 1;
        let g = triplet_loss(kind, &fa, &fp, &fn_, m).unwrap();
        if g.loss > 0.0 {
            active += 1;
        }
        let mut x = fa.clone();
        x.extend(&fp);
        x.extend(&fn_);
        let num = numeric_gradient(&x, |x| {
            triplet_loss(kind, &x[..dim], &x[dim..2 * dim], &x[2 * dim..], m).unwrap().loss
        });
        let mut ana = g.anchor.clone();
        ana.extend(&g.positive);
        ana.extend(&g.negative);
        worst = worst.max(relative_error(&ana, &num));
    }
    (worst, active)
}

fn params(net: &EmbeddingNet) -> Vec<f64> {
    net.weights().iter().chain(net.biases()).flatten().copied().collect()
}

fn set_params(net: &mut EmbeddingNet, p: &[f64]) {
    let mut it = p.iter();
    for w in net.weights_mut().iter_mut() {
        w.iter_mut().for_each(|x| *x = *it.next().unwrap());
    }
    for b in net.biases_mut().iter_mut() {
        b.iter_mut().for_each(|x| *x = *it.next().unwrap());
    }
}

/// Smallest absolute hidden pre-activation over the inputs, to stay off the
/// ReLU kink.
fn min_hidden_preactivation(net: &EmbeddingNet, xs: &[Vec<f64>]) -> f64 {
    let mut min = f64::INFINITY;
    for x in xs {
        let mut h = x.clone();
        let layers = net.weights().len();
        for (l, (w, b)) in net.weights().iter().zip(net.biases()).enumerate() {
            let rows = b.len();
            let cols = h.len();
            let z: Vec<f64> = (0..rows)
                .map(|r| b[r] + (0..cols).map(|c| w[r * cols + c] * h[c]).sum::<f64>())
                .collect();
            if l + 1 < layers {
                min = min.min(z.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min));
                h = z.into_iter().map(|v| v.max(0.0)).collect();
            } else {
                h = z;
            }
        }
    }
    min
}

/// Relative error of the parameter gradient of the mean triplet loss over a
/// small random batch, against central differences. `None` when the random
/// draw sits too close to a kink.
pub fn net_gradient_check(kind: LossKind, normalize: bool, rng: &mut Rng) -> Option<f64> {
    let dims = [5, 7, 3];
    let net = EmbeddingNet::new(&dims, rng).unwrap().with_normalized_output(normalize);
    let m = TripletMargins::default();
    let xs: Vec<Vec<f64>> = (0..6)
        .map(|_| (0..dims[0]).map(|_| rng.random_range(-1.5..1.5)).collect())
        .collect();
    let batch = [
        Triplet {
            anchor: 0,
            positive: 1,
            negative: 2,
            pos_corrupted: false,
            neg_corrupted: false,
        },
        Triplet {
            anchor: 3,
            positive: 4,
            negative: 5,
            pos_corrupted: false,
            neg_corrupted: false,
        },
    ];
    if min_hidden_preactivation(&net, &xs) < KINK_GAP {
        return None;
    }
    // L2 normalization is singular at the origin.
    let raw = net.clone().with_normalized_output(false);
    let min_norm = xs
        .iter()
        .map(|x| squared_distance(&raw.forward(x).unwrap(), &[0.0; 3]).sqrt())
        .fold(f64::INFINITY, f64::min);
    if normalize && min_norm < 0.1 {
        return None;
    }
    for t in &batch {
        let f = |i: usize| net.forward(&xs[i]).unwrap();
        if hinge_args(kind, &f(t.anchor), &f(t.positive), &f(t.negative), m)
            .iter()
            .any(|z| z.abs() < KINK_GAP)
        {
            return None;
        }
    }
    let (_, grads) = batch_gradient(&net, &xs, &batch, kind, m).unwrap();
    let ana: Vec<f64> = grads.weights.iter().chain(&grads.biases).flatten().copied().collect();
    let p0 = params(&net);
    let mut probe = net.clone();
    let num = numeric_gradient(&p0, |p| {
        set_params(&mut probe, p);
        batch_gradient(&probe, &xs, &batch, kind, m).unwrap().0
    });
    Some(relative_error(&ana, &num))
}

/// Best clustering accuracy over every partial one-to-one map from clusters
/// to labels, by exhaustive search.
pub fn brute_force_acc(pred: &[usize], truth: &[usize]) -> f64 {
    let clusters = pred.iter().max().map_or(0, |&m| m + 1);
    let labels = truth.iter().max().map_or(0, |&m| m + 1);
    let mut counts = vec![vec![0usize; labels]; clusters];
    for (&p, &t) in pred.iter().zip(truth) {
        counts[p][t] += 1;
    }
    fn go(c: usize, counts: &[Vec<usize>], used: &mut Vec<bool>) -> usize {
        if c == counts.len() {
            return 0;
        }
        let mut best = go(c + 1, counts, used);
        for l in 0..used.len() {
            if !used[l] {
                used[l] = true;
                best = best.max(counts[c][l] + go(c + 1, counts, used));
                used[l] = false;
            }
        }
        best
    }
    go(0, &counts, &mut vec![false; labels]) as f64 / pred.len() as f64
}
