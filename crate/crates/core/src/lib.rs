//! Triplet-loss metric learning paired with graph clustering.
//!
//! An embedding network is trained on sampled (anchor, positive, negative)
//! triplets under one of three hinge losses, optionally with controlled
//! label noise injected into the sampler. Pairwise embedding distances are
//! turned into cut probabilities, either by a fitted logistic model or by the
//! closed-form threshold `tau = sqrt((alpha + beta) / 2)`, and from there
//! into signed edge costs for the minimum cost multicut problem. Clusterings
//! from the multicut heuristics and from k-means are scored with the
//! best-mapping clustering accuracy.
//!
//! The modules mirror that pipeline:
//!
//! * [`net`]: feedforward embedding network, backprop and Adam.
//! * [`loss`]: the three triplet losses and their gradients.
//! * [`sampling`]: triplet sampling with label noise.
//! * [`calibration`]: distance to cut probability to edge cost.
//! * [`multicut`]: cost graphs, exhaustive oracle, GAEC and local search.
//! * [`kmeans`]: k-means++ seeded Lloyd iterations.
//! * [`metrics`]: clustering accuracy and intra/inter distance statistics.
//! * [`data`]: synthetic blobs, CIFAR-10 binary batches, PCA.
//! * [`experiment`]: training loop, noise grid and report emission.

pub mod calibration;
pub mod data;
pub mod error;
pub mod experiment;
pub mod kmeans;
pub mod loss;
pub mod metrics;
pub mod multicut;
pub mod net;
pub mod rng;
pub mod sampling;

pub use error::{Error, Result};

/// Squared Euclidean distance between two equal-length slices.
#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
