use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::loss::{triplet_loss, LossKind, TripletMargins};
use crate::net::{adam_step, AdamConfig, AdamState, EmbeddingNet, NetGradients};
use crate::rng::{derive_seed, seeded, tag};
use crate::sampling::{NoiseSpec, TripletSampler};

/// Everything the training loop needs besides data, noise and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub margins: TripletMargins,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Hidden sizes followed by the embedding size.
    pub embedding_dims: Vec<usize>,
    pub normalize_embeddings: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            loss: LossKind::Triplet3,
            margins: TripletMargins::default(),
            epochs: 20,
            batch_size: 100,
            learning_rate: 1e-3,
            embedding_dims: vec![64, 32],
            normalize_embeddings: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: EmbeddingNet,
    /// Mean per-triplet loss of every epoch.
    pub epoch_losses: Vec<f64>,
}

/// Mean triplet loss over `batch` and its parameter gradient.
pub fn batch_gradient(
    net: &EmbeddingNet,
    features: &[Vec<f64>],
    batch: &[crate::sampling::Triplet],
    loss: LossKind,
    margins: TripletMargins,
) -> Result<(f64, NetGradients)> {
    let mut grads = NetGradients::zeros_like(net);
    let mut total = 0.0;
    for t in batch {
        let ta = net.forward_trace(&features[t.anchor])?;
        let tp = net.forward_trace(&features[t.positive])?;
        let tn = net.forward_trace(&features[t.negative])?;
        let g = triplet_loss(loss, ta.output(), tp.output(), tn.output(), margins)?;
        total += g.loss;
        if g.loss > 0.0 {
            net.backward_into(&ta, &g.anchor, &mut grads)?;
            net.backward_into(&tp, &g.positive, &mut grads)?;
            net.backward_into(&tn, &g.negative, &mut grads)?;
        }
    }
    let scale = 1.0 / batch.len().max(1) as f64;
    grads.scale(scale);
    Ok((total * scale, grads))
}

/// Trains a fresh network on triplets sampled from `dataset` under `noise`.
///
/// The initial weights come from the `"init"` stream of `seed` and the
/// triplet draws from its `"sample"` stream, so runs that share a seed share
/// an initialization regardless of loss or noise level.
pub fn train(config: &TrainConfig, dataset: &Dataset, noise: &NoiseSpec, seed: u64) -> Result<TrainOutcome> {
    config.margins.validate()?;
    noise.validate()?;
    if config.batch_size == 0 {
        return Err(Error::InvalidParameter("batch_size must be positive".into()));
    }
    if dataset.is_empty() {
        return Err(Error::InvalidParameter("cannot train on an empty dataset".into()));
    }
    let mut dims = vec![dataset.dim()];
    dims.extend(&config.embedding_dims);
    let mut net = EmbeddingNet::new(&dims, &mut seeded(derive_seed(seed, &[tag("init")])))?
        .with_normalized_output(config.normalize_embeddings);
    let mut adam = AdamState::new(
        &net,
        AdamConfig {
            lr: config.learning_rate,
            ..AdamConfig::default()
        },
    );
    let mut rng = seeded(derive_seed(seed, &[tag("sample")]));
    let sampler = TripletSampler::new(&dataset.labels);
    let batches = (dataset.len() / config.batch_size).max(1);

    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut sum = 0.0;
        for _ in 0..batches {
            let batch = sampler.sample_batch(config.batch_size, noise, &mut rng)?;
            let (loss, grads) = batch_gradient(&net, &dataset.features, &batch, config.loss, config.margins)?;
            adam_step(&mut net, &mut adam, &grads)?;
            sum += loss;
        }
        let mean = sum / batches as f64;
        log::debug!("epoch {epoch}: mean {} loss {mean:.6}", config.loss);
        epoch_losses.push(mean);
    }
    Ok(TrainOutcome { net, epoch_losses })
}
