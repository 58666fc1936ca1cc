use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use rayon::prelude::*;

use crate::calibration::CutModel;
use crate::data::{pca_project, Dataset};
use crate::error::Result;
use crate::loss::LossKind;
use crate::metrics::{distance_stats, DistanceStats};
use crate::rng::{derive_seed, seeded, tag};
use crate::sampling::NoiseSpec;

use super::cluster::{build_cut_model, cluster_embeddings, ClusterMethod};
use super::train::train;
use super::ExperimentConfig;

/// One column of the noise grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NegNoise {
    Rate(f64),
    /// Negatives drawn uniformly at random, ignoring labels.
    Random,
}

impl NegNoise {
    fn code(self) -> u64 {
        match self {
            NegNoise::Rate(r) => r.to_bits(),
            NegNoise::Random => tag("random"),
        }
    }
}

impl fmt::Display for NegNoise {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NegNoise::Rate(r) => write!(f, "{r}"),
            NegNoise::Random => f.write_str("random"),
        }
    }
}

/// Coordinates of a trained model in the grid. Every clustering method is
/// scored on the same trained model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellKey {
    pub pos_noise: f64,
    pub neg_noise: NegNoise,
    pub loss: LossKind,
    pub seed: u64,
}

impl CellKey {
    pub fn noise(&self) -> Result<NoiseSpec> {
        match self.neg_noise {
            NegNoise::Rate(r) => NoiseSpec::new(self.pos_noise, r, false),
            NegNoise::Random => NoiseSpec::new(self.pos_noise, 0.0, true),
        }
    }

    /// Seed of the training run. It depends on the run seed only, so all
    /// losses and noise levels of one seed start from the same weights.
    pub fn train_seed(&self, global: u64) -> u64 {
        derive_seed(global, &[tag("train"), self.seed])
    }

    /// Seed for calibration and clustering, mixing every coordinate.
    pub fn cell_seed(&self, global: u64, stream: &str) -> u64 {
        derive_seed(
            global,
            &[
                self.seed,
                self.pos_noise.to_bits(),
                self.neg_noise.code(),
                tag(self.loss.token()),
                tag(stream),
            ],
        )
    }

    fn is_clean(&self) -> bool {
        self.pos_noise == 0.0 && self.neg_noise == NegNoise::Rate(0.0)
    }
}

/// One raw row: a cell scored with one method.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub key: CellKey,
    pub method: ClusterMethod,
    /// `NaN` when the cell failed.
    pub acc: f64,
    pub n_clusters: usize,
    pub runtime_s: f64,
    pub error: Option<String>,
}

/// Figures for one loss taken from its first noiseless cell.
#[derive(Debug, Clone)]
pub struct LossArtifacts {
    pub loss: LossKind,
    pub seed: u64,
    pub stats: DistanceStats,
    /// Two-dimensional projection of the test embeddings.
    pub projection: Vec<[f64; 2]>,
    /// Predicted cluster of each projected point.
    pub clusters: Vec<usize>,
    pub labels: Vec<usize>,
    pub method: ClusterMethod,
}

#[derive(Debug, Clone, Default)]
pub struct GridResult {
    pub rows: Vec<CellResult>,
    pub artifacts: Vec<LossArtifacts>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub pos_noise: f64,
    pub neg_noise: NegNoise,
    pub loss: LossKind,
    pub method: ClusterMethod,
    pub runs: usize,
    pub failures: usize,
    pub acc_mean: f64,
    /// Population standard deviation over the successful runs.
    pub acc_std: f64,
    pub n_clusters_mean: f64,
}

impl GridResult {
    /// Aggregates over seeds in the order cells first appear.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut order: Vec<(CellKey, ClusterMethod)> = Vec::new();
        let mut groups: BTreeMap<usize, Vec<&CellResult>> = BTreeMap::new();
        for r in &self.rows {
            let same = |(k, m): &(CellKey, ClusterMethod)| {
                k.pos_noise == r.key.pos_noise
                    && k.neg_noise == r.key.neg_noise
                    && k.loss == r.key.loss
                    && *m == r.method
            };
            let idx = match order.iter().position(same) {
                Some(i) => i,
                None => {
                    order.push((r.key, r.method));
                    order.len() - 1
                }
            };
            groups.entry(idx).or_default().push(r);
        }
        groups
            .into_iter()
            .map(|(idx, rows)| {
                let (key, method) = order[idx];
                let ok: Vec<&&CellResult> = rows.iter().filter(|r| r.error.is_none()).collect();
                let n = ok.len() as f64;
                let (acc_mean, acc_std, n_clusters_mean) = if ok.is_empty() {
                    (f64::NAN, f64::NAN, f64::NAN)
                } else {
                    let mean = ok.iter().map(|r| r.acc).sum::<f64>() / n;
                    let var = ok.iter().map(|r| (r.acc - mean).powi(2)).sum::<f64>() / n;
                    let nc = ok.iter().map(|r| r.n_clusters as f64).sum::<f64>() / n;
                    (mean, var.sqrt(), nc)
                };
                SummaryRow {
                    pos_noise: key.pos_noise,
                    neg_noise: key.neg_noise,
                    loss: key.loss,
                    method,
                    runs: rows.len(),
                    failures: rows.len() - ok.len(),
                    acc_mean,
                    acc_std,
                    n_clusters_mean,
                }
            })
            .collect()
    }

    /// Mean ACC of the successful runs of one cell over all seeds.
    pub fn mean_acc(&self, pos: f64, neg: NegNoise, loss: LossKind, method: ClusterMethod) -> Option<f64> {
        self.summary()
            .into_iter()
            .find(|s| s.pos_noise == pos && s.neg_noise == neg && s.loss == loss && s.method == method)
            .map(|s| s.acc_mean)
    }
}

/// Grid coordinates in row order: positive rate, negative column, loss, seed.
pub fn grid_cells(cfg: &ExperimentConfig) -> Vec<CellKey> {
    let mut negs: Vec<NegNoise> = cfg.neg_rates.iter().map(|&r| NegNoise::Rate(r)).collect();
    if cfg.neg_random {
        negs.push(NegNoise::Random);
    }
    let mut cells = Vec::new();
    for &pos_noise in &cfg.pos_rates {
        for &neg_noise in &negs {
            for &loss in &cfg.losses {
                for &seed in &cfg.seeds {
                    cells.push(CellKey {
                        pos_noise,
                        neg_noise,
                        loss,
                        seed,
                    });
                }
            }
        }
    }
    cells
}

/// Everything a trained cell produces before scoring.
pub struct TrainedCell {
    pub net: crate::net::EmbeddingNet,
    pub train_embeddings: Vec<Vec<f64>>,
    pub test_embeddings: Vec<Vec<f64>>,
    pub cut_model: Option<CutModel>,
    pub train_seconds: f64,
}

/// Trains the cell's model, embeds both splits and, when multicut is among
/// the methods, calibrates cut probabilities on the training embeddings.
pub fn train_cell(cfg: &ExperimentConfig, train_ds: &Dataset, test_ds: &Dataset, key: &CellKey) -> Result<TrainedCell> {
    let start = Instant::now();
    let outcome = train(&cfg.train_config(key.loss), train_ds, &key.noise()?, key.train_seed(cfg.seed))?;
    let train_embeddings = outcome.net.embed_all(&train_ds.features)?;
    let test_embeddings = outcome.net.embed_all(&test_ds.features)?;
    let cut_model = if cfg.methods.contains(&ClusterMethod::Multicut) {
        Some(build_cut_model(
            cfg.calibration,
            key.loss,
            &cfg.margins,
            &train_embeddings,
            &train_ds.labels,
            cfg.calibration_pairs,
            &mut seeded(key.cell_seed(cfg.seed, "calibration")),
        )?)
    } else {
        None
    };
    Ok(TrainedCell {
        net: outcome.net,
        train_embeddings,
        test_embeddings,
        cut_model,
        train_seconds: start.elapsed().as_secs_f64(),
    })
}

fn failed(key: &CellKey, method: ClusterMethod, runtime_s: f64, err: String) -> CellResult {
    CellResult {
        key: *key,
        method,
        acc: f64::NAN,
        n_clusters: 0,
        runtime_s,
        error: Some(err),
    }
}

/// A trained cell plus the predicted labels of each method, in method order.
pub type CellArtifacts = (TrainedCell, Vec<Vec<usize>>);

/// Trains one cell and scores it with every configured method. Failures end
/// up in the rows rather than in the return value.
pub fn run_cell(
    cfg: &ExperimentConfig,
    train_ds: &Dataset,
    test_ds: &Dataset,
    key: &CellKey,
) -> (Vec<CellResult>, Option<CellArtifacts>) {
    let trained = match train_cell(cfg, train_ds, test_ds, key) {
        Ok(t) => t,
        Err(e) => {
            log::warn!("cell {key:?} failed in training: {e}");
            let rows = cfg.methods.iter().map(|&m| failed(key, m, 0.0, e.to_string())).collect();
            return (rows, None);
        }
    };
    let options = cfg.cluster_options();
    let mut rows = Vec::with_capacity(cfg.methods.len());
    let mut assignments = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let start = Instant::now();
        let mut rng = seeded(key.cell_seed(cfg.seed, method.token()));
        let res = cluster_embeddings(
            &trained.test_embeddings,
            &test_ds.labels,
            method,
            trained.cut_model.as_ref(),
            &options,
            &mut rng,
        );
        let runtime_s = trained.train_seconds + start.elapsed().as_secs_f64();
        match res {
            Ok((clustering, eval)) => {
                assignments.push(clustering.labels().to_vec());
                rows.push(CellResult {
                    key: *key,
                    method,
                    acc: eval.acc,
                    n_clusters: eval.n_pred_clusters,
                    runtime_s,
                    error: None,
                });
            }
            Err(e) => {
                log::warn!("cell {key:?} failed in {method}: {e}");
                assignments.push(Vec::new());
                rows.push(failed(key, method, runtime_s, e.to_string()));
            }
        }
    }
    (rows, Some((trained, assignments)))
}

fn artifacts_for(
    cfg: &ExperimentConfig,
    test_ds: &Dataset,
    key: &CellKey,
    trained: &TrainedCell,
    assignments: &[Vec<usize>],
) -> Result<Option<LossArtifacts>> {
    let Some(slot) = assignments.iter().position(|a| !a.is_empty()) else {
        return Ok(None);
    };
    let stats = distance_stats(&trained.test_embeddings, &test_ds.labels)?;
    let projection = pca_project(&trained.test_embeddings, 2)?
        .into_iter()
        .map(|p| [p[0], p[1]])
        .collect();
    Ok(Some(LossArtifacts {
        loss: key.loss,
        seed: key.seed,
        stats,
        projection,
        clusters: assignments[slot].clone(),
        labels: test_ds.labels.clone(),
        method: cfg.methods[slot],
    }))
}

/// Runs every cell of the grid in parallel. Rows come back in grid order
/// whatever the scheduling.
pub fn run_grid(cfg: &ExperimentConfig) -> Result<GridResult> {
    cfg.validate()?;
    let (train_ds, test_ds) = cfg.load_data()?;
    run_grid_on(cfg, &train_ds, &test_ds)
}

/// [`run_grid`] on already loaded splits.
pub fn run_grid_on(cfg: &ExperimentConfig, train_ds: &Dataset, test_ds: &Dataset) -> Result<GridResult> {
    cfg.validate()?;
    let cells = grid_cells(cfg);
    // The first noiseless cell of each loss provides that loss's figures.
    let figure_cells: Vec<usize> = cfg
        .losses
        .iter()
        .filter_map(|&l| cells.iter().position(|c| c.loss == l && c.is_clean()))
        .collect();
    let outputs: Vec<(Vec<CellResult>, Option<LossArtifacts>)> = cells
        .par_iter()
        .enumerate()
        .map(|(i, key)| {
            let (rows, trained) = run_cell(cfg, train_ds, test_ds, key);
            let artifacts = match (figure_cells.contains(&i), trained) {
                (true, Some((t, a))) => artifacts_for(cfg, test_ds, key, &t, &a).unwrap_or_else(|e| {
                    log::warn!("no figures for {}: {e}", key.loss);
                    None
                }),
                _ => None,
            };
            (rows, artifacts)
        })
        .collect();
    let mut result = GridResult::default();
    for (rows, artifacts) in outputs {
        result.rows.extend(rows);
        result.artifacts.extend(artifacts);
    }
    Ok(result)
}
