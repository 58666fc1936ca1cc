//! Experiment orchestration: training, clustering, the noise grid and its
//! reports.

pub mod cluster;
pub mod grid;
pub mod report;
pub mod train;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationMode;
use crate::data::{
    cifar10_paths, generate_blob_splits, load_cifar10, BlobSpec, Dataset, Split, CIFAR_DIR_ENV,
};
use crate::error::{Error, Result};
use crate::loss::{LossKind, TripletMargins};
use crate::net::{Checkpoint, EmbeddingNet};
use crate::rng::{derive_seed, tag};

pub use cluster::{cluster_embeddings, ClusterMethod, ClusterOptions, Clustering};
pub use grid::{run_cell, run_grid, CellKey, CellResult, GridResult, NegNoise};
pub use report::emit_reports;
pub use train::{train, TrainConfig, TrainOutcome};

/// Where the data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetConfig {
    Blobs {
        k: usize,
        per_class: usize,
        dim: usize,
        center_separation: f64,
        cluster_std: f64,
        /// Data seed. Derived from the global seed when absent.
        #[serde(default)]
        seed: Option<u64>,
    },
    Cifar10 {
        /// Directory with the binary batches. Falls back to the environment.
        #[serde(default)]
        dir: Option<PathBuf>,
        /// Keep only the first this many training records.
        #[serde(default)]
        max_train: Option<usize>,
        #[serde(default)]
        max_test: Option<usize>,
    },
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig::Blobs {
            k: 10,
            per_class: 100,
            dim: 16,
            center_separation: 10.0,
            cluster_std: 1.0,
            seed: None,
        }
    }
}

fn truncate(mut ds: Dataset, limit: Option<usize>) -> Dataset {
    if let Some(m) = limit {
        ds.features.truncate(m);
        ds.labels.truncate(m);
    }
    ds
}

impl DatasetConfig {
    /// Train and test splits. Blobs share centres across the two splits.
    pub fn load(&self, global_seed: u64) -> Result<(Dataset, Dataset)> {
        match self {
            DatasetConfig::Blobs {
                k,
                per_class,
                dim,
                center_separation,
                cluster_std,
                seed,
            } => generate_blob_splits(&BlobSpec {
                k: *k,
                per_class: *per_class,
                dim: *dim,
                center_separation: *center_separation,
                cluster_std: *cluster_std,
                seed: seed.unwrap_or_else(|| derive_seed(global_seed, &[tag("data")])),
            }),
            DatasetConfig::Cifar10 {
                dir,
                max_train,
                max_test,
            } => {
                let dir = match dir {
                    Some(d) => d.clone(),
                    None => std::env::var_os(CIFAR_DIR_ENV).map(PathBuf::from).ok_or_else(|| {
                        Error::Config(format!("no CIFAR-10 directory: set `dir` or {CIFAR_DIR_ENV}"))
                    })?,
                };
                let train = load_cifar10(&cifar10_paths(&dir, Split::Train), Split::Train)?;
                let test = load_cifar10(&cifar10_paths(&dir, Split::Test), Split::Test)?;
                Ok((truncate(train, *max_train), truncate(test, *max_test)))
            }
        }
    }

    pub fn class_count(&self) -> usize {
        match self {
            DatasetConfig::Blobs { k, .. } => *k,
            DatasetConfig::Cifar10 { .. } => crate::data::CIFAR_CLASSES,
        }
    }
}

/// A full experiment. Field names double as the config-file keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub losses: Vec<LossKind>,
    pub margins: TripletMargins,
    pub pos_rates: Vec<f64>,
    pub neg_rates: Vec<f64>,
    /// Adds a column where negatives are drawn uniformly at random.
    pub neg_random: bool,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Hidden sizes followed by the embedding size.
    pub embedding_dims: Vec<usize>,
    pub normalize_embeddings: bool,
    /// Per-feature standardization with training statistics.
    pub standardize: bool,
    pub methods: Vec<ClusterMethod>,
    pub k: Option<usize>,
    pub kmeans_restarts: usize,
    pub calibration: CalibrationMode,
    /// Same-class and cross-class pairs each for the logistic fit.
    pub calibration_pairs: usize,
    pub seeds: Vec<u64>,
    /// Global seed every random stream derives from.
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Keep only k-nearest-neighbour edges in the multicut graph.
    pub knn: Option<usize>,
    pub refine: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetConfig::default(),
            losses: LossKind::ALL.to_vec(),
            margins: TripletMargins::default(),
            pos_rates: vec![0.0, 0.05, 0.10, 0.20],
            neg_rates: vec![0.0, 0.02, 0.05, 0.07],
            neg_random: true,
            epochs: 20,
            batch_size: 100,
            learning_rate: 1e-3,
            embedding_dims: vec![64, 32],
            normalize_embeddings: false,
            standardize: true,
            methods: vec![ClusterMethod::Multicut, ClusterMethod::Kmeans],
            k: Some(10),
            kmeans_restarts: crate::kmeans::DEFAULT_RESTARTS,
            calibration: CalibrationMode::Auto,
            calibration_pairs: 2000,
            seeds: vec![1, 2, 3, 4, 5],
            seed: 0,
            output_dir: PathBuf::from("results"),
            knn: None,
            refine: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.margins.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if self.losses.is_empty() {
            return Err(Error::Config("losses must not be empty".into()));
        }
        if self.calibration == CalibrationMode::Analytic {
            if let Some(l) = self.losses.iter().find(|l| !l.has_intra_margin()) {
                return Err(Error::Config(format!(
                    "analytic calibration needs triplet2 or triplet3, not {l}"
                )));
            }
        }
        if self.methods.contains(&ClusterMethod::Kmeans) && self.k.is_none() {
            return Err(Error::Config("kmeans requires k".into()));
        }
        if self.k == Some(0) {
            return Err(Error::Config("k must be positive".into()));
        }
        for &r in self.pos_rates.iter().chain(&self.neg_rates) {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Config(format!("noise rate {r} outside [0, 1]")));
            }
        }
        if self.batch_size == 0 || self.embedding_dims.is_empty() || self.embedding_dims.contains(&0) {
            return Err(Error::Config(
                "batch_size and every embedding dimension must be positive".into(),
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.kmeans_restarts == 0 {
            return Err(Error::Config("kmeans_restarts must be positive".into()));
        }
        if self.calibration_pairs == 0 {
            return Err(Error::Config("calibration_pairs must be positive".into()));
        }
        Ok(())
    }

    pub fn train_config(&self, loss: LossKind) -> TrainConfig {
        TrainConfig {
            loss,
            margins: self.margins,
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            embedding_dims: self.embedding_dims.clone(),
            normalize_embeddings: self.normalize_embeddings,
        }
    }

    pub fn cluster_options(&self) -> ClusterOptions {
        ClusterOptions {
            k: self.k,
            restarts: self.kmeans_restarts,
            knn: self.knn,
            refine: self.refine,
        }
    }

    /// Loads both splits, standardizing with training statistics if asked.
    pub fn load_data(&self) -> Result<(Dataset, Dataset)> {
        let (mut train, mut test) = self.dataset.load(self.seed)?;
        if self.standardize {
            let stats = crate::data::column_stats(&train.features);
            crate::data::apply_standardization(&mut train.features, &stats);
            crate::data::apply_standardization(&mut test.features, &stats);
        }
        Ok((train, test))
    }
}

/// A trained network together with the loss settings it was trained under,
/// so clustering can check calibration choices against them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(flatten)]
    pub checkpoint: Checkpoint,
    pub loss: LossKind,
    pub margins: TripletMargins,
}

impl ModelFile {
    pub fn new(net: &EmbeddingNet, seed: u64, loss: LossKind, margins: TripletMargins) -> Self {
        ModelFile {
            checkpoint: Checkpoint::from_net(net, seed),
            loss,
            margins,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = ExperimentConfig::default();
        let s = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&s).unwrap(), cfg);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            losses = ["triplet3"]
            seeds = [7]
            [dataset]
            kind = "blobs"
            k = 3
            per_class = 5
            dim = 2
            center_separation = 4.0
            cluster_std = 0.1
            "#,
        )
        .unwrap();
        assert_eq!(cfg.losses, vec![LossKind::Triplet3]);
        assert_eq!(cfg.epochs, 20);
        assert_eq!(cfg.dataset.class_count(), 3);
    }

    #[test]
    fn invariants_are_enforced() {
        let bad = |f: fn(&mut ExperimentConfig)| {
            let mut c = ExperimentConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.seeds.clear()));
        assert!(bad(|c| c.k = None));
        assert!(bad(|c| c.calibration = CalibrationMode::Analytic));
        assert!(bad(|c| c.pos_rates.push(1.5)));
        let ok = ExperimentConfig {
            calibration: CalibrationMode::Analytic,
            losses: vec![LossKind::Triplet2, LossKind::Triplet3],
            ..ExperimentConfig::default()
        };
        ok.validate().unwrap();
    }

    #[test]
    fn model_file_round_trips_and_loads_as_checkpoint() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        let net = EmbeddingNet::new(&[3, 4, 2], &mut crate::rng::seeded(1)).unwrap();
        let m = ModelFile::new(&net, 11, LossKind::Triplet2, TripletMargins::default());
        m.save(&p).unwrap();
        assert_eq!(ModelFile::load(&p).unwrap(), m);
        assert_eq!(EmbeddingNet::load(&p).unwrap(), (net, 11));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml_str("epoch = 3").is_err());
    }
}
