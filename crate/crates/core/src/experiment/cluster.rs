use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::calibration::{
    fit_logistic, labelled_pairs, pairwise_distance, CalibrationMode, CutModel, LogisticConfig,
    ThresholdModel, DEFAULT_CLAMP,
};
use crate::error::{Error, Result};
use crate::kmeans::{kmeans, KMeansResult};
use crate::loss::{LossKind, TripletMargins};
use crate::metrics::{accuracy, ClusterEval};
use crate::multicut::{gaec, kl_refine, CostGraph, Partition};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterMethod {
    Multicut,
    Kmeans,
}

impl ClusterMethod {
    pub fn token(self) -> &'static str {
        match self {
            ClusterMethod::Multicut => "multicut",
            ClusterMethod::Kmeans => "kmeans",
        }
    }
}

impl fmt::Display for ClusterMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for ClusterMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multicut" => Ok(ClusterMethod::Multicut),
            "kmeans" => Ok(ClusterMethod::Kmeans),
            other => Err(Error::Parse(format!(
                "unknown clustering method `{other}` (expected multicut or kmeans)"
            ))),
        }
    }
}

/// Concrete calibration for a loss: `auto` becomes analytic for losses with
/// an intra-class margin and regression otherwise. Analytic with `triplet1`
/// is a configuration error.
pub fn resolve_calibration(mode: CalibrationMode, loss: LossKind) -> Result<CalibrationMode> {
    match (mode, loss.has_intra_margin()) {
        (CalibrationMode::Auto, true) => Ok(CalibrationMode::Analytic),
        (CalibrationMode::Auto, false) => Ok(CalibrationMode::Regression),
        (CalibrationMode::Analytic, false) => Err(Error::Config(format!(
            "analytic calibration needs triplet2 or triplet3, not {loss}"
        ))),
        (m, _) => Ok(m),
    }
}

/// Builds the cut-probability model. Regression fits on `pairs_per_side`
/// same-class and cross-class pairs of the *training* embeddings.
pub fn build_cut_model(
    mode: CalibrationMode,
    loss: LossKind,
    margins: &TripletMargins,
    train_embeddings: &[Vec<f64>],
    train_labels: &[usize],
    pairs_per_side: usize,
    rng: &mut Rng,
) -> Result<CutModel> {
    match resolve_calibration(mode, loss)? {
        CalibrationMode::Analytic => Ok(CutModel::Threshold(ThresholdModel::from_margins(margins)?)),
        _ => {
            let (d, y) = labelled_pairs(train_embeddings, train_labels, pairs_per_side, rng)?;
            Ok(CutModel::Logistic(fit_logistic(&d, &y, &LogisticConfig::default())?))
        }
    }
}

/// Cost graph over embeddings. With `knn = Some(k)` only edges where one
/// endpoint is among the other's `k` nearest neighbours are kept.
pub fn embedding_graph(embeddings: &[Vec<f64>], model: &CutModel, knn: Option<usize>) -> Result<CostGraph> {
    let n = embeddings.len();
    let cost = |u: usize, v: usize| -> Result<f64> {
        Ok(model.edge_cost(pairwise_distance(&embeddings[u], &embeddings[v])?, DEFAULT_CLAMP))
    };
    match knn {
        None => {
            let mut err = None;
            let g = CostGraph::complete(n, |u, v| {
                cost(u, v).unwrap_or_else(|e| {
                    err.get_or_insert(e);
                    0.0
                })
            })?;
            match err {
                Some(e) => Err(e),
                None => Ok(g),
            }
        }
        Some(k) => {
            let mut keep = std::collections::BTreeSet::new();
            for u in 0..n {
                let mut d: Vec<(f64, usize)> = (0..n)
                    .filter(|&v| v != u)
                    .map(|v| (crate::squared_distance(&embeddings[u], &embeddings[v]), v))
                    .collect();
                d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                for &(_, v) in d.iter().take(k) {
                    keep.insert((u.min(v), u.max(v)));
                }
            }
            let edges = keep
                .into_iter()
                .map(|(u, v)| cost(u, v).map(|c| (u, v, c)))
                .collect::<Result<Vec<_>>>()?;
            CostGraph::from_edges(n, edges)
        }
    }
}

/// GAEC followed, optionally, by local refinement.
pub fn solve_multicut(g: &CostGraph, refine: bool) -> Partition {
    let p = gaec(g);
    if refine {
        kl_refine(g, &p)
    } else {
        p
    }
}

#[derive(Debug, Clone)]
pub enum Clustering {
    Multicut(Partition),
    Kmeans(KMeansResult),
}

impl Clustering {
    pub fn labels(&self) -> &[usize] {
        match self {
            Clustering::Multicut(p) => p.labels(),
            Clustering::Kmeans(r) => &r.assignment,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClusterOptions {
    pub k: Option<usize>,
    pub restarts: usize,
    pub knn: Option<usize>,
    pub refine: bool,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        ClusterOptions {
            k: None,
            restarts: crate::kmeans::DEFAULT_RESTARTS,
            knn: None,
            refine: true,
        }
    }
}

/// Clusters precomputed embeddings and scores them against `labels`.
pub fn cluster_embeddings(
    embeddings: &[Vec<f64>],
    labels: &[usize],
    method: ClusterMethod,
    cut_model: Option<&CutModel>,
    options: &ClusterOptions,
    rng: &mut Rng,
) -> Result<(Clustering, ClusterEval)> {
    let clustering = match method {
        ClusterMethod::Multicut => {
            let model = cut_model
                .ok_or_else(|| Error::Config("multicut clustering needs a calibration model".into()))?;
            let g = embedding_graph(embeddings, model, options.knn)?;
            Clustering::Multicut(solve_multicut(&g, options.refine))
        }
        ClusterMethod::Kmeans => {
            let k = options
                .k
                .ok_or_else(|| Error::Config("k-means needs the number of clusters k".into()))?;
            Clustering::Kmeans(kmeans(embeddings, k, options.restarts, rng)?)
        }
    };
    let eval = accuracy(clustering.labels(), labels)?;
    Ok((clustering, eval))
}
