//! From embedding distances to cut probabilities to multicut edge costs.
//!
//! A pair's cut probability comes either from a 1-D logistic regression on
//! distance (fitted on labelled training pairs) or from a sigmoid ramp
//! centred on the closed-form threshold `tau = sqrt((alpha + beta) / 2)`.
//! Edge costs are `logit(1 - p_cut)`: likely-cut pairs get negative costs,
//! which the minimization then prefers to cut.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::TripletMargins;
use crate::rng::Rng;

pub const DEFAULT_CLAMP: f64 = 1e-6;

/// Euclidean (not squared) distance.
pub fn pairwise_distance(fi: &[f64], fj: &[f64]) -> Result<f64> {
    if fi.len() != fj.len() {
        return Err(Error::Shape {
            expected: fi.len(),
            actual: fj.len(),
        });
    }
    Ok(crate::squared_distance(fi, fj).sqrt())
}

/// `sqrt((alpha + beta) / 2)` for validated positive margins.
pub fn analytic_threshold(m: &TripletMargins) -> Result<f64> {
    if !(m.alpha > 0.0 && m.beta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold needs positive margins (alpha={}, beta={})",
            m.alpha, m.beta
        )));
    }
    Ok(((m.alpha + m.beta) / 2.0).sqrt())
}

/// Same formula with `beta = 0` permitted.
pub fn analytic_threshold_override(alpha: f64, beta: f64) -> Result<f64> {
    if !(alpha > 0.0 && beta >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold needs alpha > 0 and beta >= 0 (alpha={alpha}, beta={beta})"
        )));
    }
    Ok(((alpha + beta) / 2.0).sqrt())
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Signed multicut cost for a cut probability: `logit(1 - p_cut)` after
/// clamping `p_cut` into `[clamp, 1 - clamp]`.
pub fn edge_cost(p_cut: f64, clamp: f64) -> f64 {
    let p = p_cut.clamp(clamp, 1.0 - clamp);
    logit(1.0 - p)
}

/// `p_cut = sigmoid(weight * d + bias)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weight: f64,
    pub bias: f64,
}

impl LogisticModel {
    /// Distance at which the cut probability crosses one half.
    pub fn decision_threshold(&self) -> Option<f64> {
        (self.weight != 0.0).then(|| -self.bias / self.weight)
    }
}

/// `p_cut = sigmoid((d - tau) / scale)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdModel {
    pub tau: f64,
    pub scale: f64,
}

impl ThresholdModel {
    pub fn new(tau: f64, scale: f64) -> Result<Self> {
        if !(tau > 0.0 && scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "threshold model needs tau > 0 and scale > 0 (tau={tau}, scale={scale})"
            )));
        }
        Ok(ThresholdModel { tau, scale })
    }

    /// Threshold from the margins with the default ramp `scale = tau / 8`.
    pub fn from_margins(m: &TripletMargins) -> Result<Self> {
        let tau = analytic_threshold(m)?;
        if (m.beta - m.alpha / 2.0).abs() > 1e-12 {
            log::warn!(
                "beta = {} differs from alpha / 2 = {}; the derived threshold assumes positives lie within beta",
                m.beta,
                m.alpha / 2.0
            );
        }
        ThresholdModel::new(tau, tau / 8.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CutModel {
    Logistic(LogisticModel),
    Threshold(ThresholdModel),
}

impl CutModel {
    pub fn cut_probability(&self, d: f64) -> f64 {
        match *self {
            CutModel::Logistic(m) => sigmoid(m.weight * d + m.bias),
            CutModel::Threshold(m) => sigmoid((d - m.tau) / m.scale),
        }
    }

    pub fn edge_cost(&self, d: f64, clamp: f64) -> f64 {
        edge_cost(self.cut_probability(d), clamp)
    }

    pub fn decision_threshold(&self) -> Option<f64> {
        match self {
            CutModel::Logistic(m) => m.decision_threshold(),
            CutModel::Threshold(m) => Some(m.tau),
        }
    }
}

pub fn cut_probability(model: &CutModel, d: f64) -> f64 {
    model.cut_probability(d)
}

/// How cut probabilities are obtained for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CalibrationMode {
    /// Fit a logistic model on labelled training pairs.
    Regression,
    /// Use the closed-form threshold from the margins.
    Analytic,
    /// Analytic for losses with an intra-class margin, regression otherwise.
    Auto,
}

impl CalibrationMode {
    pub fn token(self) -> &'static str {
        match self {
            CalibrationMode::Regression => "regression",
            CalibrationMode::Analytic => "analytic",
            CalibrationMode::Auto => "auto",
        }
    }
}

impl fmt::Display for CalibrationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for CalibrationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regression" => Ok(CalibrationMode::Regression),
            "analytic" => Ok(CalibrationMode::Analytic),
            "auto" => Ok(CalibrationMode::Auto),
            other => Err(Error::Parse(format!(
                "unknown calibration mode `{other}` (expected regression, analytic or auto)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    pub step: f64,
    pub l2: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            step: 0.1,
            l2: 1e-4,
            tolerance: 1e-8,
            max_iterations: 10_000,
        }
    }
}

/// Fits `p(cut | d) = sigmoid(w d + b)` by gradient ascent on the mean
/// L2-regularized log-likelihood. `labels[i]` is `true` for pairs that
/// belong to different classes.
///
/// Distances are standardized internally for conditioning and the
/// coefficients mapped back to raw distance units.
pub fn fit_logistic(distances: &[f64], labels: &[bool], config: &LogisticConfig) -> Result<LogisticModel> {
    if distances.len() != labels.len() {
        return Err(Error::Shape {
            expected: distances.len(),
            actual: labels.len(),
        });
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::DegenerateFit("both pair classes must be present".into()));
    }
    if distances.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFinite("distances"));
    }
    let n = distances.len() as f64;
    let mean = distances.iter().sum::<f64>() / n;
    let sd = (distances.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n).sqrt();
    if sd == 0.0 {
        return Err(Error::DegenerateFit("all distances are identical".into()));
    }
    let z: Vec<f64> = distances.iter().map(|d| (d - mean) / sd).collect();

    let (mut w, mut b) = (0.0f64, 0.0f64);
    for _ in 0..config.max_iterations {
        let (mut gw, mut gb) = (0.0, 0.0);
        for (&zi, &yi) in z.iter().zip(labels) {
            let r = f64::from(u8::from(yi)) - sigmoid(w * zi + b);
            gw += r * zi;
            gb += r;
        }
        gw = gw / n - config.l2 * w;
        gb /= n;
        if (gw * gw + gb * gb).sqrt() < config.tolerance {
            break;
        }
        w += config.step * gw;
        b += config.step * gb;
    }
    Ok(LogisticModel {
        weight: w / sd,
        bias: b - w * mean / sd,
    })
}

/// Draws labelled pairs for fitting a logistic model: `per_side` same-class
/// pairs and `per_side` cross-class pairs, each with distinct endpoints.
/// Returns distances and `true` for cross-class pairs.
pub fn labelled_pairs(
    embeddings: &[Vec<f64>],
    labels: &[usize],
    per_side: usize,
    rng: &mut Rng,
) -> Result<(Vec<f64>, Vec<bool>)> {
    let n = embeddings.len();
    if labels.len() != n {
        return Err(Error::Shape {
            expected: n,
            actual: labels.len(),
        });
    }
    let classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut members = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    let pairable: Vec<usize> = (0..classes).filter(|&c| members[c].len() >= 2).collect();
    if pairable.is_empty() || members.iter().filter(|m| !m.is_empty()).count() < 2 {
        return Err(Error::DegenerateFit(
            "need a class with two members and at least two classes".into(),
        ));
    }
    // Same-class pairs are drawn proportionally to class pair counts.
    let weights: Vec<f64> = pairable
        .iter()
        .map(|&c| {
            let m = members[c].len() as f64;
            m * (m - 1.0)
        })
        .collect();
    let total: f64 = weights.iter().sum();

    let mut distances = Vec::with_capacity(2 * per_side);
    let mut cut = Vec::with_capacity(2 * per_side);
    for _ in 0..per_side {
        let mut r = rng.random_range(0.0..total);
        let mut class = *pairable.last().unwrap();
        for (&c, &w) in pairable.iter().zip(&weights) {
            if r < w {
                class = c;
                break;
            }
            r -= w;
        }
        let pool = &members[class];
        let i = pool[rng.random_range(0..pool.len())];
        let j = loop {
            let j = pool[rng.random_range(0..pool.len())];
            if j != i {
                break j;
            }
        };
        distances.push(pairwise_distance(&embeddings[i], &embeddings[j])?);
        cut.push(false);
    }
    for _ in 0..per_side {
        let (i, j) = loop {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if labels[i] != labels[j] {
                break (i, j);
            }
        };
        distances.push(pairwise_distance(&embeddings[i], &embeddings[j])?);
        cut.push(true);
    }
    Ok((distances, cut))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn distance_examples() {
        assert_eq!(pairwise_distance(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(pairwise_distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        let a = [0.3, -1.1, 2.5];
        let b = [1.7, 0.4, -0.2];
        assert_eq!(pairwise_distance(&a, &b).unwrap(), pairwise_distance(&b, &a).unwrap());
        assert!(pairwise_distance(&[0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn threshold_examples() {
        let tau = analytic_threshold(&TripletMargins::default()).unwrap();
        assert!((tau - 0.6f64.sqrt()).abs() < 1e-15);
        assert!((tau - 0.774_597).abs() < 1e-6);
        assert_eq!(analytic_threshold(&TripletMargins { alpha: 1.0, beta: 1.0 }).unwrap(), 1.0);
        assert_eq!(analytic_threshold_override(2.0, 0.0).unwrap(), 1.0);
        assert!(analytic_threshold(&TripletMargins { alpha: 2.0, beta: 0.0 }).is_err());
        assert!(analytic_threshold_override(0.0, 1.0).is_err());
    }

    #[test]
    fn threshold_squared_is_mean_margin() {
        for (a, b) in [(0.8, 0.4), (2.0, 1.0), (0.3, 0.1), (5.0, 2.5)] {
            let tau = analytic_threshold(&TripletMargins { alpha: a, beta: b }).unwrap();
            assert!((tau * tau - (a + b) / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn cut_probability_examples() {
        let m = CutModel::Threshold(ThresholdModel::new(0.7746, 0.1).unwrap());
        assert_eq!(m.cut_probability(0.7746), 0.5);
        // sigmoid(-7.746) = 1 / (1 + e^7.746) = 4.3228e-4
        assert!((m.cut_probability(0.0) - 4.3228e-4).abs() < 1e-7);
        let l = CutModel::Logistic(LogisticModel { weight: 10.0, bias: -5.0 });
        assert_eq!(l.cut_probability(0.5), 0.5);
    }

    #[test]
    fn edge_cost_examples() {
        assert_eq!(edge_cost(0.5, DEFAULT_CLAMP), 0.0);
        assert!((edge_cost(0.9, DEFAULT_CLAMP) + 9f64.ln()).abs() < 1e-12);
        assert!((edge_cost(0.9, DEFAULT_CLAMP) + 2.1972).abs() < 1e-4);
        assert!((edge_cost(1.0, DEFAULT_CLAMP) + 13.8155).abs() < 1e-4);
        assert!(edge_cost(0.0, DEFAULT_CLAMP).is_finite());
    }

    #[test]
    fn edge_cost_is_decreasing_and_antisymmetric() {
        let ps: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
        for w in ps.windows(2) {
            assert!(edge_cost(w[1], DEFAULT_CLAMP) < edge_cost(w[0], DEFAULT_CLAMP));
        }
        for &p in &ps {
            let s = edge_cost(p, DEFAULT_CLAMP) + edge_cost(1.0 - p, DEFAULT_CLAMP);
            assert!(s.abs() < 1e-12);
        }
    }

    #[test]
    fn threshold_cost_changes_sign_at_tau() {
        let m = CutModel::Threshold(ThresholdModel::from_margins(&TripletMargins::default()).unwrap());
        let tau = 0.6f64.sqrt();
        assert!(m.edge_cost(tau - 1e-6, DEFAULT_CLAMP) > 0.0);
        assert!(m.edge_cost(tau + 1e-6, DEFAULT_CLAMP) < 0.0);
        assert!(m.edge_cost(tau, DEFAULT_CLAMP).abs() < 1e-12);
    }

    #[test]
    fn separable_fit_threshold_lies_in_gap() {
        let d = [0.1, 0.2, 0.9, 1.0];
        let y = [false, false, true, true];
        let m = fit_logistic(&d, &y, &LogisticConfig::default()).unwrap();
        let t = m.decision_threshold().unwrap();
        assert!(t > 0.2 && t < 0.9, "{t}");
        let cm = CutModel::Logistic(m);
        assert!(cm.cut_probability(0.1) < 0.5 && cm.cut_probability(0.2) < 0.5);
        assert!(cm.cut_probability(0.9) > 0.5 && cm.cut_probability(1.0) > 0.5);
    }

    #[test]
    fn single_class_fit_is_rejected() {
        let err = fit_logistic(&[0.1, 0.5], &[true, true], &LogisticConfig::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateFit(_)));
        assert!(fit_logistic(&[0.1, 0.5], &[true], &LogisticConfig::default()).is_err());
    }

    #[test]
    fn gaussian_fit_recovers_density_crossing() {
        // Equal variances and priors: the densities cross at the midpoint 0.75.
        let mut rng = seeded(31);
        let near = Normal::new(0.5, 0.1).unwrap();
        let far = Normal::new(1.0, 0.1).unwrap();
        let mut d = Vec::new();
        let mut y = Vec::new();
        for _ in 0..2000 {
            d.push(near.sample(&mut rng));
            y.push(false);
            d.push(far.sample(&mut rng));
            y.push(true);
        }
        let t = fit_logistic(&d, &y, &LogisticConfig::default())
            .unwrap()
            .decision_threshold()
            .unwrap();
        assert!((t - 0.75).abs() / 0.75 < 0.05, "{t}");
    }

    #[test]
    fn labelled_pairs_are_balanced_and_truthful() {
        let emb: Vec<Vec<f64>> = (0..30).map(|i| vec![(i % 3) as f64 * 10.0, i as f64 * 0.01]).collect();
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let (d, y) = labelled_pairs(&emb, &labels, 200, &mut seeded(3)).unwrap();
        assert_eq!(d.len(), 400);
        assert_eq!(y.iter().filter(|&&c| c).count(), 200);
        for (di, &yi) in d.iter().zip(&y) {
            assert_eq!(yi, *di > 5.0);
        }
    }
}
