//! Triplet losses on embedding vectors.
//!
//! All three variants work on squared Euclidean distances between the anchor
//! embedding and its positive/negative partners:
//!
//! * `triplet1`: `[d(a,p) - d(a,n) + alpha]+`
//! * `triplet2`: `triplet1 + [d(a,p) - beta]+`
//! * `triplet3`: `[alpha - d(a,n)]+ + [d(a,p) - beta]+`
//!
//! The derivative of a hinge at its kink is taken to be zero.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::squared_distance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Triplet1,
    Triplet2,
    Triplet3,
}

impl LossKind {
    pub const ALL: [LossKind; 3] = [LossKind::Triplet1, LossKind::Triplet2, LossKind::Triplet3];

    pub fn token(self) -> &'static str {
        match self {
            LossKind::Triplet1 => "triplet1",
            LossKind::Triplet2 => "triplet2",
            LossKind::Triplet3 => "triplet3",
        }
    }

    /// Whether the loss bounds positive distances by `beta`, which is what
    /// makes the closed-form threshold meaningful.
    pub fn has_intra_margin(self) -> bool {
        !matches!(self, LossKind::Triplet1)
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "triplet1" => Ok(LossKind::Triplet1),
            "triplet2" => Ok(LossKind::Triplet2),
            "triplet3" => Ok(LossKind::Triplet3),
            other => Err(Error::Parse(format!(
                "unknown loss `{other}` (expected triplet1, triplet2 or triplet3)"
            ))),
        }
    }
}

/// Inter-class margin `alpha` and intra-class margin `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripletMargins {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for TripletMargins {
    fn default() -> Self {
        TripletMargins {
            alpha: 0.8,
            beta: 0.4,
        }
    }
}

impl TripletMargins {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let m = TripletMargins { alpha, beta };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.beta.is_finite()) {
            return Err(Error::NonFinite("margins"));
        }
        if self.alpha <= 0.0 || self.beta <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "margins must be positive (alpha={}, beta={})",
                self.alpha, self.beta
            )));
        }
        if self.beta >= self.alpha {
            return Err(Error::InvalidParameter(format!(
                "beta ({}) must be smaller than alpha ({})",
                self.beta, self.alpha
            )));
        }
        Ok(())
    }
}

/// Loss value and gradients with respect to the three embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletGrad {
    pub loss: f64,
    pub anchor: Vec<f64>,
    pub positive: Vec<f64>,
    pub negative: Vec<f64>,
}

fn check(fa: &[f64], fp: &[f64], fn_: &[f64]) -> Result<()> {
    for v in [fp, fn_] {
        if v.len() != fa.len() {
            return Err(Error::Shape {
                expected: fa.len(),
                actual: v.len(),
            });
        }
    }
    if fa.iter().chain(fp).chain(fn_).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("triplet embeddings"));
    }
    Ok(())
}

/// Accumulates `scale * d||x - y||^2` into the gradients of `x` and `y`.
fn add_sq_dist_grad(gx: &mut [f64], gy: &mut [f64], x: &[f64], y: &[f64], scale: f64) {
    for i in 0..x.len() {
        let d = 2.0 * scale * (x[i] - y[i]);
        gx[i] += d;
        gy[i] -= d;
    }
}

fn evaluate(kind: LossKind, fa: &[f64], fp: &[f64], fn_: &[f64], m: TripletMargins) -> Result<TripletGrad> {
    check(fa, fp, fn_)?;
    let d_pos = squared_distance(fa, fp);
    let d_neg = squared_distance(fa, fn_);
    let dim = fa.len();
    let mut g = TripletGrad {
        loss: 0.0,
        anchor: vec![0.0; dim],
        positive: vec![0.0; dim],
        negative: vec![0.0; dim],
    };

    let relative = d_pos - d_neg + m.alpha;
    let absolute_neg = m.alpha - d_neg;
    let absolute_pos = d_pos - m.beta;

    if kind != LossKind::Triplet3 && relative > 0.0 {
        g.loss += relative;
        add_sq_dist_grad(&mut g.anchor, &mut g.positive, fa, fp, 1.0);
        add_sq_dist_grad(&mut g.anchor, &mut g.negative, fa, fn_, -1.0);
    }
    if kind == LossKind::Triplet3 && absolute_neg > 0.0 {
        g.loss += absolute_neg;
        add_sq_dist_grad(&mut g.anchor, &mut g.negative, fa, fn_, -1.0);
    }
    if kind != LossKind::Triplet1 && absolute_pos > 0.0 {
        g.loss += absolute_pos;
        add_sq_dist_grad(&mut g.anchor, &mut g.positive, fa, fp, 1.0);
    }
    Ok(g)
}

pub fn loss1(fa: &[f64], fp: &[f64], fn_: &[f64], m: TripletMargins) -> Result<TripletGrad> {
    evaluate(LossKind::Triplet1, fa, fp, fn_, m)
}

pub fn loss2(fa: &[f64], fp: &[f64], fn_: &[f64], m: TripletMargins) -> Result<TripletGrad> {
    evaluate(LossKind::Triplet2, fa, fp, fn_, m)
}

pub fn loss3(fa: &[f64], fp: &[f64], fn_: &[f64], m: TripletMargins) -> Result<TripletGrad> {
    evaluate(LossKind::Triplet3, fa, fp, fn_, m)
}

pub fn triplet_loss(
    kind: LossKind,
    fa: &[f64],
    fp: &[f64],
    fn_: &[f64],
    m: TripletMargins,
) -> Result<TripletGrad> {
    evaluate(kind, fa, fp, fn_, m)
}
