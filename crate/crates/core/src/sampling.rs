//! Triplet sampling with controlled label noise.
//!
//! Noise is injected by redirecting a draw rather than by flipping stored
//! labels: a noisy positive comes from a class other than the anchor's, a
//! noisy negative comes from the anchor's own class. With `neg_random` the
//! negative ignores labels altogether. Every emitted [`Triplet`] records
//! whether each member ended up corrupted, judged against the true labels.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub pos_noise: f64,
    pub neg_noise: f64,
    #[serde(default)]
    pub neg_random: bool,
}

impl NoiseSpec {
    pub fn new(pos_noise: f64, neg_noise: f64, neg_random: bool) -> Result<Self> {
        let spec = NoiseSpec {
            pos_noise,
            neg_noise,
            neg_random,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn clean() -> Self {
        NoiseSpec::default()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("pos_noise", self.pos_noise), ("neg_noise", self.neg_noise)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triplet {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
    pub pos_corrupted: bool,
    pub neg_corrupted: bool,
}

/// Per-class membership lists over a label array.
#[derive(Debug, Clone)]
pub struct TripletSampler<'a> {
    labels: &'a [usize],
    members: Vec<Vec<usize>>,
}

impl<'a> TripletSampler<'a> {
    pub fn new(labels: &'a [usize]) -> Self {
        let classes = labels.iter().max().map_or(0, |&m| m + 1);
        let mut members = vec![Vec::new(); classes];
        for (i, &l) in labels.iter().enumerate() {
            members[l].push(i);
        }
        TripletSampler { labels, members }
    }

    pub fn labels(&self) -> &[usize] {
        self.labels
    }

    /// Uniform draw from the anchor's class, excluding `skip`.
    fn draw_same(&self, class: usize, skip: &[usize], rng: &mut Rng) -> Option<usize> {
        let pool = &self.members[class];
        let excluded = skip.iter().filter(|&&s| self.labels[s] == class).count();
        if pool.len() <= excluded {
            return None;
        }
        loop {
            let c = pool[rng.random_range(0..pool.len())];
            if !skip.contains(&c) {
                return Some(c);
            }
        }
    }

    /// Uniform draw from every class except `class`, excluding `skip`.
    fn draw_other(&self, class: usize, skip: &[usize], rng: &mut Rng) -> Option<usize> {
        let n = self.labels.len();
        let excluded = skip.iter().filter(|&&s| self.labels[s] != class).count();
        if n - self.members[class].len() <= excluded {
            return None;
        }
        loop {
            let c = rng.random_range(0..n);
            if self.labels[c] != class && !skip.contains(&c) {
                return Some(c);
            }
        }
    }

    /// Uniform draw over all samples except `skip`.
    fn draw_any(&self, skip: &[usize], rng: &mut Rng) -> Option<usize> {
        let n = self.labels.len();
        if n <= skip.len() {
            return None;
        }
        loop {
            let c = rng.random_range(0..n);
            if !skip.contains(&c) {
                return Some(c);
            }
        }
    }

    pub fn sample_triplet(&self, anchor: usize, spec: &NoiseSpec, rng: &mut Rng) -> Result<Triplet> {
        let n = self.labels.len();
        if anchor >= n {
            return Err(Error::Shape {
                expected: n,
                actual: anchor,
            });
        }
        let class = self.labels[anchor];
        if self.members[class].len() < 2 {
            return Err(Error::UnsatisfiablePositive { class });
        }
        if self.members[class].len() == n {
            return Err(Error::UnsatisfiableNegative { class });
        }

        let noisy_pos = spec.pos_noise > 0.0 && rng.random_bool(spec.pos_noise);
        let positive = if noisy_pos {
            self.draw_other(class, &[anchor], rng)
        } else {
            self.draw_same(class, &[anchor], rng)
        }
        .expect("pools checked non-empty above");

        let skip = [anchor, positive];
        let negative = if spec.neg_random {
            self.draw_any(&skip, rng)
        } else {
            let noisy_neg = spec.neg_noise > 0.0 && rng.random_bool(spec.neg_noise);
            // A same-class pool can be exhausted by the anchor and positive;
            // fall back to a clean draw then.
            let noisy = if noisy_neg {
                self.draw_same(class, &skip, rng)
            } else {
                None
            };
            noisy.or_else(|| self.draw_other(class, &skip, rng))
        }
        .ok_or(Error::UnsatisfiableNegative { class })?;

        Ok(Triplet {
            anchor,
            positive,
            negative,
            pos_corrupted: self.labels[positive] != class,
            neg_corrupted: self.labels[negative] == class,
        })
    }

    /// `batch_size` triplets with anchors drawn uniformly with replacement.
    pub fn sample_batch(&self, batch_size: usize, spec: &NoiseSpec, rng: &mut Rng) -> Result<Vec<Triplet>> {
        let n = self.labels.len();
        (0..batch_size)
            .map(|_| {
                let anchor = rng.random_range(0..n);
                self.sample_triplet(anchor, spec, rng)
            })
            .collect()
    }
}

pub fn sample_triplet(labels: &[usize], anchor: usize, spec: &NoiseSpec, rng: &mut Rng) -> Result<Triplet> {
    TripletSampler::new(labels).sample_triplet(anchor, spec, rng)
}

pub fn sample_batch(labels: &[usize], batch_size: usize, spec: &NoiseSpec, rng: &mut Rng) -> Result<Vec<Triplet>> {
    if batch_size == 0 {
        return Ok(Vec::new());
    }
    TripletSampler::new(labels).sample_batch(batch_size, spec, rng)
}
