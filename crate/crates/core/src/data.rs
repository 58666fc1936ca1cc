//! Datasets: synthetic Gaussian blobs, CIFAR-10 binary batches, CSV
//! exchange, and a PCA projection for 2-D plots.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub classes: usize,
    pub split: Split,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>, classes: usize, split: Split) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::Shape {
                expected: labels.len(),
                actual: features.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::InvalidParameter(format!(
                "label {bad} outside [0, {classes})"
            )));
        }
        if let Some(first) = features.first() {
            if let Some(row) = features.iter().find(|r| r.len() != first.len()) {
                return Err(Error::Shape {
                    expected: first.len(),
                    actual: row.len(),
                });
            }
        }
        Ok(Dataset {
            features,
            labels,
            classes,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    /// Z-scores every feature column in place. Constant columns are centred only.
    pub fn standardize(&mut self) {
        let stats = column_stats(&self.features);
        apply_standardization(&mut self.features, &stats);
    }
}

/// Per-column mean and population standard deviation.
pub fn column_stats(rows: &[Vec<f64>]) -> Vec<(f64, f64)> {
    let Some(first) = rows.first() else {
        return Vec::new();
    };
    let n = rows.len() as f64;
    (0..first.len())
        .map(|j| {
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            (mean, var.sqrt())
        })
        .collect()
}

pub fn apply_standardization(rows: &mut [Vec<f64>], stats: &[(f64, f64)]) {
    for r in rows {
        for (x, &(m, s)) in r.iter_mut().zip(stats) {
            *x -= m;
            if s > 0.0 {
                *x /= s;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub k: usize,
    pub per_class: usize,
    pub dim: usize,
    pub center_separation: f64,
    pub cluster_std: f64,
    pub seed: u64,
}

impl BlobSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.per_class == 0 || self.dim == 0 {
            return Err(Error::InvalidParameter(
                "blob counts and dimension must be positive".into(),
            ));
        }
        if self.center_separation.is_nan() || self.center_separation <= 0.0 || !(0.0..f64::INFINITY).contains(&self.cluster_std) {
            return Err(Error::InvalidParameter(format!(
                "need separation > 0 and std >= 0 (separation={}, std={})",
                self.center_separation, self.cluster_std
            )));
        }
        Ok(())
    }
}

const MAX_CENTER_ROUNDS: usize = 1000;

/// Class centres drawn uniformly in a cube centred at the origin whose side
/// is `2 * separation * k^(1/dim)`, redrawn until every pair of centres is at
/// least `center_separation` apart.
pub fn blob_centers(spec: &BlobSpec) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let mut rng = seeded(derive_seed(spec.seed, &[tag("centers")]));
    let side = 2.0 * spec.center_separation * (spec.k as f64).powf(1.0 / spec.dim as f64);
    let min_sq = spec.center_separation * spec.center_separation;
    for _ in 0..MAX_CENTER_ROUNDS {
        let centers: Vec<Vec<f64>> = (0..spec.k)
            .map(|_| (0..spec.dim).map(|_| side * (rng.random::<f64>() - 0.5)).collect())
            .collect();
        let ok = (0..spec.k).all(|a| {
            (a + 1..spec.k).all(|b| crate::squared_distance(&centers[a], &centers[b]) >= min_sq)
        });
        if ok {
            return Ok(centers);
        }
    }
    Err(Error::Generation(format!(
        "could not place {} centres {} apart in {} dimensions after {MAX_CENTER_ROUNDS} rounds",
        spec.k, spec.center_separation, spec.dim
    )))
}

fn sample_around(centers: &[Vec<f64>], spec: &BlobSpec, stream: u64, split: Split) -> Result<Dataset> {
    let mut rng = seeded(derive_seed(spec.seed, &[stream]));
    let mut features = Vec::with_capacity(spec.k * spec.per_class);
    let mut labels = Vec::with_capacity(spec.k * spec.per_class);
    for (class, c) in centers.iter().enumerate() {
        for _ in 0..spec.per_class {
            features.push(
                c.iter()
                    .map(|&m| {
                        let z: f64 = rng.sample(StandardNormal);
                        m + spec.cluster_std * z
                    })
                    .collect(),
            );
            labels.push(class);
        }
    }
    Dataset::new(features, labels, spec.k, split)
}

/// One split of isotropic Gaussian blobs, grouped by class.
pub fn generate_blobs(spec: &BlobSpec) -> Result<Dataset> {
    let centers = blob_centers(spec)?;
    sample_around(&centers, spec, tag("train"), Split::Train)
}

/// Disjoint train and test draws around the same centres.
pub fn generate_blob_splits(spec: &BlobSpec) -> Result<(Dataset, Dataset)> {
    let centers = blob_centers(spec)?;
    Ok((
        sample_around(&centers, spec, tag("train"), Split::Train)?,
        sample_around(&centers, spec, tag("test"), Split::Test)?,
    ))
}

pub const CIFAR_IMAGE_BYTES: usize = 3072;
pub const CIFAR_RECORD_BYTES: usize = 1 + CIFAR_IMAGE_BYTES;
pub const CIFAR_BATCH_RECORDS: usize = 10_000;
pub const CIFAR_CLASSES: usize = 10;

/// Environment variable naming the directory holding the CIFAR-10 batches.
pub const CIFAR_DIR_ENV: &str = "TRIPLETCUT_CIFAR10_DIR";

/// Parses CIFAR-10 binary records: one label byte then 3072 channel-major
/// pixel bytes (1024 red, 1024 green, 1024 blue). Pixels are scaled to [0, 1].
pub fn parse_cifar_records(bytes: &[u8], path: &Path, expected_records: Option<usize>) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    if !bytes.len().is_multiple_of(CIFAR_RECORD_BYTES) {
        return Err(Error::Format {
            path: path.to_path_buf(),
            reason: format!(
                "{} bytes is not a whole number of {CIFAR_RECORD_BYTES}-byte records",
                bytes.len()
            ),
        });
    }
    let records = bytes.len() / CIFAR_RECORD_BYTES;
    if let Some(expected) = expected_records {
        if records != expected {
            return Err(Error::Format {
                path: path.to_path_buf(),
                reason: format!(
                    "expected {} bytes ({expected} records), found {}",
                    expected * CIFAR_RECORD_BYTES,
                    bytes.len()
                ),
            });
        }
    }
    let mut features = Vec::with_capacity(records);
    let mut labels = Vec::with_capacity(records);
    for (record, chunk) in bytes.chunks_exact(CIFAR_RECORD_BYTES).enumerate() {
        let label = chunk[0];
        if usize::from(label) >= CIFAR_CLASSES {
            return Err(Error::CorruptRecord {
                path: path.to_path_buf(),
                record,
                label,
            });
        }
        labels.push(usize::from(label));
        features.push(chunk[1..].iter().map(|&b| f64::from(b) / 255.0).collect());
    }
    Ok((features, labels))
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    Ok(buf)
}

/// Loads official CIFAR-10 batch files (exactly 10,000 records each).
pub fn load_cifar10(paths: &[PathBuf], split: Split) -> Result<Dataset> {
    load_cifar_with(paths, split, Some(CIFAR_BATCH_RECORDS))
}

/// Loads CIFAR-10-format files holding any whole number of records.
pub fn load_cifar_records(paths: &[PathBuf], split: Split) -> Result<Dataset> {
    load_cifar_with(paths, split, None)
}

fn load_cifar_with(paths: &[PathBuf], split: Split, expected: Option<usize>) -> Result<Dataset> {
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for p in paths {
        let (f, l) = parse_cifar_records(&read_all(p)?, p, expected)?;
        features.extend(f);
        labels.extend(l);
    }
    Dataset::new(features, labels, CIFAR_CLASSES, split)
}

/// Official file names for a split inside a CIFAR-10 binary directory.
pub fn cifar10_paths(dir: &Path, split: Split) -> Vec<PathBuf> {
    match split {
        Split::Train => (1..=5).map(|i| dir.join(format!("data_batch_{i}.bin"))).collect(),
        Split::Test => vec![dir.join("test_batch.bin")],
    }
}

/// Inverse of [`parse_cifar_records`] for datasets whose features are
/// multiples of 1/255.
pub fn to_cifar_bytes(ds: &Dataset) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(ds.len() * CIFAR_RECORD_BYTES);
    for (row, &label) in ds.features.iter().zip(&ds.labels) {
        if row.len() != CIFAR_IMAGE_BYTES {
            return Err(Error::Shape {
                expected: CIFAR_IMAGE_BYTES,
                actual: row.len(),
            });
        }
        let label = u8::try_from(label)
            .ok()
            .filter(|&l| usize::from(l) < CIFAR_CLASSES)
            .ok_or_else(|| Error::InvalidParameter(format!("label {label} is not a CIFAR-10 class")))?;
        out.push(label);
        for &x in row {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::InvalidParameter(format!("pixel value {x} outside [0, 1]")));
            }
            out.push((x * 255.0).round() as u8);
        }
    }
    Ok(out)
}

/// Writes `label,f0,f1,...` rows with a header line.
pub fn write_csv<W: Write>(ds: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["label".to_string()];
    header.extend((0..ds.dim()).map(|j| format!("f{j}")));
    w.write_record(&header)?;
    for (row, label) in ds.features.iter().zip(&ds.labels) {
        let mut rec = Vec::with_capacity(row.len() + 1);
        rec.push(label.to_string());
        rec.extend(row.iter().map(|x| x.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<dataset csv>", e))?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R, split: Split) -> Result<Dataset> {
    let mut r = csv::Reader::from_reader(input);
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let mut fields = rec.iter();
        let label: usize = fields
            .next()
            .ok_or_else(|| Error::Parse(format!("row {}: empty record", i + 1)))?
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("row {}: bad label: {e}", i + 1)))?;
        let row = fields
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: bad feature `{f}`: {e}", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        labels.push(label);
        features.push(row);
    }
    let classes = labels.iter().max().map_or(0, |&m| m + 1);
    Dataset::new(features, labels, classes, split)
}

pub fn save_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(ds, std::io::BufWriter::new(f))
}

pub fn load_csv(path: &Path, split: Split) -> Result<Dataset> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(std::io::BufReader::new(f), split)
}

const PCA_TOLERANCE: f64 = 1e-9;
const PCA_MAX_ITERATIONS: usize = 1000;

/// Projects centred data onto its top `out_dim` principal directions found
/// by power iteration with deflation.
pub fn pca_project(features: &[Vec<f64>], out_dim: usize) -> Result<Vec<Vec<f64>>> {
    if features.len() < 2 {
        return Err(Error::DegenerateProjection("need at least two points".into()));
    }
    let dim = features[0].len();
    if out_dim == 0 || out_dim > dim {
        return Err(Error::InvalidParameter(format!(
            "cannot project {dim}-dimensional data to {out_dim} dimensions"
        )));
    }
    let means = column_stats(features);
    let centred: Vec<Vec<f64>> = features
        .iter()
        .map(|r| r.iter().zip(&means).map(|(x, (m, _))| x - m).collect())
        .collect();
    let total_var: f64 = centred.iter().flatten().map(|x| x * x).sum();
    if total_var <= f64::EPSILON * features.len() as f64 {
        return Err(Error::DegenerateProjection("data has zero variance".into()));
    }

    // v -> X^T X v without forming the covariance matrix.
    let apply = |v: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for r in &centred {
            let s: f64 = r.iter().zip(v).map(|(a, b)| a * b).sum();
            out.iter_mut().zip(r).for_each(|(o, a)| *o += s * a);
        }
        out
    };
    let orthogonalize = |v: &mut [f64], basis: &[Vec<f64>]| {
        for b in basis {
            let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
    };
    let normalize = |v: &mut [f64]| -> f64 {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 {
            v.iter_mut().for_each(|x| *x /= n);
        }
        n
    };

    let mut rng = seeded(tag("pca"));
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(out_dim);
    for _ in 0..out_dim {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
        orthogonalize(&mut v, &basis);
        normalize(&mut v);
        for _ in 0..PCA_MAX_ITERATIONS {
            let mut w = apply(&v);
            orthogonalize(&mut w, &basis);
            if normalize(&mut w) == 0.0 {
                // Remaining variance is zero; any orthogonal direction will do.
                break;
            }
            let diff = w.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            v = w;
            if diff < PCA_TOLERANCE {
                break;
            }
        }
        basis.push(v);
    }
    Ok(centred
        .iter()
        .map(|r| {
            basis
                .iter()
                .map(|b| r.iter().zip(b).map(|(x, y)| x * y).sum())
                .collect()
        })
        .collect())
}
