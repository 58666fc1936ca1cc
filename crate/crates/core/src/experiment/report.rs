use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::metrics::{DistanceStats, STATS_CSV_HEADER};

use super::cluster::ClusterMethod;
use super::grid::{CellKey, CellResult, GridResult, NegNoise, SummaryRow};

pub const RAW_CSV_HEADER: [&str; 9] = [
    "pos_noise",
    "neg_noise",
    "loss",
    "method",
    "seed",
    "acc",
    "n_clusters",
    "runtime_s",
    "error",
];

pub const SUMMARY_CSV_HEADER: [&str; 9] = [
    "pos_noise",
    "neg_noise",
    "loss",
    "method",
    "runs",
    "failures",
    "acc_mean",
    "acc_std_population",
    "n_clusters_mean",
];

pub const CURVES_CSV_HEADER: [&str; 6] = ["axis", "noise", "loss", "method", "acc_mean", "acc_std_population"];

pub const PCA_CSV_HEADER: [&str; 4] = ["x", "y", "cluster", "label"];

fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        x.to_string()
    }
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_raw_csv(rows: &[CellResult], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(RAW_CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.key.pos_noise.to_string(),
            r.key.neg_noise.to_string(),
            r.key.loss.token().to_string(),
            r.method.token().to_string(),
            r.key.seed.to_string(),
            num(r.acc),
            if r.error.is_some() {
                String::new()
            } else {
                r.n_clusters.to_string()
            },
            r.runtime_s.to_string(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    finish(w, path)
}

fn parse_field<T: std::str::FromStr>(s: &str, what: &str, path: &Path) -> Result<T> {
    s.parse().map_err(|_| Error::Format {
        path: path.to_path_buf(),
        reason: format!("bad {what} `{s}`"),
    })
}

/// Reads rows written by [`write_raw_csv`].
pub fn read_raw_csv(path: &Path) -> Result<Vec<CellResult>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(f);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != RAW_CSV_HEADER {
        return Err(Error::Format {
            path: path.to_path_buf(),
            reason: format!("unexpected header {header:?}"),
        });
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let neg_noise = match &rec[1] {
            "random" => NegNoise::Random,
            s => NegNoise::Rate(parse_field(s, "neg_noise", path)?),
        };
        let error = (!rec[8].is_empty()).then(|| rec[8].to_string());
        rows.push(CellResult {
            key: CellKey {
                pos_noise: parse_field(&rec[0], "pos_noise", path)?,
                neg_noise,
                loss: rec[2].parse()?,
                seed: parse_field(&rec[4], "seed", path)?,
            },
            method: rec[3].parse()?,
            acc: if rec[5].is_empty() {
                f64::NAN
            } else {
                parse_field(&rec[5], "acc", path)?
            },
            n_clusters: if rec[6].is_empty() {
                0
            } else {
                parse_field(&rec[6], "n_clusters", path)?
            },
            runtime_s: parse_field(&rec[7], "runtime_s", path)?,
            error,
        });
    }
    Ok(rows)
}

pub fn write_summary_csv(summary: &[SummaryRow], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(SUMMARY_CSV_HEADER)?;
    for s in summary {
        w.write_record([
            s.pos_noise.to_string(),
            s.neg_noise.to_string(),
            s.loss.token().to_string(),
            s.method.token().to_string(),
            s.runs.to_string(),
            s.failures.to_string(),
            num(s.acc_mean),
            num(s.acc_std),
            num(s.n_clusters_mean),
        ])?;
    }
    finish(w, path)
}

/// Axes in first-appearance order.
fn distinct<T: PartialEq + Copy>(items: impl Iterator<Item = T>) -> Vec<T> {
    let mut out = Vec::new();
    for x in items {
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

/// Mean ACC laid out with positive rates down the side and one column per
/// loss and negative setting.
pub fn write_table_csv(summary: &[SummaryRow], method: ClusterMethod, path: &Path) -> Result<()> {
    let rows: Vec<&SummaryRow> = summary.iter().filter(|s| s.method == method).collect();
    let pos = distinct(rows.iter().map(|s| s.pos_noise));
    let negs = distinct(rows.iter().map(|s| s.neg_noise));
    let losses = distinct(rows.iter().map(|s| s.loss));
    let mut w = writer(path)?;
    let mut header = vec!["pos_noise".to_string()];
    for l in &losses {
        for n in &negs {
            header.push(format!("{l}:{n}"));
        }
    }
    w.write_record(&header)?;
    for &p in &pos {
        let mut rec = vec![p.to_string()];
        for &l in &losses {
            for &n in &negs {
                let v = rows
                    .iter()
                    .find(|s| s.pos_noise == p && s.neg_noise == n && s.loss == l)
                    .map_or(f64::NAN, |s| s.acc_mean);
                rec.push(num(v));
            }
        }
        w.write_record(&rec)?;
    }
    finish(w, path)
}

/// Noise-vs-ACC curves along three axes: positive noise with clean
/// negatives, negative noise with clean positives, and equal noise on both.
pub fn write_curves_csv(summary: &[SummaryRow], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(CURVES_CSV_HEADER)?;
    type Axis = (&'static str, fn(&SummaryRow) -> Option<f64>);
    let axes: [Axis; 3] = [
        ("positive", |s| (s.neg_noise == NegNoise::Rate(0.0)).then_some(s.pos_noise)),
        ("negative", |s| match s.neg_noise {
            NegNoise::Rate(r) if s.pos_noise == 0.0 => Some(r),
            _ => None,
        }),
        ("diagonal", |s| match s.neg_noise {
            NegNoise::Rate(r) if r == s.pos_noise => Some(r),
            _ => None,
        }),
    ];
    for (axis, pick) in axes {
        let mut points: Vec<(f64, &SummaryRow)> =
            summary.iter().filter_map(|s| pick(s).map(|x| (x, s))).collect();
        points.sort_by(|a, b| {
            (a.1.loss, a.1.method)
                .cmp(&(b.1.loss, b.1.method))
                .then(a.0.total_cmp(&b.0))
        });
        for (x, s) in points {
            w.write_record([
                axis.to_string(),
                x.to_string(),
                s.loss.token().to_string(),
                s.method.token().to_string(),
                num(s.acc_mean),
                num(s.acc_std),
            ])?;
        }
    }
    finish(w, path)
}

fn write_stats(stats: Option<&DistanceStats>, path: &Path) -> Result<()> {
    match stats {
        Some(s) => {
            let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
            s.write_csv(f)
        }
        None => {
            let mut w = writer(path)?;
            w.write_record(STATS_CSV_HEADER)?;
            finish(w, path)
        }
    }
}

fn write_pca(points: &[[f64; 2]], clusters: &[usize], labels: &[usize], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(PCA_CSV_HEADER)?;
    for ((p, c), l) in points.iter().zip(clusters).zip(labels) {
        w.write_record([p[0].to_string(), p[1].to_string(), c.to_string(), l.to_string()])?;
    }
    finish(w, path)
}

/// Writes every report into `dir` and returns the paths written. Losses and
/// methods without results still get header-only files.
pub fn emit_reports(
    result: &GridResult,
    losses: &[LossKind],
    methods: &[ClusterMethod],
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut out = |name: String| {
        let p = dir.join(name);
        written.push(p.clone());
        p
    };
    let summary = result.summary();
    write_raw_csv(&result.rows, &out("raw.csv".into()))?;
    write_summary_csv(&summary, &out("summary.csv".into()))?;
    write_curves_csv(&summary, &out("curves.csv".into()))?;
    for &m in methods {
        write_table_csv(&summary, m, &out(format!("table_{m}.csv")))?;
    }
    for &l in losses {
        let art = result.artifacts.iter().find(|a| a.loss == l);
        write_stats(art.map(|a| &a.stats), &out(format!("distance_stats_{l}.csv")))?;
        match art {
            Some(a) => write_pca(&a.projection, &a.clusters, &a.labels, &out(format!("pca_{l}.csv")))?,
            None => write_pca(&[], &[], &[], &out(format!("pca_{l}.csv")))?,
        }
    }
    Ok(written)
}
