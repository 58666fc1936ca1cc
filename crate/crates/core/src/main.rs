use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tripletcut::calibration::CalibrationMode;
use tripletcut::data::{
    apply_standardization, column_stats, generate_blob_splits, load_csv, pca_project, save_csv, BlobSpec,
    Split,
};
use tripletcut::experiment::cluster::{build_cut_model, resolve_calibration, solve_multicut};
use tripletcut::experiment::report::{read_raw_csv, PCA_CSV_HEADER};
use tripletcut::experiment::{
    cluster_embeddings, emit_reports, run_grid, train, ClusterMethod, ClusterOptions, ExperimentConfig,
    GridResult, ModelFile, TrainConfig,
};
use tripletcut::loss::{LossKind, TripletMargins};
use tripletcut::metrics::{accuracy, distance_stats};
use tripletcut::multicut::{brute_force, io as mcio, objective};
use tripletcut::net::EmbeddingNet;
use tripletcut::rng::{derive_seed, seeded, tag};
use tripletcut::sampling::NoiseSpec;
use tripletcut::{Error, Result};

#[derive(Parser)]
#[command(name = "tripletcut", version, about = "Triplet-loss embeddings clustered by multicut or k-means")]
struct Cli {
    /// Global seed. Every random stream is derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate Gaussian blob train/test splits as CSV.
    GenData(GenDataArgs),
    /// Train an embedding network on a CSV dataset.
    Train(TrainArgs),
    /// Embed a dataset and cluster it.
    Cluster(ClusterArgs),
    /// Score an assignment file and optionally write embedding statistics.
    Eval(EvalArgs),
    /// Run a noise grid from a config file and write all reports.
    Grid(GridArgs),
    /// Rebuild the summary reports from a raw results CSV.
    Report(ReportArgs),
    /// Solve a multicut problem stored in a graph file.
    Solve(SolveArgs),
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 100)]
    per_class: usize,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, default_value_t = 10.0)]
    separation: f64,
    #[arg(long, default_value_t = 1.0)]
    std: f64,
    /// Keep raw features instead of standardizing with training statistics.
    #[arg(long)]
    raw: bool,
    #[arg(long, default_value = "data")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "triplet3")]
    loss: LossKind,
    #[arg(long, default_value_t = 0.8)]
    alpha: f64,
    #[arg(long, default_value_t = 0.4)]
    beta: f64,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 100)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Hidden sizes followed by the embedding size.
    #[arg(long, value_delimiter = ',', default_value = "64,32")]
    dims: Vec<usize>,
    #[arg(long)]
    normalize: bool,
    #[arg(long, default_value_t = 0.0)]
    pos_noise: f64,
    #[arg(long, default_value_t = 0.0)]
    neg_noise: f64,
    #[arg(long)]
    neg_random: bool,
    #[arg(long, default_value = "model.json")]
    out: PathBuf,
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long)]
    model: PathBuf,
    /// Data to cluster.
    #[arg(long)]
    data: PathBuf,
    /// Training data, needed for regression calibration.
    #[arg(long)]
    train_data: Option<PathBuf>,
    #[arg(long, default_value = "multicut")]
    method: ClusterMethod,
    #[arg(long, default_value = "auto")]
    calibration: CalibrationMode,
    #[arg(long, default_value_t = 2000)]
    calibration_pairs: usize,
    /// Number of clusters, required for kmeans.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long)]
    knn: Option<usize>,
    #[arg(long)]
    no_refine: bool,
    #[arg(long, default_value = "assignments.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// CSV with columns index, cluster, label.
    #[arg(long)]
    assignments: PathBuf,
    /// With --data, write distance statistics and a PCA projection.
    #[arg(long, requires = "data")]
    model: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct GridArgs {
    /// TOML config. Defaults to the built-in desk-scale grid.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the effective config and exit.
    #[arg(long)]
    print_config: bool,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    raw: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Enumerate every partition (small graphs only).
    #[arg(long)]
    exact: bool,
    #[arg(long)]
    no_refine: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| tripletcut::Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn gen_data(a: GenDataArgs, seed: u64) -> Result<()> {
    let spec = BlobSpec {
        k: a.k,
        per_class: a.per_class,
        dim: a.dim,
        center_separation: a.separation,
        cluster_std: a.std,
        seed: derive_seed(seed, &[tag("data")]),
    };
    let (mut tr, mut te) = generate_blob_splits(&spec)?;
    if !a.raw {
        let stats = column_stats(&tr.features);
        apply_standardization(&mut tr.features, &stats);
        apply_standardization(&mut te.features, &stats);
    }
    create_dir(&a.out)?;
    save_csv(&tr, &a.out.join("train.csv"))?;
    save_csv(&te, &a.out.join("test.csv"))?;
    println!("wrote {} train and {} test rows to {}", tr.len(), te.len(), a.out.display());
    Ok(())
}

fn train_cmd(a: TrainArgs, seed: u64) -> Result<()> {
    let ds = load_csv(&a.data, Split::Train)?;
    let margins = TripletMargins::new(a.alpha, a.beta)?;
    let cfg = TrainConfig {
        loss: a.loss,
        margins,
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.lr,
        embedding_dims: a.dims,
        normalize_embeddings: a.normalize,
    };
    let noise = NoiseSpec::new(a.pos_noise, a.neg_noise, a.neg_random)?;
    let out = train(&cfg, &ds, &noise, seed)?;
    if let (Some(first), Some(last)) = (out.epoch_losses.first(), out.epoch_losses.last()) {
        println!("loss {first:.6} -> {last:.6} over {} epochs", out.epoch_losses.len());
    }
    ModelFile::new(&out.net, seed, a.loss, margins).save(&a.out)?;
    println!("model written to {}", a.out.display());
    Ok(())
}

fn cluster_cmd(a: ClusterArgs, seed: u64) -> Result<()> {
    let model = ModelFile::load(&a.model)?;
    let (net, _) = model.checkpoint.clone().into_net()?;
    let ds = load_csv(&a.data, Split::Test)?;
    let emb = net.embed_all(&ds.features)?;
    let cut_model = if a.method == ClusterMethod::Multicut {
        let mode = resolve_calibration(a.calibration, model.loss)?;
        let (train_emb, train_labels) = match (mode, &a.train_data) {
            (CalibrationMode::Regression, None) => {
                return Err(Error::Config("regression calibration needs --train-data".into()))
            }
            (CalibrationMode::Regression, Some(p)) => {
                let tr = load_csv(p, Split::Train)?;
                (net.embed_all(&tr.features)?, tr.labels)
            }
            _ => (Vec::new(), Vec::new()),
        };
        let m = build_cut_model(
            mode,
            model.loss,
            &model.margins,
            &train_emb,
            &train_labels,
            a.calibration_pairs,
            &mut seeded(derive_seed(seed, &[tag("calibration")])),
        )?;
        println!("calibration {mode}: threshold {:?}", m.decision_threshold());
        Some(m)
    } else {
        None
    };
    let options = ClusterOptions {
        k: a.k,
        restarts: a.restarts,
        knn: a.knn,
        refine: !a.no_refine,
    };
    let (clustering, eval) = cluster_embeddings(
        &emb,
        &ds.labels,
        a.method,
        cut_model.as_ref(),
        &options,
        &mut seeded(derive_seed(seed, &[tag(a.method.token())])),
    )?;
    let mut w = csv::Writer::from_path(&a.out)?;
    w.write_record(["index", "cluster", "label"])?;
    for (i, (c, l)) in clustering.labels().iter().zip(&ds.labels).enumerate() {
        w.write_record([i.to_string(), c.to_string(), l.to_string()])?;
    }
    w.flush().map_err(|e| Error::Io {
        path: a.out.clone(),
        source: e,
    })?;
    println!("acc {:.4} with {} clusters", eval.acc, eval.n_pred_clusters);
    Ok(())
}

fn eval_cmd(a: EvalArgs) -> Result<()> {
    let mut r = csv::Reader::from_path(&a.assignments)?;
    let (mut pred, mut truth) = (Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec?;
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad id `{s}` in {}", a.assignments.display())))
        };
        pred.push(parse(&rec[1])?);
        truth.push(parse(&rec[2])?);
    }
    let e = accuracy(&pred, &truth)?;
    println!("acc {:.6}", e.acc);
    println!("clusters {}", e.n_pred_clusters);
    for (c, l) in &e.mapping {
        println!("cluster {c} -> label {l}");
    }
    if let (Some(m), Some(d)) = (&a.model, &a.data) {
        let (net, _) = EmbeddingNet::load(m)?;
        let ds = load_csv(d, Split::Test)?;
        let emb = net.embed_all(&ds.features)?;
        create_dir(&a.out)?;
        let stats_path = a.out.join("distance_stats.csv");
        let f = fs::File::create(&stats_path).map_err(|e| Error::Io {
            path: stats_path.clone(),
            source: e,
        })?;
        distance_stats(&emb, &ds.labels)?.write_csv(f)?;
        let proj = pca_project(&emb, 2)?;
        let pca_path = a.out.join("pca.csv");
        let mut w = csv::Writer::from_path(&pca_path)?;
        w.write_record(PCA_CSV_HEADER)?;
        for ((p, c), l) in proj.iter().zip(&pred).zip(&ds.labels) {
            w.write_record([p[0].to_string(), p[1].to_string(), c.to_string(), l.to_string()])?;
        }
        w.flush().map_err(|e| Error::Io {
            path: pca_path.clone(),
            source: e,
        })?;
        println!("wrote {} and {}", stats_path.display(), pca_path.display());
    }
    Ok(())
}

fn grid_cmd(a: GridArgs, seed: u64, seed_given: bool) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if seed_given {
        cfg.seed = seed;
    }
    if let Some(d) = a.output_dir {
        cfg.output_dir = d;
    }
    if a.print_config {
        print!("{}", cfg.to_toml_string()?);
        return Ok(());
    }
    let result = run_grid(&cfg)?;
    let failures = result.rows.iter().filter(|r| r.error.is_some()).count();
    let paths = emit_reports(&result, &cfg.losses, &cfg.methods, &cfg.output_dir)?;
    println!(
        "{} runs ({} failed), reports in {}",
        result.rows.len(),
        failures,
        cfg.output_dir.display()
    );
    for s in result.summary() {
        println!(
            "pos {:<5} neg {:<7} {} {:<8} acc {:.4} (std {:.4})",
            s.pos_noise, s.neg_noise.to_string(), s.loss, s.method.token(), s.acc_mean, s.acc_std
        );
    }
    log::debug!("wrote {paths:?}");
    Ok(())
}

fn report_cmd(a: ReportArgs) -> Result<()> {
    let rows = read_raw_csv(&a.raw)?;
    let mut losses: Vec<LossKind> = Vec::new();
    let mut methods: Vec<ClusterMethod> = Vec::new();
    for r in &rows {
        if !losses.contains(&r.key.loss) {
            losses.push(r.key.loss);
        }
        if !methods.contains(&r.method) {
            methods.push(r.method);
        }
    }
    let result = GridResult {
        rows,
        artifacts: Vec::new(),
    };
    emit_reports(&result, &losses, &methods, &a.out)?;
    println!("reports in {}", a.out.display());
    Ok(())
}

fn solve_cmd(a: SolveArgs) -> Result<()> {
    let g = mcio::read_graph(&a.graph)?;
    let p = if a.exact {
        brute_force(&g)?.0
    } else {
        solve_multicut(&g, !a.no_refine)
    };
    println!("objective {} with {} components", objective(&g, &p)?, p.component_count());
    match a.out {
        Some(path) => mcio::write_partition(&path, &p),
        None => {
            print!("{}", mcio::partition_to_string(&p));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let seed_given = std::env::args().any(|a| a == "--seed" || a.starts_with("--seed="));
    let cli = Cli::parse();
    let seed = cli.seed;
    let res = match cli.command {
        Command::GenData(a) => gen_data(a, seed),
        Command::Train(a) => train_cmd(a, seed),
        Command::Cluster(a) => cluster_cmd(a, seed),
        Command::Eval(a) => eval_cmd(a),
        Command::Grid(a) => grid_cmd(a, seed, seed_given),
        Command::Report(a) => report_cmd(a),
        Command::Solve(a) => solve_cmd(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
