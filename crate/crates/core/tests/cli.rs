use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tripletcut"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn binary")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = run(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn pipeline_gen_train_cluster_eval() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen-data", "--k", "3", "--per-class", "20", "--dim", "4", "--out", "data"], d);
    assert!(d.join("data/train.csv").exists() && d.join("data/test.csv").exists());

    ok(
        &[
            "train", "--data", "data/train.csv", "--epochs", "10", "--batch-size", "20",
            "--dims", "8,4", "--out", "model.json",
        ],
        d,
    );
    let stdout = ok(
        &[
            "cluster", "--model", "model.json", "--data", "data/test.csv", "--calibration",
            "analytic", "--out", "assign.csv",
        ],
        d,
    );
    assert!(stdout.contains("acc"), "{stdout}");
    let assign = fs::read_to_string(d.join("assign.csv")).unwrap();
    assert_eq!(assign.lines().next(), Some("index,cluster,label"));
    assert_eq!(assign.lines().count(), 1 + 3 * 20);

    ok(
        &[
            "eval", "--assignments", "assign.csv", "--model", "model.json", "--data",
            "data/test.csv", "--out", "eval",
        ],
        d,
    );
    assert!(d.join("eval/distance_stats.csv").exists());
    assert!(d.join("eval/pca.csv").exists());
}

#[test]
fn analytic_calibration_rejects_triplet1() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen-data", "--k", "2", "--per-class", "10", "--dim", "3", "--out", "data"], d);
    ok(
        &["train", "--data", "data/train.csv", "--loss", "triplet1", "--epochs", "1", "--dims", "4", "--out", "m.json"],
        d,
    );
    let out = run(
        &["cluster", "--model", "m.json", "--data", "data/test.csv", "--calibration", "analytic"],
        d,
    );
    assert!(!out.status.success(), "analytic calibration must reject triplet1");
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn grid_and_report_agree() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("grid.toml"),
        r#"
losses = ["triplet3"]
pos_rates = [0.0]
neg_rates = [0.0]
neg_random = false
epochs = 3
embedding_dims = [8, 4]
seeds = [1, 2]
k = 3
kmeans_restarts = 2

[dataset]
kind = "blobs"
k = 3
per_class = 20
dim = 4
center_separation = 10.0
cluster_std = 1.0
"#,
    )
    .unwrap();
    let printed = ok(&["grid", "--config", "grid.toml", "--print-config"], d);
    assert!(printed.contains("triplet3"));

    ok(&["grid", "--config", "grid.toml", "--output-dir", "out"], d);
    for f in ["raw.csv", "summary.csv", "curves.csv", "table_multicut.csv", "table_kmeans.csv"] {
        assert!(d.join("out").join(f).exists(), "missing {f}");
    }
    let raw = fs::read_to_string(d.join("out/raw.csv")).unwrap();
    assert_eq!(raw.lines().count(), 1 + 2 * 2);

    ok(&["report", "--raw", "out/raw.csv", "--out", "again"], d);
    assert_eq!(
        fs::read_to_string(d.join("out/summary.csv")).unwrap(),
        fs::read_to_string(d.join("again/summary.csv")).unwrap()
    );
}

#[test]
fn solve_small_graph_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // Two attractive pairs joined by repulsive edges.
    fs::write(d.join("g.txt"), "4 6\n0 1 2\n0 2 -1\n0 3 -1\n1 2 -1\n1 3 -1\n2 3 2\n").unwrap();
    let exact = ok(&["solve", "--graph", "g.txt", "--exact"], d);
    let heur = ok(&["solve", "--graph", "g.txt"], d);
    assert!(exact.starts_with("objective -4 with 2 components"), "{exact}");
    assert!(heur.starts_with("objective -4 with 2 components"), "{heur}");
}

#[test]
fn missing_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["solve", "--graph", "nope.txt"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.txt"));
}

#[test]
fn kmeans_without_k_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("grid.toml"),
        "losses = [\"triplet3\"]\nmethods = [\"kmeans\"]\nk = 0\nseeds = [1]\n",
    )
    .unwrap();
    let out = run(&["grid", "--config", "grid.toml"], d);
    assert!(!out.status.success());
}
