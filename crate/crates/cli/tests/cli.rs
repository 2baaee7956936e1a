use std::path::Path;
use std::process::{Command, Output};

use cipherfit::data::Dataset;
use cipherfit::emulator::OpCounts;
use cipherfit::training::Role;
use cipherfit_cli::csvio::{export, ingest, read_weights};
use ndarray::{array, Array2};
use proptest::prelude::*;
use serde_json::Value;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cipherfit")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn ingest_reads_three_rows_of_two_features() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.csv");
    std::fs::write(&p, "x,y,label\n0.5,-1,0\n2,3.25,2\n-0.125,0,1\n").unwrap();
    let d = ingest(&p, 3).unwrap();
    assert_eq!(d.features, array![[0.5, -1.0], [2.0, 3.25], [-0.125, 0.0]]);
    assert_eq!(d.labels, vec![0, 2, 1]);
    assert_eq!(d.num_features(), 2);
}

#[test]
fn ingest_rejects_bad_files() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("empty", ""),
        ("header only", "a,label\n"),
        ("label only", "label\n1\n"),
        ("non-numeric", "a,label\n1,0\nx,1\n"),
        ("non-finite", "a,label\nNaN,0\n"),
        ("label range", "a,label\n1,3\n"),
        ("negative label", "a,label\n1,-1\n"),
        ("ragged", "a,b,label\n1,2,0\n1,0\n"),
    ];
    for (name, text) in cases {
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, text).unwrap();
        let e = ingest(&p, 3).expect_err(name);
        assert_eq!(e.code(), "io/parse", "{name}: {e}");
    }
    let e = ingest(&dir.path().join("missing.csv"), 3).unwrap_err();
    assert!(e.code().starts_with("io/"));
}

#[test]
fn parse_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.csv");
    std::fs::write(&p, "a,label\n1,0\n2,0\nx,1\n").unwrap();
    assert!(ingest(&p, 2).unwrap_err().to_string().contains("d.csv:4:"));
}

#[test]
fn export_then_ingest_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.csv");
    let d = Dataset::new(
        array![[0.1, 1.0 / 3.0, -2e-300], [f64::MAX, -0.0, 123456789.01234567]],
        vec![1, 0],
        2,
    )
    .unwrap();
    export(&p, &d).unwrap();
    let back = ingest(&p, 2).unwrap();
    assert_eq!(back.labels, d.labels);
    assert!(back.features.iter().zip(&d.features).all(|(a, b)| a.to_bits() == b.to_bits()));
}

fn gen_data(dir: &Path) {
    let o = cli(&[
        "gen-data", "--classes", "3", "--features", "6", "--per-class", "40", "--seed", "5", "--out", path(dir),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
}

/// Writes a config for the generated data with a short schedule.
fn small_config(dir: &Path, out: &str) -> std::path::PathBuf {
    let cfg = serde_json::json!({
        "train": "train.csv",
        "val": "val.csv",
        "test": "test.csv",
        "num_classes": 3,
        "context": {"s0": 32, "s1": 32},
        "training": {"batch_size": 32, "max_epochs": 3, "learning_rate": 0.2, "trace": true},
        "output_dir": out,
    });
    let p = dir.join(format!("{out}.json"));
    std::fs::write(&p, cfg.to_string()).unwrap();
    p
}

#[test]
fn gen_data_writes_splits_and_a_config() {
    let dir = tempfile::tempdir().unwrap();
    gen_data(dir.path());
    let sizes: Vec<usize> =
        ["train", "val", "test"].iter().map(|n| ingest(&dir.path().join(format!("{n}.csv")), 3).unwrap().len()).collect();
    assert_eq!(sizes, vec![86, 17, 17]);
    let cfg: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("config.json")).unwrap()).unwrap();
    assert_eq!(cfg["num_classes"], 3);
}

#[test]
fn train_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    gen_data(dir.path());
    let (a, b) = (small_config(dir.path(), "run1"), small_config(dir.path(), "run2"));
    for cfg in [&a, &b] {
        let o = cli(&["train", "--config", path(cfg)]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("best epoch"));
    }
    let read = |run: &str| std::fs::read_to_string(dir.path().join(run).join("report.json")).unwrap();
    let (r1, r2) = (read("run1"), read("run2"));
    // Identical apart from the configured output directory.
    assert_eq!(r1.replace("run1", "run2"), r2);

    let r: Value = serde_json::from_str(&r1).unwrap();
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["server_violations"], 0);
    assert!(r["audit"].as_array().unwrap().iter().all(|e| e["role"] != serde_json::to_value(Role::Server).unwrap()));
    let counts = |v: &Value| -> OpCounts { serde_json::from_value(v["counts"].clone()).unwrap() };
    let mut total: OpCounts = serde_json::from_value(r["setup_counts"].clone()).unwrap();
    for s in r["steps"].as_array().unwrap().iter().chain(r["epochs"].as_array().unwrap()) {
        total += counts(s);
    }
    assert_eq!(total, counts(&r));
    assert_eq!(r["steps"].as_array().unwrap().len(), 3 * 3);

    let w = read_weights(&dir.path().join("run1").join("weights.csv")).unwrap();
    assert_eq!(w.dim(), (3, 7));
    let acc = r["accuracy"]["test"].as_f64().unwrap();
    let reference = r["reference_accuracy"]["test"].as_f64().unwrap();
    assert!((acc - reference).abs() <= 0.01, "{acc} vs {reference}");
}

#[test]
fn train_out_flag_overrides_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    gen_data(dir.path());
    let cfg = small_config(dir.path(), "unused");
    let out = dir.path().join("elsewhere");
    let o = cli(&["train", "--config", path(&cfg), "--out", path(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("report.json").exists() && out.join("weights.csv").exists());
    assert!(!dir.path().join("unused").exists());
}

#[test]
fn failures_exit_with_module_tagged_codes() {
    let dir = tempfile::tempdir().unwrap();
    gen_data(dir.path());
    let write = |name: &str, v: Value| {
        let p = dir.path().join(name);
        std::fs::write(&p, v.to_string()).unwrap();
        p
    };
    let base = serde_json::json!({"train": "train.csv", "val": "val.csv", "num_classes": 3});
    let mut batch = base.clone();
    batch["training"] = serde_json::json!({"batch_size": 128});
    let mut classes = base.clone();
    classes["num_classes"] = serde_json::json!(65);
    let mut softmax = base.clone();
    softmax["training"] = serde_json::json!({"softmax": {"l": 0.5}});
    let mut missing = base.clone();
    missing["train"] = serde_json::json!("nope.csv");
    let cases = [
        (write("syntax.json", serde_json::json!({"train": 1})), 15, "io/"),
        (write("batch.json", batch), 12, "matmul/"),
        (write("classes.json", classes), 12, "matmul/"),
        (write("softmax.json", softmax), 13, "approx/"),
        (write("missing.json", missing), 15, "io/"),
    ];
    for (cfg, code, tag) in cases {
        let o = cli(&["train", "--config", path(&cfg)]);
        assert_eq!(o.status.code(), Some(code), "{}: {}", cfg.display(), stderr(&o));
        assert!(stderr(&o).starts_with(&format!("error[{tag}")), "{}", stderr(&o));
    }
    let o = cli(&["bench-softmax", "--samples", "99999"]);
    assert_eq!(o.status.code(), Some(13));
    assert!(stderr(&o).starts_with("error[approx/invalid-config]"));
    let o = cli(&["bench-matmul", "--shapes", "1,2"]);
    assert_eq!(o.status.code(), Some(15));
    let o = cli(&["bench-matmul", "--algs", "strassen"]);
    assert_eq!(o.status.code(), Some(15));
    assert_eq!(cli(&["no-such-command"]).status.code(), Some(2));
}

fn bench_rows(args: &[&str]) -> Vec<Value> {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("rows.json");
    let mut all = args.to_vec();
    all.extend(["--json", path(&json)]);
    let o = cli(&all);
    assert!(o.status.success(), "{}", stderr(&o));
    serde_json::from_str::<Value>(&std::fs::read_to_string(json).unwrap()).unwrap().as_array().unwrap().clone()
}

fn triple(row: &Value) -> [u64; 3] {
    let c = &row["counts"];
    [c["cmult"].as_u64().unwrap(), c["mult"].as_u64().unwrap(), c["rot"].as_u64().unwrap()]
}

#[test]
fn bench_matmul_reports_reference_counts() {
    let rows = bench_rows(&["bench-matmul", "--shapes", "1024,769,8", "--algs", "diag-abt"]);
    assert_eq!(triple(&rows[0]), [8, 100, 140]);
    assert!(rows[0]["rel_error"].as_f64().unwrap() < 1e-9);

    let rows = bench_rows(&["bench-matmul", "--shapes", "512,769,4", "--algs", "diag-atb-rl"]);
    assert_eq!(triple(&rows[0]), [28, 26, 238]);

    let rows = bench_rows(&["bench-matmul", "--shapes", "128,128,4", "--algs", "jin-atb"]);
    assert_eq!(triple(&rows[0])[2], 7680);
    assert!(rows[0]["rel_error"].is_null());
    assert_eq!(rows[0]["executed"], false);
}

#[test]
fn bench_matmul_prints_a_table() {
    let o = cli(&["bench-matmul", "--shapes", "128,128,4", "--algs", "diag-abt,col-major"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 3);
    assert!(out.contains("diag-abt") && out.contains("col-major"));
}

#[test]
fn bench_softmax_runs_two_classes() {
    let rows =
        bench_rows(&["bench-softmax", "--classes", "2", "--samples", "100000", "--range", "4", "--seed", "3"]);
    assert_eq!(rows.len(), 3);
    for r in &rows {
        let (max, avg) = (r["max_error"].as_f64().unwrap(), r["mean_error"].as_f64().unwrap());
        assert!(max.is_finite() && avg <= max, "{r}");
    }
    let norm = rows.iter().find(|r| r["variant"] == "norm").unwrap();
    assert!(norm["max_error"].as_f64().unwrap() <= 1e-5);
}

#[test]
fn bench_softmax_is_deterministic() {
    let args = ["bench-softmax", "--classes", "3", "--samples", "100000", "--range", "8"];
    assert_eq!(bench_rows(&args), bench_rows(&args));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip_is_bit_exact(
        rows in 1usize..6,
        cols in 1usize..5,
        values in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO, 30),
        labels in proptest::collection::vec(0usize..4, 6),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        let features = Array2::from_shape_fn((rows, cols), |(i, j)| values[i * cols + j]);
        let d = Dataset::new(features, labels[..rows].to_vec(), 4).unwrap();
        export(&p, &d).unwrap();
        let back = ingest(&p, 4).unwrap();
        prop_assert_eq!(&back.labels, &d.labels);
        prop_assert!(back.features.iter().zip(&d.features).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}
