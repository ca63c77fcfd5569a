use std::path::Path;
use std::process::{Command, Output};

use mlsvm::dataset::synthetic::two_gaussians;
use mlsvm::dataset::{inject_mcar, write_dense_csv, Dataset};

fn mlsvm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlsvm")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn toy_csv(dir: &Path, name: &str, n_pos: usize, n_neg: usize, missing: f64) -> String {
    let data: Dataset<f64> = two_gaussians(n_pos, n_neg, 3, 3.0, 7);
    let data = inject_mcar(&data, missing, 1).unwrap();
    let path = dir.join(name);
    write_dense_csv(&data, &path, "label").unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(code(&mlsvm(&["--help"])), 0);
    assert_eq!(code(&mlsvm(&["bench", "--no-such-flag"])), 1);
    assert_eq!(code(&mlsvm(&[])), 1);
}

#[test]
fn config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let data = toy_csv(dir.path(), "toy.csv", 20, 40, 0.0);
    let out = mlsvm(&["bench", &data, "--method", "boosting"]);
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(code(&mlsvm(&["bench", &data, "--set", "unknown.key=1"])), 1);
    assert_eq!(code(&mlsvm(&["bench", &data, "--ratios", "1.5"])), 1);
    assert_eq!(code(&mlsvm(&["bench"])), 1);
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.csv");
    let out_dir = dir.path().join("model");
    let out = mlsvm(&["train", missing.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "label,a\n1,x\n").unwrap();
    assert_eq!(code(&mlsvm(&["impute", bad.to_str().unwrap()])), 2);
}

#[test]
fn train_then_predict() {
    let dir = tempfile::tempdir().unwrap();
    let data = toy_csv(dir.path(), "train.csv", 40, 120, 0.1);
    let model = dir.path().join("model");
    let out = mlsvm(&["train", &data, "--method", "mlwsvm", "--seed", "3", "--out", model.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(model.join("pipeline.txt").exists());

    let preds = dir.path().join("pred.csv");
    let out = mlsvm(&["predict", "--model", model.to_str().unwrap(), &data, "--out", preds.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&preds).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("row,prediction"));
    assert_eq!(lines.count(), 160);
    assert!(String::from_utf8_lossy(&out.stderr).contains("G-mean"));
}

#[test]
fn bench_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let data = toy_csv(dir.path(), "toy.csv", 30, 60, 0.0);
    let report = dir.path().join("report.csv");
    let args = [
        "bench", &data, "--method", "svm,mlwsvm", "--ratios", "0.1", "--folds", "3", "--seed", "2", "--jobs", "1",
        "--set", "experiment.repeats=1", "--set", "experiment.timing=false",
    ];
    let mut with_out: Vec<&str> = args.to_vec();
    with_out.extend(["--out", report.to_str().unwrap()]);
    let out = mlsvm(&with_out);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&report).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("dataset,method,ratio,sn,sn_sd"));

    let md = mlsvm(&[&args[..], &["--format", "markdown"]].concat());
    assert_eq!(code(&md), 0);
    let md = String::from_utf8(md.stdout).unwrap();
    assert!(md.starts_with('|') && md.contains("mlwsvm"));

    let again = mlsvm(&with_out);
    assert_eq!(code(&again), 0);
    assert_eq!(std::fs::read_to_string(&report).unwrap(), csv);
}

#[test]
fn bench_partial_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    // 3 positives cannot fill 5 stratified folds
    let data = toy_csv(dir.path(), "tiny.csv", 3, 60, 0.0);
    let out = mlsvm(&["bench", &data, "--method", "svm", "--ratios", "0", "--folds", "5", "--set", "experiment.repeats=1"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).lines().nth(1).unwrap().starts_with("tiny,svm,0,"));
}

#[test]
fn impute_fills_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let data = toy_csv(dir.path(), "holes.csv", 30, 30, 0.2);
    let out = mlsvm(&["impute", &data]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 61);
    assert!(text.lines().skip(1).all(|l| !l.contains(",,") && !l.ends_with(',')));
}
