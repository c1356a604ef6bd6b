//! End-to-end tests of the `gmpl` binary: exit codes, file outputs, and
//! the documented subcommand contracts.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn gmpl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gmpl"))
        .args(args)
        .output()
        .expect("spawn gmpl")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_toy(path: &Path, n: usize) {
    let mut text = String::new();
    for k in 0..n {
        let u = k % 8;
        let i = k % 12;
        let r = 1.0 + ((u * 12 + i) % 5) as f64 + 0.25 * (k % 3) as f64;
        text.push_str(&format!("u{u} i{i} {r}\n"));
    }
    std::fs::write(path, text).unwrap();
}

fn make_split(dir: &Path, n: usize) -> PathBuf {
    let data = dir.join("ratings.txt");
    write_toy(&data, n);
    let out = dir.join("split");
    let res = gmpl(&[
        "split",
        "--data",
        data.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", stderr(&res));
    out
}

#[test]
fn split_default_ratios_on_ten_entries() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("toy.txt");
    write_toy(&data, 10);
    let out = dir.path().join("split");
    let res = gmpl(&[
        "split",
        "--data",
        data.to_str().unwrap(),
        "--seed",
        "42",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", stderr(&res));
    let count = |name: &str| {
        std::fs::read_to_string(out.join(name))
            .unwrap()
            .lines()
            .count()
    };
    assert_eq!(count("train.txt"), 7);
    assert_eq!(count("validation.txt"), 1);
    assert_eq!(count("test.txt"), 2);
    assert!(out.join("manifest.json").exists());
}

#[test]
fn split_is_deterministic_across_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("toy.txt");
    write_toy(&data, 40);
    let mut bytes = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let res = gmpl(&[
            "split",
            "--data",
            data.to_str().unwrap(),
            "--seed",
            "9",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(res.status.success(), "{}", stderr(&res));
        bytes.push(
            ["train.txt", "validation.txt", "test.txt"]
                .map(|f| std::fs::read(out.join(f)).unwrap()),
        );
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn split_missing_file_exits_2_and_names_the_path() {
    let res = gmpl(&[
        "split",
        "--data",
        "/no/such/ratings.txt",
        "--out",
        "/tmp/unused-split-out",
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains("/no/such/ratings.txt"), "{}", stderr(&res));
}

#[test]
fn train_sgd_without_eta_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let split = make_split(dir.path(), 60);
    let res = gmpl(&[
        "train",
        "--split-dir",
        split.to_str().unwrap(),
        "--algorithm",
        "sgd",
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains("fixed_eta required"), "{}", stderr(&res));
}

#[test]
fn train_max_iters_1_gives_one_iteration_block() {
    let dir = tempfile::tempdir().unwrap();
    let split = make_split(dir.path(), 60);
    let out = dir.path().join("run");
    let res = gmpl(&[
        "train",
        "--split-dir",
        split.to_str().unwrap(),
        "--algorithm",
        "gmpso",
        "--seed",
        "7",
        "--f",
        "2",
        "--q",
        "3",
        "--max-iters",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", stderr(&res));
    assert!(stdout(&res).contains("final test RMSE:"), "{}", stdout(&res));
    let csv = std::fs::read_to_string(out.join("gmpso-seed7.curve.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    // header + q sub-iteration rows, all from iteration 1
    assert_eq!(rows.len(), 1 + 3, "{csv}");
    assert!(rows[0].starts_with("t,j,eta_j,lambda_j,A_j,F_j,Ir_j"));
    for row in &rows[1..] {
        assert!(row.starts_with("1,"), "{row}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("gmpso-seed7.summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["iterations"], 1);
    assert!(summary["final_rmse"].as_f64().unwrap().is_finite());
}

#[test]
fn train_model_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let split = make_split(dir.path(), 60);
    let mut models = Vec::new();
    for name in ["r1", "r2"] {
        let out = dir.path().join(name);
        let res = gmpl(&[
            "train",
            "--split-dir",
            split.to_str().unwrap(),
            "--algorithm",
            "pso",
            "--seed",
            "3",
            "--f",
            "2",
            "--q",
            "2",
            "--max-iters",
            "2",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(res.status.success(), "{}", stderr(&res));
        models.push(std::fs::read(out.join("pso-seed3.model.txt")).unwrap());
    }
    assert_eq!(models[0], models[1]);
}

#[test]
fn config_file_applies_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let split = make_split(dir.path(), 60);
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "f = 5\nq = 2\nmax_iters = 2\n").unwrap();
    let out = dir.path().join("run");
    let res = gmpl(&[
        "train",
        "--split-dir",
        split.to_str().unwrap(),
        "--algorithm",
        "gmpso",
        "--config",
        conf.to_str().unwrap(),
        "--f",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", stderr(&res));
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out.join("gmpso-seed0.manifest.json")).unwrap(),
    )
    .unwrap();
    // flag beats file; untouched file keys beat defaults
    assert_eq!(manifest["config"]["f"], 2);
    assert_eq!(manifest["config"]["q"], 2);
    assert_eq!(manifest["config"]["max_iters"], 2);
}

#[test]
fn evaluate_reports_rmse_and_flags_unknown_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let split = make_split(dir.path(), 60);
    let out = dir.path().join("run");
    let res = gmpl(&[
        "train",
        "--split-dir",
        split.to_str().unwrap(),
        "--algorithm",
        "sgd",
        "--eta",
        "0.01",
        "--lambda",
        "0.01",
        "--max-iters",
        "5",
        "--f",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", stderr(&res));

    let pairs = dir.path().join("pairs.txt");
    std::fs::write(&pairs, "u1 i2\nu1 nope\n").unwrap();
    let res = gmpl(&[
        "evaluate",
        "--split-dir",
        split.to_str().unwrap(),
        "--model",
        out.join("sgd-seed0.model.txt").to_str().unwrap(),
        "--pairs",
        pairs.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", stderr(&res));
    let text = stdout(&res);
    assert!(text.contains("test RMSE:"), "{text}");
    assert!(text.lines().any(|l| l.starts_with("u1 i2 ")), "{text}");
    assert!(
        text.lines().any(|l| l.starts_with("u1 nope ERROR:")),
        "{text}"
    );
}

#[test]
fn benchmark_cross_product_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let split = make_split(dir.path(), 80);
    let out = dir.path().join("bench");
    let res = gmpl(&[
        "benchmark",
        "--split-dir",
        split.to_str().unwrap(),
        "--algorithms",
        "gmpso,pso,sgd",
        "--seeds",
        "1,2,3",
        "--grid",
        "--f",
        "2",
        "--q",
        "2",
        "--max-iters",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", stderr(&res));

    let summaries: Vec<_> = std::fs::read_dir(out.join("split"))
        .unwrap()
        .filter_map(|e| {
            let name = e.unwrap().file_name().into_string().unwrap();
            name.ends_with(".summary.json").then_some(name)
        })
        .collect();
    assert_eq!(summaries.len(), 9, "{summaries:?}");

    let table = std::fs::read_to_string(out.join("table.csv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows.len(), 1 + 3, "{table}");
    assert!(rows[0].contains("rmse_mean") && rows[0].contains("rmse_sd"), "{table}");
    for row in &rows[1..] {
        assert!(row.contains('\u{b1}'), "{row}");
    }
}

#[test]
fn benchmark_without_algorithms_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let split = make_split(dir.path(), 40);
    let res = gmpl(&[
        "benchmark",
        "--split-dir",
        split.to_str().unwrap(),
        "--seeds",
        "1",
    ]);
    assert_eq!(res.status.code(), Some(2));
}
