//! End-to-end checks of the `fdepth` binary: subcommand round trips and the
//! documented exit codes (0 success, 2 config error, 3 data error).

use std::path::Path;
use std::process::{Command, Output};

fn fdepth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fdepth"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn simulate_then_depth_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let curves = dir.path().join("curves.csv");
    let out = fdepth(&[
        "simulate",
        "--model",
        "cgp1",
        "--n0",
        "6",
        "--n1",
        "6",
        "--grid-points",
        "21",
        "--seed",
        "9",
        "--out",
        curves.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let text = std::fs::read_to_string(&curves).unwrap();
    assert!(text.starts_with("label,0,"));
    assert_eq!(text.lines().count(), 13);

    let depth_out = fdepth(&[
        "depth",
        "--data",
        curves.to_str().unwrap(),
        "--depth",
        "fsd",
    ]);
    assert!(depth_out.status.success());
    let body = stdout(&depth_out);
    assert!(body.starts_with("index,label,depth"));
    assert_eq!(body.lines().count(), 13);
    for line in body.lines().skip(1) {
        let d: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&d));
    }
}

#[test]
fn simulate_is_deterministic() {
    let args = [
        "simulate", "--model", "cgp2", "--n0", "4", "--n1", "4", "--grid-points", "11", "--seed",
        "3",
    ];
    let a = fdepth(&args);
    let b = fdepth(&args);
    assert_eq!(stdout(&a), stdout(&b));
}

#[test]
fn classify_and_cv_commands() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.csv");
    let query = dir.path().join("query.csv");
    for (path, seed) in [(&train, 1u32), (&query, 2)] {
        let out = fdepth(&[
            "simulate",
            "--model",
            "cgp1",
            "--n0",
            "10",
            "--n1",
            "10",
            "--grid-points",
            "21",
            "--seed",
            &seed.to_string(),
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }

    let out = fdepth(&[
        "classify",
        "--train",
        train.to_str().unwrap(),
        "--query",
        query.to_str().unwrap(),
        "--method",
        "wmd",
        "--depth",
        "kfsd",
        "--percentile",
        "50",
    ]);
    assert!(out.status.success(), "{out:?}");
    let body = stdout(&out);
    assert!(body.starts_with("index,predicted,score0,score1,tie_broken,actual"));
    assert_eq!(body.lines().count(), 21);

    let cv = fdepth(&[
        "cv",
        "--train",
        train.to_str().unwrap(),
        "--method",
        "wmd",
        "--folds",
        "5",
    ]);
    assert!(cv.status.success(), "{cv:?}");
    let body = stdout(&cv);
    assert!(body.contains("percentile:"));
    assert!(body.contains("tie_level:"));
}

#[test]
fn experiment_runs_and_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("study.toml");
    std::fs::write(
        &config,
        r#"
[experiment]
replications = 3
master_seed = 5
format = "csv"

[source]
kind = "cgp"
model = "cgp1"
n0 = 12
n1 = 12
grid_points = 21
train_per_group = [6, 6]

[methods]
procedures = ["wmd"]
depths = ["fsd", "kfsd"]
knn = true

[cv]
folds = 3
percentiles = [15.0, 50.0]

[depth_params]
projections = 10
knn_k = 3
"#,
    )
    .unwrap();

    let a = fdepth(&["experiment", config.to_str().unwrap()]);
    assert!(a.status.success(), "{a:?}");
    let table = stdout(&a);
    assert!(table.starts_with("method,FSD,KFSD"), "{table}");
    assert!(table.contains("WMD,"));
    assert!(table.contains("kNN,"));

    let b = fdepth(&["experiment", config.to_str().unwrap()]);
    assert_eq!(stdout(&b), table, "identical config must emit identical bytes");

    let md = fdepth(&["experiment", config.to_str().unwrap(), "--format", "markdown"]);
    assert!(stdout(&md).starts_with("| Method | FSD | KFSD |"));
}

#[test]
fn exit_codes_for_config_and_data_errors() {
    // clap usage errors exit with 2
    let usage = fdepth(&["depth", "--data"]);
    assert_eq!(usage.status.code(), Some(2));

    // missing data file: data error, 3
    let missing = fdepth(&["depth", "--data", "/nonexistent/x.csv", "--depth", "fsd"]);
    assert_eq!(missing.status.code(), Some(3), "{missing:?}");

    // malformed curve file: data error, 3
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "label,3,2,1\n0,1,2,3\n").unwrap();
    let parse = fdepth(&["depth", "--data", bad.to_str().unwrap(), "--depth", "fsd"]);
    assert_eq!(parse.status.code(), Some(3), "{parse:?}");

    // malformed config: config error, 2
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[experiment]\nreplications = 0\n").unwrap();
    let conf = fdepth(&["experiment", cfg.to_str().unwrap()]);
    assert_eq!(conf.status.code(), Some(2), "{conf:?}");

    // method without a depth: config error, 2
    let ok_file = dir.path().join("ok.csv");
    std::fs::write(&ok_file, "label,0,1\n0,1,2\n1,3,4\n").unwrap();
    let no_depth = fdepth(&[
        "classify",
        "--train",
        ok_file.to_str().unwrap(),
        "--query",
        ok_file.to_str().unwrap(),
        "--method",
        "wmd",
    ]);
    assert_eq!(no_depth.status.code(), Some(2), "{no_depth:?}");
}
