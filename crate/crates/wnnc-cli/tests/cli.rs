//! End-to-end checks of the command-line surface: flag validation and exit
//! codes, file round trips, determinism, and backend equivalence.

use std::path::Path;
use std::process::{Command, Output};

fn wnnc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wnnc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_line(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stdout);
    serde_json::from_str(text.lines().last().expect("stdout has a line"))
        .expect("valid json report")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn orient_then_eval_meets_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("oriented.ply");
    let gt = dir.path().join("gt.ply");
    let run = wnnc(&[
        "orient",
        "--shape",
        "sphere:2000",
        "--seed",
        "3",
        "--output",
        path_str(&out),
        "--write-gt",
        path_str(&gt),
        "--json",
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let report = json_line(&run);
    assert_eq!(report["input_points"], 2000);
    assert_eq!(report["backend"], "treecode");
    assert!(report["t_pre"].as_f64().unwrap() >= 0.0);
    assert!(report["t_main"].as_f64().unwrap() > 0.0);
    assert_eq!(report["zero_normals"], 0);

    let eval = wnnc(&["eval", "--recon", path_str(&out), "--gt", path_str(&gt), "--json"]);
    assert!(eval.status.success());
    let scores = json_line(&eval);
    assert!(scores["p_co"].as_f64().unwrap() >= 99.9);
    assert!(scores["ae_pcd"].as_f64().unwrap() <= 0.01);
}

#[test]
fn single_iteration_schedule_works() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("one.xyz");
    let run = wnnc(&[
        "orient",
        "--shape",
        "sphere:500",
        "--iters",
        "1",
        "--output",
        path_str(&out),
    ]);
    assert!(run.status.success());
    assert!(out.exists());
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 500);
    // xyz rows carry positions plus normals
    assert_eq!(text.lines().next().unwrap().split_whitespace().count(), 6);
}

#[test]
fn identical_runs_are_identical_for_both_backends() {
    let dir = tempfile::tempdir().unwrap();
    for backend in ["dense", "treecode"] {
        let a = dir.path().join(format!("{backend}_a.ply"));
        let b = dir.path().join(format!("{backend}_b.ply"));
        for path in [&a, &b] {
            let run = wnnc(&[
                "orient",
                "--shape",
                "sphere:500",
                "--iters",
                "5",
                "--backend",
                backend,
                "--seed",
                "11",
                "--output",
                path_str(path),
            ]);
            assert!(run.status.success());
        }
        let bytes_a = std::fs::read(&a).unwrap();
        let bytes_b = std::fs::read(&b).unwrap();
        assert_eq!(bytes_a, bytes_b, "{backend} runs differ");
    }
}

#[test]
fn backends_agree_on_the_same_instance() {
    let dir = tempfile::tempdir().unwrap();
    let dense = dir.path().join("dense.ply");
    let tree = dir.path().join("tree.ply");
    for (backend, path) in [("dense", &dense), ("treecode", &tree)] {
        let run = wnnc(&[
            "orient",
            "--shape",
            "sphere:2000",
            "--backend",
            backend,
            "--seed",
            "7",
            "--output",
            path_str(path),
        ]);
        assert!(run.status.success());
    }
    let eval = wnnc(&["eval", "--recon", path_str(&tree), "--gt", path_str(&dense), "--json"]);
    assert!(eval.status.success());
    let scores = json_line(&eval);
    let ae = scores["ae_pcd"].as_f64().unwrap();
    assert!(ae <= 5e-3, "backend disagreement ae={ae}");
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.ply");
    // conflicting input selectors
    let run = wnnc(&[
        "orient",
        "--input",
        "a.ply",
        "--shape",
        "sphere:100",
        "--output",
        path_str(&out),
    ]);
    assert_eq!(run.status.code(), Some(2));
    // inverted widths
    let run = wnnc(&[
        "orient",
        "--shape",
        "sphere:100",
        "--w-min",
        "0.1",
        "--w-max",
        "0.01",
        "--output",
        path_str(&out),
    ]);
    assert_eq!(run.status.code(), Some(2));
    // nonpositive width
    let run = wnnc(&[
        "orient",
        "--shape",
        "sphere:100",
        "--w-min",
        "0",
        "--output",
        path_str(&out),
    ]);
    assert_eq!(run.status.code(), Some(2));
    // unknown shape
    let run = wnnc(&["orient", "--shape", "bunny:100", "--output", path_str(&out)]);
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn data_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.ply");
    let run = wnnc(&[
        "orient",
        "--input",
        "/nonexistent/cloud.ply",
        "--output",
        path_str(&out),
    ]);
    assert_eq!(run.status.code(), Some(3));

    let bad = dir.path().join("bad.xyz");
    std::fs::write(&bad, "1 2\n").unwrap();
    let run = wnnc(&["orient", "--input", path_str(&bad), "--output", path_str(&out)]);
    assert_eq!(run.status.code(), Some(3));
}

#[test]
fn degenerate_cloud_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.ply");
    let cloud = dir.path().join("degenerate.xyz");
    std::fs::write(&cloud, "1 1 1\n1 1 1\n1 1 1\n").unwrap();
    let run = wnnc(&["orient", "--input", path_str(&cloud), "--output", path_str(&out)]);
    assert_eq!(run.status.code(), Some(4));
    let stderr = String::from_utf8_lossy(&run.stderr);
    assert!(stderr.contains("degenerate"), "stderr: {stderr}");
}

#[test]
fn bench_prints_a_row_per_size() {
    let run = wnnc(&[
        "bench",
        "--shape",
        "sphere",
        "--sizes",
        "500,1000",
        "--iters",
        "1",
        "--json",
    ]);
    assert!(run.status.success());
    let text = String::from_utf8_lossy(&run.stdout);
    let rows: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["n"], 500);
    assert_eq!(rows[1]["n"], 1000);
    for row in rows {
        assert!(row["t_pre"].as_f64().unwrap() >= 0.0);
        assert!(row["t_main"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn orient_accepts_file_input() {
    let dir = tempfile::tempdir().unwrap();
    // build an input file with a synthetic run, then orient it from disk
    let source = dir.path().join("cloud.xyz");
    let first = dir.path().join("first.ply");
    let run = wnnc(&[
        "orient",
        "--shape",
        "torus:1500",
        "--seed",
        "5",
        "--output",
        path_str(&source),
    ]);
    assert!(run.status.success());
    let run = wnnc(&[
        "orient",
        "--input",
        path_str(&source),
        "--iters",
        "10",
        "--output",
        path_str(&first),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let report = String::from_utf8_lossy(&run.stdout);
    assert!(report.contains("input_points: 1500"));
}
