use std::fs;
use std::process::{Command, Output};

use centroidal_core::model::{serialize, three_link};

fn kit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_centroidal-kit"))
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn usage_and_model_errors_exit_one() {
    assert_eq!(code(&kit(&["bogus"])), 1);
    assert_eq!(code(&kit(&["check-flatness"])), 1);
    assert_eq!(code(&kit(&["--help"])), 0);
    let missing = kit(&["info", "--model", "no/such/model.toml"]);
    assert_eq!(code(&missing), 1);
    assert!(String::from_utf8_lossy(&missing.stderr).contains("no/such/model.toml"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(
        &bad,
        serialize(&three_link(1.0)).replacen("mass = 1.0", "mass = -1.0", 1),
    )
    .unwrap();
    let out = kit(&["info", "--model", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("link `base`: inertia not SPD"), "{err}");
}

#[test]
fn model_files_match_builtins() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("three_link.toml");
    fs::write(&file, serialize(&three_link(1.0))).unwrap();
    let from_file = kit(&["info", "--model", file.to_str().unwrap()]);
    let builtin = kit(&["info", "--model", "three-link:d=1"]);
    assert_eq!(code(&from_file), 0);
    assert_eq!(from_file.stdout, builtin.stdout);
}

#[test]
fn flatness_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = kit(&[
        "check-flatness",
        "--model",
        "three-link:d=1",
        "--grid",
        "8x6",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("flatness.json")).unwrap())
            .unwrap();
    assert_eq!(report["flat"], false);
    assert_eq!(report["grid"]["counts"], serde_json::json!([8, 6]));
    assert!(report["max_norm"].as_f64().unwrap() > 0.01);
}

#[test]
fn thread_count_does_not_change_results() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_centroidal-kit"))
            .args([
                "check-flatness",
                "--model",
                "three-link:d=1",
                "--grid",
                "12",
            ])
            .env("CENTROIDAL_KIT_THREADS", threads)
            .output()
            .unwrap()
            .stdout
    };
    assert_eq!(run("1"), run("4"));
}

#[test]
fn holonomy_writes_frames_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let out = kit(&[
        "holonomy",
        "--model",
        "three-link:d=1",
        "--snapshots",
        "6",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let mut svgs: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".svg"))
        .collect();
    svgs.sort();
    assert_eq!(svgs.len(), 6);
    assert_eq!(svgs[0], "snapshot_00_t0.000.svg");
    assert_eq!(svgs[5], "snapshot_05_t10.000.svg");
    let csv = fs::read_to_string(dir.path().join("centroidal.csv")).unwrap();
    assert!(csv.starts_with("t,RC_00,"));
    assert_eq!(csv.lines().count(), 10_002);
}

#[test]
fn simulate_outputs_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = kit(&[
        "simulate",
        "--model",
        "three-link:d=1",
        "--s0",
        "0.3,-0.2",
        "--sdot0",
        "1,-1",
        "--t-end",
        "1",
        "--check-conservation",
        "--out",
        d,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["trajectory.csv", "momentum.csv", "centroidal.csv"] {
        assert_eq!(
            fs::read_to_string(dir.path().join(name))
                .unwrap()
                .lines()
                .count(),
            1002,
            "{name}"
        );
    }
    let header = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(header.starts_with("t,R_00,"));

    let blown = kit(&[
        "simulate",
        "--model",
        "three-link:d=1",
        "--sdot0",
        "200,-300",
        "--dt",
        "0.5",
        "--t-end",
        "20",
    ]);
    assert_eq!(code(&blown), 3);
}

#[test]
fn momentum_along_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = kit(&[
        "momentum",
        "--model",
        "three-link:d=1",
        "--trajectory",
        "sinusoid:T=2",
        "--dt",
        "1e-2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("momentum.csv")).unwrap();
    assert!(csv.starts_with("t,JA_x,"));
    assert_eq!(csv.lines().count(), 202);
}
