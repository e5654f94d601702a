use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lineopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lineopt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = lineopt(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(ok(args).trim()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn dump_output_loads_back_identically() {
    let dir = tempfile::tempdir().unwrap();
    let first = ok(&["dump"]);
    let file = dir.path().join("catalog.toml");
    std::fs::write(&file, &first).unwrap();
    assert_eq!(ok(&["dump", "--catalog", p(&file)]), first);
}

#[test]
fn simulate_prints_cost_and_writes_step_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("steps.csv");
    let v = json(&[
        "simulate",
        "--config",
        "6,3,6,3,6,3,6,3,6,3,6,3",
        "--trace",
        p(&trace),
    ]);
    let total = v["total"].as_f64().unwrap();
    let parts = v["production_term"].as_f64().unwrap() + v["idle_term"].as_f64().unwrap();
    assert_eq!(total, parts);
    let text = std::fs::read_to_string(&trace).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("step,slot_time,produced_1"));
    // one row per half-hour slot of 2023
    assert_eq!(lines.count(), 365 * 48);
}

#[test]
fn bad_input_fails_with_a_message() {
    for args in [
        &["simulate", "--config", "1,2,3"][..],
        &["simulate", "--config", "99,1,1,1,1,1,1,1,1,1,1,1"],
        &["reduce", "--margin", "0.0001", "--dev", "no", "--out", "/nonexistent/x.json"],
        &["solve", "--solver", "sa"],
        &["mps", "dump", "/nonexistent/model"],
    ] {
        let out = lineopt(args);
        assert!(!out.status.success(), "{args:?} should fail");
        assert!(String::from_utf8_lossy(&out.stderr).contains("error"), "{args:?}");
    }
}

#[test]
fn reduce_encode_decode_solve_boost_pgco() {
    let dir = tempfile::tempdir().unwrap();
    let space = dir.path().join("space.json");
    let v = json(&["reduce", "--margin", "0.015", "--dev", "no", "--out", p(&space)]);
    assert_eq!(v["total_size"], 729);

    // basic packs the flat index (729 states), the others three 4-bit fields
    for (scheme, width) in [("basic", 10), ("gray", 12), ("pggray", 12)] {
        let bits = ok(&["encode", "--space", p(&space), "--scheme", scheme, "--triple", "4,0,8"]);
        assert_eq!(bits.trim().len(), width);
        let back = ok(&["decode", "--space", p(&space), "--scheme", scheme, "--bits", bits.trim()]);
        assert_eq!(back.trim(), "4,0,8");
    }
    let out = lineopt(&["encode", "--space", p(&space), "--scheme", "gray", "--triple", "9,0,0"]);
    assert!(!out.status.success());

    let trace = dir.path().join("solve.csv");
    let args = [
        "solve", "--space", p(&space), "--solver", "ga1", "--budget", "40", "--seed", "5", "--trace", p(&trace),
    ];
    let v = json(&args);
    assert_eq!(v["evaluations"], 40);
    let first = std::fs::read_to_string(&trace).unwrap();
    assert!(first.starts_with("eval_index,config,cost,best_so_far\n"));
    assert_eq!(first.lines().count(), 41);
    json(&args);
    assert_eq!(std::fs::read_to_string(&trace).unwrap(), first);

    let raw = json(&["solve", "--space", p(&space), "--solver", "sa", "--budget", "40", "--no-cache"]);
    assert_eq!(raw["evaluations"], 40);

    let btrace = dir.path().join("boost.csv");
    let v = json(&[
        "boost", "--space", p(&space), "--scheme", "pggray", "--solver", "ga2", "--seed", "1", "--budget", "60",
        "--seed-evals", "30", "--chi", "3", "--trace", p(&btrace),
    ]);
    assert_eq!(v["solver"], "ga2+geo");
    assert_eq!(v["evaluations"], 60);
    assert_eq!(std::fs::read_to_string(&btrace).unwrap().lines().count(), 61);

    let v = json(&["pgco", "--space", p(&space), "--roots", "2", "--branches", "2"]);
    assert_eq!(v["explored"], 8);
    assert!(v["cost"]["total"].as_f64().unwrap() > 0.0);
}

#[test]
fn twelve_body_solve_and_boost() {
    let v = json(&["solve", "--formulation", "12body", "--solver", "pt", "--budget", "15"]);
    assert_eq!(v["evaluations"], 15);
    assert_eq!(v["best_point"].as_array().unwrap().len(), 6);
    let out = lineopt(&["boost", "--formulation", "12body", "--scheme", "pggray", "--solver", "ga1"]);
    assert!(!out.status.success());
}

#[test]
fn mps_files_round_trip_between_formats() {
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("m.bin");
    let txt = dir.path().join("m.txt");
    let bin2 = dir.path().join("m2.bin");
    ok(&["mps", "init", "--sites", "9", "--chi", "4", "--seed", "2", "--out", p(&bin)]);
    std::fs::write(&txt, ok(&["mps", "dump", p(&bin)])).unwrap();
    ok(&["mps", "load", p(&txt), "--out", p(&bin2)]);
    assert_eq!(std::fs::read(&bin).unwrap(), std::fs::read(&bin2).unwrap());
    assert_eq!(ok(&["mps", "dump", p(&bin2)]), std::fs::read_to_string(&txt).unwrap());

    let samples = ok(&["mps", "sample", p(&bin), "--count", "5", "--seed", "1"]);
    assert_eq!(samples.lines().count(), 5);
    assert!(samples.lines().all(|l| l.len() == 9));
    assert_eq!(samples, ok(&["mps", "sample", p(&txt), "--count", "5", "--seed", "1"]));
}

#[test]
fn bench_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.toml");
    std::fs::write(
        &grid,
        "margins = [0.015]\ndev_modes = [\"no\"]\nschemes = [\"gray\"]\nsolvers = [\"sa\"]\nruns_per_cell = 2\nbudget = 30\nseed_evals = 20\nchi = 2\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    ok(&["bench", "--grid", p(&grid), "--out", p(&out)]);
    for f in ["summary.json", "heatmap_gray.csv", "relative_conv.csv", "relative_geo.csv", "convergence_3body.csv"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    assert!(out.join("traces/noDev-1.5/sa/conv_001.csv").is_file());
    assert!(out.join("traces/noDev-1.5/sa/gray_chi2_001.csv").is_file());
}
