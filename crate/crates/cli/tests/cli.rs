use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_guidesyn"));
    c.env("RUST_LOG", "error");
    c
}

fn bench_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../benchmarks")
}

fn records(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap_or_default()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

#[test]
fn llm_only_with_response_one() {
    let tmp = tempfile::tempdir().unwrap();
    let results = tmp.path().join("r.jsonl");
    let b = bench_dir();
    let out = run(&[
        "solve",
        b.join("lia/max3.sl").to_str().unwrap(),
        "--mode",
        "llm-only",
        "--script",
        b.join("mock/response1.jsonl").to_str().unwrap(),
        "--results",
        results.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        stdout.trim(),
        "(define-fun fn ((vr0 Int) (vr1 Int) (vr2 Int)) Int (ite (>= vr0 vr1) (ite (>= vr0 vr2) vr0 vr2) (ite (>= vr1 vr2) vr1 vr2)))"
    );
    let r = &records(&results)[0];
    assert_eq!(r["solved"], true);
    assert_eq!(r["candidates"], 0);
    assert!(r["llm_calls"].as_u64().unwrap() >= 1);
    assert_eq!(r["mode"], "llm-only");
}

#[test]
fn enum_baseline_solves_max3() {
    let tmp = tempfile::tempdir().unwrap();
    let results = tmp.path().join("r.jsonl");
    let out = run(&[
        "solve",
        bench_dir().join("lia/max3_r5.sl").to_str().unwrap(),
        "--mode",
        "enum-baseline",
        "--seed",
        "1",
        "--results",
        results.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = &records(&results)[0];
    assert_eq!(r["solved"], true);
    assert_eq!(r["seed"], 1);
    assert!(r["solution"].as_str().unwrap().starts_with("(define-fun fn "));
}

#[test]
fn original_names_are_restored() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[
        "solve",
        bench_dir().join("lia/max2.sl").to_str().unwrap(),
        "--mode",
        "astar-baseline",
        "--results",
        tmp.path().join("r.jsonl").to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("(define-fun max2 ((a Int) (b Int)) Int"), "{stdout}");
}

#[test]
fn missing_weights_fall_back_to_ones() {
    let tmp = tempfile::tempdir().unwrap();
    let results = tmp.path().join("r.jsonl");
    let out = run(&[
        "solve",
        bench_dir().join("lia/max2.sl").to_str().unwrap(),
        "--mode",
        "astar-pcfg",
        "--weights",
        tmp.path().join("absent.json").to_str().unwrap(),
        "--results",
        results.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(records(&results)[0]["llm_calls"], 0);
}

#[test]
fn weights_file_is_used() {
    let tmp = tempfile::tempdir().unwrap();
    let weights = tmp.path().join("w.json");
    std::fs::write(
        &weights,
        r#"{"Start -> (ite StartBool Start Start)": 3, "Start -> vr0": 3, "Start -> vr1": 3, "Start -> vr2": 4, "StartBool -> (>= Start Start)": 3}"#,
    )
    .unwrap();
    // the weights file is keyed by the benchmark's own rule text; max3_r5.sl already uses vr names
    let out = run(&[
        "solve",
        bench_dir().join("lia/max3_r5.sl").to_str().unwrap(),
        "--mode",
        "astar-pcfg",
        "--weights",
        weights.to_str().unwrap(),
        "--results",
        tmp.path().join("r.jsonl").to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    std::fs::write(&weights, r#"{"Start -> nope": 1}"#).unwrap();
    let out = run(&[
        "solve",
        bench_dir().join("lia/max3_r5.sl").to_str().unwrap(),
        "--mode",
        "astar-pcfg",
        "--weights",
        weights.to_str().unwrap(),
        "--results",
        tmp.path().join("r.jsonl").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn llm_mode_without_backend_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[
        "solve",
        bench_dir().join("lia/max2.sl").to_str().unwrap(),
        "--mode",
        "llm-only",
        "--results",
        tmp.path().join("r.jsonl").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("backend"));
}

#[test]
fn parse_errors_and_bad_modes_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.sl");
    std::fs::write(&bad, "(set-logic LIA) (synth-fun").unwrap();
    let out = run(&["solve", bad.to_str().unwrap(), "--mode", "astar-baseline", "--results", tmp.path().join("r").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["solve", bad.to_str().unwrap(), "--mode", "astar"]);
    assert!(!out.status.success());
}

#[test]
fn zero_timeout_reports_timeout() {
    let tmp = tempfile::tempdir().unwrap();
    let results = tmp.path().join("r.jsonl");
    let out = run(&[
        "solve",
        bench_dir().join("lia/max2.sl").to_str().unwrap(),
        "--mode",
        "astar-baseline",
        "--timeout",
        "0",
        "--results",
        results.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let r = &records(&results)[0];
    assert_eq!(r["status"], "timeout");
    assert_eq!(r["verifier_calls"], 0);
}

#[test]
fn config_file_paths_are_relative_to_it() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::copy(bench_dir().join("mock/response1.jsonl"), tmp.path().join("script.jsonl")).unwrap();
    let cfg = tmp.path().join("cfg.toml");
    std::fs::write(
        &cfg,
        "seed = 7\ntimeout_s = 60\n[solver]\nquery_timeout = 10\n[llm]\nkind = \"mock\"\nscript = \"script.jsonl\"\ntranscript = \"log.jsonl\"\n",
    )
    .unwrap();
    let results = tmp.path().join("r.jsonl");
    let out = run(&[
        "solve",
        bench_dir().join("lia/max3.sl").to_str().unwrap(),
        "--mode",
        "llm-only",
        "--config",
        cfg.to_str().unwrap(),
        "--results",
        results.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(records(&results)[0]["seed"], 7);
    let log = std::fs::read_to_string(tmp.path().join("log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 1);
    assert!(log.contains("You are a good synthesizer."));
}

#[test]
fn bench_three_repeats_over_five_benchmarks() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("suite");
    std::fs::create_dir(&dir).unwrap();
    for f in ["lia/max2.sl", "lia/plus.sl", "bv/lowbit.sl", "bv/double.sl", "inv/counter.sl"] {
        let name = f.replace('/', "_");
        std::fs::copy(bench_dir().join(f), dir.join(name)).unwrap();
    }
    let results = tmp.path().join("r.jsonl");
    let out = run(&[
        "bench",
        dir.to_str().unwrap(),
        "--modes",
        "astar-baseline",
        "--repeats",
        "3",
        "--timeout",
        "60",
        "--results",
        results.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rs = records(&results);
    assert_eq!(rs.len(), 15);
    let seeds: Vec<u64> = rs.iter().take(3).map(|r| r["seed"].as_u64().unwrap()).collect();
    assert_eq!(seeds, [0, 1, 2]);
    assert!(rs.iter().all(|r| r["solved"] == true));
    let table = String::from_utf8(out.stdout).unwrap();
    for cat in ["LIA", "BV", "INV"] {
        assert!(table.lines().any(|l| l.contains("astar-baseline") && l.contains(cat)), "{table}");
    }
    assert!(table.contains("mean over solved runs only"));
}

#[test]
fn bench_on_empty_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let results = tmp.path().join("r.jsonl");
    let out = run(&[
        "bench",
        tmp.path().to_str().unwrap(),
        "--modes",
        "astar-baseline,enum-baseline",
        "--results",
        results.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(records(&results).is_empty());
}

#[test]
fn bench_isolates_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("suite");
    std::fs::create_dir(&dir).unwrap();
    std::fs::copy(bench_dir().join("lia/plus.sl"), dir.join("a_plus.sl")).unwrap();
    std::fs::write(dir.join("b_broken.sl"), "(synth-fun f").unwrap();
    std::fs::copy(bench_dir().join("lia/max2.sl"), dir.join("c_max2.sl")).unwrap();
    let results = tmp.path().join("r.jsonl");
    let out = run(&["bench", dir.to_str().unwrap(), "--modes", "astar-baseline", "--results", results.to_str().unwrap()]);
    assert!(out.status.success());
    let rs = records(&results);
    assert_eq!(rs.len(), 3);
    assert_eq!(rs[0]["solved"], true);
    assert_eq!(rs[1]["status"], "error");
    assert_eq!(rs[2]["solved"], true);

    // a solver that cannot start fails every run without stopping the sweep
    let out = run(&[
        "bench",
        dir.to_str().unwrap(),
        "--modes",
        "astar-baseline",
        "--solver",
        "/nonexistent/solver",
        "--results",
        results.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let rs = records(&results);
    assert_eq!(rs.len(), 3);
    assert!(rs.iter().all(|r| r["solved"] == false));
    assert_eq!(rs[0]["status"], "failed");
}
