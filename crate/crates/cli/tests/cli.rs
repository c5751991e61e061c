use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn kernmem(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kernmem"))
        .current_dir(dir)
        .env_remove("KERNMEM_JOBS")
        .args(args)
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

#[test]
fn gen_writes_versioned_pattern_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = kernmem(dir.path(), &["gen", "--geometry", "bipolar", "--n", "100", "--m", "50", "--f", "0.5", "--seed", "1", "--out", "p.csv"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("p.csv")).unwrap();
    assert!(text.starts_with("# kernmem-patterns v1 "));
    assert_eq!(text.lines().count(), 101);
    assert!(stderr(&out).contains("resolved config"));
}

#[test]
fn stored_pattern_is_recalled_at_step_zero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(kernmem(d, &["gen", "--geometry", "bipolar", "--n", "40", "--m", "20", "--seed", "1", "--out", "p.csv"]).status.success());
    let train = kernmem(d, &["train", "--patterns", "p.csv", "--mode", "auto-noself", "--kernel", "poly:2", "--rule", "hard-margin"]);
    assert!(train.status.success(), "{}", stderr(&train));
    let net: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("network.json")).unwrap()).unwrap();
    assert_eq!(net["pattern_file_ref"], "p.csv");
    let recall = kernmem(d, &["recall", "--query-file", "p.csv", "--column", "7"]);
    assert!(recall.status.success(), "{}", stderr(&recall));
    assert!(stdout(&recall).contains("converged=true steps=0"));
    let trace = fs::read_to_string(d.join("trace.csv")).unwrap();
    assert!(trace.trim_end().ends_with("#converged=true steps=0 cycle=false ties=0"));
}

#[test]
fn pipeline_is_deterministic() {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        kernmem(d, &["gen", "--geometry", "bipolar", "--n", "30", "--m", "8", "--seed", "5", "--out", "p.csv"]);
        kernmem(d, &["train", "--patterns", "p.csv", "--rule", "sbp", "--sbp-iters", "2000", "--seed", "3"]);
        let q = "1,-1,1,-1,1,-1,1,-1,1,-1,1,-1,1,-1,1,-1,1,-1,1,-1,1,-1,1,-1,1,-1,1,-1,1,-1";
        kernmem(d, &["recall", "--query", q, "--update", "async", "--seed", "2"]);
        ["p.csv", "network.json", "trace.csv"].map(|f| fs::read(d.join(f)).unwrap())
    };
    assert_eq!(run(), run());
}

#[test]
fn noise_experiment_hits_the_landmark() {
    let dir = tempfile::tempdir().unwrap();
    let out = kernmem(
        dir.path(),
        &["experiment", "noise", "--n", "100", "--r", "5", "--sigma-grid", "auto", "--trials", "1000", "--seed", "7", "--out-dir", "reports"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let mut reader = csv::Reader::from_path(dir.path().join("reports/noise-7.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let row = reader
        .records()
        .map(|r| r.unwrap())
        .find(|r| (r[col("x")].parse::<f64>().unwrap() - 0.25).abs() < 1e-12)
        .unwrap();
    let recovery: f64 = row[col("mean")].parse().unwrap();
    assert!((recovery - 0.5).abs() <= 0.05, "recovery {recovery}");
    assert!(dir.path().join("reports/noise-7.json").exists());
}

#[test]
fn jobs_flag_and_environment_give_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["experiment", "svp", "--n", "30", "--m-grid", "2,10,40", "--trials", "8", "--seed", "3"];
    let one = kernmem(dir.path(), &[&args[..], &["--jobs", "1"]].concat());
    let env = Command::new(env!("CARGO_BIN_EXE_kernmem"))
        .current_dir(dir.path())
        .env("KERNMEM_JOBS", "3")
        .args(args)
        .output()
        .unwrap();
    assert!(one.status.success() && env.status.success());
    assert_eq!(one.stdout, env.stdout);
    assert!(stderr(&env).contains("\"jobs\":3"));
}

#[test]
fn kernel_command_evaluates_pairs_and_grids() {
    let dir = tempfile::tempdir().unwrap();
    let out = kernmem(dir.path(), &["kernel", "--kernel", "ipoly:2", "--x", "1,2", "--y", "3,-1"]);
    assert_eq!(stdout(&out).trim(), "4.0");
    let out = kernmem(dir.path(), &["kernel", "--kernel", "sdm-cube:8:3", "--grid", "0:8:9"]);
    let lines: Vec<String> = stdout(&out).lines().map(String::from).collect();
    assert_eq!(lines.len(), 10);
    assert_eq!(lines[1], "0.0,0.36328125");
    assert_eq!(lines[9], "8.0,0.0");
}

#[test]
fn exit_codes_separate_usage_from_domain_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(kernmem(d, &["gen", "--geometry", "bipolar", "--n", "4", "--m", "2", "--bogus", "1", "--out", "x"]).status.code(), Some(2));
    assert_eq!(kernmem(d, &["experiment", "teleport"]).status.code(), Some(2));
    assert_eq!(kernmem(d, &["kernel", "--kernel", "poly:0", "--x", "1", "--y", "1"]).status.code(), Some(2));
    assert_eq!(kernmem(d, &["gen", "--geometry", "bipolar", "--n", "4", "--m", "2", "--f", "1.5", "--out", "x"]).status.code(), Some(1));
    let missing = kernmem(d, &["train", "--patterns", "missing.csv"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(stderr(&missing).contains("missing.csv"));

    fs::write(d.join("bad.csv"), "# kernmem-patterns v1 geometry=bipolar n=2 m=2 f=0.5\n1,-1\n1,2\n").unwrap();
    let bad = kernmem(d, &["train", "--patterns", "bad.csv"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stderr(&bad).contains("line 3"));

    fs::write(d.join("garbage.json"), "{\"mode\": 3").unwrap();
    let garbage = kernmem(d, &["recall", "--network", "garbage.json", "--query", "1"]);
    assert_eq!(garbage.status.code(), Some(1));
    assert!(!stderr(&garbage).contains("panicked"));
}

#[test]
fn help_lists_types_and_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let help = stdout(&kernmem(dir.path(), &["train", "--help"]));
    for flag in ["--patterns <PATH>", "--kernel <KERNEL>", "--tol <FLOAT>", "--seed <INT>", "[default: hard-margin]", "[default: linear]"] {
        assert!(help.contains(flag), "missing {flag}");
    }
    for sub in [
        vec!["gen"],
        vec!["recall"],
        vec!["kernel"],
        vec!["experiment", "margin"],
        vec!["experiment", "capacity-gaussian"],
        vec!["experiment", "noise"],
        vec!["experiment", "sdm-kernel"],
        vec!["experiment", "hopfield"],
        vec!["experiment", "svp"],
    ] {
        let out = kernmem(dir.path(), &[&sub[..], &["--help"]].concat());
        assert!(out.status.success());
        assert!(stdout(&out).contains("--"), "{sub:?}");
    }
    let noise = stdout(&kernmem(dir.path(), &["experiment", "noise", "--help"]));
    assert!(noise.contains("--jobs <INT>") && noise.contains("KERNMEM_JOBS") && noise.contains("[default: auto]"));
}
