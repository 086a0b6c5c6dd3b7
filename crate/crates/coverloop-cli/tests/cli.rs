//! Binary-level checks: exit codes, artifact placement, and determinism as
//! observed through the CLI.

use std::path::Path;
use std::process::Command;

fn coverloop() -> Command {
    Command::new(env!("CARGO_BIN_EXE_coverloop"))
}

fn sha(path: &Path) -> String {
    // Cheap content fingerprint; equality of full bytes is what matters.
    let bytes = std::fs::read(path).unwrap();
    format!("{}:{:x}", bytes.len(), bytes.iter().fold(0u64, |h, &b| h.wrapping_mul(31).wrapping_add(b as u64)))
}

#[test]
fn bad_covergroup_path_exits_2_without_partial_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let status = coverloop()
        .args(["run-original", "--duv", "alu", "--covergroup", "/nonexistent/cg.json"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    assert!(!out.join("dataset.csv").exists());
}

#[test]
fn unknown_flag_exits_2() {
    let status = coverloop().args(["run-original", "--bogus"]).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn repeated_seed_gives_identical_dataset_checksums() {
    let dir = tempfile::tempdir().unwrap();
    let mut sums = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("run{i}"));
        let status = coverloop()
            .args(["run-original", "--duv", "ecc", "--tests", "10", "--txns", "20", "--seed", "1"])
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
        sums.push(sha(&out.join("dataset.csv")));
    }
    assert_eq!(sums[0], sums[1]);
}

#[test]
fn out_dir_defaults_to_env_var() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("from_env");
    let status = coverloop()
        .args(["run-original", "--duv", "adc", "--tests", "4", "--txns", "10"])
        .env("COVERLOOP_OUT", &out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.join("dataset.csv").exists());
}

#[test]
fn stagewise_chain_runs_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let run = |args: &[&str]| {
        let status = coverloop().args(args).arg("--out").arg(&out).status().unwrap();
        assert_eq!(status.code(), Some(0), "failed: {args:?}");
    };
    run(&["run-original", "--duv", "ecc", "--tests", "15", "--txns", "25", "--seed", "3"]);
    run(&["prepare"]);
    run(&["train", "--algos", "linear,knn"]);
    run(&["synthesize", "--algos", "linear,knn"]);
    run(&["run-optimized", "--algos", "linear,knn"]);
    let output = coverloop()
        .args(["report", "--algos", "linear,knn"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let csv = String::from_utf8(output.stdout).unwrap();
    assert!(csv.starts_with("duv,algorithm,"));
    assert_eq!(csv.lines().count(), 3, "header plus one row per algorithm");
    assert!(out.join("report.json").exists());
}

#[test]
fn stage_out_of_order_exits_2_with_hint() {
    let dir = tempfile::tempdir().unwrap();
    let output = coverloop()
        .args(["prepare"])
        .arg("--out")
        .arg(dir.path().join("empty"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let msg = String::from_utf8(output.stderr).unwrap();
    assert!(msg.contains("run-original"), "stderr: {msg}");
}

#[test]
fn converged_closed_loop_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("loop");
    let status = coverloop()
        .args(["closed-loop", "--duv", "ecc", "--tests", "20", "--txns", "30", "--seed", "1", "--algos", "linear"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("loop_summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["converged"], serde_json::Value::Bool(true));
    assert!(out.join("iter_001").join("report.json").exists());
}

/// A bin whose range contains no representable stimulus value can never be
/// hit; targeting only missed bins then pins the regain at zero and the loop
/// must run into its cap and exit 3, still leaving reports behind.
#[test]
fn unreachable_bin_exhausts_loop_cap_with_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cg = dir.path().join("covergroup.json");
    std::fs::write(
        &cg,
        r#"{
  "bins": [
    { "name": "reachable_low", "when": { "vin": [0.0, 0.5] } },
    { "name": "reachable_high", "when": { "vin": [0.500001, 1.0] } },
    { "name": "ghost", "when": { "vin": [0.0000001, 0.0000004] } }
  ]
}"#,
    )
    .unwrap();
    let out = dir.path().join("loop");
    let status = coverloop()
        .args([
            "closed-loop", "--duv", "adc", "--tests", "8", "--txns", "20", "--seed", "2",
            "--algos", "linear", "--max-iters", "2", "--only-missed",
        ])
        .arg("--covergroup")
        .arg(&cg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("loop_summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["converged"], serde_json::Value::Bool(false));
    assert_eq!(summary["iterations"], serde_json::json!(2));
    for iter in ["iter_001", "iter_002"] {
        assert!(out.join(iter).join("report.json").exists(), "{iter} report missing");
    }
}

/// `--only-missed` with nothing missed synthesizes empty plans; the loop
/// cannot evaluate a regain and must stop at its cap without crashing.
#[test]
fn only_missed_with_full_coverage_exits_3_gracefully() {
    let dir = tempfile::tempdir().unwrap();
    let cg = dir.path().join("covergroup.json");
    std::fs::write(
        &cg,
        r#"{ "bins": [ { "name": "everything", "when": { "vin": [0.0, 1.0] } } ] }"#,
    )
    .unwrap();
    let out = dir.path().join("loop");
    let status = coverloop()
        .args([
            "closed-loop", "--duv", "adc", "--tests", "3", "--txns", "5", "--seed", "4",
            "--algos", "linear", "--max-iters", "1", "--only-missed",
        ])
        .arg("--covergroup")
        .arg(&cg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
    assert!(out.join("loop_summary.json").exists());
}
