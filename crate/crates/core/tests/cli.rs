use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_randse");
const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/tiny.csv");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("RANDSE_THREADS").output().unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn estimate_matches_fixture_oracles() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&[
        "estimate",
        "--data",
        FIXTURE,
        "--methods",
        "classic,hc0,hc1,cluster,cluster+adj,hac:0,hac:1,hac:2,tsls",
        "--out",
        out,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let expected: Value = serde_json::from_str(include_str!("fixtures/tiny_expected.json")).unwrap();
    let rows: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("estimates.json")).unwrap()).unwrap();
    let keys = ["classic", "hc0", "hc1", "cluster", "cluster_adj", "hac_0", "hac_1", "hac_2", "tsls"];
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), keys.len());
    for (row, key) in rows.iter().zip(keys) {
        let se = row["se"].as_f64().unwrap();
        let want = expected[key].as_f64().unwrap();
        assert!(rel(se * se, want) < 1e-10, "{key}: {} vs {want}", se * se);
        let beta = row["beta_hat"].as_f64().unwrap();
        let want_beta = expected[if key == "tsls" { "beta_2sls" } else { "beta_ols" }].as_f64().unwrap();
        assert!(rel(beta, want_beta) < 1e-10);
        let half = row["ci_hi"].as_f64().unwrap() - beta;
        assert!((half - 1.959963984540054 * se).abs() < 1e-9);
    }
    let csv = std::fs::read_to_string(dir.path().join("estimates.csv")).unwrap();
    assert!(csv.starts_with("method,beta_hat,se,ci_lo,ci_hi\n"));
    assert!(csv.contains("\ncluster:assign+adj,"));
}

#[test]
fn estimate_default_methods() {
    let o = run(&["estimate", "--data", FIXTURE]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for m in ["classic", "hc0", "hc1", "hac:2", "cluster:assign", "tsls"] {
        assert!(text.contains(m), "{m} missing from\n{text}");
    }
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["simulate", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["simulate"]).status.code(), Some(1));
    let o = run(&["simulate", "--preset", "missing"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(String::from_utf8_lossy(&o.stderr).lines().count(), 1);
    assert_eq!(run(&["estimate", "--data", "/nonexistent.csv"]).status.code(), Some(2));
    assert_eq!(run(&["estimate", "--data", FIXTURE, "--level", "1.5"]).status.code(), Some(2));
}

#[test]
fn every_subcommand_has_help() {
    for sub in ["simulate", "estimate", "diagnose", "lemma-check", "list-presets"] {
        let o = run(&[sub, "--help"]);
        assert!(o.status.success());
        assert!(String::from_utf8_lossy(&o.stdout).contains("Usage:"));
    }
    let help = String::from_utf8(run(&["simulate", "--help"]).stdout).unwrap();
    for flag in [
        "--preset", "--config", "--set", "--n", "--R", "--seed", "--parallelism", "--methods", "--out", "--per-rep",
        "--level", "--t-dist", "--assert",
    ] {
        assert!(help.contains(flag), "{flag}");
    }
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        r#"
preset = "strong-exog-ar1"
n = 300
methods = ["classic", "hc0"]

[error0]
rho = 0.2

[run]
R = 40
seed = 5
per_rep = true
"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "error0.rho=0.3",
        "--n",
        "250",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("precedence: flags > --set > config > preset defaults"));
    let doc: Value = serde_json::from_str(&read(&out, "summary.json")).unwrap();
    assert_eq!(doc["spec"]["n"], 250);
    assert_eq!(doc["spec"]["error0"]["rho"], 0.3);
    assert_eq!(doc["metadata"]["base_seed"], 5);
    assert_eq!(doc["metadata"]["replications"], 40);
    assert!(doc["metadata"]["derivation_version"].as_str().unwrap().starts_with("randse-stream-v1"));
    assert_eq!(doc["result"]["methods"].as_array().unwrap().len(), 2);
    assert_eq!(read(&out, "replications.csv").lines().count(), 1 + 40 * 2);

    std::fs::write(&cfg, "preset = \"strong-exog-ar1\"\nunknown_key = 1\n").unwrap();
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown_key"));
}

#[test]
fn simulate_is_reproducible_and_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let args = |p: &Path, threads: &str| {
        run(&[
            "simulate", "--preset", "hetero-clustered-te", "--n", "500", "--R", "60", "--seed", "3",
            "--parallelism", threads, "--per-rep", "--out", p.to_str().unwrap(),
        ])
    };
    assert!(args(&a, "1").status.success());
    assert!(args(&b, "3").status.success());
    for f in ["summary.csv", "summary.json", "replications.csv"] {
        assert_eq!(read(&a, f), read(&b, f), "{f}");
    }
}

#[test]
fn assert_mode_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    // with 100 replications this seed lands above the band's upper edge
    let o = run(&[
        "simulate", "--preset", "strong-exog-ar1", "--set", "error0.rho=0.0", "--R", "100", "--seed", "1", "--assert",
        "--out", out,
    ]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("[FAIL] classic coverage"), "{stdout}");
    assert_eq!(o.status.code(), Some(3));
    let o = run(&["simulate", "--preset", "strong-exog-ar1", "--R", "400", "--seed", "2", "--assert", "--out", out]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("[PASS] classic coverage"));
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn diagnose_and_lemma_check() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["diagnose", "--data", FIXTURE, "--max-lag", "2", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("lambda_min"));
    let doc: Value = serde_json::from_str(&read(dir.path(), "diagnostics.json")).unwrap();
    assert_eq!(doc["has_constant"], true);
    assert_eq!(doc["martingale_stats"].as_array().unwrap().len(), 2);

    let o = run(&["lemma-check", "--rho", "0.6", "--n", "5000", "--seeds", "200", "--assert"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let mean: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("mean"))
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!((0.9..=1.1).contains(&mean));

    let o = run(&["list-presets"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with(' ')).count(), 5);
}
