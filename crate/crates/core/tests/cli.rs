use std::path::Path;
use std::process::{Command, Output};

use uoan_core::NetworkGraph;

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uoan-sim"))
        .args(args)
        .env_remove("UOAN_SIM_THREADS")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &[&str] = &[
    "--trials",
    "3",
    "--set",
    "geometry.node_count=20",
    "--set",
    "experiment.sweep.values=[2, 8]",
];

#[test]
fn validate_accepts_shipped_configs() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in [
        "default.toml",
        "e2e_rate.toml",
        "connectivity.toml",
        "localization.toml",
    ] {
        let path = dir.join(name);
        let o = sim(&["validate", "-c", path.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stderr(&o));
        assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "ok");
    }
}

#[test]
fn unknown_override_key_is_named_and_exits_1() {
    let o = sim(&["validate", "--set", "optical.tx_powr=1.0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("optical.tx_powr"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(sim(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(sim(&["sweep"]).status.code(), Some(1));
    assert_eq!(sim(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_config_file_exits_2() {
    let o = sim(&["validate", "-c", "/nonexistent/scenario.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/scenario.toml"));
}

#[test]
fn unwritable_output_exits_2() {
    let mut args = vec!["sweep", "--out", "/nonexistent/dir/out.csv"];
    args.extend_from_slice(SMALL);
    assert_eq!(sim(&args).status.code(), Some(2));
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let mut args = vec!["sweep", "--out", out.to_str().unwrap()];
    args.extend_from_slice(SMALL);
    let o = Command::new(env!("CARGO_BIN_EXE_uoan-sim"))
        .args(&args)
        .env("UOAN_SIM_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("UOAN_SIM_THREADS"));
}

#[test]
fn sweep_writes_csv_and_manifest_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let mut args = vec!["sweep", "--out", out.to_str().unwrap(), "--seed", "5"];
        args.extend_from_slice(SMALL);
        let o = sim(&args);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        out
    };
    let a = run("a.csv");
    let b = run("b.csv");
    let csv_a = std::fs::read_to_string(&a).unwrap();
    assert_eq!(csv_a, std::fs::read_to_string(&b).unwrap());

    let mut lines = csv_a.lines();
    assert!(lines
        .next()
        .unwrap()
        .starts_with("sweep_param,sweep_value,"));
    assert_eq!(lines.count(), 2);

    let manifest = std::fs::read_to_string(dir.path().join("a.manifest.toml")).unwrap();
    assert!(manifest.contains("seed = 5"));
    assert!(manifest.contains("tool_version"));
}

#[test]
fn graph_export_is_deterministic_and_parses() {
    let args = [
        "graph",
        "--trial",
        "2",
        "--seed",
        "11",
        "--set",
        "geometry.node_count=15",
    ];
    let first = sim(&args);
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    assert_eq!(first.stdout, sim(&args).stdout);
    let g = NetworkGraph::from_json(std::str::from_utf8(&first.stdout).unwrap()).unwrap();
    assert_eq!(g.nodes().len(), 15 + 1);
}

#[test]
fn trial_and_localize_emit_json() {
    let o = sim(&["trial", "--trial", "1", "--set", "geometry.node_count=12"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["trial"], 1);

    let o = sim(&[
        "localize",
        "--mode",
        "hybrid",
        "--set",
        "geometry.node_count=12",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v[0]["nodes"].as_array().unwrap().len(), 12);
}
