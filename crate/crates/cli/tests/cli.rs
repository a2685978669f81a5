use std::path::Path;
use std::process::{Command, Output};

use hwnas::analysis::network_cost;

fn hwnas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hwnas"))
        .args(args)
        .env_remove("NAS_ENUM_CAP")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = hwnas(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn space_sizes() {
    assert_eq!(ok(&["space", "size", "--variant", "ibn", "--layout", "toy2"]).trim(), "112");
    assert_eq!(ok(&["space", "size", "--layout", "toy2"]).trim(), "1792");
    assert_eq!(ok(&["space", "size", "--variant", "ibn", "--layout", "toy2block"]).trim(), "784");
}

#[test]
fn enumeration_respects_cap() {
    let all = ok(&["space", "enumerate", "--variant", "ibn"]);
    assert_eq!(all.lines().count(), 112);
    let out = Command::new(env!("CARGO_BIN_EXE_hwnas"))
        .args(["space", "enumerate", "--variant", "ibn"])
        .env("NAS_ENUM_CAP", "100")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "enumeration_cap");
}

#[test]
fn search_writes_artifacts_and_analysis_agrees() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let stdout = ok(&["search", "run", "--device", "accel_sim", "--steps", "30", "--out", path(&out)]);
    let final_arch: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    for f in ["search_log.ndjson", "best_arch.json", "best_arch.dot", "samples.csv", "samples.svg"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let log = std::fs::read_to_string(out.join("search_log.ndjson")).unwrap();
    let parsed = hwnas::search::SearchLog::from_ndjson(&log).unwrap();
    assert_eq!(parsed.steps.len(), 30);
    assert!(std::fs::read_to_string(out.join("best_arch.dot")).unwrap().contains("digraph"));

    let arch_text = std::fs::read_to_string(out.join("best_arch.json")).unwrap();
    let net = hwnas::arch::deserialize(&arch_text).unwrap();
    let cost = network_cost(&net).unwrap();
    assert_eq!(final_arch["madds"], cost.total_madds);

    let csv = ok(&["analyze", "--arch", path(&out.join("best_arch.json"))]);
    let total = csv.lines().find(|l| l.starts_with("total,")).unwrap();
    let cols: Vec<&str> = total.split(',').collect();
    assert_eq!(cols[8].parse::<u64>().unwrap(), cost.total_madds);
    assert_eq!(cols[9].parse::<u64>().unwrap(), cost.total_params);
}

#[test]
fn seeded_runs_repeat() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let args = [
        "--seed", "7", "search", "run", "--device", "cpu_sim", "--steps", "40", "--quality-noise", "0.05",
        "--out", path(&out),
    ];
    let a_stdout = ok(&args);
    let a = std::fs::read_to_string(out.join("search_log.ndjson")).unwrap();
    let b_stdout = ok(&args);
    let b = std::fs::read_to_string(out.join("search_log.ndjson")).unwrap();
    assert_eq!(a, b);
    assert_eq!(a_stdout, b_stdout);
}

#[test]
fn bench_fit_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let bench = dir.path().join("bench");
    let model = dir.path().join("model.json");
    ok(&["bench", "generate", "--device", "accel_sim", "--variant", "ibn_fused", "--n", "400", "--noise", "0", "--out", path(&bench)]);
    ok(&["cost", "fit", "--variant", "ibn_fused", "--bench", path(&bench), "--out", path(&model)]);
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert!((m["train_r2"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!(m["meta"]["seed"].is_number());
}

#[test]
fn errors_are_one_json_line() {
    let out = hwnas(&["analyze", "--arch", "/nonexistent/arch.json"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.trim_end().lines().count(), 1);
    let v: serde_json::Value = serde_json::from_str(stderr.trim()).unwrap();
    assert_eq!(v["error"], "io");
    assert!(v["message"].is_string());

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"blocks\": 3}").unwrap();
    let out = hwnas(&["analyze", "--arch", path(&bad)]);
    let v: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(v["error"], "parse");
}

#[test]
fn decomposition_grid() {
    let csv = ok(&["decomp", "demo", "--shape", "3,8,8"]);
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "r1,r2,rel_error,madds_ratio");
    let full = rows[1..]
        .iter()
        .map(|r| r.split(',').collect::<Vec<_>>())
        .find(|c| c[0] == "8" && c[1] == "8")
        .expect("full-rank row");
    assert!(full[2].parse::<f64>().unwrap() < 1e-9);
}
