use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ompath_core::io::{path_from_csv, path_to_csv};
use ompath_core::DiscretePath;
use serde_json::Value;

fn ompath(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ompath")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = ompath(args);
    assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn load(path: &Path) -> DiscretePath {
    path_from_csv(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_writes_one_row_per_node_and_repeats() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&["simulate", "--model", "example1", "--x0", "-2", "--steps", "1000", "--seed", "7", "--out", s(out)]);
    }
    let text = fs::read_to_string(a.join("sample_0000.csv")).unwrap();
    assert_eq!(text.lines().count(), 1002);
    assert!(text.starts_with("t,x1\n0,-2\n"));
    assert_eq!(text, fs::read_to_string(b.join("sample_0000.csv")).unwrap());
}

#[test]
fn simulate_example2_has_three_columns() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["simulate", "--model", "example2", "--a", "1", "--b", "1", "--x0", "-2,-2", "--steps", "50"];
    ok(&[&args[..], &["--samples", "3", "--out", s(dir.path())]].concat());
    for i in 0..3 {
        let text = fs::read_to_string(dir.path().join(format!("sample_000{i}.csv"))).unwrap();
        assert!(text.lines().all(|l| l.split(',').count() == 3));
        assert_eq!(text.lines().next(), Some("t,x1,x2"));
    }
}

#[test]
fn mpp_example1_defaults_to_metastable_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["mpp", "--model", "example1", "--steps", "400", "--out", s(dir.path())]);
    let path = load(&dir.path().join("mpp.csv"));
    assert_eq!((path.start()[0], path.end()[0]), (-2.0, 2.0));
    let report = json(&dir.path().join("mpp.json"));
    assert_eq!(report["converged"], true);
    let shooting = &report["shooting"];
    assert!(shooting["sup_gap"].as_f64().unwrap() <= 5e-2);
    let shot = load(&dir.path().join("shooting.csv"));
    assert!(path.max_abs_diff(&shot).unwrap() <= 5e-2);
}

#[test]
fn mpp_linear_model_matches_sinh() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["mpp", "--model", "linear_test", "--start", "0", "--end", "1", "--out", s(dir.path())]);
    let path = load(&dir.path().join("mpp.csv"));
    let exact = DiscretePath::from_scalar_fn(path.steps(), |t| t.sinh() / 1f64.sinh()).unwrap();
    assert!(path.max_abs_diff(&exact).unwrap() <= 1e-3);
}

#[test]
fn mpp_sweep_writes_one_file_per_scale_and_flags_nonconvergence() {
    let dir = tempfile::tempdir().unwrap();
    let out = ompath(&[
        "mpp",
        "--model",
        "example2",
        "--a",
        "1,5,10,30",
        "--b",
        "1",
        "--steps",
        "100",
        "--out",
        s(dir.path()),
    ]);
    // The a=30 functional is unbounded below, so that run cannot converge.
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
    for a in [1, 5, 10, 30] {
        let path = load(&dir.path().join(format!("mpp_a{a}_b1.csv")));
        assert_eq!(path.dimension(), 2);
        let report = json(&dir.path().join(format!("mpp_a{a}_b1.json")));
        assert_eq!(report["converged"], a != 30, "a={a}");
    }
}

#[test]
fn om_eval_constant_and_zero_paths() {
    let dir = tempfile::tempdir().unwrap();
    let constant = dir.path().join("c.csv");
    fs::write(&constant, path_to_csv(&DiscretePath::constant(1000, &[-2.0]).unwrap())).unwrap();
    let out = ok(&["om-eval", "--model", "example1", s(&constant)]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["total"].as_f64().unwrap() + 4.0).abs() <= 1e-6);

    let zero = dir.path().join("z.csv");
    fs::write(&zero, path_to_csv(&DiscretePath::constant(50, &[0.0]).unwrap())).unwrap();
    let target = dir.path().join("z.json");
    ok(&["om-eval", "--model", "zero_drift", s(&zero), "--out", s(&target)]);
    assert_eq!(json(&target)["total"], 0.0);
}

#[test]
fn om_eval_accepts_simulated_paths() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["simulate", "--model", "example2", "--a", "2", "--b", "1", "--steps", "64", "--out", s(dir.path())]);
    let out = ok(&["om-eval", "--model", "example2", "--a", "2", "--b", "1", s(&dir.path().join("sample_0000.csv"))]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["grid_size"], 64);
    assert!(v["total"].as_f64().unwrap().is_finite());
}

#[test]
fn malformed_csv_is_a_usage_error_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "t,x1\n0,1\n0.5,oops\n1,2\n").unwrap();
    let out = ompath(&["om-eval", "--model", "example1", s(&bad)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains(":3:"));
}

#[test]
fn tube_path_against_itself_has_zero_log_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let phi = dir.path().join("phi.csv");
    fs::write(&phi, path_to_csv(&DiscretePath::constant(32, &[0.0]).unwrap())).unwrap();
    let args = ["tube", "--model", "zero_drift", "--reference", s(&phi), "--compare", s(&phi)];
    ok(&[&args[..], &["--epsilon", "3", "--samples", "2000", "--out", s(dir.path())]].concat());
    let check = &json(&dir.path().join("tube.json"))["checks"][0];
    assert_eq!(check["log_prob_ratio"], 0.0);
    assert_eq!(check["om_prediction"], 0.0);
}

#[test]
fn tube_ladder_counts_are_nested() {
    let dir = tempfile::tempdir().unwrap();
    let phi = dir.path().join("phi.csv");
    fs::write(&phi, path_to_csv(&DiscretePath::constant(32, &[0.0]).unwrap())).unwrap();
    let args = ["tube", "--model", "zero_drift", "--reference", s(&phi), "--epsilon", "4,3,2.5,2,1.5"];
    ok(&[&args[..], &["--samples", "4000", "--seed", "9", "--out", s(dir.path())]].concat());
    let csv = fs::read_to_string(dir.path().join("tube.csv")).unwrap();
    let hits: Vec<u64> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(hits.len(), 5);
    assert!(hits.windows(2).all(|w| w[1] <= w[0]), "{hits:?}");
    assert!(hits[0] > 0);
}

#[test]
fn tube_mpp_vs_line_reports_ratio_fields_and_tolerates_empty_tubes() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["tube", "--model", "linear_test", "--mpp-vs-line", "--steps", "32", "--epsilon", "3,0.01"];
    ok(&[&args[..], &["--samples", "3000", "--out", s(dir.path())]].concat());
    let v = json(&dir.path().join("tube.json"));
    let wide = &v["checks"][0];
    for key in ["log_prob_ratio", "om_prediction", "agreement"] {
        assert!(wide[key].is_number(), "{key}");
    }
    assert_eq!(v["checks"][1]["inconclusive"], true);
    let csv = fs::read_to_string(dir.path().join("tube.csv")).unwrap();
    assert!(csv.starts_with("epsilon,hits1,hits2,log_ratio,om_prediction,stderr\n"));
    assert!(dir.path().join("mpp.csv").exists() && dir.path().join("line.csv").exists());
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let out = dir.path().join("out");
    fs::write(
        &cfg,
        format!("# sample run\nmodel = example1\nx0 = -2\nsteps = 40\nseed = 3\nout = {}\n", out.display()),
    )
    .unwrap();
    ok(&["simulate", "--config", s(&cfg), "--steps", "20"]);
    assert_eq!(fs::read_to_string(out.join("sample_0000.csv")).unwrap().lines().count(), 22);
    fs::write(&cfg, format!("command = simulate\nsteps = 10\nout = {}\n", out.display())).unwrap();
    ok(&["--config", s(&cfg)]);
    assert_eq!(fs::read_to_string(out.join("sample_0000.csv")).unwrap().lines().count(), 12);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&ompath(&["simulate", "--steps", "ten"])), 2);
    assert_eq!(code(&ompath(&["mpp", "--model", "nope"])), 2);
    assert_eq!(code(&ompath(&["simulate", "--model", "zero_drift", "--out", s(dir.path())])), 2);
    let diverge = ["simulate", "--model", "linear_test", "--a", "200", "--x0", "1", "--steps", "16"];
    assert_eq!(code(&ompath(&[&diverge[..], &["--out", s(dir.path())]].concat())), 3);
    let out = Command::new(env!("CARGO_BIN_EXE_ompath"))
        .args(["simulate", "--out", s(dir.path())])
        .env("OMPATH_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
    let threaded = Command::new(env!("CARGO_BIN_EXE_ompath"))
        .args(["simulate", "--samples", "4", "--steps", "10", "--out", s(dir.path())])
        .env("OMPATH_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&threaded), 0);
}

#[test]
fn reproduce_manifest_checksums_every_file() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("r");
    let args = ["reproduce", "--out", s(&root), "--a", "5,1", "--steps", "100", "--samples", "3", "--sim-steps", "50"];
    ok(&args);
    let summary = json(&root.join("summary.json"));
    let entries = summary["example2"].as_array().unwrap();
    assert_eq!(entries[0]["a"], 1.0, "sorted by P");
    assert_eq!(summary["example2_om_order"], "decreasing");
    let manifest = json(&root.join("manifest.json"));
    let files = manifest["files"].as_object().unwrap();
    assert_eq!(files.len(), 3 + 3 + 4 + 1);
    for (rel, entry) in files {
        let bytes = fs::read(root.join(rel)).unwrap();
        assert_eq!(entry["sha256"], ompath_cli::output::sha256_hex(&bytes), "{rel}");
    }
    assert_eq!(manifest["figures"]["example1_overlay"]["curves"], 5);
    assert_eq!(manifest["figures"]["example2_paths"]["curves"], 2);
}
