use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hallu_core::detector::{synthetic_classes, SyntheticSpec};
use serde_json::{json, Value};

fn hallu(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hallu"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env_remove("HALLU_SEED")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string(v).unwrap()).unwrap();
    p
}

fn read(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn construct_single_input_passes() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "spec.json",
        &json!({"theorem": "5.1", "delta": 0.1, "dim": 1, "weights": [0.5, 0.5],
                "components": [{"mean": [0.0], "cov": {"kind": "iso", "value": 1.0}}]}),
    );
    let out = dir.path().join("run");
    let o = hallu(&out, &["construct", spec.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = read(&out.join("report.json"));
    assert_eq!(report["schema"], "v1");
    assert_eq!(report["outputs"]["all_passed"], true);
    assert!(out.join("construction_0_0.json").exists());
}

#[test]
fn construct_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(code(&hallu(dir.path(), &["construct", bad.to_str().unwrap()])), 2);
    let spec = write(dir.path(), "d.json", &json!({"theorem": "5.1", "delta": 1.5, "dim": 1, "weights": [0.5, 0.5]}));
    assert_eq!(code(&hallu(dir.path(), &["construct", spec.to_str().unwrap()])), 2);
    let missing = dir.path().join("nope.json");
    assert_eq!(code(&hallu(dir.path(), &["construct", missing.to_str().unwrap()])), 4);
}

fn bound_inputs(r_x: f64) -> Value {
    json!({"weights": [0.5, 0.5],
           "mean_laws": [{"family": "gaussian", "mu0": 0.0, "param": 1.0},
                         {"family": "gaussian", "mu0": 0.0, "param": 1.0}],
           "r_x": r_x, "delta": 0.1, "component_variance": 0.0009})
}

#[test]
fn bound_reports_product_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "b.json", &bound_inputs(0.1));
    let out = dir.path().join("run");
    let o = hallu(&out, &["bound", spec.to_str().unwrap(), "--verify", "trials=20000", "--seed", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let b = read(&out.join("bound.json"));
    let product = b["product_bound"].as_f64().unwrap();
    assert!((product - 9.2e-6).abs() / 9.2e-6 < 0.2, "{product}");
    assert!(b["empirical"]["hallucination"]["estimate"].as_f64().unwrap() >= product);
}

#[test]
fn bound_d_variant_is_passed_through() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "b.json", &bound_inputs(0.1));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(code(&hallu(&a, &["bound", spec.to_str().unwrap()])), 0);
    // the product-form aggregate is at least sqrt(min σ), so no state is feasible
    assert_eq!(code(&hallu(&b, &["bound", spec.to_str().unwrap(), "--d-variant", "proof"])), 3);
    let (ra, rb) = (read(&a.join("bound.json")), read(&b.join("bound.json")));
    assert_eq!(ra["d_variant"], "statement");
    assert_eq!(rb["d_variant"], "proof");
    assert!((ra["d"].as_f64().unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
    assert!((rb["d"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn bound_infeasible_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "b.json", &bound_inputs(5.0));
    let o = hallu(dir.path(), &["bound", spec.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("state 0"));
}

#[test]
fn bound_verify_needs_seed() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "b.json", &bound_inputs(0.1));
    assert_eq!(code(&hallu(dir.path(), &["bound", spec.to_str().unwrap(), "--verify", "trials=10"])), 2);
}

#[test]
fn coinflip_writes_trace_and_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &json!({"flips": 2000, "validation_flips": 200, "epochs": 3, "seed": 4}));
    let out = dir.path().join("run");
    let o = hallu(&out, &["coinflip", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.lines().next().unwrap().split(',').count() >= 2);
    assert_eq!(trace.lines().count(), 1 + 4);
    let verdict = read(&out.join("verdict.json"));
    assert_eq!(verdict["verdict"]["hallucinates"], true);
}

#[test]
fn seed_precedence_flag_env_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &json!({"flips": 500, "validation_flips": 50, "epochs": 1, "seed": 4}));
    let run = |sub: &str, env: Option<&str>, flag: Option<&str>| {
        let out = dir.path().join(sub);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_hallu"));
        cmd.args(["coinflip", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        cmd.env_remove("HALLU_SEED");
        if let Some(e) = env {
            cmd.env("HALLU_SEED", e);
        }
        if let Some(f) = flag {
            cmd.args(["--seed", f]);
        }
        assert!(cmd.status().unwrap().success());
        read(&out.join("report.json"))["seed"].as_u64().unwrap()
    };
    assert_eq!(run("file", None, None), 4);
    assert_eq!(run("env", Some("7"), None), 7);
    assert_eq!(run("flag", Some("7"), Some("9")), 9);
}

#[test]
fn reports_are_reproducible_except_timing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &json!({"flips": 500, "validation_flips": 50, "epochs": 2, "seed": 1}));
    let mut reports = vec![];
    for sub in ["a", "b"] {
        let out = dir.path().join(sub);
        assert_eq!(code(&hallu(&out, &["coinflip", "--config", cfg.to_str().unwrap()])), 0);
        let mut r = read(&out.join("report.json"));
        r.as_object_mut().unwrap().remove("timing");
        r.as_object_mut().unwrap().remove("traces");
        reports.push(r);
        assert_eq!(
            std::fs::read(dir.path().join("a/trace.csv")).unwrap(),
            std::fs::read(out.join("trace.csv")).unwrap()
        );
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn detector_round_trip_and_missing_pieces() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec { per_class: 300, dim: 8, ..SyntheticSpec::default() };
    let data = dir.path().join("emb.emb1");
    synthetic_classes(&spec, 1).unwrap().save(&data).unwrap();
    let data_s = data.to_str().unwrap();
    let bundle = dir.path().join("bundle");
    let bundle_s = bundle.to_str().unwrap();

    let fit = hallu(&dir.path().join("fit"), &["detector", "fit", "--data", data_s, "--bundle", bundle_s, "--seed", "5"]);
    assert_eq!(code(&fit), 0, "{}", String::from_utf8_lossy(&fit.stderr));
    for f in ["pipeline.json", "model.json", "thresholds.json", "manifest.json"] {
        assert!(bundle.join(f).exists(), "{f}");
    }

    let cal = hallu(
        &dir.path().join("cal"),
        &["detector", "calibrate", "--data", data_s, "--bundle", bundle_s, "--percentile", "20"],
    );
    assert_eq!(code(&cal), 0, "{}", String::from_utf8_lossy(&cal.stderr));
    assert_eq!(read(&bundle.join("thresholds.json"))["thresholds"][0]["percentile"], 20.0);

    let det_dir = dir.path().join("det");
    let det = hallu(&det_dir, &["detector", "detect", "--data", data_s, "--bundle", bundle_s]);
    assert_eq!(code(&det), 0);
    let rate = read(&det_dir.join("report.json"))["outputs"]["hallucination_rate"].as_f64().unwrap();
    assert!(rate < 0.2, "{rate}");
    let csv = std::fs::read_to_string(det_dir.join("detections.csv")).unwrap();
    assert_eq!(csv.lines().count(), 601);

    let rep_dir = dir.path().join("rep");
    let rep = hallu(
        &rep_dir,
        &["detector", "report", "--bundle", bundle_s, "--checkpoint", data_s, "--checkpoint", data_s],
    );
    assert_eq!(code(&rep), 0);
    assert_eq!(std::fs::read_to_string(rep_dir.join("rate_trace.csv")).unwrap().lines().count(), 3);

    std::fs::remove_file(bundle.join("model.json")).unwrap();
    let missing = hallu(&det_dir, &["detector", "detect", "--data", data_s, "--bundle", bundle_s]);
    assert_eq!(code(&missing), 4);
}

#[test]
fn detector_fit_without_seed_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("emb.csv");
    std::fs::write(&data, "label,a,b\nx,1,2\n").unwrap();
    assert_eq!(code(&hallu(dir.path(), &["detector", "fit", "--data", data.to_str().unwrap()])), 2);
}

#[test]
fn hdr_plot_data_shows_two_state_intervals_and_one_marginal() {
    let dir = tempfile::tempdir().unwrap();
    let mix = write(
        dir.path(),
        "m.json",
        &json!({"weights": [0.5, 0.5], "components": [
            {"mean": [-1.0], "cov": {"kind": "iso", "value": 0.36}},
            {"mean": [1.0], "cov": {"kind": "iso", "value": 0.36}}]}),
    );
    let out = dir.path().join("run");
    let o = hallu(&out, &["hdr", "plot-data", mix.to_str().unwrap(), "--mass", "0.9", "--state-mass", "0.9", "--cells", "4000"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let outputs = &read(&out.join("report.json"))["outputs"];
    assert_eq!(outputs["marginal_intervals"].as_array().unwrap().len(), 1);
    assert_eq!(outputs["hcdr_intervals"].as_array().unwrap().len(), 2);
    let csv = std::fs::read_to_string(out.join("plot_data.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "x,density,in_hdr,in_state_0,in_state_1,in_hcdr");
    assert_eq!(csv.lines().count(), 4001);
}
