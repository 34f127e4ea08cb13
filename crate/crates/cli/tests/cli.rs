use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn hessborn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hessborn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

const FAST: [&str; 4] = ["--points", "6", "--fiber-points", "2"];

#[test]
fn list_examples_names_the_corpus() {
    let out = hessborn(&["list-examples"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let names: Vec<&str> = text.lines().map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(
        names,
        ["euclidean2", "hessian-exp2", "flat-skew-metric", "sphere2", "flat-torsionful", "pullback-flat"]
    );
}

#[test]
fn check_sphere_is_neither_hessian_nor_integrable() {
    let out = hessborn(&[&["check", "sphere2"][..], &FAST[..]].concat());
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["hessian"]["is_hessian"], false);
    assert_eq!(r["integrability"]["verdict_integrable"], false);
    assert_eq!(r["integrability"]["obstruction"], "curvature");
    assert_eq!(r["agreement"], true);
    assert!(r.get("affine_chart").is_none());
}

#[test]
fn check_skew_metric_isolates_d_omega() {
    let r = json(&hessborn(&[&["check", "flat-skew-metric"][..], &FAST[..]].concat()));
    let i = &r["integrability"];
    for key in ["max_n_i", "max_n_j", "max_n_k"] {
        assert!(i[key].as_f64().unwrap() <= 1e-9);
    }
    assert!(i["max_d_omega"].as_f64().unwrap() > 1e-9);
    assert_eq!(r["agreement"], true);
}

#[test]
fn report_file_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        let out = hessborn(&[&["check", "pullback-flat", "--report", path.to_str().unwrap()][..], &FAST[..]].concat());
        assert!(out.status.success());
        assert!(out.stdout.is_empty());
    }
    let (ra, rb) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(ra, rb);
    let r: Value = serde_json::from_slice(&ra).unwrap();
    assert_eq!(r["affine_chart"]["passed"], true);
    assert_eq!(r["config"]["settings"]["seed"], 42);
}

#[test]
fn spec_errors_exit_one_with_json() {
    let out = hessborn(&["check", "no-such-example"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(json(&out)["error"]["message"].as_str().unwrap().contains("no-such-example"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(
        &bad,
        r#"{"dimension": 2, "coordinates": ["u", "v"],
            "metric": {"components": [["1", "0"], ["0", "w"]]},
            "connection": {"kind": "flat"}, "sample_box": [[0, 1], [0, 1]]}"#,
    )
    .unwrap();
    let out = hessborn(&["check", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(json(&out)["error"]["message"].as_str().unwrap().contains("metric[1][1]"));

    let out = hessborn(&[&["check", "euclidean2", "--fiber-radius", "0"][..], &FAST[..]].concat());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn internal_invariant_failure_exits_two() {
    // A cross tolerance far below rounding makes the two-of-four implication
    // fail on a Hessian spec whose residuals are only zero up to rounding.
    let out = hessborn(&[&["check", "pullback-flat", "--cross-tol", "1e-300"][..], &FAST[..]].concat());
    assert_eq!(out.status.code(), Some(2));
    let r = json(&out);
    assert_eq!(r["status"]["ok"], false);
    assert!(r["status"]["failures"][0].as_str().unwrap().contains("two-of-four"));
}

#[test]
fn theorem_over_builtin_and_directory() {
    let out = hessborn(&[&["theorem"][..], &FAST[..]].concat());
    assert!(out.status.success());
    assert_eq!(json(&out)["table"]["agreements"], 6);

    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("quartic.json"),
        r#"{"dimension": 1, "coordinates": ["t"], "metric": {"potential": "t^4 + t^2"},
            "connection": {"kind": "flat"}, "sample_box": [[-1, 1]]}"#,
    )
    .unwrap();
    let out = hessborn(&[&["theorem", "--corpus", dir.path().to_str().unwrap()][..], &FAST[..]].concat());
    assert!(out.status.success());
    let r = json(&out);
    assert_eq!(r["corpus"][0], "quartic");
    assert_eq!(r["table"]["rows"][0]["is_hessian"], true);
}

#[test]
fn affine_chart_command() {
    let out = hessborn(&["affine-chart", "pullback-flat", "--at", "0.1,-0.2"]);
    assert!(out.status.success());
    let w = json(&out);
    assert!(w["pushforward_residual"].as_f64().unwrap() <= 1e-6);
    assert_eq!(w["base"][1], -0.2);

    let out = hessborn(&["affine-chart", "sphere2", "--at", "1.0,0.0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(json(&out)["error"]["message"].as_str().unwrap().contains("not flat"));

    let out = hessborn(&["affine-chart", "euclidean2", "--at", "0.1"]);
    assert_eq!(out.status.code(), Some(1));
}
