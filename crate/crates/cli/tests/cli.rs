use serde_json::Value;
use std::process::{Command, Output};

fn proxlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_proxlab")).args(args).output().expect("spawn proxlab")
}

fn report(args: &[&str]) -> Value {
    let out = proxlab(args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn status<'a>(doc: &'a Value, name: &str) -> &'a str {
    doc["checks"].as_array().unwrap().iter().find(|c| c["name"] == name).unwrap_or_else(|| panic!("no check {name}"))["status"]
        .as_str()
        .unwrap()
}

#[test]
fn analyze_gevrey() {
    let doc = report(&["analyze", "gevrey:1", "--no-timestamp"]);
    assert_eq!(doc["command"], "analyze");
    assert!(doc.get("generated_at").is_none());
    for c in doc["checks"].as_array().unwrap() {
        assert_eq!(c["status"], "pass", "{}", c["name"]);
    }
    let om = doc["checks"].as_array().unwrap().iter().find(|c| c["name"] == "omega index").unwrap();
    let w = om["data"]["liminf"].as_f64().unwrap();
    assert!((w - 1.0).abs() < 1e-2, "omega {w}");
}

#[test]
fn analyze_example_a() {
    let doc = report(&["analyze", "example_a", "--no-timestamp"]);
    assert_eq!(status(&doc, "lc"), "pass");
    assert_eq!(status(&doc, "regular variation (b)"), "fail");
    assert_eq!(status(&doc, "regular variation (d)"), "fail");
    assert_eq!(status(&doc, "equivalent to gevrey:1"), "pass");
}

#[test]
fn short_table_is_inconclusive_not_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("t.json");
    std::fs::write(&cfg, r#"{"family": "table", "log_quotients": [0.0, 0.7, 1.1]}"#).unwrap();
    let out_path = dir.path().join("r.json");
    let csv = dir.path().join("r.csv");
    let out = proxlab(&["analyze", "--config", cfg.to_str().unwrap(), "--out", out_path.to_str().unwrap(), "--csv", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert!(doc["checks"].as_array().unwrap().iter().any(|c| c["status"] == "inconclusive"));
    assert!(doc["generated_at"].as_str().unwrap().starts_with("unix:"));
    assert!(std::fs::read_to_string(&csv).unwrap().lines().count() > 1);
}

#[test]
fn input_errors_exit_1() {
    assert_eq!(proxlab(&["construct", "const:0"]).status.code(), Some(1));
    assert_eq!(proxlab(&["analyze", "no_such_family"]).status.code(), Some(1));
    assert_eq!(proxlab(&["analyze", "{\"family\": \"gevrey\"}"]).status.code(), Some(1));
    assert_eq!(proxlab(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(proxlab(&["--help"]).status.code(), Some(0));
}

#[test]
fn construct_const() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("mv.csv");
    let doc = report(&["construct", "const:2", "--pmax", "64", "--no-timestamp", "--csv", csv.to_str().unwrap()]);
    for c in doc["checks"].as_array().unwrap() {
        assert_eq!(c["status"], "pass", "{}", c["name"]);
    }
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 66);
}

#[test]
fn admit_pairs() {
    let doc = report(&["admit", "gevrey:1", "const:1", "--no-timestamp"]);
    assert_eq!(status(&doc, "admits"), "pass");
    assert_eq!(status(&doc, "closure chain"), "pass");
    let doc = report(&["admit", "example_b", "const:1", "--no-timestamp"]);
    assert_eq!(status(&doc, "admits"), "fail");
}

#[test]
fn riesz_first_level() {
    let doc = report(&["riesz", "--nmax", "1", "--no-timestamp"]);
    let t2 = doc["checks"].as_array().unwrap().iter().find(|c| c["name"] == "t_2").unwrap()["data"]["constants"]["t_2"]
        .as_f64()
        .unwrap();
    assert!((t2 - 4.328085122666891).abs() < 1e-9, "{t2}");
    assert_eq!(status(&doc, "recurrence agreement"), "pass");
}

#[test]
fn suite_filter_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let j = dir.path().join("m.json");
    let out = proxlab(&["suite", "--filter", "biconjugate", "--no-timestamp", "--json", j.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("PASS  7"), "{text}");
    let m: Value = serde_json::from_str(&std::fs::read_to_string(&j).unwrap()).unwrap();
    assert_eq!(m["criteria"].as_array().unwrap().len(), 1);
    assert!(m.get("generated_at").is_none());
}

#[test]
fn suite_failure_exits_3() {
    let out = proxlab(&["suite", "--filter", "riesz", "--no-timestamp"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let pass = text.starts_with("PASS");
    assert_eq!(out.status.code(), Some(if pass { 0 } else { 3 }));
}

#[test]
fn reports_are_byte_identical() {
    let a = proxlab(&["analyze", "example_b", "--no-timestamp"]);
    let b = proxlab(&["analyze", "example_b", "--no-timestamp"]);
    assert_eq!(a.stdout, b.stdout);
    let dir = tempfile::tempdir().unwrap();
    let (x, y) = (dir.path().join("x.json"), dir.path().join("y.json"));
    proxlab(&["suite", "--filter", "construction", "--no-timestamp", "--json", x.to_str().unwrap()]);
    proxlab(&["suite", "--filter", "construction", "--no-timestamp", "--json", y.to_str().unwrap()]);
    assert_eq!(std::fs::read(&x).unwrap(), std::fs::read(&y).unwrap());
}
