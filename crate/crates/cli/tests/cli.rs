use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn trdim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trdim"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "bad report ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

#[test]
fn ord_of_card_min_is_omega() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("card_min.json"), r#"{"builtin": "card_min"}"#).unwrap();
    let out = trdim(dir.path(), &["ord", "--family", "card_min.json"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["ord"], "w");
    assert_eq!(r["config"]["family"], "card_min.json");
}

#[test]
fn ord_of_explicit_family() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("f.json"),
        r#"{"members": [[1], [2], [3], [1, 2], [2, 3], [1, 2, 3]]}"#,
    )
    .unwrap();
    let r = report(&trdim(dir.path(), &["ord", "--family", "f.json"]));
    assert_eq!(r["ord"], "3");
}

#[test]
fn dim_on_interval_nine() {
    let dir = tempfile::tempdir().unwrap();
    let gen = trdim(dir.path(), &["gen", "space", "interval", "--n", "9", "--out", "i9.json"]);
    assert!(gen.status.success());
    let out = trdim(
        dir.path(),
        &["dim", "--space", "i9.json", "--scales", "3,4", "--bound", "2", "--csv", "d.csv"],
    );
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["family"], serde_json::json!([[3], [4]]));
    assert_eq!(r["ord"], "1");
    let csv = fs::read_to_string(dir.path().join("d.csv")).unwrap();
    assert!(csv.lines().any(|l| l == "3 4,2,true"), "{csv}");
}

#[test]
fn reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    trdim(dir.path(), &["gen", "space", "interval", "--n", "9", "--out", "i9.json"]);
    let args = ["dim", "--space", "i9.json", "--scales", "2,3,4", "--bound", "2"];
    let a = trdim(dir.path(), &args);
    let b = trdim(dir.path(), &args);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn budget_exhaustion_is_unknown() {
    let dir = tempfile::tempdir().unwrap();
    trdim(dir.path(), &["gen", "space", "interval", "--n", "199", "--out", "i.json"]);
    let out = trdim(
        dir.path(),
        &["dim", "--space", "i.json", "--scales", "30,40,50", "--bound", "10", "--budget", "10"],
    );
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(report(&out)["status"], "unknown");
}

#[test]
fn cpc_pipeline_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    trdim(dir.path(), &["gen", "space", "interval", "--n", "199", "--out", "i200.json"]);
    let gen = trdim(dir.path(), &["gen", "op", "shift", "--space", "i200.json", "--out", "shift.json"]);
    assert!(gen.status.success());

    // The scales forced by the shift exceed the space, so bound 40 cannot be met.
    let out = trdim(
        dir.path(),
        &["cpc", "--ops", "shift.json", "--q", "1", "--scales", "1,2", "--bound", "40"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(report(&out)["status"], "infeasible");

    let out = trdim(
        dir.path(),
        &[
            "cpc", "--space", "i200.json", "--ops", "shift.json", "--q", "1", "--scales", "1,2", "--bound", "1000",
            "--csv", "m.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["status"], "witness");
    assert_eq!(r["verification"]["passed"], true);
    let csv = fs::read_to_string(dir.path().join("m.csv")).unwrap();
    assert!(csv.lines().count() > 1);
}

#[test]
fn partition_of_striped_interval() {
    let dir = tempfile::tempdir().unwrap();
    trdim(dir.path(), &["gen", "space", "interval", "--n", "299", "--out", "i.json"]);
    let out = trdim(
        dir.path(),
        &["partition", "--space", "i.json", "--q", "2", "--families", "2", "--csv", "p.csv"],
    );
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["passed"], true);
    assert_eq!(r["schedule"]["values"], serde_json::json!([48, 192]));
    let csv = fs::read_to_string(dir.path().join("p.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("point,f_0,f_1"));
    assert_eq!(csv.lines().count(), 301);
}

#[test]
fn comm_accepts_and_rejects() {
    let dir = tempfile::tempdir().unwrap();
    trdim(dir.path(), &["gen", "space", "interval", "--n", "8", "--scale", "8", "--out", "net.json"]);
    // Two families of intervals of length 1/4 covering [0, 1].
    fs::write(
        dir.path().join("cover.json"),
        "[[[0, 1, 2], [4, 5, 6], [8]], [[2, 3, 4], [6, 7, 8]]]",
    )
    .unwrap();
    let x: Vec<f64> = (0..9).map(|i| i as f64 / 8.0).collect();
    fs::write(dir.path().join("funcs.json"), serde_json::to_string(&vec![x]).unwrap()).unwrap();
    let out = trdim(
        dir.path(),
        &["comm", "--space", "net.json", "--cover", "cover.json", "--funcs", "funcs.json", "--q", "3", "--scales", "3,3"],
    );
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["passed"], true, "{r}");
    // {8} lies inside [6, 8], so it has no private point.
    assert_eq!(r["pruned"], serde_json::json!([[0, [8]]]));

    // The identity oscillates by 1/4 on each set, which q = 4 does not allow.
    let out = trdim(
        dir.path(),
        &["comm", "--space", "net.json", "--cover", "cover.json", "--funcs", "funcs.json", "--q", "4", "--scales", "3,3"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(report(&out)["status"], "rejected");
}

#[test]
fn operational_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = trdim(dir.path(), &["ord", "--family", "missing.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.json"));

    trdim(dir.path(), &["gen", "space", "interval", "--n", "9", "--out", "i9.json"]);
    let out = trdim(dir.path(), &["dim", "--space", "i9.json", "--scales", "3", "--bound=-1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("positive"));

    let out = trdim(dir.path(), &["dim", "--space", "i9.json", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn selftest_subset() {
    let dir = tempfile::tempdir().unwrap();
    let out = trdim(dir.path(), &["selftest", "--criteria", "7,11"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["selftest"]["passed"], true);
    assert_eq!(r["selftest"]["criteria"].as_array().unwrap().len(), 2);
}
