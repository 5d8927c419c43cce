use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_popspace");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("run popspace")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const ID2: &str = r#"{"rows":2,"cols":2,"re":[[1,0],[0,1]]}"#;
const BETA: &str = r#"{"rows":3,"cols":2,"re":[[1,0],[2,0],[0,3]]}"#;

#[test]
fn opnorm_of_identity_is_one() {
    let d = tempfile::tempdir().unwrap();
    let m = write(d.path(), "id2.json", ID2);
    let out = run(&["opnorm", "--p", "3", "--matrix", &m]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["lower"], 1.0);
    assert_eq!(v["upper"], 1.0);
}

#[test]
fn polar_example_reconstructs() {
    let d = tempfile::tempdir().unwrap();
    let m = write(d.path(), "beta.json", BETA);
    let out_path = d.path().join("polar.json");
    let out = run(&["polar", "--p", "3", "--matrix", &m, "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(v["groups"], serde_json::json!([[0, 1], [2]]));
    assert_eq!(v["beta0"]["re"][1][1], 3.0);
    let l0 = v["lambda"][0].as_f64().unwrap();
    assert!((l0 - 9f64.powf(-1.0 / 3.0)).abs() < 1e-15);
}

#[test]
fn isometry_check_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let id = write(d.path(), "id2.json", ID2);
    let beta = write(d.path(), "beta.json", BETA);
    assert_eq!(run(&["isometry-check", "--p", "3", "--matrix", &id]).status.code(), Some(0));
    let out = run(&["isometry-check", "--p", "3", "--matrix", &beta]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["is_isometry"], false);
}

#[test]
fn input_errors_name_the_field() {
    let d = tempfile::tempdir().unwrap();
    let bad = write(d.path(), "bad.json", r#"{"rows":2,"cols":2,"re":[[1,0]]}"#);
    let out = run(&["opnorm", "--p", "3", "--matrix", &bad]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    assert!(err.contains("re"), "{err}");

    let out = run(&["opnorm", "--p", "0.9", "--matrix", &bad]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    assert!(err.contains("--p"), "{err}");

    let out = run(&["factnorm", "--p", "3", "--matrix", &write(d.path(), "b.json", BETA)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("matrix"));
}

#[test]
fn fractional_exponent_matches_decimal() {
    let d = tempfile::tempdir().unwrap();
    let m = write(d.path(), "m.json", r#"{"rows":2,"cols":2,"re":[[1,2],[3,-1]],"im":[[0,1],[0,0]]}"#);
    let a = run(&["opnorm", "--p", "3/2", "--matrix", &m]);
    let b = run(&["opnorm", "--p", "1.5", "--matrix", &m]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn csv_format_flattens_scalars() {
    let d = tempfile::tempdir().unwrap();
    let m = write(d.path(), "id2.json", ID2);
    let out = run(&["factnorm", "--which", "1", "--p", "3", "--matrix", &m, "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let head: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert!(head.contains(&"bestR") && head.contains(&"lower") && head.contains(&"upper"));
    assert!(!head.contains(&"witness"));
    assert_eq!(lines.count(), 1);
}

#[test]
fn verify_writes_json_and_csv() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path().join("reports");
    let dir_s = dir.to_str().unwrap();
    let out = run(&["verify", "--suite", "p-comparison", "--p", "1.5,3", "--nmax", "3", "--trials", "50", "--out", dir_s]);
    assert_eq!(out.status.code(), Some(0));
    let json = fs::read_to_string(dir.join("p-comparison.json")).unwrap();
    let csv = fs::read_to_string(dir.join("p-comparison.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 3);
    let v: Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["summary"]["violations"], 0);
    assert!(!json.contains("elapsed"));
    assert_eq!(fs::read_dir(&dir).unwrap().count(), 2);

    let again = run(&["verify", "--suite", "p-comparison", "--p", "1.5,3", "--nmax", "3", "--trials", "50", "--out", dir_s]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(fs::read_to_string(dir.join("p-comparison.json")).unwrap(), json);
}

#[test]
fn exploratory_suite_reports_inconclusive_findings() {
    let out = run(&["verify", "--suite", "extension-gap", "--p", "3", "--nmax", "2", "--trials", "3", "--samples", "6", "--iterations", "20"]);
    let code = out.status.code().unwrap();
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["summary"]["violations"], 0);
    let inconclusive = v["summary"]["inconclusive_findings"].as_u64().unwrap();
    assert_eq!(code, if inconclusive > 0 { 3 } else { 0 });
}

#[test]
fn extension_gap_closes_on_diagonal_inclusion() {
    let d = tempfile::tempdir().unwrap();
    let basis = r#"[{"rows":2,"cols":2,"re":[[1,0],[0,0]]},{"rows":2,"cols":2,"re":[[0,0],[0,1]]}]"#;
    let vb = write(d.path(), "vb.json", basis);
    let im = write(d.path(), "im.json", basis);
    let out = run(&["extension-gap", "--p", "3", "--vbasis", &vb, "--images", &im, "--level", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["label"], "closed");

    let short = write(d.path(), "short.json", r#"[{"rows":2,"cols":2,"re":[[1,0],[0,0]]}]"#);
    let out = run(&["extension-gap", "--p", "3", "--vbasis", &vb, "--images", &short]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn counterexample_reports_projection() {
    let d = tempfile::tempdir().unwrap();
    let sub = write(d.path(), "sub.json", r#"{"rows":3,"cols":1,"re":[[1],[0],[0]]}"#);
    let out = run(&["counterexample", "--p", "3", "--subspace", &sub, "--nmax", "2", "--trials", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["projection"]["bestValue"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(v["phiPsi"]["roundtrip_max_deviation"], 0.0);
    assert_eq!(v["flags"]["one_complemented"], true);
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&[]).status.code(), Some(1));
}
