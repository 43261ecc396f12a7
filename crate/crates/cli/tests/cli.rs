use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn kfree(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kfree")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json output")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn counts_noncrossing_partitions() {
    let v = json(&kfree(&["nc", "--n", "4", "--count"]));
    assert_eq!(v["result"]["count"], 14);
    assert_eq!(v["command"], "nc");
    let v = json(&kfree(&["nc", "--n", "4"]));
    assert_eq!(v["result"]["partitions"].as_array().unwrap().len(), 14);
}

#[test]
fn weingarten_example_values() {
    let v = json(&kfree(&["wg", "--k", "2", "--dim", "3"]));
    let wg = &v["result"]["wg"];
    assert_eq!(wg[0][0], "3/24");
    assert_eq!(wg[0][1], "-1/24");
    let csv = String::from_utf8(kfree(&["wg", "--k", "2", "--dim", "3", "--format", "csv"]).stdout).unwrap();
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn exit_codes() {
    assert_eq!(kfree(&["wg", "--k", "3", "--dim", "2"]).status.code(), Some(2));
    assert_eq!(kfree(&["wg", "--k", "2"]).status.code(), Some(1));
    assert_eq!(kfree(&["nc", "--n", "x"]).status.code(), Some(1));
    assert_eq!(kfree(&["perm", "--perm", "1,1,2"]).status.code(), Some(1));
    assert_eq!(kfree(&["nc", "--n", "3", "--format", "csv"]).status.code(), Some(0));
    assert_eq!(kfree(&["otoc", "--a", "/nonexistent", "--b", "/nonexistent"]).status.code(), Some(1));
    assert_eq!(kfree(&["--help"]).status.code(), Some(0));
}

#[test]
fn permutation_report() {
    let v = json(&kfree(&["perm", "--perm", "2,3,1"]));
    assert_eq!(v["result"]["num_cycles"], 1);
    assert_eq!(v["result"]["length"], 2);
    assert_eq!(v["result"]["noncrossing"]["embeds"], true);
    let v = json(&kfree(&["perm", "--perm", "3,4,1,2"]));
    assert_eq!(v["result"]["noncrossing"]["embeds"], false);
}

#[test]
fn config_file_and_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.conf", "# wg run\nk = 2\ndim = 5\n");
    let v = json(&kfree(&["--config", &cfg, "wg"]));
    assert_eq!(v["result"]["dim"], 5);
    assert_eq!(v["config"]["dim"], 5);
    let v = json(&kfree(&["--config", &cfg, "wg", "--dim", "4"]));
    assert_eq!(v["result"]["dim"], 4);
    let bad = write(dir.path(), "bad.conf", "k = 2\ndim = 3\nbogus = 1\n");
    assert_eq!(kfree(&["--config", &bad, "wg"]).status.code(), Some(1));
}

#[test]
fn seeded_runs_are_byte_identical() {
    let args = ["--seed", "5", "eth", "cumulant", "--dim", "48", "--t", "0.3"];
    let a = kfree(&args);
    let b = kfree(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = kfree(&["--seed", "6", "eth", "cumulant", "--dim", "48", "--t", "0.3"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn otoc_with_centred_a() {
    let dir = tempfile::tempdir().unwrap();
    let x = write(dir.path(), "x.json", r#"{"dim": 2, "entries": [0, 1, 1, 0]}"#);
    let b = write(dir.path(), "b.json", r#"{"dim": 2, "entries": [2, 0, 0, 0]}"#);
    let v = json(&kfree(&["otoc", "--a", &x, "--b", &b, "--k", "2"]));
    let r = &v["result"];
    // <A^2><B>^2 = 1
    assert!((r["formula"][0].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((r["contraction_asymptotic"][0].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!(r["contraction_exact"].is_array());
}

#[test]
fn output_file_and_text_format() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nc.txt");
    let o = kfree(&["--format", "text", "--output", out.to_str().unwrap(), "nc", "--n", "5", "--count"]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.starts_with("# nc "));
    assert!(text.contains("count = 42"));
}
