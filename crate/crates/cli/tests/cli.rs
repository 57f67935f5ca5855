use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sftlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sftlab")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn list_catalog() {
    let o = sftlab(&["list"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for name in ["thm1_1_capacity", "thm1_2_packing_tree", "thm1_5_chaos", "karp_oracle"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name}");
    }
    assert_eq!(text.lines().count(), 10);
}

#[test]
fn empty_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "empty.json", r#"{"seed": 1, "experiments": []}"#);
    let out = dir.path().join("out");
    let o = sftlab(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["experiments"].as_array().unwrap().len(), 0);
    assert_eq!(summary["pass"], true);
    assert!(out.join("meta.json").exists());
}

#[test]
fn validate_reports_lines() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", "{\n  \"seed\": 1,\n  \"experiments\": [\n    {\"name\": \"a\" \"kind\": \"karp_oracle\"}\n  ]\n}\n");
    let o = sftlab(&["validate", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"));
    let unknown = write(dir.path(), "unknown.json", r#"{"experiments": [{"name": "a", "kind": "thm9"}]}"#);
    assert_eq!(sftlab(&["validate", &unknown]).status.code(), Some(2));
    let good = write(dir.path(), "good.json", r#"{"seed": 4, "experiments": [{"name": "k", "kind": "karp_oracle"}]}"#);
    let o = sftlab(&["validate", &good]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("1 experiment"));
}

#[test]
fn karp_run_and_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.json",
        r#"{"seed": 11, "experiments": [
            {"name": "karp", "kind": "karp_oracle", "params": {"instances": 100}},
            {"name": "levels", "kind": "thm1_4_levels_and_smr"}
        ]}"#,
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let o = sftlab(&["run", &cfg, "--out", a.to_str().unwrap(), "--jobs", "2"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("100/100 equal"));
    let o = sftlab(&["run", &cfg, "--out", b.to_str().unwrap(), "--jobs", "1"]);
    assert!(o.status.success());
    for f in ["karp/instances.csv", "levels/levels.csv", "summary.json", "config.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let csv = fs::read_to_string(a.join("karp/instances.csv")).unwrap();
    assert_eq!(csv.lines().count(), 101);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",true")));

    let c = dir.path().join("c");
    sftlab(&["run", &cfg, "--out", c.to_str().unwrap(), "--seed", "12"]);
    assert_ne!(fs::read(a.join("karp/instances.csv")).unwrap(), fs::read(c.join("karp/instances.csv")).unwrap());
}

#[test]
fn failing_experiment_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "fail.json",
        r#"{"experiments": [{"name": "t", "kind": "thm1_4_levels_and_smr", "params": {"grid": [1.5]}}]}"#,
    );
    let out = dir.path().join("out");
    let o = sftlab(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["pass"], false);
    assert!(summary["experiments"][0]["error"].is_string());
}
