use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn crp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crp")).args(args).output().expect("spawn crp")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

fn run(cmd: &str, config: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", config, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    crp(&args)
}

const CRITICAL: &str = r#"{"critical": {"m": 1, "M": 2.718281828459045, "n": 10000, "delta": 1}}"#;

#[test]
fn offline_writes_solution() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "seq.json",
        r#"{"delta": 1, "m": 1, "M": 3, "slots": [{"kind": "linear", "p": 1}, {"kind": "linear", "p": 3}, {"kind": "linear", "p": 2}]}"#,
    );
    let cfg = write(dir.path(), "offline.json", r#"{"sequence": {"file": "seq.json"}}"#);
    let out = dir.path().join("out");
    let o = run("offline", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("offline.json")).unwrap()).unwrap();
    assert_eq!(v["revenue"], serde_json::json!(3.0));
    assert_eq!(v["allocations"], serde_json::json!([0.0, 1.0, 0.0]));
}

#[test]
fn input_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let empty =
        write(dir.path(), "empty.json", r#"{"sequence": {"inline": {"delta": 1, "m": 1, "M": 1, "slots": []}}}"#);
    assert_eq!(run("offline", &empty, &out, &[]).status.code(), Some(2));
    let unknown = write(dir.path(), "unknown.json", &format!(r#"{{"sequence": {CRITICAL}, "pi": 2}}"#));
    assert_eq!(run("offline", &unknown, &out, &[]).status.code(), Some(2));
    let garbage = write(dir.path(), "garbage.json", "{not json");
    assert_eq!(run("run", &garbage, &out, &[]).status.code(), Some(2));
    let missing = dir.path().join("nope.json");
    assert_eq!(run("phi", missing.to_str().unwrap(), &out, &[]).status.code(), Some(2));
    let no_grid = write(dir.path(), "grid.json", &format!(r#"{{"sequence": {CRITICAL}, "pi_grid": []}}"#));
    assert_eq!(run("phi", &no_grid, &out, &[]).status.code(), Some(2));
    let baseline = write(dir.path(), "adv.json", &format!(r#"{{"sequence": {CRITICAL}, "baselines": ["magic"]}}"#));
    assert_eq!(run("adversary", &baseline, &out, &[]).status.code(), Some(2));
    let rule = write(dir.path(), "rule.json", &format!(r#"{{"sequence": {CRITICAL}, "rule": "fastest"}}"#));
    assert_eq!(run("run", &rule, &out, &[]).status.code(), Some(2));
    assert_eq!(crp(&["launch"]).status.code(), Some(2));
}

#[test]
fn run_reports_breach_in_band() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let cfg = write(dir.path(), "run.json", &format!(r#"{{"sequence": {CRITICAL}, "rule": 1.5}}"#));
    assert_eq!(run("run", &cfg, &out, &[]).status.code(), Some(0));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(v["feasible"], serde_json::json!(false));
}

#[test]
fn phi_and_adversary_outputs() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let phi = write(dir.path(), "phi.json", &format!(r#"{{"sequence": {CRITICAL}, "pi_grid": [2, 3, 4]}}"#));
    assert_eq!(run("phi", &phi, &out, &[]).status.code(), Some(0));
    let table = std::fs::read_to_string(out.join("phi.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);
    assert!(table.lines().nth(3).unwrap().starts_with("4,0.49998"));

    let adv = write(
        dir.path(),
        "adv.json",
        &format!(r#"{{"sequence": {CRITICAL}, "baselines": ["greedy", "threshold:1.6487212707", "cr-pursuit:2"]}}"#),
    );
    assert_eq!(run("adversary", &adv, &out, &[]).status.code(), Some(0));
    let table = std::fs::read_to_string(out.join("adversary.csv")).unwrap();
    let rows: Vec<Vec<&str>> = table.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0][0], "greedy");
    assert_eq!(rows[1][4], "inf");
    assert_eq!(rows[2][4], "2");
}

#[test]
fn identical_seed_gives_identical_reports() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "ens.json",
        r#"{"sequence": {"random": {"family": "mixed", "len": 30, "variable_len": true, "delta": 1, "m": 1,
            "M": 2.718281828459045, "price": [1, 2.718281828459045], "alpha": [0, 1], "beta": [1, 3]}},
            "rule": "general:2", "ensemble": 64}"#,
    );
    let read = |d: &Path| std::fs::read(d.join("ensemble.csv")).unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for (out, seed) in [(&a, "11"), (&b, "11"), (&c, "12")] {
        assert_eq!(run("run", &cfg, out, &["--seed", seed]).status.code(), Some(0));
    }
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));

    let single = write(
        dir.path(),
        "one.json",
        r#"{"sequence": {"random": {"family": "linear", "len": 50, "delta": 2, "m": 1, "M": 4, "price": [1, 4]}}, "rule": "adaptive"}"#,
    );
    let (x, y) = (dir.path().join("x"), dir.path().join("y"));
    for out in [&x, &y] {
        assert_eq!(run("run", &single, out, &["--seed", "5"]).status.code(), Some(0));
    }
    assert_eq!(std::fs::read(x.join("trace.csv")).unwrap(), std::fs::read(y.join("trace.csv")).unwrap());
}
