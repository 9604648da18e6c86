use std::path::Path;
use std::process::{Command, Output};

fn ctcsdp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctcsdp")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn solve_k2_maxcut() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "k2.txt", "2 1\n1 2\n");
    let dat = dir.path().join("k2.dat-s");
    let dat = dat.to_str().unwrap();
    assert!(ctcsdp(&["generate", "maxcut", "--graph", &g, "-o", dat]).status.success());
    let out = ctcsdp(&["solve", dat, "--method", "dctc", "--step", "adaptive", "--diag"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["metrics"]["gap"].as_f64().unwrap() >= 6.0);
    assert!((v["objective"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    let lines = String::from_utf8(out.stderr).unwrap();
    assert!(lines.lines().count() >= 1);
    for l in lines.lines() {
        serde_json::from_str::<serde_json::Value>(l).unwrap();
    }
}

#[test]
fn decompose_path_has_width_two() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "p.txt", "5 4\n1 2\n2 3\n3 4\n4 5\n");
    let out = ctcsdp(&["decompose", "--graph", &g]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("omega=2"), "{text}");
    let perm = write(dir.path(), "perm.txt", "5 4 3 2 1\n");
    let out = ctcsdp(&["decompose", "--graph", &g, "--perm", &perm]);
    assert!(String::from_utf8(out.stdout).unwrap().contains("omega=2"));
}

#[test]
fn exit_codes() {
    assert_eq!(ctcsdp(&["solve", "x.dat-s", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(ctcsdp(&["solve", "/nonexistent/x.dat-s"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.txt", "3 1\n1 9\n");
    assert_eq!(ctcsdp(&["decompose", "--graph", &bad]).status.code(), Some(2));
}
