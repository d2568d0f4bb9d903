//! End-to-end tests driving the `fsmt` binary.

mod common;

use std::path::Path;
use std::process::{Command, Output};

fn fsmt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fsmt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn solve_xor_and_prints_witness_and_exits_10() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("xor_and.hsmt");
    write(&inst, common::XOR_AND_TEXT);
    let out = fsmt(&["solve", inst.to_str().unwrap(), "--seed", "0"]);
    assert_eq!(out.status.code(), Some(10), "{out:?}");
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("s SATISFIABLE"), "{stdout}");
    assert!(stdout.contains("b0=-1"), "{stdout}");
    let y0: f64 = stdout
        .split_whitespace()
        .find_map(|tok| tok.strip_prefix("y0=").map(|v| v.parse().unwrap()))
        .expect("y0 in output");
    assert!(y0 > 0.0, "{stdout}");
}

#[test]
fn solve_unsat_toy_reports_unknown() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("toy.hsmt");
    write(&inst, "p hsmt 1 0\nc or 1 +b0\nc or 1 -b0\n");
    let out = fsmt(&["solve", inst.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("s UNKNOWN"), "{stdout}");
}

#[test]
fn solve_missing_file_is_an_error() {
    let out = fsmt(&["solve", "/nonexistent/input.hsmt"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn solve_bad_schedule_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("xor_and.hsmt");
    write(&inst, common::XOR_AND_TEXT);
    let out = fsmt(&[
        "solve",
        inst.to_str().unwrap(),
        "--sigma-schedule",
        "2.0:0.1:0.1",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_accepts_solver_output_and_rejects_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("xor_and.hsmt");
    write(&inst, common::XOR_AND_TEXT);
    let out = fsmt(&["solve", inst.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(10));
    let witness = dir.path().join("model.txt");
    write(&witness, &String::from_utf8(out.stdout).unwrap());
    let ok = fsmt(&["verify", inst.to_str().unwrap(), witness.to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0), "{ok:?}");
    assert!(String::from_utf8(ok.stdout).unwrap().contains("s VERIFIED"));

    // Flip the Boolean: now violated, exit 2.
    write(&witness, "b0=1 y0=1.0\n");
    let bad = fsmt(&["verify", inst.to_str().unwrap(), witness.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8(bad.stdout).unwrap().contains("s VIOLATED"));

    // Missing variable: error, exit 1.
    write(&witness, "b0=-1\n");
    let err = fsmt(&["verify", inst.to_str().unwrap(), witness.to_str().unwrap()]);
    assert_eq!(err.status.code(), Some(1));
}

#[test]
fn oracle_decides_and_enforces_limits() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("xor_and.hsmt");
    write(&inst, common::XOR_AND_TEXT);
    let out = fsmt(&["oracle", inst.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(10));
    assert!(String::from_utf8(out.stdout).unwrap().contains("s SATISFIABLE"));

    let unsat = dir.path().join("unsat.hsmt");
    write(&unsat, "p hsmt 1 0\nc or 1 +b0\nc or 1 -b0\n");
    let out = fsmt(&["oracle", unsat.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(20));
    assert!(String::from_utf8(out.stdout).unwrap().contains("s UNSATISFIABLE"));

    // 20 Booleans exceed the oracle limit.
    let mut text = String::from("p hsmt 20 0\n");
    text.push_str("c or 1 +b19\n");
    let big = dir.path().join("big.hsmt");
    write(&big, &text);
    let out = fsmt(&["oracle", big.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn gen_random_writes_parseable_instance_with_smt2_twin() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("r100.hsmt");
    let out = fsmt(&[
        "gen",
        "random",
        "--n",
        "100",
        "--seed",
        "1",
        "--out",
        inst.to_str().unwrap(),
        "--emit-smt2",
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let f = fsmt::model::parse_instance(&std::fs::read_to_string(&inst).unwrap()).unwrap();
    assert_eq!(f.n_bool, 100);
    assert_eq!(f.constraints.len(), 42);
    let twin = std::fs::read_to_string(dir.path().join("r100.smt2")).unwrap();
    assert!(twin.contains("(set-logic QF_LRA)"));
    assert!(twin.contains("(check-sat)"));
}

#[test]
fn gen_scheduling_witness_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("sched.hsmt");
    let out = fsmt(&[
        "gen",
        "scheduling",
        "--workers",
        "2",
        "--ratio",
        "2",
        "--seed",
        "0",
        "--out",
        inst.to_str().unwrap(),
        "--emit-witness",
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let witness = dir.path().join("sched.witness");
    let ok = fsmt(&["verify", inst.to_str().unwrap(), witness.to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0), "{ok:?}");
}

#[test]
fn export_prints_script() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("xor_and.hsmt");
    write(&inst, common::XOR_AND_TEXT);
    let out = fsmt(&["export", inst.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let script = String::from_utf8(out.stdout).unwrap();
    assert!(script.contains("(declare-const b0 Bool)"));
    assert!(script.contains("(declare-const y0 Real)"));
    assert!(script.contains("(xor (not b0)"), "{script}");
}

#[test]
fn score_matches_hand_computation() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("results.csv");
    write(
        &csv,
        "solver,instance,result,wall_seconds,seed,config\n\
         fsmt,i0,sat,10,0,x\n\
         fsmt,i1,timeout,1000,0,x\n\
         other,i0,unknown,3,0,x\n",
    );
    let out = fsmt(&["score", csv.to_str().unwrap(), "--time-limit", "1000"]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("fsmt 1005"), "{stdout}");
    assert!(stdout.contains("other 3"), "{stdout}");
}

#[test]
fn single_threaded_solve_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("xor_and.hsmt");
    write(&inst, common::XOR_AND_TEXT);
    let args = [
        "solve",
        inst.to_str().unwrap(),
        "--seed",
        "42",
        "--threads",
        "1",
        "--restarts",
        "2",
    ];
    let a = fsmt(&args);
    let b = fsmt(&args);
    assert_eq!(a.status.code(), b.status.code());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn dump_bdd_writes_dot() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("xor_and.hsmt");
    write(&inst, common::XOR_AND_TEXT);
    let dot = dir.path().join("diagrams.dot");
    let out = fsmt(&[
        "solve",
        inst.to_str().unwrap(),
        "--dump-bdd",
        dot.to_str().unwrap(),
        "--backend",
        "xbdd",
    ]);
    assert_eq!(out.status.code(), Some(10));
    let text = std::fs::read_to_string(&dot).unwrap();
    assert!(text.contains("digraph c0"));
    assert!(text.contains("digraph c1"));
}

#[test]
fn solve_writes_json_log() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("xor_and.hsmt");
    write(&inst, common::XOR_AND_TEXT);
    let log = dir.path().join("run.jsonl");
    let out = fsmt(&["solve", inst.to_str().unwrap(), "--log", log.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(10));
    let text = std::fs::read_to_string(&log).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines.len() >= 2);
    for line in &lines[..lines.len() - 1] {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v.get("sigma").is_some());
        assert!(v.get("unsat_count").is_some());
    }
    let summary: serde_json::Value = serde_json::from_str(lines.last().unwrap()).unwrap();
    assert_eq!(summary["result"], "sat");
    assert!(summary.get("config_digest").is_some());
}
