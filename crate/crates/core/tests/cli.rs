use std::io::Cursor;
use std::path::PathBuf;

use dsos::checks::default_corpus;
use dsos::cli::{main_with, Io};

fn corpus(rel: &str) -> String {
    let p: PathBuf = default_corpus().join(rel);
    p.to_string_lossy().into_owned()
}

fn dsos(args: &[&str], stdin: &str, env_seed: Option<&str>) -> (i32, String, String) {
    let mut input = Cursor::new(stdin.as_bytes().to_vec());
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut io = Io { input: &mut input, out: &mut out, err: &mut err, env_seed: env_seed.map(String::from) };
    let mut argv = vec!["dsos"];
    argv.extend_from_slice(args);
    let code = main_with(argv, &mut io);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn run_prints_json_lines() {
    let (code, out, _) = dsos(&["run", &corpus("proteus/arith.prot"), "--format", "json"], "", None);
    assert_eq!(code, 0);
    for line in out.lines() {
        serde_json::from_str::<serde_json::Value>(line).expect("every line is JSON");
    }
}

#[test]
fn exit_codes() {
    assert_eq!(dsos(&["run", &corpus("creol/blocked_reader.creol")], "", None).0, 2);
    assert_eq!(dsos(&["run", &corpus("proteus/stuck_unbound.prot")], "", None).0, 3);
    assert_eq!(dsos(&["run", &corpus("proteus/fun_fact.prot"), "--fuel", "3"], "", None).0, 4);
    assert_eq!(dsos(&["run", "/nonexistent.prot"], "", None).0, 5);
    assert_eq!(dsos(&["frobnicate"], "", None).0, 5);
}

#[test]
fn scheduled_upgrade_runs_to_completion() {
    let (code, out, _) = dsos(
        &["run", &corpus("creol/temperature.creol"), "--schedule", &corpus("schedules/temperature_up.json"), "--scheduler", "first"],
        "",
        None,
    );
    assert_eq!(code, 0, "{out}");
}

#[test]
fn env_seed_overrides_flag() {
    let args = ["trace", &corpus("creol/threads.creol"), "--format", "json"];
    let (_, a, _) = dsos(&[&args[..], &["--seed", "1"]].concat(), "", Some("7"));
    let (_, b, _) = dsos(&[&args[..], &["--seed", "7"]].concat(), "", None);
    assert_eq!(a, b);
}

#[test]
fn explore_reports_one_terminal() {
    let (code, out, _) = dsos(&["explore", &corpus("creol/call_protocol.creol"), "--format", "json"], "", None);
    assert_eq!(code, 0);
    assert!(out.contains("summary"), "{out}");
}

#[test]
fn check_single_suite() {
    let (code, out, _) = dsos(&["check", "--only", "commutativity"], "", None);
    assert_eq!(code, 0, "{out}");
    let (code, _, _) = dsos(&["check", "--only", "no-sudden-jumps", "--inject-mutant"], "", None);
    assert_eq!(code, 1);
}

#[test]
fn repl_steps_and_quits() {
    let (code, out, _) = dsos(&["repl", &corpus("proteus/arith.prot")], "step 2\nshow term\nquit\n", None);
    assert_eq!(code, 0);
    assert!(!out.is_empty());
}
