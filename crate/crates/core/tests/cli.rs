//! Black-box tests of the command-line interface: frozen outputs, exit
//! codes, and flag behavior.

use std::io::Write;
use std::process::{Command, Output, Stdio};

fn fixture(name: &str) -> String {
    format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn decomp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_decomp"))
        .args(args)
        .output()
        .unwrap()
}

fn analysis_args<'a>(verb: &'a str, facts: &'a str, changes: &'a str) -> Vec<&'a str> {
    vec![
        verb, "--facts", facts, "--changes", changes, "--target", "src/util.c", "--format", "json",
    ]
}

#[test]
fn split_matches_golden() {
    let (facts, changes) = (fixture("facts.json"), fixture("changes.json"));
    let out = decomp(&analysis_args("split", &facts, &changes));
    assert!(out.status.success());
    assert_eq!(out.stdout, std::fs::read(fixture("golden_split.json")).unwrap());
}

#[test]
fn redraw_matches_golden() {
    let (facts, changes) = (fixture("facts.json"), fixture("changes.json"));
    let out = decomp(&analysis_args("redraw", &facts, &changes));
    assert!(out.status.success());
    assert_eq!(out.stdout, std::fs::read(fixture("golden_redraw.json")).unwrap());
}

#[test]
fn detect_matches_golden() {
    let (facts, changes) = (fixture("facts.json"), fixture("changes.json"));
    let out = decomp(&[
        "detect", "--facts", &facts, "--changes", &changes, "--format", "json",
    ]);
    assert!(out.status.success());
    assert_eq!(out.stdout, std::fs::read(fixture("golden_detect.json")).unwrap());
}

#[test]
fn mine_matches_golden_and_warns_on_missing_spans() {
    let (log, spans) = (fixture("attrib.log"), fixture("attrib_spans.json"));
    let out = decomp(&["mine", "--log", &log, "--spans", &spans]);
    assert!(out.status.success());
    assert_eq!(out.stdout, std::fs::read(fixture("golden_mine.json")).unwrap());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("gamma.x"), "expected a fallback warning: {stderr}");
}

#[test]
fn mine_reads_stdin_dash() {
    let spans = fixture("attrib_spans.json");
    let mut child = Command::new(env!("CARGO_BIN_EXE_decomp"))
        .args(["mine", "--log", "-", "--spans", &spans])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let log = std::fs::read(fixture("attrib.log")).unwrap();
    child.stdin.take().unwrap().write_all(&log).unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    assert_eq!(out.stdout, std::fs::read(fixture("golden_mine.json")).unwrap());
}

#[test]
fn missing_input_file_exits_2() {
    let changes = fixture("changes.json");
    let out = decomp(&analysis_args("split", "no-such-file.json", &changes));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("no-such-file.json"));
}

#[test]
fn unknown_target_exits_2() {
    let (facts, changes) = (fixture("facts.json"), fixture("changes.json"));
    let out = decomp(&[
        "split", "--facts", &facts, "--changes", &changes, "--target", "src/nope.c",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("src/nope.c"));
}

#[test]
fn empty_history_redraw_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let changes = dir.path().join("empty.json");
    std::fs::write(&changes, "{\"commits\": []}\n").unwrap();
    let facts = fixture("facts.json");
    let out = decomp(&[
        "redraw", "--facts", &facts, "--changes", changes.to_str().unwrap(), "--target",
        "src/util.c",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn qmax_one_caps_multiplicities() {
    let (facts, changes) = (fixture("facts.json"), fixture("changes.json"));
    let mut args = analysis_args("split", &facts, &changes);
    args.extend(["--qmax", "1"]);
    let out = decomp(&args);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let recs = doc["recommendations"].as_array().unwrap();
    assert!(!recs.is_empty());
    for rec in recs {
        assert_eq!(rec["multiplicity"], 1);
    }
}

#[test]
fn top_one_truncates() {
    let (facts, changes) = (fixture("facts.json"), fixture("changes.json"));
    let mut args = analysis_args("split", &facts, &changes);
    args.extend(["--top", "1"]);
    let out = decomp(&args);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["recommendations"].as_array().unwrap().len(), 1);
    assert_eq!(doc["recommendations"][0]["rank"], 1);
}
