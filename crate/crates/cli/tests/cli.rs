use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn data() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subrand")).args(args).current_dir(data()).output().expect("binary runs")
}

fn report(args: &[&str]) -> (i32, Value) {
    let out = run(args);
    let code = out.status.code().expect("exited");
    let v = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (code, v)
}

fn tags(v: &Value) -> Vec<(String, bool)> {
    v["assertions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| (a["tag"].as_str().unwrap().to_string(), a["passed"].as_bool().unwrap()))
        .collect()
}

#[test]
fn kc_build_three_lengths() {
    let (code, v) = report(&["kc", "build", "--requests", "requests.json"]);
    assert_eq!(code, 0);
    assert_eq!(v["output"]["codewords"], serde_json::json!(["0", "10", "110"]));
    assert_eq!(v["output"]["omega"], "7/2^3");
    assert_eq!(v["seed"], 0);
    assert_eq!(v["inputs"]["requests"], serde_json::json!([1, 2, 3]));
}

#[test]
fn kc_build_emits_machine() {
    let dir = tempfile::tempdir().unwrap();
    let emit = dir.path().join("m.json");
    let (code, v) = report(&["kc", "build", "--family", "family.json", "--emit", emit.to_str().unwrap()]);
    assert_eq!(code, 0, "{v}");
    let machine: Value = serde_json::from_str(&std::fs::read_to_string(&emit).unwrap()).unwrap();
    assert_eq!(machine, v["output"]["machine"]);
    assert!(tags(&v).iter().all(|(_, ok)| *ok));
    // The emitted table is accepted back as a machine.
    let (code, m) = report(&["machine", "omega", "--machine", emit.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(m["output"]["omega"], "1/2^1");
}

#[test]
fn battery_run_all_ones() {
    let (code, v) =
        report(&["battery", "run", "--battery", "battery_one.json", "--sequence", "ones.json", "--horizon", "64"]);
    assert_eq!(code, 0);
    let r = &v["output"]["results"][0];
    assert_eq!(r["hit_indices"].as_array().unwrap().len(), 65);
    assert_eq!(r["verdict_io"], true);
    assert_eq!(r["verdict_ae_tail"], 0);
}

#[test]
fn battery_run_csv_rows_per_index() {
    let out = run(&[
        "battery",
        "run",
        "--battery",
        "battery_two.json",
        "--sequence",
        "sources.json",
        "--horizon",
        "8",
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("entry,source,i,hit"));
    // Two entries, four sources, indices 0..=8.
    assert_eq!(lines.count(), 2 * 4 * 9);
}

#[test]
fn verify_family_example_passes() {
    let (code, v) = report(&["verify", "family", "--family", "family.json", "--strict"]);
    assert_eq!(code, 0);
    assert_eq!(tags(&v), [("test-validity".to_string(), true)]);
}

#[test]
fn test_to_martingale_values() {
    let (code, v) = report(&["convert", "test-to-mart", "--family", "family.json", "--depth", "2"]);
    assert_eq!(code, 0);
    let values = v["output"]["values"].as_array().unwrap();
    let b = |x: &str| values.iter().find(|r| r["x"] == x).unwrap()["b"].as_str().unwrap().to_string();
    assert_eq!(b(""), "1/2^2");
    assert_eq!(b("0"), "1/2^1");
    assert_eq!(b("00"), "1/2^0");
    assert_eq!(b("1").parse::<subrand_core::Dyadic>().unwrap(), subrand_core::Dyadic::zero());
}

#[test]
fn martingale_to_test_output_is_a_valid_family() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("y.json");
    let (code, _) = report(&[
        "convert",
        "mart-to-test",
        "--martingale",
        "lln_half.json",
        "--order",
        "half_floor.json",
        "--horizon",
        "8",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let family = dir.path().join("family.json");
    std::fs::write(&family, r["output"].to_string()).unwrap();
    let (code, v) = report(&["verify", "family", "--family", family.to_str().unwrap()]);
    assert_eq!(code, 0, "{v}");
}

#[test]
fn diagonalize_then_verify_trace() {
    let (code, v) = report(&["diagonalize", "--battery", "battery_two.json", "--horizon", "256"]);
    assert_eq!(code, 0);
    assert!(v["output"]["thresholds"].as_array().unwrap().iter().all(|t| !t.is_null()));
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.json");
    std::fs::write(&trace, v["output"]["trace"].to_string()).unwrap();
    let (code, w) = report(&["verify", "trace", "--trace", trace.to_str().unwrap(), "--battery", "battery_two.json"]);
    assert_eq!(code, 0);
    assert!(tags(&w).iter().all(|(_, ok)| *ok));

    // A flipped bit is caught by the replay.
    let mut tampered = v["output"]["trace"].clone();
    let mut bits: Vec<char> = tampered["bits"].as_str().unwrap().chars().collect();
    bits[100] = if bits[100] == '0' { '1' } else { '0' };
    tampered["bits"] = Value::String(bits.into_iter().collect());
    std::fs::write(&trace, tampered.to_string()).unwrap();
    let (code, w) = report(&["verify", "trace", "--trace", trace.to_str().unwrap(), "--battery", "battery_two.json"]);
    assert_eq!(code, 1);
    assert!(tags(&w).contains(&("replay".to_string(), false)));
}

#[test]
fn machine_commands() {
    let (code, v) = report(&["machine", "k", "--machine", "machine.json", "--x", "0101"]);
    assert_eq!(code, 0);
    assert_eq!(v["output"]["complexity"], "2");
    let (_, v) = report(&["machine", "k", "--machine", "machine.json", "--x", "0101", "--at", "2"]);
    assert_eq!(v["output"]["complexity"], "inf");
    let (code, v) = report(&["machine", "omega", "--machine", "machine.json", "--at", "3"]);
    assert_eq!(code, 0);
    assert_eq!(v["output"]["omega_at"], "3/2^2");
    let (code, v) = report(&["machine", "rb", "--machine", "machine.json", "--b", "1", "--maxlen", "6"]);
    assert_eq!(code, 0);
    assert_eq!(v["output"]["strings"], serde_json::json!(["00", "0101", "111111"]));
}

#[test]
fn failed_assertion_exits_one() {
    let out = run(&["fairness-check", "--martingale", "unfair.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[fairness]"));
    // The control g = identity leaves 3/8 unhalted after stage 2.
    let out = run(&["machine", "omega", "--machine", "machine.json", "--control", "identity.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn malformed_input_exits_two() {
    assert_eq!(run(&["fairness-check", "--martingale", "malformed.json"]).status.code(), Some(2));
    assert_eq!(run(&["fairness-check", "--martingale", "missing.json"]).status.code(), Some(2));
    // Schema mismatch: a family where a martingale is expected.
    assert_eq!(run(&["fairness-check", "--martingale", "family.json"]).status.code(), Some(2));
    // Bounds must be positive.
    assert_eq!(run(&["diagonalize", "--battery", "battery_two.json", "--horizon", "0"]).status.code(), Some(2));
    // CSV is only for per-index output.
    assert_eq!(run(&["verify", "family", "--family", "family.json", "--format", "csv"]).status.code(), Some(2));
    // Weight above 1.
    let dir = tempfile::tempdir().unwrap();
    let heavy = dir.path().join("heavy.json");
    std::fs::write(&heavy, "[1, 1, 1]").unwrap();
    assert_eq!(run(&["kc", "build", "--requests", heavy.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn suite_reports_record_the_seed() {
    let (code, v) = report(&["suite", "--name", "staged-omega", "--seed", "42"]);
    assert_eq!(code, 0);
    assert_eq!(v["seed"], 42);
    assert_eq!(tags(&v), [("staged-omega".to_string(), true)]);
    assert_eq!(run(&["suite", "--name", "nonsense"]).status.code(), Some(2));
}
