use std::path::PathBuf;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use serde_json::Value;

fn singlet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_singlet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn without_wall_time(out: &Output) -> Value {
    let mut v = report(out);
    v.as_object_mut().unwrap().remove("wall_time_ms");
    v
}

fn scratch(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("singlet-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

#[test]
fn verify_all_quick_passes_fast_and_deterministically() {
    let start = Instant::now();
    let first = singlet(&["verify-all", "--level", "quick", "--seed", "0"]);
    assert!(start.elapsed() < Duration::from_secs(60));
    assert_eq!(
        first.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&first.stdout)
    );
    let second = singlet(&["verify-all", "--level", "quick", "--seed", "0"]);
    assert_eq!(without_wall_time(&first), without_wall_time(&second));
    let checks = report(&first)["results"]["checks"]
        .as_array()
        .unwrap()
        .len();
    assert_eq!(checks, 10);
}

#[test]
fn reports_are_byte_identical_apart_from_wall_time() {
    let args = [
        "measure-cascade",
        "--n",
        "5",
        "--m",
        "3",
        "--policy",
        "arbitrary",
        "--trials",
        "4",
        "--seed",
        "11",
    ];
    let (a, b) = (singlet(&args), singlet(&args));
    let strip = |o: &Output| {
        let text = String::from_utf8(o.stdout.clone()).unwrap();
        let at = text.find("\"wall_time_ms\"").unwrap();
        let end = at + text[at..].find([',', '}']).unwrap();
        format!("{}{}", &text[..at], &text[end..])
    };
    assert_eq!(strip(&a), strip(&b));
    let other = singlet(&[
        "measure-cascade",
        "--n",
        "5",
        "--m",
        "3",
        "--policy",
        "arbitrary",
        "--trials",
        "4",
        "--seed",
        "12",
    ]);
    assert_ne!(without_wall_time(&a), without_wall_time(&other));
}

#[test]
fn ground_state_reports_minus_total_coupling() {
    let out = singlet(&["ground-state", "--topology", "complete", "--n", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["command"], "ground-state");
    assert!((r["results"]["energy"].as_f64().unwrap() + 6.0).abs() < 1e-9);
    assert_eq!(r["results"]["degeneracy"], 1);
    assert!(r["artifact_version"].is_string());
}

#[test]
fn network_file_is_read() {
    let path = scratch(
        "chain.json",
        r#"{"num_qudits": 3, "edges": [[1, 2, 1.0], [2, 3, 2.5]]}"#,
    );
    let out = singlet(&["ground-state", "--network", path.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    assert!((report(&out)["results"]["energy"].as_f64().unwrap() + 3.5).abs() < 1e-9);
}

#[test]
fn invalid_input_exits_with_two() {
    let bad = scratch(
        "ferro.json",
        r#"{"num_qudits": 2, "edges": [[1, 2, -1.0]]}"#,
    );
    let out = singlet(&["ground-state", "--network", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(report(&out)["error"]["kind"], "validation");

    let disconnected = scratch(
        "split.json",
        r#"{"num_qudits": 4, "edges": [[1, 2, 1.0], [3, 4, 1.0]]}"#,
    );
    let out = singlet(&["ground-state", "--network", disconnected.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(report(&out)["error"]["kind"], "precondition");

    let out = singlet(&["measure-cascade", "--policy", "sideways"]);
    assert_eq!(out.status.code(), Some(2));

    let unknown = scratch(
        "unknown.json",
        r#"{"command": "block-entropy", "n": 4, "flavour": 1}"#,
    );
    let out = singlet(&["run", "--config", unknown.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn regime_violation_exits_with_three() {
    let out = singlet(&["hubbard-check", "--t", "0.5", "--u", "1"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(report(&out)["error"]["kind"], "regime");
}

#[test]
fn failed_assertions_exit_with_one() {
    // A rank tolerance this coarse truncates the Schmidt spectrum.
    let out = singlet(&["localize", "--trials", "2", "--rank-tol", "0.9"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report(&out)["pass"], false);
}

#[test]
fn config_file_with_flag_override() {
    let cfg = scratch(
        "entropy.json",
        r#"{"command": "block-entropy", "n": 5, "l": 1}"#,
    );
    let out = singlet(&["run", "--config", cfg.to_str().unwrap()]);
    let r = report(&out);
    assert!((r["results"]["entropy_bits"].as_f64().unwrap() - 5f64.log2()).abs() < 1e-9);

    let out = singlet(&[
        "block-entropy",
        "--l",
        "2",
        "--config",
        cfg.to_str().unwrap(),
    ]);
    let r = report(&out);
    assert_eq!(r["params"]["n"], 5);
    assert_eq!(r["params"]["l"], 2);
    assert!((r["results"]["entropy_bits"].as_f64().unwrap() - 10f64.log2()).abs() < 1e-9);
}

#[test]
fn csv_output_has_one_row_per_trial() {
    let out = singlet(&[
        "localize",
        "--n",
        "5",
        "--block-a",
        "1,2",
        "--block-b",
        "4",
        "--trials",
        "3",
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].contains("entropy_bits"));
    assert!(lines[0].contains("schmidt_rank"));
    assert!(lines[1..]
        .iter()
        .all(|l| l.contains(",3,") || l.ends_with(",3")));
}

#[test]
fn out_flag_writes_file() {
    let path = std::env::temp_dir().join(format!("singlet-cli-{}-out.json", std::process::id()));
    let out = singlet(&[
        "persistency",
        "--state",
        "w",
        "--n",
        "3",
        "--trials",
        "5",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(r["results"]["upper_bound"], 2);
}
