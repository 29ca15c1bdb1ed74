use std::fs;
use std::process::Command;

use memwit::witness::{thermal_margin, Verdict};

fn memwit() -> Command {
    Command::new(env!("CARGO_BIN_EXE_memwit"))
}

fn code(args: &[&str]) -> i32 {
    memwit().args(args).output().unwrap().status.code().unwrap()
}

#[test]
fn witness_exit_codes() {
    assert_eq!(code(&["witness", "--family", "damp-toy", "--p", "1"]), 0);
    assert_eq!(code(&["witness", "--family", "dephase-toy", "--p", "0.5"]), 1);
    assert_eq!(code(&["witness", "--family", "thermal-ad", "--p1", "0.9", "--p2", "0.0", "--beta", "0.51"]), 0);
    assert_eq!(code(&["witness", "--family", "thermal-ad", "--p1", "1.2", "--p2", "0.1", "--beta", "0.51"]), 2);
    assert_eq!(code(&["witness", "--family", "thermal-ad", "--p1", "0.9"]), 2);
    assert_eq!(code(&["witness", "--family", "nonsense"]), 2);
    assert_eq!(code(&["witness", "--family", "damp", "--p1", "0.4", "--p2", "0.4"]), 1);
}

#[test]
fn witness_exit_code_follows_library_verdict() {
    for p2 in ["0.01", "0.05", "0.2"] {
        let lib = thermal_margin(0.9, p2.parse().unwrap(), 0.51).unwrap();
        let expect = if lib.verdict == Verdict::QuantumMemoryCertified { 0 } else { 1 };
        assert_eq!(code(&["witness", "--family", "thermal-ad", "--p1", "0.9", "--p2", p2, "--beta", "0.51"]), expect, "p2={p2}");
    }
}

#[test]
fn witness_prints_fixed_json_fields() {
    let out = memwit().args(["witness", "--family", "damp-toy", "--p", "0.8"]).output().unwrap();
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for k in ["c_assist_t1", "c_form_t2", "margin", "verdict", "t1", "t2", "params"] {
        assert!(v.get(k).is_some(), "{k}");
    }
    assert_eq!(v["params"]["p"], 0.8);
}

#[test]
fn traj_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let st = memwit()
            .env("MEMWIT_THREADS", threads)
            .args(["repro", "traj", "--n", "1000", "--seed", "7", "--out"])
            .arg(&out)
            .output()
            .unwrap();
        assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
        (fs::read(out.join("trajectories.csv")).unwrap(), fs::read(out.join("jump_histogram.csv")).unwrap())
    };
    let a = run("a", "1");
    let b = run("b", "1");
    let c = run("c", "2");
    assert_eq!(a, b);
    assert_eq!(a, c);
    let text = String::from_utf8(a.0).unwrap();
    assert!(text.starts_with("t,bloch_x,bloch_y,bloch_z,exact_x,exact_y,exact_z"));
}

#[test]
fn repro_writes_manifest_listing_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nmad");
    let st = memwit().args(["repro", "nmad", "--points", "200", "--out"]).arg(&out).output().unwrap();
    assert!(st.status.success());
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let listed: Vec<String> = manifest["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect();
    let mut present: Vec<String> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    present.sort();
    let mut sorted = listed.clone();
    sorted.sort();
    assert_eq!(sorted, present);
    assert_eq!(manifest["seed"], 7);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["equal_within_1e-9"], true);
}

#[test]
fn thermal_scan_summary_reports_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig2");
    assert!(memwit().args(["repro", "fig2", "--out"]).arg(&out).output().unwrap().status.success());
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["witness_thresholds"].as_array().unwrap().len(), 1);
    assert!(summary["classical_cp_boundary"].is_number());
    let csv = fs::read_to_string(out.join("margin.csv")).unwrap();
    assert_eq!(csv.lines().count(), 201);
}

#[test]
fn bad_thread_setting_is_an_error() {
    let st = memwit().env("MEMWIT_THREADS", "zero").args(["witness", "--family", "damp-toy", "--p", "1"]).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
}
