use std::path::Path;
use std::process::{Command, Output};

fn qblow(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qblow")).args(args).current_dir(dir).output().expect("spawn qblow")
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

#[test]
fn fixedpoint_at_a_trial_time() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(&qblow(&["fixedpoint", "--eps", "0", "--grid", "17", "--blowup-time", "1.01"], dir.path()));
    let f = v["solve"]["unstable_coefficient"].as_f64().unwrap();
    assert!(f > 0.0 && f < 0.01, "{f}");
}

#[test]
fn fixedpoint_selects_the_unperturbed_time() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(&qblow(&["fixedpoint", "--eps", "0", "--grid", "17", "--delta", "0.05"], dir.path()));
    assert!((v["blowup_time"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn sample_prints_a_record() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(&qblow(&["sample", "--grid", "17", "--s", "0.8", "--index", "3"], dir.path()));
    assert_eq!(v["status"], "stable");
    assert_eq!(v["sample_index"], 3);
    let t = v["blowup_time"].as_f64().unwrap();
    let direct = v["direct_blowup_time"].as_f64().unwrap();
    assert!((t - direct).abs() < 1e-2);
}

#[test]
fn evolve_writes_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(&qblow(&["evolve", "--grid", "512", "--out", "trace.csv"], dir.path()));
    let t = v["estimate"]["blowup_time"].as_f64().unwrap();
    assert!((t - 1.0).abs() < 1e-2, "{t}");
    assert!(v["blowup"].as_f64().is_some());
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("t,u0,energy\n"));
    assert!(trace.lines().count() > 100);
}

#[test]
fn ensemble_resumes_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        "seed = 9\ns = 0.8\ngrid = 17\neps = [1e-3]\ndelta = [0.1, 1e-4]\nout = \"records.jsonl\"\n",
    )
    .unwrap();
    let first = qblow(&["ensemble", "--config", "run.toml", "--samples", "2"], dir.path());
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let summary = String::from_utf8(first.stdout).unwrap();
    assert!(summary.starts_with("epsilon,delta,ratio,n,"));
    assert_eq!(summary.lines().count(), 3);
    let second = qblow(&["ensemble", "--config", "run.toml", "--samples", "3"], dir.path());
    assert!(second.status.success());
    let lines = std::fs::read_to_string(dir.path().join("records.jsonl")).unwrap().lines().count();
    assert_eq!(lines, 6);

    let report = qblow(&["report", "records.jsonl", "--out", "rep"], dir.path());
    assert!(report.status.success(), "{}", String::from_utf8_lossy(&report.stderr));
    for name in ["summary.csv", "failure_map.svg", "blowup_times.svg", "norms.svg"] {
        assert!(dir.path().join("rep").join(name).exists(), "{name}");
    }
}

#[test]
fn bad_input_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "sede = 1\n").unwrap();
    let out = qblow(&["sample", "--config", "bad.toml"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.toml"));
    assert!(!qblow(&["sample", "--template", "square"], dir.path()).status.success());
    assert!(!qblow(&["ensemble", "--samples", "0"], dir.path()).status.success());
    assert!(!qblow(&["report", "missing.jsonl"], dir.path()).status.success());
}
