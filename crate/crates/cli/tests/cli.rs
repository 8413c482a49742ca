use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn heatflow(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heatflow"))
        .args(args)
        .current_dir(cwd)
        .env_remove("HEATFLOW_SEED")
        .output()
        .unwrap()
}

const QUICK: &str = r#"{"target": {"kind": "sphere"}, "boundary": {"family": "cap", "delta": 0.08},
    "refinement": 2, "t_end": 2.5, "snapshot_interval": 0.05, "output_interval": 1.0}"#;

#[test]
fn run_gauge_and_hardy() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("quick.json"), QUICK).unwrap();
    let out = heatflow(&["run", "quick.json", "--out", "res"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let res = dir.path().join("res");
    for f in ["report.json", "timing.json", "trajectory.csv", "snapshot_0002.txt"] {
        assert!(res.join(f).exists(), "{f} missing");
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(res.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);

    let out = heatflow(&["gauge", "res/snapshot_0002.txt", "quick.json"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["gauge"]["r_gauge"].as_f64().unwrap() >= 0.0);

    let out = heatflow(&["hardy", "res/snapshot_0002.txt", "quick.json"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["h1_over_energy"].as_f64().unwrap() >= 1.0 - 1e-8);
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite");
    fs::create_dir(&suite).unwrap();
    let quick = QUICK.trim_end_matches('}').to_string() + r#", "checks": ["convexity", "cross_term"]}"#;
    fs::write(suite.join("ok.json"), &quick).unwrap();
    let out = heatflow(&["verify", "suite", "--jobs", "2", "--out", "vout"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(dir.path().join("vout/suite.json").exists());
    assert!(dir.path().join("vout/ok/report.json").exists());

    let tight = quick.trim_end_matches('}').to_string() + r#", "tolerances": {"cross_term": 1e-9}}"#;
    fs::write(suite.join("tight.json"), tight).unwrap();
    let out = heatflow(&["verify", "suite"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().any(|l| l.contains("tight.json") && l.contains("cross_term")), "{stdout}");

    fs::create_dir(dir.path().join("empty")).unwrap();
    assert_eq!(heatflow(&["verify", "empty"], dir.path()).status.code(), Some(2));
}

#[test]
fn usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.json"), r#"{"target": {"kind": "sphere"}, "t_end": 5, "epsilon0_typo": 1}"#)
        .unwrap();
    let out = heatflow(&["run", "bad.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilon0_typo"));
    assert_eq!(heatflow(&["frobnicate"], dir.path()).status.code(), Some(2));

    let out = heatflow(&["mesh", "--refinement", "1", "--out", "m.txt"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(fs::metadata(dir.path().join("m.txt")).unwrap().len() > 0);
}
