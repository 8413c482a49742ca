use std::fs;
use std::path::Path;

use heatflow_core::lab::*;
use heatflow_core::par::with_jobs;
use heatflow_core::Error;

fn config(extra: &str) -> String {
    format!(
        r#"{{"target": {{"kind": "sphere"}}, "boundary": {{"family": "cap", "delta": 0.08}},
            "refinement": 2, "t_end": 2.5, "snapshot_interval": 0.05{extra}}}"#
    )
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn config_examples() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "minimal.json",
        r#"{"target": {"kind": "sphere"}, "boundary": {"family": "cap", "delta": 0.2}, "refinement": 3, "t_end": 10}"#,
    );
    let cfg = load_config(&dir.path().join("minimal.json")).unwrap();
    assert_eq!(cfg.label(), "minimal");
    assert_eq!(cfg.checks, Check::ALL.to_vec());
    assert_eq!(cfg.epsilon0, 0.1);

    write(dir.path(), "neg.json", &config(r#", "epsilon0": -1"#));
    assert!(matches!(load_config(&dir.path().join("neg.json")), Err(Error::Config(m)) if m.contains("epsilon0")));

    write(dir.path(), "typo.json", &config(r#", "epsilon0_typo": 0.1"#));
    let err = load_config(&dir.path().join("typo.json")).unwrap_err().to_string();
    assert!(err.contains("epsilon0_typo") && err.contains("line"), "{err}");

    write(dir.path(), "broken.json", "{\n  \"target\": \n");
    let err = load_config(&dir.path().join("broken.json")).unwrap_err().to_string();
    assert!(err.contains("broken.json") && err.contains("line"), "{err}");

    assert!(load_config(&dir.path().join("missing.json")).is_err());
}

#[test]
fn small_cap_passes_every_check() {
    let cfg = ScenarioConfig::from_json(&config("")).unwrap();
    let out = run_scenario(&cfg).unwrap();
    let r = &out.report;
    assert!(r.feasibility.feasible);
    assert!(r.feasibility.e_raw_initial.unwrap() < 0.1);
    assert_eq!(r.checks.len(), Check::ALL.len());
    for c in Check::ALL {
        assert_eq!(r.checks.iter().filter(|x| x.check == c).count(), 1);
    }
    assert!(r.passed, "{:?}", r.failures());
    assert!(!r.to_json().unwrap().contains("NaN"));
}

#[test]
fn large_cap_is_reported_infeasible() {
    let cfg = ScenarioConfig::from_json(&config("").replace("0.08", "1.5")).unwrap();
    let r = run_scenario(&cfg).unwrap().report;
    assert!(!r.feasibility.feasible);
    assert!(r.feasibility.reason.is_some());
    assert!(!r.passed);
    assert!(r.checks.iter().all(|c| c.verdict == Verdict::Skipped && c.reason.is_some()));
    assert_eq!(r.failures(), vec!["feasibility".to_string()]);
}

#[test]
fn reports_are_reproducible() {
    let cfg =
        ScenarioConfig::from_json(&config(r#", "seed": 11, "checks": ["convexity", "gauge", "cauchy"]"#)).unwrap();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    with_jobs(1, || run_scenario(&cfg)).unwrap().write(dirs[0].path()).unwrap();
    with_jobs(2, || run_scenario(&cfg)).unwrap().write(dirs[1].path()).unwrap();
    let mut names: Vec<_> = fs::read_dir(dirs[0].path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.iter().any(|n| n == "report.json") && names.iter().any(|n| n == "trajectory.csv"));
    for n in names.iter().filter(|n| *n != "timing.json") {
        let a = fs::read(dirs[0].path().join(n)).unwrap();
        let b = fs::read(dirs[1].path().join(n)).unwrap();
        assert!(a == b, "{n:?} differs");
    }
}

#[test]
fn suite_gating() {
    let dir = tempfile::tempdir().unwrap();
    let quick = r#", "checks": ["convexity", "cross_term", "decay_identity"]"#;
    write(dir.path(), "a_good.json", &config(quick));
    write(
        dir.path(),
        "b_probe.json",
        &config(&format!(r#"{quick}, "exploratory": true, "tolerances": {{"cross_term": 1e-9}}"#)),
    );
    let suite = verify_suite(dir.path(), 2, None).unwrap();
    assert!(suite.passed);
    assert_eq!(suite.exit_code(), 0);
    assert!(!suite.entries[1].passed && suite.entries[1].exploratory);
    assert!(suite.constants.min_convexity_ratio.is_some());

    write(dir.path(), "c_tight.json", &config(&format!(r#"{quick}, "tolerances": {{"cross_term": 1e-9}}"#)));
    let suite = verify_suite(dir.path(), 1, None).unwrap();
    assert_eq!(suite.exit_code(), 1);
    let bad = &suite.entries[2];
    assert!(bad.config.ends_with("c_tight.json"));
    assert_eq!(bad.failures, vec!["cross_term".to_string()]);

    write(dir.path(), "d_crash.json", "{}");
    let suite = verify_suite(dir.path(), 1, None).unwrap();
    let crash = &suite.entries[3];
    assert_eq!(crash.failures, vec!["crash".to_string()]);
    assert!(crash.error.as_deref().unwrap().contains("d_crash.json"));

    let empty = tempfile::tempdir().unwrap();
    assert!(matches!(verify_suite(empty.path(), 1, None), Err(Error::Usage(_))));
}
