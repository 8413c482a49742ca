use heatflow_core::lab::load_config;

// Kept in its own test binary: it mutates the process environment.
#[test]
fn seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    std::fs::write(
        &path,
        r#"{"target": {"kind": "sphere"}, "boundary": {"family": "cap", "delta": 0.1}, "t_end": 5, "seed": 3}"#,
    )
    .unwrap();
    std::env::remove_var("HEATFLOW_SEED");
    assert_eq!(load_config(&path).unwrap().seed, 3);
    std::env::set_var("HEATFLOW_SEED", "42");
    assert_eq!(load_config(&path).unwrap().seed, 42);
    std::env::set_var("HEATFLOW_SEED", "x");
    assert!(load_config(&path).is_err());
    std::env::remove_var("HEATFLOW_SEED");
}
