use heatflow_core::elliptic::Laplace;
use heatflow_core::flow::*;
use heatflow_core::lab::{run_scenario, Check, ScenarioConfig};
use heatflow_core::manifold::TargetManifold;
use heatflow_core::mesh::{interpolate, DiskMesh, Field, Shape};

fn constant_flow(mesh: &DiskMesh) -> FlowTrajectory {
    let s = TargetManifold::sphere(3).unwrap();
    let c = interpolate(mesh, Shape::Vector(3), |_| vec![0.0, 0.6, 0.8]).unwrap();
    let mut solver = FlowSolver::new(mesh, s, c.clone(), Scheme::TangentPlane).unwrap();
    let opts = FlowOptions { t_end: 1.5, snapshot_interval: 0.25, ..FlowOptions::default() };
    solver.run(c, &opts).unwrap()
}

fn stereographic(mesh: &DiskMesh, lambda: f64) -> Field {
    interpolate(mesh, Shape::Vector(3), |[x, y]| {
        let (x, y) = (lambda * x, lambda * y);
        let r2 = x * x + y * y;
        vec![2.0 * x / (1.0 + r2), 2.0 * y / (1.0 + r2), (1.0 - r2) / (1.0 + r2)]
    })
    .unwrap()
}

/// Small cap flow: boundary trace of a scaled stereographic map, interior
/// perturbed off the harmonic extension.
fn cap_flow(level: u32, t_end: f64) -> (DiskMesh, FlowTrajectory) {
    let mesh = DiskMesh::build(level).unwrap();
    let s = TargetManifold::sphere(3).unwrap();
    let chi = stereographic(&mesh, 0.05);
    let lap = Laplace::new(&mesh);
    let mut u0 = harmonic_initial_map(&lap, &s, &chi).unwrap();
    for v in 0..mesh.num_vertices() {
        if !mesh.is_boundary(v) {
            let [x, y] = mesh.vertices()[v];
            let mut p = u0.at(v).to_vec();
            p[0] += 0.08 * (1.0 - x * x - y * y) * (1.0 + y);
            u0.at_mut(v).copy_from_slice(&s.project(&p).unwrap());
        }
    }
    let traj = {
        let mut solver = FlowSolver::new(&mesh, s, chi, Scheme::TangentPlane).unwrap();
        let opts = FlowOptions { t_end, snapshot_interval: 0.05, ..FlowOptions::default() };
        solver.run(u0, &opts).unwrap()
    };
    (mesh, traj)
}

#[test]
fn constant_flow_monitors() {
    let mesh = DiskMesh::build(2).unwrap();
    let traj = constant_flow(&mesh);
    assert_eq!(decay_identity_residual(&traj, 1.0, 1.5).unwrap(), 0.0);
    assert_eq!(decay_identity_residual(&traj, 1.25, 1.25).unwrap(), 0.0);
    let m = ut_monotonicity_check(&traj).unwrap();
    assert_eq!(m.t0, Some(0.0));
    assert_eq!(m.violations, 0);
    assert!(cauchy_certificate(&mesh, &traj, 10).unwrap().value <= 0.0);
    let c = cross_term_check(&mesh, &traj, 2, 2, 0.1).unwrap();
    assert_eq!((c.lhs, c.rhs), (0.0, 0.0));
    assert!(c.constant.is_none());
    let worst = traj.steps.iter().map(|s| s.e_raw.abs().max(s.ut_l2_sq)).fold(0.0, f64::max);
    assert!(worst < 1e-12, "{worst:e}");
}

#[test]
fn discrete_harmonic_data_is_stationary() {
    let mut drift = Vec::new();
    for level in [2, 3] {
        let mesh = DiskMesh::build(level).unwrap();
        let s = TargetManifold::sphere(3).unwrap();
        let u0 = stereographic(&mesh, 0.7);
        let mut solver = FlowSolver::new(&mesh, s, u0.clone(), Scheme::TangentPlane).unwrap();
        let traj = solver
            .run(u0.clone(), &FlowOptions { t_end: 1.0, snapshot_interval: 0.25, ..FlowOptions::default() })
            .unwrap();
        let worst = traj
            .snapshots
            .iter()
            .map(|snap| {
                let d = snap.u.sub(&u0).unwrap();
                d.components().iter().map(|c| mesh.stiffness().quadratic_form(c)).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max);
        assert!(worst <= mesh.h(), "level {level}: {worst}");
        drift.push(worst);
    }
    assert!(drift[1] < drift[0], "{drift:?}");
}

#[test]
fn energy_is_non_increasing_and_convexity_holds() {
    let (mesh, traj) = cap_flow(3, 3.0);
    let e0 = traj.steps[0].e_raw;
    for w in traj.steps.windows(2) {
        assert!(w[1].e_raw <= w[0].e_raw + 1e-10 * e0);
    }
    let t0 = traj.t0.unwrap();
    let pairs = sample_pairs(&traj, 50, 1, t0, 1.5);
    assert_eq!(pairs.len(), 50);
    let rep = convexity_report(&mesh, &traj, &pairs, 0.05).unwrap();
    assert_eq!(rep.failures, 0);
    assert!(rep.min_ratio.unwrap() >= 0.25 - 0.05);

    // late snapshots coincide to roundoff: degenerate, not failed
    let n = traj.snapshots.len();
    let late = convexity_report(&mesh, &traj, &[(n - 2, n - 1)], 0.05).unwrap();
    assert_eq!(late.degenerate, 1);
    assert_eq!(late.failures, 0);

    let last = traj.final_state();
    let e_inf = traj.monitors.last().unwrap().e_raw;
    let idx: Vec<usize> = (0..n).filter(|&i| traj.snapshots[i].t >= t0 && traj.snapshots[i].t <= 1.0).collect();
    let lim = convexity_against_limit(&mesh, &traj, &last.u, e_inf, &idx, 0.05).unwrap();
    assert_eq!(lim.failures, 0, "{:?}", lim.min_ratio);
    assert!(lim.min_ratio.unwrap() >= 0.45);
}

#[test]
fn ut_monotone_and_mean_value() {
    let (_, traj) = cap_flow(3, 2.0);
    let m = ut_monotonicity_check(&traj).unwrap();
    assert!(m.t0.is_some());
    assert_eq!(m.violations, 0);
    let pairs = sample_pairs(&traj, 50, 2, m.t0.unwrap(), 1.5);
    let (fails, worst) = mean_value_check(&traj, &pairs).unwrap();
    assert_eq!(fails, 0);
    assert!(worst <= 1.0);
}

#[test]
fn cross_term_constant_does_not_grow_with_smaller_energy() {
    let run = |delta: f64| {
        let cfg = ScenarioConfig::from_json(&format!(
            r#"{{"target": {{"kind": "sphere"}}, "boundary": {{"family": "cap", "delta": {delta}}},
                "refinement": 3, "t_end": 3, "perturbation": {{"amplitude": 0.0}}, "checks": ["cross_term"]}}"#
        ))
        .unwrap();
        let r = run_scenario(&cfg).unwrap().report;
        r.check(Check::CrossTerm).unwrap().measured["max_constant"]
    };
    let (big, small) = (run(0.1), run(0.05));
    assert!(small <= big * 1.05, "{big} {small}");
}

#[test]
fn snapshot_files_round_trip() {
    let mesh = DiskMesh::build(1).unwrap();
    let u = stereographic(&mesh, 0.3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.txt");
    write_snapshot(&path, 0.5, &u).unwrap();
    let (t, back) = read_snapshot(&path).unwrap();
    assert_eq!(t, 0.5);
    assert_eq!(back.values(), u.values());
    std::fs::write(&path, "0.5 3\n1 2\n").unwrap();
    let err = read_snapshot(&path).unwrap_err().to_string();
    assert!(err.contains(":2:"), "{err}");
}
