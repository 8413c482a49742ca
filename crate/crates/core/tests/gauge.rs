use heatflow_core::elliptic::Laplace;
use heatflow_core::flow::{harmonic_initial_map, FlowOptions, FlowSolver, Scheme};
use heatflow_core::gauge::*;
use heatflow_core::manifold::TargetManifold;
use heatflow_core::mesh::{interpolate, DiskMesh, Field, PointLocator, Shape};

fn at(mesh: &DiskMesh, loc: &PointLocator, f: &Field, p: [f64; 2]) -> Vec<f64> {
    let (t, b) = loc.locate(mesh, p).unwrap();
    let tri = mesh.triangles()[t];
    (0..f.width()).map(|e| (0..3).map(|k| b[k] * f.at(tri[k])[e]).sum()).collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn constant_map(mesh: &DiskMesh) -> Field {
    interpolate(mesh, Shape::Vector(3), |_| vec![0.0, 0.0, 1.0]).unwrap()
}

#[test]
fn zero_connection_gives_trivial_frames() {
    let mesh = DiskMesh::build(2).unwrap();
    let lap = Laplace::new(&mesh);
    let s = TargetManifold::sphere(3).unwrap();
    let u = constant_map(&mesh);
    let omega = connection_form(&mesh, &s, &u).unwrap();
    assert!(omega.is_zero());
    let mut g = minimize_gauge(&mesh, &omega, &GaugeOptions::default()).unwrap();
    recover_xi(&lap, &mut g, &omega).unwrap();
    let ab = construct_ab(&lap, &g, &omega, &AbOptions::default()).unwrap();
    assert!(ab.r_cons < 1e-12);
    assert_eq!(ab.iterations, 0);
    assert!(ab.b.values().iter().all(|&x| x == 0.0));
    assert!(ab.a.values().chunks(9).all(|c| c == mat::identity(3).as_slice()));
    assert!(conservation_residual(&lap, &ab, &u, None).unwrap() < 1e-14);

    let b = b_sup_estimate(&lap, &ab, &s, &u).unwrap();
    assert_eq!((b.b_sup, b.ratio), (0.0, 0.0));
    let ps = p_structure(&lap, &ab, &g, &s, &u).unwrap();
    assert!(ps.residual < 1e-12, "{}", ps.residual);
    // sqrt of a stiffness quadratic form, so roundoff shows at 1e-8
    assert!(ps.qr_gradient_sum < 1e-6, "{}", ps.qr_gradient_sum);
    let osc = p_oscillation(&lap, &g, &ps, 0.0, 0.1, &default_probes(20, 1)).unwrap();
    assert_eq!(osc.max_oscillation, 0.0);
    assert_eq!(osc.bound_violations, 0);
}

#[test]
fn synthetic_gauge_refinement() {
    let syn = SyntheticGauge { p_scale: 0.3, xi_scale: 0.2 };
    let probes = default_probes(40, 7);
    let mut grad_ratio = Vec::new();
    for level in [3, 4] {
        let mesh = DiskMesh::build(level).unwrap();
        let lap = Laplace::new(&mesh);
        let omega = syn.omega(&mesh);
        let om = omega.l2(&mesh);
        let h = mesh.h();
        let mut g = minimize_gauge(&mesh, &omega, &GaugeOptions::default()).unwrap();
        assert!(g.converged && g.iterations < 50, "level {level}: {} iterations", g.iterations);
        assert!(g.monotone);
        recover_xi(&lap, &mut g, &omega).unwrap();
        assert!(g.r_gauge.unwrap() <= 10.0 * h * om);
        let ab = construct_ab(&lap, &g, &omega, &AbOptions::default()).unwrap();
        assert!(ab.r_cons <= 10.0 * h * om, "level {level}: r_cons {}", ab.r_cons);
        assert!(ab.min_singular_value >= 0.5);

        grad_ratio.push(grad_l2(&mesh, &g.p) / om);

        // oscillation of the recovered P against the closed form
        let loc = PointLocator::new(&mesh);
        for pr in probes.iter().filter(|p| p.is_admissible()) {
            let got = dist(&at(&mesh, &loc, &g.p, pr.y), &at(&mesh, &loc, &g.p, pr.x));
            let want = dist(&syn.p_hat(pr.y), &syn.p_hat(pr.x));
            if want > 1e-3 {
                assert!(got <= 2.0 * want && want <= 2.0 * got, "{got} vs {want}");
            }
        }
    }
    let drift = (grad_ratio[1] - grad_ratio[0]).abs() / grad_ratio[0];
    assert!(drift < 0.25, "{grad_ratio:?}");
}

#[test]
fn stationary_maps_satisfy_the_conservation_law() {
    let mut res = Vec::new();
    for level in [2, 3] {
        let mesh = DiskMesh::build(level).unwrap();
        let lap = Laplace::new(&mesh);
        let s = TargetManifold::sphere(3).unwrap();
        let chi = interpolate(&mesh, Shape::Vector(3), |[x, y]| {
            let (x, y) = (0.4 * x, 0.4 * y);
            let r2 = x * x + y * y;
            vec![2.0 * x / (1.0 + r2), 2.0 * y / (1.0 + r2), (1.0 - r2) / (1.0 + r2)]
        })
        .unwrap();
        let u0 = harmonic_initial_map(&lap, &s, &chi).unwrap();
        let mut solver = FlowSolver::new(&mesh, s.clone(), chi, Scheme::TangentPlane).unwrap();
        let traj =
            solver.run(u0, &FlowOptions { t_end: 4.0, snapshot_interval: 1.0, ..FlowOptions::default() }).unwrap();
        let u = &traj.final_state().u;
        let omega = connection_form(&mesh, &s, u).unwrap();
        let om = omega.l2(&mesh);
        let mut g = minimize_gauge(&mesh, &omega, &GaugeOptions::default()).unwrap();
        recover_xi(&lap, &mut g, &omega).unwrap();
        let ab = construct_ab(&lap, &g, &omega, &AbOptions::default()).unwrap();
        let r = conservation_residual(&lap, &ab, u, None).unwrap();
        assert!(r <= 10.0 * mesh.h() * om, "level {level}: {r} vs h|Ω| = {}", mesh.h() * om);
        let b = b_sup_estimate(&lap, &ab, &s, u).unwrap();
        assert!(b.agreement_l2 <= 10.0 * mesh.h() * (b.b_l2 + om));
        res.push(r);
    }
    assert!(res[1] < res[0], "{res:?}");
}
