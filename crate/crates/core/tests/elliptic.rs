use std::f64::consts::PI;

use heatflow_core::elliptic::*;
use heatflow_core::flow::dirichlet_energy;
use heatflow_core::mesh::*;

fn scalar(mesh: &DiskMesh, f: impl Fn(f64, f64) -> f64) -> Field {
    interpolate(mesh, Shape::Scalar, |p| vec![f(p[0], p[1])]).unwrap()
}

fn stereographic(mesh: &DiskMesh, lambda: f64) -> Field {
    interpolate(mesh, Shape::Vector(3), |[x, y]| {
        let (x, y) = (lambda * x, lambda * y);
        let r2 = x * x + y * y;
        vec![2.0 * x / (1.0 + r2), 2.0 * y / (1.0 + r2), (1.0 - r2) / (1.0 + r2)]
    })
    .unwrap()
}

#[test]
fn poisson_examples() {
    let mesh = DiskMesh::build(2).unwrap();
    let lap = Laplace::new(&mesh);
    let zero = Field::scalar(vec![0.0; mesh.num_vertices()]);
    let s = poisson_dirichlet(&lap, PoissonRhs::Vertex(&zero)).unwrap();
    assert!(s.psi.values().iter().all(|&x| x == 0.0));

    let mut errs = Vec::new();
    for k in [2, 3, 4] {
        let mesh = DiskMesh::build(k).unwrap();
        let lap = Laplace::new(&mesh);
        let four = Field::scalar(vec![4.0; mesh.num_vertices()]);
        let s = poisson_dirichlet(&lap, PoissonRhs::Vertex(&four)).unwrap();
        errs.push((s.psi.at(0)[0] + 1.0).abs());
    }
    assert!(errs[2] < 1e-2 && errs[0] / errs[2] > 9.0, "{errs:?}");
}

/// `ψ* = (1 - r^2) x` has `Δψ* = -8x`.
pub fn manufactured_error(k: u32) -> (f64, f64) {
    let mesh = DiskMesh::build(k).unwrap();
    let lap = Laplace::new(&mesh);
    let f = scalar(&mesh, |x, _| -8.0 * x);
    let s = poisson_dirichlet(&lap, PoissonRhs::Vertex(&f)).unwrap();
    let exact = scalar(&mesh, |x, y| (1.0 - x * x - y * y) * x);
    (mesh.h(), norms(&mesh, &s.psi.sub(&exact).unwrap()).unwrap().l2)
}

#[test]
fn manufactured_solution_rate() {
    let a = manufactured_error(2);
    let b = manufactured_error(4);
    let rate = (a.1 / b.1).ln() / (a.0 / b.0).ln();
    assert!(rate >= 1.8, "rate {rate}");
}

#[test]
fn wente_examples() {
    let mesh = DiskMesh::build(3).unwrap();
    let lap = Laplace::new(&mesh);
    let c = scalar(&mesh, |_, _| 2.0);
    let b = scalar(&mesh, |x, y| x * y);
    let r = wente_solve(&lap, &c, &b, BoundaryCondition::Dirichlet).unwrap();
    assert!(r.w.values().iter().all(|&x| x.abs() < 1e-14));
    assert!(r.ratio.is_none_or(|x| x < 1e-8), "{:?}", r.ratio);

    let mut errs = Vec::new();
    for k in [2, 3, 4] {
        let mesh = DiskMesh::build(k).unwrap();
        let lap = Laplace::new(&mesh);
        let r = wente_solve(&lap, &scalar(&mesh, |x, _| x), &scalar(&mesh, |_, y| y), BoundaryCondition::Dirichlet)
            .unwrap();
        errs.push((r.w.at(0)[0] - 0.25).abs());
        let sup_ratio = r.linf / (r.grad_a_l2 * r.grad_b_l2);
        assert!((sup_ratio - 0.25 / PI).abs() < 0.02, "{sup_ratio}");
    }
    assert!(errs[2] < 2e-3 && errs[0] / errs[2] > 9.0, "{errs:?}");
}

#[test]
fn hodge_examples() {
    let mesh = DiskMesh::build(4).unwrap();
    let lap = Laplace::new(&mesh);
    let zero = CellVectorField::zeros(Shape::Scalar, mesh.num_triangles());
    let h = hodge_decompose(&lap, &zero).unwrap();
    assert!(h.eta.values().iter().chain(h.zeta.values()).all(|&x| x == 0.0));

    let cell = |f: &dyn Fn(f64, f64) -> [f64; 2]| CellVectorField {
        shape: Shape::Scalar,
        values: (0..mesh.num_triangles())
            .map(|t| {
                let [x, y] = mesh.centroid(t);
                f(x, y)
            })
            .collect(),
    };
    let tol = 2.0 * mesh.h();
    let h = hodge_decompose(&lap, &cell(&|x, y| [2.0 * x, 2.0 * y])).unwrap();
    let ez = norms(&mesh, &h.zeta.sub(&scalar(&mesh, |x, y| x * x + y * y - 1.0)).unwrap()).unwrap().l2;
    let ee = norms(&mesh, &h.eta).unwrap().l2;
    assert!(ez < tol && ee < tol, "{ez} {ee}");

    let h = hodge_decompose(&lap, &cell(&|x, y| [-y, x])).unwrap();
    // mean of r^2/2 over the disk is 1/4
    let ee = norms(&mesh, &h.eta.sub(&scalar(&mesh, |x, y| 0.5 * (x * x + y * y) - 0.25)).unwrap()).unwrap().l2;
    let ez = norms(&mesh, &h.zeta).unwrap().l2;
    assert!(ez < tol && ee < tol, "{ez} {ee}");
}

#[test]
fn psi_of_constant_map_vanishes() {
    let mesh = DiskMesh::build(2).unwrap();
    let lap = Laplace::new(&mesh);
    let u = interpolate(&mesh, Shape::Vector(3), |_| vec![0.0, 0.0, 1.0]).unwrap();
    let s = psi_energy_density(&lap, &u).unwrap();
    assert!(s.linf < 1e-20);
}

#[test]
fn psi_constant_for_small_caps_is_stable() {
    let mut cs = Vec::new();
    for k in [3, 4] {
        let mesh = DiskMesh::build(k).unwrap();
        let lap = Laplace::new(&mesh);
        let mut per_level = Vec::new();
        for lambda in [0.05, 0.1] {
            let u = stereographic(&mesh, lambda);
            let eps = dirichlet_energy(&mesh, &u).unwrap().e_raw;
            per_level.push(psi_energy_density(&lap, &u).unwrap().linf / eps);
        }
        cs.push(per_level);
    }
    for j in 0..2 {
        assert!((cs[0][j] - cs[1][j]).abs() <= 0.1 * cs[1][j], "{cs:?}");
    }
}

#[test]
fn radial_density_matches_ode() {
    // |∇u|^2 = 4r^2 + 9r^4 for u = (r^2, r^3); ψ(r) = -∫_r^1 s^{-1} ∫_0^s f(ρ)ρ dρ ds
    let f = |r: f64| 4.0 * r * r + 9.0 * r.powi(4);
    let n = 4000;
    let dr = 1.0 / n as f64;
    let mut inner = vec![0.0; n + 1];
    for i in 1..=n {
        let (a, b) = ((i - 1) as f64 * dr, i as f64 * dr);
        let m = 0.5 * (a + b);
        inner[i] = inner[i - 1] + dr / 6.0 * (f(a) * a + 4.0 * f(m) * m + f(b) * b);
    }
    let mut psi = vec![0.0; n + 1];
    for i in (0..n).rev() {
        let (a, b) = (i as f64 * dr, (i + 1) as f64 * dr);
        let ga = if i == 0 { 0.0 } else { inner[i] / a };
        psi[i] = psi[i + 1] - 0.5 * dr * (ga + inner[i + 1] / b);
    }
    let ode = |r: f64| {
        let x = (r / dr).min(n as f64 - 1e-9);
        let i = x.floor() as usize;
        psi[i] + (x - i as f64) * (psi[i + 1] - psi[i])
    };
    let mut errs = Vec::new();
    for k in [3, 4] {
        let mesh = DiskMesh::build(k).unwrap();
        let lap = Laplace::new(&mesh);
        let u = interpolate(&mesh, Shape::Vector(2), |[x, y]| {
            let r = x.hypot(y);
            vec![r * r, r * r * r]
        })
        .unwrap();
        let s = psi_energy_density(&lap, &u).unwrap();
        let err = (0..mesh.num_vertices())
            .map(|v| {
                let [x, y] = mesh.vertices()[v];
                (s.psi.at(v)[0] - ode(x.hypot(y))).abs()
            })
            .fold(0.0, f64::max);
        errs.push(err);
    }
    assert!(errs[1] < 0.01 && errs[0] / errs[1] > 3.0, "{errs:?}");
}

#[test]
fn iterative_and_direct_solvers_agree() {
    use heatflow_core::linalg::SpdSolver;
    for k in 0..=2 {
        let mesh = DiskMesh::build(k).unwrap();
        let k_ii = mesh.stiffness().principal_submatrix(&mesh.interior_map());
        let b: Vec<f64> = (0..k_ii.n()).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let d = SpdSolver::direct(&k_ii).unwrap().solve(&b).unwrap();
        let it = SpdSolver::iterative(k_ii).solve(&b).unwrap();
        let scale = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let diff = d.iter().zip(&it).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(diff <= 1e-10 * scale.max(1.0), "level {k}: {diff}");
    }
}
