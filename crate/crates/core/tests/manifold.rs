use std::f64::consts::TAU;

use heatflow_core::gauge::connection_form;
use heatflow_core::manifold::TargetManifold;
use heatflow_core::mesh::{interpolate, DiskMesh, Shape};
use heatflow_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

/// Mixed second difference of the projection, `D²π(p)[X, Y]`.
fn projection_hessian(m: &TargetManifold, p: &[f64], x: &[f64], y: &[f64]) -> Vec<f64> {
    let s = 1e-4;
    let at = |a: f64, b: f64| {
        let q: Vec<f64> = (0..p.len()).map(|i| p[i] + a * s * x[i] + b * s * y[i]).collect();
        m.project(&q).unwrap()
    };
    let (pp, pm, mp, mm) = (at(1.0, 1.0), at(1.0, -1.0), at(-1.0, 1.0), at(-1.0, -1.0));
    (0..p.len()).map(|i| (pp[i] - pm[i] - mp[i] + mm[i]) / (4.0 * s * s)).collect()
}

#[test]
fn projection_examples() {
    let s = TargetManifold::sphere(3).unwrap();
    assert_eq!(s.project(&[2.0, 0.0, 0.0]).unwrap(), vec![1.0, 0.0, 0.0]);
    assert!(matches!(s.project(&[0.0, 0.0, 0.0]), Err(Error::MedialAxis(_))));
    let t = TargetManifold::torus(2.0, 1.0).unwrap();
    assert!(close(&t.project(&[4.0, 0.0, 0.0]).unwrap(), &[3.0, 0.0, 0.0], 1e-14));
}

#[test]
fn second_fundamental_form_examples() {
    let s = TargetManifold::sphere(3).unwrap();
    let p = [1.0, 0.0, 0.0];
    let e2 = [0.0, 1.0, 0.0];
    assert!(close(&s.second_fundamental_form(&p, &e2, &e2).unwrap(), &[-1.0, 0.0, 0.0], 1e-14));
    assert!(close(&projection_hessian(&s, &p, &e2, &e2), &[-1.0, 0.0, 0.0], 1e-6));
    for m in [s.clone(), TargetManifold::torus(2.0, 1.0).unwrap(), TargetManifold::Clifford] {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = m.sample(&mut rng).unwrap();
        let y: Vec<f64> = (0..q.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let zero = vec![0.0; q.len()];
        assert!(m.second_fundamental_form(&q, &zero, &y).unwrap().iter().all(|v| v.abs() < 1e-15));
    }
}

#[test]
fn clifford_second_fundamental_form_matches_projection_hessian() {
    let c = TargetManifold::Clifford;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let q = c.sample(&mut rng).unwrap();
        let tb = c.tangent_basis(&q).unwrap();
        for x in &tb {
            for y in &tb {
                let ii = c.second_fundamental_form(&q, x, y).unwrap();
                let fd = projection_hessian(&c, &q, x, y);
                assert!(close(&ii, &fd, 1e-6), "{ii:?} vs {fd:?}");
            }
        }
    }
}

#[test]
fn torus_second_fundamental_form_matches_projection_hessian() {
    let t = TargetManifold::torus(2.0, 0.7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let q = t.sample(&mut rng).unwrap();
        let tb = t.tangent_basis(&q).unwrap();
        let ii = t.second_fundamental_form(&q, &tb[0], &tb[1]).unwrap();
        assert!(close(&ii, &projection_hessian(&t, &q, &tb[0], &tb[1]), 1e-6));
    }
}

#[test]
fn tangent_projection_examples() {
    let s = TargetManifold::sphere(3).unwrap();
    let p = [1.0, 0.0, 0.0];
    assert!(close(&s.tangent_project(&p, &[5.0, 1.0, 0.0]).unwrap(), &[0.0, 1.0, 0.0], 1e-15));
    let v = [0.0, 0.3, -0.2];
    assert!(close(&s.tangent_project(&p, &v).unwrap(), &v, 1e-15));

    // Normal of the torus from finite differences of its parametrization.
    let (big, small) = (2.0, 1.0);
    let t = TargetManifold::torus(big, small).unwrap();
    let param = |phi: f64, th: f64| {
        let w = big + small * th.cos();
        [w * phi.cos(), w * phi.sin(), small * th.sin()]
    };
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let (phi, th) = (rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU));
        let h = 1e-6;
        let d = |a: [f64; 3], b: [f64; 3]| {
            [(a[0] - b[0]) / (2.0 * h), (a[1] - b[1]) / (2.0 * h), (a[2] - b[2]) / (2.0 * h)]
        };
        let tp = d(param(phi + h, th), param(phi - h, th));
        let tt = d(param(phi, th + h), param(phi, th - h));
        let mut n = [tp[1] * tt[2] - tp[2] * tt[1], tp[2] * tt[0] - tp[0] * tt[2], tp[0] * tt[1] - tp[1] * tt[0]];
        let nn = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        n.iter_mut().for_each(|x| *x /= nn);
        let v: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let tv = t.tangent_project(&param(phi, th), &v).unwrap();
        let dot: f64 = tv.iter().zip(&n).map(|(a, b)| a * b).sum();
        assert!(dot.abs() < 1e-8, "{dot}");
    }
}

#[test]
fn normal_deviation_constants() {
    let s = TargetManifold::sphere(3).unwrap();
    assert!((s.normal_deviation_check(400, 1).unwrap() - 0.5).abs() < 1e-6);
    let t = TargetManifold::torus(2.0, 1.0).unwrap();
    let a = t.normal_deviation_check(2000, 7).unwrap();
    let b = t.normal_deviation_check(8000, 7).unwrap();
    assert!(a.is_finite() && b.is_finite());
    assert!((b - a).abs() <= 0.1 * a, "{a} {b}");
}

#[test]
fn connection_form_examples() {
    let mesh = DiskMesh::build(2).unwrap();
    let s = TargetManifold::sphere(3).unwrap();
    let c = interpolate(&mesh, Shape::Vector(3), |_| vec![0.0, 0.0, 1.0]).unwrap();
    assert!(connection_form(&mesh, &s, &c).unwrap().is_zero());

    let u = interpolate(&mesh, Shape::Vector(3), |[x, y]| {
        let r2 = x * x + y * y;
        vec![2.0 * x / (1.0 + r2), 2.0 * y / (1.0 + r2), (1.0 - r2) / (1.0 + r2)]
    })
    .unwrap();
    let om = connection_form(&mesh, &s, &u).unwrap();
    let g = heatflow_core::mesh::gradient(&mesh, &u).unwrap();
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let bar: Vec<f64> = (0..3).map(|i| tri.iter().map(|&v| u.at(v)[i]).sum::<f64>() / 3.0).collect();
        for i in 0..3 {
            for j in 0..3 {
                let m = om.matrix(t, 0);
                let expect = bar[i] * g.at(t)[j][0] - bar[j] * g.at(t)[i][0];
                assert!((m[i * 3 + j] - expect).abs() < 1e-12);
            }
        }
    }
    assert!(om.antisymmetry_defect() == 0.0);

    let torus = TargetManifold::torus(2.0, 0.5).unwrap();
    let v = interpolate(&mesh, Shape::Vector(3), |[x, y]| {
        let (phi, th) = (0.7 * x, 1.3 * y);
        let w = 2.0 + 0.5 * th.cos();
        vec![w * phi.cos(), w * phi.sin(), 0.5 * th.sin()]
    })
    .unwrap();
    assert_eq!(connection_form(&mesh, &torus, &v).unwrap().antisymmetry_defect(), 0.0);
}
