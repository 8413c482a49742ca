use serde::{Deserialize, Serialize};

use super::{CellField, CellVectorField, DiskMesh, Field, Shape};
use crate::error::{Error, Result};

/// Elementwise gradient of a P1 field, one value per triangle and component.
pub fn gradient(mesh: &DiskMesh, f: &Field) -> Result<CellVectorField> {
    f.check_vertices(mesh.num_vertices())?;
    let w = f.width();
    let mut out = CellVectorField::zeros(f.shape(), mesh.num_triangles());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let g = mesh.hat_gradients(t);
        let cell = out.at_mut(t);
        for (k, &v) in tri.iter().enumerate() {
            let vals = f.at(v);
            for c in 0..w {
                cell[c][0] += vals[c] * g[k][0];
                cell[c][1] += vals[c] * g[k][1];
            }
        }
    }
    Ok(out)
}

/// Rotated gradient `(-d_y f, d_x f)`.
pub fn perp_gradient(mesh: &DiskMesh, f: &Field) -> Result<CellVectorField> {
    let mut g = gradient(mesh, f)?;
    for v in g.values.iter_mut() {
        *v = [-v[1], v[0]];
    }
    Ok(g)
}

/// The Jacobian determinant form `grad a . perp grad b = a_y b_x - a_x b_y`
/// of two scalar fields, per triangle.
pub fn jacobian_product(mesh: &DiskMesh, a: &Field, b: &Field) -> Result<CellField> {
    if a.shape() != Shape::Scalar || b.shape() != Shape::Scalar {
        return Err(Error::Usage("jacobian_product takes scalar fields".into()));
    }
    let ga = gradient(mesh, a)?;
    let gb = gradient(mesh, b)?;
    Ok(CellField::scalar(ga.values.iter().zip(&gb.values).map(|(p, q)| p[1] * q[0] - p[0] * q[1]).collect()))
}

/// Mass-lumped weak divergence and curl of a piecewise-constant vector field.
///
/// `div_v = -(1/m_v) int F . grad phi_v` and `curl_v = -(1/m_v) int F . perp grad phi_v`.
/// At boundary vertices these omit the boundary flux and are not meaningful.
pub fn weak_div_curl(mesh: &DiskMesh, f: &CellVectorField) -> Result<(Field, Field)> {
    f.check_triangles(mesh.num_triangles())?;
    let w = f.width();
    let nv = mesh.num_vertices();
    let mut div = Field::zeros(f.shape, nv);
    let mut curl = Field::zeros(f.shape, nv);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let g = mesh.hat_gradients(t);
        let a = mesh.area(t);
        let cell = f.at(t);
        for (k, &v) in tri.iter().enumerate() {
            let dv = div.at_mut(v);
            for c in 0..w {
                dv[c] -= a * (cell[c][0] * g[k][0] + cell[c][1] * g[k][1]);
            }
            let cv = curl.at_mut(v);
            for c in 0..w {
                // perp grad phi = (-phi_y, phi_x)
                cv[c] -= a * (-cell[c][0] * g[k][1] + cell[c][1] * g[k][0]);
            }
        }
    }
    let m = mesh.lumped_mass();
    for v in 0..nv {
        div.at_mut(v).iter_mut().for_each(|x| *x /= m[v]);
        curl.at_mut(v).iter_mut().for_each(|x| *x /= m[v]);
    }
    Ok((div, curl))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

/// Norms of a P1 field. L2 is exact (consistent mass); L1 uses the
/// edge-midpoint rule on the pointwise Euclidean norm; Linf is the vertex max.
pub fn norms(mesh: &DiskMesh, f: &Field) -> Result<Norms> {
    f.check_vertices(mesh.num_vertices())?;
    let w = f.width();
    let mut l2sq = 0.0;
    let mass = mesh.mass();
    for c in 0..w {
        l2sq += mass.quadratic_form(&f.component(c));
    }
    let mut l1 = 0.0;
    let mut mid = vec![0.0; w];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let mut s = 0.0;
        for k in 0..3 {
            let (p, q) = (f.at(tri[k]), f.at(tri[(k + 1) % 3]));
            for c in 0..w {
                mid[c] = 0.5 * (p[c] + q[c]);
            }
            s += mid.iter().map(|x| x * x).sum::<f64>().sqrt();
        }
        l1 += mesh.area(t) * s / 3.0;
    }
    let linf = (0..f.num_vertices()).map(|v| f.at(v).iter().map(|x| x * x).sum::<f64>().sqrt()).fold(0.0, f64::max);
    Ok(Norms { l1, l2: l2sq.max(0.0).sqrt(), linf })
}

pub fn norms_cell(mesh: &DiskMesh, f: &CellField) -> Result<Norms> {
    if f.num_triangles() != mesh.num_triangles() {
        return Err(Error::Usage("cell field does not match mesh".into()));
    }
    let mut n = Norms::default();
    let mut l2sq = 0.0;
    for t in 0..mesh.num_triangles() {
        let m = f.at(t).iter().map(|x| x * x).sum::<f64>().sqrt();
        n.l1 += mesh.area(t) * m;
        l2sq += mesh.area(t) * m * m;
        n.linf = n.linf.max(m);
    }
    n.l2 = l2sq.sqrt();
    Ok(n)
}

pub fn norms_cell_vector(mesh: &DiskMesh, f: &CellVectorField) -> Result<Norms> {
    f.check_triangles(mesh.num_triangles())?;
    let mut n = Norms::default();
    let mut l2sq = 0.0;
    for t in 0..mesh.num_triangles() {
        let sq: f64 = f.at(t).iter().map(|v| v[0] * v[0] + v[1] * v[1]).sum();
        let m = sq.sqrt();
        n.l1 += mesh.area(t) * m;
        l2sq += mesh.area(t) * sq;
        n.linf = n.linf.max(m);
    }
    n.l2 = l2sq.sqrt();
    Ok(n)
}

/// Nodal interpolant of `g`.
pub fn interpolate<G>(mesh: &DiskMesh, shape: Shape, g: G) -> Result<Field>
where
    G: Fn([f64; 2]) -> Vec<f64>,
{
    let w = shape.width();
    let mut values = Vec::with_capacity(w * mesh.num_vertices());
    for p in mesh.vertices() {
        let v = g(*p);
        if v.len() != w {
            return Err(Error::Usage(format!("function returned {} values, shape needs {w}", v.len())));
        }
        values.extend(v);
    }
    Field::from_values(shape, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_of_linear_is_exact() {
        let m = DiskMesh::build(2).unwrap();
        let f = interpolate(&m, Shape::Scalar, |p| vec![3.0 * p[0] - 2.0 * p[1] + 1.0]).unwrap();
        let g = gradient(&m, &f).unwrap();
        for v in &g.values {
            assert!((v[0] - 3.0).abs() < 1e-12 && (v[1] + 2.0).abs() < 1e-12);
        }
        let p = perp_gradient(&m, &f).unwrap();
        assert!((p.values[0][0] - 2.0).abs() < 1e-12 && (p.values[0][1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn jacobian_of_coordinates() {
        let m = DiskMesh::build(1).unwrap();
        let x = interpolate(&m, Shape::Scalar, |p| vec![p[0]]).unwrap();
        let y = interpolate(&m, Shape::Scalar, |p| vec![p[1]]).unwrap();
        let j = jacobian_product(&m, &x, &y).unwrap();
        assert!(j.values.iter().all(|v| (v + 1.0).abs() < 1e-12));
    }

    #[test]
    fn norms_of_constant() {
        let m = DiskMesh::build(2).unwrap();
        let one = Field::scalar(vec![1.0; m.num_vertices()]);
        let n = norms(&m, &one).unwrap();
        assert!((n.l1 - m.total_area()).abs() < 1e-12);
        assert!((n.l2 * n.l2 - m.total_area()).abs() < 1e-12);
        assert_eq!(n.linf, 1.0);
    }

    #[test]
    fn weak_div_curl_of_rotation() {
        let m = DiskMesh::build(3).unwrap();
        // F = (x, y) sampled at centroids has div 2; the rotation has curl 2.
        let mut id = CellVectorField::zeros(Shape::Scalar, m.num_triangles());
        let mut rot = CellVectorField::zeros(Shape::Scalar, m.num_triangles());
        for t in 0..m.num_triangles() {
            let c = m.centroid(t);
            id.values[t] = c;
            rot.values[t] = [-c[1], c[0]];
        }
        let (d, _) = weak_div_curl(&m, &id).unwrap();
        let (_, c) = weak_div_curl(&m, &rot).unwrap();
        for v in m.interior_vertices() {
            assert!((d.at(v)[0] - 2.0).abs() < 1e-8, "{}", d.at(v)[0]);
            assert!((c.at(v)[0] - 2.0).abs() < 1e-8);
        }
    }
}
