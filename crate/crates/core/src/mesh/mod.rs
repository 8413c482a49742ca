//! Triangulated unit disk, P1 fields and discrete calculus on it.

mod calculus;
mod field;
mod locate;

pub use calculus::{
    gradient, interpolate, jacobian_product, norms, norms_cell, norms_cell_vector, perp_gradient, weak_div_curl, Norms,
};
pub use field::{CellField, CellVectorField, Field, Shape};
pub use locate::PointLocator;

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;

/// Largest refinement level accepted by [`DiskMesh::build`].
pub const MAX_REFINEMENT: u32 = 10;

/// Quasi-uniform triangulation of the closed unit disk.
///
/// Vertices are laid out on concentric rings: ring `i` (of `N = 2^(k+1)`)
/// carries `6i` equally spaced vertices at radius `i/N`, and the center is
/// vertex 0. Boundary vertices lie exactly on the unit circle.
#[derive(Clone, Debug)]
pub struct DiskMesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    refinement: u32,
    h: f64,
    areas: Vec<f64>,
    grads: Vec<[[f64; 2]; 3]>,
    stiffness: CsrMatrix,
    mass: CsrMatrix,
    lumped: Vec<f64>,
}

fn ring_offset(i: usize) -> usize {
    if i == 0 {
        0
    } else {
        1 + 3 * i * (i - 1)
    }
}

impl DiskMesh {
    pub fn build(refinement: u32) -> Result<Self> {
        if refinement > MAX_REFINEMENT {
            return Err(Error::Usage(format!("refinement {refinement} exceeds the limit {MAX_REFINEMENT}")));
        }
        let rings = 2usize << refinement;
        let nv = 1 + 3 * rings * (rings + 1);
        let mut vertices = Vec::with_capacity(nv);
        let mut boundary = vec![false; nv];
        vertices.push([0.0, 0.0]);
        for i in 1..=rings {
            let r = i as f64 / rings as f64;
            let m = 6 * i;
            for j in 0..m {
                let a = 2.0 * PI * j as f64 / m as f64;
                if i == rings {
                    boundary[vertices.len()] = true;
                }
                vertices.push([r * a.cos(), r * a.sin()]);
            }
        }
        let vid = |i: usize, j: usize| -> usize {
            if i == 0 {
                0
            } else {
                ring_offset(i) + j % (6 * i)
            }
        };
        let mut triangles = Vec::with_capacity(6 * rings * rings);
        for i in 1..=rings {
            for s in 0..6 {
                let outer = |k: usize| vid(i, s * i + k);
                let inner = |k: usize| vid(i - 1, s * (i - 1) + k);
                for k in 0..i {
                    triangles.push([outer(k), outer(k + 1), inner(k)]);
                }
                for k in 0..i - 1 {
                    triangles.push([inner(k), outer(k + 1), inner(k + 1)]);
                }
            }
        }
        Self::from_parts(vertices, triangles, boundary, refinement)
    }

    /// Assembles geometry and the P1 matrices for an explicit triangulation.
    pub fn from_parts(
        vertices: Vec<[f64; 2]>,
        mut triangles: Vec<[usize; 3]>,
        boundary: Vec<bool>,
        refinement: u32,
    ) -> Result<Self> {
        let nv = vertices.len();
        if boundary.len() != nv {
            return Err(Error::Input("boundary flags do not match vertex count".into()));
        }
        let mut areas = Vec::with_capacity(triangles.len());
        let mut grads = Vec::with_capacity(triangles.len());
        let mut h: f64 = 0.0;
        for tri in triangles.iter_mut() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::Input(format!("triangle {tri:?} references a missing vertex")));
            }
            let [a, b, c] = tri.map(|v| vertices[v]);
            let mut cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
            if cross < 0.0 {
                tri.swap(1, 2);
                cross = -cross;
            }
            if cross <= 0.0 {
                return Err(Error::Input(format!("degenerate triangle {tri:?}")));
            }
            let p = tri.map(|v| vertices[v]);
            let area = 0.5 * cross;
            let mut g = [[0.0; 2]; 3];
            for (k, gk) in g.iter_mut().enumerate() {
                let p1 = p[(k + 1) % 3];
                let p2 = p[(k + 2) % 3];
                *gk = [(p1[1] - p2[1]) / cross, (p2[0] - p1[0]) / cross];
                h = h.max(((p1[0] - p2[0]).powi(2) + (p1[1] - p2[1]).powi(2)).sqrt());
            }
            areas.push(area);
            grads.push(g);
        }
        let mut kt = Vec::with_capacity(9 * triangles.len());
        let mut mt = Vec::with_capacity(9 * triangles.len());
        let mut lumped = vec![0.0; nv];
        for (t, tri) in triangles.iter().enumerate() {
            let (a, g) = (areas[t], &grads[t]);
            for i in 0..3 {
                lumped[tri[i]] += a / 3.0;
                for j in 0..3 {
                    kt.push((tri[i], tri[j], a * (g[i][0] * g[j][0] + g[i][1] * g[j][1])));
                    mt.push((tri[i], tri[j], a / 12.0 * if i == j { 2.0 } else { 1.0 }));
                }
            }
        }
        let stiffness = CsrMatrix::from_triplets(nv, &kt)?;
        let mass = CsrMatrix::from_triplets(nv, &mt)?;
        Ok(DiskMesh { vertices, triangles, boundary, refinement, h, areas, grads, stiffness, mass, lumped })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }
    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }
    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }
    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }
    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }
    pub fn refinement(&self) -> u32 {
        self.refinement
    }
    /// Longest edge length.
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn area(&self, t: usize) -> f64 {
        self.areas[t]
    }
    pub fn areas(&self) -> &[f64] {
        &self.areas
    }
    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }
    /// Gradients of the three barycentric hat functions of triangle `t`.
    pub fn hat_gradients(&self, t: usize) -> &[[f64; 2]; 3] {
        &self.grads[t]
    }
    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }
    /// P1 stiffness matrix `K_ij = int grad phi_i . grad phi_j`.
    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }
    /// Consistent P1 mass matrix.
    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }
    /// Row sums of the mass matrix.
    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped
    }
    pub fn boundary_vertices(&self) -> Vec<usize> {
        (0..self.num_vertices()).filter(|&v| self.boundary[v]).collect()
    }
    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.num_vertices()).filter(|&v| !self.boundary[v]).collect()
    }
    /// `map[v] = Some(k)` when `v` is the `k`-th interior vertex.
    pub fn interior_map(&self) -> Vec<Option<usize>> {
        let mut k = 0;
        self.boundary
            .iter()
            .map(|&b| {
                if b {
                    None
                } else {
                    k += 1;
                    Some(k - 1)
                }
            })
            .collect()
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_degrees(&self) -> f64 {
        let mut best = f64::INFINITY;
        for tri in &self.triangles {
            let p = tri.map(|v| self.vertices[v]);
            for k in 0..3 {
                let a = p[k];
                let b = p[(k + 1) % 3];
                let c = p[(k + 2) % 3];
                let u = [b[0] - a[0], b[1] - a[1]];
                let w = [c[0] - a[0], c[1] - a[1]];
                let cos = (u[0] * w[0] + u[1] * w[1])
                    / ((u[0] * u[0] + u[1] * u[1]).sqrt() * (w[0] * w[0] + w[1] * w[1]).sqrt());
                best = best.min(cos.clamp(-1.0, 1.0).acos().to_degrees());
            }
        }
        best
    }

    /// Text export: a `nv nt` header, one `x y boundary` line per vertex and
    /// one `i j k` line per triangle (0-based). Coordinates round-trip exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {}", self.num_vertices(), self.num_triangles());
        for (p, b) in self.vertices.iter().zip(&self.boundary) {
            let _ = writeln!(s, "{:?} {:?} {}", p[0], p[1], u8::from(*b));
        }
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let bad = |line: usize, msg: &str| Error::Input(format!("line {}: {msg}", line + 1));
        let (hl, header) = lines.next().ok_or_else(|| Error::Input("empty mesh file".into()))?;
        let head: Vec<usize> = header
            .split_whitespace()
            .map(|w| w.parse().map_err(|_| bad(hl, "expected `nv nt`")))
            .collect::<Result<_>>()?;
        if head.len() != 2 {
            return Err(bad(hl, "expected `nv nt`"));
        }
        let (nv, nt) = (head[0], head[1]);
        let mut vertices = Vec::with_capacity(nv);
        let mut boundary = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (ln, l) = lines.next().ok_or_else(|| Error::Input("truncated vertex block".into()))?;
            let w: Vec<&str> = l.split_whitespace().collect();
            if w.len() != 3 {
                return Err(bad(ln, "expected `x y boundary`"));
            }
            let x: f64 = w[0].parse().map_err(|_| bad(ln, "bad x coordinate"))?;
            let y: f64 = w[1].parse().map_err(|_| bad(ln, "bad y coordinate"))?;
            let b = match w[2] {
                "0" => false,
                "1" => true,
                _ => return Err(bad(ln, "boundary flag must be 0 or 1")),
            };
            vertices.push([x, y]);
            boundary.push(b);
        }
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (ln, l) = lines.next().ok_or_else(|| Error::Input("truncated triangle block".into()))?;
            let w: Vec<usize> = l
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| bad(ln, "bad vertex index")))
                .collect::<Result<_>>()?;
            if w.len() != 3 {
                return Err(bad(ln, "expected `i j k`"));
            }
            triangles.push([w[0], w[1], w[2]]);
        }
        if let Some((ln, _)) = lines.next() {
            return Err(bad(ln, "trailing data after triangle block"));
        }
        let nb = boundary.iter().filter(|&&b| b).count();
        let refinement = ((nb / 6).max(2) as f64 / 2.0).log2().round().max(0.0) as u32;
        Self::from_parts(vertices, triangles, boundary, refinement)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_area() {
        for k in 0..4 {
            let m = DiskMesh::build(k).unwrap();
            let n = 2usize << k;
            assert_eq!(m.num_vertices(), 1 + 3 * n * (n + 1));
            assert_eq!(m.num_triangles(), 6 * n * n);
            assert_eq!(m.boundary_vertices().len(), 6 * n);
            // The mesh is the inscribed 6N-gon.
            let polygon = 3.0 * n as f64 * (2.0 * PI / (6 * n) as f64).sin();
            assert!((m.total_area() - polygon).abs() < 1e-12);
        }
        let m = DiskMesh::build(0).unwrap();
        assert_eq!(m.num_vertices(), 19);
        assert!((m.total_area() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_on_circle_and_positive_orientation() {
        let m = DiskMesh::build(3).unwrap();
        for (p, &b) in m.vertices().iter().zip(m.boundary_flags()) {
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            assert_eq!(b, (r - 1.0).abs() < 1e-12);
        }
        assert!(m.areas().iter().all(|&a| a > 0.0));
        assert!(m.min_angle_degrees() >= 20.0);
    }

    #[test]
    fn stiffness_kills_constants_and_mass_sums_to_area() {
        let m = DiskMesh::build(2).unwrap();
        let ones = vec![1.0; m.num_vertices()];
        assert!(m.stiffness().mul_vec(&ones).iter().all(|v| v.abs() < 1e-12));
        let total: f64 = m.mass().mul_vec(&ones).iter().sum();
        assert!((total - m.total_area()).abs() < 1e-12);
        // Linear function x: int |grad x|^2 = area.
        let x: Vec<f64> = m.vertices().iter().map(|p| p[0]).collect();
        assert!((m.stiffness().quadratic_form(&x) - m.total_area()).abs() < 1e-12);
    }

    #[test]
    fn refinement_limit() {
        assert!(matches!(DiskMesh::build(11), Err(Error::Usage(_))));
    }

    #[test]
    fn text_round_trip() {
        let m = DiskMesh::build(2).unwrap();
        let back = DiskMesh::from_text(&m.to_text()).unwrap();
        assert_eq!(back.vertices(), m.vertices());
        assert_eq!(back.triangles(), m.triangles());
        assert_eq!(back.boundary_flags(), m.boundary_flags());
        assert_eq!(back.refinement(), 2);
        assert!(DiskMesh::from_text("3 1\n0 0 0\n1 0 1\n").is_err());
    }
}
