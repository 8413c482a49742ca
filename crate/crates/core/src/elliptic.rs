//! Poisson, Wente and Hodge solvers on the disk mesh.
//!
//! All problems are posed in weak form: find `ψ` with
//! `∫ ∇ψ · ∇φ = ℓ(φ)` for every test function `φ`, so a strong equation
//! `Δψ = f` becomes the load `ℓ(φ) = -∫ f φ`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{pcg, CsrMatrix, JacobiPreconditioner, LinearOperator, SpdSolver, DIRECT_THRESHOLD, PCG_TOL};
use crate::mesh::{
    gradient, jacobian_product, norms, norms_cell, norms_cell_vector, perp_gradient, CellField, CellVectorField,
    DiskMesh, Field,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    /// Zero boundary values.
    Dirichlet,
    /// Natural boundary condition, solution normalized to mean zero.
    Neumann,
}

/// Cached factorizations of the stiffness matrix on one mesh.
pub struct Laplace<'m> {
    mesh: &'m DiskMesh,
    interior_map: Vec<Option<usize>>,
    interior: Vec<usize>,
    dirichlet: OnceLock<SpdSolver>,
    neumann: OnceLock<NeumannSolver>,
}

enum NeumannSolver {
    /// Factor of the stiffness matrix with vertex 0 removed.
    Pinned(SpdSolver),
    /// `K + c m m^T`, solved matrix-free.
    Stabilized { c: f64, jacobi: JacobiPreconditioner },
}

struct RankOne<'a> {
    k: &'a CsrMatrix,
    m: &'a [f64],
    c: f64,
}

impl LinearOperator for RankOne<'_> {
    fn dim(&self) -> usize {
        self.k.n()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.k.mul_vec_into(x, y);
        let s = self.c * self.m.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        for (yi, mi) in y.iter_mut().zip(self.m) {
            *yi += s * mi;
        }
    }
}

impl<'m> Laplace<'m> {
    pub fn new(mesh: &'m DiskMesh) -> Self {
        Laplace {
            mesh,
            interior_map: mesh.interior_map(),
            interior: mesh.interior_vertices(),
            dirichlet: OnceLock::new(),
            neumann: OnceLock::new(),
        }
    }

    pub fn mesh(&self) -> &'m DiskMesh {
        self.mesh
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn interior_map(&self) -> &[Option<usize>] {
        &self.interior_map
    }

    fn dirichlet_solver(&self) -> Result<&SpdSolver> {
        if let Some(s) = self.dirichlet.get() {
            return Ok(s);
        }
        let k = self.mesh.stiffness().principal_submatrix(&self.interior_map);
        let s = SpdSolver::new(k)?;
        Ok(self.dirichlet.get_or_init(|| s))
    }

    fn neumann_solver(&self) -> Result<&NeumannSolver> {
        if let Some(s) = self.neumann.get() {
            return Ok(s);
        }
        let k = self.mesh.stiffness();
        let s = if k.n() < DIRECT_THRESHOLD {
            let map: Vec<Option<usize>> = (0..k.n()).map(|i| i.checked_sub(1)).collect();
            NeumannSolver::Pinned(SpdSolver::direct(&k.principal_submatrix(&map))?)
        } else {
            let m = self.mesh.lumped_mass();
            let mm: f64 = m.iter().map(|x| x * x).sum();
            let kd = k.diagonal();
            let c = kd.iter().sum::<f64>() / kd.len() as f64 / mm;
            let diag: Vec<f64> = kd.iter().zip(m).map(|(d, mi)| d + c * mi * mi).collect();
            NeumannSolver::Stabilized { c, jacobi: JacobiPreconditioner::new(&diag) }
        };
        Ok(self.neumann.get_or_init(|| s))
    }

    /// Solves `∫∇u·∇φ = load(φ)` for interior test functions with
    /// `u = boundary` on the boundary (zero when `None`). Both vectors are
    /// indexed by vertex.
    pub fn solve_dirichlet(&self, load: &[f64], boundary: Option<&[f64]>) -> Result<Vec<f64>> {
        let nv = self.mesh.num_vertices();
        if load.len() != nv || boundary.is_some_and(|g| g.len() != nv) {
            return Err(Error::Usage("load or boundary data has the wrong length".into()));
        }
        let mut rhs: Vec<f64> = self.interior.iter().map(|&v| load[v]).collect();
        let mut u = vec![0.0; nv];
        if let Some(g) = boundary {
            let k = self.mesh.stiffness();
            for (r, &v) in rhs.iter_mut().zip(&self.interior) {
                let (cols, vals) = k.row(v);
                for (&j, &kv) in cols.iter().zip(vals) {
                    if self.interior_map[j].is_none() {
                        *r -= kv * g[j];
                    }
                }
            }
            for v in 0..nv {
                if self.interior_map[v].is_none() {
                    u[v] = g[v];
                }
            }
        }
        let x = self.dirichlet_solver()?.solve(&rhs)?;
        for (xi, &v) in x.iter().zip(&self.interior) {
            u[v] = *xi;
        }
        Ok(u)
    }

    /// Solves `∫∇u·∇φ = load(φ)` for all test functions. The load is first
    /// projected onto the compatible subspace; the solution has `∫u = 0`.
    pub fn solve_neumann(&self, load: &[f64]) -> Result<Vec<f64>> {
        let nv = self.mesh.num_vertices();
        if load.len() != nv {
            return Err(Error::Usage("load has the wrong length".into()));
        }
        let mean = load.iter().sum::<f64>() / nv as f64;
        let b: Vec<f64> = load.iter().map(|x| x - mean).collect();
        let m = self.mesh.lumped_mass();
        let mut u = match self.neumann_solver()? {
            NeumannSolver::Pinned(s) => {
                let x = s.solve(&b[1..])?;
                std::iter::once(0.0).chain(x).collect()
            }
            NeumannSolver::Stabilized { c, jacobi } => {
                let op = RankOne { k: self.mesh.stiffness(), m, c: *c };
                let mut x = vec![0.0; nv];
                let st = pcg(&op, jacobi, &b, &mut x, PCG_TOL, 0.0, 20 * nv + 100);
                if !st.converged {
                    return Err(Error::Solver(format!(
                        "Neumann CG stalled at relative residual {:.3e}",
                        st.relative_residual
                    )));
                }
                x
            }
        };
        let avg = u.iter().zip(m).map(|(a, b)| a * b).sum::<f64>() / m.iter().sum::<f64>();
        u.iter_mut().for_each(|x| *x -= avg);
        Ok(u)
    }

    /// Applies [`solve_dirichlet`](Self::solve_dirichlet) or
    /// [`solve_neumann`](Self::solve_neumann) with homogeneous data.
    pub fn solve(&self, bc: BoundaryCondition, load: &[f64]) -> Result<Vec<f64>> {
        match bc {
            BoundaryCondition::Dirichlet => self.solve_dirichlet(load, None),
            BoundaryCondition::Neumann => self.solve_neumann(load),
        }
    }

    /// Dual norm `sqrt(r^T K_II^{-1} r)` of an interior residual vector
    /// indexed by vertex; boundary entries are ignored.
    pub fn dual_norm(&self, r: &[f64]) -> Result<f64> {
        let ri: Vec<f64> = self.interior.iter().map(|&v| r[v]).collect();
        let x = self.dirichlet_solver()?.solve(&ri)?;
        Ok(x.iter().zip(&ri).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt())
    }
}

/// `∫ f φ_v` for a piecewise-constant scalar `f` (exact).
pub fn cell_load(mesh: &DiskMesh, f: &[f64]) -> Vec<f64> {
    let mut b = vec![0.0; mesh.num_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let w = f[t] * mesh.area(t) / 3.0;
        for &v in tri {
            b[v] += w;
        }
    }
    b
}

/// `∫ Y · ∇φ_v` for a piecewise-constant planar vector field `Y`.
pub fn div_load(mesh: &DiskMesh, y: &[[f64; 2]]) -> Vec<f64> {
    let mut b = vec![0.0; mesh.num_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let g = mesh.hat_gradients(t);
        let a = mesh.area(t);
        for (k, &v) in tri.iter().enumerate() {
            b[v] += a * (y[t][0] * g[k][0] + y[t][1] * g[k][1]);
        }
    }
    b
}

/// `∫ X · ∇^⊥φ_v` with `∇^⊥ = (-∂_y, ∂_x)`.
pub fn curl_load(mesh: &DiskMesh, x: &[[f64; 2]]) -> Vec<f64> {
    let mut b = vec![0.0; mesh.num_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let g = mesh.hat_gradients(t);
        let a = mesh.area(t);
        for (k, &v) in tri.iter().enumerate() {
            b[v] += a * (-x[t][0] * g[k][1] + x[t][1] * g[k][0]);
        }
    }
    b
}

/// Per-component slice of a cell vector field.
pub fn cell_component(f: &CellVectorField, c: usize) -> Vec<[f64; 2]> {
    let w = f.width();
    f.values.iter().skip(c).step_by(w).copied().collect()
}

pub enum PoissonRhs<'a> {
    Vertex(&'a Field),
    Cell(&'a CellField),
}

#[derive(Clone, Debug)]
pub struct PoissonSolution {
    pub psi: Field,
    pub linf: f64,
    pub grad_l2: f64,
    pub rhs_l1: f64,
    pub rhs_l2: f64,
}

/// Solves `Δψ = f` in the disk with `ψ = 0` on the boundary.
pub fn poisson_dirichlet(lap: &Laplace, rhs: PoissonRhs) -> Result<PoissonSolution> {
    let mesh = lap.mesh();
    let (shape, loads, rn) = match rhs {
        PoissonRhs::Vertex(f) => {
            f.check_vertices(mesh.num_vertices())?;
            let loads: Vec<Vec<f64>> = f.components().iter().map(|c| mesh.mass().mul_vec(c)).collect();
            (f.shape(), loads, norms(mesh, f)?)
        }
        PoissonRhs::Cell(f) => {
            if f.num_triangles() != mesh.num_triangles() {
                return Err(Error::Usage("cell right-hand side does not match mesh".into()));
            }
            let w = f.width();
            let loads: Vec<Vec<f64>> = (0..w)
                .map(|c| {
                    let fc: Vec<f64> = f.values.iter().skip(c).step_by(w).copied().collect();
                    cell_load(mesh, &fc)
                })
                .collect();
            (f.shape, loads, norms_cell(mesh, f)?)
        }
    };
    let mut comps = Vec::with_capacity(loads.len());
    for l in loads {
        let neg: Vec<f64> = l.iter().map(|x| -x).collect();
        comps.push(lap.solve_dirichlet(&neg, None)?);
    }
    let psi = Field::from_components(shape, &comps)?;
    let pn = norms(mesh, &psi)?;
    let grad_l2 = comps.iter().map(|c| mesh.stiffness().quadratic_form(c)).sum::<f64>().max(0.0).sqrt();
    Ok(PoissonSolution { psi, linf: pn.linf, grad_l2, rhs_l1: rn.l1, rhs_l2: rn.l2 })
}

/// `Δψ = |∇u|^2` with zero boundary values.
pub fn psi_energy_density(lap: &Laplace, u: &Field) -> Result<PoissonSolution> {
    let f = energy_density(lap.mesh(), u)?;
    poisson_dirichlet(lap, PoissonRhs::Cell(&f))
}

/// `|∇u|^2` per triangle.
pub fn energy_density(mesh: &DiskMesh, u: &Field) -> Result<CellField> {
    let g = gradient(mesh, u)?;
    Ok(CellField::scalar(
        (0..mesh.num_triangles()).map(|t| g.at(t).iter().map(|v| v[0] * v[0] + v[1] * v[1]).sum()).collect(),
    ))
}

#[derive(Clone, Debug)]
pub struct WenteResult {
    pub w: Field,
    pub linf: f64,
    pub grad_l2: f64,
    pub grad_a_l2: f64,
    pub grad_b_l2: f64,
    /// `(|w|_∞ + |∇w|_2) / (|∇a|_2 |∇b|_2)`, absent when the denominator
    /// vanishes.
    pub ratio: Option<f64>,
}

/// Solves `Δw = ∇a · ∇^⊥b = a_y b_x - a_x b_y`.
pub fn wente_solve(lap: &Laplace, a: &Field, b: &Field, bc: BoundaryCondition) -> Result<WenteResult> {
    let mesh = lap.mesh();
    let j = jacobian_product(mesh, a, b)?;
    let load: Vec<f64> = cell_load(mesh, &j.values).iter().map(|x| -x).collect();
    let w = lap.solve(bc, &load)?;
    let grad_l2 = mesh.stiffness().quadratic_form(&w).max(0.0).sqrt();
    let w = Field::scalar(w);
    let linf = norms(mesh, &w)?.linf;
    let ga = mesh.stiffness().quadratic_form(a.values()).max(0.0).sqrt();
    let gb = mesh.stiffness().quadratic_form(b.values()).max(0.0).sqrt();
    let den = ga * gb;
    let ratio = (den > 1e-14).then(|| (linf + grad_l2) / den);
    Ok(WenteResult { w, linf, grad_l2, grad_a_l2: ga, grad_b_l2: gb, ratio })
}

#[derive(Clone, Debug)]
pub struct HodgeDecomposition {
    /// Stream function part, `∫η = 0`.
    pub eta: Field,
    /// Gradient part, zero on the boundary.
    pub zeta: Field,
    /// `|F - ∇^⊥η - ∇ζ|_2`.
    pub residual: f64,
    pub f_l2: f64,
}

/// Splits `F = ∇^⊥η + ∇ζ` componentwise.
pub fn hodge_decompose(lap: &Laplace, f: &CellVectorField) -> Result<HodgeDecomposition> {
    let mesh = lap.mesh();
    f.check_triangles(mesh.num_triangles())?;
    let w = f.width();
    let mut etas = Vec::with_capacity(w);
    let mut zetas = Vec::with_capacity(w);
    for c in 0..w {
        let fc = cell_component(f, c);
        zetas.push(lap.solve_dirichlet(&div_load(mesh, &fc), None)?);
        etas.push(lap.solve_neumann(&curl_load(mesh, &fc))?);
    }
    let eta = Field::from_components(f.shape, &etas)?;
    let zeta = Field::from_components(f.shape, &zetas)?;
    let pe = perp_gradient(mesh, &eta)?;
    let gz = gradient(mesh, &zeta)?;
    let mut r = f.clone();
    for ((rv, p), g) in r.values.iter_mut().zip(&pe.values).zip(&gz.values) {
        rv[0] -= p[0] + g[0];
        rv[1] -= p[1] + g[1];
    }
    Ok(HodgeDecomposition {
        eta,
        zeta,
        residual: norms_cell_vector(mesh, &r)?.l2,
        f_l2: norms_cell_vector(mesh, f)?.l2,
    })
}

/// Shape helper: the P1 field of the `c`-th component.
pub fn scalar_component(f: &Field, c: usize) -> Field {
    Field::scalar(f.component(c))
}
