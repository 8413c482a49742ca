//! Construction of `(A, B)` with `∇A - AΩ = ∇^⊥B` and the conservation law
//! `div(A∇u + B∇^⊥u) = A u_t`.

use serde::{Deserialize, Serialize};

use super::{mat, ConnectionForm, GaugeFrame};
use crate::elliptic::{cell_load, curl_load, div_load, Laplace};
use crate::error::{Error, Result};
use crate::manifold::TargetManifold;
use crate::mesh::{gradient, jacobian_product, norms, perp_gradient, CellVectorField, DiskMesh, Field, Shape};

/// Boundary treatment for `A` in the fixed-point iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ABoundary {
    /// `∂_ν A = (AΩ)·ν`, with the free constant fixed by `∫ A P = |B₁| Id`.
    #[default]
    Natural,
    /// `A = P^T` on the boundary.
    Dirichlet,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbOptions {
    pub boundary: ABoundary,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for AbOptions {
    fn default() -> Self {
        AbOptions { boundary: ABoundary::Natural, max_iter: 200, tol: 1e-10 }
    }
}

#[derive(Clone, Debug)]
pub struct ConservationFrame {
    pub n: usize,
    pub a: Field,
    /// `A P - Id`
    pub a_hat: Field,
    /// Zero on boundary vertices.
    pub b: Field,
    /// `|∇A - ĀΩ - ∇^⊥B|_2`
    pub r_cons: f64,
    pub iterations: usize,
    pub converged: bool,
    pub min_singular_value: f64,
}

pub(crate) fn cell_mean(f: &Field, tri: &[usize; 3]) -> Vec<f64> {
    let mut m = vec![0.0; f.width()];
    for &v in tri {
        for (o, x) in m.iter_mut().zip(f.at(v)) {
            *o += x / 3.0;
        }
    }
    m
}

/// `Ā Ω_d` per triangle.
fn a_omega(mesh: &DiskMesh, a: &Field, omega: &ConnectionForm) -> CellVectorField {
    let n = omega.n;
    let mut y = CellVectorField::zeros(Shape::Matrix(n), mesh.num_triangles());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let bar = cell_mean(a, tri);
        let cell = y.at_mut(t);
        for d in 0..2 {
            let p = mat::mul(n, &bar, &omega.matrix(t, d));
            for e in 0..n * n {
                cell[e][d] = p[e];
            }
        }
    }
    y
}

fn component(y: &CellVectorField, c: usize) -> Vec<[f64; 2]> {
    (0..y.num_triangles()).map(|t| y.at(t)[c]).collect()
}

fn field_l2(mesh: &DiskMesh, f: &Field) -> f64 {
    f.components().iter().map(|c| mesh.mass().quadratic_form(c)).sum::<f64>().max(0.0).sqrt()
}

/// Fixed-point iteration `ΔB = -curl(AΩ)`, `ΔA = div(AΩ)` starting from
/// `A = P^T`, with `B = 0` on the boundary.
pub fn construct_ab(
    lap: &Laplace,
    gauge: &GaugeFrame,
    omega: &ConnectionForm,
    opts: &AbOptions,
) -> Result<ConservationFrame> {
    let mesh = lap.mesh();
    let n = gauge.n;
    let nn = n * n;
    let nv = mesh.num_vertices();
    if omega.n != n {
        return Err(Error::Usage("gauge and connection form have different sizes".into()));
    }
    let pt: Vec<f64> = (0..nv).flat_map(|v| mat::transpose(n, gauge.p.at(v))).collect();
    let pt = Field::from_values(Shape::Matrix(n), pt)?;
    let mut a = pt.clone();
    let mut b = Field::zeros(Shape::Matrix(n), nv);
    let lumped = mesh.lumped_mass();
    let mut int_p = mat::zeros(n);
    for v in 0..nv {
        mat::add_scaled(&mut int_p, lumped[v], gauge.p.at(v));
    }
    let int_p_inv = mat::inverse(n, &int_p);
    let area: f64 = lumped.iter().sum();

    let mut iterations = 0;
    let mut converged = omega.is_zero();
    let mut last_change = f64::INFINITY;
    let mut growth = 0;
    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let y = a_omega(mesh, &a, omega);
        let mut a_new = Field::zeros(Shape::Matrix(n), nv);
        let mut b_new = Field::zeros(Shape::Matrix(n), nv);
        for c in 0..nn {
            let yc = component(&y, c);
            let bl: Vec<f64> = curl_load(mesh, &yc).iter().map(|x| -x).collect();
            b_new.set_component(c, &lap.solve_dirichlet(&bl, None)?);
            let al = div_load(mesh, &yc);
            let ac = match opts.boundary {
                ABoundary::Natural => lap.solve_neumann(&al)?,
                ABoundary::Dirichlet => lap.solve_dirichlet(&al, Some(&pt.component(c)))?,
            };
            a_new.set_component(c, &ac);
        }
        if opts.boundary == ABoundary::Natural {
            let inv = int_p_inv
                .as_ref()
                .ok_or_else(|| Error::Usage("∫P is singular; natural boundary normalization fails".into()))?;
            let mut int_ap = mat::zeros(n);
            for v in 0..nv {
                mat::add_scaled(&mut int_ap, lumped[v], &mat::mul(n, a_new.at(v), gauge.p.at(v)));
            }
            let mut target = mat::identity(n);
            for x in target.iter_mut() {
                *x *= area;
            }
            mat::add_scaled(&mut target, -1.0, &int_ap);
            let shift = mat::mul(n, &target, inv);
            for v in 0..nv {
                mat::add_scaled(a_new.at_mut(v), 1.0, &shift);
            }
        }
        let change = field_l2(mesh, &a_new.sub(&a)?) + field_l2(mesh, &b_new.sub(&b)?);
        a = a_new;
        b = b_new;
        if !change.is_finite() {
            return Err(Error::Divergence("(A, B) iteration produced non-finite values".into()));
        }
        if change < opts.tol {
            converged = true;
            break;
        }
        if change > last_change {
            growth += 1;
            if growth >= 3 {
                return Err(Error::Divergence(format!(
                    "(A, B) iteration change grew three steps in a row (now {change:.3e}); use smaller-energy input"
                )));
            }
        } else {
            growth = 0;
        }
        last_change = change;
    }

    let a_hat: Vec<f64> = (0..nv)
        .flat_map(|v| {
            let mut m = mat::mul(n, a.at(v), gauge.p.at(v));
            for i in 0..n {
                m[i * n + i] -= 1.0;
            }
            m
        })
        .collect();
    let r_cons = cons_residual(mesh, &a, &b, omega)?;
    let min_singular_value = (0..nv).map(|v| mat::min_singular_value(n, a.at(v))).fold(f64::INFINITY, f64::min);
    Ok(ConservationFrame {
        n,
        a,
        a_hat: Field::from_values(Shape::Matrix(n), a_hat)?,
        b,
        r_cons,
        iterations,
        converged,
        min_singular_value,
    })
}

fn cons_residual(mesh: &DiskMesh, a: &Field, b: &Field, omega: &ConnectionForm) -> Result<f64> {
    let ga = gradient(mesh, a)?;
    let pb = perp_gradient(mesh, b)?;
    let y = a_omega(mesh, a, omega);
    let mut s = 0.0;
    for t in 0..mesh.num_triangles() {
        let (g, p, q) = (ga.at(t), pb.at(t), y.at(t));
        for e in 0..g.len() {
            for d in 0..2 {
                s += mesh.area(t) * (g[e][d] - q[e][d] - p[e][d]).powi(2);
            }
        }
    }
    Ok(s.sqrt())
}

/// Weak residual of `div(A∇u + B∇^⊥u) = A u_t` in the discrete `H^{-1}` norm.
/// `u_t = None` tests the exact conservation law.
pub fn conservation_residual(lap: &Laplace, frame: &ConservationFrame, u: &Field, u_t: Option<&Field>) -> Result<f64> {
    let mesh = lap.mesh();
    let n = frame.n;
    let nv = mesh.num_vertices();
    u.check_vertices(nv)?;
    if u.width() != n {
        return Err(Error::Usage("map does not match the frame size".into()));
    }
    let gu = gradient(mesh, u)?;
    let pu = perp_gradient(mesh, u)?;
    let mut flux = CellVectorField::zeros(Shape::Vector(n), mesh.num_triangles());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let (ab, bb) = (cell_mean(&frame.a, tri), cell_mean(&frame.b, tri));
        let (g, p) = (gu.at(t), pu.at(t));
        let cell = flux.at_mut(t);
        for i in 0..n {
            for j in 0..n {
                for d in 0..2 {
                    cell[i][d] += ab[i * n + j] * g[j][d] + bb[i * n + j] * p[j][d];
                }
            }
        }
    }
    let source = match u_t {
        Some(ut) => {
            ut.check_vertices(nv)?;
            let au: Vec<f64> = (0..nv)
                .flat_map(|v| {
                    let a = frame.a.at(v);
                    let w = ut.at(v);
                    (0..n).map(move |i| (0..n).map(|j| a[i * n + j] * w[j]).sum::<f64>())
                })
                .collect();
            Some(Field::from_values(Shape::Vector(n), au)?)
        }
        None => None,
    };
    let mut total = 0.0;
    for i in 0..n {
        let fi: Vec<[f64; 2]> = (0..mesh.num_triangles()).map(|t| flux.at(t)[i]).collect();
        let mut r: Vec<f64> = div_load(mesh, &fi).iter().map(|x| -x).collect();
        if let Some(s) = &source {
            let m = mesh.mass().mul_vec(&s.component(i));
            r.iter_mut().zip(m).for_each(|(a, b)| *a -= b);
        }
        let d = lap.dual_norm(&r)?;
        total += d * d;
    }
    Ok(total.sqrt())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BSupEstimate {
    /// `|B|_∞` of the fixed-point `B`.
    pub b_sup: f64,
    /// `|B|_∞` of the Jacobian-form re-solve.
    pub b_sup_wente: f64,
    pub e_raw: f64,
    /// `b_sup / e_raw`, zero when the energy vanishes.
    pub ratio: f64,
    /// `|B_wente - B|_2`
    pub agreement_l2: f64,
    pub b_l2: f64,
}

/// Re-solves `ΔB^i_z = -Σ_l ∇u^l·∇^⊥(A^i_m C^m_{z,l}(u))` with zero trace and
/// compares with the fixed-point `B`.
pub fn b_sup_estimate(
    lap: &Laplace,
    frame: &ConservationFrame,
    target: &TargetManifold,
    u: &Field,
) -> Result<BSupEstimate> {
    let mesh = lap.mesh();
    let n = frame.n;
    let nv = mesh.num_vertices();
    u.check_vertices(nv)?;
    let coeffs: Vec<Vec<f64>> = (0..nv).map(|v| target.omega_coefficients(u.at(v))).collect::<Result<_>>()?;
    let mut bw = Field::zeros(Shape::Matrix(n), nv);
    for i in 0..n {
        for z in 0..n {
            let mut src = vec![0.0; mesh.num_triangles()];
            for l in 0..n {
                let g: Vec<f64> = (0..nv)
                    .map(|v| (0..n).map(|m| frame.a.at(v)[i * n + m] * coeffs[v][(m * n + z) * n + l]).sum())
                    .collect();
                let j = jacobian_product(mesh, &Field::scalar(u.component(l)), &Field::scalar(g))?;
                for (s, x) in src.iter_mut().zip(&j.values) {
                    *s += x;
                }
            }
            bw.set_component(i * n + z, &lap.solve_dirichlet(&cell_load(mesh, &src), None)?);
        }
    }
    let e_raw: f64 = u.components().iter().map(|c| mesh.stiffness().quadratic_form(c)).sum();
    let b_sup = norms(mesh, &frame.b)?.linf;
    Ok(BSupEstimate {
        b_sup,
        b_sup_wente: norms(mesh, &bw)?.linf,
        e_raw,
        ratio: if e_raw > 0.0 { b_sup / e_raw } else { 0.0 },
        agreement_l2: field_l2(mesh, &bw.sub(&frame.b)?),
        b_l2: field_l2(mesh, &frame.b),
    })
}
