//! Coulomb gauges for antisymmetric connection forms, the conservation law
//! built from them, and the structure of `ΔP`.
//!
//! A connection form `Ω` is a piecewise-constant field of antisymmetric
//! `n x n` matrices per planar direction. For a map `u` into `N`,
//! `Ω^{ij} = Σ_α (ν_α^i ∇(ν_α∘u)^j - ν_α^j ∇(ν_α∘u)^i)`, so that
//! `-Δu = Ω · ∇u` for harmonic maps.

mod conservation;
pub mod mat;
mod structure;

pub use conservation::{
    b_sup_estimate, conservation_residual, construct_ab, ABoundary, AbOptions, BSupEstimate, ConservationFrame,
};
pub use structure::{default_probes, p_oscillation, p_structure, OscillationReport, PStructure, Probe};

use serde::{Deserialize, Serialize};

use crate::elliptic::{curl_load, Laplace};
use crate::error::{Error, Result};
use crate::linalg::SpdSolver;
use crate::manifold::TargetManifold;
use crate::mesh::{gradient, perp_gradient, CellVectorField, DiskMesh, Field, Shape};
use crate::par::{map_indexed, Exec};

/// Piecewise-constant antisymmetric matrix-valued 1-form.
#[derive(Clone, Debug, PartialEq)]
pub struct ConnectionForm {
    pub n: usize,
    /// Shape `Matrix(n)`; entry `(i, j)` of direction `d` on triangle `t` is
    /// `values.at(t)[i * n + j][d]`.
    pub values: CellVectorField,
}

impl ConnectionForm {
    pub fn zeros(n: usize, nt: usize) -> Self {
        ConnectionForm { n, values: CellVectorField::zeros(Shape::Matrix(n), nt) }
    }

    /// The matrix `Ω_d` on triangle `t`.
    pub fn matrix(&self, t: usize, d: usize) -> Vec<f64> {
        self.values.direction(t, d)
    }

    pub fn l2(&self, mesh: &DiskMesh) -> f64 {
        let mut s = 0.0;
        for t in 0..mesh.num_triangles() {
            s += mesh.area(t) * self.values.at(t).iter().map(|v| v[0] * v[0] + v[1] * v[1]).sum::<f64>();
        }
        s.sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.values.values.iter().all(|v| v[0] == 0.0 && v[1] == 0.0)
    }

    /// Largest `|Ω + Ω^T|` entry.
    pub fn antisymmetry_defect(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for t in 0..self.values.num_triangles() {
            let c = self.values.at(t);
            for i in 0..n {
                for j in 0..n {
                    for d in 0..2 {
                        worst = worst.max((c[i * n + j][d] + c[j * n + i][d]).abs());
                    }
                }
            }
        }
        worst
    }
}

/// Discrete connection form of a map into `target`, using the normal frame
/// at the vertices, centroid averages and P1 gradients.
pub fn connection_form(mesh: &DiskMesh, target: &TargetManifold, u: &Field) -> Result<ConnectionForm> {
    u.check_vertices(mesh.num_vertices())?;
    let n = target.ambient_dim();
    if u.width() != n {
        return Err(Error::Usage("map does not match the target dimension".into()));
    }
    let k = target.codim();
    let mut frames = Vec::with_capacity(mesh.num_vertices());
    for v in 0..mesh.num_vertices() {
        frames.push(target.normal_frame(u.at(v))?);
    }
    let mut out = ConnectionForm::zeros(n, mesh.num_triangles());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let g = mesh.hat_gradients(t);
        let cell = out.values.at_mut(t);
        for alpha in 0..k {
            let mut bar = vec![0.0; n];
            let mut dnu = vec![[0.0; 2]; n];
            for (a, &v) in tri.iter().enumerate() {
                let nu = &frames[v][alpha];
                for c in 0..n {
                    bar[c] += nu[c] / 3.0;
                    dnu[c][0] += g[a][0] * nu[c];
                    dnu[c][1] += g[a][1] * nu[c];
                }
            }
            for i in 0..n {
                for j in 0..n {
                    for d in 0..2 {
                        cell[i * n + j][d] += bar[i] * dnu[j][d] - bar[j] * dnu[i][d];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Test family with a known Coulomb gauge: `P̂ = exp(S(x))` with `P̂(0) = I`,
/// `ξ̂ = s_ξ (1 - |x|^2) K₀`, and `Ω = P̂ ∇^⊥ξ̂ P̂^T - ∇P̂ P̂^T`, so that
/// `P̂^T ∇P̂ + P̂^T Ω P̂ = ∇^⊥ξ̂` exactly.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SyntheticGauge {
    pub p_scale: f64,
    pub xi_scale: f64,
}

const K0: [f64; 9] = [0.0, 1.0, 0.5, -1.0, 0.0, -0.3, -0.5, 0.3, 0.0];

impl SyntheticGauge {
    pub const N: usize = 3;

    fn generator(&self, x: [f64; 2]) -> Vec<f64> {
        let s = self.p_scale;
        let (a, b, c) = (s * x[0], s * x[1] * (1.0 + 0.5 * x[0]), s * x[0] * x[1]);
        vec![0.0, a, b, -a, 0.0, c, -b, -c, 0.0]
    }

    pub fn p_hat(&self, x: [f64; 2]) -> Vec<f64> {
        mat::expm(3, &self.generator(x))
    }

    pub fn xi_hat(&self, x: [f64; 2]) -> Vec<f64> {
        let w = self.xi_scale * (1.0 - x[0] * x[0] - x[1] * x[1]);
        K0.iter().map(|k| w * k).collect()
    }

    fn dp_hat(&self, x: [f64; 2], d: usize) -> Vec<f64> {
        let h = 1e-5;
        let mut xp = x;
        let mut xm = x;
        xp[d] += h;
        xm[d] -= h;
        let (a, b) = (self.p_hat(xp), self.p_hat(xm));
        a.iter().zip(&b).map(|(p, q)| (p - q) / (2.0 * h)).collect()
    }

    /// `Ω` sampled at triangle centroids.
    pub fn omega(&self, mesh: &DiskMesh) -> ConnectionForm {
        let n = 3;
        let mut out = ConnectionForm::zeros(n, mesh.num_triangles());
        for t in 0..mesh.num_triangles() {
            let x = mesh.centroid(t);
            let p = self.p_hat(x);
            // ∇^⊥ξ̂ = s_ξ (2y, -2x) K₀
            let perp = [2.0 * x[1] * self.xi_scale, -2.0 * x[0] * self.xi_scale];
            let cell = out.values.at_mut(t);
            for d in 0..2 {
                let kd: Vec<f64> = K0.iter().map(|k| perp[d] * k).collect();
                let first = mat::mult(n, &mat::mul(n, &p, &kd), &p);
                let second = mat::mult(n, &self.dp_hat(x, d), &p);
                for e in 0..n * n {
                    cell[e][d] = first[e] - second[e];
                }
            }
        }
        out
    }

    pub fn p_field(&self, mesh: &DiskMesh) -> Field {
        let vals: Vec<f64> = mesh.vertices().iter().flat_map(|&x| self.p_hat(x)).collect();
        Field::from_values(Shape::Matrix(3), vals).expect("3x3 entries per vertex")
    }

    pub fn xi_field(&self, mesh: &DiskMesh) -> Field {
        let vals: Vec<f64> = mesh.vertices().iter().flat_map(|&x| self.xi_hat(x)).collect();
        Field::from_values(Shape::Matrix(3), vals).expect("3x3 entries per vertex")
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GaugeOptions {
    pub max_iter: usize,
    /// Stop once `(E_old - E_new) / E_old` falls below this.
    pub rel_tol: f64,
    pub exec: ExecMode,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecMode {
    #[default]
    Auto,
    Sequential,
}

impl From<ExecMode> for Exec {
    fn from(m: ExecMode) -> Exec {
        match m {
            ExecMode::Auto => Exec::Auto,
            ExecMode::Sequential => Exec::Sequential,
        }
    }
}

impl Default for GaugeOptions {
    fn default() -> Self {
        GaugeOptions { max_iter: 5000, rel_tol: 1e-10, exec: ExecMode::Auto }
    }
}

#[derive(Clone, Debug)]
pub struct GaugeFrame {
    pub n: usize,
    /// Rotation field, shape `Matrix(n)`, normalized to `P = I` at vertex 0.
    pub p: Field,
    /// Zero until [`recover_xi`] runs.
    pub xi: Field,
    pub energy: f64,
    pub initial_energy: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Whether every accepted iterate lowered the energy.
    pub monotone: bool,
    pub max_orthogonality_defect: f64,
    pub r_gauge: Option<f64>,
}

/// Gauge energy `Σ_T |T| Σ_d |R̄^T ∂_d R + R̄^T Ω_d R̄|^2` and optionally its
/// Euclidean gradient with respect to the vertex matrices.
fn gauge_energy(mesh: &DiskMesh, omega: &ConnectionForm, r: &[f64], grad: bool, exec: Exec) -> (f64, Vec<f64>) {
    let n = omega.n;
    let nn = n * n;
    let per_tri = map_indexed(exec, mesh.num_triangles(), |t| {
        let tri = mesh.triangles()[t];
        let g = mesh.hat_gradients(t);
        let a = mesh.area(t);
        let mut bar = mat::zeros(n);
        for &v in &tri {
            mat::add_scaled(&mut bar, 1.0 / 3.0, &r[v * nn..(v + 1) * nn]);
        }
        let mut e = 0.0;
        let mut contrib = if grad { vec![0.0; 3 * nn] } else { Vec::new() };
        for d in 0..2 {
            let mut gd = mat::zeros(n);
            for (k, &v) in tri.iter().enumerate() {
                mat::add_scaled(&mut gd, g[k][d], &r[v * nn..(v + 1) * nn]);
            }
            let om = omega.matrix(t, d);
            let om_bar = mat::mul(n, &om, &bar);
            let mut x = mat::tmul(n, &bar, &gd);
            mat::add_scaled(&mut x, 1.0, &mat::tmul(n, &bar, &om_bar));
            e += a * mat::frob_sq(&x);
            if grad {
                // d/dR̄ part, shared by the three vertices.
                let mut shared = mat::mult(n, &gd, &x);
                mat::add_scaled(&mut shared, 1.0, &mat::mult(n, &om_bar, &x));
                let omt = mat::transpose(n, &om);
                mat::add_scaled(&mut shared, 1.0, &mat::mul(n, &mat::mul(n, &omt, &bar), &x));
                let rx = mat::mul(n, &bar, &x);
                for k in 0..3 {
                    let c = &mut contrib[k * nn..(k + 1) * nn];
                    mat::add_scaled(c, 2.0 * a / 3.0, &shared);
                    mat::add_scaled(c, 2.0 * a * g[k][d], &rx);
                }
            }
        }
        (e, contrib)
    });
    let mut total = 0.0;
    let mut out = if grad { vec![0.0; r.len()] } else { Vec::new() };
    for (t, (e, c)) in per_tri.iter().enumerate() {
        total += e;
        if grad {
            for (k, &v) in mesh.triangles()[t].iter().enumerate() {
                mat::add_scaled(&mut out[v * nn..(v + 1) * nn], 1.0, &c[k * nn..(k + 1) * nn]);
            }
        }
    }
    (total, out)
}

/// Minimizes the gauge energy over vertexwise rotations by Riemannian
/// gradient descent. The gradient is preconditioned with `(K + M)^{-1}`
/// per skew component, steps are retracted by the polar factor, and the step
/// length comes from Armijo backtracking.
pub fn minimize_gauge(mesh: &DiskMesh, omega: &ConnectionForm, opts: &GaugeOptions) -> Result<GaugeFrame> {
    let n = omega.n;
    let nn = n * n;
    let nv = mesh.num_vertices();
    omega.values.check_triangles(mesh.num_triangles())?;
    let exec: Exec = opts.exec.into();
    let mut r: Vec<f64> = (0..nv).flat_map(|_| mat::identity(n)).collect();
    let (mut e, _) = if omega.is_zero() { (0.0, Vec::new()) } else { gauge_energy(mesh, omega, &r, false, exec) };
    let initial_energy = e;
    let mut frame = GaugeFrame {
        n,
        p: Field::from_values(Shape::Matrix(n), r.clone())?,
        xi: Field::zeros(Shape::Matrix(n), nv),
        energy: e,
        initial_energy,
        iterations: 0,
        converged: true,
        monotone: true,
        max_orthogonality_defect: 0.0,
        r_gauge: None,
    };
    if omega.is_zero() || e == 0.0 {
        return Ok(frame);
    }
    let precond = SpdSolver::new(mesh.stiffness().linear_combination(1.0, mesh.mass(), 1.0)?)?;
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let mut alpha = 1.0;
    frame.converged = false;
    for it in 1..=opts.max_iter {
        frame.iterations = it;
        let (_, g) = gauge_energy(mesh, omega, &r, true, exec);
        let mut s = vec![vec![0.0; nv]; pairs.len()];
        for v in 0..nv {
            let sk = mat::skew(n, &mat::tmul(n, &r[v * nn..(v + 1) * nn], &g[v * nn..(v + 1) * nn]));
            for (c, &(i, j)) in pairs.iter().enumerate() {
                s[c][v] = sk[i * n + j];
            }
        }
        let mut hat = Vec::with_capacity(pairs.len());
        let mut slope = 0.0;
        for sc in &s {
            // The Hessian along a skew component is close to 4K, and the
            // gradient in that coordinate is 2 S_c.
            let h: Vec<f64> = precond.solve(sc)?.into_iter().map(|x| 0.5 * x).collect();
            slope -= 2.0 * sc.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>();
            hat.push(h);
        }
        if !(slope < 0.0) {
            frame.converged = true;
            break;
        }
        let mut accepted = None;
        while alpha > 1e-14 {
            let rn: Vec<f64> = map_indexed(exec, nv, |v| {
                let mut step = mat::identity(n);
                for (c, &(i, j)) in pairs.iter().enumerate() {
                    step[i * n + j] -= alpha * hat[c][v];
                    step[j * n + i] += alpha * hat[c][v];
                }
                mat::polar(n, &mat::mul(n, &r[v * nn..(v + 1) * nn], &step))
            })
            .concat();
            let (en, _) = gauge_energy(mesh, omega, &rn, false, exec);
            if en <= e + 1e-4 * alpha * slope {
                accepted = Some((rn, en));
                break;
            }
            alpha *= 0.5;
        }
        let Some((rn, en)) = accepted else {
            frame.converged = true;
            break;
        };
        if en > e {
            frame.monotone = false;
        }
        let rel = (e - en) / e;
        r = rn;
        e = en;
        alpha = (2.0 * alpha).min(1.0);
        if rel < opts.rel_tol || e == 0.0 {
            frame.converged = true;
            break;
        }
    }
    let p0 = r[0..nn].to_vec();
    let mut defect: f64 = 0.0;
    for v in 0..nv {
        let q = mat::mult(n, &r[v * nn..(v + 1) * nn], &p0);
        defect = defect.max(mat::orthogonality_defect(n, &q));
        r[v * nn..(v + 1) * nn].copy_from_slice(&q);
    }
    frame.p = Field::from_values(Shape::Matrix(n), r)?;
    frame.energy = e;
    frame.max_orthogonality_defect = defect;
    Ok(frame)
}

/// `P̄^T ∂_d P + P̄^T Ω_d P̄` per triangle and direction.
fn gauge_form(mesh: &DiskMesh, p: &Field, omega: &ConnectionForm) -> Result<CellVectorField> {
    let n = omega.n;
    let gp = gradient(mesh, p)?;
    let mut out = CellVectorField::zeros(Shape::Matrix(n), mesh.num_triangles());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let mut bar = mat::zeros(n);
        for &v in tri {
            mat::add_scaled(&mut bar, 1.0 / 3.0, p.at(v));
        }
        let cell = out.at_mut(t);
        for d in 0..2 {
            let dp = gp.direction(t, d);
            let mut x = mat::tmul(n, &bar, &dp);
            mat::add_scaled(&mut x, 1.0, &mat::tmul(n, &bar, &mat::mul(n, &omega.matrix(t, d), &bar)));
            for e in 0..n * n {
                cell[e][d] = x[e];
            }
        }
    }
    Ok(out)
}

/// Solves `Δξ = curl(P^T ∇P + P^T Ω P)` with `ξ = 0` on the boundary, on
/// the skew part, and records `r_gauge = |∇^⊥ξ - (P^T∇P + P^TΩP)|_2`.
pub fn recover_xi(lap: &Laplace, frame: &mut GaugeFrame, omega: &ConnectionForm) -> Result<()> {
    let mesh = lap.mesh();
    let n = frame.n;
    let x = gauge_form(mesh, &frame.p, omega)?;
    let mut xi = Field::zeros(Shape::Matrix(n), mesh.num_vertices());
    for i in 0..n {
        for j in i + 1..n {
            let xc: Vec<[f64; 2]> = (0..mesh.num_triangles())
                .map(|t| {
                    let c = x.at(t);
                    [0.5 * (c[i * n + j][0] - c[j * n + i][0]), 0.5 * (c[i * n + j][1] - c[j * n + i][1])]
                })
                .collect();
            let sol = lap.solve_dirichlet(&curl_load(mesh, &xc), None)?;
            for (v, s) in sol.iter().enumerate() {
                xi.at_mut(v)[i * n + j] = *s;
                xi.at_mut(v)[j * n + i] = -*s;
            }
        }
    }
    let px = perp_gradient(mesh, &xi)?;
    let mut r2 = 0.0;
    for t in 0..mesh.num_triangles() {
        let a = px.at(t);
        let b = x.at(t);
        r2 += mesh.area(t) * a.iter().zip(b).map(|(p, q)| (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sum::<f64>();
    }
    frame.xi = xi;
    frame.r_gauge = Some(r2.sqrt());
    Ok(())
}

/// `sqrt(Σ_c f_c^T K f_c)`
pub fn grad_l2(mesh: &DiskMesh, f: &Field) -> f64 {
    f.components().iter().map(|c| mesh.stiffness().quadratic_form(c)).sum::<f64>().max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn energy_gradient_matches_finite_differences() {
        let mesh = DiskMesh::build(1).unwrap();
        let omega = SyntheticGauge { p_scale: 0.4, xi_scale: 0.3 }.omega(&mesh);
        let n = 3;
        let nv = mesh.num_vertices();
        let mut r: Vec<f64> = Vec::new();
        for v in 0..nv {
            let p = mesh.vertices()[v];
            r.extend(mat::expm(3, &[0.0, 0.2 * p[0], 0.1, -0.2 * p[0], 0.0, p[1], -0.1, -p[1], 0.0]));
        }
        let (_, g) = gauge_energy(&mesh, &omega, &r, true, Exec::Sequential);
        for idx in [0, 5, 13, 40, 9 * 7 + 2] {
            let h = 1e-6;
            let mut rp = r.clone();
            let mut rm = r.clone();
            rp[idx] += h;
            rm[idx] -= h;
            let fd = (gauge_energy(&mesh, &omega, &rp, false, Exec::Sequential).0
                - gauge_energy(&mesh, &omega, &rm, false, Exec::Sequential).0)
                / (2.0 * h);
            assert!((fd - g[idx]).abs() < 1e-6 * (1.0 + fd.abs()), "{idx}: {fd} vs {}", g[idx]);
        }
        let _ = n;
    }

    #[test]
    fn zero_form_gives_identity() {
        let mesh = DiskMesh::build(2).unwrap();
        let lap = Laplace::new(&mesh);
        let omega = ConnectionForm::zeros(3, mesh.num_triangles());
        let mut frame = minimize_gauge(&mesh, &omega, &GaugeOptions::default()).unwrap();
        assert_eq!(frame.energy, 0.0);
        assert!(frame.p.values().chunks(9).all(|c| c == mat::identity(3).as_slice()));
        recover_xi(&lap, &mut frame, &omega).unwrap();
        assert!(frame.r_gauge.unwrap() < 1e-12);
        assert!(frame.xi.values().iter().all(|&x| x.abs() < 1e-12));
    }

    #[test]
    fn synthetic_gauge_is_recovered() {
        let mesh = DiskMesh::build(3).unwrap();
        let lap = Laplace::new(&mesh);
        let syn = SyntheticGauge { p_scale: 0.3, xi_scale: 0.2 };
        let omega = syn.omega(&mesh);
        assert!(omega.antisymmetry_defect() < 1e-9);
        let mut frame = minimize_gauge(&mesh, &omega, &GaugeOptions::default()).unwrap();
        assert!(frame.monotone);
        assert!(frame.max_orthogonality_defect < 1e-10);
        recover_xi(&lap, &mut frame, &omega).unwrap();
        let h = mesh.h();
        let om = omega.l2(&mesh);
        let r = frame.r_gauge.unwrap();
        assert!(r <= 10.0 * h * om, "r_gauge {r} vs {}", 10.0 * h * om);
        let err = crate::mesh::norms(&mesh, &frame.xi.sub(&syn.xi_field(&mesh)).unwrap()).unwrap().l2;
        assert!(err <= 10.0 * h, "xi error {err}");
        let perr = crate::mesh::norms(&mesh, &frame.p.sub(&syn.p_field(&mesh)).unwrap()).unwrap().l2;
        assert!(perr <= 10.0 * h * om, "P error {perr}");
    }
}
