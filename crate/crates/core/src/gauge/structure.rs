//! The Jacobian structure of `ΔP` and the oscillation estimate built on it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::conservation::cell_mean;
use super::{mat, ConservationFrame, GaugeFrame};
use crate::elliptic::{cell_load, div_load, hodge_decompose, HodgeDecomposition, Laplace};
use crate::error::{Error, Result};
use crate::manifold::TargetManifold;
use crate::mesh::{gradient, perp_gradient, CellVectorField, DiskMesh, Field, PointLocator, Shape};

#[derive(Clone, Debug)]
pub struct PStructure {
    pub n: usize,
    /// `q[k]` is the matrix field `Q_k`.
    pub q: Vec<Field>,
    pub r: Vec<Field>,
    /// Hodge split `A∇u + B∇^⊥u = ∇ζ + ∇^⊥η`, shapes `Vector(n)`.
    pub eta: Field,
    pub zeta: Field,
    pub hodge_residual: f64,
    /// Dual norm of the weak `ΔP` identity.
    pub residual: f64,
    /// `Σ_k (|∇Q_k|_2 + |∇R_k|_2)`
    pub qr_gradient_sum: f64,
    /// Right-hand side of the `ΔP` identity, tested against hat functions.
    load: Vec<Vec<f64>>,
}

fn grad_l2(mesh: &DiskMesh, f: &Field) -> f64 {
    super::grad_l2(mesh, f)
}

/// Builds `(Q_k)^i_j = -C^i_{z,l} P^z_j (A^{-1})^l_k` and `R_k` with `A^{-1}B`
/// in place of `A^{-1}`, splits `A∇u + B∇^⊥u`, and checks
/// `ΔP = ∇P·∇^⊥ξ + div(Q_k∇ζ^k) + ∇Q_k·∇^⊥η^k + ∇R_k·∇^⊥u^k` weakly.
pub fn p_structure(
    lap: &Laplace,
    frame: &ConservationFrame,
    gauge: &GaugeFrame,
    target: &TargetManifold,
    u: &Field,
) -> Result<PStructure> {
    let mesh = lap.mesh();
    let n = frame.n;
    let nn = n * n;
    let nv = mesh.num_vertices();
    u.check_vertices(nv)?;
    if u.width() != n || gauge.n != n {
        return Err(Error::Usage("map, gauge and frame sizes differ".into()));
    }
    let mut q = vec![Field::zeros(Shape::Matrix(n), nv); n];
    let mut r = vec![Field::zeros(Shape::Matrix(n), nv); n];
    for v in 0..nv {
        let a = frame.a.at(v);
        let ainv = mat::inverse(n, a)
            .filter(|_| mat::min_singular_value(n, a) > 1e-12)
            .ok_or_else(|| Error::Usage(format!("A is singular at vertex {v}")))?;
        let aib = mat::mul(n, &ainv, frame.b.at(v));
        let c = target.omega_coefficients(u.at(v))?;
        let p = gauge.p.at(v);
        // cp[(i*n + j)*n + l] = C^i_{z,l} P^z_j
        let mut cp = vec![0.0; nn * n];
        for i in 0..n {
            for z in 0..n {
                for l in 0..n {
                    let cz = c[(i * n + z) * n + l];
                    if cz == 0.0 {
                        continue;
                    }
                    for j in 0..n {
                        cp[(i * n + j) * n + l] += cz * p[z * n + j];
                    }
                }
            }
        }
        for k in 0..n {
            let qk = q[k].at_mut(v);
            for e in 0..nn {
                qk[e] = -(0..n).map(|l| cp[e * n + l] * ainv[l * n + k]).sum::<f64>();
            }
            let rk = r[k].at_mut(v);
            for e in 0..nn {
                rk[e] = (0..n).map(|l| cp[e * n + l] * aib[l * n + k]).sum::<f64>();
            }
        }
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
    let HodgeDecomposition { eta, zeta, residual: hodge_residual, .. } = hodge_decompose(lap, &flux)?;

    let gp = gradient(mesh, &gauge.p)?;
    let px = perp_gradient(mesh, &gauge.xi)?;
    let peta = perp_gradient(mesh, &eta)?;
    let gzeta = gradient(mesh, &zeta)?;
    let gq: Vec<CellVectorField> = q.iter().map(|f| gradient(mesh, f)).collect::<Result<_>>()?;
    let gr: Vec<CellVectorField> = r.iter().map(|f| gradient(mesh, f)).collect::<Result<_>>()?;
    let nt = mesh.num_triangles();
    let dot = |a: [f64; 2], b: [f64; 2]| a[0] * b[0] + a[1] * b[1];
    // jac[e][t]: the three Jacobian terms; flux_q[e][t]: Q̄_k ∇ζ^k
    let mut jac = vec![vec![0.0; nt]; nn];
    let mut qz = vec![vec![[0.0; 2]; nt]; nn];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let qbar: Vec<Vec<f64>> = q.iter().map(|f| cell_mean(f, tri)).collect();
        for i in 0..n {
            for j in 0..n {
                let e = i * n + j;
                let mut s = 0.0;
                for m in 0..n {
                    s += dot(gp.at(t)[i * n + m], px.at(t)[m * n + j]);
                }
                for k in 0..n {
                    s += dot(gq[k].at(t)[e], peta.at(t)[k]);
                    s += dot(gr[k].at(t)[e], pu.at(t)[k]);
                    let gz = gzeta.at(t)[k];
                    qz[e][t][0] += qbar[k][e] * gz[0];
                    qz[e][t][1] += qbar[k][e] * gz[1];
                }
                jac[e][t] = s;
            }
        }
    }
    let mut total = 0.0;
    let mut load = Vec::with_capacity(nn);
    for e in 0..nn {
        // ∫∇P̃·∇φ = -∫Jφ + ∫Q̄∇ζ·∇φ for the right-hand side part of ΔP.
        let jl = cell_load(mesh, &jac[e]);
        let ql = div_load(mesh, &qz[e]);
        let l: Vec<f64> = jl.iter().zip(&ql).map(|(a, b)| -a + b).collect();
        let kp = mesh.stiffness().mul_vec(&gauge.p.component(e));
        let res: Vec<f64> = kp.iter().zip(&l).map(|(a, b)| a - b).collect();
        let d = lap.dual_norm(&res)?;
        total += d * d;
        load.push(l);
    }
    let qr_gradient_sum = q.iter().chain(&r).map(|f| grad_l2(mesh, f)).sum();
    Ok(PStructure { n, q, r, eta, zeta, hodge_residual, residual: total.sqrt(), qr_gradient_sum, load })
}

/// An oscillation probe: centre `x`, radius `r`, and a point `y` in `B_r(x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub x: [f64; 2],
    pub r: f64,
    pub y: [f64; 2],
}

impl Probe {
    pub fn is_admissible(&self) -> bool {
        let nx = self.x[0].hypot(self.x[1]);
        let dy = (self.y[0] - self.x[0]).hypot(self.y[1] - self.x[1]);
        self.r > 0.0 && nx + 2.0 * self.r <= 1.0 && dy <= self.r
    }
}

/// Random admissible probes with `|x| ≤ 1/2`.
pub fn default_probes(count: usize, seed: u64) -> Vec<Probe> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let rho = 0.5 * rng.gen::<f64>().sqrt();
            let th = rng.gen::<f64>() * std::f64::consts::TAU;
            let x = [rho * th.cos(), rho * th.sin()];
            let r = (1.0 - rho) / 2.0 * rng.gen_range(0.2..1.0);
            let s = r * rng.gen::<f64>().sqrt();
            let ph = rng.gen::<f64>() * std::f64::consts::TAU;
            Probe { x, r, y: [x[0] + s * ph.cos(), x[1] + s * ph.sin()] }
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OscillationReport {
    pub probes: usize,
    pub skipped: usize,
    /// `max |P(y) - P(x)|` over admissible probes (Frobenius norm).
    pub max_oscillation: f64,
    /// Largest `2|P̃|_∞ + |∇V|_{L²(B_2r(x))}/√π`.
    pub max_bound: f64,
    /// Probes where the oscillation exceeds the split bound.
    pub bound_violations: usize,
    /// `max_oscillation / (√ε₀ + |u_t|_2)`
    pub measured_c: f64,
    pub p_tilde_sup: f64,
}

fn eval(mesh: &DiskMesh, loc: &PointLocator, f: &Field, p: [f64; 2]) -> Vec<f64> {
    let (t, b) = loc.locate(mesh, p).or_else(|| loc.locate_nearest(mesh, p)).expect("mesh has triangles");
    let tri = mesh.triangles()[t];
    let mut out = vec![0.0; f.width()];
    for k in 0..3 {
        for (o, x) in out.iter_mut().zip(f.at(tri[k])) {
            *o += b[k] * x;
        }
    }
    out
}

fn frob_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Splits `P = P̃ + V` with `P̃` the zero-trace solution of the `ΔP` identity
/// and `V` discretely harmonic, and measures `|P(y) - P(x)|` on the probes.
pub fn p_oscillation(
    lap: &Laplace,
    gauge: &GaugeFrame,
    structure: &PStructure,
    ut_norm: f64,
    epsilon0: f64,
    probes: &[Probe],
) -> Result<OscillationReport> {
    let mesh = lap.mesh();
    let n = gauge.n;
    let nv = mesh.num_vertices();
    let mut pt = Field::zeros(Shape::Matrix(n), nv);
    for (e, l) in structure.load.iter().enumerate() {
        pt.set_component(e, &lap.solve_dirichlet(l, None)?);
    }
    let v = gauge.p.sub(&pt)?;
    let gv = gradient(mesh, &v)?;
    let p_tilde_sup = crate::mesh::norms(mesh, &pt)?.linf;
    let loc = PointLocator::new(mesh);
    let mut rep = OscillationReport {
        probes: 0,
        skipped: 0,
        max_oscillation: 0.0,
        max_bound: 0.0,
        bound_violations: 0,
        measured_c: 0.0,
        p_tilde_sup,
    };
    for pr in probes {
        if !pr.is_admissible() {
            rep.skipped += 1;
            continue;
        }
        rep.probes += 1;
        let osc = frob_dist(&eval(mesh, &loc, &gauge.p, pr.y), &eval(mesh, &loc, &gauge.p, pr.x));
        let mut gsq = 0.0;
        for t in 0..mesh.num_triangles() {
            let c = mesh.centroid(t);
            if (c[0] - pr.x[0]).hypot(c[1] - pr.x[1]) <= 2.0 * pr.r {
                gsq += mesh.area(t) * gv.at(t).iter().map(|g| g[0] * g[0] + g[1] * g[1]).sum::<f64>();
            }
        }
        let bound = 2.0 * p_tilde_sup + (gsq / std::f64::consts::PI).sqrt();
        if osc > bound * (1.0 + 1e-9) + 1e-12 {
            rep.bound_violations += 1;
        }
        rep.max_oscillation = rep.max_oscillation.max(osc);
        rep.max_bound = rep.max_bound.max(bound);
    }
    let denom = epsilon0.max(0.0).sqrt() + ut_norm;
    rep.measured_c = if denom > 0.0 { rep.max_oscillation / denom } else { 0.0 };
    Ok(rep)
}
