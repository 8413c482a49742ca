//! Time stepping for the harmonic map heat flow `u_t = Δu + A(u)(∇u, ∇u)`
//! with `u = χ` on the boundary, and the monitors computed along it.

mod io;
mod monitors;

pub use io::{read_snapshot, trajectory_csv, write_snapshot};
pub use monitors::{
    cauchy_certificate, convexity_against_limit, convexity_report, cross_term_check, decay_identity_residual,
    mean_value_check, sample_pairs, ut_monotonicity_check, CauchyCertificate, ConvexityPair, ConvexityReport,
    CrossTerm, MonotonicityReport,
};

use serde::{Deserialize, Serialize};

use crate::elliptic::Laplace;
use crate::error::{Error, Result};
use crate::linalg::{pcg, CsrMatrix, LinearOperator, Preconditioner, SpdSolver, PCG_TOL};
use crate::manifold::{TargetManifold, ON_MANIFOLD_TOL};
use crate::mesh::{gradient, DiskMesh, Field};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Energy {
    /// `½ ∫ |∇u|^2`
    pub e_half: f64,
    /// `∫ |∇u|^2`
    pub e_raw: f64,
}

/// Dirichlet energy of a P1 map, exact for the piecewise-constant density.
pub fn dirichlet_energy(mesh: &DiskMesh, u: &Field) -> Result<Energy> {
    u.check_vertices(mesh.num_vertices())?;
    let k = mesh.stiffness();
    let e_raw: f64 = u.components().iter().map(|c| k.quadratic_form(c)).sum::<f64>().max(0.0);
    Ok(Energy { e_half: 0.5 * e_raw, e_raw })
}

/// `Σ_c f_c^T M f_c`, the squared L2 norm of a vector field.
pub fn l2_sq(mesh: &DiskMesh, f: &Field) -> f64 {
    f.components().iter().map(|c| mesh.mass().quadratic_form(c)).sum::<f64>().max(0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Solve for a nodally tangent update `w` with
    /// `(M + τK) w = -τ K u` tested against tangent fields, then project
    /// `u + w`. Fixed points are exactly the discrete harmonic maps.
    TangentPlane,
    /// `(M + τK) v = M u + τ ∫ A(u)(∇u, ∇u) φ` with `v = χ` on the boundary,
    /// then project `v`.
    ProjectedLinearImplicit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimestepPolicy {
    /// `τ = factor · h^2`
    Parabolic {
        factor: f64,
    },
    /// `τ = factor · h`
    Linear {
        factor: f64,
    },
    Fixed {
        tau: f64,
    },
}

impl Default for TimestepPolicy {
    fn default() -> Self {
        TimestepPolicy::Parabolic { factor: 4.0 }
    }
}

impl TimestepPolicy {
    /// Step size for mesh size `h`, shrunk so that `1/τ` is an integer and
    /// unit times fall on the step grid.
    pub fn tau(self, h: f64) -> Result<f64> {
        let raw = match self {
            TimestepPolicy::Parabolic { factor } => factor * h * h,
            TimestepPolicy::Linear { factor } => factor * h,
            TimestepPolicy::Fixed { tau } => tau,
        };
        if !(raw.is_finite() && raw > 0.0) {
            return Err(Error::Config(format!("timestep must be positive, got {raw}")));
        }
        Ok(1.0 / (1.0 / raw).ceil())
    }
}

#[derive(Clone, Debug)]
pub struct FlowState {
    pub t: f64,
    pub u: Field,
    pub u_t: Field,
    pub tension: Field,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monitor {
    pub t: f64,
    pub e_raw: f64,
    pub ut_l2_sq: f64,
    pub tension_l2: f64,
}

/// Per-step record; every step is kept, snapshots only at intervals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub e_raw: f64,
    pub ut_l2_sq: f64,
}

#[derive(Clone, Debug)]
pub struct FlowTrajectory {
    pub snapshots: Vec<FlowState>,
    pub monitors: Vec<Monitor>,
    pub steps: Vec<StepRecord>,
    pub t0: Option<f64>,
    pub epsilon0: f64,
    pub tau_initial: f64,
    pub tau_final: f64,
    pub halvings: u32,
    /// Largest `E(t_{k+1}) - E(t_k)` over accepted steps (negative when the
    /// energy decreased on every step).
    pub max_energy_increase: f64,
}

impl FlowTrajectory {
    /// Index of the first snapshot at or after `t`.
    pub fn snapshot_index_at(&self, t: f64) -> Option<usize> {
        let eps = 1e-9 * self.tau_final.max(1e-12);
        self.snapshots.iter().position(|s| s.t >= t - eps)
    }

    pub fn final_state(&self) -> &FlowState {
        self.snapshots.last().expect("trajectory has an initial snapshot")
    }
}

#[derive(Clone, Debug)]
pub struct FlowOptions {
    pub scheme: Scheme,
    pub timestep: TimestepPolicy,
    pub t_end: f64,
    pub snapshot_interval: f64,
    pub epsilon0: f64,
    pub max_halvings: u32,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            scheme: Scheme::TangentPlane,
            timestep: TimestepPolicy::default(),
            t_end: 1.0,
            snapshot_interval: 0.05,
            epsilon0: 0.1,
            max_halvings: 12,
        }
    }
}

/// Orthonormal tangent frames at the interior vertices.
struct Frames {
    n: usize,
    d: usize,
    z: Vec<f64>,
}

impl Frames {
    fn new(target: &TargetManifold, u: &Field, interior: &[usize]) -> Result<Self> {
        let n = target.ambient_dim();
        let d = target.dim();
        let mut z = Vec::with_capacity(interior.len() * n * d);
        for &v in interior {
            for t in target.tangent_basis(u.at(v))? {
                z.extend(t);
            }
        }
        Ok(Frames { n, d, z })
    }

    fn len(&self) -> usize {
        self.z.len() / self.n
    }

    /// Tangent coordinates to per-component interior vectors.
    fn lift(&self, alpha: &[f64], out: &mut [Vec<f64>]) {
        let (n, d) = (self.n, self.d);
        for o in out.iter_mut() {
            o.iter_mut().for_each(|x| *x = 0.0);
        }
        for (k, a) in alpha.chunks(d).enumerate() {
            for (j, aj) in a.iter().enumerate() {
                let zv = &self.z[(k * d + j) * n..(k * d + j + 1) * n];
                for c in 0..n {
                    out[c][k] += aj * zv[c];
                }
            }
        }
    }

    fn restrict(&self, comps: &[Vec<f64>], alpha: &mut [f64]) {
        let (n, d) = (self.n, self.d);
        for (k, a) in alpha.chunks_mut(d).enumerate() {
            for (j, aj) in a.iter_mut().enumerate() {
                let zv = &self.z[(k * d + j) * n..(k * d + j + 1) * n];
                *aj = (0..n).map(|c| zv[c] * comps[c][k]).sum();
            }
        }
    }
}

/// Ambient input and output buffers, one vector per component.
type Buffers = (Vec<Vec<f64>>, Vec<Vec<f64>>);

/// `Z^T A Z` acting on tangent coordinates.
struct TangentOperator<'a> {
    frames: &'a Frames,
    a: &'a CsrMatrix,
    scratch: std::cell::RefCell<Buffers>,
}

impl<'a> TangentOperator<'a> {
    fn new(frames: &'a Frames, a: &'a CsrMatrix) -> Self {
        let m = a.n();
        let s = (vec![vec![0.0; m]; frames.n], vec![vec![0.0; m]; frames.n]);
        TangentOperator { frames, a, scratch: std::cell::RefCell::new(s) }
    }
}

impl LinearOperator for TangentOperator<'_> {
    fn dim(&self) -> usize {
        self.frames.len()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut s = self.scratch.borrow_mut();
        let (lifted, applied) = &mut *s;
        self.frames.lift(x, lifted);
        for (l, a) in lifted.iter().zip(applied.iter_mut()) {
            self.a.mul_vec_into(l, a);
        }
        self.frames.restrict(applied, y);
    }
}

/// `Z^T C^{-1} Z` for a factored `C`.
struct TangentPreconditioner<'a> {
    frames: &'a Frames,
    solver: &'a SpdSolver,
    diag: Vec<f64>,
    scratch: std::cell::RefCell<Vec<Vec<f64>>>,
}

impl Preconditioner for TangentPreconditioner<'_> {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let mut lifted = self.scratch.borrow_mut();
        self.frames.lift(r, &mut lifted);
        for l in lifted.iter_mut() {
            match self.solver {
                SpdSolver::Direct(c) => c.solve_in_place(l),
                SpdSolver::Iterative { .. } => l.iter_mut().zip(&self.diag).for_each(|(x, d)| *x /= d),
            }
        }
        self.frames.restrict(&lifted, z);
    }
}

/// Solves `Z^T A Z α = b` by CG preconditioned with `Z^T A^{-1} Z`.
fn solve_tangent(frames: &Frames, a: &CsrMatrix, solver: &SpdSolver, b: &[f64], abs_tol: f64) -> Result<Vec<f64>> {
    let op = TangentOperator::new(frames, a);
    let pre = TangentPreconditioner {
        frames,
        solver,
        diag: a.diagonal(),
        scratch: std::cell::RefCell::new(vec![vec![0.0; a.n()]; frames.n]),
    };
    let mut x = vec![0.0; b.len()];
    let st = pcg(&op, &pre, b, &mut x, PCG_TOL, abs_tol, 2000);
    if !st.converged {
        return Err(Error::Solver(format!(
            "tangent CG stalled at relative residual {:.3e} after {} iterations",
            st.relative_residual, st.iterations
        )));
    }
    Ok(x)
}

fn check_on_target(target: &TargetManifold, u: &Field) -> Result<()> {
    if u.width() != target.ambient_dim() {
        return Err(Error::Usage(format!(
            "map has {} components, target lives in R^{}",
            u.width(),
            target.ambient_dim()
        )));
    }
    for v in 0..u.num_vertices() {
        let d = target.distance(u.at(v)).map_err(|e| Error::Usage(format!("vertex {v}: {e}")))?;
        if d > ON_MANIFOLD_TOL {
            return Err(Error::Usage(format!("vertex {v} is {d:.3e} away from the target")));
        }
    }
    Ok(())
}

/// Discrete tension field: minus the L2-gradient of `½E` restricted to
/// nodally tangent fields vanishing on the boundary,
/// `τ = -Z (Z^T M Z)^{-1} Z^T K u`.
pub fn tension(mesh: &DiskMesh, target: &TargetManifold, u: &Field) -> Result<Field> {
    u.check_vertices(mesh.num_vertices())?;
    check_on_target(target, u)?;
    let map = mesh.interior_map();
    let m_ii = mesh.mass().principal_submatrix(&map);
    let solver = SpdSolver::new(m_ii.clone())?;
    tension_with(mesh, target, u, &map, &m_ii, &solver)
}

fn tension_with(
    mesh: &DiskMesh,
    target: &TargetManifold,
    u: &Field,
    map: &[Option<usize>],
    m_ii: &CsrMatrix,
    m_solver: &SpdSolver,
) -> Result<Field> {
    let interior: Vec<usize> = (0..map.len()).filter(|&v| map[v].is_some()).collect();
    let frames = Frames::new(target, u, &interior)?;
    let k = mesh.stiffness();
    let ku: Vec<Vec<f64>> = u
        .components()
        .iter()
        .map(|c| {
            let full = k.mul_vec(c);
            interior.iter().map(|&v| -full[v]).collect()
        })
        .collect();
    let mut b = vec![0.0; frames.len()];
    frames.restrict(&ku, &mut b);
    let scale: f64 = ku.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    let beta = solve_tangent(&frames, m_ii, m_solver, &b, 1e-15 * scale)?;
    let mut comps = vec![vec![0.0; interior.len()]; frames.n];
    frames.lift(&beta, &mut comps);
    let mut out = Field::zeros(u.shape(), mesh.num_vertices());
    for (k, &v) in interior.iter().enumerate() {
        for c in 0..frames.n {
            out.at_mut(v)[c] = comps[c][k];
        }
    }
    Ok(out)
}

/// Nodal projection of the discrete harmonic extension of the boundary
/// values of `chi` (interior entries of `chi` are ignored).
pub fn harmonic_initial_map(lap: &Laplace, target: &TargetManifold, chi: &Field) -> Result<Field> {
    let mesh = lap.mesh();
    chi.check_vertices(mesh.num_vertices())?;
    let zero = vec![0.0; mesh.num_vertices()];
    let comps: Vec<Vec<f64>> =
        chi.components().iter().map(|g| lap.solve_dirichlet(&zero, Some(g))).collect::<Result<_>>()?;
    let mut u = Field::from_components(chi.shape(), &comps)?;
    project_interior(mesh, target, &mut u)?;
    Ok(u)
}

/// Projects interior vertex values onto the target in place.
pub fn project_interior(mesh: &DiskMesh, target: &TargetManifold, u: &mut Field) -> Result<()> {
    for v in 0..mesh.num_vertices() {
        if !mesh.is_boundary(v) {
            let q = target.project(u.at(v))?;
            u.at_mut(v).copy_from_slice(&q);
        }
    }
    Ok(())
}

struct StepSystem {
    tau: f64,
    /// `(M + τK)` on all vertices.
    full: CsrMatrix,
    /// Interior block.
    interior: CsrMatrix,
    solver: SpdSolver,
}

/// Advances the flow for a fixed mesh, target and boundary trace.
pub struct FlowSolver<'m> {
    mesh: &'m DiskMesh,
    target: TargetManifold,
    chi: Field,
    scheme: Scheme,
    map: Vec<Option<usize>>,
    interior: Vec<usize>,
    m_ii: CsrMatrix,
    m_solver: Option<SpdSolver>,
    system: Option<StepSystem>,
}

impl<'m> FlowSolver<'m> {
    /// `chi` provides the boundary trace; its interior values are unused.
    pub fn new(mesh: &'m DiskMesh, target: TargetManifold, chi: Field, scheme: Scheme) -> Result<Self> {
        chi.check_vertices(mesh.num_vertices())?;
        if chi.width() != target.ambient_dim() {
            return Err(Error::Usage("boundary data does not match the target dimension".into()));
        }
        for v in mesh.boundary_vertices() {
            let d = target.distance(chi.at(v))?;
            if d > ON_MANIFOLD_TOL {
                return Err(Error::Usage(format!("boundary value at vertex {v} is off the target by {d:.3e}")));
            }
        }
        let map = mesh.interior_map();
        let interior = mesh.interior_vertices();
        let m_ii = mesh.mass().principal_submatrix(&map);
        Ok(FlowSolver { mesh, target, chi, scheme, map, interior, m_ii, m_solver: None, system: None })
    }

    pub fn target(&self) -> &TargetManifold {
        &self.target
    }

    fn system(&mut self, tau: f64) -> Result<&StepSystem> {
        if self.system.as_ref().is_none_or(|s| s.tau != tau) {
            let full = self.mesh.mass().linear_combination(1.0, self.mesh.stiffness(), tau)?;
            let interior = full.principal_submatrix(&self.map);
            let solver = SpdSolver::new(interior.clone())?;
            self.system = Some(StepSystem { tau, full, interior, solver });
        }
        Ok(self.system.as_ref().unwrap())
    }

    /// Tension of `u`, reusing the cached mass factorization.
    pub fn tension(&mut self, u: &Field) -> Result<Field> {
        if self.m_solver.is_none() {
            self.m_solver = Some(SpdSolver::new(self.m_ii.clone())?);
        }
        tension_with(self.mesh, &self.target, u, &self.map, &self.m_ii, self.m_solver.as_ref().unwrap())
    }

    /// One step of size `tau` from `u`; returns the new map.
    pub fn step(&mut self, u: &Field, tau: f64) -> Result<Field> {
        if !(tau > 0.0) {
            return Err(Error::Usage(format!("step size must be positive, got {tau}")));
        }
        u.check_vertices(self.mesh.num_vertices())?;
        let reach = self.target.reach();
        let mut v = match self.scheme {
            Scheme::TangentPlane => self.tangent_update(u, tau)?,
            Scheme::ProjectedLinearImplicit => self.linear_implicit_update(u, tau)?,
        };
        for &i in &self.interior {
            let d: f64 = v.at(i).iter().zip(u.at(i)).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if d > 0.5 * reach || !d.is_finite() {
                return Err(Error::StepSize(format!(
                    "update of size {d:.3e} at vertex {i} leaves half the reach; use a smaller step"
                )));
            }
            let q = self
                .target
                .project(v.at(i))
                .map_err(|e| Error::StepSize(format!("projection failed at vertex {i}: {e}")))?;
            v.at_mut(i).copy_from_slice(&q);
        }
        for b in self.mesh.boundary_vertices() {
            v.at_mut(b).copy_from_slice(self.chi.at(b));
        }
        Ok(v)
    }

    fn tangent_update(&mut self, u: &Field, tau: f64) -> Result<Field> {
        let frames = Frames::new(&self.target, u, &self.interior)?;
        let k = self.mesh.stiffness();
        let interior = self.interior.clone();
        let rhs: Vec<Vec<f64>> = u
            .components()
            .iter()
            .map(|c| {
                let full = k.mul_vec(c);
                interior.iter().map(|&v| -tau * full[v]).collect()
            })
            .collect();
        let scale: f64 = rhs.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
        let mut b = vec![0.0; frames.len()];
        frames.restrict(&rhs, &mut b);
        let sys = self.system(tau)?;
        let alpha = solve_tangent(&frames, &sys.interior, &sys.solver, &b, 1e-15 * scale)?;
        let mut w = vec![vec![0.0; interior.len()]; frames.n];
        frames.lift(&alpha, &mut w);
        let mut out = u.clone();
        for (j, &v) in interior.iter().enumerate() {
            for c in 0..frames.n {
                out.at_mut(v)[c] += w[c][j];
            }
        }
        Ok(out)
    }

    fn linear_implicit_update(&mut self, u: &Field, tau: f64) -> Result<Field> {
        let mesh = self.mesh;
        let n = u.width();
        let grads = gradient(mesh, u)?;
        let mut forcing = vec![vec![0.0; mesh.num_vertices()]; n];
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let mut bar = vec![0.0; n];
            for &v in tri {
                bar.iter_mut().zip(u.at(v)).for_each(|(b, x)| *b += x / 3.0);
            }
            let q = self.target.project(&bar)?;
            let g = grads.at(t);
            let mut a = vec![0.0; n];
            for d in 0..2 {
                let x: Vec<f64> = g.iter().map(|v| v[d]).collect();
                let xt = self.target.tangent_project(&q, &x)?;
                for (alpha, nu) in self.target.normal_frame(&q)?.iter().enumerate() {
                    let dn = self.target.normal_derivative(&q, alpha, &xt)?;
                    let s: f64 = dn.iter().zip(&xt).map(|(p, r)| p * r).sum();
                    a.iter_mut().zip(nu).for_each(|(ai, ni)| *ai += s * ni);
                }
            }
            let w = mesh.area(t) / 3.0;
            for &v in tri {
                for c in 0..n {
                    forcing[c][v] += w * a[c];
                }
            }
        }
        let chi = self.chi.clone();
        let map = self.map.clone();
        let interior = self.interior.clone();
        let sys = self.system(tau)?;
        let mut comps = Vec::with_capacity(n);
        for c in 0..n {
            let uc = u.component(c);
            let mu = mesh.mass().mul_vec(&uc);
            let g = chi.component(c);
            let mut rhs: Vec<f64> = Vec::with_capacity(interior.len());
            for &v in &interior {
                let mut r = mu[v] + tau * forcing[c][v];
                let (cols, vals) = sys.full.row(v);
                for (&j, &a) in cols.iter().zip(vals) {
                    if map[j].is_none() {
                        r -= a * g[j];
                    }
                }
                rhs.push(r);
            }
            let x = sys.solver.solve(&rhs)?;
            let mut full = g.clone();
            for (k, &v) in interior.iter().enumerate() {
                full[v] = x[k];
            }
            comps.push(full);
        }
        Field::from_components(u.shape(), &comps)
    }

    /// Runs from `u0` to `opts.t_end`, halving the step when the update
    /// leaves the reach or the energy grows by more than `1e-10 E(u0)`.
    pub fn run(&mut self, u0: Field, opts: &FlowOptions) -> Result<FlowTrajectory> {
        let mesh = self.mesh;
        if !(opts.t_end > 0.0) || !(opts.snapshot_interval > 0.0) || !(opts.epsilon0 > 0.0) {
            return Err(Error::Config("t_end, snapshot interval and epsilon0 must be positive".into()));
        }
        check_on_target(&self.target, &u0)?;
        for b in mesh.boundary_vertices() {
            if u0.at(b) != self.chi.at(b) {
                return Err(Error::Usage(format!("initial map differs from the boundary data at vertex {b}")));
            }
        }
        let mut tau = opts.timestep.tau(mesh.h())?;
        let tau_initial = tau;
        let e0 = dirichlet_energy(mesh, &u0)?.e_raw;
        let tol = 1e-10 * e0;
        let tension0 = self.tension(&u0)?;
        let mut u = u0;
        let mut e = e0;
        let mut t = 0.0f64;
        let mut steps_taken: u64 = 0;
        let ut0 = l2_sq(mesh, &tension0);
        let tl0 = ut0.sqrt();
        let mut traj = FlowTrajectory {
            snapshots: vec![FlowState { t, u: u.clone(), u_t: tension0.clone(), tension: tension0 }],
            monitors: vec![Monitor { t, e_raw: e, ut_l2_sq: ut0, tension_l2: tl0 }],
            steps: vec![StepRecord { t, e_raw: e, ut_l2_sq: ut0 }],
            t0: (ut0 < opts.epsilon0).then_some(0.0),
            epsilon0: opts.epsilon0,
            tau_initial,
            tau_final: tau,
            halvings: 0,
            max_energy_increase: f64::NEG_INFINITY,
        };
        let mut next_snapshot = opts.snapshot_interval;
        let mut t_base = 0.0;
        while t < opts.t_end - 1e-9 * tau {
            let attempt = self.step(&u, tau).and_then(|v| {
                let ev = dirichlet_energy(mesh, &v)?.e_raw;
                if ev > e + tol {
                    Err(Error::StepSize(format!("energy grew by {:.3e}", ev - e)))
                } else {
                    Ok((v, ev))
                }
            });
            let (v, ev) = match attempt {
                Ok(x) => x,
                Err(Error::StepSize(msg)) => {
                    if traj.halvings >= opts.max_halvings {
                        return Err(Error::StepSize(format!(
                            "{msg} (after {} halvings, tau = {tau:.3e})",
                            traj.halvings
                        )));
                    }
                    traj.halvings += 1;
                    t_base = t;
                    steps_taken = 0;
                    tau *= 0.5;
                    continue;
                }
                Err(err) => return Err(err),
            };
            let mut ut = v.sub(&u)?;
            ut.values_mut().iter_mut().for_each(|x| *x /= tau);
            steps_taken += 1;
            t = t_base + steps_taken as f64 * tau;
            traj.max_energy_increase = traj.max_energy_increase.max(ev - e);
            let ut_sq = l2_sq(mesh, &ut);
            traj.steps.push(StepRecord { t, e_raw: ev, ut_l2_sq: ut_sq });
            if traj.t0.is_none() && ut_sq < opts.epsilon0 {
                traj.t0 = Some(t);
            }
            u = v;
            e = ev;
            let last = t >= opts.t_end - 1e-9 * tau;
            if t >= next_snapshot - 1e-9 * tau || last {
                while next_snapshot <= t + 1e-9 * tau {
                    next_snapshot += opts.snapshot_interval;
                }
                let tens = self.tension(&u)?;
                let tl = l2_sq(mesh, &tens).sqrt();
                traj.monitors.push(Monitor { t, e_raw: e, ut_l2_sq: ut_sq, tension_l2: tl });
                traj.snapshots.push(FlowState { t, u: u.clone(), u_t: ut, tension: tens });
            }
        }
        traj.tau_final = tau;
        Ok(traj)
    }
}
