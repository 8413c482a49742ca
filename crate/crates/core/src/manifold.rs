//! Closed target submanifolds `N ⊂ R^n` and their extrinsic geometry.
//!
//! Three targets have closed forms. Anything else can be supplied as a level
//! set `Φ^{-1}(0)` with a full-rank Jacobian; the nearest-point projection is
//! then computed by Newton's method on the Lagrange system.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Points farther than this from `N` are rejected where a point on `N` is
/// required.
pub const ON_MANIFOLD_TOL: f64 = 1e-8;

/// Tolerance for the Newton projection onto a level set.
pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 50;

/// Defining function `Φ: R^n -> R^k` of a level-set target.
pub trait LevelFunction: Send + Sync {
    fn ambient_dim(&self) -> usize;
    fn codim(&self) -> usize;
    fn value(&self, p: &[f64]) -> Vec<f64>;
    /// `k` rows, each of length `n`.
    fn jacobian(&self, p: &[f64]) -> Vec<Vec<f64>>;
}

/// A level-set target together with the data the closed forms know for free.
#[derive(Clone)]
pub struct LevelSet {
    pub func: Arc<dyn LevelFunction>,
    /// A lower bound for the reach, supplied by the caller.
    pub reach: f64,
    /// Some point on (or near) `N`, used for sampling and default boundary data.
    pub base_point: Vec<f64>,
}

impl fmt::Debug for LevelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LevelSet")
            .field("ambient_dim", &self.func.ambient_dim())
            .field("codim", &self.func.codim())
            .field("reach", &self.reach)
            .finish()
    }
}

#[derive(Clone, Debug)]
pub enum TargetManifold {
    /// Unit sphere `S^{n-1} ⊂ R^n`.
    Sphere {
        n: usize,
    },
    /// Torus of revolution about the z-axis in `R^3`.
    Torus3 {
        major: f64,
        minor: f64,
    },
    /// `S^1(1/√2) × S^1(1/√2) ⊂ R^4`.
    Clifford,
    LevelSet(LevelSet),
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn gram_schmidt(rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(rows.len());
    for r in rows {
        let mut v = r.clone();
        for _ in 0..2 {
            for e in &out {
                let c = dot(&v, e);
                v.iter_mut().zip(e).for_each(|(x, y)| *x -= c * y);
            }
        }
        let n = norm(&v);
        if n < 1e-12 * norm(r).max(1e-300) || n == 0.0 {
            return Err(Error::Solver("level-set Jacobian is rank deficient".into()));
        }
        out.push(v.into_iter().map(|x| x / n).collect());
    }
    Ok(out)
}

impl TargetManifold {
    pub fn sphere(n: usize) -> Result<Self> {
        let m = TargetManifold::Sphere { n };
        m.validate()?;
        Ok(m)
    }

    pub fn torus(major: f64, minor: f64) -> Result<Self> {
        let m = TargetManifold::Torus3 { major, minor };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TargetManifold::Sphere { n } if *n < 2 => {
                Err(Error::Config(format!("sphere needs ambient dimension >= 2, got {n}")))
            }
            TargetManifold::Torus3 { major, minor }
                if !(minor.is_finite() && major.is_finite() && *minor > 0.0 && major > minor) =>
            {
                Err(Error::Config(format!("torus needs R > r > 0, got R={major}, r={minor}")))
            }
            TargetManifold::LevelSet(l) => {
                if l.func.codim() == 0 || l.func.codim() >= l.func.ambient_dim() {
                    return Err(Error::Config("level set codimension must be in 1..n".into()));
                }
                if !(l.reach > 0.0) || l.base_point.len() != l.func.ambient_dim() {
                    return Err(Error::Config("level set needs a positive reach and a base point".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            TargetManifold::Sphere { n } => *n,
            TargetManifold::Torus3 { .. } => 3,
            TargetManifold::Clifford => 4,
            TargetManifold::LevelSet(l) => l.func.ambient_dim(),
        }
    }

    pub fn codim(&self) -> usize {
        match self {
            TargetManifold::Sphere { .. } | TargetManifold::Torus3 { .. } => 1,
            TargetManifold::Clifford => 2,
            TargetManifold::LevelSet(l) => l.func.codim(),
        }
    }

    pub fn dim(&self) -> usize {
        self.ambient_dim() - self.codim()
    }

    /// Radius of the tubular neighborhood on which the nearest-point
    /// projection is smooth.
    pub fn reach(&self) -> f64 {
        match self {
            TargetManifold::Sphere { .. } => 1.0,
            TargetManifold::Torus3 { major, minor } => minor.min(major - minor),
            TargetManifold::Clifford => FRAC_1_SQRT_2,
            TargetManifold::LevelSet(l) => l.reach,
        }
    }

    pub fn name(&self) -> String {
        match self {
            TargetManifold::Sphere { n } => format!("S^{}", n - 1),
            TargetManifold::Torus3 { major, minor } => format!("T^2(R={major}, r={minor})"),
            TargetManifold::Clifford => "Clifford torus".into(),
            TargetManifold::LevelSet(l) => {
                format!("level set in R^{} of codimension {}", l.func.ambient_dim(), l.func.codim())
            }
        }
    }

    /// A fixed point on `N`.
    pub fn base_point(&self) -> Vec<f64> {
        match self {
            TargetManifold::Sphere { n } => {
                let mut p = vec![0.0; *n];
                p[n - 1] = 1.0;
                p
            }
            TargetManifold::Torus3 { major, minor } => vec![major + minor, 0.0, 0.0],
            TargetManifold::Clifford => vec![FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2, 0.0],
            TargetManifold::LevelSet(l) => self.project(&l.base_point).unwrap_or_else(|_| l.base_point.clone()),
        }
    }

    fn check_dim(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.ambient_dim() {
            return Err(Error::Usage(format!(
                "point has {} coordinates, target lives in R^{}",
                p.len(),
                self.ambient_dim()
            )));
        }
        Ok(())
    }

    /// Nearest-point projection onto `N`.
    pub fn project(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(p)?;
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::Usage("point has non-finite coordinates".into()));
        }
        let tiny = 1e-12 * self.reach();
        match self {
            TargetManifold::Sphere { .. } => {
                let r = norm(p);
                if r <= tiny {
                    return Err(Error::MedialAxis(format!("{p:?} is the center of the sphere")));
                }
                Ok(p.iter().map(|x| x / r).collect())
            }
            TargetManifold::Torus3 { major, minor } => {
                let rho = p[0].hypot(p[1]);
                if rho <= tiny {
                    return Err(Error::MedialAxis(format!("{p:?} lies on the axis of the torus")));
                }
                let c = [major * p[0] / rho, major * p[1] / rho, 0.0];
                let d = [p[0] - c[0], p[1] - c[1], p[2]];
                let dn = norm(&d);
                if dn <= tiny {
                    return Err(Error::MedialAxis(format!("{p:?} lies on the core circle of the torus")));
                }
                Ok((0..3).map(|i| c[i] + minor * d[i] / dn).collect())
            }
            TargetManifold::Clifford => {
                let a = p[0].hypot(p[1]);
                let b = p[2].hypot(p[3]);
                if a <= tiny || b <= tiny {
                    return Err(Error::MedialAxis(format!("{p:?} has a vanishing coordinate pair")));
                }
                let s = FRAC_1_SQRT_2;
                Ok(vec![s * p[0] / a, s * p[1] / a, s * p[2] / b, s * p[3] / b])
            }
            TargetManifold::LevelSet(l) => newton_project(l, p),
        }
    }

    /// Orthonormal normal frame at a point of `N`.
    pub fn normal_frame(&self, q: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_dim(q)?;
        match self {
            TargetManifold::Sphere { .. } => {
                let r = norm(q);
                if r == 0.0 {
                    return Err(Error::MedialAxis("normal frame at the sphere center".into()));
                }
                Ok(vec![q.iter().map(|x| x / r).collect()])
            }
            TargetManifold::Torus3 { major, .. } => {
                let rho = q[0].hypot(q[1]);
                if rho == 0.0 {
                    return Err(Error::MedialAxis("normal frame on the torus axis".into()));
                }
                let d = [q[0] - major * q[0] / rho, q[1] - major * q[1] / rho, q[2]];
                let dn = norm(&d);
                if dn == 0.0 {
                    return Err(Error::MedialAxis("normal frame on the torus core circle".into()));
                }
                Ok(vec![d.iter().map(|x| x / dn).collect()])
            }
            TargetManifold::Clifford => {
                let a = q[0].hypot(q[1]);
                let b = q[2].hypot(q[3]);
                if a == 0.0 || b == 0.0 {
                    return Err(Error::MedialAxis("normal frame with a vanishing pair".into()));
                }
                Ok(vec![vec![q[0] / a, q[1] / a, 0.0, 0.0], vec![0.0, 0.0, q[2] / b, q[3] / b]])
            }
            TargetManifold::LevelSet(l) => gram_schmidt(&l.func.jacobian(q)),
        }
    }

    /// Orthonormal basis of `T_q N`, `dim()` vectors.
    pub fn tangent_basis(&self, q: &[f64]) -> Result<Vec<Vec<f64>>> {
        let nu = self.normal_frame(q)?;
        let n = self.ambient_dim();
        let mut basis: Vec<Vec<f64>> = nu.clone();
        let mut cands: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                e
            })
            .collect();
        while basis.len() < n {
            let mut best: Option<(usize, Vec<f64>, f64)> = None;
            for (j, e) in cands.iter().enumerate() {
                let mut v = e.clone();
                for _ in 0..2 {
                    for b in &basis {
                        let c = dot(&v, b);
                        v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                    }
                }
                let nv = norm(&v);
                if best.as_ref().is_none_or(|b| nv > b.2) {
                    best = Some((j, v, nv));
                }
            }
            let (j, v, nv) = best.expect("candidates remain");
            cands.remove(j);
            basis.push(v.into_iter().map(|x| x / nv).collect());
        }
        Ok(basis.split_off(nu.len()))
    }

    /// Distance from `p` to its projection.
    pub fn distance(&self, p: &[f64]) -> Result<f64> {
        let q = self.project(p)?;
        Ok(p.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
    }

    fn check_on(&self, p: &[f64]) -> Result<()> {
        let d = self.distance(p)?;
        if d > ON_MANIFOLD_TOL {
            return Err(Error::Usage(format!("point is {d:.3e} away from the target")));
        }
        Ok(())
    }

    /// Orthogonal projection of `v` onto `T_p N`; `p` must lie on `N`.
    pub fn tangent_project(&self, p: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(v)?;
        self.check_on(p)?;
        let mut out = v.to_vec();
        for nu in self.normal_frame(p)? {
            let c = dot(v, &nu);
            out.iter_mut().zip(&nu).for_each(|(x, y)| *x -= c * y);
        }
        Ok(out)
    }

    /// Derivative of the normal frame field along a tangent vector `x`.
    pub fn normal_derivative(&self, q: &[f64], alpha: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        match self {
            TargetManifold::Sphere { .. } => Ok(x.to_vec()),
            TargetManifold::Torus3 { major, minor } => {
                let rho = q[0].hypot(q[1]);
                let cos_t = (rho - major) / minor;
                let sin_t = q[2] / minor;
                let (cos_p, sin_p) = (q[0] / rho, q[1] / rho);
                let e_t = [-sin_t * cos_p, -sin_t * sin_p, cos_t];
                let e_p = [-sin_p, cos_p, 0.0];
                let xt = dot(x, &e_t);
                let xp = dot(x, &e_p);
                let kp = cos_t / (major + minor * cos_t);
                Ok((0..3).map(|i| xt / minor * e_t[i] + xp * kp * e_p[i]).collect())
            }
            TargetManifold::Clifford => Ok(if alpha == 0 {
                vec![SQRT_2 * x[0], SQRT_2 * x[1], 0.0, 0.0]
            } else {
                vec![0.0, 0.0, SQRT_2 * x[2], SQRT_2 * x[3]]
            }),
            TargetManifold::LevelSet(l) => {
                let s = 1e-5 / norm(x).max(1e-300);
                let qp: Vec<f64> = q.iter().zip(x).map(|(a, b)| a + s * b).collect();
                let qm: Vec<f64> = q.iter().zip(x).map(|(a, b)| a - s * b).collect();
                let np = gram_schmidt(&l.func.jacobian(&qp))?;
                let nm = gram_schmidt(&l.func.jacobian(&qm))?;
                Ok(np[alpha].iter().zip(&nm[alpha]).map(|(a, b)| (a - b) / (2.0 * s)).collect())
            }
        }
    }

    /// Second fundamental form `II(X, Y) = -Σ_α <dν_α(X), Y> ν_α`, normal to `N`.
    pub fn second_fundamental_form(&self, p: &[f64], x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        self.check_dim(y)?;
        self.check_on(p)?;
        let q = self.project(p)?;
        let xt = self.tangent_project(&q, x)?;
        let yt = self.tangent_project(&q, y)?;
        let mut out = vec![0.0; q.len()];
        for (alpha, nu) in self.normal_frame(&q)?.iter().enumerate() {
            let c = dot(&self.normal_derivative(&q, alpha, &xt)?, &yt);
            out.iter_mut().zip(nu).for_each(|(o, v)| *o -= c * v);
        }
        Ok(out)
    }

    /// Coefficients `C[i][z][l] = Σ_α (ν^i D_l ν^z - ν^z D_l ν^i)` at `q ∈ N`,
    /// flattened as `(i * n + z) * n + l`. Contracting with `∇u^l` gives the
    /// antisymmetric connection form with `-Δu = Ω · ∇u` for harmonic maps.
    pub fn omega_coefficients(&self, q: &[f64]) -> Result<Vec<f64>> {
        let n = self.ambient_dim();
        let nus = self.normal_frame(q)?;
        let mut out = vec![0.0; n * n * n];
        let tb = self.tangent_basis(q)?;
        for l in 0..n {
            // Tangential part of e_l.
            let el: Vec<f64> = (0..n).map(|m| tb.iter().map(|t| t[l] * t[m]).sum()).collect();
            for (alpha, nu) in nus.iter().enumerate() {
                let dnu = self.normal_derivative(q, alpha, &el)?;
                for i in 0..n {
                    for z in 0..n {
                        out[(i * n + z) * n + l] += nu[i] * dnu[z] - nu[z] * dnu[i];
                    }
                }
            }
        }
        Ok(out)
    }

    /// A random point on `N`. Not area-uniform for the tori.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let n = self.ambient_dim();
        let gauss = |rng: &mut R| -> f64 {
            let u: f64 = rng.gen_range(1e-300..1.0);
            let v: f64 = rng.gen();
            (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
        };
        match self {
            TargetManifold::Torus3 { major, minor } => {
                let (p, t): (f64, f64) = (rng.gen_range(0.0..6.3), rng.gen_range(0.0..6.3));
                let w = major + minor * t.cos();
                Ok(vec![w * p.cos(), w * p.sin(), minor * t.sin()])
            }
            TargetManifold::Clifford => {
                let (a, b): (f64, f64) = (rng.gen_range(0.0..6.3), rng.gen_range(0.0..6.3));
                let s = FRAC_1_SQRT_2;
                Ok(vec![s * a.cos(), s * a.sin(), s * b.cos(), s * b.sin()])
            }
            TargetManifold::Sphere { .. } => loop {
                let g: Vec<f64> = (0..n).map(|_| gauss(rng)).collect();
                if let Ok(q) = self.project(&g) {
                    return Ok(q);
                }
            },
            TargetManifold::LevelSet(l) => {
                for _ in 0..100 {
                    let g: Vec<f64> = l.base_point.iter().map(|b| b + l.reach * gauss(rng)).collect();
                    if let Ok(q) = self.project(&g) {
                        return Ok(q);
                    }
                }
                Err(Error::Solver("could not sample the level set".into()))
            }
        }
    }

    /// Largest sampled value of `|(p - q)^⊥_p| / |p - q|^2` over pairs on `N`.
    /// Bounded by half the largest principal curvature for nearby pairs.
    pub fn normal_deviation_check(&self, samples: usize, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for k in 0..samples {
            let p = self.sample(&mut rng)?;
            let q = if k % 2 == 0 {
                self.sample(&mut rng)?
            } else {
                let tb = self.tangent_basis(&p)?;
                let s = self.reach() * 10f64.powf(-3.0 * rng.gen::<f64>());
                let mut v = p.clone();
                for t in &tb {
                    let c: f64 = rng.gen_range(-1.0..1.0);
                    v.iter_mut().zip(t).for_each(|(x, y)| *x += s * c * y);
                }
                self.project(&v)?
            };
            let d: Vec<f64> = p.iter().zip(&q).map(|(a, b)| a - b).collect();
            let dd = dot(&d, &d);
            if dd < 1e-16 {
                continue;
            }
            let perp: f64 = self.normal_frame(&p)?.iter().map(|nu| dot(&d, nu).powi(2)).sum::<f64>().sqrt();
            worst = worst.max(perp / dd);
        }
        Ok(worst)
    }
}

/// Closest point on a level set by damped Newton on
/// `q - p - J(q)^T λ = 0, Φ(q) = 0`. Hessians of `Φ` come from central
/// differences of the Jacobian.
fn newton_project(l: &LevelSet, p: &[f64]) -> Result<Vec<f64>> {
    let n = l.func.ambient_dim();
    let k = l.func.codim();
    let residual = |q: &[f64], lam: &[f64]| -> Vec<f64> {
        let j = l.func.jacobian(q);
        let phi = l.func.value(q);
        let mut r = vec![0.0; n + k];
        for i in 0..n {
            r[i] = q[i] - p[i] - (0..k).map(|a| j[a][i] * lam[a]).sum::<f64>();
        }
        r[n..].copy_from_slice(&phi);
        r
    };
    // Start from a Gauss-Newton pass that lands on the level set.
    let mut q = p.to_vec();
    for _ in 0..NEWTON_MAX_ITER {
        let phi = l.func.value(&q);
        if norm(&phi) < NEWTON_TOL {
            break;
        }
        let j = nalgebra::DMatrix::from_fn(k, n, |a, i| l.func.jacobian(&q)[a][i]);
        let jjt = &j * j.transpose();
        let Some(inv) = jjt.try_inverse() else {
            return Err(Error::MedialAxis("level-set Jacobian is singular".into()));
        };
        let step = j.transpose() * inv * nalgebra::DVector::from_vec(phi);
        for i in 0..n {
            q[i] -= step[i];
        }
    }
    let j0 = l.func.jacobian(&q);
    let jm = nalgebra::DMatrix::from_fn(k, n, |a, i| j0[a][i]);
    let rhs = nalgebra::DVector::from_iterator(n, q.iter().zip(p).map(|(a, b)| a - b));
    let mut lam: Vec<f64> = (&jm * jm.transpose())
        .try_inverse()
        .map(|inv| (inv * &jm * rhs).iter().copied().collect())
        .unwrap_or_else(|| vec![0.0; k]);
    let scale = norm(p).max(1.0);
    for _ in 0..NEWTON_MAX_ITER {
        let r = residual(&q, &lam);
        let rn = norm(&r);
        if rn < NEWTON_TOL * scale {
            return Ok(q);
        }
        let j = l.func.jacobian(&q);
        let eps = 1e-6;
        let mut big = nalgebra::DMatrix::<f64>::zeros(n + k, n + k);
        for m in 0..n {
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[m] += eps;
            qm[m] -= eps;
            let (jp, jn) = (l.func.jacobian(&qp), l.func.jacobian(&qm));
            for i in 0..n {
                let hess: f64 = (0..k).map(|a| lam[a] * (jp[a][i] - jn[a][i]) / (2.0 * eps)).sum();
                big[(i, m)] = if i == m { 1.0 } else { 0.0 } - hess;
            }
        }
        for a in 0..k {
            for i in 0..n {
                big[(i, n + a)] = -j[a][i];
                big[(n + a, i)] = j[a][i];
            }
        }
        let Some(step) = big.lu().solve(&nalgebra::DVector::from_vec(r.clone())) else {
            return Err(Error::MedialAxis("Newton system is singular".into()));
        };
        let mut t = 1.0;
        loop {
            let qn: Vec<f64> = (0..n).map(|i| q[i] - t * step[i]).collect();
            let ln: Vec<f64> = (0..k).map(|a| lam[a] - t * step[n + a]).collect();
            if norm(&residual(&qn, &ln)) < rn || t < 1e-4 {
                q = qn;
                lam = ln;
                break;
            }
            t *= 0.5;
        }
    }
    Err(Error::Solver(format!("projection did not converge in {NEWTON_MAX_ITER} Newton steps")))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Ellipsoid;
    impl LevelFunction for Ellipsoid {
        fn ambient_dim(&self) -> usize {
            3
        }
        fn codim(&self) -> usize {
            1
        }
        fn value(&self, p: &[f64]) -> Vec<f64> {
            vec![p[0] * p[0] + p[1] * p[1] + p[2] * p[2] / 2.25 - 1.0]
        }
        fn jacobian(&self, p: &[f64]) -> Vec<Vec<f64>> {
            vec![vec![2.0 * p[0], 2.0 * p[1], 2.0 * p[2] / 2.25]]
        }
    }

    #[test]
    fn sphere_examples() {
        let s = TargetManifold::sphere(3).unwrap();
        assert_eq!(s.project(&[2.0, 0.0, 0.0]).unwrap(), vec![1.0, 0.0, 0.0]);
        assert!(matches!(s.project(&[0.0, 0.0, 0.0]), Err(Error::MedialAxis(_))));
        let ii = s.second_fundamental_form(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 1.0, 0.0]).unwrap();
        assert!((ii[0] + 1.0).abs() < 1e-14 && ii[1] == 0.0 && ii[2] == 0.0);
        assert!(s.second_fundamental_form(&[2.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn torus_projection() {
        let t = TargetManifold::torus(2.0, 1.0).unwrap();
        assert_eq!(t.project(&[4.0, 0.0, 0.0]).unwrap(), vec![3.0, 0.0, 0.0]);
        assert!(matches!(t.project(&[0.0, 0.0, 0.3]), Err(Error::MedialAxis(_))));
        assert!(matches!(t.project(&[2.0, 0.0, 0.0]), Err(Error::MedialAxis(_))));
        assert!(TargetManifold::torus(1.0, 1.0).is_err());
        assert_eq!(t.reach(), 1.0);
    }

    #[test]
    fn omega_coefficients_sphere_closed_form() {
        let s = TargetManifold::sphere(3).unwrap();
        let q = s.project(&[0.3, -0.5, 0.8]).unwrap();
        let c = s.omega_coefficients(&q).unwrap();
        for i in 0..3 {
            for z in 0..3 {
                for l in 0..3 {
                    let exact = q[i] * f64::from(u8::from(z == l)) - q[z] * f64::from(u8::from(i == l));
                    assert!((c[(i * 3 + z) * 3 + l] - exact).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn level_set_matches_closed_form_sphere() {
        struct Round;
        impl LevelFunction for Round {
            fn ambient_dim(&self) -> usize {
                3
            }
            fn codim(&self) -> usize {
                1
            }
            fn value(&self, p: &[f64]) -> Vec<f64> {
                vec![0.5 * (p.iter().map(|x| x * x).sum::<f64>() - 1.0)]
            }
            fn jacobian(&self, p: &[f64]) -> Vec<Vec<f64>> {
                vec![p.to_vec()]
            }
        }
        let ls =
            TargetManifold::LevelSet(LevelSet { func: Arc::new(Round), reach: 1.0, base_point: vec![0.0, 0.0, 1.0] });
        let p = [0.4, 1.1, -0.7];
        let a = ls.project(&p).unwrap();
        let b = TargetManifold::sphere(3).unwrap().project(&p).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-11);
        }
        let ii = ls.second_fundamental_form(&b, &[0.0, 0.0, 1.0], &[0.0, 0.0, 1.0]).unwrap();
        let ij =
            TargetManifold::sphere(3).unwrap().second_fundamental_form(&b, &[0.0, 0.0, 1.0], &[0.0, 0.0, 1.0]).unwrap();
        for (x, y) in ii.iter().zip(&ij) {
            assert!((x - y).abs() < 1e-7);
        }
    }

    #[test]
    fn ellipsoid_projection_is_closest_point() {
        let e = TargetManifold::LevelSet(LevelSet {
            func: Arc::new(Ellipsoid),
            reach: 0.4,
            base_point: vec![0.0, 0.0, 1.5],
        });
        let p = [0.9, 0.3, 0.9];
        let q = e.project(&p).unwrap();
        assert!(Ellipsoid.value(&q)[0].abs() < 1e-12);
        let d: Vec<f64> = p.iter().zip(&q).map(|(a, b)| a - b).collect();
        let t = e.tangent_project(&q, &d).unwrap();
        assert!(norm(&t) < 1e-10);
    }

    #[test]
    fn normal_deviation_sphere_is_half() {
        let s = TargetManifold::sphere(3).unwrap();
        let c = s.normal_deviation_check(200, 7).unwrap();
        assert!((c - 0.5).abs() < 1e-6, "{c}");
    }
}
