use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FlowTrajectory, StepRecord};
use crate::error::{Error, Result};
use crate::mesh::{gradient, DiskMesh, Field};

fn step_index(steps: &[StepRecord], t: f64) -> Result<usize> {
    let tol = 1e-7 * (1.0 + t.abs());
    steps.iter().position(|s| (s.t - t).abs() <= tol).ok_or_else(|| Error::Usage(format!("no stored step at t = {t}")))
}

fn trapezoid(steps: &[StepRecord]) -> f64 {
    steps.windows(2).map(|w| 0.5 * (w[1].t - w[0].t) * (w[0].ut_l2_sq + w[1].ut_l2_sq)).sum()
}

/// `|2 ∫_{t1}^{t2} ‖u_t‖^2 - (E(t1) - E(t2))|`, trapezoid rule over steps.
pub fn decay_identity_residual(traj: &FlowTrajectory, t1: f64, t2: f64) -> Result<f64> {
    if t2 < t1 {
        return Err(Error::Usage(format!("need t1 <= t2, got {t1} > {t2}")));
    }
    let i1 = step_index(&traj.steps, t1)?;
    let i2 = step_index(&traj.steps, t2)?;
    let s = &traj.steps[i1..=i2];
    Ok((2.0 * trapezoid(s) - (traj.steps[i1].e_raw - traj.steps[i2].e_raw)).abs())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub t0: Option<f64>,
    pub violations: usize,
    pub checked: usize,
    /// Largest `‖u_t(t_{k+1})‖^2 - ‖u_t(t_k)‖^2` after `T₀`, relative to
    /// `‖u_t(T₀)‖^2`.
    pub max_relative_increase: f64,
}

/// Counts steps after `T₀` on which `‖u_t‖^2` grows by more than
/// `1e-10 ‖u_t(T₀)‖^2`.
pub fn ut_monotonicity_check(traj: &FlowTrajectory) -> Result<MonotonicityReport> {
    if traj.snapshots.len() < 3 {
        return Err(Error::Usage("monotonicity check needs at least 3 snapshots".into()));
    }
    let Some(t0) = traj.t0 else {
        return Ok(MonotonicityReport { t0: None, violations: 0, checked: 0, max_relative_increase: 0.0 });
    };
    let k0 = step_index(&traj.steps, t0)?;
    let base = traj.steps[k0].ut_l2_sq;
    let tol = 1e-10 * base;
    let mut report =
        MonotonicityReport { t0: Some(t0), violations: 0, checked: 0, max_relative_increase: f64::NEG_INFINITY };
    for w in traj.steps[k0..].windows(2) {
        report.checked += 1;
        let inc = w[1].ut_l2_sq - w[0].ut_l2_sq;
        if inc > tol {
            report.violations += 1;
        }
        if base > 0.0 {
            report.max_relative_increase = report.max_relative_increase.max(inc / base);
        }
    }
    if report.checked == 0 || base == 0.0 {
        report.max_relative_increase = 0.0;
    }
    Ok(report)
}

/// Checks `‖u_t(t2)‖^2 <= (t2 - t1)^{-1} ∫_{t1}^{t2} ‖u_t‖^2` for snapshot
/// pairs; returns the number of failures and the largest left/right ratio.
pub fn mean_value_check(traj: &FlowTrajectory, pairs: &[(usize, usize)]) -> Result<(usize, f64)> {
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    for &(a, b) in pairs {
        let (t1, t2) = (traj.snapshots[a].t, traj.snapshots[b].t);
        if t2 <= t1 {
            return Err(Error::Usage("mean-value pairs need t2 > t1".into()));
        }
        let i1 = step_index(&traj.steps, t1)?;
        let i2 = step_index(&traj.steps, t2)?;
        let avg = trapezoid(&traj.steps[i1..=i2]) / (t2 - t1);
        let lhs = traj.steps[i2].ut_l2_sq;
        if lhs > avg * (1.0 + 1e-10) + 1e-300 {
            failures += 1;
        }
        if avg > 0.0 {
            worst = worst.max(lhs / avg);
        }
    }
    Ok((failures, worst))
}

/// Draws `count` distinct snapshot pairs `(i, j)`, `i < j`, with both times
/// in `[lo, hi]`.
pub fn sample_pairs(traj: &FlowTrajectory, count: usize, seed: u64, lo: f64, hi: f64) -> Vec<(usize, usize)> {
    let idx: Vec<usize> = (0..traj.snapshots.len())
        .filter(|&i| traj.snapshots[i].t >= lo - 1e-12 && traj.snapshots[i].t <= hi + 1e-12)
        .collect();
    let mut all = Vec::new();
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            all.push((i, j));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    all.shuffle(&mut rng);
    all.truncate(count);
    all.sort_unstable();
    all
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvexityPair {
    pub t1: f64,
    pub t2: f64,
    pub energy_drop: f64,
    pub denominator: f64,
    pub ratio: Option<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub threshold: f64,
    pub slack: f64,
    pub pairs: Vec<ConvexityPair>,
    pub failures: usize,
    pub degenerate: usize,
    pub min_ratio: Option<f64>,
}

fn gradient_gap(mesh: &DiskMesh, a: &Field, b: &Field) -> Result<f64> {
    let d = a.sub(b)?;
    Ok(d.components().iter().map(|c| mesh.stiffness().quadratic_form(c)).sum::<f64>().max(0.0))
}

fn build_report(threshold: f64, slack: f64, pairs: Vec<ConvexityPair>) -> ConvexityReport {
    let failures = pairs.iter().filter(|p| !p.pass).count();
    let degenerate = pairs.iter().filter(|p| p.ratio.is_none()).count();
    let min_ratio = pairs.iter().filter_map(|p| p.ratio).reduce(f64::min);
    ConvexityReport { threshold, slack, pairs, failures, degenerate, min_ratio }
}

/// Ratios `(E(t1) - E(t2)) / ∫|∇u(t1) - ∇u(t2)|^2` for snapshot pairs,
/// passing at `1/4 - slack`. Pairs with denominator below `1e-14` are
/// degenerate and do not fail.
pub fn convexity_report(
    mesh: &DiskMesh,
    traj: &FlowTrajectory,
    pairs: &[(usize, usize)],
    slack: f64,
) -> Result<ConvexityReport> {
    convexity_with(mesh, traj, pairs, slack, true)
}

pub(crate) fn convexity_with(
    mesh: &DiskMesh,
    traj: &FlowTrajectory,
    pairs: &[(usize, usize)],
    slack: f64,
    require_t0: bool,
) -> Result<ConvexityReport> {
    let t0 =
        if require_t0 { traj.t0.ok_or_else(|| Error::Usage("T0 was not detected".into()))? } else { f64::NEG_INFINITY };
    let threshold = 0.25;
    let mut out = Vec::with_capacity(pairs.len());
    for &(a, b) in pairs {
        let (s1, s2) = (&traj.snapshots[a], &traj.snapshots[b]);
        if !(s2.t > s1.t) || s1.t < t0 - 1e-12 {
            return Err(Error::Usage(format!("pair ({}, {}) violates t2 > t1 >= T0", s1.t, s2.t)));
        }
        let drop = traj.monitors[a].e_raw - traj.monitors[b].e_raw;
        let den = gradient_gap(mesh, &s1.u, &s2.u)?;
        let ratio = (den > 1e-14).then(|| drop / den);
        let pass = ratio.is_none_or(|r| r >= threshold - slack);
        out.push(ConvexityPair { t1: s1.t, t2: s2.t, energy_drop: drop, denominator: den, ratio, pass });
    }
    Ok(build_report(threshold, slack, out))
}

/// Compares snapshots against a limit map: `(E(t) - E(u_∞)) / ∫|∇u(t) - ∇u_∞|^2`,
/// passing at `1/2 - slack`.
pub fn convexity_against_limit(
    mesh: &DiskMesh,
    traj: &FlowTrajectory,
    u_inf: &Field,
    e_inf: f64,
    indices: &[usize],
    slack: f64,
) -> Result<ConvexityReport> {
    let threshold = 0.5;
    let mut out = Vec::with_capacity(indices.len());
    for &i in indices {
        let s = &traj.snapshots[i];
        let drop = traj.monitors[i].e_raw - e_inf;
        let den = gradient_gap(mesh, &s.u, u_inf)?;
        let ratio = (den > 1e-14).then(|| drop / den);
        let pass = ratio.is_none_or(|r| r >= threshold - slack);
        out.push(ConvexityPair { t1: s.t, t2: f64::INFINITY, energy_drop: drop, denominator: den, ratio, pass });
    }
    Ok(build_report(threshold, slack, out))
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CrossTerm {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / (ε₀ rhs)`, absent when `rhs <= 1e-14`.
    pub constant: Option<f64>,
}

/// `∫|u(t1) - u(t2)|^2 |∇u(t2)|^2` against `∫|∇u(t1) - ∇u(t2)|^2`.
pub fn cross_term_check(
    mesh: &DiskMesh,
    traj: &FlowTrajectory,
    a: usize,
    b: usize,
    epsilon0: f64,
) -> Result<CrossTerm> {
    let (s1, s2) = (&traj.snapshots[a], &traj.snapshots[b]);
    if s2.t < s1.t {
        return Err(Error::Usage("cross term needs t2 >= t1".into()));
    }
    let d = s1.u.sub(&s2.u)?;
    let g = gradient(mesh, &s2.u)?;
    let w = d.width();
    let mut lhs = 0.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let mut bar = vec![0.0; w];
        for &v in tri {
            bar.iter_mut().zip(d.at(v)).for_each(|(x, y)| *x += y / 3.0);
        }
        let dd: f64 = bar.iter().map(|x| x * x).sum();
        let gg: f64 = g.at(t).iter().map(|v| v[0] * v[0] + v[1] * v[1]).sum();
        lhs += mesh.area(t) * dd * gg;
    }
    let rhs = gradient_gap(mesh, &s1.u, &s2.u)?;
    let constant = (rhs > 1e-14).then(|| lhs / (epsilon0 * rhs));
    Ok(CrossTerm { lhs, rhs, constant })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CauchyCertificate {
    /// `sup ∫|∇u(t1) - ∇u(t2)|^2 - 4 (E(t1) - E(t2))` over pairs after `T₀`.
    pub value: f64,
    pub max_denominator: f64,
    pub pairs: usize,
}

/// Certificate over all pairs of (at most `max_snapshots`, evenly thinned)
/// snapshots after `T₀`.
pub fn cauchy_certificate(mesh: &DiskMesh, traj: &FlowTrajectory, max_snapshots: usize) -> Result<CauchyCertificate> {
    let t0 = traj.t0.ok_or_else(|| Error::Usage("T0 was not detected".into()))?;
    let idx: Vec<usize> = (0..traj.snapshots.len()).filter(|&i| traj.snapshots[i].t >= t0 - 1e-12).collect();
    let stride = idx.len().div_ceil(max_snapshots.max(2)).max(1);
    let mut pick: Vec<usize> = idx.iter().step_by(stride).copied().collect();
    if let Some(&last) = idx.last() {
        if pick.last() != Some(&last) {
            pick.push(last);
        }
    }
    let mut cert = CauchyCertificate { value: f64::NEG_INFINITY, max_denominator: 0.0, pairs: 0 };
    for (a, &i) in pick.iter().enumerate() {
        for &j in &pick[a + 1..] {
            let den = gradient_gap(mesh, &traj.snapshots[i].u, &traj.snapshots[j].u)?;
            let drop = traj.monitors[i].e_raw - traj.monitors[j].e_raw;
            cert.value = cert.value.max(den - 4.0 * drop);
            cert.max_denominator = cert.max_denominator.max(den);
            cert.pairs += 1;
        }
    }
    if cert.pairs == 0 {
        cert.value = 0.0;
    }
    Ok(cert)
}
