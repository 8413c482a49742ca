//! Scenarios: configuration, orchestration of the flow and its checks, and
//! the persisted reports.

mod config;
mod suite;

pub use config::{
    load_config, BoundaryConfig, Check, FourierTerm, GaugeConfig, HardyConfig, PairOptions, Perturbation,
    ScenarioConfig, TargetConfig, Tolerances,
};
pub use suite::{verify_suite, SuiteConstants, SuiteEntry, SuiteReport};

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::elliptic::Laplace;
use crate::error::{Error, Result};
use crate::flow::{
    cauchy_certificate, convexity_report, cross_term_check, decay_identity_residual, dirichlet_energy,
    harmonic_initial_map, l2_sq, mean_value_check, sample_pairs, trajectory_csv, ut_monotonicity_check, write_snapshot,
    FlowOptions, FlowSolver, FlowTrajectory,
};
use crate::gauge::{
    b_sup_estimate, connection_form, conservation_residual, construct_ab, default_probes, minimize_gauge,
    p_oscillation, p_structure, recover_xi, GaugeOptions,
};
use crate::hardy::{h1_energy_check, pointwise_lower_bound_check, HardyEstimator, HardyPoint};
use crate::manifold::TargetManifold;
use crate::mesh::{DiskMesh, Field, Shape};

pub const ARTIFACT_VERSION: &str = "heatflow-lab/1";

/// Give up shrinking the perturbation after this many factors of 0.9.
const MAX_SHRINK: usize = 400;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: Check,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub measured: BTreeMap<String, f64>,
}

impl CheckReport {
    fn new(check: Check) -> Self {
        CheckReport { check, verdict: Verdict::Pass, reason: None, measured: BTreeMap::new() }
    }

    fn skipped(check: Check, reason: &str) -> Self {
        CheckReport { check, verdict: Verdict::Skipped, reason: Some(reason.into()), measured: BTreeMap::new() }
    }

    /// Records a finite measurement; non-finite values are dropped and noted.
    fn put(&mut self, key: &str, v: f64) {
        if v.is_finite() {
            self.measured.insert(key.into(), v);
        } else {
            self.fail(format!("{key} is not finite"));
        }
    }

    fn fail(&mut self, why: String) {
        self.verdict = Verdict::Fail;
        self.reason = Some(match self.reason.take() {
            Some(r) => format!("{r}; {why}"),
            None => why,
        });
    }

    fn require(&mut self, ok: bool, why: impl FnOnce() -> String) {
        if !ok {
            self.fail(why());
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeshInfo {
    pub refinement: u32,
    pub vertices: usize,
    pub triangles: usize,
    pub h: f64,
    pub min_angle_degrees: f64,
}

impl MeshInfo {
    pub fn of(mesh: &DiskMesh) -> Self {
        MeshInfo {
            refinement: mesh.refinement(),
            vertices: mesh.num_vertices(),
            triangles: mesh.num_triangles(),
            h: mesh.h(),
            min_angle_degrees: mesh.min_angle_degrees(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Feasibility {
    pub feasible: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    /// Energy of the harmonic extension of the boundary data.
    pub e_raw_harmonic: Option<f64>,
    pub e_raw_initial: Option<f64>,
    pub amplitude: f64,
    pub shrink_steps: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub e_raw_initial: f64,
    pub e_raw_final: f64,
    pub t0: Option<f64>,
    pub steps: usize,
    pub snapshots: usize,
    pub tau_initial: f64,
    pub tau_final: f64,
    pub halvings: u32,
    pub max_energy_increase: f64,
    pub ut_l2_sq_final: f64,
    pub tension_l2_final: f64,
}

impl TrajectorySummary {
    fn of(traj: &FlowTrajectory) -> Self {
        let first = traj.monitors[0];
        let last = *traj.monitors.last().expect("non-empty monitors");
        TrajectorySummary {
            e_raw_initial: first.e_raw,
            e_raw_final: last.e_raw,
            t0: traj.t0,
            steps: traj.steps.len() - 1,
            snapshots: traj.snapshots.len(),
            tau_initial: traj.tau_initial,
            tau_final: traj.tau_final,
            halvings: traj.halvings,
            max_energy_increase: if traj.max_energy_increase.is_finite() { traj.max_energy_increase } else { 0.0 },
            ut_l2_sq_final: last.ut_l2_sq,
            tension_l2_final: last.tension_l2,
        }
    }
}

/// Diagnostics of the gauge pipeline on one map.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GaugeSnapshot {
    pub t: f64,
    pub omega_l2: f64,
    pub energy: f64,
    pub r_gauge: f64,
    pub r_cons: f64,
    /// Dual-norm residual of `div(A∇u + B∇^⊥u) = A u_t`.
    pub conservation_residual: f64,
    pub b_sup: f64,
    #[serde(rename = "B_sup_ratio")]
    pub b_sup_ratio: f64,
    pub wente_agreement: f64,
    pub b_l2: f64,
    pub p_structure_residual: f64,
    pub p_osc_ratio: f64,
    pub p_osc_violations: usize,
    pub gauge_iterations: usize,
    pub ab_iterations: usize,
    pub monotone: bool,
    pub orthogonality_defect: f64,
    pub min_singular_value: f64,
    pub lower_bound_min_ratio: Option<f64>,
    pub lower_bound_violations: usize,
    pub lower_bound_evaluated: usize,
}

impl GaugeSnapshot {
    /// Reasons this snapshot fails the gauge tolerances, empty when it passes.
    pub fn failures(&self, h: f64) -> Vec<String> {
        let mut out = Vec::new();
        let om = self.omega_l2;
        let lin = 10.0 * h * om + 1e-12;
        let t = self.t;
        if !(self.r_gauge <= lin) {
            out.push(format!("t={t}: r_gauge {:.3e} > 10 h |Omega| = {lin:.3e}", self.r_gauge));
        }
        if !(self.r_cons <= lin) {
            out.push(format!("t={t}: r_cons {:.3e} > 10 h |Omega| = {lin:.3e}", self.r_cons));
        }
        if !self.monotone {
            out.push(format!("t={t}: gauge descent not monotone"));
        }
        if !(self.orthogonality_defect <= 1e-10) {
            out.push(format!("t={t}: orthogonality defect {:.3e}", self.orthogonality_defect));
        }
        if !(self.min_singular_value >= 0.5) {
            out.push(format!("t={t}: A has singular value {:.3e}", self.min_singular_value));
        }
        let ps = 10.0 * h * (1.0 + om * om);
        if !(self.p_structure_residual <= ps) {
            out.push(format!("t={t}: P structure residual {:.3e} > {ps:.3e}", self.p_structure_residual));
        }
        let agree = 10.0 * h * (self.b_l2 + om) + 1e-12;
        if !(self.wente_agreement <= agree) {
            out.push(format!("t={t}: B routes differ by {:.3e} > {agree:.3e}", self.wente_agreement));
        }
        if self.p_osc_violations > 0 {
            out.push(format!("t={t}: {} oscillation bound violations", self.p_osc_violations));
        }
        out
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GaugeIterations {
    pub gauge: usize,
    pub ab: usize,
}

/// Maxima over the analysed snapshots, plus the snapshots themselves.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GaugeSummary {
    pub energy: f64,
    pub r_gauge: f64,
    pub r_cons: f64,
    #[serde(rename = "B_sup_ratio")]
    pub b_sup_ratio: f64,
    pub p_osc_ratio: f64,
    pub iterations: GaugeIterations,
    pub snapshots: Vec<GaugeSnapshot>,
}

impl GaugeSummary {
    fn of(snaps: Vec<GaugeSnapshot>) -> Self {
        let max = |f: fn(&GaugeSnapshot) -> f64| snaps.iter().map(f).fold(0.0, f64::max);
        GaugeSummary {
            energy: max(|s| s.energy),
            r_gauge: max(|s| s.r_gauge),
            r_cons: max(|s| s.r_cons),
            b_sup_ratio: max(|s| s.b_sup_ratio),
            p_osc_ratio: max(|s| s.p_osc_ratio),
            iterations: GaugeIterations {
                gauge: snaps.iter().map(|s| s.gauge_iterations).max().unwrap_or(0),
                ab: snaps.iter().map(|s| s.ab_iterations).max().unwrap_or(0),
            },
            snapshots: snaps,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub artifact_version: String,
    pub config: ScenarioConfig,
    pub mesh: MeshInfo,
    pub feasibility: Feasibility,
    pub trajectory: Option<TrajectorySummary>,
    pub checks: Vec<CheckReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gauge: Option<GaugeSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hardy: Option<Vec<HardyPoint>>,
    pub passed: bool,
}

impl RunReport {
    pub fn check(&self, c: Check) -> Option<&CheckReport> {
        self.checks.iter().find(|r| r.check == c)
    }

    /// Names of the failed checks, or `feasibility` for an infeasible run.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.feasibility.feasible {
            out.push("feasibility".to_string());
        }
        for c in &self.checks {
            if c.verdict == Verdict::Fail {
                let name = serde_json::to_value(c.check).ok().and_then(|v| v.as_str().map(String::from));
                out.push(name.unwrap_or_else(|| format!("{:?}", c.check)));
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Wall-clock phases, kept out of the report so reports stay reproducible.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Timing {
    pub setup_s: f64,
    pub flow_s: f64,
    pub checks_s: BTreeMap<String, f64>,
    pub total_s: f64,
}

pub struct ScenarioOutcome {
    pub report: RunReport,
    pub timing: Timing,
    pub trajectory: Option<FlowTrajectory>,
}

impl ScenarioOutcome {
    /// Writes `report.json`, `timing.json`, `trajectory.csv` and snapshot
    /// files `snapshot_<k>.txt` at multiples of the output interval.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.report.to_json()?)?;
        std::fs::write(dir.join("timing.json"), serde_json::to_string_pretty(&self.timing)? + "\n")?;
        if let Some(traj) = &self.trajectory {
            std::fs::write(dir.join("trajectory.csv"), trajectory_csv(traj))?;
            let every = self.report.config.output_interval;
            let mut k = 0usize;
            loop {
                let t = k as f64 * every;
                if t > traj.final_state().t + 1e-9 {
                    break;
                }
                if let Some(i) = traj.snapshot_index_at(t) {
                    let s = &traj.snapshots[i];
                    write_snapshot(&dir.join(format!("snapshot_{k:04}.txt")), s.t, &s.u)?;
                }
                k += 1;
            }
        }
        Ok(())
    }
}

/// Boundary curve `χ` at every vertex. Interior vertices get the same
/// formula in the polar angle; only boundary values are used downstream.
pub fn boundary_data(mesh: &DiskMesh, target: &TargetManifold, b: &BoundaryConfig) -> Result<Field> {
    let n = target.ambient_dim();
    let base = target.base_point();
    let tangent = target.tangent_basis(&base)?;
    let mut chi = Field::zeros(Shape::Vector(n), mesh.num_vertices());
    for v in 0..mesh.num_vertices() {
        let [x, y] = mesh.vertices()[v];
        let theta = y.atan2(x);
        let mut p = base.clone();
        match b {
            BoundaryConfig::Cap { delta } => {
                let (c, s) = (theta.cos(), theta.sin());
                for (k, e) in tangent.iter().take(2).enumerate() {
                    let w = if k == 0 { c } else { s };
                    p.iter_mut().zip(e).for_each(|(pi, ei)| *pi += delta * w * ei);
                }
            }
            BoundaryConfig::Fourier { coeffs } => {
                for term in coeffs {
                    let kt = term.k as f64 * theta;
                    for (i, pi) in p.iter_mut().enumerate() {
                        *pi += term.cos.get(i).copied().unwrap_or(0.0) * kt.cos()
                            + term.sin.get(i).copied().unwrap_or(0.0) * kt.sin();
                    }
                }
            }
        }
        chi.at_mut(v).copy_from_slice(&target.project(&p)?);
    }
    Ok(chi)
}

fn unit_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.1 && norm <= 1.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// `π(u_h + a(1 - |x|^2)(c₀ + c₁x + c₂y))` at interior vertices.
fn perturbed(mesh: &DiskMesh, target: &TargetManifold, uh: &Field, dirs: &[Vec<f64>; 3], a: f64) -> Result<Field> {
    let mut u = uh.clone();
    for v in 0..mesh.num_vertices() {
        if mesh.is_boundary(v) {
            continue;
        }
        let [x, y] = mesh.vertices()[v];
        let bump = a * (1.0 - x * x - y * y);
        let p: Vec<f64> =
            (0..u.width()).map(|i| uh.at(v)[i] + bump * (dirs[0][i] + dirs[1][i] * x + dirs[2][i] * y)).collect();
        u.at_mut(v).copy_from_slice(&target.project(&p)?);
    }
    Ok(u)
}

/// Harmonic extension plus the seeded perturbation, shrunk until the energy
/// is below `ε₀`. Returns the map or an infeasibility record.
fn initial_map(
    lap: &Laplace,
    target: &TargetManifold,
    chi: &Field,
    cfg: &ScenarioConfig,
) -> Result<(Option<Field>, Feasibility)> {
    let mesh = lap.mesh();
    let mut feas = Feasibility {
        feasible: false,
        reason: None,
        e_raw_harmonic: None,
        e_raw_initial: None,
        amplitude: cfg.perturbation.amplitude,
        shrink_steps: 0,
    };
    let uh = match harmonic_initial_map(lap, target, chi) {
        Ok(u) => u,
        Err(e @ Error::MedialAxis(_)) => {
            feas.reason = Some(format!("harmonic extension leaves the reach: {e}"));
            return Ok((None, feas));
        }
        Err(e) => return Err(e),
    };
    let eh = dirichlet_energy(mesh, &uh)?.e_raw;
    feas.e_raw_harmonic = Some(eh);
    if eh >= cfg.epsilon0 {
        feas.reason = Some(format!("harmonic extension has E_raw = {eh:.6e} >= epsilon0 = {}", cfg.epsilon0));
        return Ok((None, feas));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = target.ambient_dim();
    let dirs = [unit_vector(&mut rng, n), unit_vector(&mut rng, n), unit_vector(&mut rng, n)];
    let mut a = cfg.perturbation.amplitude;
    let mut chosen = None;
    for k in 0..MAX_SHRINK {
        if a == 0.0 {
            break;
        }
        if let Ok(u) = perturbed(mesh, target, &uh, &dirs, a) {
            let e = dirichlet_energy(mesh, &u)?.e_raw;
            if e < cfg.epsilon0 {
                feas.shrink_steps = k;
                chosen = Some((u, e));
                break;
            }
        }
        a *= 0.9;
    }
    let (u, e) = match chosen {
        Some(x) => x,
        None => {
            a = 0.0;
            feas.shrink_steps = MAX_SHRINK;
            (uh, eh)
        }
    };
    feas.amplitude = a;
    feas.e_raw_initial = Some(e);
    feas.feasible = true;
    Ok((Some(u), feas))
}

/// Last snapshot time whose energy exceeds the final energy by a relative
/// `1e-9`; pairs beyond it only measure roundoff.
fn active_until(traj: &FlowTrajectory) -> f64 {
    let e_final = traj.monitors.last().map_or(0.0, |m| m.e_raw);
    let e0 = traj.monitors[0].e_raw;
    let tol = 1e-9 * e0.max(e_final);
    traj.monitors.iter().rev().find(|m| m.e_raw - e_final > tol).map_or(0.0, |m| m.t)
}

/// Runs the full gauge pipeline on one map.
pub fn gauge_snapshot(
    lap: &Laplace,
    target: &TargetManifold,
    t: f64,
    u: &Field,
    u_t: Option<&Field>,
    cfg: &ScenarioConfig,
) -> Result<GaugeSnapshot> {
    let mesh = lap.mesh();
    let omega = connection_form(mesh, target, u)?;
    let mut g = minimize_gauge(mesh, &omega, &GaugeOptions::default())?;
    recover_xi(lap, &mut g, &omega)?;
    let ab = construct_ab(lap, &g, &omega, &cfg.gauge.ab)?;
    let cons = conservation_residual(lap, &ab, u, u_t)?;
    let b = b_sup_estimate(lap, &ab, target, u)?;
    let ps = p_structure(lap, &ab, &g, target, u)?;
    let ut_norm = u_t.map_or(0.0, |f| l2_sq(mesh, f).sqrt());
    let probes = default_probes(cfg.gauge.probes, cfg.seed);
    let osc = p_oscillation(lap, &g, &ps, ut_norm, cfg.epsilon0, &probes)?;
    let lb = pointwise_lower_bound_check(
        mesh,
        u,
        &g.p,
        &ps.eta,
        &ps.zeta,
        &default_probes(cfg.hardy.probes, cfg.seed ^ 0x5eed),
        cfg.hardy.threshold,
    )?;
    Ok(GaugeSnapshot {
        t,
        omega_l2: omega.l2(mesh),
        energy: g.energy,
        r_gauge: g.r_gauge.unwrap_or(0.0),
        r_cons: ab.r_cons,
        conservation_residual: cons,
        b_sup: b.b_sup,
        b_sup_ratio: b.ratio,
        wente_agreement: b.agreement_l2,
        b_l2: b.b_l2,
        p_structure_residual: ps.residual,
        p_osc_ratio: osc.measured_c,
        p_osc_violations: osc.bound_violations,
        gauge_iterations: g.iterations,
        ab_iterations: ab.iterations,
        monotone: g.monotone,
        orthogonality_defect: g.max_orthogonality_defect,
        min_singular_value: ab.min_singular_value,
        lower_bound_min_ratio: lb.min_ratio,
        lower_bound_violations: lb.violations,
        lower_bound_evaluated: lb.evaluated,
    })
}

/// Up to `count` snapshot indices at or after `T₀`, evenly spread and always
/// including the last one.
fn late_indices(traj: &FlowTrajectory, count: usize) -> Vec<usize> {
    let Some(t0) = traj.t0 else { return Vec::new() };
    let late: Vec<usize> = (0..traj.snapshots.len()).filter(|&i| traj.snapshots[i].t >= t0).collect();
    if late.is_empty() || count == 0 {
        return Vec::new();
    }
    if late.len() <= count {
        return late;
    }
    let m = late.len() - 1;
    let mut out: Vec<usize> = (0..count).map(|k| late[if count == 1 { m } else { k * m / (count - 1) }]).collect();
    out.dedup();
    out
}

fn infeasible_report(cfg: &ScenarioConfig, mesh: &DiskMesh, feas: Feasibility) -> RunReport {
    let checks = cfg.checks.iter().map(|&c| CheckReport::skipped(c, "infeasible initial data")).collect();
    RunReport {
        artifact_version: ARTIFACT_VERSION.into(),
        config: cfg.clone(),
        mesh: MeshInfo::of(mesh),
        feasibility: feas,
        trajectory: None,
        checks,
        gauge: None,
        hardy: None,
        passed: false,
    }
}

/// Builds the mesh, boundary data and initial map, runs the flow and every
/// requested check.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let mut timing = Timing::default();
    let mesh = DiskMesh::build(cfg.refinement)?;
    let lap = Laplace::new(&mesh);
    let target = cfg.target.build()?;
    let chi = match boundary_data(&mesh, &target, &cfg.boundary) {
        Ok(c) => c,
        Err(e @ Error::MedialAxis(_)) => {
            let feas = Feasibility {
                feasible: false,
                reason: Some(format!("boundary data cannot be projected: {e}")),
                e_raw_harmonic: None,
                e_raw_initial: None,
                amplitude: cfg.perturbation.amplitude,
                shrink_steps: 0,
            };
            timing.total_s = start.elapsed().as_secs_f64();
            return Ok(ScenarioOutcome { report: infeasible_report(cfg, &mesh, feas), timing, trajectory: None });
        }
        Err(e) => return Err(e),
    };
    let (u0, feas) = initial_map(&lap, &target, &chi, cfg)?;
    timing.setup_s = start.elapsed().as_secs_f64();
    let Some(u0) = u0 else {
        timing.total_s = start.elapsed().as_secs_f64();
        return Ok(ScenarioOutcome { report: infeasible_report(cfg, &mesh, feas), timing, trajectory: None });
    };

    let flow_start = Instant::now();
    let mut solver = FlowSolver::new(&mesh, target.clone(), chi, cfg.scheme)?;
    let opts = FlowOptions {
        scheme: cfg.scheme,
        timestep: cfg.timestep,
        t_end: cfg.t_end,
        snapshot_interval: cfg.snapshot_interval,
        epsilon0: cfg.epsilon0,
        ..FlowOptions::default()
    };
    let traj = solver.run(u0, &opts)?;
    timing.flow_s = flow_start.elapsed().as_secs_f64();

    let window = cfg.pairs.window.map(|[a, b]| (a, b)).or_else(|| traj.t0.map(|t0| (t0, active_until(&traj))));
    let pairs = match window {
        Some((lo, hi)) if hi > lo => sample_pairs(&traj, cfg.pairs.count, cfg.seed, lo, hi),
        _ => Vec::new(),
    };

    let mut gauge_summary = None;
    let mut hardy_points = None;
    let mut gauge_snaps: Option<Vec<GaugeSnapshot>> = None;
    let needs_gauge = cfg.checks.iter().any(|c| matches!(c, Check::Gauge | Check::Hardy));
    if needs_gauge {
        let t = Instant::now();
        let snaps = late_indices(&traj, cfg.gauge.snapshots)
            .into_iter()
            .map(|i| {
                let s = &traj.snapshots[i];
                gauge_snapshot(&lap, &target, s.t, &s.u, Some(&s.u_t), cfg)
            })
            .collect::<Result<Vec<_>>>()?;
        timing.checks_s.insert("gauge_pipeline".into(), t.elapsed().as_secs_f64());
        gauge_snaps = Some(snaps);
    }

    let mut checks = Vec::with_capacity(cfg.checks.len());
    for &check in &cfg.checks {
        let t = Instant::now();
        let mut rep = CheckReport::new(check);
        match check {
            Check::Convexity => {
                if traj.t0.is_none() {
                    rep.fail("T0 not detected".into());
                } else if let Some((lo, hi)) = window {
                    rep.put("window_start", lo);
                    rep.put("window_end", hi);
                    let c = convexity_report(&mesh, &traj, &pairs, cfg.pairs.slack)?;
                    rep.put("pairs", c.pairs.len() as f64);
                    rep.put("failures", c.failures as f64);
                    rep.put("degenerate", c.degenerate as f64);
                    rep.put("threshold", c.threshold - c.slack);
                    if let Some(m) = c.min_ratio {
                        rep.put("min_ratio", m);
                    }
                    rep.require(c.pairs.len() >= cfg.pairs.count, || {
                        format!("only {} pairs in [{lo:.4}, {hi:.4}], {} requested", c.pairs.len(), cfg.pairs.count)
                    });
                    rep.require(c.failures == 0, || format!("{} pairs below {}", c.failures, c.threshold - c.slack));
                }
            }
            Check::UtMonotone => {
                let m = ut_monotonicity_check(&traj)?;
                match m.t0 {
                    None => rep.fail("T0 not detected".into()),
                    Some(t0) => {
                        rep.put("t0", t0);
                        rep.put("steps_checked", m.checked as f64);
                        rep.put("violations", m.violations as f64);
                        rep.put("max_relative_increase", m.max_relative_increase);
                        let (mv_fail, mv_worst) = mean_value_check(&traj, &pairs)?;
                        rep.put("mean_value_pairs", pairs.len() as f64);
                        rep.put("mean_value_failures", mv_fail as f64);
                        rep.put("mean_value_max_ratio", mv_worst);
                        rep.require(m.violations == 0, || format!("{} monotonicity violations", m.violations));
                        rep.require(mv_fail == 0, || format!("{mv_fail} mean-value failures"));
                    }
                }
            }
            Check::DecayIdentity => {
                let t1 = 1.0;
                let t2 = traj.final_state().t;
                let res = decay_identity_residual(&traj, t1, t2)?;
                let i1 = traj.steps.iter().position(|s| (s.t - t1).abs() <= 1e-7 * (1.0 + t1)).unwrap_or(0);
                let drop = traj.steps[i1].e_raw - traj.steps.last().map_or(0.0, |s| s.e_raw);
                rep.put("t1", t1);
                rep.put("t2", t2);
                rep.put("residual", res);
                rep.put("energy_drop", drop);
                let scale = traj.tau_final + mesh.h();
                let bound = cfg.tolerances.decay * scale * drop.abs() + 1e-12 * traj.monitors[0].e_raw;
                rep.put("residual_over_scaled_drop", if drop > 0.0 { res / (scale * drop) } else { 0.0 });
                rep.put("bound", bound);
                rep.require(res <= bound, || format!("decay residual {res:.3e} > {bound:.3e}"));
            }
            Check::CrossTerm => {
                let mut worst: f64 = 0.0;
                let mut degenerate = 0usize;
                for &(a, b) in &pairs {
                    match cross_term_check(&mesh, &traj, a, b, cfg.epsilon0)?.constant {
                        Some(c) => worst = worst.max(c),
                        None => degenerate += 1,
                    }
                }
                rep.put("pairs", pairs.len() as f64);
                rep.put("degenerate", degenerate as f64);
                rep.put("max_constant", worst);
                rep.put("bound", cfg.tolerances.cross_term);
                if pairs.is_empty() {
                    rep.fail("no pairs after T0".into());
                }
                rep.require(worst <= cfg.tolerances.cross_term, || {
                    format!("cross-term constant {worst:.3e} > {}", cfg.tolerances.cross_term)
                });
            }
            Check::Cauchy => {
                if traj.t0.is_none() {
                    rep.fail("T0 not detected".into());
                } else {
                    let c = cauchy_certificate(&mesh, &traj, 64)?;
                    let allowed = cfg.pairs.slack * c.max_denominator;
                    rep.put("value", c.value);
                    rep.put("max_denominator", c.max_denominator);
                    rep.put("allowed", allowed);
                    rep.put("pairs", c.pairs as f64);
                    rep.require(c.value <= allowed + 1e-14, || {
                        format!("certificate {:.3e} > slack {allowed:.3e}", c.value)
                    });
                }
            }
            Check::Gauge => {
                let snaps = gauge_snaps.clone().unwrap_or_default();
                if snaps.is_empty() {
                    rep.fail("no snapshot after T0".into());
                }
                let h = mesh.h();
                for s in &snaps {
                    for why in s.failures(h) {
                        rep.fail(why);
                    }
                }
                let summary = GaugeSummary::of(snaps);
                rep.put("snapshots", summary.snapshots.len() as f64);
                rep.put("max_r_gauge_over_h_omega", ratio_max(&summary.snapshots, h, |s| s.r_gauge));
                rep.put("max_r_cons_over_h_omega", ratio_max(&summary.snapshots, h, |s| s.r_cons));
                rep.put("B_sup_ratio", summary.b_sup_ratio);
                rep.put("p_osc_ratio", summary.p_osc_ratio);
                gauge_summary = Some(summary);
            }
            Check::Hardy => {
                let est = HardyEstimator::new(&mesh)?;
                let series = h1_energy_check(&est, &traj, cfg.hardy.snapshots)?;
                if let Some(why) = &series.skipped {
                    rep.fail(why.clone());
                }
                rep.put("points", series.points.len() as f64);
                rep.put("max_h1_over_energy", series.max_ratio);
                rep.put("max_cdsthm_C", series.max_cdsthm_c);
                let below = series.points.iter().filter(|p| p.h1_over_energy < 1.0 - 1e-8).count();
                rep.require(below == 0, || format!("{below} snapshots with h1 below L1"));
                let snaps = gauge_snaps.as_deref().unwrap_or(&[]);
                let violations: usize = snaps.iter().map(|s| s.lower_bound_violations).sum();
                let evaluated: usize = snaps.iter().map(|s| s.lower_bound_evaluated).sum();
                let min = snaps.iter().filter_map(|s| s.lower_bound_min_ratio).reduce(f64::min);
                rep.put("lower_bound_evaluated", evaluated as f64);
                rep.put("lower_bound_violations", violations as f64);
                rep.put("lower_bound_threshold", cfg.hardy.threshold);
                if let Some(m) = min {
                    rep.put("lower_bound_min_ratio", m);
                }
                rep.require(violations == 0, || {
                    format!("{violations} pointwise lower-bound ratios below {}", cfg.hardy.threshold)
                });
                rep.require(evaluated > 0, || "no lower-bound points evaluated".into());
                hardy_points = Some(series.points);
            }
        }
        let key = serde_json::to_value(check)?.as_str().unwrap_or_default().to_string();
        timing.checks_s.insert(key, t.elapsed().as_secs_f64());
        checks.push(rep);
    }

    let passed = checks.iter().all(|c| c.verdict != Verdict::Fail);
    let report = RunReport {
        artifact_version: ARTIFACT_VERSION.into(),
        config: cfg.clone(),
        mesh: MeshInfo::of(&mesh),
        feasibility: feas,
        trajectory: Some(TrajectorySummary::of(&traj)),
        checks,
        gauge: gauge_summary,
        hardy: hardy_points,
        passed,
    };
    timing.total_s = start.elapsed().as_secs_f64();
    Ok(ScenarioOutcome { report, timing, trajectory: Some(traj) })
}

fn ratio_max(snaps: &[GaugeSnapshot], h: f64, f: fn(&GaugeSnapshot) -> f64) -> f64 {
    snaps.iter().filter(|s| s.omega_l2 > 0.0).map(|s| f(s) / (h * s.omega_l2)).fold(0.0, f64::max)
}

/// Gauge diagnostics for a stored map (no time derivative available).
pub fn gauge_from_snapshot(cfg: &ScenarioConfig, t: f64, u: &Field) -> Result<(MeshInfo, GaugeSnapshot)> {
    let mesh = DiskMesh::build(cfg.refinement)?;
    u.check_vertices(mesh.num_vertices())?;
    let lap = Laplace::new(&mesh);
    let target = cfg.target.build()?;
    let snap = gauge_snapshot(&lap, &target, t, u, None, cfg)?;
    Ok((MeshInfo::of(&mesh), snap))
}

/// `h¹` norm of the energy density of a stored map.
pub fn hardy_from_snapshot(cfg: &ScenarioConfig, t: f64, u: &Field) -> Result<HardyPoint> {
    let mesh = DiskMesh::build(cfg.refinement)?;
    u.check_vertices(mesh.num_vertices())?;
    let lap = Laplace::new(&mesh);
    let est = HardyEstimator::new(&mesh)?;
    let dens = crate::elliptic::energy_density(&mesh, u)?;
    let h1 = est.h1_norm(&dens)?;
    let e_raw = crate::hardy::l1_cell(&mesh, &dens);
    let psi = crate::elliptic::psi_energy_density(&lap, u)?;
    Ok(HardyPoint {
        t,
        h1_density: h1,
        e_raw,
        h1_over_energy: if e_raw > 0.0 { h1 / e_raw } else { 0.0 },
        cdsthm_c: if h1 > 0.0 { (psi.linf + psi.grad_l2) / h1 } else { 0.0 },
    })
}
