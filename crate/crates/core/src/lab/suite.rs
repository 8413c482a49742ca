use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{load_config, run_scenario, Check, RunReport};
use crate::error::{Error, Result};
use crate::par::{map_indexed, with_jobs, Exec};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub config: String,
    pub exploratory: bool,
    pub passed: bool,
    /// Failed check names, `feasibility`, or `crash`.
    pub failures: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    pub report: Option<RunReport>,
}

/// Suite-wide maxima (minima for the convexity ratio) over non-exploratory
/// scenarios.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SuiteConstants {
    pub min_convexity_ratio: Option<f64>,
    pub max_cross_term_constant: Option<f64>,
    #[serde(rename = "B_sup_ratio")]
    pub b_sup_ratio: Option<f64>,
    pub p_osc_ratio: Option<f64>,
    pub h1_over_energy: Option<f64>,
    #[serde(rename = "cdsthm_C")]
    pub cdsthm_c: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteReport {
    pub entries: Vec<SuiteEntry>,
    pub constants: SuiteConstants,
    pub passed: bool,
}

impl SuiteReport {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }
}

fn fold(acc: &mut Option<f64>, v: Option<f64>, f: fn(f64, f64) -> f64) {
    if let Some(v) = v {
        *acc = Some(acc.map_or(v, |a| f(a, v)));
    }
}

fn measured(r: &RunReport, c: Check, key: &str) -> Option<f64> {
    r.check(c).and_then(|c| c.measured.get(key).copied())
}

fn run_one(path: &Path, out: Option<&Path>) -> SuiteEntry {
    let name = path.display().to_string();
    let crash = |e: Error, exploratory| SuiteEntry {
        config: name.clone(),
        exploratory,
        passed: false,
        failures: vec!["crash".into()],
        error: Some(e.to_string()),
        report: None,
    };
    let cfg = match load_config(path) {
        Ok(c) => c,
        Err(e) => return crash(e, false),
    };
    let outcome = match run_scenario(&cfg) {
        Ok(o) => o,
        Err(e) => return crash(e, cfg.exploratory),
    };
    if let Some(dir) = out {
        if let Err(e) = outcome.write(&dir.join(cfg.label())) {
            return crash(e, cfg.exploratory);
        }
    }
    let report = outcome.report;
    SuiteEntry {
        config: name,
        exploratory: cfg.exploratory,
        passed: report.passed && report.feasibility.feasible,
        failures: report.failures(),
        error: None,
        report: Some(report),
    }
}

/// Runs every `*.json` config in `dir` (sorted by name), `jobs` at a time.
/// Each scenario's report goes to `out/<name>/` when `out` is given.
pub fn verify_suite(dir: &Path, jobs: usize, out: Option<&Path>) -> Result<SuiteReport> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::Usage(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    if paths.is_empty() {
        return Err(Error::Usage(format!("{} contains no scenario configs", dir.display())));
    }
    paths.sort();
    let entries = with_jobs(jobs.max(1), || map_indexed(Exec::Auto, paths.len(), |i| run_one(&paths[i], out)));

    let mut k = SuiteConstants::default();
    for r in entries.iter().filter(|e| !e.exploratory).filter_map(|e| e.report.as_ref()) {
        fold(&mut k.min_convexity_ratio, measured(r, Check::Convexity, "min_ratio"), f64::min);
        fold(&mut k.max_cross_term_constant, measured(r, Check::CrossTerm, "max_constant"), f64::max);
        if let Some(g) = &r.gauge {
            fold(&mut k.b_sup_ratio, Some(g.b_sup_ratio), f64::max);
            fold(&mut k.p_osc_ratio, Some(g.p_osc_ratio), f64::max);
        }
        fold(&mut k.h1_over_energy, measured(r, Check::Hardy, "max_h1_over_energy"), f64::max);
        fold(&mut k.cdsthm_c, measured(r, Check::Hardy, "max_cdsthm_C"), f64::max);
    }
    let passed = entries.iter().all(|e| e.exploratory || e.passed);
    Ok(SuiteReport { entries, constants: k, passed })
}
