//! Scenario configuration: JSON with defaults, unknown keys rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{Scheme, TimestepPolicy};
use crate::gauge::AbOptions;
use crate::manifold::TargetManifold;
use crate::mesh::MAX_REFINEMENT;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetConfig {
    Sphere {
        #[serde(default = "default_sphere_n")]
        n: usize,
    },
    Torus3 {
        #[serde(rename = "R")]
        major: f64,
        #[serde(rename = "r")]
        minor: f64,
    },
    Clifford,
}

fn default_sphere_n() -> usize {
    3
}

impl TargetConfig {
    pub fn build(&self) -> Result<TargetManifold> {
        match *self {
            TargetConfig::Sphere { n } => TargetManifold::sphere(n),
            TargetConfig::Torus3 { major, minor } => TargetManifold::torus(major, minor),
            TargetConfig::Clifford => Ok(TargetManifold::Clifford),
        }
    }
}

/// One Fourier mode of the boundary curve before projection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierTerm {
    pub k: u32,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryConfig {
    /// `χ(θ) = π(p + δ(cos θ e₁ + sin θ e₂))` with `p` the target's base point
    /// and `e₁, e₂` its first tangent vectors there.
    Cap { delta: f64 },
    /// `χ(θ) = π(p + Σ_k cos(kθ) a_k + sin(kθ) b_k)`.
    Fourier { coeffs: Vec<FourierTerm> },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Perturbation {
    /// Amplitude of the interior bump `a (1 - |x|^2) (c₀ + c₁x + c₂y)`, with
    /// unit vectors `c_i` drawn from the seed. Shrunk by 0.9 until the initial
    /// energy is below `ε₀`.
    pub amplitude: f64,
}

impl Default for Perturbation {
    fn default() -> Self {
        Perturbation { amplitude: 0.1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Convexity,
    UtMonotone,
    DecayIdentity,
    CrossTerm,
    Gauge,
    Hardy,
    Cauchy,
}

impl Check {
    pub const ALL: [Check; 7] = [
        Check::Convexity,
        Check::UtMonotone,
        Check::DecayIdentity,
        Check::CrossTerm,
        Check::Gauge,
        Check::Hardy,
        Check::Cauchy,
    ];

    fn all() -> Vec<Check> {
        Self::ALL.to_vec()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairOptions {
    pub count: usize,
    pub slack: f64,
    /// Sampling window; defaults to `[T₀, t_active]` where `t_active` is the
    /// last snapshot whose energy still exceeds the final one by a relative
    /// `1e-9`.
    pub window: Option<[f64; 2]>,
}

impl Default for PairOptions {
    fn default() -> Self {
        PairOptions { count: 50, slack: 0.05, window: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaugeConfig {
    /// Late snapshots analysed, spread evenly from `T₀` to the end.
    pub snapshots: usize,
    pub probes: usize,
    pub ab: AbOptions,
}

impl Default for GaugeConfig {
    fn default() -> Self {
        GaugeConfig { snapshots: 3, probes: 40, ab: AbOptions::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HardyConfig {
    pub snapshots: usize,
    pub probes: usize,
    /// Pointwise lower-bound ratios below this count as violations.
    pub threshold: f64,
}

impl Default for HardyConfig {
    fn default() -> Self {
        HardyConfig { snapshots: 4, probes: 40, threshold: 0.20 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// `|2∫∫|u_t|^2 - (E(t1) - E(t2))| ≤ decay · (τ + h) · (E(t1) - E(t2))`
    pub decay: f64,
    /// Cross term passes when `lhs ≤ cross_term · rhs`.
    pub cross_term: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { decay: 2.0, cross_term: 0.25 }
    }
}

fn default_refinement() -> u32 {
    4
}
fn default_epsilon0() -> f64 {
    0.1
}
fn default_scheme() -> Scheme {
    Scheme::TangentPlane
}
fn default_snapshot_interval() -> f64 {
    0.1
}
fn default_output_interval() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub target: TargetConfig,
    pub boundary: BoundaryConfig,
    #[serde(default = "default_refinement")]
    pub refinement: u32,
    #[serde(default)]
    pub timestep: TimestepPolicy,
    pub t_end: f64,
    #[serde(default = "default_epsilon0")]
    pub epsilon0: f64,
    #[serde(default = "Check::all")]
    pub checks: Vec<Check>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub perturbation: Perturbation,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "default_snapshot_interval")]
    pub snapshot_interval: f64,
    /// Spacing of the snapshot files written next to the report.
    #[serde(default = "default_output_interval")]
    pub output_interval: f64,
    #[serde(default)]
    pub pairs: PairOptions,
    /// Out-of-hypothesis probes are reported but never gate the exit code.
    #[serde(default)]
    pub exploratory: bool,
    #[serde(default)]
    pub gauge: GaugeConfig,
    #[serde(default)]
    pub hardy: HardyConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        positive("epsilon0", self.epsilon0)?;
        if !(self.t_end.is_finite() && self.t_end > 1.0) {
            return Err(Error::Config(format!("t_end must exceed 1, got {}", self.t_end)));
        }
        if self.refinement > MAX_REFINEMENT {
            return Err(Error::Config(format!("refinement {} exceeds {MAX_REFINEMENT}", self.refinement)));
        }
        positive("snapshot_interval", self.snapshot_interval)?;
        positive("output_interval", self.output_interval)?;
        if !(0.0..0.25).contains(&self.pairs.slack) {
            return Err(Error::Config(format!("pairs.slack must lie in [0, 0.25), got {}", self.pairs.slack)));
        }
        if let Some([a, b]) = self.pairs.window {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::Config(format!("pairs.window [{a}, {b}] is not an interval")));
            }
        }
        if !(self.perturbation.amplitude.is_finite() && self.perturbation.amplitude >= 0.0) {
            return Err(Error::Config("perturbation.amplitude must be non-negative".into()));
        }
        for (i, c) in self.checks.iter().enumerate() {
            if self.checks[..i].contains(c) {
                return Err(Error::Config(format!("check {c:?} listed twice")));
            }
        }
        let target = self.target.build().map_err(|e| Error::Config(e.to_string()))?;
        let n = target.ambient_dim();
        match &self.boundary {
            BoundaryConfig::Cap { delta } => {
                if !(delta.is_finite() && *delta >= 0.0) {
                    return Err(Error::Config(format!("cap delta must be non-negative, got {delta}")));
                }
            }
            BoundaryConfig::Fourier { coeffs } => {
                for term in coeffs {
                    for (label, v) in [("cos", &term.cos), ("sin", &term.sin)] {
                        if !v.is_empty() && v.len() != n {
                            return Err(Error::Config(format!(
                                "fourier mode {} has {} {label} entries, target lives in R^{n}",
                                term.k,
                                v.len()
                            )));
                        }
                        if v.iter().any(|x| !x.is_finite()) {
                            return Err(Error::Config(format!("fourier mode {} is not finite", term.k)));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Name for output directories: the configured name or the file stem.
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| "scenario".into())
    }
}

/// Reads and validates a config; `HEATFLOW_SEED` overrides the seed.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    let mut cfg = ScenarioConfig::from_json(&text).map_err(|e| {
        Error::Config(format!("{}: {}", path.display(), e.to_string().trim_start_matches("config error: ")))
    })?;
    if cfg.name.is_none() {
        cfg.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    }
    if let Ok(s) = std::env::var("HEATFLOW_SEED") {
        cfg.seed =
            s.trim().parse().map_err(|_| Error::Config(format!("HEATFLOW_SEED is not an unsigned integer: {s:?}")))?;
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ScenarioConfig::from_json(
            r#"{"target": {"kind": "sphere"}, "boundary": {"family": "cap", "delta": 0.2},
                "refinement": 3, "t_end": 10}"#,
        )
        .unwrap();
        assert_eq!(cfg.epsilon0, 0.1);
        assert_eq!(cfg.checks.len(), 7);
        assert_eq!(cfg.target, TargetConfig::Sphere { n: 3 });
        assert_eq!(cfg.scheme, Scheme::TangentPlane);
    }

    #[test]
    fn rejects_bad_values_and_keys() {
        let base = r#""target": {"kind": "sphere"}, "boundary": {"family": "cap", "delta": 0.2}, "t_end": 10"#;
        let e = ScenarioConfig::from_json(&format!("{{{base}, \"epsilon0\": -1}}")).unwrap_err();
        assert!(e.to_string().contains("epsilon0"));
        let e = ScenarioConfig::from_json(&format!("{{{base}, \"epsilon0_typo\": 0.1}}")).unwrap_err();
        assert!(e.to_string().contains("epsilon0_typo"), "{e}");
        let e = ScenarioConfig::from_json(&format!("{{{base}, \"checks\": [\"hardy\", \"hardy\"]}}")).unwrap_err();
        assert!(e.to_string().contains("twice"));
        let e = ScenarioConfig::from_json(
            r#"{"target": {"kind": "sphere"}, "boundary": {"family": "cap", "delta": 0.2}, "t_end": 0.5}"#,
        )
        .unwrap_err();
        assert!(e.to_string().contains("t_end"));
    }

    #[test]
    fn torus_and_fourier_parse() {
        let cfg = ScenarioConfig::from_json(
            r#"{"target": {"kind": "torus3", "R": 2.0, "r": 0.5},
                "boundary": {"family": "fourier", "coeffs": [{"k": 1, "cos": [0, 0.1, 0], "sin": [0, 0, 0.1]}]},
                "t_end": 5}"#,
        )
        .unwrap();
        assert_eq!(cfg.target, TargetConfig::Torus3 { major: 2.0, minor: 0.5 });
        let e = ScenarioConfig::from_json(
            r#"{"target": {"kind": "clifford"}, "boundary": {"family": "fourier", "coeffs": [{"k": 1, "cos": [1, 0]}]}, "t_end": 5}"#,
        )
        .unwrap_err();
        assert!(e.to_string().contains("R^4"));
    }
}
