//! Experiment configuration, read from TOML.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use strongdamp::geometry::SceneConfig;

use crate::error::RunError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    GeometryCheck,
    Spectrum,
    ResolventSweep,
    Estimates,
    Evolve,
    Smoothing,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::GeometryCheck => "geometry-check",
            Experiment::Spectrum => "spectrum",
            Experiment::ResolventSweep => "resolvent-sweep",
            Experiment::Estimates => "estimates",
            Experiment::Evolve => "evolve",
            Experiment::Smoothing => "smoothing",
        }
    }

    pub fn needs_seed(self) -> bool {
        matches!(self, Experiment::Estimates | Experiment::Smoothing)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `profile` uses the collar damping of the scene, `zero` forces `a ≡ 0`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Damping {
    #[default]
    Profile,
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepParams {
    pub samples: usize,
    /// Defaults to `γ_1²`.
    pub tau_min: Option<f64>,
    /// Defaults to `γ_K²/4`.
    pub tau_max: Option<f64>,
    pub s_in: f64,
    pub s_out: f64,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self { samples: 200, tau_min: None, tau_max: None, s_in: 0.0, s_out: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimateParams {
    pub s: f64,
    pub eps: f64,
    pub s_list: Vec<f64>,
    pub lambdas: usize,
    pub trials: usize,
}

impl Default for EstimateParams {
    fn default() -> Self {
        Self { s: 0.0, eps: 0.5, s_list: vec![0.0, 0.5, 1.0], lambdas: 20, trials: 5 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Datum {
    /// Slowest-decaying datum of `U(horizon)`.
    #[default]
    WorstCase,
    Random,
    /// Coefficients `γ_j^{-0.51}`, unit `L²` norm.
    Rough,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveParams {
    pub horizon: f64,
    pub dt: f64,
    pub fit_start: f64,
    pub datum: Datum,
    pub s_list: Vec<f64>,
}

impl Default for EvolveParams {
    fn default() -> Self {
        Self { horizon: 20.0, dt: 0.1, fit_start: 1.0, datum: Datum::WorstCase, s_list: vec![0.0, 1.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmoothingParams {
    pub seeds: usize,
    pub terms: usize,
    pub horizon: f64,
    pub s: f64,
    pub eps: f64,
    /// Relative slack of the frequency-domain bound.
    pub quadrature_tol: f64,
    pub rough_delta: f64,
    pub rough_times: Vec<f64>,
}

impl Default for SmoothingParams {
    fn default() -> Self {
        Self {
            seeds: 10,
            terms: 8,
            horizon: 10.0,
            s: 0.0,
            eps: 0.5,
            quadrature_tol: 0.05,
            rough_delta: 0.51,
            rough_times: vec![1.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareParams {
    pub lower: f64,
    pub upper: f64,
    /// Minimal ratio for metrics expected to diverge.
    pub growth: f64,
}

impl Default for CompareParams {
    fn default() -> Self {
        Self { lower: 0.5, upper: 2.0, growth: 2.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub experiment: Option<Experiment>,
    pub scene: SceneConfig,
    /// Grid nodes per unit length.
    pub n: u32,
    /// Retained modes.
    pub k: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Also run at `(2n, 2K)` and compare.
    #[serde(default)]
    pub refine: bool,
    #[serde(default)]
    pub damping: Damping,
    /// Directory for eigenbasis caches.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default)]
    pub sweep: SweepParams,
    #[serde(default)]
    pub estimates: EstimateParams,
    #[serde(default)]
    pub evolve: EvolveParams,
    #[serde(default)]
    pub smoothing: SmoothingParams,
    #[serde(default)]
    pub compare: CompareParams,
}

pub const PRESETS: &[&str] = &["paper-two-disc"];

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self, RunError> {
        match name {
            "paper-two-disc" => Ok(Self {
                experiment: None,
                scene: SceneConfig::paper_two_disc(),
                n: 32,
                k: 400,
                seed: Some(1),
                refine: false,
                damping: Damping::Profile,
                cache_dir: None,
                sweep: SweepParams::default(),
                estimates: EstimateParams::default(),
                evolve: EvolveParams::default(),
                smoothing: SmoothingParams::default(),
                compare: CompareParams::default(),
            }),
            _ => Err(RunError::Usage(format!("unknown preset `{name}` (known: {})", PRESETS.join(", ")))),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, RunError> {
        toml::from_str(text).map_err(|e| RunError::Usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Usage(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    /// The same experiment with twice the resolution and twice the modes.
    pub fn refined(&self) -> Self {
        Self { n: 2 * self.n, k: 2 * self.k, refine: false, ..self.clone() }
    }

    /// Checks every parameter; errors name the offending field.
    pub fn validate(&self) -> Result<(), RunError> {
        let exp = self.experiment.ok_or_else(|| bad("experiment", "missing"))?;
        self.scene.validate().map_err(|e| bad("scene", &e.to_string()))?;
        if self.n == 0 {
            return Err(bad("n", "must be at least 1"));
        }
        if self.k == 0 {
            return Err(bad("k", "must be at least 1"));
        }
        if exp.needs_seed() && self.seed.is_none() {
            return Err(bad("seed", &format!("required by `{exp}`")));
        }
        if exp == Experiment::Evolve && self.evolve.datum == Datum::Random && self.seed.is_none() {
            return Err(bad("seed", "required by the random datum"));
        }
        let sw = &self.sweep;
        if sw.samples < 2 {
            return Err(bad("sweep.samples", "must be at least 2"));
        }
        for (name, v) in [("sweep.tau_min", sw.tau_min), ("sweep.tau_max", sw.tau_max)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(bad(name, "must be positive"));
                }
            }
        }
        if let (Some(lo), Some(hi)) = (sw.tau_min, sw.tau_max) {
            if lo >= hi {
                return Err(bad("sweep.tau_max", "must exceed sweep.tau_min"));
            }
        }
        finite("sweep.s_in", sw.s_in)?;
        finite("sweep.s_out", sw.s_out)?;
        let es = &self.estimates;
        finite("estimates.s", es.s)?;
        unit_interval("estimates.eps", es.eps)?;
        if es.s_list.is_empty() {
            return Err(bad("estimates.s_list", "must not be empty"));
        }
        for (i, &s) in es.s_list.iter().enumerate() {
            finite(&format!("estimates.s_list[{i}]"), s)?;
        }
        if es.lambdas < 2 {
            return Err(bad("estimates.lambdas", "must be at least 2"));
        }
        if es.trials == 0 {
            return Err(bad("estimates.trials", "must be at least 1"));
        }
        let ev = &self.evolve;
        positive("evolve.horizon", ev.horizon)?;
        positive("evolve.dt", ev.dt)?;
        if !(ev.fit_start >= 1.0 && ev.fit_start < ev.horizon) {
            return Err(bad("evolve.fit_start", "must lie in [1, horizon)"));
        }
        let sm = &self.smoothing;
        if sm.seeds == 0 {
            return Err(bad("smoothing.seeds", "must be at least 1"));
        }
        if sm.terms == 0 {
            return Err(bad("smoothing.terms", "must be at least 1"));
        }
        positive("smoothing.horizon", sm.horizon)?;
        finite("smoothing.s", sm.s)?;
        unit_interval("smoothing.eps", sm.eps)?;
        if !(sm.quadrature_tol >= 0.0 && sm.quadrature_tol.is_finite()) {
            return Err(bad("smoothing.quadrature_tol", "must be nonnegative"));
        }
        positive("smoothing.rough_delta", sm.rough_delta)?;
        if sm.rough_times.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(bad("smoothing.rough_times", "entries must be positive"));
        }
        let cp = &self.compare;
        positive("compare.lower", cp.lower)?;
        if !(cp.upper >= cp.lower && cp.upper.is_finite()) {
            return Err(bad("compare.upper", "must be finite and at least compare.lower"));
        }
        positive("compare.growth", cp.growth)?;
        Ok(())
    }
}

fn bad(field: &str, msg: &str) -> RunError {
    RunError::Usage(format!("{field}: {msg}"))
}

fn finite(field: &str, v: f64) -> Result<(), RunError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(bad(field, "must be finite"))
    }
}

fn positive(field: &str, v: f64) -> Result<(), RunError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(field, "must be positive"))
    }
}

fn unit_interval(field: &str, v: f64) -> Result<(), RunError> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(bad(field, "must lie in (0, 1]"))
    }
}
