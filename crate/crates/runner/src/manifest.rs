//! Run manifests, atomic output and refinement comparison.

use std::collections::BTreeMap;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use tempfile::NamedTempFile;

use crate::config::{CompareParams, Damping};
use crate::error::RunError;

/// How a metric is expected to behave under refinement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expect {
    Stable,
    Divergent,
    Info,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub value: f64,
    pub expect: Expect,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    pub version: String,
    pub config_hash: String,
    pub scene_hash: String,
    pub n: u32,
    pub k: usize,
    pub h: Option<f64>,
    pub seed: Option<u64>,
    pub damping: Damping,
    pub compare: CompareParams,
    pub timings: Vec<Timing>,
    /// Paths relative to the manifest's directory.
    pub outputs: Vec<String>,
    pub metrics: BTreeMap<String, Metric>,
    pub assertions: Vec<Assertion>,
}

impl RunManifest {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).map(|m| m.value)
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Usage(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| RunError::Usage(format!("{}: {e}", path.display())))
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> Result<(), RunError>) -> Result<(), RunError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w)?;
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| RunError::Io(e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(|e| RunError::Io(e.into()))?;
        writeln!(w)?;
        Ok(())
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRatio {
    pub name: String,
    pub coarse: f64,
    pub fine: f64,
    /// `fine / coarse`.
    pub ratio: f64,
    pub expect: Expect,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub experiment: String,
    pub levels: [(u32, usize); 2],
    pub thresholds: CompareParams,
    pub ratios: Vec<MetricRatio>,
    pub all_ok: bool,
}

/// Ratio of two metric values; two zeros compare equal.
pub fn ratio(coarse: f64, fine: f64) -> f64 {
    if coarse == fine {
        1.0
    } else {
        fine / coarse
    }
}

/// Per-metric ratios between two runs of the same experiment. Stable metrics
/// pass inside `[lower, upper]`, divergent ones at or above `growth`.
pub fn compare_refinements(a: &RunManifest, b: &RunManifest) -> Result<Comparison, RunError> {
    if a.experiment != b.experiment {
        return Err(RunError::Compare(format!("experiments differ: {} vs {}", a.experiment, b.experiment)));
    }
    if a.scene_hash != b.scene_hash {
        return Err(RunError::Compare("scenes differ".into()));
    }
    if a.damping != b.damping {
        return Err(RunError::Compare("damping modes differ".into()));
    }
    let (coarse, fine) = if (b.n, b.k) < (a.n, a.k) { (b, a) } else { (a, b) };
    let th = coarse.compare.clone();
    let mut ratios = Vec::new();
    for (name, m) in &coarse.metrics {
        if m.expect == Expect::Info {
            continue;
        }
        let Some(f) = fine.metrics.get(name) else {
            return Err(RunError::Compare(format!("metric `{name}` missing from the finer run")));
        };
        let r = ratio(m.value, f.value);
        let passed = match m.expect {
            Expect::Stable => r.is_finite() && r >= th.lower && r <= th.upper,
            Expect::Divergent => r >= th.growth,
            Expect::Info => true,
        };
        ratios.push(MetricRatio {
            name: name.clone(),
            coarse: m.value,
            fine: f.value,
            ratio: r,
            expect: m.expect,
            passed,
        });
    }
    let all_ok = ratios.iter().all(|r| r.passed);
    Ok(Comparison {
        experiment: coarse.experiment.clone(),
        levels: [(coarse.n, coarse.k), (fine.n, fine.k)],
        thresholds: th,
        ratios,
        all_ok,
    })
}
