//! Experiment report: JSON document, metrics CSV and a plain-text table.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::EvalResult;
use crate::io::config::RunConfig;
use crate::io::dataset::{DatasetStats, ExpectedStats};
use crate::trainer::{GridSearch, StopReason, TrainConfig};

pub const SCHEMA_VERSION: u32 = 1;
pub const METRICS_HEADER: &str = "dataset,model,seed,K,precision,recall,ndcg";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub expected: ExpectedStats,
    pub passed: bool,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSection {
    pub name: String,
    pub path: String,
    pub sha256: String,
    pub stats: DatasetStats,
    pub verification: Option<Verification>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub ratios: [f64; 3],
    pub seed: u64,
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    pub flagged_users: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub repetition: usize,
    pub init_seed: u64,
    pub negative_seed: u64,
    pub negatives: usize,
    pub stop_epoch: usize,
    pub stop_reason: StopReason,
    pub best_epoch: Option<usize>,
    pub best_validation: Option<f64>,
    pub test: EvalResult,
    /// Relative to the report directory.
    pub trajectory: Option<String>,
    pub max_divergence: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub precision: f64,
    pub recall: f64,
    pub ndcg: f64,
}

impl MeanMetrics {
    pub fn of(rows: &[RunRow]) -> Self {
        let n = rows.len().max(1) as f64;
        let sum = |f: fn(&EvalResult) -> f64| rows.iter().map(|r| f(&r.test)).sum::<f64>() / n;
        Self {
            precision: sum(|t| t.precision),
            recall: sum(|t| t.recall),
            ndcg: sum(|t| t.ndcg),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: String,
    pub grid: Option<GridSearch>,
    pub chosen: TrainConfig,
    pub runs: Vec<RunRow>,
    pub mean: MeanMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool_version: String,
    pub threads: usize,
    pub dataset: DatasetSection,
    pub split: SplitSummary,
    pub k: usize,
    pub models: Vec<ModelReport>,
    pub config: RunConfig,
}

fn in_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} = {v} outside [0, 1]")))
    }
}

impl Report {
    /// Structural checks: metric ranges, row counts, means, and that every
    /// referenced trajectory file exists under `dir`.
    pub fn validate(&self, dir: Option<&Path>) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(format!("report: {m}")));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema version {}", self.schema_version));
        }
        if self.models.is_empty() {
            return bad("no models".into());
        }
        in_unit("density", self.dataset.stats.density)?;
        for m in &self.models {
            if m.runs.len() != self.config.run.repetitions {
                return bad(format!(
                    "{}: {} runs for {} repetitions",
                    m.model,
                    m.runs.len(),
                    self.config.run.repetitions
                ));
            }
            for r in &m.runs {
                if r.test.k != self.k {
                    return bad(format!("{}: K = {} differs from {}", m.model, r.test.k, self.k));
                }
                in_unit("precision", r.test.precision)?;
                in_unit("recall", r.test.recall)?;
                in_unit("ndcg", r.test.ndcg)?;
                if let (Some(t), Some(dir)) = (&r.trajectory, dir) {
                    if !dir.join(t).is_file() {
                        return bad(format!("missing trajectory file {t}"));
                    }
                }
            }
            let mean = MeanMetrics::of(&m.runs);
            if mean != m.mean {
                return bad(format!("{}: mean does not match its runs", m.model));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("report: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// One row per model and repetition, then one `mean` row per model.
    pub fn metrics_csv(&self) -> String {
        let mut out = format!("{METRICS_HEADER}\n");
        let name = &self.dataset.name;
        for m in &self.models {
            for r in &m.runs {
                let _ = writeln!(
                    out,
                    "{name},{},{},{},{},{},{}",
                    m.model, r.init_seed, r.test.k, r.test.precision, r.test.recall, r.test.ndcg
                );
            }
            let _ = writeln!(
                out,
                "{name},{},mean,{},{},{},{}",
                m.model, self.k, m.mean.precision, m.mean.recall, m.mean.ndcg
            );
        }
        out
    }

    pub fn table(&self) -> String {
        let k = self.k;
        let s = &self.dataset.stats;
        let mut out = format!(
            "dataset {} ({} nodes, {} links, density {:.3}%)\n",
            self.dataset.name,
            s.nodes,
            s.links,
            100.0 * s.density
        );
        if let Some(v) = &self.dataset.verification {
            let _ = writeln!(
                out,
                "statistics check: {}{}",
                if v.passed { "pass" } else { "FAIL" },
                v.detail.as_deref().map(|d| format!(" ({d})")).unwrap_or_default()
            );
        }
        let _ = writeln!(
            out,
            "{:<14} {:>5} {:>12} {:>12} {:>12}",
            "model",
            "runs",
            format!("P@{k}"),
            format!("R@{k}"),
            format!("NDCG@{k}")
        );
        for m in &self.models {
            let _ = writeln!(
                out,
                "{:<14} {:>5} {:>12.4} {:>12.4} {:>12.4}",
                m.model,
                m.runs.len(),
                m.mean.precision,
                m.mean.recall,
                m.mean.ndcg
            );
        }
        out
    }
}
