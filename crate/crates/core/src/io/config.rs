//! Run configuration: a sectioned TOML file plus `section.key=value`
//! overrides. Every key has a default; see [`RunConfig::default`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NormScheme;
use crate::io::dataset::{EdgeFormat, ExpectedStats};
use crate::io::split::DEFAULT_RATIOS;
use crate::negative::SamplingStrategy;
use crate::objectives::{Model, DEFAULT_DROP_TOL};
use crate::trainer::{Grid, TrainConfig, TrainPath};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub path: PathBuf,
    pub format: EdgeFormat,
    /// Defaults to the file stem.
    pub name: Option<String>,
    /// Certify the loaded graph against these statistics before training.
    pub expected: Option<ExpectedStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub ratios: [f64; 3],
    pub seed: u64,
}

impl Default for SplitSection {
    fn default() -> Self {
        Self {
            ratios: DEFAULT_RATIOS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyChoice {
    /// Degree^0.75 noise for LINE, uniform for the rest.
    #[default]
    Auto,
    Uniform,
    DegreePower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSection {
    pub strategy: StrategyChoice,
    pub exponent: f64,
    /// Negative pairs per positive edge.
    pub ratio: usize,
    pub seed: u64,
    pub resample: bool,
}

impl Default for SamplingSection {
    fn default() -> Self {
        Self {
            strategy: StrategyChoice::Auto,
            exponent: 0.75,
            ratio: 1,
            seed: 0,
            resample: false,
        }
    }
}

impl SamplingSection {
    pub fn strategy_for(&self, model: Model) -> SamplingStrategy {
        match (self.strategy, model) {
            (StrategyChoice::Uniform, _) => SamplingStrategy::Uniform,
            (StrategyChoice::DegreePower, _) => SamplingStrategy::DegreePower {
                exponent: self.exponent,
            },
            (StrategyChoice::Auto, Model::Line) => SamplingStrategy::LINE_NOISE,
            (StrategyChoice::Auto, _) => SamplingStrategy::Uniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub dim: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub path: TrainPath,
    pub init_scale: f64,
    pub seed: u64,
    pub eval_every: usize,
    pub trace_substeps: bool,
    pub drop_tol: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            alpha: t.alpha,
            beta: t.beta,
            lambda: t.lambda,
            dim: t.dim,
            max_epochs: t.max_epochs,
            patience: t.patience,
            path: t.path,
            init_scale: t.init_scale,
            seed: 0,
            eval_every: t.eval_every,
            trace_substeps: false,
            drop_tol: DEFAULT_DROP_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// `mf`, `line`, `deepwalk[:window]`, `lightgcn[:layers]`.
    pub names: Vec<String>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            names: vec!["mf".into(), "lightgcn:3".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub enabled: bool,
    pub alphas: Vec<f64>,
    pub layers: Vec<usize>,
}

impl Default for GridSection {
    fn default() -> Self {
        let g = Grid::standard();
        Self {
            enabled: false,
            alphas: g.alphas,
            layers: g.layers,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub k: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { k: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub trajectories: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            trajectories: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub repetitions: usize,
    /// Worker threads; `None` leaves the choice to the caller.
    pub threads: Option<usize>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            repetitions: 5,
            threads: None,
        }
    }
}

/// Replacement normalizations of the kernel masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    pub pos_norm: Option<NormScheme>,
    pub neg_norm: Option<NormScheme>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    pub split: SplitSection,
    pub sampling: SamplingSection,
    pub train: TrainSection,
    pub model: ModelSection,
    pub grid: GridSection,
    pub eval: EvalSection,
    pub output: OutputSection,
    pub run: RunSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSection>,
}

impl RunConfig {
    pub fn models(&self) -> Result<Vec<Model>> {
        self.model.names.iter().map(|n| n.parse()).collect()
    }

    pub fn dataset_name(&self) -> String {
        self.data.name.clone().unwrap_or_else(|| {
            self.data
                .path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into())
        })
    }

    /// Training settings for one model and repetition.
    pub fn train_config(&self, model: Model, repetition: usize) -> TrainConfig {
        let t = &self.train;
        let k = self.kernel.unwrap_or_default();
        TrainConfig {
            model,
            alpha: t.alpha,
            beta: t.beta,
            lambda: t.lambda,
            dim: t.dim,
            max_epochs: t.max_epochs,
            patience: t.patience,
            path: t.path,
            init_scale: t.init_scale,
            init_seed: t.seed.wrapping_add(repetition as u64),
            eval_every: t.eval_every,
            trace_substeps: t.trace_substeps,
            drop_tol: t.drop_tol,
            pos_norm: k.pos_norm,
            neg_norm: k.neg_norm,
            resample_negatives: self.sampling.resample,
        }
    }

    pub fn grid(&self) -> Grid {
        Grid {
            alphas: self.grid.alphas.clone(),
            layers: self.grid.layers.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.data.path.as_os_str().is_empty() {
            return bad("data.path is not set".into());
        }
        if !self.data.path.is_file() {
            return bad(format!("data.path {} does not exist", self.data.path.display()));
        }
        if self.run.repetitions == 0 {
            return bad("run.repetitions must be >= 1".into());
        }
        if self.run.threads == Some(0) {
            return bad("run.threads must be >= 1".into());
        }
        if self.eval.k == 0 {
            return bad("eval.k must be >= 1".into());
        }
        if self.sampling.ratio == 0 {
            return bad("sampling.ratio must be >= 1".into());
        }
        if self.model.names.is_empty() {
            return bad("model.names is empty".into());
        }
        if self.grid.enabled && self.grid.alphas.is_empty() {
            return bad("grid.alphas is empty".into());
        }
        for m in self.models()? {
            self.train_config(m, 0).validate()?;
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with(text, &[])
    }

    /// Parses `text` after applying `section.key=value` overrides. Values
    /// are read as TOML literals, falling back to plain strings.
    pub fn from_toml_with(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        for (key, raw) in overrides {
            set_dotted(&mut table, key, parse_value(raw))?;
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::InvalidConfig(e.to_string()))
    }

    /// Reads a config file; a relative `data.path` is taken relative to the
    /// file's directory.
    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_with(&text, overrides)?;
        let data_overridden = overrides.iter().any(|(k, _)| k == "data.path");
        if cfg.data.path.is_relative() && !data_overridden {
            if let Some(dir) = path.parent() {
                cfg.data.path = dir.join(&cfg.data.path);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::InvalidConfig(format!("malformed key `{key}`")));
    }
    let (last, path) = parts.split_last().expect("non-empty");
    let mut cur = table;
    for p in path {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::InvalidConfig(format!("`{p}` in `{key}` is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// `key=value` as used on the command line.
pub fn parse_override(arg: &str) -> Result<(String, String)> {
    arg.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| Error::InvalidConfig(format!("override `{arg}` is not key=value")))
}
