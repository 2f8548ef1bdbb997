//! Intermediate JSON artifacts passed between CLI stages.

use std::path::Path;

use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::SplitSet;
use crate::io::dataset::Dataset;
use crate::trainer::{TrainConfig, TrainHistory};

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("artifact serializes");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })
}

/// A split together with the id tables needed to report original ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitArtifact {
    pub dataset: String,
    pub users: Vec<String>,
    pub items: Vec<String>,
    pub splits: SplitSet,
}

impl SplitArtifact {
    pub fn new(name: &str, dataset: &Dataset, splits: SplitSet) -> Self {
        Self {
            dataset: name.to_string(),
            users: dataset.users.clone(),
            items: dataset.items.clone(),
            splits,
        }
    }
}

/// A trained model: the scoring representation and how it was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub config: TrainConfig,
    pub negative_seed: u64,
    pub history: TrainHistory,
    pub representation: Vec<Vec<f64>>,
}

impl ModelArtifact {
    pub fn representation(&self) -> Result<Array2<f64>> {
        let rows = self.representation.len();
        let cols = self.representation.first().map_or(0, Vec::len);
        if self.representation.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidConfig("ragged representation".into()));
        }
        let flat: Vec<f64> = self.representation.iter().flatten().copied().collect();
        Array2::from_shape_vec((rows, cols), flat).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn rows_of(x: &Array2<f64>) -> Vec<Vec<f64>> {
        x.rows().into_iter().map(|r| r.to_vec()).collect()
    }
}
