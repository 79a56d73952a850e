//! JSON persistence of trained models.
//!
//! Floats are written with serde_json's shortest round-trip formatting and
//! parsed back exactly, so a reloaded model predicts bit-identically.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::ScalingTransform;
use crate::error::{EemError, Result};
use crate::eval::{Algorithm, ModelConfig, TrainedModel};
use crate::linalg::Matrix;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub dataset: String,
    pub n_train: usize,
    pub config: ModelConfig,
    pub seed: u64,
    /// Seconds since the Unix epoch; only written on request so that equal
    /// inputs give byte-identical files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_unix: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub algorithm: Algorithm,
    /// Feature scaling fitted on the training data, applied before the map.
    pub scaler: Option<ScalingTransform>,
    pub model: TrainedModel,
    pub metadata: Metadata,
}

impl ModelFile {
    pub fn new(model: TrainedModel, scaler: Option<ScalingTransform>, metadata: Metadata) -> ModelFile {
        ModelFile {
            format_version: FORMAT_VERSION,
            algorithm: metadata.config.algorithm,
            scaler,
            model,
            metadata,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<ModelFile> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format_version != FORMAT_VERSION {
            return Err(EemError::ModelFile(format!(
                "unsupported format version {} (expected {FORMAT_VERSION})",
                file.format_version
            )));
        }
        Ok(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ModelFile> {
        ModelFile::from_json(&fs::read_to_string(path)?)
    }

    /// Applies the stored scaler, if any.
    pub fn prepare(&self, x: &Matrix) -> Result<Matrix> {
        match &self.scaler {
            Some(s) => s.apply(x),
            None => Ok(x.clone()),
        }
    }
}
