//! Model checkpoints (`.ckpt.json`): the trained parameters together with
//! the configuration, level names and seed that produced them.

use std::fs;
use std::path::Path;

use protograde::dataset::LevelSchema;
use protograde::model::{HeadKind, HeadModel};
use protograde::trainer::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::json::{self, Floats};

pub const SCHEMA: &str = "proto-grade-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub schema: String,
    pub seed: u64,
    pub config: TrainConfig,
    pub levels: LevelSchema,
    pub input_dim: usize,
    pub projected_dim: usize,
    pub head: HeadKind,
    pub model: HeadModel,
}

impl Checkpoint {
    pub fn new(config: TrainConfig, levels: LevelSchema, model: HeadModel) -> Self {
        Checkpoint {
            schema: SCHEMA.into(),
            seed: config.seed,
            config,
            levels,
            input_dim: model.input_dim,
            projected_dim: model.projection.output_dim(),
            head: model.head_kind(),
            model,
        }
    }

    /// Checks the schema tag and that the descriptive fields agree with
    /// the stored model.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema != SCHEMA {
            return Err(CliError::Data(format!(
                "unsupported checkpoint schema '{}', expected '{SCHEMA}'",
                self.schema
            )));
        }
        self.model.validate()?;
        let m = &self.model;
        let checks = [
            ("levels", self.levels.len(), m.levels),
            ("input_dim", self.input_dim, m.input_dim),
            ("projected_dim", self.projected_dim, m.projection.output_dim()),
        ];
        for (field, declared, actual) in checks {
            if declared != actual {
                return Err(CliError::Data(format!(
                    "checkpoint {field} is {declared} but the stored model has {actual}"
                )));
            }
        }
        if self.head != m.head_kind() {
            return Err(CliError::Data(format!(
                "checkpoint head is {} but the stored model is {}",
                self.head,
                m.head_kind()
            )));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, CliError> {
        json::to_file_bytes(self, Floats::Exact)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, CliError> {
        let ckpt: Checkpoint =
            serde_json::from_slice(bytes).map_err(|e| CliError::Data(format!("bad checkpoint: {e}")))?;
        ckpt.validate()?;
        Ok(ckpt)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        Checkpoint::from_slice(&bytes).map_err(|e| e.context(path.display()))
    }

    /// Rejects data whose level names or width differ from the model's.
    pub fn check_compatible(&self, levels: &LevelSchema, dim: usize) -> Result<(), CliError> {
        if levels != &self.levels {
            return Err(CliError::Data(format!(
                "data levels [{}] differ from model levels [{}]",
                levels.names().join(", "),
                self.levels.names().join(", ")
            )));
        }
        if dim != self.input_dim {
            return Err(CliError::Data(format!(
                "model expects input dim {} but data has dim {dim}",
                self.input_dim
            )));
        }
        Ok(())
    }
}
