use serde::{Deserialize, Serialize};

use super::config::HiNetConfig;
use super::network::{Architecture, Model};
use crate::autodiff::ParamRecord;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "netcausal-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub architecture: Architecture,
    pub config: HiNetConfig,
    pub input_dim: usize,
    /// Estimator label the model was trained for, e.g. `hinet_no_gin_t`.
    pub estimator: String,
}

/// Serialized model: header plus every parameter in creation order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub header: CheckpointHeader,
    pub params: Vec<ParamRecord>,
}

impl Checkpoint {
    pub fn from_model(model: &Model, estimator: impl Into<String>) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            header: CheckpointHeader {
                architecture: model.architecture(),
                config: *model.config(),
                input_dim: model.input_dim(),
                estimator: estimator.into(),
            },
            params: model.params().to_records(),
        }
    }

    /// Rebuilds the model, checking every parameter against the layout the
    /// header implies.
    pub fn to_model(&self) -> Result<Model> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::format(
                "checkpoint",
                format!("unknown format tag {:?}", self.format),
            ));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::format(
                "checkpoint",
                format!("unsupported version {}", self.version),
            ));
        }
        let h = &self.header;
        let mut model = Model::new(h.architecture, h.config, h.input_dim)?;
        model.params_mut().load_records(&self.params)?;
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
