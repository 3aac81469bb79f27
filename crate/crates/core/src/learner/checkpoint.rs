//! JSON checkpoints for [`ModelParameters`].
//!
//! ```json
//! {"format": "hcr-checkpoint", "version": 1,
//!  "shape": {"input_dim": 16, "hidden": [128], "output_dim": 32},
//!  "params": { ...ModelParameters... }}
//! ```
//!
//! The shape header is redundant with the layer buffers and is checked on load.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ModelParameters;
use crate::error::{HcrError, Result};

pub const FORMAT: &str = "hcr-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shape {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub shape: Shape,
    pub params: ModelParameters,
}

impl Checkpoint {
    pub fn new(params: ModelParameters) -> Self {
        Self {
            format: FORMAT.to_string(),
            version: VERSION,
            shape: Shape {
                input_dim: params.input_dim(),
                hidden: params.hidden_dims(),
                output_dim: params.output_dim(),
            },
            params,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != FORMAT {
            return Err(HcrError::Parse {
                line: 0,
                reason: format!("unexpected checkpoint format {:?}", self.format),
            });
        }
        if self.version != VERSION {
            return Err(HcrError::Parse {
                line: 0,
                reason: format!("unsupported checkpoint version {}", self.version),
            });
        }
        self.params.validate()?;
        let actual = Shape {
            input_dim: self.params.input_dim(),
            hidden: self.params.hidden_dims(),
            output_dim: self.params.output_dim(),
        };
        if actual != self.shape {
            return Err(HcrError::ShapeMismatch(format!(
                "header says {:?}, layers say {:?}",
                self.shape, actual
            )));
        }
        Ok(())
    }
}

pub fn to_json(params: &ModelParameters) -> Result<String> {
    Ok(serde_json::to_string(&Checkpoint::new(params.clone()))?)
}

pub fn from_json(text: &str) -> Result<ModelParameters> {
    let ckpt: Checkpoint = serde_json::from_str(text)?;
    ckpt.validate()?;
    Ok(ckpt.params)
}

pub fn save(params: &ModelParameters, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_json(params)?)?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<ModelParameters> {
    from_json(&fs::read_to_string(path)?)
}
