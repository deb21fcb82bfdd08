//! JSON checkpoints: model layout, named parameter blocks and the fingerprint
//! of the configuration that produced them.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelSpec, TrainedModel};
use crate::data::io::{read_json, write_json};
use crate::numerics::BlockInfo;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedBlock {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub fingerprint: String,
    pub model: ModelSpec,
    pub blocks: Vec<SavedBlock>,
}

impl Checkpoint {
    pub fn capture(model: &TrainedModel, fingerprint: &str) -> Self {
        let blocks = match model.params() {
            Some(p) => p
                .block_info()
                .into_iter()
                .zip(p.blocks())
                .map(|(BlockInfo { name, shape }, values)| SavedBlock {
                    name,
                    shape,
                    values: values.to_vec(),
                })
                .collect(),
            None => Vec::new(),
        };
        Self {
            fingerprint: fingerprint.to_string(),
            model: model.spec(),
            blocks,
        }
    }

    /// Rebuilds the model, checking every block name and shape.
    pub fn restore(&self) -> Result<TrainedModel> {
        let mut model = TrainedModel::build(&self.model, 0)?;
        if let Some(p) = model.params_mut() {
            let info = p.block_info();
            if info.len() != self.blocks.len() {
                return Err(Error::invalid(format!(
                    "checkpoint has {} blocks, model expects {}",
                    self.blocks.len(),
                    info.len()
                )));
            }
            for (want, saved) in info.iter().zip(&self.blocks) {
                if want.name != saved.name || want.shape != saved.shape {
                    return Err(Error::invalid(format!(
                        "checkpoint block {} {:?} does not match model block {} {:?}",
                        saved.name, saved.shape, want.name, want.shape
                    )));
                }
                if saved.values.len() != want.len() {
                    return Err(Error::Dimension {
                        expected: want.len(),
                        actual: saved.values.len(),
                        context: format!("values in block {}", saved.name),
                    });
                }
            }
            for (dst, saved) in p.blocks_mut().into_iter().zip(&self.blocks) {
                dst.copy_from_slice(&saved.values);
            }
        } else if !self.blocks.is_empty() {
            return Err(Error::invalid("parameter-free model with saved blocks"));
        }
        Ok(model)
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, model: &TrainedModel, fingerprint: &str) -> Result<()> {
    write_json(path, &Checkpoint::capture(model, fingerprint))
}

/// Loads a checkpoint; with `expected` set, refuses one produced under a
/// different configuration fingerprint.
pub fn load_checkpoint(path: impl AsRef<Path>, expected: Option<&str>) -> Result<(TrainedModel, String)> {
    let ckpt: Checkpoint = read_json(path)?;
    if let Some(want) = expected {
        if want != ckpt.fingerprint {
            return Err(Error::Fingerprint {
                what: "checkpoint".into(),
                expected: want.to_string(),
                found: ckpt.fingerprint,
            });
        }
    }
    Ok((ckpt.restore()?, ckpt.fingerprint))
}
