//! Versioned JSON checkpoints: spec, parameters, and provenance.
//!
//! serde_json prints f64 with shortest round-trip precision, so save/load
//! reproduces parameters bit-exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::Model;
use crate::{GnnError, Result};

pub const CHECKPOINT_FORMAT: &str = "stcoforge-checkpoint-v1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub model: Model,
    /// Path or hash of the normalization stats this model expects.
    pub norm_stats_ref: Option<String>,
    pub seed: u64,
}

impl Checkpoint {
    pub fn new(model: Model, norm_stats_ref: Option<String>, seed: u64) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            model,
            norm_stats_ref,
            seed,
        }
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let json = serde_json::to_string(ckpt)
        .map_err(|e| GnnError::Checkpoint(format!("serialize: {e}")))?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path)?;
    let ckpt: Checkpoint =
        serde_json::from_str(&text).map_err(|e| GnnError::Checkpoint(format!("parse: {e}")))?;
    if ckpt.format != CHECKPOINT_FORMAT {
        return Err(GnnError::Checkpoint(format!(
            "unsupported checkpoint format `{}`",
            ckpt.format
        )));
    }
    Ok(ckpt)
}
