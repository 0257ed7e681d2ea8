//! Trained-surrogate bundles: checkpoint, normalization stats, and the
//! provenance needed for contamination checks.

use std::path::Path;

use device_encoding::{NormStats, Task};
use gnn_core::Checkpoint;
use serde::{Deserialize, Serialize};

use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitTag {
    Validation,
    Testing,
    Unseen,
}

impl std::fmt::Display for SplitTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SplitTag::Validation => write!(f, "validation"),
            SplitTag::Testing => write!(f, "testing"),
            SplitTag::Unseen => write!(f, "unseen"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub split: SplitTag,
    /// MSE in normalized-target units.
    pub mse_normalized: f64,
    /// MSE in physical units (V^2 for potential, signed-log current for IV).
    pub mse_physical: f64,
    pub r2: f64,
    pub sample_count: usize,
    pub dataset_manifest_hash: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurrogateBundle {
    pub task: Task,
    pub checkpoint: Checkpoint,
    pub norm_stats: NormStats,
    pub train_manifest_hash: String,
    /// Seed range [start, end) consumed by the training dataset generator.
    pub train_seed_range: (u64, u64),
    pub reports: Vec<EvalReport>,
}

impl SurrogateBundle {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn report(&self, split: SplitTag) -> Option<&EvalReport> {
        self.reports.iter().find(|r| r.split == split)
    }
}
