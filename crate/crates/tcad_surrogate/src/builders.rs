//! Model-spec builders with paper-scale and desk-scale presets.

use gnn_core::{Activation, LayerSpec, ModelSpec, Readout};
use serde::{Deserialize, Serialize};

use crate::{Result, SurrogateError};

/// Widths of the Poisson emulator: a deep attention stack with
/// interleaved layer norm and a 2-layer node MLP head.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EmulatorWidths {
    pub gat_layers: usize,
    pub heads: usize,
    pub head_width: usize,
}

impl EmulatorWidths {
    /// Sized to the reported ~1M-parameter budget.
    pub fn paper_scale() -> Self {
        Self {
            gat_layers: 12,
            heads: 2,
            head_width: 136,
        }
    }

    /// Small preset for desk-scale training runs.
    pub fn desk_scale() -> Self {
        Self {
            gat_layers: 4,
            heads: 2,
            head_width: 16,
        }
    }
}

/// Widths of the IV predictor: a shallow attention stack, mean pooling,
/// and a 4-layer MLP.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PredictorWidths {
    pub gat_layers: usize,
    pub heads: usize,
    pub head_width: usize,
}

impl PredictorWidths {
    /// Sized to the reported ~0.15M-parameter budget.
    pub fn paper_scale() -> Self {
        Self {
            gat_layers: 3,
            heads: 1,
            head_width: 160,
        }
    }

    pub fn desk_scale() -> Self {
        Self {
            gat_layers: 3,
            heads: 1,
            head_width: 32,
        }
    }
}

fn check_positive(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(SurrogateError::InvalidArgument(format!(
            "{name} must be positive"
        )));
    }
    Ok(())
}

/// Node-regression spec: GAT stack with layer norm after every layer,
/// then a 2-layer MLP emitting one scalar per node.
pub fn build_poisson_emulator(
    input_dim: usize,
    edge_dim: usize,
    w: &EmulatorWidths,
) -> Result<ModelSpec> {
    check_positive("gat_layers", w.gat_layers)?;
    check_positive("heads", w.heads)?;
    check_positive("head_width", w.head_width)?;
    let hidden = w.heads * w.head_width;
    let mut layers = Vec::new();
    let mut dim = input_dim;
    for _ in 0..w.gat_layers {
        layers.push(LayerSpec::RelGat {
            in_dim: dim,
            out_dim: w.head_width,
            heads: w.heads,
            edge_dim,
            average_heads: false,
            activation: Activation::Elu,
        });
        dim = hidden;
        layers.push(LayerSpec::LayerNorm { dim });
    }
    layers.push(LayerSpec::Linear {
        in_dim: dim,
        out_dim: dim,
    });
    layers.push(LayerSpec::Activation {
        kind: Activation::Relu,
    });
    layers.push(LayerSpec::Linear {
        in_dim: dim,
        out_dim: 1,
    });
    let spec = ModelSpec {
        input_dim,
        edge_dim,
        node_layers: layers,
        readout: Readout::None,
        graph_layers: vec![],
    };
    spec.validate()?;
    Ok(spec)
}

/// Graph-regression spec: shallow GAT stack, mean pooling, 4-layer MLP
/// down to one scalar per graph.
pub fn build_iv_predictor(
    input_dim: usize,
    edge_dim: usize,
    w: &PredictorWidths,
) -> Result<ModelSpec> {
    check_positive("gat_layers", w.gat_layers)?;
    check_positive("heads", w.heads)?;
    check_positive("head_width", w.head_width)?;
    let hidden = w.heads * w.head_width;
    let mut layers = Vec::new();
    let mut dim = input_dim;
    for _ in 0..w.gat_layers {
        layers.push(LayerSpec::RelGat {
            in_dim: dim,
            out_dim: w.head_width,
            heads: w.heads,
            edge_dim,
            average_heads: false,
            activation: Activation::Elu,
        });
        dim = hidden;
        layers.push(LayerSpec::LayerNorm { dim });
    }
    let mut graph_layers = Vec::new();
    for _ in 0..3 {
        graph_layers.push(LayerSpec::Linear {
            in_dim: dim,
            out_dim: dim,
        });
        graph_layers.push(LayerSpec::Activation {
            kind: Activation::Relu,
        });
    }
    graph_layers.push(LayerSpec::Linear {
        in_dim: dim,
        out_dim: 1,
    });
    let spec = ModelSpec {
        input_dim,
        edge_dim,
        node_layers: layers,
        readout: Readout::MeanPool,
        graph_layers,
    };
    spec.validate()?;
    Ok(spec)
}
