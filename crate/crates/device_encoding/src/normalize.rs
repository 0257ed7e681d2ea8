//! Dataset-level z-score normalization with serialized statistics.

use serde::{Deserialize, Serialize};

use crate::encode::{DeviceGraph, DeviceTarget, FeatureLayout};
use crate::{EncodingError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStat {
    pub mean: f64,
    pub std: f64,
    /// Zero-variance channels are left unscaled.
    pub zero_variance: bool,
    /// One-hot channels are never scaled.
    pub one_hot: bool,
}

impl ChannelStat {
    fn identity(one_hot: bool) -> Self {
        Self {
            mean: 0.0,
            std: 1.0,
            zero_variance: false,
            one_hot,
        }
    }

    pub fn active(&self) -> bool {
        !self.one_hot && !self.zero_variance
    }

    pub fn normalize(&self, v: f64) -> f64 {
        if self.active() {
            (v - self.mean) / self.std
        } else {
            v
        }
    }

    pub fn denormalize(&self, v: f64) -> f64 {
        if self.active() {
            v * self.std + self.mean
        } else {
            v
        }
    }
}

/// Normalization statistics for node features, edge features and targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub node: Vec<ChannelStat>,
    pub edge: Vec<ChannelStat>,
    pub node_target: Option<ChannelStat>,
    pub graph_target: Option<ChannelStat>,
}

fn channel_stat(values: impl Iterator<Item = f64> + Clone, count: usize, one_hot: bool) -> ChannelStat {
    if one_hot || count == 0 {
        return ChannelStat::identity(one_hot);
    }
    let mean = values.clone().sum::<f64>() / count as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / count as f64;
    let std = var.sqrt();
    if std <= 1e-12 * mean.abs().max(1.0) {
        ChannelStat {
            mean,
            std: 1.0,
            zero_variance: true,
            one_hot,
        }
    } else {
        ChannelStat {
            mean,
            std,
            zero_variance: false,
            one_hot,
        }
    }
}

/// Compute dataset statistics and return normalized copies of the graphs.
///
/// Continuous channels are z-scored with the population mean/std over all
/// nodes (edges, targets) of the dataset; one-hot channels pass through;
/// zero-variance channels are flagged and left unscaled.
pub fn normalize_dataset(
    graphs: &[DeviceGraph],
    layout: &FeatureLayout,
) -> Result<(NormStats, Vec<DeviceGraph>)> {
    if graphs.is_empty() {
        return Err(EncodingError::InvalidArgument("empty dataset".into()));
    }
    let width = layout.width();
    for g in graphs {
        if g.feature_width != width {
            return Err(EncodingError::InvalidArgument(
                "graph width does not match layout".into(),
            ));
        }
    }
    let total_nodes: usize = graphs.iter().map(|g| g.num_nodes).sum();
    let node_stats: Vec<ChannelStat> = (0..width)
        .map(|c| {
            let values = graphs
                .iter()
                .flat_map(move |g| (0..g.num_nodes).map(move |i| g.feature(i, c)));
            channel_stat(values, total_nodes, layout.one_hot[c])
        })
        .collect();

    let total_edges: usize = graphs.iter().map(|g| g.edges.len()).sum();
    let edge_stats: Vec<ChannelStat> = (0..3)
        .map(|c| {
            let values = graphs
                .iter()
                .flat_map(move |g| g.edge_features.iter().skip(c).step_by(3).copied());
            channel_stat(values, total_edges, false)
        })
        .collect();

    let mut node_target = None;
    let mut graph_target = None;
    let node_vals: Vec<f64> = graphs
        .iter()
        .filter_map(|g| match &g.target {
            Some(DeviceTarget::NodePotential(p)) => Some(p.iter().copied()),
            _ => None,
        })
        .flatten()
        .collect();
    if !node_vals.is_empty() {
        node_target = Some(channel_stat(
            node_vals.iter().copied(),
            node_vals.len(),
            false,
        ));
    }
    let graph_vals: Vec<f64> = graphs
        .iter()
        .filter_map(|g| match &g.target {
            Some(DeviceTarget::TerminalCurrent(i)) => Some(*i),
            _ => None,
        })
        .collect();
    if !graph_vals.is_empty() {
        graph_target = Some(channel_stat(
            graph_vals.iter().copied(),
            graph_vals.len(),
            false,
        ));
    }

    let stats = NormStats {
        node: node_stats,
        edge: edge_stats,
        node_target,
        graph_target,
    };
    let normalized = graphs.iter().map(|g| normalize_graph(&stats, g)).collect();
    Ok((stats, normalized))
}

/// Apply normalization statistics to one graph (features and target).
pub fn normalize_graph(stats: &NormStats, g: &DeviceGraph) -> DeviceGraph {
    let mut out = g.clone();
    let width = g.feature_width;
    for i in 0..g.num_nodes {
        for (c, stat) in stats.node.iter().enumerate() {
            out.node_features[i * width + c] = stat.normalize(g.feature(i, c));
        }
    }
    for (k, chunk) in out.edge_features.chunks_mut(3).enumerate() {
        for c in 0..3 {
            chunk[c] = stats.edge[c].normalize(g.edge_features[3 * k + c]);
        }
    }
    out.target = match &g.target {
        Some(DeviceTarget::NodePotential(p)) => {
            let stat = stats.node_target.clone().unwrap_or(ChannelStat::identity(false));
            Some(DeviceTarget::NodePotential(
                p.iter().map(|&v| stat.normalize(v)).collect(),
            ))
        }
        Some(DeviceTarget::TerminalCurrent(i)) => {
            let stat = stats
                .graph_target
                .clone()
                .unwrap_or(ChannelStat::identity(false));
            Some(DeviceTarget::TerminalCurrent(stat.normalize(*i)))
        }
        None => None,
    };
    out
}

/// Invert one normalized value through a channel stat.
pub fn denormalize_value(stat: &ChannelStat, v: f64) -> f64 {
    stat.denormalize(v)
}
