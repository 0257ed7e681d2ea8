//! Split, normalize, train, and evaluate surrogates against reference
//! datasets.

use device_encoding::{
    normalize_dataset, normalize_graph, DeviceGraph, DeviceTarget, NormStats, Task,
};
use gnn_core::metrics::{mse, r2};
use gnn_core::{
    train, Checkpoint, GraphData, Matrix, Model, ModelSpec, PreparedGraph, Target, TrainConfig,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use tcad_reference::TcadDataset;

use crate::bundle::{EvalReport, SplitTag, SurrogateBundle};
use crate::{Result, SurrogateError};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub testing: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.7,
            validation: 0.15,
            testing: 0.15,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurrogateTrainConfig {
    pub train: TrainConfig,
    pub split: SplitRatios,
}

impl Default for SurrogateTrainConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig {
                learning_rate: 2e-3,
                batch_size: 32,
                epochs: 150,
                seed: 0,
                patience: Some(20),
            },
            split: SplitRatios::default(),
        }
    }
}

/// Convert an encoded device graph into engine input.
pub fn graph_to_nn(g: &DeviceGraph) -> Result<GraphData> {
    let node_features = Matrix::from_vec(g.num_nodes, g.feature_width, g.node_features.clone())?;
    let edge_features = Matrix::from_vec(g.edges.len(), 3, g.edge_features.clone())?;
    let target = match &g.target {
        Some(DeviceTarget::NodePotential(p)) => Target::PerNode(Matrix::from_vec(
            p.len(),
            1,
            p.clone(),
        )?),
        Some(DeviceTarget::TerminalCurrent(i)) => Target::Graph(*i),
        None => {
            return Err(SurrogateError::InvalidArgument(
                "graph has no target".into(),
            ))
        }
    };
    Ok(GraphData {
        node_features,
        edges: g.edges.clone(),
        edge_features,
        target,
    })
}

fn prepare_all(graphs: &[DeviceGraph]) -> Result<Vec<PreparedGraph>> {
    graphs
        .iter()
        .map(|g| Ok(PreparedGraph::new(&graph_to_nn(g)?)?))
        .collect()
}

/// Collect (prediction, truth) pairs in normalized target units.
fn predictions(model: &Model, set: &[PreparedGraph]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut pred = Vec::new();
    let mut truth = Vec::new();
    for g in set {
        let out = model.predict(g)?;
        match &g.target {
            Target::PerNode(t) => {
                pred.extend_from_slice(out.data());
                truth.extend_from_slice(t.data());
            }
            Target::Graph(y) => {
                pred.push(out.get(0, 0));
                truth.push(*y);
            }
        }
    }
    Ok((pred, truth))
}

fn physical_scale(stats: &NormStats, task: Task) -> f64 {
    let stat = match task {
        Task::Poisson => stats.node_target.as_ref(),
        Task::Iv => stats.graph_target.as_ref(),
    };
    stat.map(|s| if s.active() { s.std } else { 1.0 }).unwrap_or(1.0)
}

fn report_for(
    model: &Model,
    set: &[PreparedGraph],
    split: SplitTag,
    stats: &NormStats,
    task: Task,
    manifest_hash: &str,
) -> Result<EvalReport> {
    let (pred, truth) = predictions(model, set)?;
    let scale = physical_scale(stats, task);
    let m = mse(&pred, &truth);
    Ok(EvalReport {
        split,
        mse_normalized: m,
        mse_physical: m * scale * scale,
        r2: r2(&pred, &truth),
        sample_count: pred.len(),
        dataset_manifest_hash: manifest_hash.to_string(),
    })
}

/// Train a surrogate on a reference dataset.
///
/// The dataset is shuffled and split by the training seed; normalization
/// statistics come from the training split only and ride along in the
/// bundle for inference reuse.
pub fn train_surrogate(
    task: Task,
    dataset: &TcadDataset,
    spec: ModelSpec,
    config: &SurrogateTrainConfig,
) -> Result<SurrogateBundle> {
    if dataset.manifest.task != task {
        return Err(SurrogateError::TaskMismatch(format!(
            "dataset is for {:?}, requested {:?}",
            dataset.manifest.task, task
        )));
    }
    if dataset.graphs.len() < 10 {
        return Err(SurrogateError::InvalidArgument(
            "dataset too small to split".into(),
        ));
    }
    let ratios = config.split;
    let total = ratios.train + ratios.validation + ratios.testing;
    if !(total > 0.99 && total < 1.01) {
        return Err(SurrogateError::InvalidArgument(format!(
            "split ratios sum to {total}, expected 1"
        )));
    }

    let mut order: Vec<usize> = (0..dataset.graphs.len()).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(config.train.seed);
    order.shuffle(&mut rng);
    let n = order.len();
    let n_train = ((n as f64) * ratios.train).round() as usize;
    let n_val = ((n as f64) * ratios.validation).round() as usize;
    let train_idx = &order[..n_train];
    let val_idx = &order[n_train..n_train + n_val];
    let test_idx = &order[n_train + n_val..];

    let train_graphs: Vec<DeviceGraph> = train_idx
        .iter()
        .map(|&i| dataset.graphs[i].clone())
        .collect();
    let (stats, train_norm) = normalize_dataset(&train_graphs, &dataset.layout)?;
    let val_norm: Vec<DeviceGraph> = val_idx
        .iter()
        .map(|&i| normalize_graph(&stats, &dataset.graphs[i]))
        .collect();
    let test_norm: Vec<DeviceGraph> = test_idx
        .iter()
        .map(|&i| normalize_graph(&stats, &dataset.graphs[i]))
        .collect();

    let train_set = prepare_all(&train_norm)?;
    let val_set = prepare_all(&val_norm)?;
    let test_set = prepare_all(&test_norm)?;

    let result = train(spec, &train_set, &val_set, &config.train)?;
    let manifest_hash = dataset.manifest.hash();
    let mut reports = vec![
        report_for(
            &result.model,
            &val_set,
            SplitTag::Validation,
            &stats,
            task,
            &manifest_hash,
        )?,
        report_for(
            &result.model,
            &test_set,
            SplitTag::Testing,
            &stats,
            task,
            &manifest_hash,
        )?,
    ];
    reports[0].sample_count = val_set.len();
    reports[1].sample_count = test_set.len();

    Ok(SurrogateBundle {
        task,
        checkpoint: Checkpoint::new(result.model, None, config.train.seed),
        norm_stats: stats,
        train_manifest_hash: manifest_hash,
        train_seed_range: dataset.manifest.seed_range(),
        reports,
    })
}

/// Evaluate a bundle on a dataset generated from disjoint seeds.
/// Overlapping seed ranges are refused as training contamination.
pub fn evaluate_unseen(bundle: &SurrogateBundle, dataset: &TcadDataset) -> Result<EvalReport> {
    if dataset.manifest.task != bundle.task {
        return Err(SurrogateError::TaskMismatch(format!(
            "dataset is for {:?}, bundle is for {:?}",
            dataset.manifest.task, bundle.task
        )));
    }
    let (a0, a1) = bundle.train_seed_range;
    let (b0, b1) = dataset.manifest.seed_range();
    if a0 < b1 && b0 < a1 {
        return Err(SurrogateError::Contamination(format!(
            "unseen dataset seeds [{b0}, {b1}) overlap training seeds [{a0}, {a1})"
        )));
    }
    let normalized: Vec<DeviceGraph> = dataset
        .graphs
        .iter()
        .map(|g| normalize_graph(&bundle.norm_stats, g))
        .collect();
    let set = prepare_all(&normalized)?;
    report_for(
        &bundle.checkpoint.model,
        &set,
        SplitTag::Unseen,
        &bundle.norm_stats,
        bundle.task,
        &dataset.manifest.hash(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builders::{build_iv_predictor, PredictorWidths};
    use device_encoding::DeviceSpec;
    use tcad_reference::{generate_tcad_dataset, DatasetConfig};

    fn tiny_dataset(seed: u64, n: usize) -> TcadDataset {
        let spec = DeviceSpec {
            grid_nx: 6,
            grid_ny: 6,
            sd_cols: 1,
            oxide_rows: 1,
            ..DeviceSpec::default()
        };
        generate_tcad_dataset(n, &spec, Task::Iv, seed, &DatasetConfig::default()).unwrap()
    }

    #[test]
    fn unseen_with_overlapping_seeds_is_contamination() {
        let ds = tiny_dataset(100, 20);
        let spec = build_iv_predictor(
            ds.layout.width(),
            3,
            &PredictorWidths {
                gat_layers: 1,
                heads: 1,
                head_width: 8,
            },
        )
        .unwrap();
        let config = SurrogateTrainConfig {
            train: TrainConfig {
                epochs: 2,
                patience: None,
                ..TrainConfig::default()
            },
            ..SurrogateTrainConfig::default()
        };
        let bundle = train_surrogate(Task::Iv, &ds, spec, &config).unwrap();
        match evaluate_unseen(&bundle, &ds) {
            Err(SurrogateError::Contamination(_)) => {}
            other => panic!("expected contamination error, got {other:?}"),
        }
        // disjoint seeds pass the guard
        let unseen = tiny_dataset(10_000, 10);
        let report = evaluate_unseen(&bundle, &unseen).unwrap();
        assert_eq!(report.split, SplitTag::Unseen);
        assert_eq!(report.sample_count, unseen.graphs.len());
    }

    #[test]
    fn task_mismatch_is_rejected() {
        let ds = tiny_dataset(200, 12);
        let spec = build_iv_predictor(
            ds.layout.width(),
            3,
            &PredictorWidths {
                gat_layers: 1,
                heads: 1,
                head_width: 8,
            },
        )
        .unwrap();
        let config = SurrogateTrainConfig {
            train: TrainConfig {
                epochs: 1,
                patience: None,
                ..TrainConfig::default()
            },
            ..SurrogateTrainConfig::default()
        };
        assert!(matches!(
            train_surrogate(Task::Poisson, &ds, spec, &config),
            Err(SurrogateError::TaskMismatch(_))
        ));
    }
}
