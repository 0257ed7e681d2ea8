//! Seeded training loop with best-validation checkpointing.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::graph::PreparedGraph;
use crate::model::{Model, ModelSpec};
use crate::optim::{Adam, AdamConfig};
use crate::{GnnError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Graphs per optimizer step; 0 means full batch.
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Early stop after this many epochs without validation improvement.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 100,
            seed: 0,
            patience: Some(20),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    /// Parameters of the best-validation epoch.
    pub model: Model,
    /// (train loss, validation loss) per epoch.
    pub history: Vec<(f64, f64)>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

/// Train a model on `train_set`, tracking `val_set` for checkpoint
/// selection. Deterministic for a fixed seed: initialization, shuffling,
/// and gradient reduction order are all pinned.
pub fn train(
    spec: ModelSpec,
    train_set: &[PreparedGraph],
    val_set: &[PreparedGraph],
    config: &TrainConfig,
) -> Result<TrainResult> {
    if train_set.is_empty() {
        return Err(GnnError::InvalidArgument("empty training set".into()));
    }
    if config.epochs == 0 {
        return Err(GnnError::InvalidArgument("epochs must be >= 1".into()));
    }
    if config.learning_rate < 0.0 {
        return Err(GnnError::InvalidArgument(
            "learning rate must be >= 0".into(),
        ));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let mut model = Model::init(spec, &mut rng)?;
    let mut adam = Adam::new(
        &model,
        AdamConfig {
            learning_rate: config.learning_rate,
            ..AdamConfig::default()
        },
    );

    let batch = if config.batch_size == 0 {
        train_set.len()
    } else {
        config.batch_size.min(train_set.len())
    };
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut best_model = model.clone();
    let mut since_best = 0usize;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for chunk in order.chunks(batch) {
            let scale = 1.0 / chunk.len() as f64;
            // gradients per graph in parallel, reduced in chunk order so
            // the sum is bit-stable across runs
            let partials: Vec<Result<(f64, _)>> = chunk
                .par_iter()
                .map(|&gi| {
                    let mut grads = model.zeros_like();
                    let loss =
                        model.accumulate_gradients(&train_set[gi], &mut grads, scale)?;
                    Ok((loss, grads))
                })
                .collect();
            let mut grads = model.zeros_like();
            let mut batch_loss = 0.0;
            for partial in partials {
                let (loss, g) = partial?;
                batch_loss += loss;
                for (dst, src) in grads.0.iter_mut().zip(&g.0) {
                    for (d, s) in dst.tensors.iter_mut().zip(&src.tensors) {
                        d.add_assign(s);
                    }
                }
                for (dst, src) in grads.1.iter_mut().zip(&g.1) {
                    for (d, s) in dst.tensors.iter_mut().zip(&src.tensors) {
                        d.add_assign(s);
                    }
                }
            }
            batch_loss /= chunk.len() as f64;
            if !batch_loss.is_finite() {
                return Err(GnnError::Diverged { epoch });
            }
            adam.step(&mut model, &grads);
            epoch_loss += batch_loss * chunk.len() as f64;
            seen += chunk.len();
        }
        epoch_loss /= seen as f64;

        let val_loss = if val_set.is_empty() {
            epoch_loss
        } else {
            evaluate_loss(&model, val_set)?
        };
        if !val_loss.is_finite() {
            return Err(GnnError::Diverged { epoch });
        }
        history.push((epoch_loss, val_loss));
        if val_loss < best_val {
            best_val = val_loss;
            best_epoch = epoch;
            best_model = model.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if let Some(patience) = config.patience {
                if since_best >= patience {
                    break;
                }
            }
        }
    }

    Ok(TrainResult {
        model: best_model,
        history,
        best_epoch,
        best_val_loss: best_val,
    })
}

/// Mean per-graph MSE over a dataset.
pub fn evaluate_loss(model: &Model, set: &[PreparedGraph]) -> Result<f64> {
    if set.is_empty() {
        return Err(GnnError::InvalidArgument("empty evaluation set".into()));
    }
    let losses: Vec<Result<f64>> = set
        .par_iter()
        .map(|g| {
            let out = model.predict(g)?;
            Ok(Model::loss(&out, &g.target))
        })
        .collect();
    let mut total = 0.0;
    for l in losses {
        total += l?;
    }
    Ok(total / set.len() as f64)
}
