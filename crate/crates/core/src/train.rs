//! Full-batch training with per-epoch parameter snapshots and early stopping
//! on validation loss.

use std::sync::Arc;

use crate::backward::backward_gradients_with;
use crate::error::Result;
use crate::graph::Graph;
use crate::model::{accuracy, cross_entropy_loss, forward_cached, ModelConfig, Precomp};
use crate::optim::{adam_step, AdamConfig, AdamState};
use crate::params::{FlatParams, ParamLayout};

#[derive(Debug, Clone, Copy)]
pub struct TrainOptions {
    pub epochs_max: usize,
    pub patience: usize,
    pub adam: AdamConfig,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs_max: 1000,
            patience: 50,
            adam: AdamConfig::default(),
        }
    }
}

/// Per-epoch snapshots of Θ plus losses/accuracies; snapshot 0 is the
/// initialization. Θ* is the best-validation snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord {
    pub layout: Arc<ParamLayout>,
    pub snapshots: Vec<Vec<f64>>,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub train_acc: Vec<f64>,
    pub val_acc: Vec<f64>,
    pub best_epoch: usize,
    pub seed: u64,
    pub config_hash: u64,
}

impl TrainRecord {
    pub fn num_snapshots(&self) -> usize {
        self.snapshots.len()
    }

    pub fn dim(&self) -> usize {
        self.layout.total_dim
    }

    pub fn theta_star(&self) -> FlatParams {
        FlatParams {
            values: self.snapshots[self.best_epoch].clone(),
            layout: self.layout.clone(),
        }
    }

    pub fn snapshot(&self, epoch: usize) -> FlatParams {
        FlatParams {
            values: self.snapshots[epoch].clone(),
            layout: self.layout.clone(),
        }
    }
}

/// Train a model, snapshotting Θ every epoch. Early stopping tracks the best
/// validation loss; training halts once `patience` consecutive epochs fail to
/// improve it (patience 0 stops at the first non-improving epoch).
pub fn train(config: &ModelConfig, g: &Graph, opts: &TrainOptions) -> Result<TrainRecord> {
    config.validate()?;
    let mut params = config.init_params(g.features.cols(), g.num_classes);
    let layout = params.layout.clone();
    let pre = Precomp::new(config, g);
    let mut adam = AdamState::new(params.dim());

    let mut record = TrainRecord {
        layout,
        snapshots: Vec::new(),
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        train_acc: Vec::new(),
        val_acc: Vec::new(),
        best_epoch: 0,
        seed: config.seed,
        config_hash: config.hash(),
    };

    let mut best_val = f64::INFINITY;
    let mut stale = 0usize;
    for epoch in 0..=opts.epochs_max {
        let cache = forward_cached(config, g, &params, &pre)?;
        let tr_loss = cross_entropy_loss(&cache.logits, &g.labels, &g.train_mask)?;
        let va_loss = cross_entropy_loss(&cache.logits, &g.labels, &g.val_mask)?;
        record.snapshots.push(params.values.clone());
        record.train_loss.push(tr_loss);
        record.val_loss.push(va_loss);
        record
            .train_acc
            .push(accuracy(&cache.logits, &g.labels, &g.train_mask));
        record
            .val_acc
            .push(accuracy(&cache.logits, &g.labels, &g.val_mask));

        if va_loss < best_val {
            best_val = va_loss;
            record.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale > opts.patience {
                break;
            }
        }
        if epoch == opts.epochs_max {
            break;
        }

        let grads = backward_gradients_with(config, g, &params, &g.train_mask, &pre)?;
        adam_step(&mut params.values, &grads, &mut adam, &opts.adam);
    }

    Ok(record)
}
