//! The fine-tuning protocol: class-weighted cross-entropy, Adam with
//! two-tier learning rates (slow backbone, fast head), patience-based early
//! stopping, and restoration of the best-validation-loss weights. One
//! instance is trained per (model, split plan); a suite runs every model
//! over the same five plans and writes pre-softmax logits for the train,
//! validation, and test subsets to the store.

mod early_stop;
mod loss;
mod train;

pub use early_stop::{early_stop_step, scan_oracle, EarlyStopState, StopDecision};
pub use loss::weighted_cross_entropy;
pub use train::{
    train_instance, train_suite, InstanceData, InstanceFailure, LoadedExample, RasterCache,
    SuiteSummary,
};

use serde::{Deserialize, Serialize};

use crate::dataset::ClassWeights;
use crate::error::{Error, Result};

/// Protocol hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub patience: usize,
    pub lr_backbone: f64,
    pub lr_head: f64,
    pub batch_size: usize,
    pub class_weights: ClassWeights,
}

impl TrainConfig {
    /// Protocol defaults: 50 epochs max, patience 10, 1e-5 backbone and
    /// 1e-3 head learning rates, batch size 32.
    pub fn with_weights(class_weights: ClassWeights) -> Self {
        TrainConfig {
            max_epochs: 50,
            patience: 10,
            lr_backbone: 1e-5,
            lr_head: 1e-3,
            batch_size: 32,
            class_weights,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.patience >= self.max_epochs {
            return Err(Error::Validation(format!(
                "patience ({}) must be smaller than max_epochs ({})",
                self.patience, self.max_epochs
            )));
        }
        if self.lr_backbone <= 0.0 || self.lr_head <= 0.0 {
            return Err(Error::Validation("learning rates must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Validation("batch_size must be >= 1".into()));
        }
        if self.class_weights.negative <= 0.0 || self.class_weights.positive <= 0.0 {
            return Err(Error::Validation("class weights must be positive".into()));
        }
        Ok(())
    }
}

/// One epoch of the training history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub wall_seconds: f64,
}

/// Provenance of one trained model instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedInstance {
    pub model_name: String,
    pub split_index: usize,
    /// Store key of the weight artifact.
    pub weights_ref: String,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub history: Vec<EpochRecord>,
    /// Seed all of this instance's randomness (init, shuffles, dropout)
    /// derives from.
    pub instance_seed: u64,
}

impl TrainedInstance {
    pub fn validate(&self, max_epochs: usize, patience: usize) -> Result<()> {
        let min_val = self
            .history
            .iter()
            .map(|r| r.val_loss)
            .fold(f64::INFINITY, f64::min);
        if (self.best_val_loss - min_val).abs() > 1e-12 {
            return Err(Error::Validation(format!(
                "best_val_loss {} is not the history minimum {}",
                self.best_val_loss, min_val
            )));
        }
        let first_best = self
            .history
            .iter()
            .find(|r| r.val_loss == min_val)
            .map(|r| r.epoch);
        if first_best != Some(self.best_epoch) {
            return Err(Error::Validation(format!(
                "best_epoch {} is not the first epoch attaining the minimum",
                self.best_epoch
            )));
        }
        if self.epochs_run > max_epochs || self.epochs_run > self.best_epoch + patience {
            return Err(Error::Validation(format!(
                "epochs_run {} exceeds min(max_epochs {}, best_epoch {} + patience {})",
                self.epochs_run, max_epochs, self.best_epoch, patience
            )));
        }
        Ok(())
    }
}
