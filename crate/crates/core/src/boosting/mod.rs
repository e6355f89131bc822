//! Boosting trainers over differentiable learners.
//!
//! * [`SgbmModel`]: all learners trained jointly per mini-batch; learner `m`
//!   regresses onto the residual of the summed outputs of learners `< m`.
//! * [`HardGbmModel`]: classic stagewise boosting with shrinkage `ε`, each
//!   stage fitted to convergence budget before the next begins.
//! * [`SoftAveragingModel`]: a learnable linear combination trained under
//!   the task loss alone.

mod averaging;
mod hard;
mod parallel;
mod sgbm;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use averaging::SoftAveragingModel;
pub use hard::{hard_gbm_train, HardGbmModel, StageRecord};
pub use parallel::worker_count;
pub use sgbm::SgbmModel;

use crate::data::{Batch, BatchPlan, Dataset};
use crate::error::{Error, Result};
use crate::loss::{loss_gradient, LossKind};
use crate::matrix::Matrix;
use crate::optim::AdamConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 128,
            lr: 1e-3,
            weight_decay: 5e-4,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::invalid(format!("invalid learning rate {}", self.lr)));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::invalid(format!(
                "invalid weight decay {}",
                self.weight_decay
            )));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            weight_decay: self.weight_decay,
            ..AdamConfig::default()
        }
    }
}

/// Losses measured on one mini-batch before the update.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchLosses {
    /// Per-learner local losses (empty for soft averaging).
    pub local: Vec<f64>,
    /// Sum of local losses for sGBM; the task loss for soft averaging.
    pub global: f64,
}

/// Structured diagnostics for one mini-batch step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub epoch: u64,
    pub batch: usize,
    pub local_losses: Vec<f64>,
    pub global_loss: f64,
    pub wall_clock_ms: f64,
}

/// `−∂loss(F, y)/∂F` at the given cumulative output. The result carries no
/// dependence on the learners that produced `cumulative`.
pub fn residuals(loss: LossKind, cumulative: &Matrix, targets: &Matrix) -> Result<Matrix> {
    Ok(loss_gradient(loss, cumulative, targets)?.scale(-1.0))
}

pub(crate) fn check_finite(losses: &BatchLosses, context: &str) -> Result<()> {
    if !losses.global.is_finite() || losses.local.iter().any(|l| !l.is_finite()) {
        return Err(Error::Numeric(format!(
            "non-finite loss during {context}: {losses:?}"
        )));
    }
    Ok(())
}

/// Runs `config.epochs` shuffled passes, calling `step` per mini-batch.
/// `epochs_done` is the model's global epoch counter; it seeds each epoch's
/// permutation so that resumed training continues the same sequence.
pub(crate) fn run_epochs(
    data: &Dataset,
    config: &TrainConfig,
    epochs_done: &mut u64,
    mut step: impl FnMut(&Batch) -> Result<BatchLosses>,
    mut on_batch: impl FnMut(&BatchRecord),
) -> Result<()> {
    if config.batch_size == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    let start = Instant::now();
    for _ in 0..config.epochs {
        let plan = BatchPlan::for_epoch(
            data.len(),
            config.batch_size,
            config.seed,
            *epochs_done,
            config.shuffle,
        )?;
        for (b, indices) in plan.batches().enumerate() {
            let batch = data.batch(indices);
            let losses = step(&batch)?;
            on_batch(&BatchRecord {
                epoch: *epochs_done,
                batch: b,
                local_losses: losses.local,
                global_loss: losses.global,
                wall_clock_ms: start.elapsed().as_secs_f64() * 1e3,
            });
        }
        *epochs_done += 1;
    }
    Ok(())
}

pub(crate) fn check_batch(
    x: &Matrix,
    y: &Matrix,
    input_dim: usize,
    output_dim: usize,
) -> Result<()> {
    if x.rows() == 0 {
        return Err(Error::invalid("empty batch"));
    }
    if x.cols() != input_dim {
        return Err(Error::dim("batch features", input_dim, x.cols()));
    }
    if y.shape() != (x.rows(), output_dim) {
        return Err(Error::dim(
            "batch targets",
            format!("{}x{output_dim}", x.rows()),
            format!("{}x{}", y.rows(), y.cols()),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[Vec<f64>]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn first_round_classification_residual() {
        let r = residuals(
            LossKind::SoftmaxCrossEntropy,
            &Matrix::zeros(1, 2),
            &m(&[vec![1.0, 0.0]]),
        )
        .unwrap();
        assert_eq!(r.as_slice(), &[0.5, -0.5]);
    }

    #[test]
    fn squared_error_residual() {
        let r = residuals(LossKind::SquaredError, &m(&[vec![0.2]]), &m(&[vec![1.0]])).unwrap();
        assert!((r.get(0, 0) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn residual_at_ln2() {
        // softmax(ln 2, 0) = (2/3, 1/3); residual = y − p
        let r = residuals(
            LossKind::SoftmaxCrossEntropy,
            &m(&[vec![std::f64::consts::LN_2, 0.0]]),
            &m(&[vec![0.0, 1.0]]),
        )
        .unwrap();
        assert!((r.get(0, 0) + 2.0 / 3.0).abs() < 1e-15);
        assert!((r.get(0, 1) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let d = TrainConfig::default();
        assert_eq!((d.batch_size, d.lr, d.weight_decay), (128, 1e-3, 5e-4));
    }
}
