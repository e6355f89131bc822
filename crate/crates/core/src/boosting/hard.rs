use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{check_finite, residuals, run_epochs, BatchLosses, TrainConfig};
use crate::data::{Dataset, Task};
use crate::error::{Error, Result};
use crate::learners::{init_learner, Learner, LearnerSpec};
use crate::loss::{loss_value, LossKind};
use crate::matrix::Matrix;
use crate::rng::{derive_seed, STREAM_DATA, STREAM_LEARNER};

/// Stagewise additive model `F = ε·Σ_m h_m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardGbmModel {
    learners: Vec<Learner>,
    loss: LossKind,
    epsilon: f64,
    input_dim: usize,
    output_dim: usize,
}

/// Diagnostics for one boosting stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: usize,
    /// Mean squared norm of the residual targets the stage was fitted to.
    pub residual_mean_sq: f64,
    /// Squared-error fit of the new learner to its residuals after fitting.
    pub fit_loss: f64,
    /// Task loss of the ensemble on the training set after adding the stage.
    pub train_loss: f64,
    pub wall_clock_ms: f64,
}

impl HardGbmModel {
    /// An empty ensemble, `F ≡ 0`.
    pub fn new(input_dim: usize, output_dim: usize, loss: LossKind, epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::invalid(format!("invalid shrinkage {epsilon}")));
        }
        if input_dim == 0 || output_dim == 0 {
            return Err(Error::invalid("model dimensions must be positive"));
        }
        Ok(Self {
            learners: Vec::new(),
            loss,
            epsilon,
            input_dim,
            output_dim,
        })
    }

    pub fn learners(&self) -> &[Learner] {
        &self.learners
    }

    pub fn num_learners(&self) -> usize {
        self.learners.len()
    }

    pub fn loss(&self) -> LossKind {
        self.loss
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn push(&mut self, learner: Learner) -> Result<()> {
        if (learner.input_dim(), learner.output_dim()) != (self.input_dim, self.output_dim) {
            return Err(Error::dim(
                "HardGbmModel::push",
                format!("{} -> {}", self.input_dim, self.output_dim),
                format!("{} -> {}", learner.input_dim(), learner.output_dim()),
            ));
        }
        self.learners.push(learner);
        Ok(())
    }

    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.input_dim {
            return Err(Error::dim(
                "HardGbmModel::predict",
                self.input_dim,
                x.cols(),
            ));
        }
        let mut out = Matrix::zeros(x.rows(), self.output_dim);
        for learner in &self.learners {
            out.add_scaled_assign(self.epsilon, &learner.predict(x)?)?;
        }
        Ok(out)
    }
}

/// Fits `learner` to `targets` under mean squared error with its own fresh
/// Adam state. Returns the final fit loss on the whole set.
pub(crate) fn fit_to_targets(
    learner: &mut Learner,
    features: &Matrix,
    targets: &Matrix,
    config: &TrainConfig,
) -> Result<f64> {
    let k = targets.cols();
    let data = Dataset::new(
        features.clone(),
        targets.clone(),
        Task::Regression { outputs: k },
    )?;
    let adam = config.adam();
    let mut states = learner.new_optimizer(adam);
    let mut epochs = 0;
    run_epochs(
        &data,
        config,
        &mut epochs,
        |batch| {
            let n = batch.features.rows() as f64;
            let (out, cache) = learner.forward(&batch.features)?;
            let diff = out.sub(&batch.targets)?;
            let local = diff.as_slice().iter().map(|v| v * v).sum::<f64>() / n;
            let losses = BatchLosses {
                local: vec![local],
                global: local,
            };
            check_finite(&losses, "hard gbm stage fit")?;
            let grads = learner.backward(&cache, &diff.scale(2.0 / n))?;
            learner.apply_adam(&grads, &mut states)?;
            Ok(losses)
        },
        |_| {},
    )?;
    let diff = learner.predict(features)?.sub(targets)?;
    Ok(diff.as_slice().iter().map(|v| v * v).sum::<f64>() / features.rows() as f64)
}

/// Classic sequential boosting: stage `m` computes residuals of the current
/// ensemble on the full training set, fits a fresh learner to them for
/// `inner.epochs` epochs, and adds it with shrinkage `epsilon`. `on_stage`
/// sees each stage's diagnostics and the ensemble built so far.
///
/// Learner `m` is initialised exactly as learner `m` of an
/// [`SgbmModel`](super::SgbmModel) built from the same spec and seed.
pub fn hard_gbm_train(
    data: &Dataset,
    num_learners: usize,
    epsilon: f64,
    spec: &LearnerSpec,
    inner: &TrainConfig,
    mut on_stage: impl FnMut(&StageRecord, &HardGbmModel),
) -> Result<HardGbmModel> {
    if num_learners == 0 {
        return Err(Error::invalid("number of learners must be at least 1"));
    }
    spec.validate()?;
    inner.validate()?;
    let loss = data.loss();
    let mut model = HardGbmModel::new(data.feature_dim(), data.output_dim(), loss, epsilon)?;
    let x = data.features();
    let y = data.targets();
    let mut cumulative = Matrix::zeros(data.len(), data.output_dim());
    let start = Instant::now();
    for m in 0..num_learners {
        let target = residuals(loss, &cumulative, y)?;
        let residual_mean_sq =
            target.as_slice().iter().map(|v| v * v).sum::<f64>() / data.len() as f64;
        let mut learner = init_learner(
            spec,
            data.feature_dim(),
            data.output_dim(),
            derive_seed(inner.seed, STREAM_LEARNER + m as u64),
        )?;
        let stage_config = TrainConfig {
            seed: derive_seed(inner.seed, STREAM_DATA + m as u64),
            ..inner.clone()
        };
        let fit_loss = fit_to_targets(&mut learner, x, &target, &stage_config)?;
        cumulative.add_scaled_assign(epsilon, &learner.predict(x)?)?;
        model.push(learner)?;
        let train_loss = loss_value(loss, &cumulative, y)?;
        if !train_loss.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite training loss after stage {m}"
            )));
        }
        let record = StageRecord {
            stage: m,
            residual_mean_sq,
            fit_loss,
            train_loss,
            wall_clock_ms: start.elapsed().as_secs_f64() * 1e3,
        };
        on_stage(&record, &model);
    }
    Ok(model)
}
