use serde::{Deserialize, Serialize};

use super::parallel::{par_map, par_map_mut};
use super::{
    check_batch, check_finite, residuals, run_epochs, BatchLosses, BatchRecord, TrainConfig,
};
use crate::data::{Batch, Dataset};
use crate::error::{Error, Result};
use crate::learners::{init_learner, Learner, LearnerGradients, LearnerSpec};
use crate::loss::LossKind;
use crate::matrix::Matrix;
use crate::optim::{AdamConfig, AdamState};
use crate::rng::{derive_seed, STREAM_LEARNER};

/// Jointly trained boosting ensemble. Prediction is the plain sum of the
/// learner outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgbmModel {
    learners: Vec<Learner>,
    optimizers: Vec<Vec<AdamState>>,
    loss: LossKind,
    epochs_trained: u64,
}

impl SgbmModel {
    /// `num_learners` learners of one spec; learner `m` is seeded from
    /// `(seed, m)`.
    pub fn new(
        spec: &LearnerSpec,
        num_learners: usize,
        input_dim: usize,
        output_dim: usize,
        loss: LossKind,
        seed: u64,
    ) -> Result<Self> {
        if num_learners == 0 {
            return Err(Error::invalid("number of learners must be at least 1"));
        }
        let learners = (0..num_learners)
            .map(|m| {
                init_learner(
                    spec,
                    input_dim,
                    output_dim,
                    derive_seed(seed, STREAM_LEARNER + m as u64),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_learners(learners, loss)
    }

    pub fn from_learners(learners: Vec<Learner>, loss: LossKind) -> Result<Self> {
        let first = learners
            .first()
            .ok_or_else(|| Error::invalid("number of learners must be at least 1"))?;
        let (d, k) = (first.input_dim(), first.output_dim());
        for (m, l) in learners.iter().enumerate() {
            if (l.input_dim(), l.output_dim()) != (d, k) {
                return Err(Error::dim(
                    "SgbmModel::from_learners",
                    format!("learners {d} -> {k}"),
                    format!("learner {m}: {} -> {}", l.input_dim(), l.output_dim()),
                ));
            }
        }
        let optimizers = learners
            .iter()
            .map(|l| l.new_optimizer(AdamConfig::default()))
            .collect();
        Ok(Self {
            learners,
            optimizers,
            loss,
            epochs_trained: 0,
        })
    }

    pub fn learners(&self) -> &[Learner] {
        &self.learners
    }

    pub fn learners_mut(&mut self) -> &mut [Learner] {
        &mut self.learners
    }

    pub fn num_learners(&self) -> usize {
        self.learners.len()
    }

    pub fn loss(&self) -> LossKind {
        self.loss
    }

    pub fn set_loss(&mut self, loss: LossKind) {
        self.loss = loss;
    }

    pub fn input_dim(&self) -> usize {
        self.learners[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.learners[0].output_dim()
    }

    pub fn epochs_trained(&self) -> u64 {
        self.epochs_trained
    }

    /// `O = Σ_m o_m(x)`.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(x.rows(), self.output_dim());
        for learner in &self.learners {
            out.add_assign(&learner.predict(x)?)?;
        }
        Ok(out)
    }

    /// Local losses and per-learner gradients for one batch, without
    /// updating anything. Each learner's gradient is that of its own local
    /// loss `mean_i ‖r_m − o_m‖²` with the residual `r_m` held constant.
    pub fn batch_gradients(
        &self,
        x: &Matrix,
        y: &Matrix,
    ) -> Result<(BatchLosses, Vec<LearnerGradients>)> {
        check_batch(x, y, self.input_dim(), self.output_dim())?;
        let n = x.rows() as f64;
        // Forwards are independent; residuals then chain sequentially through
        // the outputs; backwards are independent again once residuals exist.
        let forwards = par_map(&self.learners, |l| l.forward(x))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;

        let mut cumulative = Matrix::zeros(x.rows(), self.output_dim());
        let mut local = Vec::with_capacity(self.learners.len());
        let mut jobs = Vec::with_capacity(self.learners.len());
        for (learner, (output, cache)) in self.learners.iter().zip(&forwards) {
            let target = residuals(self.loss, &cumulative, y)?;
            let diff = output.sub(&target)?;
            local.push(diff.as_slice().iter().map(|v| v * v).sum::<f64>() / n);
            jobs.push((learner, cache, diff.scale(2.0 / n)));
            cumulative.add_assign(output)?;
        }
        let grads = par_map(&jobs, |(learner, cache, upstream)| {
            learner.backward(cache, upstream)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let global = local.iter().sum();
        Ok((BatchLosses { local, global }, grads))
    }

    /// One joint update of every learner. Returns the losses measured
    /// before the update.
    pub fn train_batch(&mut self, batch: &Batch, adam: &AdamConfig) -> Result<BatchLosses> {
        let (losses, grads) = self.batch_gradients(&batch.features, &batch.targets)?;
        check_finite(&losses, "sgbm training")?;
        let mut jobs: Vec<_> = self
            .learners
            .iter_mut()
            .zip(&mut self.optimizers)
            .zip(&grads)
            .collect();
        par_map_mut(&mut jobs, |((learner, states), g)| {
            for s in states.iter_mut() {
                s.configure(*adam);
            }
            learner.apply_adam(g, states)
        })
        .into_iter()
        .collect::<Result<()>>()?;
        Ok(losses)
    }

    /// Trains for `config.epochs` further epochs, continuing from the
    /// current parameters and optimizer state.
    pub fn fit(
        &mut self,
        data: &Dataset,
        config: &TrainConfig,
        on_batch: impl FnMut(&BatchRecord),
    ) -> Result<()> {
        if data.feature_dim() != self.input_dim() || data.output_dim() != self.output_dim() {
            return Err(Error::dim(
                "SgbmModel::fit",
                format!("data {} -> {}", self.input_dim(), self.output_dim()),
                format!("{} -> {}", data.feature_dim(), data.output_dim()),
            ));
        }
        let adam = config.adam();
        let mut epochs = self.epochs_trained;
        let result = run_epochs(
            data,
            config,
            &mut epochs,
            |batch| self.train_batch(batch, &adam),
            on_batch,
        );
        self.epochs_trained = epochs;
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_synthetic, SyntheticKind};
    use crate::loss::loss_value;

    fn toy_regression() -> Dataset {
        make_synthetic(SyntheticKind::MultiSine, 64, 3)
            .unwrap()
            .dataset
    }

    #[test]
    fn single_learner_first_local_loss_and_descent() {
        let data = toy_regression();
        let mut model = SgbmModel::new(
            &LearnerSpec::Tree { depth: 2 },
            1,
            4,
            4,
            LossKind::SquaredError,
            5,
        )
        .unwrap();
        for p in model.learners_mut()[0].params_mut() {
            if p.rows() == 4 {
                // leaf block: make o_1 ≡ 0
                p.as_mut_slice().fill(0.0);
            }
        }
        let batch = data.batch(&(0..64).collect::<Vec<_>>());
        let y = &batch.targets;
        let mean_sq = y.as_slice().iter().map(|v| v * v).sum::<f64>() / 64.0;
        let before = model.train_batch(&batch, &AdamConfig::default()).unwrap();
        assert!((before.local[0] - mean_sq).abs() < 1e-12);
        let (after, _) = model.batch_gradients(&batch.features, y).unwrap();
        assert!(after.local[0] < before.local[0]);
    }

    #[test]
    fn second_residual_is_first_minus_output_for_squared_error() {
        let data = toy_regression();
        let model = SgbmModel::new(
            &LearnerSpec::Tree { depth: 2 },
            2,
            4,
            4,
            LossKind::SquaredError,
            1,
        )
        .unwrap();
        let x = data.features();
        let y = data.targets();
        let o1 = model.learners()[0].predict(x).unwrap();
        let r1 = residuals(LossKind::SquaredError, &Matrix::zeros(64, 4), y).unwrap();
        let r2 = residuals(LossKind::SquaredError, &o1, y).unwrap();
        let expected = r1.sub(&o1).unwrap();
        for (a, b) in r2.as_slice().iter().zip(expected.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
        // and r_1 = y when F_0 = 0
        assert_eq!(&r1, y);
    }

    #[test]
    fn predict_is_sum_and_duplicate_doubles() {
        let data = toy_regression();
        let tree = init_learner(&LearnerSpec::Tree { depth: 3 }, 4, 4, 8).unwrap();
        let single = SgbmModel::from_learners(vec![tree.clone()], LossKind::SquaredError).unwrap();
        let double =
            SgbmModel::from_learners(vec![tree.clone(), tree.clone()], LossKind::SquaredError)
                .unwrap();
        let o = tree.predict(data.features()).unwrap();
        assert_eq!(single.predict(data.features()).unwrap(), o);
        assert_eq!(double.predict(data.features()).unwrap(), o.scale(2.0));
    }

    #[test]
    fn zero_learners_predict_zero() {
        let mut model = SgbmModel::new(
            &LearnerSpec::Mlp { hidden: vec![3] },
            3,
            4,
            4,
            LossKind::SquaredError,
            0,
        )
        .unwrap();
        for l in model.learners_mut() {
            for p in l.params_mut() {
                p.as_mut_slice().fill(0.0);
            }
        }
        let out = model.predict(toy_regression().features()).unwrap();
        assert!(out.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn resuming_zero_epochs_is_noop() {
        let data = toy_regression();
        let mut model = SgbmModel::new(
            &LearnerSpec::Tree { depth: 2 },
            2,
            4,
            4,
            LossKind::SquaredError,
            0,
        )
        .unwrap();
        model
            .fit(
                &data,
                &TrainConfig {
                    epochs: 2,
                    ..TrainConfig::default()
                },
                |_| {},
            )
            .unwrap();
        let snapshot = model.clone();
        model
            .fit(
                &data,
                &TrainConfig {
                    epochs: 0,
                    ..TrainConfig::default()
                },
                |_| {},
            )
            .unwrap();
        assert_eq!(model, snapshot);
    }

    #[test]
    fn split_fit_equals_single_fit() {
        let data = toy_regression();
        let config = TrainConfig {
            epochs: 4,
            batch_size: 16,
            seed: 3,
            ..TrainConfig::default()
        };
        let mut a = SgbmModel::new(
            &LearnerSpec::Tree { depth: 2 },
            3,
            4,
            4,
            LossKind::SquaredError,
            0,
        )
        .unwrap();
        let mut b = a.clone();
        a.fit(&data, &config, |_| {}).unwrap();
        let half = TrainConfig {
            epochs: 2,
            ..config.clone()
        };
        b.fit(&data, &half, |_| {}).unwrap();
        b.fit(&data, &half, |_| {}).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_batch_and_dim_mismatch() {
        let model = SgbmModel::new(
            &LearnerSpec::Tree { depth: 1 },
            1,
            4,
            4,
            LossKind::SquaredError,
            0,
        )
        .unwrap();
        assert!(matches!(
            model.batch_gradients(&Matrix::zeros(0, 4), &Matrix::zeros(0, 4)),
            Err(Error::Validation(_))
        ));
        assert!(model
            .batch_gradients(&Matrix::zeros(2, 3), &Matrix::zeros(2, 4))
            .is_err());
        assert!(SgbmModel::new(
            &LearnerSpec::Tree { depth: 1 },
            0,
            4,
            4,
            LossKind::SquaredError,
            0
        )
        .is_err());
    }

    #[test]
    fn fit_reduces_task_loss() {
        let data = toy_regression();
        let mut model = SgbmModel::new(
            &LearnerSpec::Tree { depth: 3 },
            4,
            4,
            4,
            LossKind::SquaredError,
            0,
        )
        .unwrap();
        let before = loss_value(
            LossKind::SquaredError,
            &model.predict(data.features()).unwrap(),
            data.targets(),
        )
        .unwrap();
        let config = TrainConfig {
            epochs: 50,
            batch_size: 16,
            lr: 1e-2,
            ..TrainConfig::default()
        };
        model.fit(&data, &config, |_| {}).unwrap();
        let after = loss_value(
            LossKind::SquaredError,
            &model.predict(data.features()).unwrap(),
            data.targets(),
        )
        .unwrap();
        assert!(after < 0.5 * before, "{before} -> {after}");
    }
}
