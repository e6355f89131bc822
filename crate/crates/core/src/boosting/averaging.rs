use serde::{Deserialize, Serialize};

use super::{check_batch, check_finite, run_epochs, BatchLosses, BatchRecord, TrainConfig};
use crate::data::{Batch, Dataset};
use crate::error::{Error, Result};
use crate::learners::{init_learner, Learner, LearnerGradients, LearnerSpec};
use crate::loss::{loss_gradient, loss_value, LossKind};
use crate::matrix::Matrix;
use crate::optim::{AdamConfig, AdamState};
use crate::rng::{derive_seed, STREAM_LEARNER};

/// Learnable linear combination `Σ_m w_m·o_m` trained end to end under the
/// task loss. Weights start at `1/M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftAveragingModel {
    learners: Vec<Learner>,
    mixing_weights: Matrix,
    optimizers: Vec<Vec<AdamState>>,
    weight_optimizer: AdamState,
    loss: LossKind,
    epochs_trained: u64,
}

impl SoftAveragingModel {
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
        if let Some(m) = learners
            .iter()
            .position(|l| (l.input_dim(), l.output_dim()) != (d, k))
        {
            return Err(Error::dim(
                "SoftAveragingModel::from_learners",
                format!("learners {d} -> {k}"),
                format!("learner {m}"),
            ));
        }
        let count = learners.len();
        let mixing_weights = Matrix::filled(1, count, 1.0 / count as f64);
        let optimizers = learners
            .iter()
            .map(|l| l.new_optimizer(AdamConfig::default()))
            .collect();
        Ok(Self {
            weight_optimizer: AdamState::for_param(&mixing_weights, AdamConfig::default()),
            learners,
            mixing_weights,
            optimizers,
            loss,
            epochs_trained: 0,
        })
    }

    pub fn learners(&self) -> &[Learner] {
        &self.learners
    }

    pub fn mixing_weights(&self) -> &[f64] {
        self.mixing_weights.as_slice()
    }

    pub fn num_learners(&self) -> usize {
        self.learners.len()
    }

    pub fn loss(&self) -> LossKind {
        self.loss
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

    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(x.rows(), self.output_dim());
        for (learner, &w) in self.learners.iter().zip(self.mixing_weights.as_slice()) {
            out.add_scaled_assign(w, &learner.predict(x)?)?;
        }
        Ok(out)
    }

    /// Task loss on the batch plus gradients for every learner and for the
    /// mixing weights (returned as a `1×M` matrix).
    pub fn batch_gradients(
        &self,
        x: &Matrix,
        y: &Matrix,
    ) -> Result<(f64, Vec<LearnerGradients>, Matrix)> {
        check_batch(x, y, self.input_dim(), self.output_dim())?;
        let forwards = self
            .learners
            .iter()
            .map(|l| l.forward(x))
            .collect::<Result<Vec<_>>>()?;
        let weights = self.mixing_weights.as_slice();
        let mut combined = Matrix::zeros(x.rows(), self.output_dim());
        for ((out, _), &w) in forwards.iter().zip(weights) {
            combined.add_scaled_assign(w, out)?;
        }
        let loss = loss_value(self.loss, &combined, y)?;
        let upstream = loss_gradient(self.loss, &combined, y)?.scale(1.0 / x.rows() as f64);
        let mut weight_grad = Matrix::zeros(1, self.learners.len());
        let mut grads = Vec::with_capacity(self.learners.len());
        for (m, ((learner, (out, cache)), &w)) in
            self.learners.iter().zip(&forwards).zip(weights).enumerate()
        {
            weight_grad.set(0, m, upstream.hadamard(out)?.sum());
            grads.push(learner.backward(cache, &upstream.scale(w))?);
        }
        Ok((loss, grads, weight_grad))
    }

    pub fn train_batch(&mut self, batch: &Batch, adam: &AdamConfig) -> Result<BatchLosses> {
        let (loss, grads, weight_grad) = self.batch_gradients(&batch.features, &batch.targets)?;
        let losses = BatchLosses {
            local: Vec::new(),
            global: loss,
        };
        check_finite(&losses, "soft averaging training")?;
        for ((learner, states), g) in self
            .learners
            .iter_mut()
            .zip(&mut self.optimizers)
            .zip(&grads)
        {
            for s in states.iter_mut() {
                s.configure(*adam);
            }
            learner.apply_adam(g, states)?;
        }
        self.weight_optimizer.configure(*adam);
        self.weight_optimizer
            .step(&mut self.mixing_weights, &weight_grad)?;
        Ok(losses)
    }

    pub fn fit(
        &mut self,
        data: &Dataset,
        config: &TrainConfig,
        on_batch: impl FnMut(&BatchRecord),
    ) -> Result<()> {
        if data.feature_dim() != self.input_dim() || data.output_dim() != self.output_dim() {
            return Err(Error::dim(
                "SoftAveragingModel::fit",
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

    #[test]
    fn weights_start_uniform() {
        let model = SoftAveragingModel::new(
            &LearnerSpec::Tree { depth: 2 },
            4,
            2,
            2,
            LossKind::SoftmaxCrossEntropy,
            0,
        )
        .unwrap();
        assert_eq!(model.mixing_weights(), &[0.25; 4]);
    }

    #[test]
    fn identical_learners_get_identical_gradients() {
        let data = make_synthetic(SyntheticKind::Gaussians2, 50, 1)
            .unwrap()
            .dataset;
        let tree = init_learner(&LearnerSpec::Tree { depth: 3 }, 2, 2, 4).unwrap();
        let model = SoftAveragingModel::from_learners(
            vec![tree.clone(), tree.clone(), tree],
            LossKind::SoftmaxCrossEntropy,
        )
        .unwrap();
        let (_, grads, wg) = model
            .batch_gradients(data.features(), data.targets())
            .unwrap();
        assert_eq!(grads[0], grads[1]);
        assert_eq!(grads[1], grads[2]);
        assert_eq!(wg.get(0, 0), wg.get(0, 2));
    }

    #[test]
    fn single_learner_first_step_matches_plain_training() {
        let data = make_synthetic(SyntheticKind::Gaussians2, 64, 1)
            .unwrap()
            .dataset;
        let spec = LearnerSpec::Tree { depth: 2 };
        let mut model =
            SoftAveragingModel::new(&spec, 1, 2, 2, LossKind::SoftmaxCrossEntropy, 7).unwrap();
        let mut lone = model.learners()[0].clone();
        let batch = data.batch(&(0..64).collect::<Vec<_>>());
        let adam = AdamConfig::default();
        model.train_batch(&batch, &adam).unwrap();

        let (out, cache) = lone.forward(&batch.features).unwrap();
        let upstream = loss_gradient(LossKind::SoftmaxCrossEntropy, &out, &batch.targets)
            .unwrap()
            .scale(1.0 / 64.0);
        let grads = lone.backward(&cache, &upstream).unwrap();
        let mut states = lone.new_optimizer(adam);
        lone.apply_adam(&grads, &mut states).unwrap();
        assert_eq!(model.learners()[0].params(), lone.params());
    }

    #[test]
    fn training_reduces_loss_and_keeps_weights_finite() {
        let data = make_synthetic(SyntheticKind::Gaussians2, 400, 3)
            .unwrap()
            .dataset;
        let mut model = SoftAveragingModel::new(
            &LearnerSpec::Tree { depth: 3 },
            4,
            2,
            2,
            LossKind::SoftmaxCrossEntropy,
            0,
        )
        .unwrap();
        let mut losses = Vec::new();
        let config = TrainConfig {
            epochs: 1,
            batch_size: 32,
            lr: 1e-2,
            ..TrainConfig::default()
        };
        model
            .fit(&data, &config, |r| losses.push(r.global_loss))
            .unwrap();
        assert!(model.mixing_weights().iter().all(|w| w.is_finite()));
        assert!(losses.last().unwrap() < &losses[0], "{losses:?}");
    }
}
