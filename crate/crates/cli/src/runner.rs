use std::time::Instant;

use sgbm_core::{
    accuracy, hard_gbm_train, loss_value, mse, BatchRecord, Dataset, HardGbmModel, LossKind,
    Matrix, Model, SgbmModel, SoftAveragingModel, TrainConfig,
};

use crate::error::{CliError, CliResult};
use crate::records::MetricsRecord;
use crate::settings::{Algo, ModelSpec};

/// Test-set quality: accuracy for classification, MSE for regression.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Metric {
    Accuracy(f64),
    Mse(f64),
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy(_) => "accuracy",
            Metric::Mse(_) => "mse",
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Metric::Accuracy(v) | Metric::Mse(v) => v,
        }
    }

    fn fill(self, record: &mut MetricsRecord) {
        match self {
            Metric::Accuracy(v) => record.test_accuracy = Some(v),
            Metric::Mse(v) => record.test_mse = Some(v),
        }
    }
}

impl std::fmt::Display for Metric {
    /// Shortest round-trip formatting, so printed values compare exactly.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {}", self.name(), self.value())
    }
}

/// Scores `predictions` against a dataset's targets.
pub fn score(predictions: &Matrix, data: &Dataset) -> CliResult<Metric> {
    if data.task().is_classification() {
        Ok(Metric::Accuracy(accuracy(predictions, &data.labels())?))
    } else {
        Ok(Metric::Mse(mse(predictions, data.targets())?))
    }
}

fn task_loss(loss: LossKind, predictions: &Matrix, data: &Dataset) -> CliResult<f64> {
    let value = loss_value(loss, predictions, data.targets())?;
    if !value.is_finite() {
        return Err(CliError::Numeric(sgbm_core::Error::Numeric(format!(
            "training loss is {value}"
        ))));
    }
    Ok(value)
}

/// A finished training run.
#[derive(Clone, Debug)]
pub struct Trained {
    pub model: Model,
    pub metric: Metric,
    /// Training time only.
    pub train_ms: f64,
}

/// Mean per-learner local loss over an epoch's batches.
#[derive(Default)]
struct EpochLosses {
    sums: Vec<f64>,
    batches: usize,
}

impl EpochLosses {
    fn add(&mut self, record: &BatchRecord) {
        if self.sums.len() < record.local_losses.len() {
            self.sums.resize(record.local_losses.len(), 0.0);
        }
        for (s, l) in self.sums.iter_mut().zip(&record.local_losses) {
            *s += l;
        }
        self.batches += 1;
    }

    fn take(&mut self) -> Vec<f64> {
        let n = self.batches.max(1) as f64;
        let out = self.sums.iter().map(|s| s / n).collect();
        *self = EpochLosses::default();
        out
    }
}

/// Jointly trained models that continue training across `fit` calls.
pub(crate) trait Resumable {
    fn fit_more(
        &mut self,
        data: &Dataset,
        config: &TrainConfig,
        on_batch: &mut dyn FnMut(&BatchRecord),
    ) -> sgbm_core::Result<()>;
    fn predict(&self, x: &Matrix) -> sgbm_core::Result<Matrix>;
    fn loss(&self) -> LossKind;
    fn epochs_trained(&self) -> u64;
}

impl Resumable for SgbmModel {
    fn fit_more(
        &mut self,
        data: &Dataset,
        config: &TrainConfig,
        on_batch: &mut dyn FnMut(&BatchRecord),
    ) -> sgbm_core::Result<()> {
        self.fit(data, config, on_batch)
    }
    fn predict(&self, x: &Matrix) -> sgbm_core::Result<Matrix> {
        SgbmModel::predict(self, x)
    }
    fn loss(&self) -> LossKind {
        SgbmModel::loss(self)
    }
    fn epochs_trained(&self) -> u64 {
        SgbmModel::epochs_trained(self)
    }
}

impl Resumable for SoftAveragingModel {
    fn fit_more(
        &mut self,
        data: &Dataset,
        config: &TrainConfig,
        on_batch: &mut dyn FnMut(&BatchRecord),
    ) -> sgbm_core::Result<()> {
        self.fit(data, config, on_batch)
    }
    fn predict(&self, x: &Matrix) -> sgbm_core::Result<Matrix> {
        SoftAveragingModel::predict(self, x)
    }
    fn loss(&self) -> LossKind {
        SoftAveragingModel::loss(self)
    }
    fn epochs_trained(&self) -> u64 {
        SoftAveragingModel::epochs_trained(self)
    }
}

/// Runs `config.epochs` more epochs one at a time, emitting a record after
/// each. Returns the training time spent. Evaluation is not timed.
pub(crate) fn train_epochs(
    model: &mut dyn Resumable,
    train: &Dataset,
    test: &Dataset,
    config: &TrainConfig,
    run_id: &str,
    clock_ms: f64,
    on_record: &mut dyn FnMut(&MetricsRecord) -> CliResult<()>,
) -> CliResult<f64> {
    let one = TrainConfig {
        epochs: 1,
        ..config.clone()
    };
    let mut elapsed = 0.0;
    let mut losses = EpochLosses::default();
    for _ in 0..config.epochs {
        let start = Instant::now();
        model.fit_more(train, &one, &mut |r| losses.add(r))?;
        elapsed += start.elapsed().as_secs_f64() * 1e3;
        let train_loss = task_loss(model.loss(), &model.predict(train.features())?, train)?;
        let mut record = MetricsRecord {
            run_id: run_id.to_string(),
            epoch: model.epochs_trained(),
            stage: None,
            chunk: None,
            train_loss,
            test_accuracy: None,
            test_mse: None,
            wall_clock_ms: clock_ms + elapsed,
            local_losses: losses.take(),
        };
        score(&model.predict(test.features())?, test)?.fill(&mut record);
        on_record(&record)?;
    }
    Ok(elapsed)
}

/// Hard GBM with one record per stage. Stage timings exclude the time
/// spent evaluating inside the stage callback.
pub(crate) fn train_hard(
    spec: &ModelSpec,
    train: &Dataset,
    test: &Dataset,
    config: &TrainConfig,
    run_id: &str,
    on_record: &mut dyn FnMut(&MetricsRecord) -> CliResult<()>,
) -> CliResult<(HardGbmModel, f64)> {
    let mut eval_ms = 0.0;
    let mut train_ms = 0.0;
    let mut failure: Option<CliError> = None;
    let model = hard_gbm_train(
        train,
        spec.num_learners,
        spec.epsilon,
        &spec.learner,
        config,
        |stage, partial| {
            if failure.is_some() {
                return;
            }
            let start = Instant::now();
            train_ms = stage.wall_clock_ms - eval_ms;
            let mut record = MetricsRecord {
                run_id: run_id.to_string(),
                epoch: ((stage.stage + 1) * config.epochs) as u64,
                stage: Some(stage.stage),
                chunk: None,
                train_loss: stage.train_loss,
                test_accuracy: None,
                test_mse: None,
                wall_clock_ms: train_ms,
                local_losses: vec![stage.fit_loss],
            };
            let result = partial
                .predict(test.features())
                .map_err(CliError::from)
                .and_then(|p| score(&p, test))
                .and_then(|m| {
                    m.fill(&mut record);
                    on_record(&record)
                });
            if let Err(e) = result {
                failure = Some(e);
            }
            eval_ms += start.elapsed().as_secs_f64() * 1e3;
        },
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok((model, train_ms)),
    }
}

/// Builds and trains the model a run describes, emitting metrics records.
pub fn train(
    spec: &ModelSpec,
    train: &Dataset,
    test: &Dataset,
    config: &TrainConfig,
    run_id: &str,
    on_record: &mut dyn FnMut(&MetricsRecord) -> CliResult<()>,
) -> CliResult<Trained> {
    let (d, k, loss) = (train.feature_dim(), train.output_dim(), train.loss());
    let (model, train_ms) = match spec.algo {
        Algo::Sgbm => {
            let mut model =
                SgbmModel::new(&spec.learner, spec.num_learners, d, k, loss, config.seed)?;
            let ms = train_epochs(&mut model, train, test, config, run_id, 0.0, on_record)?;
            (Model::Sgbm(model), ms)
        }
        Algo::SoftAvg => {
            let mut model =
                SoftAveragingModel::new(&spec.learner, spec.num_learners, d, k, loss, config.seed)?;
            let ms = train_epochs(&mut model, train, test, config, run_id, 0.0, on_record)?;
            (Model::SoftAvg(model), ms)
        }
        Algo::HardGbm => {
            let (model, ms) = train_hard(spec, train, test, config, run_id, on_record)?;
            (Model::HardGbm(model), ms)
        }
    };
    let metric = score(&model.predict(test.features())?, test)?;
    Ok(Trained {
        model,
        metric,
        train_ms,
    })
}
