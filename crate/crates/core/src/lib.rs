//! Gradient boosting over differentiable base learners.
//!
//! The soft GBM trains all `M` learners jointly on each mini-batch: learner
//! `m` regresses onto the negative loss gradient evaluated at the summed
//! output of learners `0..m`, and the ensemble prediction is the plain sum
//! of learner outputs. The classic stagewise (hard) GBM and a soft-averaging
//! ensemble are provided over the same learners for comparison.
//!
//! ```
//! use sgbm_core::{make_synthetic, LearnerSpec, SgbmModel, SyntheticKind, TrainConfig};
//!
//! let data = make_synthetic(SyntheticKind::Gaussians2, 200, 1).unwrap().dataset;
//! let mut model = SgbmModel::new(
//!     &LearnerSpec::Tree { depth: 2 },
//!     3,
//!     data.feature_dim(),
//!     data.output_dim(),
//!     data.loss(),
//!     7,
//! )
//! .unwrap();
//! let config = TrainConfig { epochs: 2, ..TrainConfig::default() };
//! model.fit(&data, &config, |_| {}).unwrap();
//! let scores = model.predict(data.features()).unwrap();
//! assert_eq!(scores.shape(), (200, 2));
//! ```

pub mod boosting;
pub mod checkpoint;
pub mod data;
pub mod distill;
mod error;
pub mod gradcheck;
pub mod learners;
pub mod loss;
pub mod matrix;
pub mod metrics;
pub mod optim;
pub mod rng;

pub use boosting::{
    hard_gbm_train, residuals, worker_count, BatchLosses, BatchRecord, HardGbmModel, SgbmModel,
    SoftAveragingModel, StageRecord, TrainConfig,
};
pub use checkpoint::{Checkpoint, Model, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use data::{
    chunks, load_csv, load_csv_regression, load_idx, make_synthetic, one_hot, split, standardize,
    write_csv, Batch, BatchPlan, Dataset, LabelColumn, Standardizer, SyntheticKind, Task,
};
pub use distill::{
    distill_dataset, distill_train, load_teacher_scores, soften, write_teacher_scores,
    TeacherScores,
};
pub use error::{Error, Result};
pub use learners::{init_learner, Learner, LearnerGradients, LearnerSpec};
pub use loss::{loss_gradient, loss_value, LossKind};
pub use matrix::Matrix;
pub use metrics::{accuracy, mse};
pub use optim::{adam_update, AdamConfig, AdamState};
