//! Datasets, loaders, synthetic generators and batch iteration.

mod csv_io;
mod idx;
mod plan;
mod synthetic;

use serde::{Deserialize, Serialize};

pub(crate) use csv_io::map_csv_error;
pub use csv_io::{load_csv, load_csv_regression, write_csv, LabelColumn};
pub use idx::{load_idx, parse_idx_images, parse_idx_labels, IdxImages};
pub use plan::{chunks, split, standardize, BatchPlan, Standardizer};
pub use synthetic::{
    make_synthetic, multi_sine_oracle, Synthetic, SyntheticKind, GAUSSIANS2_BAYES_ACCURACY,
};

use crate::error::{Error, Result};
use crate::loss::{is_one_hot, LossKind, SOFT_TARGET_TOLERANCE};
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Task {
    Classification { classes: usize },
    Regression { outputs: usize },
}

impl Task {
    pub fn output_dim(self) -> usize {
        match self {
            Task::Classification { classes } => classes,
            Task::Regression { outputs } => outputs,
        }
    }

    /// Loss used for hard-label training on this task.
    pub fn default_loss(self) -> LossKind {
        match self {
            Task::Classification { .. } => LossKind::SoftmaxCrossEntropy,
            Task::Regression { .. } => LossKind::SquaredError,
        }
    }

    pub fn is_classification(self) -> bool {
        matches!(self, Task::Classification { .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Matrix,
    targets: Matrix,
    task: Task,
    class_names: Option<Vec<String>>,
    soft_targets: bool,
}

/// A mini-batch copied out of a dataset.
#[derive(Clone, Debug)]
pub struct Batch {
    pub features: Matrix,
    pub targets: Matrix,
}

impl Dataset {
    pub fn new(features: Matrix, targets: Matrix, task: Task) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::invalid("empty dataset"));
        }
        if features.cols() == 0 {
            return Err(Error::invalid("dataset has no feature columns"));
        }
        if targets.rows() != features.rows() {
            return Err(Error::dim(
                "Dataset::new",
                format!("{} target rows", features.rows()),
                targets.rows(),
            ));
        }
        if targets.cols() != task.output_dim() {
            return Err(Error::dim(
                "Dataset::new",
                format!("{} target columns", task.output_dim()),
                targets.cols(),
            ));
        }
        if task.is_classification() {
            for (i, row) in targets.iter_rows().enumerate() {
                if !is_one_hot(row) {
                    return Err(Error::invalid(format!("target row {i} is not one-hot")));
                }
            }
        }
        Ok(Self {
            features,
            targets,
            task,
            class_names: None,
            soft_targets: false,
        })
    }

    /// Builds a classification dataset from integer labels.
    pub fn from_labels(features: Matrix, labels: &[usize], classes: usize) -> Result<Self> {
        let targets = one_hot(labels, classes)?;
        Self::new(features, targets, Task::Classification { classes })
    }

    pub fn with_class_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.task.output_dim() || !self.task.is_classification() {
            return Err(Error::invalid(format!(
                "{} class names for task {:?}",
                names.len(),
                self.task
            )));
        }
        self.class_names = Some(names);
        Ok(self)
    }

    /// Replaces classification targets with probability rows (distillation).
    pub fn relabel_soft(&self, soft: Matrix) -> Result<Self> {
        if !self.task.is_classification() {
            return Err(Error::invalid(
                "soft relabelling needs a classification dataset",
            ));
        }
        if soft.shape() != self.targets.shape() {
            return Err(Error::dim(
                "relabel_soft",
                format!("{}x{}", self.targets.rows(), self.targets.cols()),
                format!("{}x{}", soft.rows(), soft.cols()),
            ));
        }
        LossKind::SoftTargetCrossEntropy.validate_targets(&soft)?;
        debug_assert!(soft
            .iter_rows()
            .all(|r| (r.iter().sum::<f64>() - 1.0).abs() <= SOFT_TARGET_TOLERANCE));
        Ok(Self {
            features: self.features.clone(),
            targets: soft,
            task: self.task,
            class_names: self.class_names.clone(),
            soft_targets: true,
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn targets(&self) -> &Matrix {
        &self.targets
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn class_names(&self) -> Option<&[String]> {
        self.class_names.as_deref()
    }

    pub fn has_soft_targets(&self) -> bool {
        self.soft_targets
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.targets.cols()
    }

    /// Class index per row (argmax of the target row).
    pub fn labels(&self) -> Vec<usize> {
        self.targets.argmax_rows()
    }

    /// Loss matching the current targets: soft cross-entropy for relabelled
    /// data, otherwise the task default.
    pub fn loss(&self) -> LossKind {
        if self.soft_targets {
            LossKind::SoftTargetCrossEntropy
        } else {
            self.task.default_loss()
        }
    }

    pub fn batch(&self, indices: &[usize]) -> Batch {
        Batch {
            features: self.features.select_rows(indices),
            targets: self.targets.select_rows(indices),
        }
    }

    /// Subset in the given row order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::invalid("empty dataset"));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::invalid(format!("row index {bad} out of range")));
        }
        Ok(Self {
            features: self.features.select_rows(indices),
            targets: self.targets.select_rows(indices),
            task: self.task,
            class_names: self.class_names.clone(),
            soft_targets: self.soft_targets,
        })
    }

    pub fn concat(parts: &[&Dataset]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("empty dataset"))?;
        if parts.iter().any(|p| p.task != first.task) {
            return Err(Error::invalid(
                "cannot concatenate datasets of different tasks",
            ));
        }
        let features: Vec<&Matrix> = parts.iter().map(|p| &p.features).collect();
        let targets: Vec<&Matrix> = parts.iter().map(|p| &p.targets).collect();
        Ok(Self {
            features: Matrix::vstack(&features)?,
            targets: Matrix::vstack(&targets)?,
            task: first.task,
            class_names: first.class_names.clone(),
            soft_targets: parts.iter().any(|p| p.soft_targets),
        })
    }

    pub(crate) fn with_features(&self, features: Matrix) -> Self {
        Self {
            features,
            ..self.clone()
        }
    }
}

pub fn one_hot(labels: &[usize], classes: usize) -> Result<Matrix> {
    let mut targets = Matrix::zeros(labels.len(), classes);
    for (i, &label) in labels.iter().enumerate() {
        if label >= classes {
            return Err(Error::invalid(format!(
                "label {label} at row {i} out of range for {classes} classes"
            )));
        }
        targets.set(i, label, 1.0);
    }
    Ok(targets)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_rows() {
        let t = one_hot(&[2, 0, 1], 3).unwrap();
        for row in t.iter_rows() {
            assert_eq!(row.iter().filter(|&&v| v == 1.0).count(), 1);
            assert_eq!(row.iter().filter(|&&v| v == 0.0).count(), 2);
        }
        assert_eq!(t.argmax_rows(), vec![2, 0, 1]);
        assert!(one_hot(&[3], 3).is_err());
    }

    #[test]
    fn new_validates() {
        let x = Matrix::zeros(2, 2);
        assert!(Dataset::new(
            Matrix::zeros(0, 2),
            Matrix::zeros(0, 2),
            Task::Regression { outputs: 2 }
        )
        .is_err());
        let soft = Matrix::filled(2, 2, 0.5);
        assert!(
            Dataset::new(x.clone(), soft.clone(), Task::Classification { classes: 2 }).is_err()
        );
        assert!(Dataset::new(x.clone(), soft.clone(), Task::Regression { outputs: 2 }).is_ok());
        let ds = Dataset::from_labels(x, &[0, 1], 2).unwrap();
        let relabelled = ds.relabel_soft(soft).unwrap();
        assert!(relabelled.has_soft_targets());
        assert_eq!(relabelled.loss(), LossKind::SoftTargetCrossEntropy);
        assert!(ds.relabel_soft(Matrix::filled(2, 2, 0.4)).is_err());
    }
}
