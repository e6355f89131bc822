//! Task losses and their analytic gradients with respect to raw scores.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{log_sum_exp, softmax_in_place, Matrix};

/// Tolerance on soft-target row sums.
pub const SOFT_TARGET_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Softmax followed by cross-entropy against one-hot rows.
    SoftmaxCrossEntropy,
    /// `½‖scores − targets‖²` per sample.
    SquaredError,
    /// Softmax followed by cross-entropy against probability rows.
    SoftTargetCrossEntropy,
}

impl LossKind {
    /// Checks that `targets` is admissible for this loss.
    pub fn validate_targets(self, targets: &Matrix) -> Result<()> {
        match self {
            LossKind::SquaredError => Ok(()),
            LossKind::SoftmaxCrossEntropy => {
                for (i, row) in targets.iter_rows().enumerate() {
                    if !is_one_hot(row) {
                        return Err(Error::invalid(format!("target row {i} is not one-hot")));
                    }
                }
                Ok(())
            }
            LossKind::SoftTargetCrossEntropy => {
                for (i, row) in targets.iter_rows().enumerate() {
                    let total: f64 = row.iter().sum();
                    if row.iter().any(|&v| v < 0.0) || (total - 1.0).abs() > SOFT_TARGET_TOLERANCE {
                        return Err(Error::invalid(format!(
                            "target row {i} is not a probability vector (sum {total})"
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    fn is_softmax(self) -> bool {
        !matches!(self, LossKind::SquaredError)
    }
}

pub(crate) fn is_one_hot(row: &[f64]) -> bool {
    let mut ones = 0;
    for &v in row {
        if v == 1.0 {
            ones += 1;
        } else if v != 0.0 {
            return false;
        }
    }
    ones == 1
}

fn check(kind: LossKind, scores: &Matrix, targets: &Matrix) -> Result<()> {
    if scores.shape() != targets.shape() {
        return Err(Error::dim(
            "loss",
            format!("targets {}x{}", scores.rows(), scores.cols()),
            format!("{}x{}", targets.rows(), targets.cols()),
        ));
    }
    kind.validate_targets(targets)
}

/// Mean per-sample loss over the rows of `scores`.
pub fn loss_value(kind: LossKind, scores: &Matrix, targets: &Matrix) -> Result<f64> {
    check(kind, scores, targets)?;
    let n = scores.rows();
    if n == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (s, y) in scores.iter_rows().zip(targets.iter_rows()) {
        total += if kind.is_softmax() {
            let lse = log_sum_exp(s);
            s.iter().zip(y).map(|(si, yi)| yi * (lse - si)).sum::<f64>()
        } else {
            0.5 * s
                .iter()
                .zip(y)
                .map(|(si, yi)| (si - yi) * (si - yi))
                .sum::<f64>()
        };
    }
    Ok(total / n as f64)
}

/// Gradient of each row's own loss with respect to that row of scores.
///
/// The result is not divided by the batch size and not negated.
pub fn loss_gradient(kind: LossKind, scores: &Matrix, targets: &Matrix) -> Result<Matrix> {
    check(kind, scores, targets)?;
    if kind.is_softmax() {
        let mut grad = scores.clone();
        for r in 0..grad.rows() {
            let row = grad.row_mut(r);
            softmax_in_place(row);
            for (g, y) in row.iter_mut().zip(targets.row(r)) {
                *g -= y;
            }
        }
        Ok(grad)
    } else {
        scores.sub(targets)
    }
}
