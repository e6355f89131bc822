//! Evaluation metrics.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Fraction of rows whose argmax score equals the label.
pub fn accuracy(scores: &Matrix, labels: &[usize]) -> Result<f64> {
    if scores.rows() != labels.len() {
        return Err(Error::dim("accuracy", scores.rows(), labels.len()));
    }
    if labels.is_empty() {
        return Err(Error::invalid("accuracy of an empty set"));
    }
    let hits = scores
        .argmax_rows()
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Mean squared error over all `N×K` entries.
pub fn mse(predictions: &Matrix, targets: &Matrix) -> Result<f64> {
    if predictions.shape() != targets.shape() {
        return Err(Error::dim(
            "mse",
            format!("{}x{}", targets.rows(), targets.cols()),
            format!("{}x{}", predictions.rows(), predictions.cols()),
        ));
    }
    if targets.is_empty() {
        return Err(Error::invalid("mse of an empty set"));
    }
    let diff = predictions.sub(targets)?;
    Ok(diff.as_slice().iter().map(|v| v * v).sum::<f64>() / diff.len() as f64)
}
