//! Central finite-difference checks for hand-written gradients.

use crate::error::Result;
use crate::learners::{Learner, LearnerGradients};
use crate::matrix::Matrix;

/// Default perturbation for central differences.
pub const FD_STEP: f64 = 1e-5;

/// Magnitude below which a gradient entry is compared absolutely rather
/// than relatively; central differences cannot resolve smaller values.
pub const RELATIVE_FLOOR: f64 = 1e-6;

/// `|a − b| / max(|a|, |b|, RELATIVE_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Numeric gradient of `objective` with respect to every parameter of
/// `learner`, by central differences with the given step.
pub fn numeric_learner_gradient(
    learner: &Learner,
    step: f64,
    mut objective: impl FnMut(&Learner) -> Result<f64>,
) -> Result<LearnerGradients> {
    let mut probe = learner.clone();
    let shapes: Vec<(usize, usize)> = learner.params().iter().map(|p| p.shape()).collect();
    let mut blocks = Vec::with_capacity(shapes.len());
    for (b, &(rows, cols)) in shapes.iter().enumerate() {
        let mut grad = Matrix::zeros(rows, cols);
        for i in 0..rows * cols {
            let original = probe.params()[b].as_slice()[i];
            probe.params_mut()[b].as_mut_slice()[i] = original + step;
            let plus = objective(&probe)?;
            probe.params_mut()[b].as_mut_slice()[i] = original - step;
            let minus = objective(&probe)?;
            probe.params_mut()[b].as_mut_slice()[i] = original;
            grad.as_mut_slice()[i] = (plus - minus) / (2.0 * step);
        }
        blocks.push(grad);
    }
    Ok(LearnerGradients { blocks })
}

/// Largest [`relative_error`] over all matching entries.
pub fn max_relative_error(analytic: &LearnerGradients, numeric: &LearnerGradients) -> f64 {
    analytic
        .blocks
        .iter()
        .zip(&numeric.blocks)
        .flat_map(|(a, n)| a.as_slice().iter().zip(n.as_slice()))
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

/// Compares `backward(upstream)` with finite differences of
/// `Σ upstream ⊙ forward(x)`. Returns the worst relative error.
pub fn check_learner_gradients(learner: &Learner, x: &Matrix, upstream: &Matrix) -> Result<f64> {
    let (_, cache) = learner.forward(x)?;
    let analytic = learner.backward(&cache, upstream)?;
    let numeric = numeric_learner_gradient(learner, FD_STEP, |l| {
        Ok(l.predict(x)?.hadamard(upstream)?.sum())
    })?;
    Ok(max_relative_error(&analytic, &numeric))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(1.0, 1.0), 0.0);
        assert!((relative_error(2.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((relative_error(0.0, 1e-9) - 1e-3).abs() < 1e-12);
    }
}
