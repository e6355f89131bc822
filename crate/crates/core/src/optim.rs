//! Adam with decoupled weight decay.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 5e-4,
        }
    }
}

/// Moment estimates for one parameter block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub m: Matrix,
    pub v: Matrix,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl AdamState {
    pub fn new(rows: usize, cols: usize, config: AdamConfig) -> Self {
        Self {
            step: 0,
            m: Matrix::zeros(rows, cols),
            v: Matrix::zeros(rows, cols),
            lr: config.lr,
            beta1: config.beta1,
            beta2: config.beta2,
            eps: config.eps,
            weight_decay: config.weight_decay,
        }
    }

    pub fn for_param(param: &Matrix, config: AdamConfig) -> Self {
        Self::new(param.rows(), param.cols(), config)
    }

    /// Replaces the hyper-parameters, keeping moments and step count.
    pub fn configure(&mut self, config: AdamConfig) {
        self.lr = config.lr;
        self.beta1 = config.beta1;
        self.beta2 = config.beta2;
        self.eps = config.eps;
        self.weight_decay = config.weight_decay;
    }

    /// Applies one step to `param` in place.
    pub fn step(&mut self, param: &mut Matrix, grad: &Matrix) -> Result<()> {
        if param.shape() != grad.shape() || param.shape() != self.m.shape() {
            return Err(Error::dim(
                "adam_update",
                format!("{}x{}", self.m.rows(), self.m.cols()),
                format!(
                    "param {}x{}, grad {}x{}",
                    param.rows(),
                    param.cols(),
                    grad.rows(),
                    grad.cols()
                ),
            ));
        }
        self.step += 1;
        let t = self.step as i32;
        let bias1 = 1.0 - self.beta1.powi(t);
        let bias2 = 1.0 - self.beta2.powi(t);
        let shrink = 1.0 - self.lr * self.weight_decay;
        let (b1, b2) = (self.beta1, self.beta2);
        let p = param.as_mut_slice();
        let m = self.m.as_mut_slice();
        let v = self.v.as_mut_slice();
        for (i, &g) in grad.as_slice().iter().enumerate() {
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            let m_hat = m[i] / bias1;
            let v_hat = v[i] / bias2;
            p[i] = p[i] * shrink - self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Functional form of [`AdamState::step`]: returns the updated parameter.
pub fn adam_update(param: &Matrix, grad: &Matrix, state: &mut AdamState) -> Result<Matrix> {
    let mut out = param.clone();
    state.step(&mut out, grad)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let param = Matrix::from_vec(1, 3, vec![0.5, -1.0, 2.0]).unwrap();
        let grad = Matrix::from_vec(1, 3, vec![0.3, -7.0, 1e-3]).unwrap();
        let mut state = AdamState::for_param(&param, AdamConfig::default());
        let next = adam_update(&param, &grad, &mut state).unwrap();
        for i in 0..3 {
            let delta = next.as_slice()[i] - param.as_slice()[i];
            let expected = -1e-3 * grad.as_slice()[i].signum();
            assert!((delta - expected).abs() < 1e-6, "{delta} vs {expected}");
        }
        assert_eq!(state.step, 1);
    }

    #[test]
    fn zero_grad_without_decay_is_identity() {
        let param = Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let config = AdamConfig {
            weight_decay: 0.0,
            ..AdamConfig::default()
        };
        let mut state = AdamState::for_param(&param, config);
        let next = adam_update(&param, &Matrix::zeros(2, 2), &mut state).unwrap();
        assert_eq!(next, param);
    }

    #[test]
    fn zero_lr_is_identity() {
        let param = Matrix::from_vec(1, 2, vec![1.0, -3.0]).unwrap();
        let config = AdamConfig {
            lr: 0.0,
            ..AdamConfig::default()
        };
        let mut state = AdamState::for_param(&param, config);
        for _ in 0..5 {
            let grad = Matrix::from_vec(1, 2, vec![10.0, -0.1]).unwrap();
            let next = adam_update(&param, &grad, &mut state).unwrap();
            assert_eq!(next, param);
        }
        assert_eq!(state.step, 5);
    }

    #[test]
    fn defaults() {
        let c = AdamConfig::default();
        assert_eq!((c.lr, c.beta1, c.beta2, c.eps), (1e-3, 0.9, 0.999, 1e-8));
        assert_eq!(c.weight_decay, 5e-4);
    }

    #[test]
    fn shape_mismatch() {
        let mut state = AdamState::new(2, 2, AdamConfig::default());
        let r = adam_update(&Matrix::zeros(2, 2), &Matrix::zeros(1, 2), &mut state);
        assert!(matches!(r, Err(Error::Dimension { .. })));
        assert_eq!(state.step, 0);
    }
}
