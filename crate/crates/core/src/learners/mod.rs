//! Differentiable base learners.
//!
//! Every learner maps an `N x d` batch to `N x K` raw scores and can
//! back-propagate an upstream `N x K` gradient into gradients for each of
//! its parameter blocks. Parameter blocks are exposed as an ordered list of
//! matrices so the optimizer does not need to know the learner kind.

mod constant;
mod mlp;
mod tree;

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

pub use constant::{ConstantCache, ConstantLearner};
pub use mlp::{Activation, DenseLayer, Mlp, MlpCache};
pub use tree::{SoftTree, TreeCache};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::optim::{AdamConfig, AdamState};
use crate::rng::{seeded, Rng};

/// What kind of learner to build, independent of data dimensions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerSpec {
    Tree {
        depth: usize,
    },
    Mlp {
        hidden: Vec<usize>,
    },
    /// A single leaf: one learned output vector shared by all inputs.
    Constant,
}

impl LearnerSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            LearnerSpec::Tree { depth } if *depth < 1 => {
                Err(Error::invalid("tree depth must be at least 1"))
            }
            LearnerSpec::Tree { depth } if *depth > 20 => {
                Err(Error::invalid(format!("tree depth {depth} is too large")))
            }
            LearnerSpec::Mlp { hidden } if hidden.is_empty() => {
                Err(Error::invalid("mlp needs at least one hidden layer"))
            }
            LearnerSpec::Mlp { hidden } if hidden.contains(&0) => {
                Err(Error::invalid("mlp layer widths must be positive"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Learner {
    Tree(SoftTree),
    Mlp(Mlp),
    Constant(ConstantLearner),
}

/// Intermediate values saved by a forward pass for the matching backward pass.
#[derive(Clone, Debug)]
pub enum ForwardCache {
    Tree(TreeCache),
    Mlp(MlpCache),
    Constant(ConstantCache),
}

/// Per-parameter-block gradients, in the learner's parameter order.
#[derive(Clone, Debug, PartialEq)]
pub struct LearnerGradients {
    pub blocks: Vec<Matrix>,
}

impl LearnerGradients {
    pub fn is_finite(&self) -> bool {
        self.blocks.iter().all(Matrix::is_finite)
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|b| b.as_slice().iter())
            .fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

/// Builds a freshly initialized learner; fully determined by `seed`.
pub fn init_learner(
    spec: &LearnerSpec,
    input_dim: usize,
    output_dim: usize,
    seed: u64,
) -> Result<Learner> {
    spec.validate()?;
    if input_dim == 0 || output_dim == 0 {
        return Err(Error::invalid(format!(
            "learner dims must be positive (input {input_dim}, output {output_dim})"
        )));
    }
    let mut rng = seeded(seed);
    Ok(match spec {
        LearnerSpec::Tree { depth } => {
            Learner::Tree(SoftTree::init(*depth, input_dim, output_dim, &mut rng))
        }
        LearnerSpec::Mlp { hidden } => {
            Learner::Mlp(Mlp::init(input_dim, hidden, output_dim, &mut rng))
        }
        LearnerSpec::Constant => {
            Learner::Constant(ConstantLearner::init(input_dim, output_dim, &mut rng))
        }
    })
}

impl Learner {
    pub fn input_dim(&self) -> usize {
        match self {
            Learner::Tree(t) => t.input_dim(),
            Learner::Mlp(m) => m.input_dim(),
            Learner::Constant(c) => c.input_dim(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Learner::Tree(t) => t.output_dim(),
            Learner::Mlp(m) => m.output_dim(),
            Learner::Constant(c) => c.output_dim(),
        }
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, ForwardCache)> {
        match self {
            Learner::Tree(t) => t.forward(x).map(|(o, c)| (o, ForwardCache::Tree(c))),
            Learner::Mlp(m) => m.forward(x).map(|(o, c)| (o, ForwardCache::Mlp(c))),
            Learner::Constant(k) => k.forward(x).map(|(o, c)| (o, ForwardCache::Constant(c))),
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        self.forward(x).map(|(out, _)| out)
    }

    /// Gradients of `Σ upstream ⊙ forward(x)` for every parameter block.
    pub fn backward(&self, cache: &ForwardCache, upstream: &Matrix) -> Result<LearnerGradients> {
        match (self, cache) {
            (Learner::Tree(t), ForwardCache::Tree(c)) => t.backward(c, upstream),
            (Learner::Mlp(m), ForwardCache::Mlp(c)) => m.backward(c, upstream),
            (Learner::Constant(k), ForwardCache::Constant(c)) => k.backward(c, upstream),
            _ => Err(Error::Contract(
                "forward cache belongs to a different learner kind".into(),
            )),
        }
    }

    pub fn params(&self) -> Vec<&Matrix> {
        match self {
            Learner::Tree(t) => t.params(),
            Learner::Mlp(m) => m.params(),
            Learner::Constant(c) => c.params(),
        }
    }

    /// Mutable parameter blocks. Any cache taken before this call is
    /// considered stale afterwards.
    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        match self {
            Learner::Tree(t) => t.params_mut(),
            Learner::Mlp(m) => m.params_mut(),
            Learner::Constant(c) => c.params_mut(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn new_optimizer(&self, config: AdamConfig) -> Vec<AdamState> {
        self.params()
            .into_iter()
            .map(|p| AdamState::for_param(p, config))
            .collect()
    }

    pub fn apply_adam(&mut self, grads: &LearnerGradients, states: &mut [AdamState]) -> Result<()> {
        let params = self.params_mut();
        if params.len() != grads.blocks.len() || params.len() != states.len() {
            return Err(Error::Contract(format!(
                "learner has {} parameter blocks, got {} gradients and {} optimizer states",
                params.len(),
                grads.blocks.len(),
                states.len()
            )));
        }
        for ((param, grad), state) in params.into_iter().zip(&grads.blocks).zip(states) {
            state.step(param, grad)?;
        }
        Ok(())
    }
}

/// Identity of a learner's parameter state, used to reject stale caches.
///
/// Excluded from equality and serialization; clones get a fresh identity.
#[derive(Debug)]
pub(crate) struct CacheTag {
    instance: u64,
    revision: u64,
}

static NEXT_INSTANCE: AtomicU64 = AtomicU64::new(1);

impl Default for CacheTag {
    fn default() -> Self {
        Self {
            instance: NEXT_INSTANCE.fetch_add(1, Ordering::Relaxed),
            revision: 0,
        }
    }
}

impl Clone for CacheTag {
    fn clone(&self) -> Self {
        Self::default()
    }
}

impl PartialEq for CacheTag {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl CacheTag {
    pub(crate) fn stamp(&self) -> (u64, u64) {
        (self.instance, self.revision)
    }

    pub(crate) fn bump(&mut self) {
        self.revision += 1;
    }

    pub(crate) fn check(&self, stamp: (u64, u64)) -> Result<()> {
        if stamp != self.stamp() {
            return Err(Error::Contract(
                "forward cache is stale or was produced by another learner".into(),
            ));
        }
        Ok(())
    }
}

pub(crate) fn check_input(op: &'static str, x: &Matrix, input_dim: usize) -> Result<()> {
    if x.cols() != input_dim {
        return Err(Error::dim(
            op,
            format!("{input_dim} input columns"),
            x.cols(),
        ));
    }
    Ok(())
}

pub(crate) fn check_upstream(
    op: &'static str,
    upstream: &Matrix,
    rows: usize,
    output_dim: usize,
) -> Result<()> {
    if upstream.shape() != (rows, output_dim) {
        return Err(Error::dim(
            op,
            format!("upstream {rows}x{output_dim}"),
            format!("{}x{}", upstream.rows(), upstream.cols()),
        ));
    }
    Ok(())
}

pub(crate) fn uniform_matrix(rows: usize, cols: usize, scale: f64, rng: &mut Rng) -> Matrix {
    let values = (0..rows * cols)
        .map(|_| rng.random_range(-scale..scale))
        .collect();
    Matrix::from_vec(rows, cols, values).expect("finite uniform samples")
}

/// Glorot-uniform bound.
pub(crate) fn glorot(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic_per_seed() {
        let spec = LearnerSpec::Tree { depth: 3 };
        let a = init_learner(&spec, 4, 2, 11).unwrap();
        let b = init_learner(&spec, 4, 2, 11).unwrap();
        let c = init_learner(&spec, 4, 2, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let mlp = LearnerSpec::Mlp { hidden: vec![5, 3] };
        assert_eq!(
            init_learner(&mlp, 4, 2, 1).unwrap(),
            init_learner(&mlp, 4, 2, 1).unwrap()
        );
        assert_ne!(
            init_learner(&mlp, 4, 2, 1).unwrap(),
            init_learner(&mlp, 4, 2, 2).unwrap()
        );
    }

    #[test]
    fn mnist_sized_tree_structure() {
        let Learner::Tree(t) = init_learner(&LearnerSpec::Tree { depth: 5 }, 784, 10, 0).unwrap()
        else {
            unreachable!()
        };
        assert_eq!(t.gate_weights().shape(), (31, 784));
        assert_eq!(t.gate_bias().shape(), (1, 31));
        assert_eq!(t.leaf_values().shape(), (32, 10));
        assert!(t.gate_bias().as_slice().iter().all(|&b| b == 0.0));
        let s = (6.0f64 / 785.0).sqrt();
        assert!(t.gate_weights().as_slice().iter().all(|w| w.abs() < s));
        assert!(t.leaf_values().as_slice().iter().all(|v| v.abs() < 0.1));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(init_learner(&LearnerSpec::Tree { depth: 0 }, 2, 2, 0).is_err());
        assert!(init_learner(&LearnerSpec::Mlp { hidden: vec![] }, 2, 2, 0).is_err());
        assert!(init_learner(&LearnerSpec::Mlp { hidden: vec![3, 0] }, 2, 2, 0).is_err());
        assert!(init_learner(&LearnerSpec::Constant, 0, 2, 0).is_err());
    }

    #[test]
    fn cache_from_other_learner_is_rejected() {
        let spec = LearnerSpec::Tree { depth: 2 };
        let a = init_learner(&spec, 3, 2, 1).unwrap();
        let b = init_learner(&spec, 3, 2, 1).unwrap();
        let x = Matrix::zeros(4, 3);
        let (_, cache) = a.forward(&x).unwrap();
        let up = Matrix::zeros(4, 2);
        assert!(a.backward(&cache, &up).is_ok());
        assert!(matches!(b.backward(&cache, &up), Err(Error::Contract(_))));

        let mlp = init_learner(&LearnerSpec::Mlp { hidden: vec![2] }, 3, 2, 1).unwrap();
        assert!(matches!(mlp.backward(&cache, &up), Err(Error::Contract(_))));
    }

    #[test]
    fn cache_is_stale_after_update() {
        let mut a = init_learner(&LearnerSpec::Mlp { hidden: vec![4] }, 3, 2, 1).unwrap();
        let x = Matrix::filled(2, 3, 0.5);
        let (_, cache) = a.forward(&x).unwrap();
        let grads = a.backward(&cache, &Matrix::filled(2, 2, 1.0)).unwrap();
        let mut states = a.new_optimizer(AdamConfig::default());
        a.apply_adam(&grads, &mut states).unwrap();
        assert!(matches!(
            a.backward(&cache, &Matrix::filled(2, 2, 1.0)),
            Err(Error::Contract(_))
        ));
    }
}
