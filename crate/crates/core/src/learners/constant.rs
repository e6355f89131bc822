use serde::{Deserialize, Serialize};

use super::{check_input, check_upstream, uniform_matrix, CacheTag, LearnerGradients};
use crate::error::Result;
use crate::matrix::Matrix;
use crate::rng::Rng;

/// Degenerate depth-0 tree: a single leaf whose value is emitted for every
/// input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantLearner {
    input_dim: usize,
    value: Matrix,
    #[serde(skip)]
    tag: CacheTag,
}

#[derive(Clone, Debug)]
pub struct ConstantCache {
    stamp: (u64, u64),
    rows: usize,
}

impl ConstantLearner {
    pub(crate) fn init(input_dim: usize, output_dim: usize, rng: &mut Rng) -> Self {
        Self {
            input_dim,
            value: uniform_matrix(1, output_dim, 0.1, rng),
            tag: CacheTag::default(),
        }
    }

    pub fn value(&self) -> &[f64] {
        self.value.as_slice()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.value.cols()
    }

    pub(crate) fn params(&self) -> Vec<&Matrix> {
        vec![&self.value]
    }

    pub(crate) fn params_mut(&mut self) -> Vec<&mut Matrix> {
        self.tag.bump();
        vec![&mut self.value]
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, ConstantCache)> {
        check_input("constant_forward", x, self.input_dim)?;
        let out = Matrix::zeros(x.rows(), self.output_dim()).add_row_broadcast(&self.value)?;
        Ok((
            out,
            ConstantCache {
                stamp: self.tag.stamp(),
                rows: x.rows(),
            },
        ))
    }

    pub fn backward(&self, cache: &ConstantCache, upstream: &Matrix) -> Result<LearnerGradients> {
        self.tag.check(cache.stamp)?;
        check_upstream("constant_backward", upstream, cache.rows, self.output_dim())?;
        Ok(LearnerGradients {
            blocks: vec![upstream.column_sums()],
        })
    }
}
