use serde::{Deserialize, Serialize};

use super::{check_input, check_upstream, glorot, uniform_matrix, CacheTag, LearnerGradients};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

/// `act(x · W + b)` with `W` stored `in x out`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Matrix,
    pub activation: Activation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
    #[serde(skip)]
    tag: CacheTag,
}

#[derive(Clone, Debug)]
pub struct MlpCache {
    stamp: (u64, u64),
    /// Input to each layer.
    inputs: Vec<Matrix>,
    /// Pre-activation of each layer.
    pre: Vec<Matrix>,
}

impl Mlp {
    /// ReLU hidden layers followed by an identity output layer.
    pub(crate) fn init(
        input_dim: usize,
        hidden: &[usize],
        output_dim: usize,
        rng: &mut Rng,
    ) -> Self {
        let mut widths = vec![input_dim];
        widths.extend_from_slice(hidden);
        widths.push(output_dim);
        let last = widths.len() - 2;
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| DenseLayer {
                weights: uniform_matrix(w[0], w[1], glorot(w[0], w[1]), rng),
                bias: Matrix::zeros(1, w[1]),
                activation: if i == last {
                    Activation::Identity
                } else {
                    Activation::Relu
                },
            })
            .collect();
        Self {
            layers,
            tag: CacheTag::default(),
        }
    }

    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        let Some(last) = layers.last() else {
            return Err(Error::invalid("mlp needs at least one layer"));
        };
        if last.activation != Activation::Identity {
            return Err(Error::invalid(
                "final mlp layer must use the identity activation",
            ));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.bias.shape() != (1, layer.weights.cols()) {
                return Err(Error::dim(
                    "Mlp::from_layers",
                    format!("bias 1x{}", layer.weights.cols()),
                    format!("{}x{} in layer {i}", layer.bias.rows(), layer.bias.cols()),
                ));
            }
            if let Some(next) = layers.get(i + 1) {
                if next.weights.rows() != layer.weights.cols() {
                    return Err(Error::dim(
                        "Mlp::from_layers",
                        format!("{} inputs to layer {}", layer.weights.cols(), i + 1),
                        next.weights.rows(),
                    ));
                }
            }
        }
        Ok(Self {
            layers,
            tag: CacheTag::default(),
        })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weights.cols()
    }

    pub(crate) fn params(&self) -> Vec<&Matrix> {
        self.layers
            .iter()
            .flat_map(|l| [&l.weights, &l.bias])
            .collect()
    }

    pub(crate) fn params_mut(&mut self) -> Vec<&mut Matrix> {
        self.tag.bump();
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weights, &mut l.bias])
            .collect()
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, MlpCache)> {
        check_input("mlp_forward", x, self.input_dim())?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = x.clone();
        for layer in &self.layers {
            let z = a.matmul(&layer.weights)?.add_row_broadcast(&layer.bias)?;
            let next = match layer.activation {
                Activation::Relu => z.map(|v| v.max(0.0)),
                Activation::Identity => z.clone(),
            };
            inputs.push(a);
            pre.push(z);
            a = next;
        }
        Ok((
            a,
            MlpCache {
                stamp: self.tag.stamp(),
                inputs,
                pre,
            },
        ))
    }

    pub fn backward(&self, cache: &MlpCache, upstream: &Matrix) -> Result<LearnerGradients> {
        self.tag.check(cache.stamp)?;
        let n = cache.inputs[0].rows();
        check_upstream("mlp_backward", upstream, n, self.output_dim())?;
        let mut blocks = vec![Matrix::zeros(0, 0); 2 * self.layers.len()];
        let mut delta = upstream.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            if layer.activation == Activation::Relu {
                let z = &cache.pre[l];
                for (d, &zi) in delta.as_mut_slice().iter_mut().zip(z.as_slice()) {
                    if zi <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            blocks[2 * l] = cache.inputs[l].transpose_matmul(&delta)?;
            blocks[2 * l + 1] = delta.column_sums();
            if l > 0 {
                delta = delta.matmul_transpose_b(&layer.weights)?;
            }
        }
        Ok(LearnerGradients { blocks })
    }
}
