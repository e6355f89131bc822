//! Soft decision tree of fixed depth.
//!
//! Internal nodes are stored breadth-first: node `n` has children `2n + 1`
//! (left) and `2n + 2` (right), and leaves follow the `2^D − 1` internal
//! nodes in left-to-right order. Node `n` routes an input right with
//! probability `g_n = σ(w_n · x + b_n)`; the probability of reaching a leaf
//! is the product of the routing probabilities along its root path, and the
//! tree output is the probability-weighted sum of all leaf value vectors.

use serde::{Deserialize, Serialize};

use super::{check_input, check_upstream, glorot, uniform_matrix, CacheTag, LearnerGradients};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftTree {
    depth: usize,
    /// One row `w_n` per internal node.
    gate_weights: Matrix,
    /// `1 x (2^D − 1)` gate offsets `b_n`.
    gate_bias: Matrix,
    /// One row per leaf.
    leaf_values: Matrix,
    #[serde(skip)]
    tag: CacheTag,
}

#[derive(Clone, Debug)]
pub struct TreeCache {
    stamp: (u64, u64),
    input: Matrix,
    gates: Matrix,
    /// Reach probability of every node (internal then leaves), per sample.
    reach: Matrix,
}

impl TreeCache {
    pub fn gates(&self) -> &Matrix {
        &self.gates
    }
}

impl SoftTree {
    pub(crate) fn init(depth: usize, input_dim: usize, output_dim: usize, rng: &mut Rng) -> Self {
        let internal = (1usize << depth) - 1;
        let gate_weights = uniform_matrix(internal, input_dim, glorot(input_dim, 1), rng);
        let leaf_values = uniform_matrix(internal + 1, output_dim, 0.1, rng);
        Self {
            depth,
            gate_weights,
            gate_bias: Matrix::zeros(1, internal),
            leaf_values,
            tag: CacheTag::default(),
        }
    }

    /// Assembles a tree from explicit parameters.
    pub fn from_parts(
        depth: usize,
        gate_weights: Matrix,
        gate_bias: Vec<f64>,
        leaf_values: Matrix,
    ) -> Result<Self> {
        if depth < 1 {
            return Err(Error::invalid("tree depth must be at least 1"));
        }
        let internal = (1usize << depth) - 1;
        if gate_weights.rows() != internal || gate_bias.len() != internal {
            return Err(Error::dim(
                "SoftTree::from_parts",
                format!("{internal} internal nodes"),
                format!(
                    "{} gate rows, {} biases",
                    gate_weights.rows(),
                    gate_bias.len()
                ),
            ));
        }
        if leaf_values.rows() != internal + 1 {
            return Err(Error::dim(
                "SoftTree::from_parts",
                format!("{} leaves", internal + 1),
                leaf_values.rows(),
            ));
        }
        Ok(Self {
            depth,
            gate_weights,
            gate_bias: Matrix::row_vector(gate_bias)?,
            leaf_values,
            tag: CacheTag::default(),
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn internal_nodes(&self) -> usize {
        self.gate_weights.rows()
    }

    pub fn leaves(&self) -> usize {
        self.leaf_values.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.gate_weights.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.leaf_values.cols()
    }

    pub fn gate_weights(&self) -> &Matrix {
        &self.gate_weights
    }

    pub fn gate_bias(&self) -> &Matrix {
        &self.gate_bias
    }

    pub fn leaf_values(&self) -> &Matrix {
        &self.leaf_values
    }

    pub(crate) fn params(&self) -> Vec<&Matrix> {
        vec![&self.gate_weights, &self.gate_bias, &self.leaf_values]
    }

    pub(crate) fn params_mut(&mut self) -> Vec<&mut Matrix> {
        self.tag.bump();
        vec![
            &mut self.gate_weights,
            &mut self.gate_bias,
            &mut self.leaf_values,
        ]
    }

    fn gates(&self, x: &Matrix) -> Result<Matrix> {
        check_input("tree_forward", x, self.input_dim())?;
        Ok(x.matmul_transpose_b(&self.gate_weights)?
            .add_row_broadcast(&self.gate_bias)?
            .sigmoid())
    }

    fn reach_probabilities(&self, gates: &Matrix) -> Matrix {
        let internal = self.internal_nodes();
        let mut reach = Matrix::zeros(gates.rows(), 2 * internal + 1);
        for i in 0..gates.rows() {
            let g = gates.row(i);
            let mu = reach.row_mut(i);
            mu[0] = 1.0;
            for n in 0..internal {
                mu[2 * n + 1] = mu[n] * (1.0 - g[n]);
                mu[2 * n + 2] = mu[n] * g[n];
            }
        }
        reach
    }

    fn leaf_block(&self, reach: &Matrix) -> Matrix {
        let internal = self.internal_nodes();
        let mut out = Matrix::zeros(reach.rows(), self.leaves());
        for i in 0..reach.rows() {
            out.row_mut(i).copy_from_slice(&reach.row(i)[internal..]);
        }
        out
    }

    /// `P(leaf | x)` for every sample, `N x 2^D`.
    pub fn path_probabilities(&self, x: &Matrix) -> Result<Matrix> {
        let gates = self.gates(x)?;
        Ok(self.leaf_block(&self.reach_probabilities(&gates)))
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, TreeCache)> {
        let gates = self.gates(x)?;
        let reach = self.reach_probabilities(&gates);
        let output = self.leaf_block(&reach).matmul(&self.leaf_values)?;
        Ok((
            output,
            TreeCache {
                stamp: self.tag.stamp(),
                input: x.clone(),
                gates,
                reach,
            },
        ))
    }

    pub fn backward(&self, cache: &TreeCache, upstream: &Matrix) -> Result<LearnerGradients> {
        self.tag.check(cache.stamp)?;
        let n = cache.input.rows();
        check_upstream("tree_backward", upstream, n, self.output_dim())?;
        let internal = self.internal_nodes();

        let leaf_probs = self.leaf_block(&cache.reach);
        let d_leaf_values = leaf_probs.transpose_matmul(upstream)?;
        // ∂/∂P(leaf) = upstream · v_leaf
        let d_leaf_probs = upstream.matmul_transpose_b(&self.leaf_values)?;

        let mut d_logits = Matrix::zeros(n, internal);
        let mut d_reach = vec![0.0; 2 * internal + 1];
        for i in 0..n {
            let g = cache.gates.row(i);
            let mu = cache.reach.row(i);
            d_reach[internal..].copy_from_slice(d_leaf_probs.row(i));
            let dz = d_logits.row_mut(i);
            for node in (0..internal).rev() {
                let (left, right) = (d_reach[2 * node + 1], d_reach[2 * node + 2]);
                d_reach[node] = left * (1.0 - g[node]) + right * g[node];
                let d_gate = mu[node] * (right - left);
                dz[node] = d_gate * g[node] * (1.0 - g[node]);
            }
        }

        let d_gate_weights = d_logits.transpose_matmul(&cache.input)?;
        let d_gate_bias = d_logits.column_sums();
        Ok(LearnerGradients {
            blocks: vec![d_gate_weights, d_gate_bias, d_leaf_values],
        })
    }

    /// Total probability of reaching any leaf under the right child of `node`.
    pub fn right_subtree_mass(&self, x: &Matrix, node: usize) -> Result<Matrix> {
        if node >= self.internal_nodes() {
            return Err(Error::invalid(format!("node {node} is not internal")));
        }
        let probs = self.path_probabilities(x)?;
        let internal = self.internal_nodes();
        let right_leaves = leaves_under(2 * node + 2, internal);
        let values = probs
            .iter_rows()
            .map(|row| right_leaves.clone().map(|leaf| row[leaf]).sum())
            .collect();
        Matrix::from_vec(x.rows(), 1, values)
    }

    #[cfg(test)]
    fn gate_value(&self, x: &[f64], node: usize) -> f64 {
        let w = self.gate_weights.row(node);
        let z: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.gate_bias.get(0, node);
        crate::matrix::sigmoid(z)
    }
}

/// Leaf indices (0-based among leaves) in the subtree rooted at `node`.
fn leaves_under(node: usize, internal: usize) -> std::ops::Range<usize> {
    let (mut lo, mut hi) = (node, node);
    while lo < internal {
        lo = 2 * lo + 1;
        hi = 2 * hi + 2;
    }
    (lo - internal)..(hi - internal + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn stump(bias: f64) -> SoftTree {
        let leaves = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        SoftTree::from_parts(1, Matrix::zeros(1, 3), vec![bias], leaves).unwrap()
    }

    #[test]
    fn balanced_stump_outputs_half() {
        let x = Matrix::from_rows(&[vec![1.0, -2.0, 3.0], vec![0.0, 0.0, 0.0]]).unwrap();
        let (out, _) = stump(0.0).forward(&x).unwrap();
        assert_eq!(out.as_slice(), &[0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn saturated_stump_routes_right() {
        let x = Matrix::from_rows(&[vec![1.0, -2.0, 3.0]]).unwrap();
        let (out, _) = stump(50.0).forward(&x).unwrap();
        assert!(out.get(0, 0).abs() < 1e-9);
        assert!((out.get(0, 1) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn stump_leaf_gradient_is_half_upstream_sum() {
        let tree = stump(0.0);
        let x = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![-1.0, 0.5, 0.0]]).unwrap();
        let up = Matrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 4.0]]).unwrap();
        let (_, cache) = tree.forward(&x).unwrap();
        let g = tree.backward(&cache, &up).unwrap();
        let half_sum = up.column_sums().scale(0.5);
        assert_eq!(g.blocks[2].row(0), half_sum.as_slice());
        assert_eq!(g.blocks[2].row(1), half_sum.as_slice());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = seeded(3);
        let tree = SoftTree::init(3, 4, 2, &mut rng);
        let x = uniform_matrix(5, 4, 1.0, &mut rng);
        let (_, cache) = tree.forward(&x).unwrap();
        let g = tree.backward(&cache, &Matrix::zeros(5, 2)).unwrap();
        assert!(g
            .blocks
            .iter()
            .all(|b| b.as_slice().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn path_probabilities_by_explicit_enumeration() {
        let mut rng = seeded(9);
        let mut tree = SoftTree::init(3, 2, 1, &mut rng);
        tree.gate_bias = uniform_matrix(1, 7, 1.0, &mut rng);
        let x = uniform_matrix(20, 2, 3.0, &mut rng);
        let probs = tree.path_probabilities(&x).unwrap();
        for i in 0..x.rows() {
            for leaf in 0..8usize {
                // walk the root path encoded by the leaf's bits, MSB first
                let mut node = 0;
                let mut p = 1.0;
                for level in (0..3).rev() {
                    let g = tree.gate_value(x.row(i), node);
                    if (leaf >> level) & 1 == 1 {
                        p *= g;
                        node = 2 * node + 2;
                    } else {
                        p *= 1.0 - g;
                        node = 2 * node + 1;
                    }
                }
                assert!((probs.get(i, leaf) - p).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn leaves_under_ranges() {
        // depth 2: internal 0,1,2; leaves 3..=6
        assert_eq!(leaves_under(0, 3), 0..4);
        assert_eq!(leaves_under(1, 3), 0..2);
        assert_eq!(leaves_under(2, 3), 2..4);
        assert_eq!(leaves_under(5, 3), 2..3);
    }

    #[test]
    fn dimension_mismatch() {
        let tree = stump(0.0);
        assert!(matches!(
            tree.forward(&Matrix::zeros(2, 4)),
            Err(Error::Dimension { .. })
        ));
        let (_, cache) = tree.forward(&Matrix::zeros(2, 3)).unwrap();
        assert!(tree.backward(&cache, &Matrix::zeros(3, 2)).is_err());
    }
}
