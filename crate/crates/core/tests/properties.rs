use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sgbm_core::learners::SoftTree;
use sgbm_core::{
    adam_update, init_learner, one_hot, soften, AdamConfig, AdamState, Learner, LearnerSpec, Matrix,
};

fn uniform(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> Matrix {
    let v = (0..rows * cols)
        .map(|_| rng.random_range(-scale..scale))
        .collect();
    Matrix::from_vec(rows, cols, v).unwrap()
}

fn random_tree(depth: usize, d: usize, k: usize, scale: f64, rng: &mut ChaCha8Rng) -> SoftTree {
    let internal = (1 << depth) - 1;
    SoftTree::from_parts(
        depth,
        uniform(internal, d, scale, rng),
        (0..internal)
            .map(|_| rng.random_range(-scale..scale))
            .collect(),
        uniform(internal + 1, k, 1.0, rng),
    )
    .unwrap()
}

/// Independent reach probability of `leaf` by walking its root path.
fn enumerated_leaf_probability(tree: &SoftTree, x: &[f64], leaf: usize) -> f64 {
    let depth = tree.depth();
    let mut node = 0usize;
    let mut p = 1.0;
    for level in (0..depth).rev() {
        let go_right = (leaf >> level) & 1 == 1;
        let w = tree.gate_weights().row(node);
        let z: f64 =
            w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + tree.gate_bias().get(0, node);
        let g = 1.0 / (1.0 + (-z).exp());
        p *= if go_right { g } else { 1.0 - g };
        node = 2 * node + if go_right { 2 } else { 1 };
    }
    p
}

#[test]
fn path_probabilities_sum_to_one_for_depths_one_to_six() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for depth in 1..=6 {
        let tree = random_tree(depth, 5, 2, 3.0, &mut rng);
        let x = uniform(1000, 5, 2.0, &mut rng);
        let probs = tree.path_probabilities(&x).unwrap();
        for (i, row) in probs.iter_rows().enumerate() {
            assert!(row.iter().all(|&p| p >= 0.0));
            let total: f64 = row.iter().sum();
            assert!((total - 1.0).abs() < 1e-9, "depth {depth} row {i}: {total}");
        }
    }
}

#[test]
fn path_probabilities_match_explicit_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let tree = random_tree(3, 4, 2, 2.0, &mut rng);
    let x = uniform(1000, 4, 1.0, &mut rng);
    let probs = tree.path_probabilities(&x).unwrap();
    for i in 0..x.rows() {
        for leaf in 0..tree.leaves() {
            let expected = enumerated_leaf_probability(&tree, x.row(i), leaf);
            assert!((probs.get(i, leaf) - expected).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn raising_a_gate_bias_moves_mass_right(
        seed in any::<u64>(),
        depth in 1usize..=4,
        delta in 0.01f64..3.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = random_tree(depth, 3, 2, 1.5, &mut rng);
        let x = uniform(8, 3, 1.0, &mut rng);
        let node = rng.random_range(0..tree.internal_nodes());
        let mut bias = tree.gate_bias().as_slice().to_vec();
        bias[node] += delta;
        let raised = SoftTree::from_parts(
            depth,
            tree.gate_weights().clone(),
            bias,
            tree.leaf_values().clone(),
        )
        .unwrap();
        let before = tree.right_subtree_mass(&x, node).unwrap();
        let after = raised.right_subtree_mass(&x, node).unwrap();
        for (b, a) in before.as_slice().iter().zip(after.as_slice()) {
            prop_assert!(a > b, "{b} -> {a}");
        }
    }

    #[test]
    fn softmax_rows_are_distributions(seed in any::<u64>(), n in 1usize..20, k in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = uniform(n, k, 50.0, &mut rng).softmax_rows();
        for row in s.iter_rows() {
            prop_assert!(row.iter().all(|&p| p >= 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn soften_keeps_argmax_and_normalization(
        seed in any::<u64>(),
        temperature in 0.05f64..200.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = uniform(10, 4, 10.0, &mut rng);
        let soft = soften(&z, temperature).unwrap();
        prop_assert_eq!(soft.argmax_rows(), z.argmax_rows());
        for row in soft.iter_rows() {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn adam_with_zero_lr_is_identity(seed in any::<u64>(), wd in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let param = uniform(3, 4, 5.0, &mut rng);
        let grad = uniform(3, 4, 5.0, &mut rng);
        let config = AdamConfig { lr: 0.0, weight_decay: wd, ..AdamConfig::default() };
        let mut state = AdamState::for_param(&param, config);
        let out = adam_update(&param, &grad, &mut state).unwrap();
        prop_assert_eq!(out, param);
        prop_assert_eq!(state.step, 1);
    }

    #[test]
    fn one_hot_rows_have_a_single_one(labels in prop::collection::vec(0usize..7, 1..40)) {
        let t = one_hot(&labels, 7).unwrap();
        for (row, &l) in t.iter_rows().zip(&labels) {
            prop_assert_eq!(row.iter().filter(|&&v| v == 1.0).count(), 1);
            prop_assert_eq!(row.iter().filter(|&&v| v == 0.0).count(), 6);
            prop_assert_eq!(row[l], 1.0);
        }
    }
}

#[test]
fn soften_at_temperature_one_is_softmax_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let z = uniform(50, 6, 20.0, &mut rng);
    assert_eq!(soften(&z, 1.0).unwrap(), z.softmax_rows());
}

#[test]
fn large_temperature_is_nearly_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let k = 10;
    let z = uniform(200, k, 10.0, &mut rng);
    let soft = soften(&z, 1000.0).unwrap();
    let uniform_p = 1.0 / k as f64;
    for row in soft.iter_rows() {
        let kl: f64 = row.iter().map(|&p| p * (p / uniform_p).ln()).sum();
        assert!(kl < 1e-3, "{kl}");
    }
}

#[test]
fn saturated_teacher_gives_one_hot_targets() {
    let labels = [0usize, 2, 1, 2];
    let hard = one_hot(&labels, 3).unwrap();
    let logits = hard.map(|v| if v == 1.0 { 50.0 } else { -50.0 });
    let soft = soften(&logits, 1.0).unwrap();
    for (a, b) in soft.as_slice().iter().zip(hard.as_slice()) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn forward_is_deterministic_and_init_depends_on_seed() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = uniform(30, 6, 1.0, &mut rng);
    for spec in [
        LearnerSpec::Tree { depth: 4 },
        LearnerSpec::Mlp { hidden: vec![8, 4] },
    ] {
        let a: Learner = init_learner(&spec, 6, 3, 42).unwrap();
        let b = init_learner(&spec, 6, 3, 42).unwrap();
        let c = init_learner(&spec, 6, 3, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.params(), c.params());
        let out_a = a.predict(&x).unwrap();
        let out_b = b.predict(&x).unwrap();
        assert_eq!(
            out_a
                .as_slice()
                .iter()
                .map(|v| v.to_bits())
                .collect::<Vec<_>>(),
            out_b
                .as_slice()
                .iter()
                .map(|v| v.to_bits())
                .collect::<Vec<_>>()
        );
    }
}
