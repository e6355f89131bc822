//! Shared fixtures for the benchmarks.

use sgbm_core::{make_synthetic, Batch, Dataset, LearnerSpec, Matrix, SyntheticKind};

pub const SEED: u64 = 42;
pub const BATCH: usize = 128;

/// Two-class 2-D training set of `n` rows.
pub fn gaussians(n: usize) -> Dataset {
    make_synthetic(SyntheticKind::Gaussians2, n, SEED)
        .expect("synthetic data")
        .dataset
}

/// 4-in, 4-out regression set of `n` rows.
pub fn multi_sine(n: usize) -> Dataset {
    make_synthetic(SyntheticKind::MultiSine, n, SEED)
        .expect("synthetic data")
        .dataset
}

/// The first `BATCH` rows of `data`.
pub fn first_batch(data: &Dataset) -> Batch {
    let rows: Vec<usize> = (0..BATCH.min(data.len())).collect();
    data.batch(&rows)
}

pub fn tree(depth: usize) -> LearnerSpec {
    LearnerSpec::Tree { depth }
}

/// Dense `rows x cols` features with a fixed smooth pattern.
pub fn features(rows: usize, cols: usize) -> Matrix {
    let v = (0..rows * cols)
        .map(|i| ((i * 7919 % 1000) as f64 / 500.0) - 1.0)
        .collect();
    Matrix::from_vec(rows, cols, v).expect("shape")
}
