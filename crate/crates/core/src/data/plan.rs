use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{derive_seed, seeded, STREAM_DATA, STREAM_EPOCH};

/// One epoch's visiting order, cut into consecutive mini-batches.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BatchPlan {
    order: Vec<usize>,
    batch_size: usize,
}

impl BatchPlan {
    pub fn new(n: usize, batch_size: usize, seed: u64, shuffle: bool) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        let mut order: Vec<usize> = (0..n).collect();
        if shuffle {
            order.shuffle(&mut seeded(seed));
        }
        Ok(Self { order, batch_size })
    }

    /// Plan for a given global epoch index; each epoch gets its own
    /// permutation derived from `seed`.
    pub fn for_epoch(
        n: usize,
        batch_size: usize,
        seed: u64,
        epoch: u64,
        shuffle: bool,
    ) -> Result<Self> {
        Self::new(
            n,
            batch_size,
            derive_seed(seed, STREAM_EPOCH + epoch),
            shuffle,
        )
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn num_batches(&self) -> usize {
        self.order.len().div_ceil(self.batch_size)
    }

    pub fn batches(&self) -> impl Iterator<Item = &[usize]> {
        self.order.chunks(self.batch_size)
    }
}

fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeded(derive_seed(seed, STREAM_DATA)));
    idx
}

/// Seeded shuffle, then the first `round(fraction · N)` rows become the
/// training side.
pub fn split(dataset: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!(
            "split fraction must be in (0, 1), got {fraction}"
        )));
    }
    let n = dataset.len();
    let n_train = (fraction * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::invalid(format!(
            "split of {n} rows at {fraction} leaves one side empty"
        )));
    }
    let idx = shuffled_indices(n, seed);
    Ok((
        dataset.subset(&idx[..n_train])?,
        dataset.subset(&idx[n_train..])?,
    ))
}

/// Splits into `count` chunks after a seeded shuffle. Sizes differ by at
/// most one; the first `N mod count` chunks take the extra rows.
pub fn chunks(dataset: &Dataset, count: usize, seed: u64) -> Result<Vec<Dataset>> {
    let n = dataset.len();
    if count == 0 || count > n {
        return Err(Error::invalid(format!(
            "cannot cut {n} rows into {count} chunks"
        )));
    }
    let idx = shuffled_indices(n, seed);
    let (base, extra) = (n / count, n % count);
    let mut out = Vec::with_capacity(count);
    let mut start = 0;
    for c in 0..count {
        let len = base + usize::from(c < extra);
        out.push(dataset.subset(&idx[start..start + len])?);
        start += len;
    }
    Ok(out)
}

/// Per-column affine normalization fitted on a training set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub const STD_FLOOR: f64 = 1e-8;

    pub fn fit(features: &Matrix) -> Self {
        let n = features.rows() as f64;
        let mean: Vec<f64> = features
            .column_sums()
            .as_slice()
            .iter()
            .map(|s| s / n)
            .collect();
        let mut var = vec![0.0; features.cols()];
        for row in features.iter_rows() {
            for ((acc, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *acc += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|v| (v / n).sqrt().max(Self::STD_FLOOR))
            .collect();
        Self { mean, std }
    }

    pub fn transform(&self, features: &Matrix) -> Result<Matrix> {
        if features.cols() != self.mean.len() {
            return Err(Error::dim(
                "Standardizer::transform",
                format!("{} columns", self.mean.len()),
                features.cols(),
            ));
        }
        let mut out = features.clone();
        for r in 0..out.rows() {
            for ((v, m), s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        Ok(out)
    }
}

/// Standardizes both sets with statistics from `train` only.
pub fn standardize(train: &Dataset, test: &Dataset) -> Result<(Dataset, Dataset, Standardizer)> {
    let stats = Standardizer::fit(train.features());
    let train_x = stats.transform(train.features())?;
    let test_x = stats.transform(test.features())?;
    Ok((
        train.with_features(train_x),
        test.with_features(test_x),
        stats,
    ))
}
