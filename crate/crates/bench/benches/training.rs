use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use sgbm_bench::{first_batch, gaussians, multi_sine, tree, SEED};
use sgbm_core::{hard_gbm_train, AdamConfig, SgbmModel, SoftAveragingModel, TrainConfig};

fn sgbm_batch_step(c: &mut Criterion) {
    let data = gaussians(1024);
    let batch = first_batch(&data);
    let adam = AdamConfig::default();
    let mut group = c.benchmark_group("sgbm_batch_step");
    for m in [1usize, 5, 10] {
        let model = SgbmModel::new(&tree(5), m, 2, 2, data.loss(), SEED).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(m), &m, |b, _| {
            let mut model = model.clone();
            b.iter(|| black_box(model.train_batch(&batch, &adam).unwrap()))
        });
    }
    group.finish();
}

fn soft_avg_batch_step(c: &mut Criterion) {
    let data = multi_sine(1024);
    let batch = first_batch(&data);
    let adam = AdamConfig::default();
    let model = SoftAveragingModel::new(&tree(5), 10, 4, 4, data.loss(), SEED).unwrap();
    c.bench_function("soft_avg_batch_step/10", |b| {
        let mut model = model.clone();
        b.iter(|| black_box(model.train_batch(&batch, &adam).unwrap()))
    });
}

/// Equal-epoch comparison: one sGBM epoch with M learners against M hard
/// GBM stages of one epoch each.
fn equal_epoch(c: &mut Criterion) {
    let data = gaussians(2000);
    let config = TrainConfig {
        epochs: 1,
        seed: SEED,
        ..TrainConfig::default()
    };
    let mut group = c.benchmark_group("equal_epoch");
    group.sample_size(10);
    for m in [5usize, 10] {
        group.bench_with_input(BenchmarkId::new("sgbm", m), &m, |b, &m| {
            b.iter(|| {
                let mut model = SgbmModel::new(&tree(5), m, 2, 2, data.loss(), SEED).unwrap();
                model.fit(&data, &config, |_| {}).unwrap();
                black_box(model)
            })
        });
        group.bench_with_input(BenchmarkId::new("hard_gbm", m), &m, |b, &m| {
            b.iter(|| {
                black_box(hard_gbm_train(&data, m, 1.0, &tree(5), &config, |_, _| {}).unwrap())
            })
        });
    }
    group.finish();
}

criterion_group!(benches, sgbm_batch_step, soft_avg_batch_step, equal_epoch);
criterion_main!(benches);
