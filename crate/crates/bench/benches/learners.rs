use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use sgbm_bench::{features, tree, BATCH, SEED};
use sgbm_core::{init_learner, LearnerSpec, Matrix};

fn forward_backward(c: &mut Criterion, name: &str, spec: &LearnerSpec, dim: usize, outputs: usize) {
    let learner = init_learner(spec, dim, outputs, SEED).unwrap();
    let x = features(BATCH, dim);
    let upstream = Matrix::from_vec(BATCH, outputs, vec![0.01; BATCH * outputs]).unwrap();
    let mut group = c.benchmark_group(name);
    group.bench_function(BenchmarkId::new("forward", dim), |b| {
        b.iter(|| black_box(learner.forward(&x).unwrap()))
    });
    let (_, cache) = learner.forward(&x).unwrap();
    group.bench_function(BenchmarkId::new("backward", dim), |b| {
        b.iter(|| black_box(learner.backward(&cache, &upstream).unwrap()))
    });
    group.finish();
}

fn trees(c: &mut Criterion) {
    for depth in [3usize, 5] {
        forward_backward(c, &format!("tree_depth{depth}"), &tree(depth), 2, 2);
    }
    forward_backward(c, "tree_depth5_mnist", &tree(5), 784, 10);
}

fn mlps(c: &mut Criterion) {
    let spec = LearnerSpec::Mlp {
        hidden: vec![50, 30],
    };
    forward_backward(c, "mlp_50_30", &spec, 784, 10);
}

criterion_group!(benches, trees, mlps);
criterion_main!(benches);
