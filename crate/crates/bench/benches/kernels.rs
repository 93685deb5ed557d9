use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use patchcast::model::{Batch, ModelConfig, PatchMlp};
use patchcast::numerics::{avg_pool_rows, mse_loss, Matrix, Rng};

fn random(rows: usize, cols: usize, seed: u64) -> Matrix<f32> {
    let mut rng = Rng::new(seed);
    Matrix::from_fn(rows, cols, |_, _| rng.normal() as f32)
}

fn bench_matmul(c: &mut Criterion) {
    let mut group = c.benchmark_group("matmul");
    for n in [64usize, 256, 512] {
        let a = random(n, n, 1);
        let b = random(n, n, 2);
        group.throughput(Throughput::Elements((2 * n * n * n) as u64));
        group.bench_function(BenchmarkId::from_parameter(n), |bench| {
            bench.iter(|| black_box(&a).matmul(black_box(&b)).unwrap())
        });
    }
    group.finish();
}

fn bench_pool(c: &mut Criterion) {
    let mut group = c.benchmark_group("avg_pool_rows");
    let x = random(224, 508, 3);
    for k in [3usize, 13, 25] {
        group.bench_function(BenchmarkId::from_parameter(k), |bench| {
            bench.iter(|| avg_pool_rows(black_box(&x), k).unwrap())
        });
    }
    group.finish();
}

fn bench_model(c: &mut Criterion) {
    // ETTh1-sized problem: L=96, T=96, M=7, batch of 32 windows
    let config = ModelConfig::new(96, 96, 7);
    let mut model = PatchMlp::<f32>::init(&config, &mut Rng::new(0)).unwrap();
    let histories: Vec<_> = (0..32).map(|i| random(96, 7, 10 + i)).collect();
    let futures: Vec<_> = (0..32).map(|i| random(96, 7, 100 + i)).collect();
    let batch = Batch::from_windows(&histories, Some(&futures)).unwrap();
    let targets = batch.targets.clone().unwrap();

    let mut group = c.benchmark_group("patchmlp");
    group.sample_size(20);
    group.bench_function("forward", |bench| {
        bench.iter(|| model.forward_batch(black_box(&batch), false).unwrap())
    });
    group.bench_function("forward_backward", |bench| {
        bench.iter(|| {
            let pred = model.forward_batch(&batch, true).unwrap();
            let (loss, grad) = mse_loss(&pred, &targets).unwrap();
            model.backward_batch(&grad).unwrap();
            black_box(loss)
        })
    });
    group.finish();
}

criterion_group!(benches, bench_matmul, bench_pool, bench_model);
criterion_main!(benches);
