use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use mops_bench::{embedding_message, gaussian_vectors, model};
use mops_core::math::{min_norm_weights, project_simplex};
use mops_core::model::{backward, forward, mse_loss_and_grad, Part};
use mops_core::protocol::{decode, encode};
use mops_core::tasks::{Modality, TaskConfig};
use mops_core::training::{Algorithm, Simulation, TrainConfig};
use mops_core::Scheme;
use std::hint::black_box;

fn math(c: &mut Criterion) {
    let grads = gaussian_vectors(3, 3, 1000);
    c.bench_function("min_norm 3x1000", |b| b.iter(|| min_norm_weights(black_box(&grads)).unwrap()));
    let v = gaussian_vectors(4, 1, 64).remove(0);
    c.bench_function("project_simplex 64", |b| b.iter(|| project_simplex(black_box(&v)).unwrap()));
}

fn network(c: &mut Criterion) {
    let (spec, params) = model(Scheme::ShareTop);
    let x = gaussian_vectors(5, 1, spec.input_dim()).remove(0);
    let y = gaussian_vectors(6, 1, spec.output_dim()).remove(0);
    c.bench_function("forward+backward default mlp", |b| {
        b.iter(|| {
            let (pred, cache) = forward(&spec, &params, Part::Full, black_box(&x)).unwrap();
            let (_, d) = mse_loss_and_grad(&pred, &y).unwrap();
            backward(&spec, &params, &cache, &d, Part::Full).unwrap()
        })
    });
}

fn codec(c: &mut Criterion) {
    let msg = embedding_message(16, 5);
    let bytes = encode(&msg).unwrap();
    c.bench_function("encode embedding", |b| b.iter(|| encode(black_box(&msg)).unwrap()));
    c.bench_function("decode embedding", |b| b.iter(|| decode(black_box(&bytes)).unwrap()));
}

fn rounds(c: &mut Criterion) {
    for algorithm in [Algorithm::Static, Algorithm::Dynamic] {
        let cfg = TrainConfig {
            algorithm,
            rounds: 1_000_000,
            beta: 0.01,
            task: TaskConfig::timeseries(&Modality::ALL, 200),
            metrics_every: 0,
            ..Default::default()
        };
        c.bench_function(&format!("training round, 3 agents, {algorithm:?}"), |b| {
            b.iter_batched_ref(
                || Simulation::new(cfg.clone()).unwrap(),
                |sim| sim.step().unwrap(),
                BatchSize::LargeInput,
            )
        });
    }
}

criterion_group!(benches, math, network, codec, rounds);
criterion_main!(benches);
