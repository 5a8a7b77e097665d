use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hoss_bench::{random_fixture, toy_fixture};
use hoss_core::gibbs::{chain_rng, gibbs_step, init_chains};
use hoss_core::meanfield::mf_infer;
use hoss_core::model::{energy, free_energy};
use hoss_core::trainer::{toy_preset, Trainer};
use hoss_core::{BlockShape, ChainInit, GibbsConfig, MfConfig};

fn shapes() -> Vec<BlockShape> {
    vec![
        BlockShape::new(60, 1, 3, 5).unwrap(),
        BlockShape::new(256, 8, 3, 3).unwrap(),
    ]
}

fn label(s: &BlockShape) -> String {
    format!("D{}_K{}_M{}_N{}", s.d, s.k, s.m, s.n)
}

fn bench_energy(c: &mut Criterion) {
    let mut group = c.benchmark_group("energy");
    for shape in shapes() {
        let (p, v, x) = random_fixture(shape, 1);
        group.bench_with_input(BenchmarkId::new("joint", label(&shape)), &shape, |b, _| {
            b.iter(|| energy(black_box(&v), black_box(&x), &p).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("free", label(&shape)), &shape, |b, _| {
            b.iter(|| free_energy(black_box(&v), black_box(&x.spikes), &p).unwrap())
        });
    }
    group.finish();
}

fn bench_mf(c: &mut Criterion) {
    let mut group = c.benchmark_group("mf_infer");
    let cfg = MfConfig::default();
    for shape in shapes() {
        let (p, v, _) = random_fixture(shape, 2);
        group.bench_with_input(BenchmarkId::from_parameter(label(&shape)), &shape, |b, _| {
            b.iter(|| mf_infer(black_box(&v), &p, &cfg).unwrap())
        });
    }
    group.finish();
}

fn bench_gibbs(c: &mut Criterion) {
    let mut group = c.benchmark_group("gibbs_step");
    let cfg = GibbsConfig {
        n_chains: 1,
        ..GibbsConfig::default()
    };
    for shape in shapes() {
        let (p, _, _) = random_fixture(shape, 3);
        let chain = init_chains(&p, &cfg, ChainInit::Noise).unwrap().remove(0);
        group.bench_with_input(BenchmarkId::from_parameter(label(&shape)), &shape, |b, _| {
            let mut rng = chain_rng(0, 0, 0);
            let mut state = chain.clone();
            b.iter(|| state = gibbs_step(&state, &p, &cfg, &mut rng).unwrap())
        });
    }
    group.finish();
}

fn bench_epoch(c: &mut Criterion) {
    let data = toy_fixture(1000);
    let (shape, mut cfg) = toy_preset();
    cfg.epochs = 1;
    let mut group = c.benchmark_group("train");
    group.sample_size(10);
    group.bench_function("toy_epoch_1000", |b| {
        b.iter_batched(
            || Trainer::new(shape, data.rows(), cfg).unwrap(),
            |mut t| t.run_epoch(data.rows()).unwrap(),
            criterion::BatchSize::LargeInput,
        )
    });
    group.finish();
}

criterion_group!(benches, bench_energy, bench_mf, bench_gibbs, bench_epoch);
criterion_main!(benches);
