use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use ilm_core::engine::Replicate;
use ilm_core::lang::LanguageTable;
use ilm_core::metrics::network_stability;
use ilm_core::neural::chain_step;
use ilm_core::{
    baseline_for, compositionality, expressivity, obvert, AgentKind, ExperimentConfig, Loss, Mlp,
    TrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(7)
}

fn random_table(n: usize, rng: &mut ChaCha8Rng) -> LanguageTable {
    let entries = (0..1u32 << n)
        .map(|_| rng.random_range(0..1u32 << n))
        .collect();
    LanguageTable::from_indices(n, entries).unwrap()
}

fn neural(c: &mut Criterion) {
    let mut r = rng();
    let cfg = TrainConfig::new(5.0, Loss::SquaredError, 1).unwrap();
    let x: Vec<f64> = (0..8).map(|i| (i % 2) as f64).collect();
    let y: Vec<f64> = (0..8).map(|i| ((i / 2) % 2) as f64).collect();

    let mut net = Mlp::init_glorot(8, 8, 8, &mut r).unwrap();
    c.bench_function("sgd_step 8-8-8", |b| {
        b.iter(|| net.sgd_step(black_box(&x), black_box(&y), &cfg).unwrap())
    });

    let mut enc = Mlp::init_glorot(8, 8, 8, &mut r).unwrap();
    let mut dec = Mlp::init_glorot(8, 8, 8, &mut r).unwrap();
    c.bench_function("chain_step 8-8-8-8-8", |b| {
        b.iter(|| chain_step(&mut enc, &mut dec, black_box(&x), black_box(&x), &cfg).unwrap())
    });

    let wide = Mlp::init_glorot(16, 30, 20, &mut r).unwrap();
    c.bench_function("tabulate_decisions 16-30-20", |b| {
        b.iter(|| black_box(&wide).tabulate_decisions().unwrap())
    });
}

fn languages(c: &mut Criterion) {
    let mut r = rng();
    let decoder = Mlp::init_glorot(8, 8, 8, &mut r).unwrap();
    c.bench_function("obvert n=8", |b| {
        b.iter(|| obvert(black_box(&decoder), false).unwrap())
    });

    let t12 = random_table(12, &mut r);
    c.bench_function("expressivity n=12", |b| {
        b.iter(|| expressivity(black_box(&t12)))
    });
    c.bench_function("compositionality n=12", |b| {
        b.iter(|| compositionality(black_box(&t12)))
    });

    let dec12 = Mlp::init_glorot(12, 12, 12, &mut r).unwrap();
    c.bench_function("network_stability n=12", |b| {
        b.iter(|| network_stability(black_box(&t12), &dec12).unwrap())
    });
}

fn generations(c: &mut Criterion) {
    let mut group = c.benchmark_group("generation");
    group.sample_size(10);
    for (name, model, bottleneck) in [
        ("oilm n=8", AgentKind::Oilm, 50),
        ("ailm n=8", AgentKind::Ailm, 75),
    ] {
        let mut cfg = ExperimentConfig::new(model);
        cfg.bottleneck = bottleneck;
        cfg.auto_size = bottleneck;
        let baseline = baseline_for(&cfg).unwrap();
        group.bench_function(name, |b| {
            b.iter_batched(
                || Replicate::new(&cfg, &baseline, 0).unwrap(),
                |mut rep| rep.step().unwrap(),
                BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

criterion_group!(benches, neural, languages, generations);
criterion_main!(benches);
