use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reltrack::assoc::hungarian;
use reltrack::correlation::{build_volume, CorrelationScale};
use reltrack::head::{build_affinity, HeadParams};
use reltrack::pipeline::{relation_map, RelationConfig};
use reltrack::pyramid::{build_pyramid, PoolMode};
use reltrack::train::{backward, random_batch};
use reltrack::{BBox, FeatureMap};

fn random_map(rng: &mut ChaCha8Rng, h: usize, w: usize, d: usize) -> FeatureMap {
    let data = (0..h * w * d).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    FeatureMap::new(h, w, d, data).unwrap()
}

fn correlation(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut group = c.benchmark_group("correlation");
    for side in [16usize, 32, 64] {
        let a = random_map(&mut rng, side, side, 10);
        let b = random_map(&mut rng, side, side, 10);
        group.bench_with_input(BenchmarkId::from_parameter(side), &side, |bench, _| {
            bench.iter(|| build_volume(black_box(&a), black_box(&b), CorrelationScale::InvSqrtD).unwrap())
        });
    }
    group.finish();
}

fn pyramid_and_relation_map(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = random_map(&mut rng, 32, 32, 10);
    let b = random_map(&mut rng, 32, 32, 10);
    let vol = build_volume(&a, &b, CorrelationScale::InvSqrtD).unwrap();
    c.bench_function("pyramid/32x32/S3", |bench| {
        bench.iter(|| build_pyramid(black_box(vol.clone()), 3, PoolMode::Average).unwrap())
    });
    let cfg = RelationConfig::default();
    c.bench_function("relation_map/32x32/S3R4", |bench| {
        bench.iter(|| relation_map(black_box(&a), black_box(&b), &cfg, None).unwrap())
    });
}

fn assignment(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut group = c.benchmark_group("hungarian");
    for n in [10usize, 50, 200] {
        let cost: Vec<f64> = (0..n * n).map(|_| rng.random_range(0.0..1.0)).collect();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |bench, &n| {
            bench.iter(|| hungarian(black_box(&cost), n, n))
        });
    }
    group.finish();
}

fn head(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cfg = RelationConfig::default();
    let a = random_map(&mut rng, 32, 32, 10);
    let b = random_map(&mut rng, 32, 32, 10);
    let map = relation_map(&a, &b, &cfg, None).unwrap();
    let params = HeadParams::random(cfg.v, cfg.channels(), 64, 5);
    let boxes: Vec<BBox> = (0..20)
        .map(|_| BBox::new(rng.random_range(0.0..200.0), rng.random_range(0.0..200.0), 30.0, 50.0).unwrap())
        .collect();
    c.bench_function("affinity/20x20", |bench| {
        bench.iter(|| build_affinity(black_box(&map), &boxes, &boxes, &params, cfg.stride).unwrap())
    });
    let batch = random_batch(cfg.v, cfg.channels(), 10, 10, &mut rng);
    let small = HeadParams::random(cfg.v, cfg.channels(), 16, 6);
    c.bench_function("backward/10x10", |bench| {
        bench.iter(|| backward(black_box(&batch), &small, 5.0, 1e-7).unwrap())
    });
}

criterion_group!(benches, correlation, pyramid_and_relation_map, assignment, head);
criterion_main!(benches);
