use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use probcast_bench::{stream, warm};
use probcast_core::{
    project_to_simplex, solve_substitution, Caar, Forecaster, GeneralizedPrediction, InverseMode, Kaar, Kernel,
    Maar, MaarConfig,
};

const CLASSES: usize = 3;
const DIM: usize = 10;

fn linear(c: &mut Criterion) {
    let data = stream(1, 1001, DIM, CLASSES);
    let (history, probe) = data.split_at(1000);
    let probe = &probe[0];
    let cfg = MaarConfig::new(DIM, CLASSES, 1.0).unwrap();

    let mut group = c.benchmark_group("linear");
    for (name, mode) in [("direct", InverseMode::Direct), ("sherman-morrison", InverseMode::ShermanMorrison)] {
        let mut maar = Maar::with_mode(cfg, mode);
        warm(&mut maar, history);
        group.bench_function(BenchmarkId::new("maar/predict", name), |b| {
            b.iter(|| maar.predict(black_box(&probe.x)).unwrap())
        });
        group.bench_function(BenchmarkId::new("maar/update", name), |b| {
            b.iter_batched_ref(
                || maar.clone(),
                |f| f.update(black_box(&probe.x), &probe.y).unwrap(),
                BatchSize::SmallInput,
            )
        });
        let mut caar = Caar::with_mode(cfg, mode);
        warm(&mut caar, history);
        group.bench_function(BenchmarkId::new("caar/predict", name), |b| {
            b.iter(|| caar.predict(black_box(&probe.x)).unwrap())
        });
    }
    group.finish();
}

fn kernel(c: &mut Criterion) {
    let data = stream(2, 1001, DIM, CLASSES);
    let mut group = c.benchmark_group("kaar");
    group.sample_size(20);
    for t in [100, 400, 1000] {
        let mut f = Kaar::new(DIM, CLASSES, 1.0, Kernel::rbf(1.0).unwrap()).unwrap().with_incremental_factors();
        warm(&mut f, &data[..t]);
        let probe = &data[t];
        group.bench_with_input(BenchmarkId::new("predict", t), &probe.x, |b, x| {
            b.iter(|| f.predict(black_box(x)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("update", t), probe, |b, e| {
            b.iter_batched_ref(|| f.clone(), |g| g.update(&e.x, &e.y).unwrap(), BatchSize::LargeInput)
        });
    }
    group.finish();
}

fn simplex(c: &mut Criterion) {
    let mut group = c.benchmark_group("simplex");
    for d in [3, 10, 100] {
        let v: Vec<f64> = (0..d).map(|i| ((i * 37 % 11) as f64 - 5.0) / 3.0).collect();
        let r = GeneralizedPrediction::new(v.clone()).unwrap();
        group.bench_with_input(BenchmarkId::new("substitution", d), &r, |b, r| {
            b.iter(|| solve_substitution(black_box(r)))
        });
        group.bench_with_input(BenchmarkId::new("projection", d), &v, |b, v| {
            b.iter(|| project_to_simplex(black_box(v)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, linear, kernel, simplex);
criterion_main!(benches);
