use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use std::sync::Arc;
use wfa_core::metric::{matching_distance, Configuration, MetricSpace};
use wfa_core::potential::{server_potential, server_potential_min};
use wfa_core::taxi::{canonicalize, taxi_update_closed, TaxiRequest};
use wfa_core::workfn::{ConfigSpace, WorkFunction};

fn circle16_cs() -> Arc<ConfigSpace> {
    ConfigSpace::new(Arc::new(MetricSpace::circle(16, 8, 2).unwrap()), 3)
}

fn reachable_sample(cs: &Arc<ConfigSpace>) -> WorkFunction {
    let cone = WorkFunction::cone(cs, &Configuration::new(vec![2, 12, 14])).unwrap();
    cone.update_seq(&[8, 4, 6, 13]).unwrap()
}

fn bench_matching(c: &mut Criterion) {
    let space = MetricSpace::circle(16, 8, 2).unwrap();
    let x = Configuration::new(vec![1, 6, 13]);
    let y = Configuration::new(vec![2, 8, 15]);
    c.bench_function("matching_distance k=3", |b| {
        b.iter(|| matching_distance(black_box(&x), black_box(&y), &space).unwrap())
    });
}

fn bench_update(c: &mut Criterion) {
    let cs = circle16_cs();
    let w = reachable_sample(&cs);
    c.bench_function("work function update (816 configs)", |b| {
        b.iter(|| w.update(black_box(9)).unwrap())
    });
}

fn bench_support(c: &mut Criterion) {
    let cs = circle16_cs();
    let w = reachable_sample(&cs);
    // force the distance matrix once so the benchmark measures the scan
    let _ = w.support_indices();
    c.bench_function("support scan (816 configs)", |b| {
        b.iter(|| {
            let fresh = w.update(black_box(5)).unwrap();
            fresh.support_indices().len()
        })
    });
}

fn bench_potential(c: &mut Criterion) {
    let cs = circle16_cs();
    let w = reachable_sample(&cs);
    c.bench_function("tuple potential scan (16^3 tuples)", |b| {
        b.iter(|| server_potential(black_box(&w)).unwrap().value)
    });
    c.bench_function("tuple potential suffix DP", |b| {
        b.iter(|| server_potential_min(black_box(&w)).unwrap())
    });
}

fn bench_taxi(c: &mut Criterion) {
    let cs = circle16_cs();
    let w = reachable_sample(&cs);
    let req = TaxiRequest {
        start: 13,
        dest: 2,
        clockwise: true,
    };
    c.bench_function("taxi closed-form update", |b| {
        b.iter(|| taxi_update_closed(black_box(&w), &req).unwrap())
    });
}

fn bench_canonicalize(c: &mut Criterion) {
    let cs = circle16_cs();
    let w = reachable_sample(&cs);
    c.bench_function("canonicalize under the 16-element action", |b| {
        b.iter(|| canonicalize(black_box(&w), 2).unwrap())
    });
}

criterion_group!(
    benches,
    bench_matching,
    bench_update,
    bench_support,
    bench_potential,
    bench_taxi,
    bench_canonicalize
);
criterion_main!(benches);
