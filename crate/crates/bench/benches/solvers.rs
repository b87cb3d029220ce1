use ascn_bench::{cubic_fixture, estimator_fixture, quartic_fixture};
use ascn_core::subsolver::{solve_cubic_with, TENSOR_MAX_ITERS};
use ascn_core::{solve_cubic, solve_tensor, Backend, CoefficientForm};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn cubic(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_cubic");
    for d in [10, 50, 123] {
        for (label, indefinite) in [("convex", false), ("indefinite", true)] {
            let model = cubic_fixture(d, indefinite);
            for (name, backend) in [("secular", Backend::Secular), ("iterative", Backend::Iterative)] {
                group.bench_with_input(BenchmarkId::new(format!("{name}/{label}"), d), &model, |b, m| {
                    b.iter(|| solve_cubic_with(black_box(m), 1e-9, backend).unwrap())
                });
            }
        }
    }
    group.finish();
    let model = cubic_fixture(30, false);
    c.bench_function("solve_cubic/auto/30", |b| b.iter(|| solve_cubic(black_box(&model), 1e-9).unwrap()));
}

fn tensor(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_tensor");
    for d in [3, 8, 16] {
        let model = quartic_fixture(d);
        group.bench_with_input(BenchmarkId::from_parameter(d), &model, |b, m| {
            b.iter(|| solve_tensor(black_box(m), 1e-9, TENSOR_MAX_ITERS).unwrap())
        });
    }
    group.finish();
}

fn argmin(c: &mut Criterion) {
    let mut group = c.benchmark_group("estimator_argmin");
    for (name, form) in [("plain", CoefficientForm::Plain), ("factorial", CoefficientForm::Factorial)] {
        let est = estimator_fixture(100, form);
        group.bench_function(name, |b| b.iter(|| black_box(&est).argmin().unwrap()));
    }
    group.finish();
}

criterion_group!(benches, cubic, tensor, argmin);
criterion_main!(benches);
