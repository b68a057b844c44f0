use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use simcurve::*;

fn problem(n: usize) -> RegistrationProblem {
    let spec = ToySpec { n_points: n, n_curves: 1, sigma: 0.1, seed: 1, ..Default::default() };
    let data = generate_toy(&spec).unwrap();
    RegistrationProblem::new(data.curves[0].clone(), data.reference, spec.bounds, SolverOptions::default()).unwrap()
}

fn contrast_eval(c: &mut Criterion) {
    let mut group = c.benchmark_group("contrast");
    for n in [100, 1000] {
        let p = problem(n);
        let alpha = TransformParams::new(-0.2, 2.0);
        group.bench_with_input(BenchmarkId::new("value", n), &p, |b, p| b.iter(|| p.contrast(black_box(alpha)).unwrap()));
        group.bench_with_input(BenchmarkId::new("value_and_gradient", n), &p, |b, p| {
            b.iter(|| p.contrast_and_gradient(black_box(alpha)).unwrap())
        });
    }
    group.finish();
}

fn estimate_one(c: &mut Criterion) {
    let mut group = c.benchmark_group("estimate");
    group.sample_size(20);
    for n in [100, 1000] {
        let p = problem(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &p, |b, p| b.iter(|| p.estimate().unwrap()));
    }
    group.finish();
}

criterion_group!(benches, contrast_eval, estimate_one);
criterion_main!(benches);
