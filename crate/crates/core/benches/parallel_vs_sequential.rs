use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use horoflow::curvfun::{certify_structure, CurvatureFunction};
use horoflow::exec::{par_map, Exec};
use horoflow::flow::rescaled_rhs_at;
use horoflow::numerics::{cell_angles, legendre};

fn rhs(c: &mut Criterion) {
    let f = CurvatureFunction::shifted_mean(2);
    let mut group = c.benchmark_group("rescaled_rhs");
    for n in [256, 1024, 4096, 16384] {
        let sigma: Vec<f64> = cell_angles(n).iter().map(|phi| 0.02 * legendre(2, phi.cos())).collect();
        for (name, exec) in [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)] {
            group.bench_with_input(BenchmarkId::new(name, n), &sigma, |b, s| {
                b.iter(|| rescaled_rhs_at(black_box(s), 1.5, 0.0, &f, 1.0, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn certification(c: &mut Criterion) {
    let entries = CurvatureFunction::catalog(3);
    let mut group = c.benchmark_group("certify_catalog");
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        b.iter(|| {
            entries
                .iter()
                .map(|f| certify_structure(f, 200, 1).unwrap())
                .collect::<Vec<_>>()
        })
    });
    group.bench_function("parallel", |b| {
        b.iter(|| par_map(&entries, |f| certify_structure(f, 200, 1).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, rhs, certification);
criterion_main!(benches);
