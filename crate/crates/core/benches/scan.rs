use std::hint::black_box;

use centroidal_core::exec::Execution;
use centroidal_core::integrability::{flatness_report, GridSpec};
use centroidal_core::model::three_link;
use criterion::{criterion_group, criterion_main, Criterion};

fn scan(c: &mut Criterion) {
    let model = three_link(1.0);
    let grid = GridSpec::for_model(&model, 20);
    let mut group = c.benchmark_group("flatness_scan_20x20");
    group.sample_size(10);
    for (name, exec) in [
        ("sequential", Execution::Sequential),
        ("parallel", Execution::Parallel),
    ] {
        group.bench_function(name, |b| {
            b.iter(|| flatness_report(black_box(&model), &grid, 1e-7, 1e-4, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, scan);
criterion_main!(benches);
