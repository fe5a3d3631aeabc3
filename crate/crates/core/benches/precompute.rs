use criterion::{criterion_group, criterion_main, Criterion};
use latcorr::bridge::CaseKind;
use latcorr::interp::precompute_grid;
use latcorr::par::Execution;

fn precompute(c: &mut Criterion) {
    let mut group = c.benchmark_group("precompute");
    group.sample_size(10);
    for case in [CaseKind::BC, CaseKind::BB] {
        for exec in [Execution::Sequential, Execution::Parallel] {
            group.bench_function(format!("{case}/{exec:?}"), |b| {
                b.iter(|| precompute_grid(case, exec).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, precompute);
criterion_main!(benches);
