use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use latcorr::bridge::CaseKind;
use latcorr::estimator::{
    estimate_matrix, estimate_pair, Dataset, EstimationMethod, EstimatorConfig, GridSet, VariableType,
};
use latcorr::interp::precompute_grid;
use latcorr::par::Execution;
use latcorr::synth::{apply_dichotomization, generate_latent_pair_stream, ScenarioSpec};

const CASES: [CaseKind; 3] = [CaseKind::BC, CaseKind::BB, CaseKind::TC];

/// BC, BB and TC grids from `LATCORR_GRID_DIR` when set, otherwise built here.
fn grids() -> GridSet {
    if let Some(dir) = std::env::var_os("LATCORR_GRID_DIR") {
        if let Ok(set) = GridSet::load_dir(&dir, CASES) {
            return set;
        }
    }
    let mut set = GridSet::new();
    for case in CASES {
        set.insert(precompute_grid(case, Execution::Parallel).expect("grid"));
    }
    set
}

/// Alternating continuous and binary columns sharing one latent factor.
fn mixed_dataset(p: usize, n: usize) -> (Dataset, Vec<VariableType>) {
    let mut columns = Vec::with_capacity(p);
    let mut types = Vec::with_capacity(p);
    for k in 0..p {
        let (x, y) = generate_latent_pair_stream(n, 0.6, 3, k as u64);
        let (_, shared) = generate_latent_pair_stream(n, 0.0, 4, 0);
        let z: Vec<f64> = y.iter().zip(&shared).map(|(a, b)| 0.7 * a + 0.7 * b).collect();
        if k % 2 == 0 {
            columns.push(z);
            types.push(VariableType::Continuous);
        } else {
            columns.push(apply_dichotomization(&x, 0.3 + 0.05 * (k % 5) as f64));
            types.push(VariableType::Binary);
        }
    }
    (Dataset::from_columns(columns).expect("dataset"), types)
}

fn per_pair(c: &mut Criterion) {
    let grids = grids();
    let mut group = c.benchmark_group("pair");
    for case in CASES {
        let spec = ScenarioSpec::new(case, 0.5, 0.5, 100, 1, 1);
        let (x, y) = spec.generate(0);
        for method in EstimationMethod::ALL {
            let config = EstimatorConfig::new(method);
            group.bench_function(BenchmarkId::new(case.to_string(), method), |b| {
                b.iter(|| estimate_pair(black_box(&x), black_box(&y), spec.types(), &config, &grids).unwrap())
            });
        }
    }
    group.finish();
}

fn matrix(c: &mut Criterion) {
    let grids = grids();
    let (data, types) = mixed_dataset(48, 200);
    let mut group = c.benchmark_group("matrix_48x200");
    group.sample_size(20);
    for exec in [Execution::Sequential, Execution::Parallel] {
        let config = EstimatorConfig {
            execution: exec,
            ..EstimatorConfig::new(EstimationMethod::Mlbd)
        };
        group.bench_function(format!("{exec:?}"), |b| {
            b.iter(|| estimate_matrix(black_box(&data), &types, &config, &grids).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, per_pair, matrix);
criterion_main!(benches);
