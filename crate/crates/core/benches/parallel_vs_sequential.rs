use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mbridge::bench::{accuracy_experiment, builtin_generator, ExperimentConfig};
use mbridge::inference::{mcem_estimate, McemConfig, ObservationSeries, SamplingConfig};
use mbridge::{simulate_forward, Execution, Method, SeedTree};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn accuracy(c: &mut Criterion) {
    let mut group = c.benchmark_group("accuracy_experiment");
    group.sample_size(10);
    for (name, exec) in MODES {
        let cfg = ExperimentConfig {
            methods: vec![Method::Direct, Method::Uniformization, Method::TimeReverse],
            times: vec![0.5, 1.0, 2.0, 4.0],
            ns: vec![3, 5],
            samples: 200,
            replicates: 2,
            exec,
            ..ExperimentConfig::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| accuracy_experiment(black_box(&cfg)).unwrap())
        });
    }
    group.finish();
}

fn mcem(c: &mut Criterion) {
    let g = builtin_generator("model2", None).unwrap();
    let path = simulate_forward(&g, 0, 200.0, &mut SeedTree::new(1).rng()).unwrap();
    let obs =
        ObservationSeries::from_path(&path, (0..=400).map(|k| k as f64 * 0.5).collect()).unwrap();
    let init = builtin_generator("uniform", Some(3)).unwrap();
    let mut group = c.benchmark_group("mcem_estimate");
    group.sample_size(10);
    for (name, exec) in MODES {
        let cfg = McemConfig {
            iters: 5,
            bridges_per_gap: 20,
            sampling: SamplingConfig {
                exec,
                ..SamplingConfig::default()
            },
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| mcem_estimate(&init, black_box(&obs), &cfg, &SeedTree::new(2)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, accuracy, mcem);
criterion_main!(benches);
