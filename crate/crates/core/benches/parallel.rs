//! Serial vs rayon execution on the three data-parallel paths: Monte Carlo
//! replicates, k-means restarts and row-wise network sampling.

use std::hint::black_box;

use commscale::experiment::{run_experiment, ExperimentConfig, MethodSpec};
use commscale::model::{sample_network, simulation_params, EdgeDistribution, SampleOptions};
use commscale::rng::stream_rng;
use commscale::spectral::{kmeans, ClusterMethod, Clusterer, KMeansOptions};
use commscale::Execution;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const N_ALL: [usize; 6] = [50, 100, 150, 50, 100, 150];
const MODES: [(&str, Execution); 2] = [("serial", Execution::Serial), ("parallel", Execution::Parallel)];

fn replicates(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_experiment");
    group.sample_size(10);
    let config = ExperimentConfig {
        k_list: vec![3],
        replicates: 8,
        methods: vec![MethodSpec::svps(ClusterMethod::Score, 0.05)],
        ..ExperimentConfig::default()
    };
    for (name, mode) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_experiment(black_box(&config), mode).unwrap())
        });
    }
    group.finish();
}

fn restarts(c: &mut Criterion) {
    let mut group = c.benchmark_group("kmeans");
    let model = simulation_params(4, 0.12, 2.0, &N_ALL, &mut stream_rng(1, 0)).unwrap();
    let a = sample_network(
        &model.mean_matrix(),
        EdgeDistribution::Poisson,
        1,
        SampleOptions::default(),
    )
    .unwrap();
    let rows = Clusterer::new(ClusterMethod::Score)
        .prepare(&a)
        .unwrap()
        .embedding(4)
        .unwrap();
    for (name, mode) in MODES {
        let opts = KMeansOptions {
            execution: mode,
            ..KMeansOptions::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| kmeans(black_box(&rows), 4, 7, &opts).unwrap())
        });
    }
    group.finish();
}

fn sampling(c: &mut Criterion) {
    let mut group = c.benchmark_group("sample_network");
    let model = simulation_params(6, 0.12, 2.0, &N_ALL, &mut stream_rng(2, 0)).unwrap();
    let mean = model.mean_matrix();
    for (name, mode) in MODES {
        let opts = SampleOptions {
            execution: mode,
            ..SampleOptions::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| sample_network(black_box(&mean), EdgeDistribution::Poisson, 3, opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, replicates, restarts, sampling);
criterion_main!(benches);
