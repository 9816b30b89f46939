use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use polar_core::graph::{self, EdgeWeighting, RwcConfig};
use polar_core::metrics::{self, MetricOptions};
use polar_core::stats::{self, KmeansConfig};
use polar_bench::{dataset, metric_vectors, tri_points};
use std::hint::black_box;

fn entropy(c: &mut Criterion) {
    let counts: Vec<u64> = (0..20).map(|i| (i * 37 % 11) as u64).collect();
    c.bench_function("inverted_normalized_entropy/20", |b| {
        b.iter(|| metrics::inverted_normalized_entropy(black_box(&counts), 20).unwrap())
    });
}

fn compute_all(c: &mut Criterion) {
    let mut g = c.benchmark_group("compute_all");
    for n in [1000, 5000] {
        let ds = dataset(n, 1);
        let opts = MetricOptions {
            positive_community: Some("pro".into()),
            ..MetricOptions::default()
        };
        g.throughput(Throughput::Elements(n as u64));
        g.bench_with_input(BenchmarkId::from_parameter(n), &ds, |b, ds| {
            b.iter(|| metrics::compute_all(ds, &opts).unwrap())
        });
    }
    g.finish();
}

fn clustering(c: &mut Criterion) {
    let points = tri_points(&metric_vectors(&dataset(1000, 1)));
    let mut g = c.benchmark_group("clustering");
    g.sample_size(10);
    let cfg = KmeansConfig {
        restarts: 10,
        ..KmeansConfig::default()
    };
    g.bench_function("kmeans/k4", |b| b.iter(|| stats::kmeans(&points, 4, &cfg).unwrap()));
    g.bench_function("select_k/2..6", |b| b.iter(|| stats::select_k(&points, 2..=6, &cfg).unwrap()));
    let fit = stats::kmeans(&points, 4, &cfg).unwrap();
    g.bench_function("silhouette", |b| {
        b.iter(|| stats::silhouette(&points, &fit.assignments).unwrap())
    });
    g.finish();
}

fn graphs(c: &mut Criterion) {
    let ds = dataset(1000, 1);
    let g0 = graph::build_graph(&ds);
    let binary = g0.reweighted(EdgeWeighting::Binary);
    let part = graph::detect_communities(&binary).unwrap();
    let mut g = c.benchmark_group("graph");
    g.sample_size(10);
    g.bench_function("greedy_modularity", |b| b.iter(|| graph::greedy_modularity(&binary).unwrap()));
    let cfg = RwcConfig {
        walks_per_side: 2000,
        ..RwcConfig::default()
    };
    g.bench_function("rwc/2000", |b| b.iter(|| graph::rwc(&g0, &part, &cfg).unwrap()));
    g.finish();
}

criterion_group!(benches, entropy, compute_all, clustering, graphs);
criterion_main!(benches);
