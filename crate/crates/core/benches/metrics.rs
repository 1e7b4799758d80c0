//! Parallel kernels against the same kernels pinned to one thread.

use std::hint::black_box;

use activenet::graph::{GraphView, UndirectedGraph};
use activenet::metrics::{
    avg_clustering, betweenness, distance_profile, eigenvector_centrality, BetweennessMode,
};
use activenet::par;
use activenet::synth::{chung_lu, power_law_weights};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn fixture() -> UndirectedGraph {
    let g = chung_lu(&power_law_weights(20_000, 2.8), 120_000, 7);
    g.largest_component().to_undirected()
}

type Kernel<'a> = Box<dyn Fn() + 'a>;

fn kernels(c: &mut Criterion) {
    let g = fixture();
    let n = g.node_count();
    let cases: Vec<(&str, Kernel)> = vec![
        (
            "distance_profile",
            Box::new(|| {
                black_box(distance_profile(&g).unwrap());
            }),
        ),
        (
            "betweenness_sampled_128",
            Box::new(|| {
                black_box(betweenness(
                    &g,
                    BetweennessMode::Sampled {
                        pivots: 128,
                        seed: 1,
                    },
                    true,
                ));
            }),
        ),
        (
            "clustering",
            Box::new(|| {
                black_box(avg_clustering(&g));
            }),
        ),
        (
            "eigenvector",
            Box::new(|| {
                black_box(eigenvector_centrality(&g).unwrap());
            }),
        ),
    ];

    let mut group = c.benchmark_group("metrics");
    group.sample_size(10);
    for (name, f) in &cases {
        group.bench_with_input(
            BenchmarkId::new(format!("{name}/parallel"), n),
            &(),
            |b, _| b.iter(f),
        );
        group.bench_with_input(
            BenchmarkId::new(format!("{name}/sequential"), n),
            &(),
            |b, _| b.iter(|| par::run_sequential(f)),
        );
    }
    group.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
