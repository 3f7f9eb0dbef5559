//! Gradient and encoding throughput.
//!
//! `bh_vs_exact` compares the two gradients at fixed layouts; `threads`
//! compares a one-thread pool against the global pool (identical results,
//! different wall time). Build with `--no-default-features` to benchmark
//! the sequential fallback instead.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use domtrace::encode::{encode_corpus, EncodedCorpus, Scheme};
use domtrace::log_io::{filter_traces, CorpusFilter};
use domtrace::par;
use domtrace::synth::{generate_corpus, StrategyPolicy};
use domtrace::tsne::{affinities, gradient_bh, gradient_exact, initial_points, optimize, AffinityMatrix, TsneParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn blob_corpus(n: usize) -> EncodedCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..20).map(|d| rng.random::<f64>() + if d == i % 5 { 4.0 } else { 0.0 }).collect())
        .collect();
    EncodedCorpus::from_rows(&rows, vec![None; n]).unwrap()
}

/// Affinities plus a layout after a short optimization, so the tree is
/// representative of mid-run geometry.
fn setup(n: usize) -> (AffinityMatrix, Vec<[f64; 2]>) {
    let params = TsneParams { n_iter: 100, ..TsneParams::default() };
    let p = affinities(&blob_corpus(n), &params).unwrap();
    let (y, _) = optimize(&p, initial_points(n, &params), &params);
    (p, y)
}

fn bh_vs_exact(c: &mut Criterion) {
    let mut group = c.benchmark_group("gradient");
    group.sample_size(10);
    for n in [500, 2000] {
        let (p, y) = setup(n);
        group.bench_with_input(BenchmarkId::new("barnes_hut", n), &n, |b, _| b.iter(|| gradient_bh(&p, &y, 0.5)));
        group.bench_with_input(BenchmarkId::new("exact", n), &n, |b, _| b.iter(|| gradient_exact(&p, &y)));
    }
    group.finish();
}

fn threads(c: &mut Criterion) {
    let (p, y) = setup(2000);
    let archetypes = [
        (StrategyPolicy::big_money(), 200),
        (StrategyPolicy::mine(), 200),
        (StrategyPolicy::village_smithy(), 200),
    ];
    let traces = filter_traces(&generate_corpus(&archetypes, 2, 1).unwrap(), &CorpusFilter::default());

    let mut group = c.benchmark_group("threads");
    group.sample_size(10);
    for (name, threads) in [("single", Some(1)), ("global_pool", None)] {
        group.bench_function(BenchmarkId::new("gradient_bh_2000", name), |b| {
            par::with_threads(threads, || b.iter(|| gradient_bh(&p, &y, 0.5)))
        });
        group.bench_function(BenchmarkId::new("encode_normalized", name), |b| {
            par::with_threads(threads, || b.iter(|| encode_corpus(&traces, Scheme::Normalized).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, bh_vs_exact, threads);
criterion_main!(benches);
