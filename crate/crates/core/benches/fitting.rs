use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use gamilt::boost::{self, StageConfig};
use gamilt::exec::with_threads;
use gamilt::filter::{self, FilterOptions};
use gamilt::scenario::{self, Scenario};
use gamilt::{FitContext, LossSpec, ResponseKind, TreeParams};

const N: usize = 20_000;

/// Thread settings compared: one worker versus all available cores.
fn thread_settings() -> Vec<(&'static str, usize)> {
    vec![("sequential", 1), ("parallel", 0)]
}

fn bench(c: &mut Criterion) {
    let s = Scenario::new(2, N, 0.5, ResponseKind::Continuous, 1);
    let (sim, bins) = scenario::simulate(&s).unwrap();
    let data = &sim.data;
    let ctx = FitContext::new(data, &bins, gamilt::spline::DEFAULT_KNOTS).unwrap();
    let loss = LossSpec::squared();
    let features: Vec<usize> = (0..data.n_features()).collect();
    let params = TreeParams::default();
    let y: Vec<f64> = ctx.train_rows().iter().map(|&i| data.response()[i]).collect();
    let base = vec![loss.initial_score(&y).unwrap(); data.n_rows()];
    let stage = StageConfig {
        max_iterations: 30,
        patience: 30,
        ..StageConfig::default()
    };

    let mut group = c.benchmark_group("main_stage");
    group.sample_size(10);
    for (name, threads) in thread_settings() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &threads, |b, &t| {
            b.iter(|| {
                with_threads(t, || {
                    let mut scores = base.clone();
                    boost::fit_main(&ctx, data, &loss, &mut scores, &stage, &features, &params).unwrap()
                })
            })
        });
    }
    group.finish();

    let mut residual_scores = base.clone();
    boost::fit_main(&ctx, data, &loss, &mut residual_scores, &stage, &features, &params).unwrap();
    let options = FilterOptions {
        params,
        subsample_cap: Some(filter::DEFAULT_SUBSAMPLE_CAP),
        seed: 1,
    };
    let mut group = c.benchmark_group("filter_int");
    group.sample_size(10);
    for (name, threads) in thread_settings() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &threads, |b, &t| {
            b.iter(|| {
                with_threads(t, || {
                    filter::filter_int(&ctx, data, &loss, &residual_scores, 10, &features, &options).unwrap()
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
