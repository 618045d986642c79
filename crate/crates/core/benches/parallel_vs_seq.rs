//! Benchmarks of the data-parallel entry points. Run once with the default
//! features and once with `--no-default-features` to compare the rayon and
//! sequential code paths:
//!
//! ```text
//! cargo bench -p statepred
//! cargo bench -p statepred --no-default-features
//! ```

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use std::time::Duration;

use statepred::gain::{synthesize_gain, DRegion, SearchConfig};
use statepred::model::build_augmented;
use statepred::simlab::{frequency_sweep, published_benchmark_gain, GainSource};
use statepred::LtiModel;

fn bench_synthesize(c: &mut Criterion) {
    let model = LtiModel::benchmark_plant(0.5);
    let aug = build_augmented(&model, 3).unwrap();
    let region = DRegion::disk(0.0, 40.0);
    let search = SearchConfig {
        n_candidates: 64,
        ..SearchConfig::default()
    };
    c.benchmark_group("gain_synthesis")
        .sample_size(10)
        .measurement_time(Duration::from_secs(20))
        .bench_function("benchmark_plant_r3_64_candidates", |b| {
            b.iter(|| {
                synthesize_gain(
                    black_box(&aug),
                    black_box(&model),
                    0.5,
                    black_box(&region),
                    black_box(&search),
                )
                .unwrap()
            })
        });
}

fn bench_sweep(c: &mut Criterion) {
    let gain = GainSource::Explicit(published_benchmark_gain());
    c.benchmark_group("frequency_sweep")
        .sample_size(10)
        .measurement_time(Duration::from_secs(30))
        .bench_function("three_omegas_three_methods", |b| {
            b.iter(|| frequency_sweep(black_box(&[0.5, 2.0, 4.0]), black_box(&gain)).unwrap())
        });
}

criterion_group!(benches, bench_synthesize, bench_sweep);
criterion_main!(benches);
