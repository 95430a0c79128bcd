use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use dgff_core::field::green_column;
use dgff_core::overlap::overlap_sample;
use dgff_core::{BoxGeometry, DgffSampler, GreenCache, OverlapConfig, Vertex};

fn sample_dgff(c: &mut Criterion) {
    let mut group = c.benchmark_group("sample_dgff");
    for n in [64, 256, 512] {
        let sampler = DgffSampler::new(BoxGeometry::new(n).unwrap());
        let mut seed = 0u64;
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| {
                seed += 1;
                black_box(sampler.sample(seed))
            })
        });
    }
    group.finish();
}

fn green_columns(c: &mut Criterion) {
    let mut group = c.benchmark_group("green_column");
    for n in [64, 256] {
        let geom = BoxGeometry::new(n).unwrap();
        let v = Vertex::new(n as i64 / 3, n as i64 / 2);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| black_box(green_column(geom, v).unwrap()))
        });
    }
    group.finish();
}

fn overlap_disorder_sample(c: &mut Criterion) {
    let mut group = c.benchmark_group("overlap_sample");
    group.sample_size(10);
    let n = 256;
    let geom = BoxGeometry::new(n).unwrap();
    let sampler = DgffSampler::new(geom);
    let config = OverlapConfig::new(
        n,
        2.0 * dgff_core::closedform::beta_c(),
        Some(0.25),
        1,
        10_000,
        1,
    );
    let region = config.region().unwrap();
    let mut id = 0u64;
    group.bench_function("N=256, 10^4 pairs, fresh cache", |b| {
        b.iter(|| {
            let cache = GreenCache::with_memory_budget(geom, 512 << 20);
            id += 1;
            black_box(overlap_sample(&config, &region, &sampler, &cache, id).unwrap())
        })
    });
    group.finish();
}

criterion_group!(benches, sample_dgff, green_columns, overlap_disorder_sample);
criterion_main!(benches);
