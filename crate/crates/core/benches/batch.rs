use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;

use silevy::batch::map_indexed_sequential;
use silevy::indexing::{IncrementRegion, RectSet};
use silevy::laws::{LevyTriplet, MarkDist};
use silevy::simulate::{sample_path_at, ProcessSpec, RegionPlan};

fn spec(level: u32) -> ProcessSpec {
    let triplet = LevyTriplet {
        sigma: 1.0,
        ..LevyTriplet::compound_poisson(20.0, MarkDist::Normal { mean: 0.0, sd: 1.0 })
    };
    ProcessSpec::new(triplet, 2, level, 1).unwrap()
}

fn increments(c: &mut Criterion) {
    let paths = 256u64;
    let mut group = c.benchmark_group("sample_and_evaluate");
    group.throughput(Throughput::Elements(paths));
    for level in [3u32, 6] {
        let spec = spec(level);
        let region = IncrementRegion::difference(RectSet::unit(2), RectSet::Rect(vec![0.5, 0.25]));
        let plan = RegionPlan::new(spec.dissection(), &region).unwrap();
        let work = |r: u64| sample_path_at(&spec, r).unwrap().evaluate_plan(&plan).unwrap();
        group.bench_with_input(BenchmarkId::new("sequential", level), &level, |b, _| {
            b.iter(|| black_box(map_indexed_sequential(0..paths, work)))
        });
        #[cfg(feature = "parallel")]
        group.bench_with_input(BenchmarkId::new("parallel", level), &level, |b, _| {
            b.iter(|| black_box(silevy::batch::map_indexed_parallel(0..paths, work)))
        });
    }
    group.finish();
}

criterion_group!(benches, increments);
criterion_main!(benches);
