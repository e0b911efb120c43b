use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ilc_core::parallel::is_parallel_available;
use ilc_core::sweep::{run_sweep, GridAxis, SweepConfig};
use ilc_core::LearningKind;

fn config(workers: usize) -> SweepConfig {
    let mut c = SweepConfig::new(LearningKind::L2Ahead.with_gain(1.0).unwrap());
    c.a_axis = GridAxis::interior(0.0, 1.0, 8);
    c.b_axis = GridAxis::interior(-1.0, 1.0, 8);
    c.n = 64;
    c.j_max = 200;
    c.workers = workers;
    c
}

fn sweep_workers(c: &mut Criterion) {
    let mut group = c.benchmark_group("sweep_8x8_n64");
    group.sample_size(10);
    let parallel = std::thread::available_parallelism().map_or(4, |n| n.get()).max(2);
    let mut counts = vec![1];
    if is_parallel_available() {
        counts.push(parallel);
    }
    for workers in counts {
        let cfg = config(workers);
        let label = if workers == 1 { "sequential" } else { "rayon" };
        group.bench_with_input(BenchmarkId::new(label, workers), &cfg, |b, cfg| {
            b.iter(|| run_sweep(black_box(cfg)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, sweep_workers);
criterion_main!(benches);
