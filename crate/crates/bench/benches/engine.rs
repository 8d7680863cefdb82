use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use digicopy::{standardize, window_slice, Engine, EngineConfig, IncrementalState, WindowSpec};
use digicopy_bench::desk_panel;

fn row_abs_sums(c: &mut Criterion) {
    let mut group = c.benchmark_group("row_abs_sums");
    group.sample_size(10);
    for n in [500, 2_000] {
        let panel = desk_panel(n, 6, 1);
        let z = standardize(&window_slice(&panel, 7, WindowSpec::default()).unwrap());
        for block in [64, 256] {
            let engine = Engine::new(EngineConfig::default().with_block(block)).unwrap();
            group.bench_with_input(BenchmarkId::new(format!("block{block}"), n), &z, |b, z| {
                b.iter(|| engine.row_abs_sums(z))
            });
        }
    }
    group.finish();
}

fn incremental_slide(c: &mut Criterion) {
    let n = 1_000;
    let panel = desk_panel(n, 6, 2);
    let engine = Engine::new(EngineConfig::default()).unwrap();
    let state = IncrementalState::new(&panel, 6, WindowSpec::default()).unwrap();
    let next = panel.row(6).to_vec();
    c.bench_function("incremental_slide/1000", |b| {
        b.iter_batched(
            || state.clone(),
            |mut s| s.slide(&next, &engine).unwrap(),
            criterion::BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, row_abs_sums, incremental_slide);
criterion_main!(benches);
