use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use evtrack_core::event::window_events;
use evtrack_core::sim::{default_scenario, Pattern, Power};
use evtrack_core::{dbscan, DbscanParams, KdTree2, TrackerConfig, TrackerState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const T_A_US: u64 = 100_000;
const STEP_US: u64 = 25_000;

fn busy_window() -> Vec<evtrack_core::Event> {
    let mut s = default_scenario(4, Pattern::Square, Power::Full, 7).unwrap();
    s.duration_us = 1_000_000;
    let events = s.simulate().unwrap().events;
    let windows = window_events(&events, T_A_US, STEP_US, 0).unwrap();
    windows.iter().max_by_key(|w| w.len()).unwrap().events.to_vec()
}

fn bench_dbscan(c: &mut Criterion) {
    let events = busy_window();
    let points: Vec<(i32, i32)> = events.iter().map(|e| e.xy()).collect();
    let params = DbscanParams::new(15.0, 225).unwrap();
    c.bench_function(&format!("dbscan/{}_events", points.len()), |b| {
        b.iter(|| dbscan::cluster(black_box(&points), params).unwrap())
    });

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let scattered: Vec<(i32, i32)> = (0..20_000).map(|_| (rng.random_range(0..640), rng.random_range(0..480))).collect();
    c.bench_function("dbscan/20000_uniform", |b| {
        b.iter(|| dbscan::cluster(black_box(&scattered), params).unwrap())
    });
}

fn bench_kdtree(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pts: Vec<(f64, f64, u64)> =
        (0..1000).map(|i| (rng.random_range(0.0..640.0), rng.random_range(0.0..480.0), i)).collect();
    let queries: Vec<(f64, f64)> = (0..256).map(|_| (rng.random_range(0.0..640.0), rng.random_range(0.0..480.0))).collect();
    let tree = KdTree2::rebuild(&pts).unwrap();
    c.bench_function("kdtree/nearest_1000", |b| {
        b.iter(|| {
            for &(x, y) in &queries {
                black_box(tree.nearest(x, y).unwrap());
            }
        })
    });
    c.bench_function("kdtree/rebuild_1000", |b| b.iter(|| KdTree2::rebuild(black_box(&pts)).unwrap()));
}

fn bench_tracker(c: &mut Criterion) {
    let events = busy_window();
    let t_end = events.last().unwrap().t_us + 1;
    let config = TrackerConfig::default();
    c.bench_function("tracker/step", |b| {
        b.iter_batched(
            TrackerState::new,
            |mut state| {
                let w = evtrack_core::EventWindow::new(t_end, T_A_US, &events);
                state.step(&w, &config).unwrap()
            },
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, bench_dbscan, bench_kdtree, bench_tracker);
criterion_main!(benches);
