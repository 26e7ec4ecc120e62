use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;
use symq_core::disciplines::Discipline;
use symq_core::engine::{busy_cycles, simulate, SimConfig};
use symq_core::rbm::{simulate_path, RbmParams};
use symq_core::service_dist::ServiceDistribution;
use symq_core::stats::ks_two_sample;

/// Event-loop throughput across loads: the departure race is O(n) per
/// event, so cost grows with the typical queue length.
fn bench_event_loop(c: &mut Criterion) {
    let mut group = c.benchmark_group("event_loop");
    let sd = ServiceDistribution::exponential(1.0).unwrap();
    for rho in [0.5, 0.9, 0.99] {
        group.bench_with_input(BenchmarkId::new("ps_horizon_2000", rho), &rho, |b, &rho| {
            b.iter(|| {
                let mut rng = ChaCha8Rng::seed_from_u64(1);
                let cfg = SimConfig::new(2_000.0);
                simulate(&Discipline::ps(), &sd, rho, &cfg, &mut rng).unwrap()
            })
        });
    }
    group.finish();
}

fn bench_busy_cycles(c: &mut Criterion) {
    let sd = ServiceDistribution::exponential(1.0).unwrap();
    c.bench_function("busy_cycles_1000_rho07", |b| {
        b.iter(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            busy_cycles(&Discipline::lcfs(), &sd, 0.7, 1_000, &mut rng).unwrap()
        })
    });
}

fn bench_heavy_tail_sampling(c: &mut Criterion) {
    let pareto = ServiceDistribution::pareto(1.5, 1.0).unwrap();
    let pareto_log = ServiceDistribution::pareto_log(1.5, 1.0).unwrap();
    let mut group = c.benchmark_group("sampling");
    group.bench_function("pareto_10k", |b| {
        b.iter(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let mut acc = 0.0;
            for _ in 0..10_000 {
                acc += pareto.sample(&mut rng);
            }
            black_box(acc)
        })
    });
    group.bench_function("pareto_log_10k", |b| {
        b.iter(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let mut acc = 0.0;
            for _ in 0..10_000 {
                acc += pareto_log.sample(&mut rng);
            }
            black_box(acc)
        })
    });
    group.finish();
}

fn bench_cr_solver(c: &mut Criterion) {
    let pareto_log = ServiceDistribution::pareto_log(1.5, 1.0).unwrap();
    c.bench_function("solve_cr_paretolog_r1e3", |b| {
        b.iter(|| pareto_log.solve_cr(black_box(1_000.0)).unwrap())
    });
}

fn bench_rbm_path(c: &mut Criterion) {
    let p = RbmParams::new(-1.0, 2.0).unwrap();
    let grid: Vec<f64> = (1..=10).map(|k| k as f64 * 0.1).collect();
    c.bench_function("rbm_path_10x1000_substeps", |b| {
        b.iter(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            simulate_path(&p, &grid, 1_000, &mut rng).unwrap()
        })
    });
}

fn bench_ks(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    use rand::Rng;
    let a: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
    let b_sample: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
    c.bench_function("ks_two_sample_10k", |b| {
        b.iter(|| ks_two_sample(black_box(&a), black_box(&b_sample)).unwrap())
    });
}

criterion_group!(
    benches,
    bench_event_loop,
    bench_busy_cycles,
    bench_heavy_tail_sampling,
    bench_cr_solver,
    bench_rbm_path,
    bench_ks
);
criterion_main!(benches);
