use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use impact_hedge::closed_form::{exp_utility_z, ExpUtilitySpec};
use impact_hedge::esscher::{monotonicity_scan, MeasureSpec};
use impact_hedge::quotes::{check_axioms, QuoteContext};
use impact_hedge::simulate::{pnl_direct, simulate_paths, SimpleStrategy};
use impact_hedge::{solve_hedge_value, DriverSpec, PayoffSpec, SolverOptions, SpaceTimeGrid};
use impact_hedge_bench::{affine_family, brownian, short_put};

fn pde(c: &mut Criterion) {
    let mut group = c.benchmark_group("pde");
    group.sample_size(10);
    for nx in [101, 201, 401] {
        group.bench_with_input(BenchmarkId::new("affine_family", nx), &nx, |b, &nx| {
            b.iter(|| affine_family(nx, 400))
        });
    }
    let grid = SpaceTimeGrid::new(-8.0, 8.0, 801, 1000, 1.0).unwrap();
    group.bench_function("put_block_value_801x1000", |b| {
        b.iter(|| {
            solve_hedge_value(
                &brownian(),
                &DriverSpec::quadratic(0.1),
                &PayoffSpec::zero(),
                &short_put(),
                &grid,
                &SolverOptions::default(),
            )
            .unwrap()
        })
    });
    group.finish();
}

fn quotes(c: &mut Criterion) {
    let family = affine_family(401, 400);
    let ctx = QuoteContext::new(&family, 0.0, 0.0).unwrap();
    let axis: Vec<f64> = (0..21).map(|k| -1.0 + 0.1 * k as f64).collect();
    c.bench_function("quotes/axioms_21x21", |b| b.iter(|| check_axioms(black_box(&ctx), &axis, &axis)));
}

fn simulate(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate");
    group.sample_size(10);
    group.bench_function("paths_1000x500", |b| b.iter(|| simulate_paths(&brownian(), 500, 1000, 42).unwrap()));
    let family = affine_family(201, 400);
    let paths = simulate_paths(&brownian(), 200, 500, 7).unwrap();
    let strategy = SimpleStrategy::new(vec![0.0, 0.3, 0.7], vec![1.0, 2.0, -1.0]).unwrap();
    let s = PayoffSpec::affine(100.0, 20.0);
    group.bench_function("pnl_direct_500x200", |b| {
        b.iter(|| pnl_direct(&paths, &strategy, &family, &s).unwrap())
    });
    group.finish();
}

fn closed_form(c: &mut Criterion) {
    let spec = ExpUtilitySpec {
        gamma: 1.0,
        b: 0.0.into(),
        beta: 0.0.into(),
        sigma: 1.0.into(),
        h_m: PayoffSpec::zero(),
        s: PayoffSpec::Call { strike: 0.0 },
        horizon: 1.0,
    };
    c.bench_function("closed_form/call_z", |b| {
        b.iter(|| exp_utility_z(&spec, black_box(0.0), 0.0, black_box(-3.0)).unwrap())
    });
    let measure = MeasureSpec::uniform(0.0, 1.0, 10_001);
    let ys: Vec<f64> = (0..=40).map(|k| -20.0 + k as f64).collect();
    let phi = PayoffSpec::Call { strike: 0.5 };
    c.bench_function("esscher/scan_41_tilts", |b| {
        b.iter(|| monotonicity_scan(&measure, &phi, &ys).unwrap())
    });
}

criterion_group!(benches, pde, quotes, simulate, closed_form);
criterion_main!(benches);
