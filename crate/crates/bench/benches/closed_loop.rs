use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use cstr_etsmc::sim::{self, rk4_step};
use cstr_etsmc::trigger::{self, LIPSCHITZ_BOX, LIPSCHITZ_SAMPLES};
use cstr_etsmc::{DimlessParams, DimlessState, Disturbance, Scenario, SimConfig, SlidingParams};

fn step(c: &mut Criterion) {
    let p = DimlessParams::default();
    let d = Disturbance::reference_sinusoids();
    let x = DimlessState::new(0.4472, 2.7517);
    c.bench_function("rk4_step", |b| {
        b.iter(|| rk4_step(black_box(&x), black_box(-2.0), black_box(3.0), 1e-3, &p, &d).unwrap())
    });
}

fn runs(c: &mut Criterion) {
    let mut g = c.benchmark_group("closed_loop_t50");
    g.sample_size(10);
    for (name, scenario) in [("nominal", Scenario::Nominal), ("disturbed", Scenario::Disturbed)] {
        let cfg = SimConfig::with_scenario(scenario);
        g.bench_function(format!("{name}/event_triggered"), |b| {
            b.iter(|| sim::run_event_triggered(black_box(&cfg)).unwrap())
        });
        g.bench_function(format!("{name}/time_triggered"), |b| {
            b.iter(|| sim::run_time_triggered(black_box(&cfg)).unwrap())
        });
    }
    g.finish();
}

fn bounds(c: &mut Criterion) {
    let p = DimlessParams::default();
    let sp = SlidingParams::default();
    c.bench_function("estimate_lipschitz", |b| {
        b.iter(|| trigger::estimate_lipschitz(black_box(&p), LIPSCHITZ_BOX, LIPSCHITZ_SAMPLES).unwrap())
    });
    let lip = trigger::estimate_lipschitz(&p, LIPSCHITZ_BOX, LIPSCHITZ_SAMPLES).unwrap();
    let x = DimlessState::new(0.4472, 2.7517);
    c.bench_function("zeno_bound", |b| {
        b.iter(|| trigger::zeno_bound(black_box(&x), black_box(0.015), &lip, &p, &sp).unwrap())
    });
}

criterion_group!(benches, step, runs, bounds);
criterion_main!(benches);
