use criterion::{criterion_group, criterion_main, Criterion};
use harbour_core::config::kriso;
use harbour_core::dynamics::Environment;
use harbour_core::trials::{run_battery, run_battery_sequential, standard_battery, TrialSpec};

fn battery(c: &mut Criterion) {
    let cfg = kriso();
    let env = Environment::default();
    let specs: Vec<TrialSpec> = standard_battery().into_iter().map(|(_, s)| s).collect();
    let mut group = c.benchmark_group("battery");
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        b.iter(|| run_battery_sequential(&specs, &cfg, &env))
    });
    // falls back to the sequential path without the `parallel` feature
    group.bench_function("parallel", |b| b.iter(|| run_battery(&specs, &cfg, &env)));
    group.finish();
}

criterion_group!(benches, battery);
criterion_main!(benches);
