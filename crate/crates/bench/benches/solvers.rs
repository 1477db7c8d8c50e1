use criterion::{criterion_group, criterion_main, Criterion};

use procdisc::dual::{solve_dual, solve_global_dual, DualOptions};
use procdisc::instances::two_use_instance;
use procdisc::primal::{optimize_global, seesaw_sequential, SeesawConfig};
use procdisc::strategy::StrategyClass;

fn example(c: &mut Criterion) {
    let inst = two_use_instance().unwrap();
    let options = DualOptions::default();
    let mut group = c.benchmark_group("two-use example");
    group.sample_size(10);
    group.bench_function("sequential dual", |b| {
        b.iter(|| solve_dual(&inst, &StrategyClass::SequentialTwoStep, &options).unwrap())
    });
    group.bench_function("global dual", |b| b.iter(|| solve_global_dual(&inst, &options).unwrap()));
    group.bench_function("global primal", |b| b.iter(|| optimize_global(&inst).unwrap()));
    let seesaw = SeesawConfig { restarts: 4, ..SeesawConfig::default() };
    group.bench_function("seesaw, 4 restarts", |b| b.iter(|| seesaw_sequential(&inst, &seesaw).unwrap()));
    group.finish();
}

criterion_group!(benches, example);
criterion_main!(benches);
