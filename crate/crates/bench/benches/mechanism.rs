use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use limbkin_core::kinematics::{servo_angle, Linkage};
use limbkin_core::optimizer::{default_ranges, select_optimum, sweep, Criterion as Pick};
use limbkin_core::statics::servo_torque;
use limbkin_core::terrain::{fig2_preset, traverse};
use limbkin_core::{Config, LinkageGeometry};

fn kinematics(c: &mut Criterion) {
    let g = LinkageGeometry::reference();
    c.bench_function("servo_angle", |b| b.iter(|| servo_angle(&g, black_box(0.3))));
    c.bench_function("servo_torque", |b| b.iter(|| servo_torque(&g, black_box(0.3), 9.8)));
    let link = Linkage::new(g).unwrap();
    c.bench_function("inverse_servo", |b| b.iter(|| link.inverse_servo(black_box(0.5))));
}

fn design(c: &mut Criterion) {
    let g = LinkageGeometry::reference();
    let (t, l) = default_ranges();
    c.bench_function("sweep_31x101_and_select", |b| {
        b.iter(|| select_optimum(&sweep(&g, t, l, 9.8).unwrap(), Pick::default()).unwrap().lcd)
    });
}

fn simulation(c: &mut Criterion) {
    let cfg = Config::default();
    let profile = fig2_preset();
    let mut group = c.benchmark_group("traverse");
    group.sample_size(10);
    group.bench_function("fig2", |b| {
        b.iter(|| traverse(&cfg.geometry, &profile, &cfg.simulation).unwrap().records.len())
    });
    group.finish();
}

criterion_group!(benches, kinematics, design, simulation);
criterion_main!(benches);
