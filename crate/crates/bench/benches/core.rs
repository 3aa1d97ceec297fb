use std::f64::consts::PI;

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use crone_core::fixtures::{lorentz_plant, reference_spec, reference_tuning, PlantReading};
use crone_core::reset::make_lag_reset;
use crone_core::sim::{
    fourth_order_trajectory, nominal_feedforward, simulate_controller, DiscreteBlock, SimConfig,
};
use crone_core::stability::{
    check_quadratic_stability, closed_loop_for, DelayModel, SolverOptions,
};
use crone_core::synthesis::{synthesize, Strategy};

fn describing_function(c: &mut Criterion) {
    let spec = reference_spec();
    let lag = make_lag_reset(spec.w_b, spec.w_h).unwrap();
    c.bench_function("df/lag_reset", |b| {
        b.iter(|| {
            lag.describing_function(black_box(2.0 * PI * 300.0))
                .unwrap()
        })
    });
}

fn synthesis(c: &mut Criterion) {
    let (spec, plant) = (
        reference_spec(),
        lorentz_plant(PlantReading::Damping, false),
    );
    c.bench_function("synthesize/reference_lag", |b| {
        b.iter(|| synthesize(&spec, &plant, Strategy::LagReset, reference_tuning(), 4).unwrap())
    });
}

fn simulation(c: &mut Criterion) {
    let plant = lorentz_plant(PlantReading::Damping, false);
    let ctl = synthesize(
        &reference_spec(),
        &plant,
        Strategy::LagReset,
        reference_tuning(),
        4,
    )
    .unwrap();
    let cfg = SimConfig::default();
    let mut block =
        DiscreteBlock::new(&ctl.sigma_nr.to_ss(), cfg.dt, cfg.controller_method).unwrap();
    c.bench_function("sim/sigma_nr_step", |b| {
        b.iter(|| block.step(black_box(1e-6)))
    });

    let cfg = SimConfig {
        duration: 0.5,
        ..SimConfig::default()
    };
    let (r, acc) =
        fourth_order_trajectory(Default::default(), 0.25, cfg.dt, cfg.samples()).unwrap();
    let ff = nominal_feedforward(&acc);
    let delayed = lorentz_plant(PlantReading::Damping, true);
    c.bench_function("sim/closed_loop_0.5s", |b| {
        b.iter(|| simulate_controller(&delayed, &ctl, &r, Some(&ff), &cfg).unwrap())
    });
}

fn stability(c: &mut Criterion) {
    let plant = lorentz_plant(PlantReading::Damping, false);
    let ctl = synthesize(
        &reference_spec(),
        &plant,
        Strategy::LagReset,
        reference_tuning(),
        4,
    )
    .unwrap();
    let clm = closed_loop_for(&ctl, &plant, DelayModel::Ignore).unwrap();
    let mut group = c.benchmark_group("stability");
    group.sample_size(10);
    group.bench_function("reference_certificate", |b| {
        b.iter(|| check_quadratic_stability(&clm, SolverOptions::default()).unwrap())
    });
    group.finish();
}

criterion_group!(
    benches,
    describing_function,
    synthesis,
    simulation,
    stability
);
criterion_main!(benches);
