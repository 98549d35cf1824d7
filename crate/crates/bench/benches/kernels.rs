use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use cddclock_core::clocksim::{overlapping_allan, run_clock_servo, ClockIons, NoiseModel, ServoConfig};
use cddclock_core::crystal::{equilibrium_positions, TrapConfig};
use cddclock_core::dressing::CddParameterSet;
use cddclock_core::dynamics::{
    evolve_state, BlockId, HamiltonianModel, Method, Stepper,
};
use cddclock_core::linalg::{expm, unitary_eigen};
use cddclock_core::waveform::{stitch, SegmentSpec};
use cddclock_core::PhysicalConstants;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

fn bench_expm(c: &mut Criterion) {
    let consts = PhysicalConstants::default();
    let set = CddParameterSet::resonant(&consts);
    let model = HamiltonianModel::steady(&set, &consts);
    let ham = model.assemble(BlockId::DOnly, false).unwrap();
    let mut h = DMatrix::<Complex64>::zeros(6, 6);
    ham.eval_into(1.3e-7, &mut h);
    let a = h.map(|z| Complex64::new(0.0, -1.0) * z * 1.3e-9 * std::f64::consts::TAU);
    c.bench_function("expm_6x6_step_norm", |b| b.iter(|| expm(black_box(&a))));
}

fn bench_stepper(c: &mut Criterion) {
    let consts = PhysicalConstants::default();
    let set = CddParameterSet::resonant(&consts);
    let model = HamiltonianModel::steady(&set, &consts);
    let ham = model.assemble(BlockId::DOnly, false).unwrap();
    let dt = 1.0 / (50.0 * ham.f_max_hz);
    c.bench_function("cf4_step_d_block", |b| {
        let mut stepper = Stepper::new(&ham, dt, Method::CommutatorFree4);
        let mut t = 0.0;
        b.iter(|| {
            let u = stepper.step_unitary(t);
            t += dt;
            black_box(u)
        })
    });
    c.bench_function("propagate_d_block_10us", |b| {
        let psi0 = DVector::<Complex64>::from_fn(6, |i, _| {
            if i == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        b.iter(|| {
            black_box(evolve_state(
                &ham,
                &psi0,
                0.0,
                1e-5,
                dt,
                Method::CommutatorFree4,
            ))
        })
    });
}

fn bench_unitary_eigen(c: &mut Criterion) {
    let consts = PhysicalConstants::default();
    let set = CddParameterSet::resonant(&consts);
    let model = HamiltonianModel::steady(&set, &consts);
    let ham = model.assemble(BlockId::DOnly, false).unwrap();
    let dt = 1.0 / (50.0 * ham.f_max_hz);
    let (u, _) = {
        let mut stepper = Stepper::new(&ham, dt, Method::CommutatorFree4);
        (stepper.step_unitary(0.0), ())
    };
    c.bench_function("unitary_eigen_6x6", |b| b.iter(|| unitary_eigen(black_box(&u))));
}

fn bench_crystal(c: &mut Criterion) {
    let consts = PhysicalConstants::default();
    c.bench_function("equilibrium_positions_n5", |b| {
        let cfg = TrapConfig::default_five_ion();
        b.iter(|| equilibrium_positions(black_box(&cfg), &consts).unwrap())
    });
    c.bench_function("equilibrium_positions_n20", |b| {
        let cfg = TrapConfig::new(
            std::f64::consts::TAU * 300e3,
            std::f64::consts::TAU * 3e6,
            20,
        )
        .unwrap();
        b.iter(|| equilibrium_positions(black_box(&cfg), &consts).unwrap())
    });
}

fn bench_waveform(c: &mut Criterion) {
    let prog = stitch(&[
        SegmentSpec::sweep1(1.0, 10_002_089.0, -150_000.0, 500e-6),
        SegmentSpec::sweep2(1.0, 0.3, 10_002_089.0, 46_915.0, 30_000.0, 7e-3),
        SegmentSpec::hold2(1.0, 0.3, 10_002_089.0, 46_915.0, 200e-6),
    ])
    .unwrap();
    c.bench_function("waveform_sample_1ms_at_125msps", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for k in 0..125_000u64 {
                acc += prog.value(k as f64 * 8e-9);
            }
            black_box(acc)
        })
    });
}

fn bench_servo_allan(c: &mut Criterion) {
    let consts = PhysicalConstants::default();
    let set = CddParameterSet::resonant(&consts);
    c.bench_function("servo_1000_cycles", |b| {
        let servo = ServoConfig::default();
        let noise = NoiseModel::default();
        b.iter(|| {
            black_box(
                run_clock_servo(&set, &consts, &ClockIons::single(), &noise, &servo, 300.0)
                    .unwrap(),
            )
        })
    });
    c.bench_function("overlapping_allan_65536", |b| {
        let y: Vec<f64> = (0..65_536)
            .map(|k| ((k * 2654435761u64 % 1000) as f64 - 500.0) * 1e-18)
            .collect();
        let taus: Vec<f64> = (0..12).map(|p| (1u64 << p) as f64).collect();
        b.iter(|| black_box(overlapping_allan(&y, 1.0, &taus).unwrap()))
    });
}

criterion_group!(
    benches,
    bench_expm,
    bench_stepper,
    bench_unitary_eigen,
    bench_crystal,
    bench_waveform,
    bench_servo_allan
);
criterion_main!(benches);
