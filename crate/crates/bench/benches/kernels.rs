use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use dqubit_core::dynamics::{evolve, DecayModel, DriveKind, EffectiveDrive};
use dqubit_core::ramsey::{calibrate_noise, ramsey_scan, NoiseModel, Readout};
use dqubit_core::scatter::{simulate_pumping, DetectionMatrix, DetectionParams};
use dqubit_core::tomography::{solve_constrained, synth_counts, BackgroundConvention};
use dqubit_core::{Polarization, PumpModel, QuartetState, ZeemanState};

fn pumping(c: &mut Criterion) {
    let params = DetectionParams::default();
    let s_model = PumpModel::build(params.constants, params.b_gauss, &params.s_beams(Polarization::SigmaPlus)).unwrap();
    let d_model = PumpModel::build(params.constants, params.b_gauss, &params.d_beams(&[Polarization::SigmaPlus, Polarization::Pi])).unwrap();
    let mut g = c.benchmark_group("simulate_pumping");
    g.bench_function("s_bright_10k", |b| {
        b.iter(|| simulate_pumping(&s_model, ZeemanState::s(-1), 10_000, black_box(1), &params.sim).unwrap())
    });
    g.bench_function("d_sigma_plus_pi_10k", |b| {
        b.iter(|| simulate_pumping(&d_model, ZeemanState::d(-1), 10_000, black_box(1), &params.sim).unwrap())
    });
    g.finish();
}

fn tomography(c: &mut Criterion) {
    let m = DetectionMatrix::published_d();
    let conv = BackgroundConvention::Scaled;
    let counts = synth_counts(&[0.5, 0.0, 0.3, 0.2], 0.8, 0.1, &m, 500, 3, conv, false).unwrap();
    c.bench_function("solve_constrained", |b| b.iter(|| solve_constrained(black_box(&counts), &m, 0.8, conv).unwrap()));
}

fn dynamics(c: &mut Criterion) {
    let drive = EffectiveDrive::new(DriveKind::Dm2, PI / 30e-6, 0.0).unwrap();
    let decay = DecayModel::new(400e-6).unwrap();
    let rho = QuartetState::basis(3).to_density();
    let times: Vec<f64> = (0..1000).map(|k| 250e-6 * k as f64 / 999.0).collect();
    c.bench_function("evolve_1000_points", |b| b.iter(|| evolve(black_box(&rho), &drive, &decay, &times).unwrap()));
}

fn ramsey(c: &mut Criterion) {
    let noise = NoiseModel { sigma_b_mg: calibrate_noise(96e-6, 2.8).unwrap(), ..NoiseModel::default() };
    let delays: Vec<f64> = (0..21).map(|k| 240e-6 * k as f64 / 20.0).collect();
    c.bench_function("ramsey_scan_21x10k", |b| {
        b.iter(|| ramsey_scan(2.8, &noise, black_box(&delays), 10_000, 5, Readout::Contrast).unwrap())
    });
}

criterion_group!(benches, pumping, tomography, dynamics, ramsey);
criterion_main!(benches);
