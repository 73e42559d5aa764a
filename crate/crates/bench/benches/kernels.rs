use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use gravphase_core::designer::{self, paper_scenario};
use gravphase_core::interferometer::{run_pulse, sample_shots, InterferometerLayout, MirrorSchedule};
use gravphase_core::kdp::{
    build_matrices, init_plane_wave, EvolutionConfig, Evolver, Grid, Integrator, PlaneWave,
};
use gravphase_core::phase::{classical_phase, classical_phase_exact, photon_mass_parameter, quantum_phase_closed_form};
use gravphase_core::units::{default_constants, Quantity};
use gravphase_core::{Frequency, Length, Time};

fn phases(c: &mut Criterion) {
    let consts = default_constants();
    let s = paper_scenario("lab-quantum", &consts).unwrap();
    c.bench_function("classical_phase", |b| {
        b.iter(|| classical_phase(&consts, black_box(&s.shell), &s.pulse, s.permittivity, s.winding))
    });
    c.bench_function("classical_phase_exact", |b| {
        b.iter(|| classical_phase_exact(&consts, black_box(&s.shell), &s.pulse, s.permittivity, s.winding))
    });
    c.bench_function("quantum_phase_closed_form", |b| {
        b.iter(|| quantum_phase_closed_form(&consts, black_box(&s.shell), &s.pulse, s.winding))
    });
    c.bench_function("design_paper_scenarios", |b| b.iter(|| designer::paper_scenarios(black_box(&consts))));
}

fn kdp(c: &mut Criterion) {
    let consts = default_constants();
    c.bench_function("build_matrices", |b| b.iter(build_matrices));

    let spacing = Length::new(2e-8).unwrap();
    for (label, grid) in [("1d_256", Grid::one_d(256)), ("3d_16", Grid::cube(16))] {
        let wave = PlaneWave::mode(grid, spacing, [2, 0, 0], [0.0, 1.0, 0.0]);
        let omega = wave.angular_frequency(&consts);
        let m = photon_mass_parameter(&consts, Frequency::new(omega).unwrap()).unwrap().value();
        let state = init_plane_wave(&wave, grid, spacing, m, consts).unwrap();
        for integrator in [Integrator::SpectralExact, Integrator::Rk4FiniteDifference] {
            let cfg = EvolutionConfig::new(Time::new(1e-17).unwrap(), integrator).with_potential(-1e-19);
            let evolver = Evolver::new(&state, cfg).unwrap();
            c.bench_function(&format!("step_{integrator:?}_{label}"), |b| {
                b.iter_batched_ref(|| state.clone(), |s| evolver.step(s).unwrap(), BatchSize::SmallInput)
            });
        }
    }
}

fn interferometer(c: &mut Criterion) {
    let consts = default_constants();
    let s = paper_scenario("lab-quantum", &consts).unwrap();
    let layout = InterferometerLayout::figure_one(s.shell, s.cycle_path_length, Length::new(150.0).unwrap()).unwrap();
    let schedule = MirrorSchedule::standard(&layout, s.winding).unwrap();
    c.bench_function("run_pulse", |b| {
        b.iter(|| run_pulse(black_box(&layout), &schedule, &s.pulse, s.mode, &consts).unwrap())
    });
    let outcome = run_pulse(&layout, &schedule, &s.pulse, s.mode, &consts).unwrap();
    c.bench_function("sample_shots_1000", |b| {
        b.iter(|| sample_shots(black_box(&outcome), &s.pulse, 7, 1000).unwrap())
    });
}

criterion_group!(benches, phases, kdp, interferometer);
criterion_main!(benches);
