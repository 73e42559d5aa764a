//! `kdp verify` and `kdp evolve`.

use std::fs::File;
use std::io::{BufWriter, Write};

use gravphase_core::kdp::algebra::{
    algebra_residual, beta_tilde_residual, build_matrices, gamma_projector_residual, gamma_relation_residual,
    write_matrices, Fields,
};
use gravphase_core::kdp::field::{
    apply_gauge, constraint_residual, current, init_plane_wave, mass_independence_check, maxwell_residual,
    relative_phase, EvolutionConfig, Evolver, LatticeState, PhaseTracker, PlaneWave,
};
use gravphase_core::kdp::{Grid, Integrator, PotentialCoupling};
use gravphase_core::phase::photon_mass_parameter;
use gravphase_core::units::Quantity;
use gravphase_core::{Frequency, Length, PhysConstants, Time};
use serde::Serialize;

use crate::args::{CouplingArg, EvolveArgs, IntegratorArg, VerifyArgs};
use crate::config::{self, EvolutionSpec, ScenarioFile};
use crate::output::{f17, short, write_json, Format, Table};
use crate::CliError;

/// Tolerance for the lattice checks of `kdp verify`.
pub const LATTICE_TOL: f64 = 1e-10;
/// Tolerance for the mass-independence check.
pub const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: &'static str, value: f64, tolerance: f64) -> Self {
        Self {
            name,
            value,
            tolerance,
            pass: value.is_finite() && value <= tolerance,
        }
    }
}

fn load_spec(config: Option<&str>, base: PhysConstants) -> Result<(EvolutionSpec, PhysConstants), CliError> {
    let file = match config {
        Some(path) => config::load(path, base)?,
        None => ScenarioFile::empty(base),
    };
    Ok((file.evolution.unwrap_or_default(), file.consts))
}

/// Plane wave of `spec` packed with the photon mass parameter of its
/// frequency.
pub fn initial_state(spec: &EvolutionSpec, consts: PhysConstants) -> Result<(PlaneWave, LatticeState), CliError> {
    let wave = PlaneWave::mode(spec.grid, spec.spacing, spec.mode_numbers, spec.polarization);
    let omega = wave.angular_frequency(&consts);
    if omega == 0.0 {
        return Err(CliError::validation("mode_numbers must not all be zero"));
    }
    let m = photon_mass_parameter(&consts, Frequency::new(omega)?)?.value();
    let state = init_plane_wave(&wave, spec.grid, spec.spacing, m, consts)?;
    Ok((wave, state))
}

pub fn verify_checks(spec: &EvolutionSpec, consts: PhysConstants) -> Result<Vec<Check>, CliError> {
    let set = build_matrices();
    let mut checks = vec![
        Check::new("beta_algebra", algebra_residual(&set), 0.0),
        Check::new("gamma_beta_relation", gamma_relation_residual(&set), 0.0),
        Check::new("gamma_projector", gamma_projector_residual(&set), 0.0),
        Check::new("gamma_trace", (set.gamma.trace().re - 6.0).abs() + set.gamma.trace().im.abs(), 0.0),
        Check::new("beta_tilde", beta_tilde_residual(&set), 0.0),
    ];

    let (wave, state) = initial_state(spec, consts)?;
    checks.push(Check::new("constraint_initial", constraint_residual(&state), LATTICE_TOL));
    let steps = spec.steps.min(100);
    let cfg = EvolutionConfig::new(spec.dt, Integrator::SpectralExact).with_steps(steps);
    let evolver = Evolver::new(&state, cfg)?;
    let mut end = state.clone();
    evolver.run(&mut end, |_, _| {})?;
    checks.push(Check::new("constraint_evolved", constraint_residual(&end), LATTICE_TOL));
    let s0 = current(&state).total_s0;
    let s1 = current(&end).total_s0;
    checks.push(Check::new("s0_conservation", (s1 - s0).abs() / s0.abs().max(f64::MIN_POSITIVE), LATTICE_TOL));

    let chi = gauge_kick(&state)?;
    let kicked = apply_gauge(&state, &chi)?;
    let mut gauge_diff: f64 = 0.0;
    for site in 0..state.len() {
        let (a, b) = (state.fields(site), kicked.fields(site));
        for j in 0..3 {
            gauge_diff = gauge_diff.max((a.e[j] - b.e[j]).norm()).max((a.h[j] - b.h[j]).norm());
        }
    }
    checks.push(Check::new("gauge_gamma_sector", gauge_diff, 0.0));
    checks.push(Check::new(
        "gauge_s0",
        (current(&kicked).total_s0 - current(&state).total_s0).abs(),
        0.0,
    ));
    checks.push(Check::new("gauge_constraint", constraint_residual(&kicked), LATTICE_TOL));

    let short_cfg = cfg.with_steps(steps.min(10));
    let m = state.mass_param;
    let mass = mass_independence_check(&wave, spec.grid, spec.spacing, m, 7.0 * m, &short_cfg, consts)?;
    checks.push(Check::new("mass_independence", mass, MASS_TOL));
    Ok(checks)
}

pub fn cmd_verify(a: &VerifyArgs, base: PhysConstants, fmt: &Format, out: &mut dyn Write) -> Result<(), CliError> {
    if let Some(path) = &a.dump {
        let f = File::create(path).map_err(|e| CliError::validation(format!("cannot create {}: {e}", path.display())))?;
        let mut w = BufWriter::new(f);
        write_matrices(&build_matrices(), &mut w)?;
        w.flush()?;
    }
    let (spec, consts) = load_spec(a.config.as_deref(), base)?;
    let checks = verify_checks(&spec, consts)?;
    if let Some(path) = &fmt.csv {
        let mut t = Table::new(&["check", "value", "tolerance", "pass"]);
        for c in &checks {
            t.push(vec![c.name.into(), f17(c.value), f17(c.tolerance), c.pass.to_string()]);
        }
        t.write_csv_to(path, out)?;
    }
    if fmt.json {
        write_json(&checks, out)?;
    } else if fmt.csv.as_deref() != Some(std::path::Path::new("-")) {
        for c in &checks {
            writeln!(
                out,
                "{:<4}  {:<20}  {}  (tolerance {})",
                if c.pass { "ok" } else { "FAIL" },
                c.name,
                short(c.value),
                short(c.tolerance)
            )?;
        }
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::physics(format!("verification failed: {}", failed.join(", "))))
    }
}

/// Pure gauge `A → A + ∇Λ` with `Λ = a·sin(k·x)` along the first active
/// axis at the longest wavelength of the grid.
pub fn gauge_kick(state: &LatticeState) -> Result<LatticeState, CliError> {
    let grid = state.grid;
    let axis = grid.active_axes().next().expect("validated grid");
    let h = state.spacing.value();
    let k = std::f64::consts::TAU / (grid.shape[axis] as f64 * h);
    let scale = (0..state.len())
        .flat_map(|s| {
            let f = state.fields(s);
            f.a.into_iter().map(|z| z.norm())
        })
        .fold(0.0f64, f64::max)
        .max(1.0 / k);
    let amp = scale / k;
    let chi = LatticeState::from_fields(grid, state.spacing, state.mass_param, state.consts, |x| {
        let mut a = [0.0; 3];
        a[axis] = amp * k * (k * x[axis]).cos();
        Fields::real([0.0; 3], [0.0; 3], a, 0.0)
    })?;
    Ok(chi)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolveRow {
    pub step: u64,
    pub time: f64,
    pub total_s0: f64,
    pub constraint: f64,
    pub maxwell_curl_e: f64,
    pub maxwell_curl_h: f64,
    /// Unwrapped phase of the driven run relative to a free run.
    pub measured_phase: f64,
    /// `H_int·t/ħ`.
    pub expected_phase: f64,
    pub phase_error: f64,
}

pub fn resolve_evolution(a: &EvolveArgs, base: PhysConstants) -> Result<(EvolutionSpec, PhysConstants), CliError> {
    let (mut spec, consts) = load_spec(a.config.as_deref(), base)?;
    let q = |flag: &str, e: gravphase_core::Error| CliError::validation(format!("--{flag}: {e}"));
    if let Some(p) = &a.potential {
        spec.potential = config::parse_signed_energy(p).map_err(|e| CliError::validation(format!("--potential: {e}")))?;
    }
    if let Some(n) = a.steps {
        spec.steps = n;
    }
    if let Some(dt) = &a.dt {
        spec.dt = Time::parse(dt).map_err(|e| q("dt", e))?;
    }
    if let Some(g) = &a.grid {
        let dims = g
            .split(',')
            .map(|d| d.trim().parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| CliError::validation(format!("--grid `{g}`: expected N or NX,NY,NZ")))?;
        spec.grid = match dims.as_slice() {
            [x] => Grid::one_d(*x),
            [x, y] => Grid { shape: [*x, *y, 1] },
            [x, y, z] => Grid { shape: [*x, *y, *z] },
            _ => return Err(CliError::validation(format!("--grid `{g}`: expected N or NX,NY,NZ"))),
        };
        spec.grid.validate()?;
    }
    if let Some(h) = &a.spacing {
        spec.spacing = Length::parse(h).map_err(|e| q("spacing", e))?;
    }
    if let Some(i) = a.integrator {
        spec.integrator = match i {
            IntegratorArg::SpectralExact => Integrator::SpectralExact,
            IntegratorArg::Rk4FiniteDifference => Integrator::Rk4FiniteDifference,
        };
    }
    if let Some(c) = a.coupling {
        spec.coupling = match c {
            CouplingArg::DynamicalSector => PotentialCoupling::DynamicalSector,
            CouplingArg::Uniform => PotentialCoupling::Uniform,
        };
    }
    Ok((spec, consts))
}

/// Evolve the plane wave of `spec` with and without the potential and
/// record one row every `every` steps.
pub fn evolve_series(
    spec: &EvolutionSpec,
    consts: PhysConstants,
    gauge: bool,
    every: u64,
) -> Result<Vec<EvolveRow>, CliError> {
    let (_, mut driven) = initial_state(spec, consts)?;
    if gauge {
        let chi = gauge_kick(&driven)?;
        driven = apply_gauge(&driven, &chi)?;
    }
    let mut free = driven.clone();
    let cfg = EvolutionConfig::new(spec.dt, spec.integrator)
        .with_steps(spec.steps)
        .with_coupling(spec.coupling)
        .with_potential(spec.potential);
    let driven_ev = Evolver::new(&driven, cfg)?;
    let free_ev = Evolver::new(&free, cfg.with_potential(0.0))?;
    let mut tracker = PhaseTracker::default();
    let mut rows = Vec::new();
    let every = every.max(1);
    for n in 1..=spec.steps {
        let prev = driven.clone();
        driven_ev.step(&mut driven)?;
        free_ev.step(&mut free)?;
        let measured = tracker.push(relative_phase(&free, &driven)?);
        if n % every != 0 && n != spec.steps {
            continue;
        }
        let t = driven.time.value();
        let expected = spec.potential * t / consts.hbar;
        let mx = maxwell_residual(&prev, &driven, spec.dt)?;
        rows.push(EvolveRow {
            step: n,
            time: t,
            total_s0: current(&driven).total_s0,
            constraint: constraint_residual(&driven),
            maxwell_curl_e: mx.curl_e,
            maxwell_curl_h: mx.curl_h,
            measured_phase: measured,
            expected_phase: expected,
            phase_error: (measured - expected).abs(),
        });
    }
    Ok(rows)
}

pub fn cmd_evolve(a: &EvolveArgs, base: PhysConstants, fmt: &Format, out: &mut dyn Write) -> Result<(), CliError> {
    let (spec, consts) = resolve_evolution(a, base)?;
    let rows = evolve_series(&spec, consts, a.gauge_kick, a.every)?;
    if fmt.json {
        return write_json(&rows, out);
    }
    let mut t = Table::new(&[
        "step", "time", "total_s0", "constraint", "maxwell_curl_e", "maxwell_curl_h", "measured_phase",
        "expected_phase", "phase_error",
    ]);
    for r in &rows {
        t.push(vec![
            r.step.to_string(),
            f17(r.time),
            f17(r.total_s0),
            f17(r.constraint),
            f17(r.maxwell_curl_e),
            f17(r.maxwell_curl_h),
            f17(r.measured_phase),
            f17(r.expected_phase),
            f17(r.phase_error),
        ]);
    }
    let stdout = std::path::PathBuf::from("-");
    t.write_csv_to(fmt.csv.as_ref().unwrap_or(&stdout), out)?;
    if fmt.csv.is_some() && fmt.csv.as_deref() != Some(std::path::Path::new("-")) {
        if let Some(last) = rows.last() {
            let worst = rows.iter().map(|r| r.phase_error).fold(0.0, f64::max);
            writeln!(
                out,
                "{} steps, t = {} s, constraint {}, max phase error {}",
                last.step,
                short(last.time),
                short(last.constraint),
                short(worst)
            )?;
        }
    }
    Ok(())
}
