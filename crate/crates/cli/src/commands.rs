//! `phase`, `design` and `simulate`.

use std::io::Write;

use gravphase_core::designer::{self, DesignResult, Scenario, SweepParam, SweepScale};
use gravphase_core::interferometer::{
    dynamical_cancellation_report, fringe_sweep, run_pulse, sample_shots, CancellationReport, ShotCounts, SimOutcome,
};
use gravphase_core::phase::{
    classical_phase_exact, effective_permittivity, index_excess_exact, interaction_energy, potential_ratio, quantum_phase, transit_time, ShellWarning,
};
use gravphase_core::units::{Energy, Quantity};
use gravphase_core::{
    Length, LightPulse, Mass, Permittivity, Phase, PhaseKind, PhotonNumber, PhysConstants, PulseStatistics,
    ShellSpec,
};
use serde::Serialize;

use crate::args::{DesignArgs, ModeArg, PhaseArgs, ScenarioArgs, SimulateArgs};
use crate::config::{self, ScenarioFile};
use crate::output::{f17, short, write_json, write_pairs, Format, Table};
use crate::CliError;

fn quantity<Q: Quantity>(flag: &str, s: &str) -> Result<Q, CliError> {
    Q::parse(s).map_err(|e| CliError::validation(format!("--{flag}: {e}")))
}

impl ScenarioArgs {
    fn has_overrides(&self) -> bool {
        self.mass.is_some()
            || self.radius.is_some()
            || self.thickness.is_some()
            || self.wavelength.is_some()
            || self.mean_photons.is_some()
            || self.winding.is_some()
            || self.mode.is_some()
            || self.permittivity.is_some()
            || self.cycle_path_length.is_some()
    }

    /// The scenario named on the command line with the flag overrides
    /// applied. Without a scenario, `--radius` and `--wavelength` are
    /// required and the mass defaults to zero.
    pub fn resolve(&self, base: PhysConstants) -> Result<ScenarioFile, CliError> {
        let source = self.scenario.as_deref().or(self.config.as_deref());
        let mut file = match source {
            Some(s) => config::load(s, base)?,
            None => ScenarioFile::empty(base),
        };
        let consts = file.consts;
        let mut s = match file.scenario.take() {
            Some(s) => s,
            None => {
                let radius = self
                    .radius
                    .as_deref()
                    .ok_or_else(|| CliError::validation("no scenario given: pass a SCENARIO or --radius and --wavelength"))?;
                let wavelength = self
                    .wavelength
                    .as_deref()
                    .ok_or_else(|| CliError::validation("no scenario given: pass a SCENARIO or --radius and --wavelength"))?;
                let radius: Length = quantity("radius", radius)?;
                let shell = ShellSpec::new(Mass::ZERO, radius)?;
                let pulse = LightPulse::classical(quantity("wavelength", wavelength)?, &consts)?;
                let cycle = Length::new(8.0 * radius.value())?;
                Scenario::new("command-line", shell, pulse, 1, PhaseKind::Classical, cycle)?
            }
        };
        if !self.has_overrides() {
            file.scenario = Some(s);
            return Ok(file);
        }
        if let Some(m) = &self.mass {
            s.shell.mass = quantity("mass", m)?;
            s.shell.density = None;
        }
        if let Some(r) = &self.radius {
            let thickness = s.shell.thickness;
            s.shell = ShellSpec::new(s.shell.mass, quantity("radius", r)?)?;
            s.shell.thickness = thickness;
        }
        if let Some(t) = &self.thickness {
            s.shell.thickness = Some(quantity("thickness", t)?);
            s.shell.density = None;
        }
        if self.wavelength.is_some() || self.mean_photons.is_some() {
            let wavelength = match &self.wavelength {
                Some(w) => quantity("wavelength", w)?,
                None => s.pulse.wavelength,
            };
            let (n, stats, energy) = match self.mean_photons {
                Some(n) => (Some(PhotonNumber::new(n)?), PulseStatistics::CoherentLaser, None),
                None => (s.pulse.mean_photons, s.pulse.statistics, None),
            };
            s.pulse = LightPulse::new(wavelength, energy, n, stats, &consts)?;
            if self.mean_photons.is_some() && self.mode.is_none() {
                s.mode = PhaseKind::Quantum;
            }
        }
        if let Some(w) = self.winding {
            s.winding = w;
        }
        if let Some(m) = self.mode {
            s.mode = match m {
                ModeArg::Classical => PhaseKind::Classical,
                ModeArg::Quantum => PhaseKind::Quantum,
            };
        }
        if let Some(e) = self.permittivity {
            s.permittivity = Permittivity::new(e)?;
        }
        if let Some(l) = &self.cycle_path_length {
            s.cycle_path_length = quantity("cycle-path-length", l)?;
        }
        s.validate()?;
        file.scenario = Some(s);
        Ok(file)
    }
}

fn mode_name(k: PhaseKind) -> &'static str {
    match k {
        PhaseKind::Classical => "classical",
        PhaseKind::Quantum => "quantum",
    }
}

fn shell_warning_text(w: ShellWarning) -> &'static str {
    match w {
        ShellWarning::Degenerate => "shell mass is zero; every gravitational phase vanishes",
        ShellWarning::ThickShell => "shell is not thin compared to its radius",
        ShellWarning::StrongField => "GM/(Rc^2) is outside the weak-field regime",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseReport {
    pub name: String,
    pub mode: PhaseKind,
    pub winding: u64,
    pub phase: f64,
    pub per_pass: f64,
    /// The same phase by the second route: the exact refractive index for
    /// the classical mode, `|H_int|·(2R/c)/ħ` for the quantum mode.
    pub phase_cross_check: f64,
    /// `GM/(Rc^2)`.
    pub potential_ratio: f64,
    pub eps_g: f64,
    /// `n - sqrt(eps0)`.
    pub index_excess: f64,
    pub pulse_energy: f64,
    /// Where `pulse_energy` comes from: `energy`, `mean_photons` or
    /// `single_photon`.
    pub pulse_energy_source: &'static str,
    pub h_int: f64,
    pub transit_time: f64,
    pub warnings: Vec<String>,
}

pub fn phase_report(s: &Scenario, consts: &PhysConstants) -> Result<PhaseReport, CliError> {
    let result = s.phase(consts)?;
    let eps0 = s.permittivity;
    let cross = match s.mode {
        PhaseKind::Classical => classical_phase_exact(consts, &s.shell, &s.pulse, eps0, s.winding)?,
        PhaseKind::Quantum => quantum_phase(consts, &s.shell, &s.pulse, transit_time(consts, &s.shell), s.winding)?,
    };
    let (energy, source) = match (s.pulse.energy, s.pulse.mean_photons) {
        (Some(e), _) => (e.value(), "energy"),
        (None, Some(_)) => (
            s.pulse.total_energy(consts).map(|e| e.value()).unwrap_or_default(),
            "mean_photons",
        ),
        (None, None) => (s.pulse.photon_energy(consts), "single_photon"),
    };
    let warnings = s
        .shell
        .warnings(consts)
        .into_iter()
        .map(|w| shell_warning_text(w).to_string())
        .collect();
    Ok(PhaseReport {
        name: s.name.clone(),
        mode: s.mode,
        winding: s.winding,
        phase: result.phase.value(),
        per_pass: result.per_pass.value(),
        phase_cross_check: cross.phase.value(),
        potential_ratio: potential_ratio(consts, &s.shell),
        eps_g: effective_permittivity(consts, &s.shell, eps0)?.value(),
        index_excess: index_excess_exact(consts, &s.shell, eps0)?,
        pulse_energy: energy,
        pulse_energy_source: source,
        // `+ 0.0` turns the -0 of a massless shell into 0.
        h_int: interaction_energy(consts, &s.shell, Energy::new(energy)?) + 0.0,
        transit_time: transit_time(consts, &s.shell).value(),
        warnings,
    })
}

pub fn cmd_phase(
    a: &PhaseArgs,
    base: PhysConstants,
    fmt: &Format,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let file = a.scenario.resolve(base)?;
    let r = phase_report(file.scenario()?, &file.consts)?;
    for w in &r.warnings {
        writeln!(err, "warning: {w}")?;
    }
    if let Some(path) = &fmt.csv {
        let mut t = Table::new(&[
            "name", "mode", "winding", "phase", "per_pass", "phase_cross_check", "eps_g", "index_excess",
            "h_int", "transit_time",
        ]);
        t.push(vec![
            r.name.clone(),
            mode_name(r.mode).into(),
            r.winding.to_string(),
            f17(r.phase),
            f17(r.per_pass),
            f17(r.phase_cross_check),
            f17(r.eps_g),
            f17(r.index_excess),
            f17(r.h_int),
            f17(r.transit_time),
        ]);
        t.write_csv_to(path, out)?;
    }
    if fmt.json {
        return write_json(&r, out);
    }
    if fmt.csv.as_deref() == Some(std::path::Path::new("-")) {
        return Ok(());
    }
    write_pairs(
        &[
            ("scenario", r.name.clone()),
            ("mode", mode_name(r.mode).into()),
            ("winding", r.winding.to_string()),
            ("phase", format!("{} rad", short(r.phase))),
            ("per pass", format!("{} rad", short(r.per_pass))),
            ("cross-check", format!("{} rad", short(r.phase_cross_check))),
            ("GM/(Rc^2)", short(r.potential_ratio)),
            ("eps_g", short(r.eps_g)),
            ("n - sqrt(eps0)", short(r.index_excess)),
            ("pulse energy", format!("{} J ({})", short(r.pulse_energy), r.pulse_energy_source)),
            ("H_int", format!("{} J", short(r.h_int))),
            ("transit time", format!("{} s", short(r.transit_time))),
        ],
        out,
    )?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignReport {
    pub name: String,
    pub note: Option<String>,
    pub mode: PhaseKind,
    pub winding: u64,
    pub cycle_path_length: f64,
    pub result: DesignResult,
    pub target: Option<f64>,
    pub required_winding: Option<u64>,
}

pub fn design_report(s: &Scenario, consts: &PhysConstants, target: Option<f64>) -> Result<DesignReport, CliError> {
    let result = designer::design(s, consts)?;
    let required_winding = target
        .map(|t| designer::required_winding(t, &s.shell, &s.pulse, s.mode, s.permittivity, consts))
        .transpose()?;
    Ok(DesignReport {
        name: s.name.clone(),
        note: s.note.clone(),
        mode: s.mode,
        winding: s.winding,
        cycle_path_length: s.cycle_path_length.value(),
        result,
        target,
        required_winding,
    })
}

/// `PARAM=FROM:TO:POINTS`.
pub fn parse_sweep(spec: &str) -> Result<(SweepParam, f64, f64, usize), CliError> {
    let bad = || CliError::validation(format!("--sweep `{spec}`: expected PARAM=FROM:TO:POINTS"));
    let (name, range) = spec.split_once('=').ok_or_else(bad)?;
    let param = SweepParam::parse(name.trim())?;
    let parts: Vec<&str> = range.split(':').collect();
    let [a, b, n] = parts.as_slice() else {
        return Err(bad());
    };
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    Ok((param, a, b, n))
}

pub fn cmd_design(
    a: &DesignArgs,
    base: PhysConstants,
    fmt: &Format,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let target = a
        .target
        .as_deref()
        .map(|t| {
            Phase::parse_with(t, true)
                .map(|p| p.value())
                .map_err(|e| CliError::validation(format!("--target: {e}")))
        })
        .transpose()?;

    // No scenario at all: the three built-in ones.
    let no_scenario = a.scenario.scenario.is_none() && a.scenario.config.is_none();
    let files: Vec<ScenarioFile> = if no_scenario && a.sweep.is_none() && a.emit.is_none() {
        designer::PAPER_SCENARIO_NAMES
            .iter()
            .map(|n| ScenarioArgs {
                scenario: Some(format!("{}{n}", config::PAPER_PREFIX)),
                ..a.scenario.clone()
            }
            .resolve(base))
            .collect::<Result<_, _>>()?
    } else {
        vec![a.scenario.resolve(base)?]
    };

    if let Some(path) = &a.emit {
        std::fs::write(path, config::emit(&files[0]))
            .map_err(|e| CliError::validation(format!("cannot write {}: {e}", path.display())))?;
    }

    if let Some(spec) = &a.sweep {
        let file = &files[0];
        let (param, from, to, n) = parse_sweep(spec)?;
        let scale = if a.log { SweepScale::Log } else { SweepScale::Linear };
        let values = designer::sweep_values(from, to, n, scale)?;
        let rows = designer::sweep(file.scenario()?, param, &values, &file.consts)?;
        if fmt.json {
            return write_json(&rows, out);
        }
        let mut t = Table::new(&["parameter", "phase", "duration", "loss_floor"]);
        for r in &rows {
            t.push(vec![f17(r.parameter), f17(r.phase), f17(r.duration), f17(r.loss_floor)]);
        }
        let stdout = std::path::PathBuf::from("-");
        return t.write_csv_to(fmt.csv.as_ref().unwrap_or(&stdout), out);
    }

    let reports = files
        .iter()
        .map(|f| design_report(f.scenario()?, &f.consts, target))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(path) = &fmt.csv {
        let mut t = Table::new(&[
            "name", "mode", "winding", "cycle_path_length", "phase", "duration", "loss_floor", "loss_deficit",
            "feasible", "required_winding",
        ]);
        for r in &reports {
            t.push(vec![
                r.name.clone(),
                mode_name(r.mode).into(),
                r.winding.to_string(),
                f17(r.cycle_path_length),
                f17(r.result.phase.phase.value()),
                f17(r.result.duration.value()),
                f17(r.result.required_loss_floor),
                f17(r.result.loss_deficit),
                r.result.feasible.to_string(),
                r.required_winding.map(|w| w.to_string()).unwrap_or_default(),
            ]);
        }
        t.write_csv_to(path, out)?;
    }
    if fmt.json {
        return write_json(&reports, out);
    }
    if fmt.csv.as_deref() == Some(std::path::Path::new("-")) {
        return Ok(());
    }
    for (i, r) in reports.iter().enumerate() {
        if i > 0 {
            writeln!(out)?;
        }
        let d = &r.result;
        let mut pairs = vec![
            ("scenario", r.name.clone()),
            ("mode", mode_name(r.mode).into()),
            ("winding", r.winding.to_string()),
            ("cycle path length", format!("{} m", short(r.cycle_path_length))),
            ("phase", format!("{} rad", short(d.phase.phase.value()))),
            ("duration", format!("{} s", short(d.duration.value()))),
            ("loss floor r", format!("{:.15}", d.required_loss_floor)),
            ("1 - r", short(d.loss_deficit)),
            ("feasible", if d.feasible { "yes".into() } else { "no".into() }),
        ];
        if let (Some(t), Some(w)) = (r.target, r.required_winding) {
            pairs.push(("winding for target", format!("{w} (target {} rad)", short(t))));
        }
        write_pairs(&pairs, out)?;
        for reason in &d.reasons {
            writeln!(out, "  - {reason}")?;
        }
        if let Some(n) = &r.note {
            writeln!(out, "  note: {n}")?;
        }
    }
    let _ = err;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateReport {
    pub name: String,
    pub outcome: SimOutcome,
    pub cancellation: CancellationReport,
    pub seed: u64,
    pub shots: u64,
    pub mean_bright: Option<f64>,
    pub mean_dark: Option<f64>,
    pub counts: Vec<ShotCounts>,
}

pub fn simulate_report(file: &ScenarioFile, seed: u64, shots: Option<u64>) -> Result<SimulateReport, CliError> {
    let s = file.scenario()?;
    let consts = &file.consts;
    let layout = file.build_layout()?;
    let schedule = file.build_schedule(&layout)?;
    let outcome = run_pulse(&layout, &schedule, &s.pulse, s.mode, consts)?;
    let cancellation = dynamical_cancellation_report(&layout, &s.pulse, s.mode, consts)?;
    let shots = shots.unwrap_or(if s.pulse.mean_photons.is_some() { 1 } else { 0 });
    if shots > 0 && s.pulse.mean_photons.is_none() {
        return Err(CliError::validation(
            "photon counting needs a pulse with mean_photons; pass --shots 0 or set [pulse] mean_photons",
        ));
    }
    let counts = sample_shots(&outcome, &s.pulse, seed, shots)?;
    let mean = |f: fn(&ShotCounts) -> u64| {
        (shots > 0).then(|| counts.iter().map(|c| f(c) as f64).sum::<f64>() / shots as f64)
    };
    Ok(SimulateReport {
        name: s.name.clone(),
        mean_bright: mean(|c| c.bright),
        mean_dark: mean(|c| c.dark),
        outcome,
        cancellation,
        seed,
        shots,
        counts,
    })
}

pub fn cmd_simulate(
    a: &SimulateArgs,
    base: PhysConstants,
    fmt: &Format,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let file = a.scenario.resolve(base)?;
    let r = simulate_report(&file, a.seed, a.shots)?;
    for w in &r.outcome.warnings {
        writeln!(err, "warning: {w}")?;
    }
    let stdout = std::path::PathBuf::from("-");
    if let Some(points) = a.fringe_sweep {
        let mut t = Table::new(&["delta", "bright", "dark"]);
        for p in fringe_sweep(&r.outcome, points) {
            t.push(vec![f17(p.delta), f17(p.bright), f17(p.dark)]);
        }
        t.write_csv_to(fmt.csv.as_ref().unwrap_or(&stdout), out)?;
        if fmt.csv.is_none() {
            return Ok(());
        }
    } else if let Some(path) = &fmt.csv {
        let mut t = Table::new(&["shot", "bright", "dark"]);
        for c in &r.counts {
            t.push(vec![c.shot.to_string(), c.bright.to_string(), c.dark.to_string()]);
        }
        t.write_csv_to(path, out)?;
    }
    if fmt.json {
        return write_json(&r, out);
    }
    if fmt.csv.as_deref() == Some(std::path::Path::new("-")) {
        return Ok(());
    }
    let o = &r.outcome;
    let mut pairs = vec![
        ("scenario", r.name.clone()),
        ("mode", mode_name(o.kind).into()),
        ("winding", o.winding.to_string()),
        ("shell arm", o.shell_arm.to_string()),
        ("topological phase", format!("{} rad", short(o.topological_phase))),
        ("dynamical phase upper", format!("{} rad", short(o.dynamical_phase_upper))),
        ("dynamical phase lower", format!("{} rad", short(o.dynamical_phase_lower))),
        ("net phase", format!("{} rad", short(o.net_phase))),
        ("I_bright", short(o.port_intensities.bright)),
        ("I_dark", short(o.port_intensities.dark)),
        ("visibility", short(o.visibility)),
        ("throughput", short(o.throughput)),
        ("reflections", o.reflections.to_string()),
        ("duration", format!("{} s", short(o.total_duration.value()))),
        (
            "exterior/topological",
            r.cancellation.ratio.map(short).unwrap_or_else(|| "n/a".into()),
        ),
    ];
    if let Some((b, d)) = o.expected_counts {
        pairs.push(("expected counts", format!("bright {} dark {}", short(b), short(d))));
    }
    if let (Some(b), Some(d)) = (r.mean_bright, r.mean_dark) {
        pairs.push((
            "sampled mean",
            format!("bright {} dark {} ({} shots, seed {})", short(b), short(d), r.shots, r.seed),
        ));
    }
    write_pairs(&pairs, out)?;
    Ok(())
}

