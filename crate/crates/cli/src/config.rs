//! Scenario files.
//!
//! A scenario is a TOML document. Dimensioned values are strings with an
//! explicit unit (`radius = "3.3 m"`), dimensionless ones are plain numbers.
//! Unknown keys are rejected. Every section is optional on its own; the
//! commands complain when a section they need is missing.
//!
//! ```toml
//! name = "lab-quantum"
//! mode = "quantum"            # or "classical"
//! winding = 1000000
//!
//! [constants]                 # plain SI numbers
//! g = 6.6743e-11
//!
//! [shell]
//! mass = "3e3 kg"
//! radius = "1.5 m"
//! thickness = "1 cm"
//!
//! [pulse]
//! wavelength = "5000 Å"
//! mean_photons = 1e7
//!
//! [layout]
//! cycle_path_length = "30 m"
//!
//! [[schedule.operations]]
//! mirror = "m14"
//! action = "insert"
//! cycle = 1
//!
//! [evolution]
//! grid = [256, 1, 1]
//! spacing = "20 nm"
//! ```

use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;

use gravphase_core::designer::{self, Scenario};
use gravphase_core::interferometer::{Arm, InterferometerLayout, MirrorAction, MirrorOperation, MirrorSchedule};
use gravphase_core::kdp::{Grid, Integrator, PotentialCoupling};
use gravphase_core::units::{default_constants, Energy, Quantity};
use gravphase_core::{
    Length, LightPulse, Mass, Permittivity, PhaseKind, PhotonNumber, PhysConstants, PulseStatistics, ShellSpec,
    Time,
};
use serde::Deserialize;
use toml::Spanned;

use crate::CliError;

/// Environment variable naming a TOML file with a `[constants]` table.
pub const CONSTANTS_ENV: &str = "GRAVPHASE_CONSTANTS";
/// Prefix selecting a built-in scenario instead of a file.
pub const PAPER_PREFIX: &str = "paper:";

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutSpec {
    /// Distance from the shell centre to the lower arm's first segment.
    /// `None` means 100 shell radii.
    pub m1_bs1_distance: Option<Length>,
    pub bs_split_ratio: f64,
    pub mirror_loss: f64,
    pub shell_arm: Arm,
}

impl Default for LayoutSpec {
    fn default() -> Self {
        Self {
            m1_bs1_distance: None,
            bs_split_ratio: 0.5,
            mirror_loss: 1.0,
            shell_arm: Arm::Upper,
        }
    }
}

/// Distance used when the file gives no `m1_bs1_distance`, in shell radii.
pub const DEFAULT_M1_BS1_RADII: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionSpec {
    pub grid: Grid,
    pub spacing: Length,
    pub dt: Time,
    pub steps: u64,
    pub integrator: Integrator,
    pub coupling: PotentialCoupling,
    /// Constant `H_int` in joules.
    pub potential: f64,
    pub mode_numbers: [i64; 3],
    pub polarization: [f64; 3],
}

impl Default for EvolutionSpec {
    fn default() -> Self {
        Self {
            grid: Grid::one_d(256),
            spacing: Length::new(2e-8).expect("positive"),
            dt: Time::new(1e-17).expect("positive"),
            steps: 1000,
            integrator: Integrator::SpectralExact,
            coupling: PotentialCoupling::DynamicalSector,
            potential: 0.0,
            mode_numbers: [4, 0, 0],
            polarization: [0.0, 1.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    pub scenario: Option<Scenario>,
    pub consts: PhysConstants,
    pub layout: LayoutSpec,
    pub schedule: Option<Vec<MirrorOperation>>,
    pub evolution: Option<EvolutionSpec>,
}

impl ScenarioFile {
    pub fn empty(consts: PhysConstants) -> Self {
        Self {
            scenario: None,
            consts,
            layout: LayoutSpec::default(),
            schedule: None,
            evolution: None,
        }
    }

    pub fn scenario(&self) -> Result<&Scenario, CliError> {
        self.scenario
            .as_ref()
            .ok_or_else(|| CliError::validation("the scenario needs [shell] and [pulse] sections"))
    }

    pub fn build_layout(&self) -> Result<InterferometerLayout, CliError> {
        let s = self.scenario()?;
        let distance = match self.layout.m1_bs1_distance {
            Some(d) => d,
            None => Length::new(DEFAULT_M1_BS1_RADII * s.shell.radius.value())?,
        };
        let mut layout = InterferometerLayout::figure_one(s.shell, s.cycle_path_length, distance)?;
        layout.bs_split_ratio = self.layout.bs_split_ratio;
        layout.mirror_loss = self.layout.mirror_loss;
        layout.permittivity = s.permittivity;
        if self.layout.shell_arm == Arm::Lower {
            layout = layout.swapped();
        }
        layout.validate()?;
        Ok(layout)
    }

    pub fn build_schedule(&self, layout: &InterferometerLayout) -> Result<MirrorSchedule, CliError> {
        let s = self.scenario()?;
        Ok(match &self.schedule {
            Some(ops) => MirrorSchedule {
                winding: s.winding,
                operations: ops.clone(),
            },
            None => MirrorSchedule::standard(layout, s.winding)?,
        })
    }
}

/// Resolve `paper:<name>` or a file path.
pub fn load(source: &str, base: PhysConstants) -> Result<ScenarioFile, CliError> {
    if let Some(name) = source.strip_prefix(PAPER_PREFIX) {
        let scenario = designer::paper_scenario(name, &base)?;
        return Ok(ScenarioFile {
            scenario: Some(scenario),
            ..ScenarioFile::empty(base)
        });
    }
    let text = std::fs::read_to_string(source)
        .map_err(|e| CliError::validation(format!("cannot read scenario file {source}: {e}")))?;
    parse(&text, source, base)
}

/// Constants from `--constants`, else from [`CONSTANTS_ENV`], else the
/// built-in SI values.
pub fn base_constants(path: Option<&Path>) -> Result<PhysConstants, CliError> {
    let env = std::env::var_os(CONSTANTS_ENV);
    let path = path.map(Path::to_path_buf).or_else(|| env.map(Into::into));
    let Some(path) = path else {
        return Ok(default_constants());
    };
    let label = path.display().to_string();
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::validation(format!("cannot read constants file {label}: {e}")))?;
    let file = parse(&text, &label, default_constants())?;
    if file.scenario.is_some() || file.evolution.is_some() || file.schedule.is_some() {
        return Err(CliError::validation(format!(
            "{label}: a constants file may only hold a [constants] table"
        )));
    }
    Ok(file.consts)
}

struct Source<'a> {
    label: &'a str,
    text: &'a str,
}

impl Source<'_> {
    fn line_col(&self, offset: usize) -> (usize, usize) {
        let before = &self.text[..offset.min(self.text.len())];
        let line = before.matches('\n').count() + 1;
        let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        (line, col)
    }

    fn error(&self, span: Range<usize>, msg: impl std::fmt::Display) -> CliError {
        let (line, col) = self.line_col(span.start);
        CliError::validation(format!("{}:{line}:{col}: {msg}", self.label))
    }

    fn quantity<Q: Quantity>(&self, v: &Spanned<String>) -> Result<Q, CliError> {
        Q::parse(v.get_ref()).map_err(|e| self.error(v.span(), e))
    }

    fn number(&self, v: &Spanned<toml::Value>, what: &str) -> Result<f64, CliError> {
        match v.get_ref() {
            toml::Value::Integer(i) => Ok(*i as f64),
            toml::Value::Float(f) if f.is_finite() => Ok(*f),
            other => Err(self.error(v.span(), format!("{what} must be a finite number, found `{other}`"))),
        }
    }

    fn count(&self, v: &Spanned<toml::Value>, what: &str) -> Result<u64, CliError> {
        let bad = || self.error(v.span(), format!("{what} must be a positive integer"));
        match v.get_ref() {
            toml::Value::Integer(i) if *i >= 1 => Ok(*i as u64),
            toml::Value::Float(f) if *f >= 1.0 && f.fract() == 0.0 && *f < 9.2e18 => Ok(*f as u64),
            _ => Err(bad()),
        }
    }

    fn choice<T: Copy>(&self, v: &Spanned<String>, what: &str, options: &[(&str, T)]) -> Result<T, CliError> {
        options
            .iter()
            .find(|(name, _)| *name == v.get_ref())
            .map(|&(_, t)| t)
            .ok_or_else(|| {
                let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                self.error(
                    v.span(),
                    format!("unknown {what} `{}`; expected one of {}", v.get_ref(), names.join(", ")),
                )
            })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    name: Option<String>,
    note: Option<String>,
    mode: Option<Spanned<String>>,
    winding: Option<Spanned<toml::Value>>,
    constants: Option<RawConstants>,
    shell: Option<Spanned<RawShell>>,
    pulse: Option<Spanned<RawPulse>>,
    layout: Option<RawLayout>,
    schedule: Option<RawSchedule>,
    evolution: Option<RawEvolution>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstants {
    g: Option<Spanned<toml::Value>>,
    c: Option<Spanned<toml::Value>>,
    hbar: Option<Spanned<toml::Value>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawShell {
    mass: Option<Spanned<String>>,
    radius: Spanned<String>,
    thickness: Option<Spanned<String>>,
    density: Option<Spanned<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPulse {
    wavelength: Spanned<String>,
    mean_photons: Option<Spanned<toml::Value>>,
    energy: Option<Spanned<String>>,
    statistics: Option<Spanned<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayout {
    cycle_path_length: Option<Spanned<String>>,
    permittivity: Option<Spanned<toml::Value>>,
    reflections_per_cycle: Option<Spanned<toml::Value>>,
    m1_bs1_distance: Option<Spanned<String>>,
    bs_split_ratio: Option<Spanned<toml::Value>>,
    mirror_loss: Option<Spanned<toml::Value>>,
    shell_arm: Option<Spanned<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    operations: Vec<Spanned<RawOperation>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOperation {
    mirror: String,
    action: Spanned<String>,
    cycle: Spanned<toml::Value>,
    at: Option<Spanned<toml::Value>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvolution {
    grid: Option<Spanned<Vec<usize>>>,
    spacing: Option<Spanned<String>>,
    dt: Option<Spanned<String>>,
    steps: Option<Spanned<toml::Value>>,
    integrator: Option<Spanned<String>>,
    coupling: Option<Spanned<String>>,
    potential: Option<Spanned<String>>,
    mode_numbers: Option<[i64; 3]>,
    polarization: Option<[f64; 3]>,
}

const MODES: &[(&str, PhaseKind)] = &[("classical", PhaseKind::Classical), ("quantum", PhaseKind::Quantum)];
const STATISTICS: &[(&str, PulseStatistics)] = &[
    ("classical_poissonian", PulseStatistics::ClassicalPoissonian),
    ("coherent_laser", PulseStatistics::CoherentLaser),
];
const ARMS: &[(&str, Arm)] = &[("upper", Arm::Upper), ("lower", Arm::Lower)];
const ACTIONS: &[(&str, MirrorAction)] = &[("insert", MirrorAction::Insert), ("remove", MirrorAction::Remove)];
pub(crate) const INTEGRATORS: &[(&str, Integrator)] = &[
    ("spectral_exact", Integrator::SpectralExact),
    ("rk4_finite_difference", Integrator::Rk4FiniteDifference),
];
pub(crate) const COUPLINGS: &[(&str, PotentialCoupling)] = &[
    ("dynamical_sector", PotentialCoupling::DynamicalSector),
    ("uniform", PotentialCoupling::Uniform),
];

fn name_of<T: PartialEq>(options: &[(&'static str, T)], value: T) -> &'static str {
    options.iter().find(|(_, t)| *t == value).map(|(n, _)| *n).expect("listed")
}

/// Densities are written as `"<number> kg/m^3"` (or `g/cm^3`).
pub fn parse_density(input: &str) -> Result<f64, String> {
    let s = input.trim();
    for (unit, factor) in [("kg/m^3", 1.0), ("kg/m3", 1.0), ("g/cm^3", 1e3), ("g/cm3", 1e3)] {
        if let Some(num) = s.strip_suffix(unit) {
            let v: f64 = num
                .trim()
                .parse()
                .map_err(|_| format!("cannot parse density `{input}`"))?;
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("density `{input}` must be finite and non-negative"));
            }
            return Ok(v * factor);
        }
    }
    Err(format!("density `{input}` needs a unit (kg/m^3 or g/cm^3)"))
}

/// Signed energy such as `"-1e-30 J"`.
pub fn parse_signed_energy(input: &str) -> Result<f64, String> {
    let s = input.trim();
    let (sign, rest) = match s.strip_prefix('-') {
        Some(r) => (-1.0, r),
        None => (1.0, s),
    };
    Energy::parse(rest).map(|e| sign * e.value()).map_err(|e| e.to_string())
}

pub fn parse(text: &str, label: &str, base: PhysConstants) -> Result<ScenarioFile, CliError> {
    let src = Source { label, text };
    let raw: RawFile = toml::from_str(text).map_err(|e| match e.span() {
        Some(span) => src.error(span, e.message().trim_end()),
        None => CliError::validation(format!("{label}: {}", e.message().trim_end())),
    })?;

    let mut consts = base;
    if let Some(c) = &raw.constants {
        let get = |v: &Option<Spanned<toml::Value>>, what| v.as_ref().map(|v| src.number(v, what)).transpose();
        let (g, c_, hbar) = (get(&c.g, "g")?, get(&c.c, "c")?, get(&c.hbar, "hbar")?);
        consts = consts
            .with_overrides(g, c_, hbar)
            .map_err(|e| CliError::validation(format!("{label}: [constants]: {e}")))?;
    }

    let mut layout = LayoutSpec::default();
    let mut cycle_path_length = None;
    let mut permittivity = None;
    let mut reflections = None;
    if let Some(l) = &raw.layout {
        cycle_path_length = l.cycle_path_length.as_ref().map(|v| src.quantity::<Length>(v)).transpose()?;
        if let Some(v) = &l.permittivity {
            let e = src.number(v, "permittivity")?;
            permittivity = Some(Permittivity::new(e).map_err(|err| src.error(v.span(), err))?);
        }
        reflections = l.reflections_per_cycle.as_ref().map(|v| src.count(v, "reflections_per_cycle")).transpose()?;
        layout.m1_bs1_distance = l.m1_bs1_distance.as_ref().map(|v| src.quantity::<Length>(v)).transpose()?;
        if let Some(v) = &l.bs_split_ratio {
            layout.bs_split_ratio = src.number(v, "bs_split_ratio")?;
        }
        if let Some(v) = &l.mirror_loss {
            layout.mirror_loss = src.number(v, "mirror_loss")?;
        }
        if let Some(v) = &l.shell_arm {
            layout.shell_arm = src.choice(v, "arm", ARMS)?;
        }
    }

    let scenario = match (&raw.shell, &raw.pulse) {
        (Some(shell), Some(pulse)) => {
            let shell_spec = build_shell(&src, shell)?;
            let pulse_spec = build_pulse(&src, pulse, &consts)?;
            let mode = match &raw.mode {
                Some(m) => src.choice(m, "mode", MODES)?,
                None if pulse_spec.mean_photons.is_some() => PhaseKind::Quantum,
                None => PhaseKind::Classical,
            };
            let winding = raw.winding.as_ref().map(|v| src.count(v, "winding")).transpose()?.unwrap_or(1);
            let cycle = match cycle_path_length {
                Some(l) => l,
                None => Length::new(8.0 * shell_spec.radius.value())?,
            };
            let mut s = Scenario::new(
                raw.name.clone().unwrap_or_else(|| "scenario".into()),
                shell_spec,
                pulse_spec,
                winding,
                mode,
                cycle,
            )
            .map_err(|e| src.error(shell.span(), e))?;
            s.note = raw.note.clone();
            if let Some(p) = permittivity {
                s.permittivity = p;
            }
            if let Some(r) = reflections {
                s.reflections_per_cycle = r;
            }
            Some(s)
        }
        (None, None) => {
            if let Some(m) = &raw.mode {
                return Err(src.error(m.span(), "`mode` needs [shell] and [pulse] sections"));
            }
            if let Some(w) = &raw.winding {
                return Err(src.error(w.span(), "`winding` needs [shell] and [pulse] sections"));
            }
            None
        }
        (Some(s), None) => return Err(src.error(s.span(), "[shell] given without a [pulse] section")),
        (None, Some(p)) => return Err(src.error(p.span(), "[pulse] given without a [shell] section")),
    };

    let schedule = match &raw.schedule {
        Some(s) => Some(
            s.operations
                .iter()
                .map(|op| {
                    let o = op.get_ref();
                    let cycle = match o.cycle.get_ref() {
                        toml::Value::Integer(i) if *i >= 0 => *i as u64,
                        _ => return Err(src.error(o.cycle.span(), "cycle must be a non-negative integer")),
                    };
                    let at = match &o.at {
                        Some(v) => {
                            let f = src.number(v, "at")?;
                            if !(0.0..1.0).contains(&f) {
                                return Err(src.error(v.span(), "`at` is a loop fraction in [0, 1)"));
                            }
                            Some(f)
                        }
                        None => None,
                    };
                    Ok(MirrorOperation {
                        mirror: o.mirror.clone(),
                        action: src.choice(&o.action, "mirror action", ACTIONS)?,
                        cycle,
                        at,
                    })
                })
                .collect::<Result<Vec<_>, _>>()?,
        ),
        None => None,
    };

    let evolution = raw.evolution.as_ref().map(|e| build_evolution(&src, e)).transpose()?;

    Ok(ScenarioFile {
        scenario,
        consts,
        layout,
        schedule,
        evolution,
    })
}

fn build_shell(src: &Source, raw: &Spanned<RawShell>) -> Result<ShellSpec, CliError> {
    let s = raw.get_ref();
    let radius: Length = src.quantity(&s.radius)?;
    let thickness = s.thickness.as_ref().map(|v| src.quantity::<Length>(v)).transpose()?;
    let density = s
        .density
        .as_ref()
        .map(|v| parse_density(v.get_ref()).map_err(|e| src.error(v.span(), e)))
        .transpose()?;
    let mass = s.mass.as_ref().map(|v| src.quantity::<Mass>(v)).transpose()?;
    let shell = match (mass, thickness, density) {
        (Some(m), Some(t), Some(rho)) => ShellSpec::new(m, radius)?.with_geometry(t, rho),
        (None, Some(t), Some(rho)) => ShellSpec::from_geometry(radius, t, rho),
        (Some(m), t, None) => ShellSpec::new(m, radius).map(|mut s| {
            s.thickness = t;
            s
        }),
        (Some(_), None, Some(_)) => {
            let v = s.density.as_ref().expect("density");
            return Err(src.error(v.span(), "density needs a thickness"));
        }
        (None, _, _) => return Err(src.error(raw.span(), "[shell] needs `mass` or both `thickness` and `density`")),
    };
    shell.map_err(|e| src.error(raw.span(), e))
}

fn build_pulse(src: &Source, raw: &Spanned<RawPulse>, consts: &PhysConstants) -> Result<LightPulse, CliError> {
    let p = raw.get_ref();
    let wavelength: Length = src.quantity(&p.wavelength)?;
    let mean_photons = match &p.mean_photons {
        Some(v) => Some(PhotonNumber::new(src.number(v, "mean_photons")?).map_err(|e| src.error(v.span(), e))?),
        None => None,
    };
    let energy = p.energy.as_ref().map(|v| src.quantity::<Energy>(v)).transpose()?;
    let statistics = match &p.statistics {
        Some(v) => src.choice(v, "pulse statistics", STATISTICS)?,
        None if mean_photons.is_some() => PulseStatistics::CoherentLaser,
        None => PulseStatistics::ClassicalPoissonian,
    };
    LightPulse::new(wavelength, energy, mean_photons, statistics, consts).map_err(|e| src.error(raw.span(), e))
}

fn build_evolution(src: &Source, e: &RawEvolution) -> Result<EvolutionSpec, CliError> {
    let mut spec = EvolutionSpec::default();
    if let Some(g) = &e.grid {
        let shape: [usize; 3] = match g.get_ref().as_slice() {
            [x] => [*x, 1, 1],
            [x, y] => [*x, *y, 1],
            [x, y, z] => [*x, *y, *z],
            _ => return Err(src.error(g.span(), "grid has one to three extents")),
        };
        let grid = Grid { shape };
        grid.validate().map_err(|err| src.error(g.span(), err))?;
        spec.grid = grid;
    }
    if let Some(v) = &e.spacing {
        spec.spacing = src.quantity(v)?;
    }
    if let Some(v) = &e.dt {
        spec.dt = src.quantity(v)?;
    }
    if let Some(v) = &e.steps {
        spec.steps = src.count(v, "steps")?;
    }
    if let Some(v) = &e.integrator {
        spec.integrator = src.choice(v, "integrator", INTEGRATORS)?;
    }
    if let Some(v) = &e.coupling {
        spec.coupling = src.choice(v, "coupling", COUPLINGS)?;
    }
    if let Some(v) = &e.potential {
        spec.potential = parse_signed_energy(v.get_ref()).map_err(|err| src.error(v.span(), err))?;
    }
    if let Some(n) = e.mode_numbers {
        spec.mode_numbers = n;
    }
    if let Some(p) = e.polarization {
        spec.polarization = p;
    }
    Ok(spec)
}

fn num(v: f64) -> String {
    // `{:?}` keeps a decimal point or exponent so TOML reads a float back.
    format!("{v:?}")
}

/// TOML text that [`parse`] reads back into `file`.
pub fn emit(file: &ScenarioFile) -> String {
    let mut out = String::new();
    let w = &mut out;
    if let Some(s) = &file.scenario {
        let _ = writeln!(w, "name = {:?}", s.name);
        if let Some(n) = &s.note {
            let _ = writeln!(w, "note = {n:?}");
        }
        let _ = writeln!(w, "mode = \"{}\"", name_of(MODES, s.mode));
        let _ = writeln!(w, "winding = {}", s.winding);
    }
    let d = default_constants();
    if file.consts != d {
        let _ = writeln!(w, "\n[constants]");
        let _ = writeln!(w, "g = {}", num(file.consts.g));
        let _ = writeln!(w, "c = {}", num(file.consts.c));
        let _ = writeln!(w, "hbar = {}", num(file.consts.hbar));
    }
    if let Some(s) = &file.scenario {
        let _ = writeln!(w, "\n[shell]");
        let _ = writeln!(w, "mass = \"{}\"", s.shell.mass.to_unit_string());
        let _ = writeln!(w, "radius = \"{}\"", s.shell.radius.to_unit_string());
        if let Some(t) = s.shell.thickness {
            let _ = writeln!(w, "thickness = \"{}\"", t.to_unit_string());
        }
        if let Some(rho) = s.shell.density {
            let _ = writeln!(w, "density = \"{rho:e} kg/m^3\"");
        }
        let _ = writeln!(w, "\n[pulse]");
        let _ = writeln!(w, "wavelength = \"{}\"", s.pulse.wavelength.to_unit_string());
        if let Some(n) = s.pulse.mean_photons {
            let _ = writeln!(w, "mean_photons = {}", num(n.value()));
        }
        if let Some(e) = s.pulse.energy {
            let _ = writeln!(w, "energy = \"{}\"", e.to_unit_string());
        }
        let _ = writeln!(w, "statistics = \"{}\"", name_of(STATISTICS, s.pulse.statistics));
        let _ = writeln!(w, "\n[layout]");
        let _ = writeln!(w, "cycle_path_length = \"{}\"", s.cycle_path_length.to_unit_string());
        let _ = writeln!(w, "permittivity = {}", num(s.permittivity.value()));
        let _ = writeln!(w, "reflections_per_cycle = {}", s.reflections_per_cycle);
        if let Some(dist) = file.layout.m1_bs1_distance {
            let _ = writeln!(w, "m1_bs1_distance = \"{}\"", dist.to_unit_string());
        }
        let _ = writeln!(w, "bs_split_ratio = {}", num(file.layout.bs_split_ratio));
        let _ = writeln!(w, "mirror_loss = {}", num(file.layout.mirror_loss));
        let _ = writeln!(w, "shell_arm = \"{}\"", name_of(ARMS, file.layout.shell_arm));
    }
    if let Some(ops) = &file.schedule {
        for op in ops {
            let _ = writeln!(w, "\n[[schedule.operations]]");
            let _ = writeln!(w, "mirror = {:?}", op.mirror);
            let _ = writeln!(w, "action = \"{}\"", name_of(ACTIONS, op.action));
            let _ = writeln!(w, "cycle = {}", op.cycle);
            if let Some(at) = op.at {
                let _ = writeln!(w, "at = {}", num(at));
            }
        }
    }
    if let Some(e) = &file.evolution {
        let [x, y, z] = e.grid.shape;
        let _ = writeln!(w, "\n[evolution]");
        let _ = writeln!(w, "grid = [{x}, {y}, {z}]");
        let _ = writeln!(w, "spacing = \"{}\"", e.spacing.to_unit_string());
        let _ = writeln!(w, "dt = \"{}\"", e.dt.to_unit_string());
        let _ = writeln!(w, "steps = {}", e.steps);
        let _ = writeln!(w, "integrator = \"{}\"", name_of(INTEGRATORS, e.integrator));
        let _ = writeln!(w, "coupling = \"{}\"", name_of(COUPLINGS, e.coupling));
        let _ = writeln!(w, "potential = \"{:e} J\"", e.potential);
        let [a, b, c] = e.mode_numbers;
        let _ = writeln!(w, "mode_numbers = [{a}, {b}, {c}]");
        let [p, q, r] = e.polarization;
        let _ = writeln!(w, "polarization = [{}, {}, {}]", num(p), num(q), num(r));
    }
    out
}
