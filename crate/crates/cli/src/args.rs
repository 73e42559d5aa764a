use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "gravphase", version, about = "Gravity-induced topological phase of light crossing a massive shell")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Print the report as JSON.
    #[arg(long, global = true)]
    pub json_out: bool,

    /// Write the tabular output as CSV to PATH (`-` for stdout).
    #[arg(long, global = true, value_name = "PATH")]
    pub csv: Option<PathBuf>,

    /// TOML file with a [constants] table. Defaults to $GRAVPHASE_CONSTANTS.
    #[arg(long, global = true, value_name = "FILE")]
    pub constants: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Phase shift, effective permittivity and interaction energy.
    Phase(PhaseArgs),
    /// Duration, loss budget and feasibility of a scenario; parameter sweeps.
    Design(DesignArgs),
    /// Circulating Mach-Zehnder run with photon counting.
    Simulate(SimulateArgs),
    /// KDP algebra checks and lattice evolution.
    #[command(subcommand)]
    Kdp(KdpCommand),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Classical,
    Quantum,
}

/// Scenario selection shared by `phase`, `design` and `simulate`. Flags
/// override values from the scenario.
#[derive(Debug, Clone, Default, Args)]
pub struct ScenarioArgs {
    /// Scenario file or `paper:<name>`.
    #[arg(value_name = "SCENARIO")]
    pub scenario: Option<String>,

    /// Same as the positional SCENARIO.
    #[arg(long, value_name = "FILE", conflicts_with = "scenario")]
    pub config: Option<String>,

    /// Shell mass, e.g. "1e5 kg".
    #[arg(long)]
    pub mass: Option<String>,

    /// Shell radius, e.g. "3.3 m".
    #[arg(long)]
    pub radius: Option<String>,

    /// Shell thickness, e.g. "10 cm".
    #[arg(long)]
    pub thickness: Option<String>,

    /// Vacuum wavelength, e.g. "5000 Å".
    #[arg(long)]
    pub wavelength: Option<String>,

    /// Mean photon number of the pulse.
    #[arg(long)]
    pub mean_photons: Option<f64>,

    #[arg(long, value_parser = parse_count)]
    pub winding: Option<u64>,

    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,

    /// Relative permittivity of the medium.
    #[arg(long)]
    pub permittivity: Option<f64>,

    /// Path length of one loop cycle, e.g. "30 m".
    #[arg(long)]
    pub cycle_path_length: Option<String>,
}

#[derive(Debug, Args)]
pub struct PhaseArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,

    /// Sweep one parameter: PARAM=FROM:TO:POINTS in SI units. PARAM is one
    /// of winding, mass, radius, mean_photons, wavelength, cycle_path_length.
    #[arg(long, value_name = "PARAM=A:B:N")]
    pub sweep: Option<String>,

    /// Space sweep points logarithmically.
    #[arg(long, requires = "sweep")]
    pub log: bool,

    /// Smallest winding number reaching this phase, e.g. "1 mrad".
    #[arg(long, value_name = "PHASE")]
    pub target: Option<String>,

    /// Write the resolved scenario as a scenario file.
    #[arg(long, value_name = "FILE")]
    pub emit: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Number of sampled pulses. Defaults to 1 when the pulse has a photon
    /// number, 0 otherwise.
    #[arg(long)]
    pub shots: Option<u64>,

    /// Emit POINTS port intensities for an extra phase over [0, 2π].
    #[arg(long, value_name = "POINTS")]
    pub fringe_sweep: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum KdpCommand {
    /// Check the matrix algebra, the γ projector and the constraint.
    Verify(VerifyArgs),
    /// Evolve a plane wave and emit a diagnostics time series.
    Evolve(EvolveArgs),
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Write the β, γ and β̃ matrices to FILE.
    #[arg(long, value_name = "FILE")]
    pub dump: Option<PathBuf>,

    /// Scenario file whose [evolution] section sets the test lattice.
    #[arg(long, value_name = "FILE")]
    pub config: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IntegratorArg {
    SpectralExact,
    Rk4FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CouplingArg {
    DynamicalSector,
    Uniform,
}

#[derive(Debug, Args)]
pub struct EvolveArgs {
    /// Scenario file with an [evolution] section.
    #[arg(long, value_name = "FILE")]
    pub config: Option<String>,

    /// Constant interaction energy H_int, e.g. "-1e-30 J".
    #[arg(long, allow_hyphen_values = true)]
    pub potential: Option<String>,

    #[arg(long, value_parser = parse_count)]
    pub steps: Option<u64>,

    /// Time step, e.g. "1e-17 s".
    #[arg(long)]
    pub dt: Option<String>,

    /// Lattice extents, e.g. "256" or "16,16,16".
    #[arg(long)]
    pub grid: Option<String>,

    /// Lattice spacing, e.g. "20 nm".
    #[arg(long)]
    pub spacing: Option<String>,

    #[arg(long, value_enum)]
    pub integrator: Option<IntegratorArg>,

    #[arg(long, value_enum)]
    pub coupling: Option<CouplingArg>,

    /// Add a pure-gauge potential before evolving.
    #[arg(long)]
    pub gauge_kick: bool,

    /// Emit every N-th step.
    #[arg(long, default_value_t = 1, value_parser = parse_count)]
    pub every: u64,
}

/// Positive integer, also accepting float notation such as `1e12`.
pub fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(n) = s.parse::<u64>() {
        return if n >= 1 { Ok(n) } else { Err("must be >= 1".into()) };
    }
    let f: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if f >= 1.0 && f.fract() == 0.0 && f < 9.2e18 {
        Ok(f as u64)
    } else {
        Err(format!("`{s}` is not a positive integer"))
    }
}
