//! Gravity-induced topological phase of light crossing a massive shell.
//!
//! The crate is split along the physics:
//!
//! - [`units`] fixes the SI unit system and the physical constants.
//! - [`phase`] holds the closed-form interaction energy, effective
//!   permittivity, refractive index and the classical/quantum phase shifts.
//! - [`kdp`] builds the 10x10 Kemmer-Duffin-Petiau matrices and evolves the
//!   Schrödinger-form Maxwell field on a periodic lattice.
//! - [`interferometer`] simulates the circulating Mach-Zehnder set-up.
//! - [`designer`] inverts the phase formulas into experiment parameters.

pub mod designer;
pub mod error;
pub mod interferometer;
pub mod kdp;
pub mod phase;
pub mod units;

pub use error::{Error, Result};
pub use phase::{LightPulse, PhaseKind, PhaseResult, PulseStatistics, ShellSpec};
pub use units::{
    Energy, Frequency, Length, Mass, Permittivity, Phase, PhotonNumber, PhysConstants, Time,
};
