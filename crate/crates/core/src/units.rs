//! SI scalar kinds and physical constants.
//!
//! Every dimensioned value in the crate is one of the newtypes below, stored
//! in SI base units. Non-negative kinds reject negative or non-finite values
//! at construction. [`Permittivity`] is a *relative* permittivity, so the
//! vacuum value is 1.

use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gravitational constant, m^3 kg^-1 s^-2 (CODATA 2018).
pub const G_SI: f64 = 6.674_30e-11;
/// Speed of light in vacuum, m/s (exact).
pub const C_SI: f64 = 299_792_458.0;
/// Reduced Planck constant, J s (CODATA 2018).
pub const HBAR_SI: f64 = 1.054_571_817e-34;
/// Joules per electron-volt (exact).
pub const EV: f64 = 1.602_176_634e-19;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysConstants {
    pub g: f64,
    pub c: f64,
    pub hbar: f64,
    /// Always `2π·hbar`; kept in sync by the constructors.
    pub h: f64,
}

impl PhysConstants {
    pub fn new(g: f64, c: f64, hbar: f64) -> Result<Self> {
        for (name, v) in [("G", g), ("c", c), ("hbar", hbar)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidValue {
                    quantity: name_static(name),
                    value: v,
                    reason: "physical constants must be finite and strictly positive",
                });
            }
        }
        Ok(Self {
            g,
            c,
            hbar,
            h: TAU * hbar,
        })
    }

    /// Replace any subset of the constants, keeping `h = 2π·hbar`.
    pub fn with_overrides(self, g: Option<f64>, c: Option<f64>, hbar: Option<f64>) -> Result<Self> {
        Self::new(g.unwrap_or(self.g), c.unwrap_or(self.c), hbar.unwrap_or(self.hbar))
    }

    pub fn c2(&self) -> f64 {
        self.c * self.c
    }
}

impl Default for PhysConstants {
    fn default() -> Self {
        default_constants()
    }
}

fn name_static(name: &str) -> &'static str {
    match name {
        "G" => "G",
        "c" => "c",
        _ => "hbar",
    }
}

/// The frozen SI constants used unless a config overrides them.
pub fn default_constants() -> PhysConstants {
    PhysConstants {
        g: G_SI,
        c: C_SI,
        hbar: HBAR_SI,
        h: TAU * HBAR_SI,
    }
}

/// Shared behaviour of the scalar newtypes.
pub trait Quantity: Sized + Copy {
    const KIND: &'static str;
    /// SI unit symbol used when formatting.
    const UNIT: &'static str;
    /// Accepted unit suffixes and their factor to SI.
    const SUFFIXES: &'static [(&'static str, f64)];

    fn new(value: f64) -> Result<Self>;
    fn value(self) -> f64;

    /// Parse `"<number> <unit>"`, e.g. `"5000 Å"` or `"1e5 kg"`.
    ///
    /// Dimensionless kinds accept a bare number. Dimensioned kinds require a
    /// suffix unless `allow_bare` is set, in which case a bare number is read
    /// in SI base units.
    fn parse_with(input: &str, allow_bare: bool) -> Result<Self> {
        let s = input.trim();
        let split = s
            .char_indices()
            .find(|&(i, ch)| {
                !(ch.is_ascii_digit()
                    || ch == '.'
                    || ch == '+'
                    || ch == '-'
                    || ((ch == 'e' || ch == 'E') && i > 0 && exponent_follows(&s[i + 1..])))
            })
            .map(|(i, _)| i)
            .unwrap_or(s.len());
        let (num, unit) = s.split_at(split);
        let number: f64 = num.trim().parse().map_err(|_| Error::UnitParse {
            input: input.to_string(),
            reason: "expected a number followed by a unit".into(),
        })?;
        let unit = unit.trim();
        let factor = if unit.is_empty() {
            if Self::SUFFIXES.is_empty() || allow_bare {
                1.0
            } else {
                return Err(Error::UnitParse {
                    input: input.to_string(),
                    reason: format!("{} needs an explicit unit (e.g. `{}`)", Self::KIND, Self::UNIT),
                });
            }
        } else {
            Self::SUFFIXES
                .iter()
                .find(|(sfx, _)| *sfx == unit)
                .map(|&(_, f)| f)
                .ok_or_else(|| Error::UnitParse {
                    input: input.to_string(),
                    reason: format!(
                        "unknown {} unit `{unit}`; expected one of {}",
                        Self::KIND,
                        Self::SUFFIXES
                            .iter()
                            .map(|(s, _)| *s)
                            .collect::<Vec<_>>()
                            .join(", ")
                    ),
                })?
        };
        Self::new(number * factor)
    }

    fn parse(input: &str) -> Result<Self> {
        Self::parse_with(input, false)
    }

    /// Lossless text form in SI units, the inverse of [`Quantity::parse`].
    fn to_unit_string(self) -> String {
        if Self::UNIT.is_empty() {
            format!("{:e}", self.value())
        } else {
            format!("{:e} {}", self.value(), Self::UNIT)
        }
    }
}

fn exponent_follows(rest: &str) -> bool {
    let rest = rest.strip_prefix(['+', '-']).unwrap_or(rest);
    rest.starts_with(|c: char| c.is_ascii_digit())
}

macro_rules! scalar_kind {
    ($(#[$doc:meta])* $name:ident, $kind:literal, $unit:literal, nonneg = $nonneg:literal, [$(($sfx:literal, $f:expr)),* $(,)?]) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(f64);

        impl $name {
            pub const ZERO: Self = Self(0.0);
        }

        impl Quantity for $name {
            const KIND: &'static str = $kind;
            const UNIT: &'static str = $unit;
            const SUFFIXES: &'static [(&'static str, f64)] = &[$(($sfx, $f)),*];

            fn new(value: f64) -> Result<Self> {
                if !value.is_finite() {
                    return Err(Error::invalid($kind, value, "must be finite"));
                }
                if $nonneg && value < 0.0 {
                    return Err(Error::invalid($kind, value, "must be non-negative"));
                }
                Ok(Self(value))
            }

            fn value(self) -> f64 {
                self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                if $unit.is_empty() {
                    write!(f, "{:e}", self.0)
                } else {
                    write!(f, "{:e} {}", self.0, $unit)
                }
            }
        }
    };
}

scalar_kind!(Mass, "mass", "kg", nonneg = true,
    [("kg", 1.0), ("g", 1e-3), ("t", 1e3)]);
scalar_kind!(Length, "length", "m", nonneg = true,
    [("m", 1.0), ("km", 1e3), ("cm", 1e-2), ("mm", 1e-3), ("um", 1e-6), ("µm", 1e-6),
     ("nm", 1e-9), ("Å", 1e-10), ("A", 1e-10), ("angstrom", 1e-10)]);
scalar_kind!(Time, "time", "s", nonneg = true,
    [("s", 1.0), ("ms", 1e-3), ("us", 1e-6), ("µs", 1e-6), ("ns", 1e-9), ("ps", 1e-12),
     ("fs", 1e-15), ("min", 60.0), ("h", 3600.0)]);
scalar_kind!(Energy, "energy", "J", nonneg = true,
    [("J", 1.0), ("mJ", 1e-3), ("uJ", 1e-6), ("µJ", 1e-6), ("nJ", 1e-9), ("eV", EV)]);
scalar_kind!(
    /// Signed phase angle in radians.
    Phase, "phase", "rad", nonneg = false,
    [("rad", 1.0), ("mrad", 1e-3), ("urad", 1e-6), ("µrad", 1e-6)]);
scalar_kind!(
    /// Angular frequency in rad/s. `Hz` input is converted with a factor 2π.
    Frequency, "frequency", "rad/s", nonneg = true,
    [("rad/s", 1.0), ("Hz", TAU), ("kHz", TAU * 1e3), ("MHz", TAU * 1e6),
     ("GHz", TAU * 1e9), ("THz", TAU * 1e12)]);
scalar_kind!(
    /// Relative permittivity (vacuum = 1).
    Permittivity, "permittivity", "", nonneg = true, []);
scalar_kind!(
    /// Mean photon number of a pulse.
    PhotonNumber, "photon number", "", nonneg = true, []);

impl Permittivity {
    pub const VACUUM: Self = Self(1.0);
}

impl Frequency {
    /// Angular frequency of light with the given vacuum wavelength.
    pub fn of_wavelength(wavelength: Length, consts: &PhysConstants) -> Result<Self> {
        if wavelength.value() <= 0.0 {
            return Err(Error::invalid("wavelength", wavelength.value(), "must be > 0"));
        }
        Self::new(TAU * consts.c / wavelength.value())
    }
}
