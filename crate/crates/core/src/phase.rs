//! Closed-form gravity-induced phase of light crossing a thin massive shell.
//!
//! Inside a uniform thin shell the Newtonian potential is the constant
//! `-GM/R` and the force vanishes. A pulse of energy `E` crossing the interior
//! carries the interaction energy `H_int = -(GM/R)(E/c^2)`, which the light sees
//! as an extra permittivity `eps_g = eps0·GM/(R c^2)` and hence an index
//! `n = sqrt(eps0 + eps_g)`.
//!
//! Two phase laws follow:
//!
//! - classical: `phi_cl = (2π/λ)(2R)(n - sqrt(eps0)) ≈ 2πGM·sqrt(eps0)/(λc^2)`
//! - quantum:   `phi_qm = |H_int|·t/ħ = 4πGM·N/(λc^2)` with `E = N·hc/λ`, `t = 2R/c`
//!
//! Both are independent of `R` and both multiply by the winding number when
//! the pulse is recirculated through the shell. The per-photon quantum value is
//! twice the classical one; the two laws are kept as written and not reconciled.
//!
//! Phases are reported as positive magnitudes. The sign of `H_int` (attractive
//! potential) is carried by [`interaction_energy`].

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{
    Energy, Frequency, Length, Mass, Permittivity, Phase, PhotonNumber, PhysConstants, Quantity,
    Time,
};

/// Above this `GM/(Rc^2)` the weak-field reading `eps_g << eps0` is flagged.
pub const WEAK_FIELD_LIMIT: f64 = 1e-3;
/// Above this thickness/radius ratio the thin-shell formula is flagged.
pub const THIN_SHELL_LIMIT: f64 = 0.1;
/// Relative tolerance for `mass ≈ 4πR²·thickness·density`.
pub const SHELL_MASS_TOLERANCE: f64 = 0.01;
/// Relative tolerance for `energy ≈ N·hc/λ`.
pub const PULSE_ENERGY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShellSpec {
    pub mass: Mass,
    pub radius: Length,
    pub thickness: Option<Length>,
    /// kg/m^3
    pub density: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShellWarning {
    /// `M = 0`: every phase is zero.
    Degenerate,
    /// thickness is not small compared to the radius.
    ThickShell,
    /// `GM/(Rc^2)` exceeds [`WEAK_FIELD_LIMIT`].
    StrongField,
}

impl ShellSpec {
    /// A shell of the given mass and radius. `M = 0` is accepted as a
    /// degenerate limiting case; the radius must be strictly positive.
    pub fn new(mass: Mass, radius: Length) -> Result<Self> {
        if radius.value() <= 0.0 {
            return Err(Error::invalid("shell radius", radius.value(), "must be > 0"));
        }
        Ok(Self {
            mass,
            radius,
            thickness: None,
            density: None,
        })
    }

    /// Attach thickness and density, checking them against the mass.
    pub fn with_geometry(mut self, thickness: Length, density: f64) -> Result<Self> {
        let implied = shell_mass_from_geometry(self.radius, thickness, density)?;
        let m = self.mass.value();
        if (implied.value() - m).abs() > SHELL_MASS_TOLERANCE * m.max(implied.value()) {
            return Err(Error::Inconsistent(format!(
                "shell mass {m:e} kg differs from 4πR²·t·ρ = {:e} kg by more than {}%",
                implied.value(),
                SHELL_MASS_TOLERANCE * 100.0
            )));
        }
        self.thickness = Some(thickness);
        self.density = Some(density);
        Ok(self)
    }

    /// Build the shell from its geometry alone.
    pub fn from_geometry(radius: Length, thickness: Length, density: f64) -> Result<Self> {
        let mass = shell_mass_from_geometry(radius, thickness, density)?;
        Self::new(mass, radius)?.with_geometry(thickness, density)
    }

    pub fn warnings(&self, consts: &PhysConstants) -> Vec<ShellWarning> {
        let mut w = Vec::new();
        if self.mass.value() == 0.0 {
            w.push(ShellWarning::Degenerate);
        }
        if let Some(t) = self.thickness {
            if t.value() > THIN_SHELL_LIMIT * self.radius.value() {
                w.push(ShellWarning::ThickShell);
            }
        }
        if potential_ratio(consts, self) >= WEAK_FIELD_LIMIT {
            w.push(ShellWarning::StrongField);
        }
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PulseStatistics {
    ClassicalPoissonian,
    CoherentLaser,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightPulse {
    pub wavelength: Length,
    pub energy: Option<Energy>,
    pub mean_photons: Option<PhotonNumber>,
    pub statistics: PulseStatistics,
}

impl LightPulse {
    pub fn new(
        wavelength: Length,
        energy: Option<Energy>,
        mean_photons: Option<PhotonNumber>,
        statistics: PulseStatistics,
        consts: &PhysConstants,
    ) -> Result<Self> {
        if wavelength.value() <= 0.0 {
            return Err(Error::invalid("wavelength", wavelength.value(), "must be > 0"));
        }
        let pulse = Self {
            wavelength,
            energy,
            mean_photons,
            statistics,
        };
        if let (Some(e), Some(n)) = (energy, mean_photons) {
            let expected = n.value() * pulse.photon_energy(consts);
            let scale = expected.abs().max(e.value().abs());
            if scale > 0.0 && (e.value() - expected).abs() > PULSE_ENERGY_TOLERANCE * scale {
                return Err(Error::Inconsistent(format!(
                    "pulse energy {:e} J does not match N·hc/λ = {expected:e} J",
                    e.value()
                )));
            }
        }
        Ok(pulse)
    }

    /// Classical pulse characterised by its wavelength only.
    pub fn classical(wavelength: Length, consts: &PhysConstants) -> Result<Self> {
        Self::new(wavelength, None, None, PulseStatistics::ClassicalPoissonian, consts)
    }

    /// Laser pulse with mean photon number `N`.
    pub fn laser(wavelength: Length, mean_photons: PhotonNumber, consts: &PhysConstants) -> Result<Self> {
        Self::new(
            wavelength,
            None,
            Some(mean_photons),
            PulseStatistics::CoherentLaser,
            consts,
        )
    }

    /// `hc/λ`, J.
    pub fn photon_energy(&self, consts: &PhysConstants) -> f64 {
        consts.h * consts.c / self.wavelength.value()
    }

    /// The given energy, or `N·hc/λ` when only the photon number is known.
    pub fn total_energy(&self, consts: &PhysConstants) -> Option<Energy> {
        self.energy.or_else(|| {
            self.mean_photons
                .map(|n| Energy::new(n.value() * self.photon_energy(consts)).expect("finite"))
        })
    }

    /// Vacuum wavenumber `2π/λ`, rad/m.
    pub fn wavenumber(&self) -> f64 {
        TAU / self.wavelength.value()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseKind {
    Classical,
    Quantum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseResult {
    pub phase: Phase,
    pub kind: PhaseKind,
    pub winding: u64,
    pub per_pass: Phase,
}

impl PhaseResult {
    fn new(per_pass: f64, kind: PhaseKind, winding: u64) -> Result<Self> {
        check_winding(winding)?;
        Ok(Self {
            phase: Phase::new(per_pass * winding as f64)?,
            kind,
            winding,
            per_pass: Phase::new(per_pass)?,
        })
    }

    /// The same per-pass phase at another winding number.
    pub fn rewound(&self, winding: u64) -> Result<Self> {
        Self::new(self.per_pass.value(), self.kind, winding)
    }
}

fn check_winding(winding: u64) -> Result<()> {
    if winding == 0 {
        return Err(Error::invalid("winding number", 0.0, "must be >= 1"));
    }
    Ok(())
}

fn check_eps0(eps0: Permittivity) -> Result<()> {
    if eps0.value() <= 0.0 {
        return Err(Error::invalid("eps0", eps0.value(), "must be > 0"));
    }
    Ok(())
}

/// Dimensionless weak-field parameter `GM/(Rc^2)`.
pub fn potential_ratio(consts: &PhysConstants, shell: &ShellSpec) -> f64 {
    consts.g * shell.mass.value() / (shell.radius.value() * consts.c2())
}

/// `H_int = -(GM/R)(E/c^2)` in joules; never positive.
pub fn interaction_energy(consts: &PhysConstants, shell: &ShellSpec, pulse_energy: Energy) -> f64 {
    -(consts.g * shell.mass.value() / shell.radius.value()) * (pulse_energy.value() / consts.c2())
}

/// Gravity-induced permittivity `eps_g = eps0·GM/(Rc^2)`.
pub fn effective_permittivity(
    consts: &PhysConstants,
    shell: &ShellSpec,
    eps0: Permittivity,
) -> Result<Permittivity> {
    check_eps0(eps0)?;
    Permittivity::new(eps0.value() * potential_ratio(consts, shell))
}

/// Exact index `n = sqrt(eps0 + eps_g)`.
pub fn refractive_index(consts: &PhysConstants, shell: &ShellSpec, eps0: Permittivity) -> Result<f64> {
    let eps_g = effective_permittivity(consts, shell, eps0)?;
    Ok((eps0.value() + eps_g.value()).sqrt())
}

/// First-order index `sqrt(eps0)·(1 + GM/(2Rc^2))`.
pub fn refractive_index_first_order(
    consts: &PhysConstants,
    shell: &ShellSpec,
    eps0: Permittivity,
) -> Result<f64> {
    check_eps0(eps0)?;
    Ok(eps0.value().sqrt() * (1.0 + 0.5 * potential_ratio(consts, shell)))
}

/// `n - sqrt(eps0)` without cancellation:
/// `sqrt(eps0)·(sqrt(1+x) - 1) = sqrt(eps0)·x / (sqrt(1+x) + 1)`, `x = GM/(Rc^2)`.
pub fn index_excess_exact(consts: &PhysConstants, shell: &ShellSpec, eps0: Permittivity) -> Result<f64> {
    check_eps0(eps0)?;
    let x = potential_ratio(consts, shell);
    Ok(eps0.value().sqrt() * x / ((1.0 + x).sqrt() + 1.0))
}

/// `n - sqrt(eps0) ≈ sqrt(eps0)·GM/(2Rc^2)`.
pub fn index_excess_first_order(
    consts: &PhysConstants,
    shell: &ShellSpec,
    eps0: Permittivity,
) -> Result<f64> {
    check_eps0(eps0)?;
    Ok(0.5 * eps0.value().sqrt() * potential_ratio(consts, shell))
}

/// Closed-form classical phase `2πGM·sqrt(eps0)/(λc^2)` per pass, times winding.
pub fn classical_phase(
    consts: &PhysConstants,
    shell: &ShellSpec,
    pulse: &LightPulse,
    eps0: Permittivity,
    winding: u64,
) -> Result<PhaseResult> {
    check_eps0(eps0)?;
    let per_pass = TAU * consts.g * shell.mass.value() * eps0.value().sqrt()
        / (pulse.wavelength.value() * consts.c2());
    PhaseResult::new(per_pass, PhaseKind::Classical, winding)
}

/// Classical phase evaluated as `(2π/λ)(2R)(n - sqrt(eps0))` with the exact index.
pub fn classical_phase_exact(
    consts: &PhysConstants,
    shell: &ShellSpec,
    pulse: &LightPulse,
    eps0: Permittivity,
    winding: u64,
) -> Result<PhaseResult> {
    let excess = index_excess_exact(consts, shell, eps0)?;
    let per_pass = pulse.wavenumber() * (2.0 * shell.radius.value()) * excess;
    PhaseResult::new(per_pass, PhaseKind::Classical, winding)
}

/// Quantum phase `|H_int|·t/ħ` per pass, with `E = N·hc/λ`, times winding.
///
/// `transit` is the time spent inside the shell; [`transit_time`] gives the
/// vacuum value `2R/c` that makes this agree with [`quantum_phase_closed_form`].
pub fn quantum_phase(
    consts: &PhysConstants,
    shell: &ShellSpec,
    pulse: &LightPulse,
    transit: Time,
    winding: u64,
) -> Result<PhaseResult> {
    let n = pulse.mean_photons.ok_or(Error::Missing("pulse mean photon number"))?;
    let energy = Energy::new(n.value() * pulse.photon_energy(consts))?;
    let h_int = interaction_energy(consts, shell, energy);
    let per_pass = h_int.abs() * transit.value() / consts.hbar;
    PhaseResult::new(per_pass, PhaseKind::Quantum, winding)
}

/// Quantum phase from the closed form `4πGM·N/(λc^2)` per pass, times winding.
pub fn quantum_phase_closed_form(
    consts: &PhysConstants,
    shell: &ShellSpec,
    pulse: &LightPulse,
    winding: u64,
) -> Result<PhaseResult> {
    let n = pulse.mean_photons.ok_or(Error::Missing("pulse mean photon number"))?;
    let per_pass =
        2.0 * TAU * consts.g * shell.mass.value() * n.value() / (pulse.wavelength.value() * consts.c2());
    PhaseResult::new(per_pass, PhaseKind::Quantum, winding)
}

/// Per-pass phase for either kind, using the closed forms.
pub fn phase_for(
    kind: PhaseKind,
    consts: &PhysConstants,
    shell: &ShellSpec,
    pulse: &LightPulse,
    eps0: Permittivity,
    winding: u64,
) -> Result<PhaseResult> {
    match kind {
        PhaseKind::Classical => classical_phase(consts, shell, pulse, eps0, winding),
        PhaseKind::Quantum => quantum_phase_closed_form(consts, shell, pulse, winding),
    }
}

/// KDP mass parameter `m = s·ħω/c^2` with spin degeneracy `s = 2`.
pub fn photon_mass_parameter(consts: &PhysConstants, omega: Frequency) -> Result<Mass> {
    if omega.value() <= 0.0 {
        return Err(Error::invalid("angular frequency", omega.value(), "must be > 0"));
    }
    Mass::new(2.0 * consts.hbar * omega.value() / consts.c2())
}

/// Thin-shell mass `4π·R²·thickness·density`. Zero inputs give a zero
/// (degenerate) mass; negative inputs are rejected.
pub fn shell_mass_from_geometry(radius: Length, thickness: Length, density: f64) -> Result<Mass> {
    if !(density.is_finite() && density >= 0.0) {
        return Err(Error::invalid("density", density, "must be finite and non-negative"));
    }
    let r = radius.value();
    Mass::new(4.0 * PI * r * r * thickness.value() * density)
}

/// Vacuum transit time `2R/c` through the shell's diametrically opposite holes.
pub fn transit_time(consts: &PhysConstants, shell: &ShellSpec) -> Time {
    Time::new(2.0 * shell.radius.value() / consts.c).expect("radius and c are positive")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::default_constants;

    fn m(v: f64) -> Mass {
        Mass::new(v).unwrap()
    }
    fn l(v: f64) -> Length {
        Length::new(v).unwrap()
    }
    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn interaction_energy_examples() {
        let k = default_constants();
        let shell = ShellSpec::new(m(1e5), l(3.3)).unwrap();
        assert_eq!(interaction_energy(&k, &shell, Energy::ZERO), 0.0);
        // hand arithmetic: 6.6743e-11 * 1e5 / 3.3 / 299792458^2
        let expected = -(6.6743e-11 * 1e5 / 3.3) / (299_792_458.0f64 * 299_792_458.0);
        let e = interaction_energy(&k, &shell, Energy::new(1.0).unwrap());
        assert!(rel(e, expected) < 1e-14);
        assert!((e + 2.25e-23).abs() < 0.01e-23);
        let heavier = ShellSpec::new(m(2e5), l(3.3)).unwrap();
        let e2 = interaction_energy(&k, &heavier, Energy::new(1.0).unwrap());
        assert!(rel(e2, 2.0 * e) < 1e-15);
    }

    #[test]
    fn permittivity_examples() {
        let k = default_constants();
        let zero = ShellSpec::new(Mass::ZERO, l(3.3)).unwrap();
        assert_eq!(effective_permittivity(&k, &zero, Permittivity::VACUUM).unwrap().value(), 0.0);
        let shell = ShellSpec::new(m(1e5), l(3.3)).unwrap();
        let eps = effective_permittivity(&k, &shell, Permittivity::new(2.0).unwrap()).unwrap();
        assert!(rel(eps.value() / 2.0, 2.2504e-23) < 1e-4);
        assert!(potential_ratio(&k, &shell) < WEAK_FIELD_LIMIT);
    }

    #[test]
    fn refractive_index_forms() {
        let k = default_constants();
        let zero = ShellSpec::new(Mass::ZERO, l(1.0)).unwrap();
        let eps0 = Permittivity::new(2.25).unwrap();
        assert_eq!(refractive_index(&k, &zero, eps0).unwrap(), 1.5);
        let shell = ShellSpec::new(m(1e5), l(3.3)).unwrap();
        let x = potential_ratio(&k, &shell);
        // series oracle for sqrt(1+x)-1, independent of the compensated form
        let oracle = x / 2.0 - x * x / 8.0 + x * x * x / 16.0;
        let exact = index_excess_exact(&k, &shell, Permittivity::VACUUM).unwrap();
        assert!(rel(exact, oracle) < 1e-15);
        assert!(rel(exact, 1.125e-23) < 1e-3);
        let approx = index_excess_first_order(&k, &shell, Permittivity::VACUUM).unwrap();
        assert!((exact - approx).abs() < 1e-30);
        let n_exact = refractive_index(&k, &shell, Permittivity::VACUUM).unwrap();
        let n_approx = refractive_index_first_order(&k, &shell, Permittivity::VACUUM).unwrap();
        assert!((n_exact - n_approx).abs() < 1e-30);
    }

    #[test]
    fn classical_phase_examples() {
        let k = default_constants();
        let pulse = LightPulse::classical(l(5e-7), &k).unwrap();
        let astro = ShellSpec::new(m(1e18), l(1e3)).unwrap();
        let p = classical_phase(&k, &astro, &pulse, Permittivity::VACUUM, 1).unwrap();
        assert!(rel(p.phase.value(), 9.3e-3) < 0.01, "{}", p.phase.value());
        let lab = ShellSpec::new(m(1e5), l(3.3)).unwrap();
        let p = classical_phase(&k, &lab, &pulse, Permittivity::VACUUM, 1_000_000_000_000).unwrap();
        assert!(rel(p.phase.value(), 9.3e-4) < 0.01);
        assert_eq!(p.phase.value(), p.per_pass.value() * 1e12);
        let zero = ShellSpec::new(Mass::ZERO, l(3.3)).unwrap();
        assert_eq!(classical_phase(&k, &zero, &pulse, Permittivity::VACUUM, 7).unwrap().phase.value(), 0.0);
        assert!(classical_phase(&k, &lab, &pulse, Permittivity::VACUUM, 0).is_err());
    }

    #[test]
    fn quantum_phase_examples() {
        let k = default_constants();
        let pulse = LightPulse::laser(l(5e-7), PhotonNumber::new(1e7).unwrap(), &k).unwrap();
        let shell = ShellSpec::new(m(3e3), l(1.5)).unwrap();
        let closed = quantum_phase_closed_form(&k, &shell, &pulse, 1_000_000).unwrap();
        assert!(rel(closed.phase.value(), 5.6e-4) < 0.01, "{}", closed.phase.value());
        let via_h = quantum_phase(&k, &shell, &pulse, transit_time(&k, &shell), 1_000_000).unwrap();
        assert!(rel(via_h.phase.value(), closed.phase.value()) < 1e-12);

        let dark = LightPulse::laser(l(5e-7), PhotonNumber::ZERO, &k).unwrap();
        assert_eq!(quantum_phase_closed_form(&k, &shell, &dark, 1).unwrap().phase.value(), 0.0);

        let classical = LightPulse::classical(l(5e-7), &k).unwrap();
        assert_eq!(
            quantum_phase_closed_form(&k, &shell, &classical, 1),
            Err(Error::Missing("pulse mean photon number"))
        );
    }

    #[test]
    fn photon_mass_examples() {
        let k = default_constants();
        assert!(photon_mass_parameter(&k, Frequency::ZERO).is_err());
        let omega = Frequency::of_wavelength(l(5e-7), &k).unwrap();
        assert!(rel(omega.value(), 3.77e15) < 1e-3);
        let mass = photon_mass_parameter(&k, omega).unwrap();
        assert!(rel(mass.value(), 8.84e-36) < 1e-3, "{}", mass.value());
        let double = photon_mass_parameter(&k, Frequency::new(2.0 * omega.value()).unwrap()).unwrap();
        assert!(rel(double.value(), 2.0 * mass.value()) < 1e-15);
    }

    #[test]
    fn shell_geometry_examples() {
        // 4π·3.3²·0.1·7300 = 99 899.5 kg; 4π·1.5²·0.01·10600 = 2 997.1 kg
        let a = shell_mass_from_geometry(l(3.3), l(0.1), 7.3e3).unwrap();
        assert!(rel(a.value(), 99_899.5) < 1e-5);
        assert!(rel(a.value(), 1e5) < 0.01);
        let b = shell_mass_from_geometry(l(1.5), l(0.01), 1.06e4).unwrap();
        assert!(rel(b.value(), 3e3) < 0.01);
        assert_eq!(shell_mass_from_geometry(l(0.0), l(0.1), 7e3).unwrap().value(), 0.0);
        assert_eq!(shell_mass_from_geometry(l(3.3), l(0.1), 0.0).unwrap().value(), 0.0);
        assert!(shell_mass_from_geometry(l(3.3), l(0.1), -1.0).is_err());
    }

    #[test]
    fn shell_invariants() {
        let k = default_constants();
        assert!(ShellSpec::new(m(1.0), l(0.0)).is_err());
        let zero = ShellSpec::new(Mass::ZERO, l(1.0)).unwrap();
        assert_eq!(zero.warnings(&k), vec![ShellWarning::Degenerate]);
        assert!(ShellSpec::new(m(1e5), l(3.3)).unwrap().with_geometry(l(0.1), 7.3e3).is_ok());
        assert!(ShellSpec::new(m(2e5), l(3.3)).unwrap().with_geometry(l(0.1), 7.3e3).is_err());
        let thick = ShellSpec::from_geometry(l(1.0), l(0.5), 1.0).unwrap();
        assert!(thick.warnings(&k).contains(&ShellWarning::ThickShell));
        let dense = ShellSpec::new(m(1e30), l(1e3)).unwrap();
        assert!(dense.warnings(&k).contains(&ShellWarning::StrongField));
    }

    #[test]
    fn pulse_energy_consistency() {
        let k = default_constants();
        let n = PhotonNumber::new(1e7).unwrap();
        let e = 1e7 * k.h * k.c / 5e-7;
        let ok = LightPulse::new(l(5e-7), Some(Energy::new(e).unwrap()), Some(n), PulseStatistics::CoherentLaser, &k);
        assert!(ok.is_ok());
        let bad = LightPulse::new(l(5e-7), Some(Energy::new(e * 1.001).unwrap()), Some(n), PulseStatistics::CoherentLaser, &k);
        assert!(matches!(bad, Err(Error::Inconsistent(_))));
        assert!(LightPulse::classical(l(0.0), &k).is_err());
    }

    #[test]
    fn transit_time_examples() {
        let k = default_constants();
        let t = transit_time(&k, &ShellSpec::new(m(1.0), l(1.5)).unwrap());
        assert!(rel(t.value(), 1.0007e-8) < 1e-4);
        let t2 = transit_time(&k, &ShellSpec::new(m(1.0), l(3.0)).unwrap());
        assert!(rel(t2.value(), 2.0 * t.value()) < 1e-15);
    }
}
