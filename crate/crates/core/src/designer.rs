//! Experiment design by inverting the phase formulas.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::{phase_for, LightPulse, PhaseKind, PhaseResult, ShellSpec};
use crate::units::{Length, Mass, Permittivity, PhotonNumber, PhysConstants, Quantity, Time};

/// Mirror reflections per loop cycle in the Figure 1 loops.
pub const REFLECTIONS_PER_CYCLE: u64 = 4;
/// Default visibility used for [`DesignResult::required_loss_floor`].
pub const DEFAULT_MIN_VISIBILITY: f64 = 0.5;

// Thresholds for the advisory verdict.
/// Amplitude loss per reflection of a good dielectric supermirror
/// (about 1 ppm intensity loss).
pub const BEST_MIRROR_DEFICIT: f64 = 5e-7;
pub const MAX_COMFORTABLE_DURATION_S: f64 = 3600.0;
pub const MILLIRADIAN_ORDER: (f64, f64) = (1e-4, 1e-2);
/// Heaviest shell considered buildable.
pub const MAX_LAB_MASS_KG: f64 = 1e7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub shell: ShellSpec,
    pub pulse: LightPulse,
    pub winding: u64,
    pub mode: PhaseKind,
    /// Full loop length travelled per cycle.
    pub cycle_path_length: Length,
    pub permittivity: Permittivity,
    pub reflections_per_cycle: u64,
    /// Free-form provenance of the numbers.
    pub note: Option<String>,
}

impl Scenario {
    pub fn new(
        name: impl Into<String>,
        shell: ShellSpec,
        pulse: LightPulse,
        winding: u64,
        mode: PhaseKind,
        cycle_path_length: Length,
    ) -> Result<Self> {
        let s = Self {
            name: name.into(),
            shell,
            pulse,
            winding,
            mode,
            cycle_path_length,
            permittivity: Permittivity::VACUUM,
            reflections_per_cycle: REFLECTIONS_PER_CYCLE,
            note: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.winding == 0 {
            return Err(Error::invalid("winding number", 0.0, "must be >= 1"));
        }
        let d = 2.0 * self.shell.radius.value();
        if self.cycle_path_length.value() < d {
            return Err(Error::Inconsistent(format!(
                "cycle path length {} is shorter than the shell diameter {d:e} m",
                self.cycle_path_length
            )));
        }
        Ok(())
    }

    pub fn phase(&self, consts: &PhysConstants) -> Result<PhaseResult> {
        phase_for(self.mode, consts, &self.shell, &self.pulse, self.permittivity, self.winding)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignResult {
    pub phase: PhaseResult,
    pub duration: Time,
    /// Per-reflection amplitude retention needed for
    /// [`DEFAULT_MIN_VISIBILITY`].
    pub required_loss_floor: f64,
    /// `1 - required_loss_floor`, computed without cancellation.
    pub loss_deficit: f64,
    pub feasible: bool,
    pub reasons: Vec<String>,
}

/// Smallest `n` with `n · per_pass ≥ target`.
pub fn required_winding(
    target: f64,
    shell: &ShellSpec,
    pulse: &LightPulse,
    mode: PhaseKind,
    eps0: Permittivity,
    consts: &PhysConstants,
) -> Result<u64> {
    if !(target.is_finite() && target > 0.0) {
        return Err(Error::invalid("target phase", target, "must be finite and > 0"));
    }
    let per_pass = phase_for(mode, consts, shell, pulse, eps0, 1)?.per_pass.value();
    if per_pass <= 0.0 {
        return Err(Error::Infeasible(
            "the per-pass phase is zero (massless shell); no winding number reaches the target".into(),
        ));
    }
    let estimate = (target / per_pass).ceil();
    if estimate >= u64::MAX as f64 / 2.0 {
        return Err(Error::Infeasible(format!(
            "target {target:e} rad needs about {estimate:e} windings"
        )));
    }
    let mut n = (estimate as u64).max(1);
    // Settle the rounding of the division against the product used by
    // the phase formulas.
    while (n as f64) * per_pass < target {
        n += 1;
    }
    while n > 1 && ((n - 1) as f64) * per_pass >= target {
        n -= 1;
    }
    Ok(n)
}

/// `winding · cycle_path_length / c`.
pub fn duration_estimate(scenario: &Scenario, consts: &PhysConstants) -> Result<Time> {
    scenario.validate()?;
    Time::new(scenario.winding as f64 * scenario.cycle_path_length.value() / consts.c)
}

fn loss_exponent(winding: u64, reflections_per_cycle: u64, min_visibility: f64) -> Result<f64> {
    if !(min_visibility > 0.0 && min_visibility <= 1.0) {
        return Err(Error::invalid("minimum visibility", min_visibility, "must lie in (0, 1]"));
    }
    if winding == 0 || reflections_per_cycle == 0 {
        return Err(Error::invalid(
            "reflection count",
            (winding * reflections_per_cycle) as f64,
            "must be >= 1",
        ));
    }
    Ok(min_visibility.ln() / (2.0 * reflections_per_cycle as f64 * winding as f64))
}

/// Amplitude retention `r = exp(ln(v) / (2·refl·n))` per reflection so that
/// `r^(2·refl·n) = v`.
pub fn loss_floor(winding: u64, reflections_per_cycle: u64, min_visibility: f64) -> Result<f64> {
    Ok(loss_exponent(winding, reflections_per_cycle, min_visibility)?.exp())
}

/// `1 - loss_floor(..)` without the cancellation of subtracting from 1.
pub fn loss_deficit(winding: u64, reflections_per_cycle: u64, min_visibility: f64) -> Result<f64> {
    Ok(-loss_exponent(winding, reflections_per_cycle, min_visibility)?.exp_m1())
}

pub fn design(scenario: &Scenario, consts: &PhysConstants) -> Result<DesignResult> {
    scenario.validate()?;
    let phase = scenario.phase(consts)?;
    let duration = duration_estimate(scenario, consts)?;
    let r = loss_floor(scenario.winding, scenario.reflections_per_cycle, DEFAULT_MIN_VISIBILITY)?;
    let deficit = loss_deficit(scenario.winding, scenario.reflections_per_cycle, DEFAULT_MIN_VISIBILITY)?;

    let mut reasons = Vec::new();
    let phi = phase.phase.value();
    if phi < MILLIRADIAN_ORDER.0 {
        reasons.push(format!("phase {phi:.3e} rad is below the milliradian order"));
    }
    if scenario.shell.mass.value() > MAX_LAB_MASS_KG {
        reasons.push(format!(
            "shell mass {} needs astrophysical conditions",
            scenario.shell.mass
        ));
    }
    if duration.value() > MAX_COMFORTABLE_DURATION_S {
        reasons.push(format!(
            "circulation lasts {:.3e} s; the set-up must stay stable that long",
            duration.value()
        ));
    }
    if deficit < BEST_MIRROR_DEFICIT {
        reasons.push(format!(
            "mirrors must lose less than {deficit:.3e} of the amplitude per reflection (best mirrors: about {BEST_MIRROR_DEFICIT:e})"
        ));
    }
    Ok(DesignResult {
        phase,
        duration,
        required_loss_floor: r,
        loss_deficit: deficit,
        feasible: reasons.is_empty(),
        reasons,
    })
}

/// Scenario names accepted by [`paper_scenario`].
pub const PAPER_SCENARIO_NAMES: [&str; 3] = ["astrophysical-classical", "lab-classical", "lab-quantum"];

fn green(consts: &PhysConstants) -> Result<LightPulse> {
    LightPulse::classical(Length::new(5e-7)?, consts)
}

/// The three set-ups discussed for detection.
///
/// - astrophysical-classical: `M = 1e18 kg`, one pass. The radius is not
///   given; the phase does not depend on it, 1 km is used.
/// - lab-classical: `R = 3.3 m`, 10 cm thick, `M = 1e5 kg`, `n = 1e12`.
///   A 16.2 m loop reproduces the quoted 15 h.
/// - lab-quantum: `R = 1.5 m`, 1 cm thick, `M = 3e3 kg`, `N = 1e7`,
///   `n = 1e6`. A 30 m loop reproduces the quoted 0.1 s.
pub fn paper_scenario(name: &str, consts: &PhysConstants) -> Result<Scenario> {
    let s = match name {
        "astrophysical-classical" => {
            let shell = ShellSpec::new(Mass::new(1e18)?, Length::new(1e3)?)?;
            let mut s = Scenario::new(name, shell, green(consts)?, 1, PhaseKind::Classical, Length::new(2e3)?)?;
            s.note = Some("radius not stated; the classical phase is independent of R".into());
            s
        }
        "lab-classical" => {
            let shell = ShellSpec {
                thickness: Some(Length::new(0.1)?),
                ..ShellSpec::new(Mass::new(1e5)?, Length::new(3.3)?)?
            };
            let mut s = Scenario::new(
                name,
                shell,
                green(consts)?,
                1_000_000_000_000,
                PhaseKind::Classical,
                Length::new(16.2)?,
            )?;
            s.note = Some("loop length back-computed from the quoted 15 h duration".into());
            s
        }
        "lab-quantum" => {
            let shell = ShellSpec {
                thickness: Some(Length::new(0.01)?),
                ..ShellSpec::new(Mass::new(3e3)?, Length::new(1.5)?)?
            };
            let pulse = LightPulse::laser(Length::new(5e-7)?, PhotonNumber::new(1e7)?, consts)?;
            let mut s = Scenario::new(name, shell, pulse, 1_000_000, PhaseKind::Quantum, Length::new(30.0)?)?;
            s.note = Some("loop length back-computed from the quoted 0.1 s duration".into());
            s
        }
        other => {
            return Err(Error::Inconsistent(format!(
                "unknown scenario `{other}`; available: {}",
                PAPER_SCENARIO_NAMES.join(", ")
            )))
        }
    };
    s.validate()?;
    Ok(s)
}

pub fn paper_scenarios(consts: &PhysConstants) -> Result<Vec<(Scenario, DesignResult)>> {
    PAPER_SCENARIO_NAMES
        .iter()
        .map(|n| {
            let s = paper_scenario(n, consts)?;
            let d = design(&s, consts)?;
            Ok((s, d))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Winding,
    Mass,
    Radius,
    MeanPhotons,
    Wavelength,
    CyclePathLength,
}

impl SweepParam {
    pub const ALL: [SweepParam; 6] = [
        SweepParam::Winding,
        SweepParam::Mass,
        SweepParam::Radius,
        SweepParam::MeanPhotons,
        SweepParam::Wavelength,
        SweepParam::CyclePathLength,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Winding => "winding",
            SweepParam::Mass => "mass",
            SweepParam::Radius => "radius",
            SweepParam::MeanPhotons => "mean_photons",
            SweepParam::Wavelength => "wavelength",
            SweepParam::CyclePathLength => "cycle_path_length",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            Error::Inconsistent(format!(
                "unknown sweep parameter `{s}`; expected one of {}",
                Self::ALL.map(|p| p.name()).join(", ")
            ))
        })
    }

    /// Copy of `base` with this parameter set to `value` (SI units).
    pub fn apply(self, base: &Scenario, value: f64, consts: &PhysConstants) -> Result<Scenario> {
        let mut s = base.clone();
        match self {
            SweepParam::Winding => {
                if !(value >= 1.0 && value.fract() == 0.0 && value < u64::MAX as f64) {
                    return Err(Error::invalid("winding number", value, "must be a positive integer"));
                }
                s.winding = value as u64;
            }
            SweepParam::Mass => s.shell.mass = Mass::new(value)?,
            SweepParam::Radius => {
                s.shell = ShellSpec::new(s.shell.mass, Length::new(value)?)?;
            }
            SweepParam::MeanPhotons => {
                s.pulse = LightPulse::new(
                    s.pulse.wavelength,
                    None,
                    Some(PhotonNumber::new(value)?),
                    s.pulse.statistics,
                    consts,
                )?;
            }
            SweepParam::Wavelength => {
                s.pulse = LightPulse::new(Length::new(value)?, None, s.pulse.mean_photons, s.pulse.statistics, consts)?;
            }
            SweepParam::CyclePathLength => s.cycle_path_length = Length::new(value)?,
        }
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepScale {
    #[default]
    Linear,
    Log,
}

/// `n` values from `a` to `b` inclusive.
pub fn sweep_values(a: f64, b: f64, n: usize, scale: SweepScale) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("sweep points", 0.0, "must be >= 1"));
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::invalid("sweep bound", if a.is_finite() { b } else { a }, "must be finite"));
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    let t = |i: usize| i as f64 / (n - 1) as f64;
    Ok(match scale {
        SweepScale::Linear => (0..n).map(|i| a + (b - a) * t(i)).collect(),
        SweepScale::Log => {
            if a <= 0.0 || b <= 0.0 {
                return Err(Error::invalid("log sweep bound", a.min(b), "must be > 0"));
            }
            let (la, lb) = (a.log10(), b.log10());
            (0..n)
                .map(|i| {
                    let v = 10f64.powf(la + (lb - la) * t(i));
                    // Land decades exactly on integers.
                    if (v - v.round()).abs() <= 1e-9 * v {
                        v.round()
                    } else {
                        v
                    }
                })
                .collect()
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: f64,
    pub phase: f64,
    pub duration: f64,
    pub loss_floor: f64,
}

pub fn sweep(base: &Scenario, param: SweepParam, values: &[f64], consts: &PhysConstants) -> Result<Vec<SweepRow>> {
    values
        .iter()
        .map(|&v| {
            // Grid points between integers snap to the nearest winding.
            let v = if param == SweepParam::Winding { v.round() } else { v };
            let s = param.apply(base, v, consts)?;
            let d = design(&s, consts)?;
            Ok(SweepRow {
                parameter: v,
                phase: d.phase.phase.value(),
                duration: d.duration.value(),
                loss_floor: d.required_loss_floor,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::default_constants;
    use proptest::prelude::*;

    fn k() -> PhysConstants {
        default_constants()
    }

    fn shell(m: f64, r: f64) -> ShellSpec {
        ShellSpec::new(Mass::new(m).unwrap(), Length::new(r).unwrap()).unwrap()
    }

    fn green() -> LightPulse {
        LightPulse::classical(Length::parse("5000 Å").unwrap(), &k()).unwrap()
    }

    fn laser(n: f64) -> LightPulse {
        LightPulse::laser(Length::parse("5000 Å").unwrap(), PhotonNumber::new(n).unwrap(), &k()).unwrap()
    }

    #[test]
    fn winding_for_lab_classical() {
        let n = required_winding(9.3e-4, &shell(1e5, 3.3), &green(), PhaseKind::Classical, Permittivity::VACUUM, &k()).unwrap();
        // 9.3e-4 / 9.331e-16 ≈ 0.997e12
        assert!((n as f64 / 1e12 - 1.0).abs() < 0.01, "{n}");
    }

    #[test]
    fn winding_for_lab_quantum() {
        let n = required_winding(5.6e-4, &shell(3e3, 1.5), &laser(1e7), PhaseKind::Quantum, Permittivity::VACUUM, &k()).unwrap();
        assert!((n as f64 / 1e6 - 1.0).abs() < 0.01, "{n}");
    }

    #[test]
    fn winding_edge_cases() {
        let s = shell(1e5, 3.3);
        let per = phase_for(PhaseKind::Classical, &k(), &s, &green(), Permittivity::VACUUM, 1).unwrap().per_pass.value();
        assert_eq!(required_winding(per, &s, &green(), PhaseKind::Classical, Permittivity::VACUUM, &k()).unwrap(), 1);
        assert_eq!(required_winding(per * 0.5, &s, &green(), PhaseKind::Classical, Permittivity::VACUUM, &k()).unwrap(), 1);
        let empty = shell(0.0, 3.3);
        assert!(matches!(
            required_winding(1e-3, &empty, &green(), PhaseKind::Classical, Permittivity::VACUUM, &k()),
            Err(Error::Infeasible(_))
        ));
        assert!(required_winding(0.0, &s, &green(), PhaseKind::Classical, Permittivity::VACUUM, &k()).is_err());
        assert!(required_winding(1e30, &s, &green(), PhaseKind::Classical, Permittivity::VACUUM, &k()).is_err());
    }

    #[test]
    fn durations_match_quoted_figures() {
        let lc = paper_scenario("lab-classical", &k()).unwrap();
        let d = duration_estimate(&lc, &k()).unwrap().value();
        assert!((d - 5.4e4).abs() / 5.4e4 < 0.01, "{d}");
        assert!((d / 3600.0 - 15.0).abs() < 0.1);
        let lq = paper_scenario("lab-quantum", &k()).unwrap();
        let d = duration_estimate(&lq, &k()).unwrap().value();
        assert!((d - 0.1).abs() < 0.001, "{d}");
    }

    #[test]
    fn zero_winding_scenario_rejected() {
        let mut s = paper_scenario("lab-classical", &k()).unwrap();
        s.winding = 0;
        assert!(duration_estimate(&s, &k()).is_err());
        assert!(Scenario::new("x", shell(1.0, 1.0), green(), 1, PhaseKind::Classical, Length::new(1.0).unwrap()).is_err());
    }

    #[test]
    fn loss_floor_examples() {
        assert_eq!(loss_floor(1, 4, 1.0).unwrap(), 1.0);
        let d12 = loss_deficit(1_000_000_000_000, 4, 0.5).unwrap();
        assert!((d12 - 8.66e-14).abs() < 0.01e-14, "{d12}");
        let d6 = loss_deficit(1_000_000, 4, 0.5).unwrap();
        assert!((d6 - 8.66e-8).abs() < 0.01e-8, "{d6}");
        // Oracle: 1 - r from the series of exp around 0.
        let x = 2f64.ln() / 8e6;
        assert!((d6 - (x - x * x / 2.0)).abs() < 1e-20);
        let r = loss_floor(1_000_000, 4, 0.5).unwrap();
        assert!((r.powf(8e6) - 0.5).abs() < 1e-8);
        assert!(loss_floor(1, 4, 0.0).is_err());
        assert!(loss_floor(1, 4, 1.5).is_err());
    }

    #[test]
    fn paper_scenarios_land_in_milliradian_band() {
        let all = paper_scenarios(&k()).unwrap();
        assert_eq!(all.len(), 3);
        for (s, d) in &all {
            let phi = d.phase.phase.value();
            assert!((1e-4..=1e-2).contains(&phi), "{} {phi}", s.name);
            assert_eq!(d.duration.value(), s.winding as f64 * s.cycle_path_length.value() / k().c);
        }
        let (astro, da) = &all[0];
        assert_eq!(astro.winding, 1);
        assert!((da.phase.phase.value() - 9.33e-3).abs() < 0.01e-3);
        assert!(!da.feasible);
        let (_, dc) = &all[1];
        assert!((dc.phase.phase.value() - 9.33e-4).abs() < 0.01e-4);
        assert!((1e4..=1e5).contains(&dc.duration.value()));
        assert!(!dc.feasible);
        let (_, dq) = &all[2];
        assert!((dq.phase.phase.value() - 5.6e-4).abs() < 0.05e-4);
        assert!((1e-2..2e-1).contains(&dq.duration.value()));
    }

    #[test]
    fn unknown_scenario_lists_names() {
        let err = paper_scenario("moon", &k()).unwrap_err().to_string();
        for n in PAPER_SCENARIO_NAMES {
            assert!(err.contains(n));
        }
    }

    #[test]
    fn winding_sweep_is_monotone() {
        let base = paper_scenario("lab-quantum", &k()).unwrap();
        let vals = sweep_values(1e3, 1e9, 7, SweepScale::Log).unwrap();
        assert_eq!(vals, [1e3, 1e4, 1e5, 1e6, 1e7, 1e8, 1e9]);
        let rows = sweep(&base, SweepParam::Winding, &vals, &k()).unwrap();
        assert_eq!(rows.len(), 7);
        for w in rows.windows(2) {
            assert!(w[1].phase > w[0].phase);
            assert!(w[1].duration > w[0].duration);
            assert!(w[1].loss_floor > w[0].loss_floor);
        }
        assert!(SweepParam::parse("nope").is_err());
        assert_eq!(SweepParam::parse("mass").unwrap(), SweepParam::Mass);
        assert!(SweepParam::Winding.apply(&base, 2.5, &k()).is_err());
    }

    proptest! {
        #[test]
        fn inversion_is_tight(target in 1e-6f64..1e-1, mass in 1e2f64..1e7) {
            let s = shell(mass, 2.0);
            let n = required_winding(target, &s, &green(), PhaseKind::Classical, Permittivity::VACUUM, &k()).unwrap();
            let at = |w: u64| phase_for(PhaseKind::Classical, &k(), &s, &green(), Permittivity::VACUUM, w).unwrap().phase.value();
            prop_assert!(at(n) >= target);
            if n > 1 {
                prop_assert!(at(n - 1) < target);
            }
        }

        #[test]
        fn winding_weakly_decreasing_in_mass_and_photons(m in 1e2f64..1e6, f in 1.0f64..10.0, nb in 1e3f64..1e8) {
            let w = |mass: f64, n: f64| {
                required_winding(1e-3, &shell(mass, 1.5), &laser(n), PhaseKind::Quantum, Permittivity::VACUUM, &k()).unwrap()
            };
            prop_assert!(w(m * f, nb) <= w(m, nb));
            prop_assert!(w(m, nb * f) <= w(m, nb));
        }

        #[test]
        fn duration_linear_in_winding(n in 1u64..1_000_000_000) {
            let mut s = paper_scenario("lab-quantum", &k()).unwrap();
            s.winding = n;
            let d1 = duration_estimate(&s, &k()).unwrap().value();
            s.winding = 2 * n;
            let d2 = duration_estimate(&s, &k()).unwrap().value();
            prop_assert!((d2 - 2.0 * d1).abs() <= 1e-15 * d2);
        }
    }
}
