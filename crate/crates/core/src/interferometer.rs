//! Circulating Mach-Zehnder interferometer.
//!
//! Each arm is a closed loop of straight segments between mirrors. The
//! pulse enters an arm at the `from` mirror of segment 0 (the entry slot,
//! closed by inserting that mirror once the pulse is inside) and leaves at
//! the `to` mirror of segment 0 (the exit mirror, removed after the last
//! reflection). With winding number `n` the pulse crosses segment 0 `n`
//! times and every other segment `n - 1` times.
//!
//! ```text
//!          m11 ─────── m12
//!           │           │
//!        (shell)        │       upper loop: m14 → m11 → m12 → m13 → m14
//!           │           │
//!  BS1 ──> m14 ─────── m13
//! ```
//!
//! Dynamical phases are reported relative to the shorter arm's geometric
//! path; the common part is about `k·n·L ~ 1e20 rad` and cancels exactly in
//! the difference, so carrying it would only destroy precision.

use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::{phase_for, LightPulse, PhaseKind, ShellSpec, ShellWarning};
use crate::units::{Length, Permittivity, PhysConstants, Quantity, Time};

/// Relative tolerance on the shell segment being `2R` long.
const SHELL_LENGTH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentTag {
    Free,
    ThroughShell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSegment {
    pub from: String,
    pub to: String,
    pub length: Length,
    pub tag: SegmentTag,
    /// Distance from the shell centre for free segments that run through
    /// its exterior potential `-GM/r`.
    pub shell_distance: Option<Length>,
}

impl PathSegment {
    pub fn free(from: &str, to: &str, length: Length) -> Self {
        Self {
            from: from.into(),
            to: to.into(),
            length,
            tag: SegmentTag::Free,
            shell_distance: None,
        }
    }

    pub fn through_shell(from: &str, to: &str, length: Length) -> Self {
        Self {
            tag: SegmentTag::ThroughShell,
            ..Self::free(from, to, length)
        }
    }

    pub fn near_shell(mut self, distance: Length) -> Self {
        self.shell_distance = Some(distance);
        self
    }

    pub fn label(&self) -> String {
        format!("{}-{}", self.from, self.to)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Upper,
    Lower,
}

impl Arm {
    pub const BOTH: [Arm; 2] = [Arm::Upper, Arm::Lower];
}

impl std::fmt::Display for Arm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Arm::Upper => "upper",
            Arm::Lower => "lower",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterferometerLayout {
    pub upper_arm: Vec<PathSegment>,
    pub lower_arm: Vec<PathSegment>,
    pub shell: ShellSpec,
    /// Intensity reflectance of both beam splitters.
    pub bs_split_ratio: f64,
    /// Amplitude retained per mirror reflection.
    pub mirror_loss: f64,
    pub m1_bs1_distance: Length,
    pub permittivity: Permittivity,
}

impl InterferometerLayout {
    /// The reconstructed Figure 1 set-up: in each arm the first segment is
    /// `2R` long (through the shell in the upper arm, and between m24 and
    /// m21 at distance `m1_bs1_distance` from the shell in the lower arm),
    /// and the rest of `cycle_path_length` is split over three equal legs.
    pub fn figure_one(shell: ShellSpec, cycle_path_length: Length, m1_bs1_distance: Length) -> Result<Self> {
        let d = 2.0 * shell.radius.value();
        let rest = cycle_path_length.value() - d;
        if rest < 0.0 {
            return Err(Error::Inconsistent(format!(
                "cycle path length {} is shorter than the shell diameter {d:e} m",
                cycle_path_length
            )));
        }
        let leg = Length::new(rest / 3.0)?;
        let diameter = Length::new(d)?;
        let upper_arm = vec![
            PathSegment::through_shell("m14", "m11", diameter),
            PathSegment::free("m11", "m12", leg),
            PathSegment::free("m12", "m13", leg),
            PathSegment::free("m13", "m14", leg),
        ];
        let lower_arm = vec![
            PathSegment::free("m24", "m21", diameter).near_shell(m1_bs1_distance),
            PathSegment::free("m21", "m22", leg),
            PathSegment::free("m22", "m23", leg),
            PathSegment::free("m23", "m24", leg),
        ];
        let layout = Self {
            upper_arm,
            lower_arm,
            shell,
            bs_split_ratio: 0.5,
            mirror_loss: 1.0,
            m1_bs1_distance,
            permittivity: Permittivity::VACUUM,
        };
        layout.validate()?;
        Ok(layout)
    }

    pub fn arm(&self, arm: Arm) -> &[PathSegment] {
        match arm {
            Arm::Upper => &self.upper_arm,
            Arm::Lower => &self.lower_arm,
        }
    }

    /// The same layout with the arms exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            upper_arm: self.lower_arm.clone(),
            lower_arm: self.upper_arm.clone(),
            ..self.clone()
        }
    }

    pub fn loop_length(&self, arm: Arm) -> f64 {
        self.arm(arm).iter().map(|s| s.length.value()).sum()
    }

    /// Checks the invariants and returns the arm holding the shell.
    pub fn validate(&self) -> Result<Arm> {
        if !(self.bs_split_ratio > 0.0 && self.bs_split_ratio < 1.0) {
            return Err(Error::invalid("beam splitter ratio", self.bs_split_ratio, "must lie in (0, 1)"));
        }
        if !(self.mirror_loss > 0.0 && self.mirror_loss <= 1.0) {
            return Err(Error::invalid("mirror loss", self.mirror_loss, "must lie in (0, 1]"));
        }
        if self.permittivity.value() <= 0.0 {
            return Err(Error::invalid("eps0", self.permittivity.value(), "must be > 0"));
        }
        let mut shell_arm = None;
        for arm in Arm::BOTH {
            let segs = self.arm(arm);
            if segs.len() < 3 {
                return Err(Error::Inconsistent(format!(
                    "{arm} arm has {} segments; a loop needs at least 3",
                    segs.len()
                )));
            }
            for (i, s) in segs.iter().enumerate() {
                let next = &segs[(i + 1) % segs.len()];
                if s.to != next.from {
                    return Err(Error::Inconsistent(format!(
                        "{arm} arm is not a closed loop: {} is followed by {}",
                        s.label(),
                        next.label()
                    )));
                }
                if let Some(r) = s.shell_distance {
                    if r.value() <= 0.0 {
                        return Err(Error::invalid("shell distance", r.value(), "must be > 0"));
                    }
                }
                if s.tag == SegmentTag::ThroughShell {
                    if shell_arm.is_some() {
                        return Err(Error::Inconsistent(
                            "more than one segment passes through the shell".into(),
                        ));
                    }
                    let d = 2.0 * self.shell.radius.value();
                    if (s.length.value() - d).abs() > SHELL_LENGTH_TOL * d {
                        return Err(Error::Inconsistent(format!(
                            "shell segment {} is {} long, expected 2R = {d:e} m",
                            s.label(),
                            s.length
                        )));
                    }
                    shell_arm = Some(arm);
                }
            }
            if self.loop_length(arm) <= 0.0 {
                return Err(Error::Inconsistent(format!("{arm} loop has zero length")));
            }
        }
        let mut names: Vec<&str> = self.upper_arm.iter().chain(&self.lower_arm).map(|s| s.from.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Inconsistent("a mirror name appears twice".into()));
        }
        shell_arm.ok_or_else(|| Error::Inconsistent("no segment passes through the shell".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MirrorAction {
    Insert,
    Remove,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MirrorOperation {
    pub mirror: String,
    pub action: MirrorAction,
    /// Cycle `k ≥ 1` starts when the pulse enters segment 0 for the k-th
    /// time; cycle 0 is the time before the pulse reaches the loop.
    pub cycle: u64,
    /// Fraction of the loop already travelled by the pulse when the
    /// operation happens. Defaults to the middle of the first segment that
    /// does not touch the mirror.
    pub at: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MirrorSchedule {
    pub winding: u64,
    pub operations: Vec<MirrorOperation>,
}

impl MirrorSchedule {
    /// Insert each entry mirror in cycle 1 and remove each exit mirror in
    /// cycle `n - 1`, between the last reflection and the final arrival.
    pub fn standard(layout: &InterferometerLayout, winding: u64) -> Result<Self> {
        if winding == 0 {
            return Err(Error::invalid("winding number", 0.0, "must be >= 1"));
        }
        let mut operations = Vec::new();
        for arm in Arm::BOTH {
            let segs = layout.arm(arm);
            operations.push(MirrorOperation {
                mirror: segs[0].from.clone(),
                action: MirrorAction::Insert,
                cycle: 1,
                at: None,
            });
        }
        for arm in Arm::BOTH {
            let segs = layout.arm(arm);
            operations.push(MirrorOperation {
                mirror: segs[0].to.clone(),
                action: MirrorAction::Remove,
                cycle: winding - 1,
                at: None,
            });
        }
        Ok(Self { winding, operations })
    }

    pub fn operation_mut(&mut self, mirror: &str) -> Option<&mut MirrorOperation> {
        self.operations.iter_mut().find(|o| o.mirror == mirror)
    }
}

/// Where the pulse is in one arm at a given time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulsePosition {
    /// Between M1 and the loop entry.
    Feed,
    /// On `segment` during cycle `cycle`.
    Segment { cycle: u64, segment: usize },
    /// Out of the loop, towards BS2.
    Exited,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingEvent {
    /// Seconds after the pulse leaves M1.
    pub time: f64,
    pub arm: Arm,
    pub mirror: String,
    pub action: MirrorAction,
    pub cycle: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseEventKind {
    Enter,
    Reflect,
    Exit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseEvent {
    pub time: f64,
    pub arm: Arm,
    pub mirror: String,
    pub kind: PulseEventKind,
    pub cycle: u64,
}

#[derive(Debug, Clone, PartialEq)]
struct ArmTiming {
    arm: Arm,
    lengths: Vec<f64>,
    mirrors: Vec<String>,
    loop_length: f64,
    entry_time: f64,
}

impl ArmTiming {
    fn new(layout: &InterferometerLayout, arm: Arm, c: f64) -> Self {
        let segs = layout.arm(arm);
        Self {
            arm,
            lengths: segs.iter().map(|s| s.length.value()).collect(),
            mirrors: segs.iter().map(|s| s.from.clone()).collect(),
            loop_length: layout.loop_length(arm),
            entry_time: layout.m1_bs1_distance.value() / c,
        }
    }

    /// Distance travelled inside the loop before exiting.
    fn in_loop_distance(&self, winding: u64) -> f64 {
        (winding - 1) as f64 * self.loop_length + self.lengths[0]
    }

    fn mirror_index(&self, name: &str) -> Option<usize> {
        self.mirrors.iter().position(|m| m == name)
    }

    /// Distance along the loop at which segment `i` starts.
    fn offset(&self, i: usize) -> f64 {
        self.lengths[..i].iter().sum()
    }

    fn default_fraction(&self, mirror: usize) -> f64 {
        let n = self.lengths.len();
        let seg = (mirror + 1) % n;
        (self.offset(seg) + 0.5 * self.lengths[seg]) / self.loop_length
    }

    fn position(&self, travelled: f64, winding: u64) -> PulsePosition {
        if travelled < 0.0 {
            return PulsePosition::Feed;
        }
        if travelled >= self.in_loop_distance(winding) {
            return PulsePosition::Exited;
        }
        let cycle = (travelled / self.loop_length).floor();
        let mut within = travelled - cycle * self.loop_length;
        let mut segment = self.lengths.len() - 1;
        for (i, l) in self.lengths.iter().enumerate() {
            if within < *l {
                segment = i;
                break;
            }
            within -= l;
        }
        PulsePosition::Segment {
            cycle: cycle as u64 + 1,
            segment,
        }
    }
}

/// Validated schedule with the pulse history of both arms.
#[derive(Debug, Clone, PartialEq)]
pub struct Timeline {
    pub winding: u64,
    pub mirror_events: Vec<TimingEvent>,
    arms: [ArmTiming; 2],
    c: f64,
}

impl Timeline {
    /// Reflections suffered by the pulse in `arm`.
    pub fn reflections(&self, arm: Arm) -> u64 {
        self.arm(arm).lengths.len() as u64 * (self.winding - 1)
    }

    fn arm(&self, arm: Arm) -> &ArmTiming {
        &self.arms[arm as usize]
    }

    /// Time at which the pulse leaves `arm`.
    pub fn exit_time(&self, arm: Arm) -> f64 {
        let a = self.arm(arm);
        a.entry_time + a.in_loop_distance(self.winding) / self.c
    }

    pub fn pulse_position(&self, arm: Arm, time: f64) -> PulsePosition {
        let a = self.arm(arm);
        a.position((time - a.entry_time) * self.c, self.winding)
    }

    fn pulse_event_count(&self, arm: Arm) -> u64 {
        2 + self.reflections(arm)
    }

    /// Mirror operations plus pulse events in both arms.
    pub fn len(&self) -> u64 {
        self.mirror_events.len() as u64 + Arm::BOTH.iter().map(|&a| self.pulse_event_count(a)).sum::<u64>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Entry, every reflection and the exit of the pulse in `arm`,
    /// generated on demand.
    pub fn pulse_events(&self, arm: Arm) -> impl Iterator<Item = PulseEvent> + '_ {
        let a = self.arm(arm);
        let n = a.lengths.len() as u64;
        let total = self.pulse_event_count(arm);
        (0..total).map(move |idx| {
            if idx == 0 {
                return PulseEvent {
                    time: a.entry_time,
                    arm,
                    mirror: a.mirrors[0].clone(),
                    kind: PulseEventKind::Enter,
                    cycle: 1,
                };
            }
            if idx == total - 1 {
                return PulseEvent {
                    time: a.entry_time + a.in_loop_distance(self.winding) / self.c,
                    arm,
                    mirror: a.mirrors[1 % a.mirrors.len()].clone(),
                    kind: PulseEventKind::Exit,
                    cycle: self.winding,
                };
            }
            // Reflection r (0-based) ends segment (r % n) of cycle r / n + 1.
            let r = idx - 1;
            let cycle = r / n;
            let seg = (r % n) as usize;
            let dist = cycle as f64 * a.loop_length + a.offset(seg + 1);
            PulseEvent {
                time: a.entry_time + dist / self.c,
                arm,
                mirror: a.mirrors[(seg + 1) % a.mirrors.len()].clone(),
                kind: PulseEventKind::Reflect,
                cycle: cycle + 1,
            }
        })
    }
}

/// Check every mirror operation against the pulse trajectory.
///
/// A mirror may not move while the pulse is on a segment ending or starting
/// at it. The entry mirror must close the loop after the pulse is in and
/// before it comes back; the exit mirror must go after the last reflection
/// and before the final arrival.
pub fn validate_schedule(
    layout: &InterferometerLayout,
    schedule: &MirrorSchedule,
    consts: &PhysConstants,
) -> Result<Timeline> {
    layout.validate()?;
    let n = schedule.winding;
    if n == 0 {
        return Err(Error::invalid("winding number", 0.0, "must be >= 1"));
    }
    let c = consts.c;
    let arms = [ArmTiming::new(layout, Arm::Upper, c), ArmTiming::new(layout, Arm::Lower, c)];
    let mut events = Vec::new();
    let mut seen = Vec::new();
    for op in &schedule.operations {
        let (a, idx) = arms
            .iter()
            .find_map(|a| a.mirror_index(&op.mirror).map(|i| (a, i)))
            .ok_or_else(|| Error::Inconsistent(format!("unknown mirror `{}`", op.mirror)))?;
        let conflict = |reason: String| Error::TimingConflict {
            mirror: op.mirror.clone(),
            cycle: op.cycle,
            reason,
        };
        let expected = match idx {
            0 => MirrorAction::Insert,
            1 => MirrorAction::Remove,
            _ => {
                return Err(Error::Inconsistent(format!(
                    "mirror `{}` is fixed and cannot be moved",
                    op.mirror
                )))
            }
        };
        if op.action != expected {
            return Err(Error::Inconsistent(format!(
                "mirror `{}` can only be {}",
                op.mirror,
                if expected == MirrorAction::Insert { "inserted" } else { "removed" }
            )));
        }
        if seen.contains(&op.mirror) {
            return Err(Error::Inconsistent(format!("mirror `{}` is scheduled twice", op.mirror)));
        }
        seen.push(op.mirror.clone());

        let fraction = op.at.unwrap_or_else(|| a.default_fraction(idx));
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::invalid("operation loop fraction", fraction, "must lie in [0, 1)"));
        }
        // Loop distance travelled by the pulse when the mirror moves;
        // cycle 0 is the feed path, before the loop.
        let travelled = if op.cycle == 0 {
            -a.entry_time * c * (1.0 - fraction)
        } else {
            ((op.cycle - 1) as f64 + fraction) * a.loop_length
        };
        let time = a.entry_time + travelled / c;

        if let PulsePosition::Segment { cycle, segment } = a.position(travelled, n) {
            let m = a.mirrors.len();
            if segment == idx || (segment + 1) % m == idx {
                return Err(conflict(format!(
                    "pulse is on segment {}-{} of cycle {cycle}",
                    a.mirrors[segment],
                    a.mirrors[(segment + 1) % m]
                )));
            }
        }
        match op.action {
            MirrorAction::Insert => {
                if travelled <= 0.0 {
                    return Err(conflict("inserted before the pulse has entered the loop".into()));
                }
                if n > 1 && travelled >= a.loop_length {
                    return Err(conflict("the pulse returned to the entry slot before the insertion".into()));
                }
            }
            MirrorAction::Remove => {
                let arrival = |k: u64| (k - 1) as f64 * a.loop_length + a.lengths[0];
                if n > 1 && travelled <= arrival(n - 1) {
                    return Err(conflict(format!(
                        "removed before reflection {} of {}",
                        n - 1,
                        n - 1
                    )));
                }
                if travelled >= arrival(n) {
                    return Err(conflict(format!("removed after arrival {n}; the pulse keeps circulating")));
                }
            }
        }
        events.push(TimingEvent {
            time,
            arm: a.arm,
            mirror: op.mirror.clone(),
            action: op.action,
            cycle: op.cycle,
        });
    }
    for a in &arms {
        for (idx, what) in [(0usize, "inserted"), (1usize, "removed")] {
            if !seen.contains(&a.mirrors[idx]) {
                return Err(Error::Inconsistent(format!(
                    "mirror `{}` is never {what}",
                    a.mirrors[idx]
                )));
            }
        }
    }
    events.sort_by(|x, y| x.time.total_cmp(&y.time));
    Ok(Timeline {
        winding: n,
        mirror_events: events,
        arms,
        c,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortIntensities {
    pub bright: f64,
    pub dark: f64,
}

/// Output of the second beam splitter for arm amplitudes `t_u`, `t_l`,
/// split ratio `s` and phase difference `phi` (upper minus lower).
pub fn port_intensities(s: f64, t_upper: f64, t_lower: f64, phi: f64) -> PortIntensities {
    let half = (0.5 * phi).sin();
    let dt = t_upper - t_lower;
    let dark = s * (1.0 - s) * (dt * dt + 4.0 * t_upper * t_lower * half * half);
    let bright = s * s * t_upper * t_upper
        + (1.0 - s) * (1.0 - s) * t_lower * t_lower
        + 2.0 * s * (1.0 - s) * t_upper * t_lower * phi.cos();
    PortIntensities { bright, dark }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    pub kind: PhaseKind,
    pub winding: u64,
    pub shell_arm: Arm,
    /// Signed: positive when the shell is in the upper arm.
    pub topological_phase: f64,
    pub dynamical_phase_upper: f64,
    pub dynamical_phase_lower: f64,
    pub net_phase: f64,
    pub port_intensities: PortIntensities,
    /// Amplitude retained in each arm, `mirror_loss^reflections`.
    pub arm_transmission: [f64; 2],
    pub split_ratio: f64,
    /// `I_bright + I_dark`.
    pub throughput: f64,
    /// Dark-port fringe amplitude relative to the input, `4s(1-s)·t_u·t_l`.
    pub visibility: f64,
    pub reflections: u64,
    pub total_duration: Time,
    pub mean_photons: Option<f64>,
    /// `(bright, dark)` expected photon counts.
    pub expected_counts: Option<(f64, f64)>,
    pub warnings: Vec<String>,
}

impl SimOutcome {
    /// Port intensities with an extra phase `delta` added to the net phase.
    pub fn intensities_at(&self, delta: f64) -> PortIntensities {
        port_intensities(
            self.split_ratio,
            self.arm_transmission[0],
            self.arm_transmission[1],
            self.net_phase + delta,
        )
    }
}

/// `per_pass · L / (2r)` summed over the traversals of segments that run
/// through the exterior potential.
fn exterior_phase(seg: &PathSegment, per_pass: f64, radius: f64, traversals: f64) -> f64 {
    match (seg.tag, seg.shell_distance) {
        (SegmentTag::Free, Some(r)) => {
            traversals * per_pass * (radius / r.value()) * seg.length.value() / (2.0 * radius)
        }
        _ => 0.0,
    }
}

fn traversals(index: usize, winding: u64) -> f64 {
    if index == 0 {
        winding as f64
    } else {
        (winding - 1) as f64
    }
}

pub fn run_pulse(
    layout: &InterferometerLayout,
    schedule: &MirrorSchedule,
    pulse: &LightPulse,
    mode: PhaseKind,
    consts: &PhysConstants,
) -> Result<SimOutcome> {
    let shell_arm = layout.validate()?;
    let timeline = validate_schedule(layout, schedule, consts)?;
    let n = schedule.winding;
    let per_pass = phase_for(mode, consts, &layout.shell, pulse, layout.permittivity, 1)?
        .per_pass
        .value();
    let sign = match shell_arm {
        Arm::Upper => 1.0,
        Arm::Lower => -1.0,
    };
    let topological = sign * per_pass * n as f64;

    let k = TAU * layout.permittivity.value().sqrt() / pulse.wavelength.value();
    let radius = layout.shell.radius.value();
    let up = &layout.upper_arm;
    let lo = &layout.lower_arm;
    // Path difference upper minus lower, paired segment by segment so that
    // matched segments cancel before any scaling.
    let path_diff = if up.len() == lo.len() {
        up.iter()
            .zip(lo)
            .enumerate()
            .map(|(i, (u, l))| traversals(i, n) * (u.length.value() - l.length.value()))
            .sum::<f64>()
    } else {
        let total = |segs: &[PathSegment]| -> f64 {
            segs.iter().enumerate().map(|(i, s)| traversals(i, n) * s.length.value()).sum()
        };
        total(up) - total(lo)
    };
    let exterior = |segs: &[PathSegment]| -> f64 {
        segs.iter()
            .enumerate()
            .map(|(i, s)| exterior_phase(s, per_pass, radius, traversals(i, n)))
            .sum()
    };
    let dyn_upper = k * path_diff.max(0.0) + exterior(up);
    let dyn_lower = k * (-path_diff).max(0.0) + exterior(lo);
    let net = topological + (dyn_upper - dyn_lower);

    let r = layout.mirror_loss;
    let refl_u = timeline.reflections(Arm::Upper);
    let refl_l = timeline.reflections(Arm::Lower);
    let amp = |refl: u64| if r == 1.0 { 1.0 } else { (refl as f64 * r.ln()).exp() };
    let t_u = amp(refl_u);
    let t_l = amp(refl_l);
    let s = layout.bs_split_ratio;
    let ports = port_intensities(s, t_u, t_l, net);
    let throughput = s * t_u * t_u + (1.0 - s) * t_l * t_l;
    let visibility = 4.0 * s * (1.0 - s) * t_u * t_l;

    let mut warnings = Vec::new();
    for w in layout.shell.warnings(consts) {
        warnings.push(match w {
            ShellWarning::Degenerate => "shell mass is zero; every gravitational phase vanishes".to_string(),
            ShellWarning::ThickShell => "shell is not thin compared to its radius".to_string(),
            ShellWarning::StrongField => "GM/(Rc^2) is outside the weak-field regime".to_string(),
        });
    }
    if r < 1.0 && throughput < f64::MIN_POSITIVE {
        warnings.push(format!(
            "throughput underflows: mirror_loss^(2*{}) = exp({:e}); no light reaches the detectors",
            refl_u.max(refl_l),
            2.0 * refl_u.max(refl_l) as f64 * r.ln()
        ));
    } else if visibility < 0.5 {
        warnings.push(format!("fringe visibility {visibility:e} is below 0.5"));
    }

    let mean_photons = pulse.mean_photons.map(|p| p.value());
    let expected_counts = mean_photons.map(|nb| (nb * ports.bright, nb * ports.dark));
    let duration = timeline.exit_time(Arm::Upper).max(timeline.exit_time(Arm::Lower));
    Ok(SimOutcome {
        kind: mode,
        winding: n,
        shell_arm,
        topological_phase: topological,
        dynamical_phase_upper: dyn_upper,
        dynamical_phase_lower: dyn_lower,
        net_phase: net,
        port_intensities: ports,
        arm_transmission: [t_u, t_l],
        split_ratio: s,
        throughput,
        visibility,
        reflections: refl_u.max(refl_l),
        total_duration: Time::new(duration)?,
        mean_photons,
        expected_counts,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CancellationReport {
    /// Dynamical phase difference (upper minus lower) per loop traversal.
    pub residual_per_cycle: f64,
    /// Signed topological phase per pass.
    pub topological_per_cycle: f64,
    /// `|residual| / |topological|`; `None` when the topological phase is 0.
    pub ratio: Option<f64>,
    /// Segment pair with the largest contribution, `upper vs lower`.
    pub dominant_segment: String,
    pub dominant_contribution: f64,
}

/// Per-cycle dynamical phase mismatch between the arms and where it comes
/// from. Segments are paired by position in their loops.
pub fn dynamical_cancellation_report(
    layout: &InterferometerLayout,
    pulse: &LightPulse,
    mode: PhaseKind,
    consts: &PhysConstants,
) -> Result<CancellationReport> {
    let shell_arm = layout.validate()?;
    let per_pass = phase_for(mode, consts, &layout.shell, pulse, layout.permittivity, 1)?
        .per_pass
        .value();
    let k = TAU * layout.permittivity.value().sqrt() / pulse.wavelength.value();
    let radius = layout.shell.radius.value();
    let seg_phase = |s: Option<&PathSegment>| -> (f64, f64) {
        s.map(|s| (s.length.value(), exterior_phase(s, per_pass, radius, 1.0)))
            .unwrap_or((0.0, 0.0))
    };
    let pairs = layout.upper_arm.len().max(layout.lower_arm.len());
    let mut residual = 0.0;
    let mut dominant = (String::new(), 0.0f64);
    for i in 0..pairs {
        let u = layout.upper_arm.get(i);
        let l = layout.lower_arm.get(i);
        let (lu, gu) = seg_phase(u);
        let (ll, gl) = seg_phase(l);
        let contribution = k * (lu - ll) + (gu - gl);
        residual += contribution;
        if i == 0 || contribution.abs() > dominant.1.abs() {
            let name = |s: Option<&PathSegment>| s.map(|s| s.label()).unwrap_or_else(|| "-".into());
            dominant = (format!("{} vs {}", name(u), name(l)), contribution);
        }
    }
    let top = match shell_arm {
        Arm::Upper => per_pass,
        Arm::Lower => -per_pass,
    };
    Ok(CancellationReport {
        residual_per_cycle: residual,
        topological_per_cycle: top,
        ratio: (per_pass != 0.0).then(|| residual.abs() / per_pass.abs()),
        dominant_segment: dominant.0,
        dominant_contribution: dominant.1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotCounts {
    pub shot: u64,
    pub bright: u64,
    pub dark: u64,
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> Result<u64> {
    if mean == 0.0 {
        return Ok(0);
    }
    let d = Poisson::new(mean).map_err(|_| Error::invalid("Poisson mean", mean, "must be finite and >= 0"))?;
    Ok(d.sample(rng) as u64)
}

/// Photon counts of shot `shot`. Each shot draws from its own ChaCha
/// stream of `seed`, so shots can be sampled in any order or in parallel.
pub fn sample_shot(outcome: &SimOutcome, pulse: &LightPulse, seed: u64, shot: u64) -> Result<ShotCounts> {
    let nbar = pulse
        .mean_photons
        .ok_or(Error::Missing("pulse mean photon number"))?
        .value();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shot);
    let bright = poisson(&mut rng, nbar * outcome.port_intensities.bright)?;
    let dark = poisson(&mut rng, nbar * outcome.port_intensities.dark)?;
    Ok(ShotCounts { shot, bright, dark })
}

/// `(bright, dark)` counts of shot 0.
pub fn sample_counts(outcome: &SimOutcome, pulse: &LightPulse, seed: u64) -> Result<(u64, u64)> {
    let c = sample_shot(outcome, pulse, seed, 0)?;
    Ok((c.bright, c.dark))
}

pub fn sample_shots(outcome: &SimOutcome, pulse: &LightPulse, seed: u64, shots: u64) -> Result<Vec<ShotCounts>> {
    (0..shots).map(|s| sample_shot(outcome, pulse, seed, s)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringePoint {
    pub delta: f64,
    pub bright: f64,
    pub dark: f64,
}

/// Port intensities for `points` extra phases evenly spaced over `[0, 2π]`.
pub fn fringe_sweep(outcome: &SimOutcome, points: usize) -> Vec<FringePoint> {
    let denom = points.saturating_sub(1).max(1) as f64;
    (0..points)
        .map(|i| {
            let delta = TAU * i as f64 / denom;
            let p = outcome.intensities_at(delta);
            FringePoint {
                delta,
                bright: p.bright,
                dark: p.dark,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::classical_phase;
    use crate::units::{default_constants, Mass, PhotonNumber};
    use proptest::prelude::*;

    fn k() -> PhysConstants {
        default_constants()
    }

    fn lab_shell() -> ShellSpec {
        ShellSpec::new(Mass::new(1e5).unwrap(), Length::new(3.3).unwrap()).unwrap()
    }

    fn lab_layout(shell: ShellSpec) -> InterferometerLayout {
        InterferometerLayout::figure_one(shell, Length::new(16.2).unwrap(), Length::new(3.3e3).unwrap()).unwrap()
    }

    fn green() -> LightPulse {
        LightPulse::classical(Length::parse("5000 Å").unwrap(), &k()).unwrap()
    }

    /// Layout with every pair matched and no exterior potential.
    fn matched(shell: ShellSpec) -> InterferometerLayout {
        let mut l = lab_layout(shell);
        l.lower_arm[0].shell_distance = None;
        l
    }

    #[test]
    fn minimal_schedule_has_four_mirror_events() {
        let l = lab_layout(lab_shell());
        let s = MirrorSchedule::standard(&l, 1).unwrap();
        let t = validate_schedule(&l, &s, &k()).unwrap();
        assert_eq!(t.mirror_events.len(), 4);
        assert_eq!(t.reflections(Arm::Upper), 0);
        assert_eq!(t.len(), 4 + 2 + 2);
    }

    #[test]
    fn standard_schedules_validate() {
        let l = lab_layout(lab_shell());
        for n in [1, 2, 3, 10, 1_000_000, 1_000_000_000_000] {
            let s = MirrorSchedule::standard(&l, n).unwrap();
            let t = validate_schedule(&l, &s, &k()).unwrap();
            assert_eq!(t.reflections(Arm::Upper), 4 * (n - 1));
        }
    }

    #[test]
    fn early_removal_conflicts() {
        let l = lab_layout(lab_shell());
        let mut s = MirrorSchedule::standard(&l, 5).unwrap();
        s.operation_mut("m11").unwrap().cycle = 3;
        match validate_schedule(&l, &s, &k()) {
            Err(Error::TimingConflict { mirror, cycle, .. }) => {
                assert_eq!(mirror, "m11");
                assert_eq!(cycle, 3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn late_removal_and_late_insertion_conflict() {
        let l = lab_layout(lab_shell());
        let mut s = MirrorSchedule::standard(&l, 5).unwrap();
        s.operation_mut("m21").unwrap().cycle = 5;
        assert!(matches!(validate_schedule(&l, &s, &k()), Err(Error::TimingConflict { .. })));
        let mut s = MirrorSchedule::standard(&l, 5).unwrap();
        s.operation_mut("m14").unwrap().cycle = 2;
        assert!(matches!(validate_schedule(&l, &s, &k()), Err(Error::TimingConflict { .. })));
        let mut s = MirrorSchedule::standard(&l, 5).unwrap();
        s.operation_mut("m14").unwrap().cycle = 0;
        assert!(matches!(validate_schedule(&l, &s, &k()), Err(Error::TimingConflict { .. })));
    }

    #[test]
    fn operation_next_to_pulse_conflicts() {
        let l = lab_layout(lab_shell());
        let mut s = MirrorSchedule::standard(&l, 5).unwrap();
        // Pulse on m14-m11, right after entering.
        s.operation_mut("m14").unwrap().at = Some(0.01);
        match validate_schedule(&l, &s, &k()) {
            Err(Error::TimingConflict { reason, .. }) => assert!(reason.contains("m14-m11"), "{reason}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_schedules_rejected() {
        let l = lab_layout(lab_shell());
        let mut s = MirrorSchedule::standard(&l, 3).unwrap();
        s.operations[0].mirror = "m12".into();
        assert!(matches!(validate_schedule(&l, &s, &k()), Err(Error::Inconsistent(_))));
        let mut s = MirrorSchedule::standard(&l, 3).unwrap();
        s.operations.pop();
        assert!(matches!(validate_schedule(&l, &s, &k()), Err(Error::Inconsistent(_))));
        let mut s = MirrorSchedule::standard(&l, 3).unwrap();
        s.operations[0].mirror = "m99".into();
        assert!(validate_schedule(&l, &s, &k()).is_err());
        assert!(MirrorSchedule::standard(&l, 0).is_err());
    }

    #[test]
    fn timeline_is_linear_and_lazy() {
        let l = lab_layout(lab_shell());
        for n in [1u64, 2, 7] {
            let t = validate_schedule(&l, &MirrorSchedule::standard(&l, n).unwrap(), &k()).unwrap();
            let counted: u64 = Arm::BOTH.iter().map(|&a| t.pulse_events(a).count() as u64).sum();
            assert_eq!(t.len(), counted + 4);
            let ev: Vec<_> = t.pulse_events(Arm::Upper).collect();
            assert!(ev.windows(2).all(|w| w[0].time < w[1].time));
            assert_eq!(ev.last().unwrap().kind, PulseEventKind::Exit);
            assert_eq!(ev.last().unwrap().mirror, "m11");
        }
        let big = validate_schedule(&l, &MirrorSchedule::standard(&l, 1_000_000).unwrap(), &k()).unwrap();
        let small = validate_schedule(&l, &MirrorSchedule::standard(&l, 1_000).unwrap(), &k()).unwrap();
        let ratio = (big.len() - 4) as f64 / (small.len() - 4) as f64;
        assert!((ratio - 1000.0).abs() < 1.0);
        let last = big.pulse_events(Arm::Lower).last().unwrap();
        assert_eq!(last.kind, PulseEventKind::Exit);
    }

    #[test]
    fn reflections_are_timed_at_mirrors() {
        let l = lab_layout(lab_shell());
        let t = validate_schedule(&l, &MirrorSchedule::standard(&l, 3).unwrap(), &k()).unwrap();
        let names: Vec<String> = t.pulse_events(Arm::Upper).map(|e| e.mirror).collect();
        assert_eq!(
            names,
            ["m14", "m11", "m12", "m13", "m14", "m11", "m12", "m13", "m14", "m11"]
        );
    }

    #[test]
    fn balanced_massless_interferometer_is_dark() {
        let shell = ShellSpec::new(Mass::ZERO, Length::new(3.3).unwrap()).unwrap();
        let l = matched(shell);
        let out = run_pulse(&l, &MirrorSchedule::standard(&l, 10).unwrap(), &green(), PhaseKind::Classical, &k()).unwrap();
        assert_eq!(out.net_phase, 0.0);
        assert_eq!(out.port_intensities.dark, 0.0);
        assert_eq!(out.port_intensities.bright, 1.0);
        assert!(!out.warnings.is_empty());
    }

    #[test]
    fn lab_classical_scenario() {
        let l = matched(lab_shell());
        let n = 1_000_000_000_000;
        let out = run_pulse(&l, &MirrorSchedule::standard(&l, n).unwrap(), &green(), PhaseKind::Classical, &k()).unwrap();
        let oracle = classical_phase(&k(), &lab_shell(), &green(), Permittivity::VACUUM, n).unwrap();
        assert_eq!(out.topological_phase, oracle.phase.value());
        assert!((out.net_phase - 9.33e-4).abs() < 0.01e-4);
        let expect_dark = (out.net_phase / 2.0).sin().powi(2);
        assert!((out.port_intensities.dark - expect_dark).abs() < 1e-18);
        assert!((out.port_intensities.dark - 2.2e-7).abs() < 0.05e-7);
    }

    #[test]
    fn lossy_mirrors_underflow_with_warning() {
        let mut l = matched(lab_shell());
        l.mirror_loss = 0.999_999;
        let out = run_pulse(
            &l,
            &MirrorSchedule::standard(&l, 1_000_000_000_000).unwrap(),
            &green(),
            PhaseKind::Classical,
            &k(),
        )
        .unwrap();
        assert!(out.throughput < 1e-300);
        assert!(out.warnings.iter().any(|w| w.contains("underflow")), "{:?}", out.warnings);
    }

    #[test]
    fn quantum_mode_needs_photons() {
        let l = lab_layout(lab_shell());
        let s = MirrorSchedule::standard(&l, 2).unwrap();
        assert!(matches!(
            run_pulse(&l, &s, &green(), PhaseKind::Quantum, &k()),
            Err(Error::Missing(_))
        ));
    }

    #[test]
    fn quantum_phase_scales_with_photons_classical_does_not() {
        let l = matched(lab_shell());
        let s = MirrorSchedule::standard(&l, 100).unwrap();
        let lam = Length::parse("5000 Å").unwrap();
        let p1 = LightPulse::laser(lam, PhotonNumber::new(1e6).unwrap(), &k()).unwrap();
        let p2 = LightPulse::laser(lam, PhotonNumber::new(2e6).unwrap(), &k()).unwrap();
        let q1 = run_pulse(&l, &s, &p1, PhaseKind::Quantum, &k()).unwrap().net_phase;
        let q2 = run_pulse(&l, &s, &p2, PhaseKind::Quantum, &k()).unwrap().net_phase;
        assert!((q2 / q1 - 2.0).abs() < 1e-12);
        let c1 = run_pulse(&l, &s, &p1, PhaseKind::Classical, &k()).unwrap().net_phase;
        let c2 = run_pulse(&l, &s, &p2, PhaseKind::Classical, &k()).unwrap().net_phase;
        assert_eq!(c1, c2);
    }

    #[test]
    fn cancellation_report_examples() {
        let matched_report = dynamical_cancellation_report(&matched(lab_shell()), &green(), PhaseKind::Classical, &k()).unwrap();
        assert_eq!(matched_report.residual_per_cycle, 0.0);

        let r = lab_shell().radius.value();
        let ratio_at = |d: f64| {
            let l = InterferometerLayout::figure_one(lab_shell(), Length::new(16.2).unwrap(), Length::new(d).unwrap()).unwrap();
            let rep = dynamical_cancellation_report(&l, &green(), PhaseKind::Classical, &k()).unwrap();
            assert!(rep.dominant_segment.contains("m24-m21"), "{}", rep.dominant_segment);
            rep.ratio.unwrap()
        };
        let near = ratio_at(100.0 * r);
        let far = ratio_at(1000.0 * r);
        assert!((near - 0.01).abs() < 1e-12);
        assert!(far < near);
    }

    #[test]
    fn one_wavelength_mismatch_is_two_pi() {
        // Dyadic lengths keep the arithmetic exact.
        let lam = 2f64.powi(-20);
        let shell = ShellSpec::new(Mass::ZERO, Length::new(0.5).unwrap()).unwrap();
        let mut l = InterferometerLayout::figure_one(shell, Length::new(4.0).unwrap(), Length::new(8.0).unwrap()).unwrap();
        l.lower_arm[0].shell_distance = None;
        l.upper_arm[1].length = Length::new(1.0 + lam).unwrap();
        let p = LightPulse::classical(Length::new(lam).unwrap(), &k()).unwrap();
        let rep = dynamical_cancellation_report(&l, &p, PhaseKind::Classical, &k()).unwrap();
        assert_eq!(rep.residual_per_cycle, TAU);
        assert_eq!(rep.dominant_segment, "m11-m12 vs m21-m22");
    }

    #[test]
    fn exterior_potential_feeds_lower_dynamical_phase() {
        let l = lab_layout(lab_shell());
        let n = 1000;
        let out = run_pulse(&l, &MirrorSchedule::standard(&l, n).unwrap(), &green(), PhaseKind::Classical, &k()).unwrap();
        let per_pass = out.topological_phase / n as f64;
        let expected = per_pass * n as f64 * 3.3 / 3.3e3;
        assert!((out.dynamical_phase_lower - expected).abs() <= 1e-12 * expected);
        assert!(expected > 0.0);
        assert_eq!(out.dynamical_phase_upper, 0.0);
    }

    #[test]
    fn dark_counts_vanish_on_a_dark_fringe() {
        let shell = ShellSpec::new(Mass::ZERO, Length::new(1.5).unwrap()).unwrap();
        let l = matched(shell);
        let p = LightPulse::laser(Length::parse("5000 Å").unwrap(), PhotonNumber::new(1e7).unwrap(), &k()).unwrap();
        let out = run_pulse(&l, &MirrorSchedule::standard(&l, 3).unwrap(), &p, PhaseKind::Quantum, &k()).unwrap();
        for seed in 0..20 {
            let (b, d) = sample_counts(&out, &p, seed).unwrap();
            assert_eq!(d, 0);
            assert!(b > 0);
        }
        assert!(sample_counts(&out, &green(), 0).is_err());
    }

    #[test]
    fn dark_count_mean_matches_expectation() {
        let l = matched(lab_shell());
        let p = LightPulse::laser(Length::parse("5000 Å").unwrap(), PhotonNumber::new(1e7).unwrap(), &k()).unwrap();
        let mut out = run_pulse(&l, &MirrorSchedule::standard(&l, 2).unwrap(), &p, PhaseKind::Quantum, &k()).unwrap();
        out.port_intensities = PortIntensities {
            bright: 1.0 - 2.2e-7,
            dark: 2.2e-7,
        };
        let shots = sample_shots(&out, &p, 42, 10_000).unwrap();
        let mean = shots.iter().map(|s| s.dark as f64).sum::<f64>() / shots.len() as f64;
        assert!((mean - 2.2).abs() / 2.2 < 0.05, "{mean}");
        assert_eq!(shots, sample_shots(&out, &p, 42, 10_000).unwrap());
        assert_eq!(sample_shot(&out, &p, 42, 17).unwrap(), shots[17]);
    }

    #[test]
    fn expected_counts_sum_to_n_times_throughput() {
        let mut l = matched(lab_shell());
        l.mirror_loss = 0.99;
        let p = LightPulse::laser(Length::parse("5000 Å").unwrap(), PhotonNumber::new(1e7).unwrap(), &k()).unwrap();
        let out = run_pulse(&l, &MirrorSchedule::standard(&l, 4).unwrap(), &p, PhaseKind::Quantum, &k()).unwrap();
        let (b, d) = out.expected_counts.unwrap();
        assert!(((b + d) - 1e7 * out.throughput).abs() < 1e-6);
        assert!((out.throughput - 0.99f64.powi(24)).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn lossless_ports_are_unitary(s in 0.01f64..0.99, phi in -20.0f64..20.0) {
            let p = port_intensities(s, 1.0, 1.0, phi);
            prop_assert!((p.bright + p.dark - 1.0).abs() < 1e-12);
            prop_assert!(p.bright >= -1e-15 && p.dark >= 0.0);
        }

        #[test]
        fn topological_phase_linear_in_winding(n in 1u64..1_000_000_000) {
            let l = matched(lab_shell());
            let run = |w: u64| run_pulse(&l, &MirrorSchedule::standard(&l, w).unwrap(), &green(), PhaseKind::Classical, &k()).unwrap();
            prop_assert_eq!(run(2 * n).topological_phase, 2.0 * run(n).topological_phase);
        }

        #[test]
        fn swapping_arms_negates_net_phase(n in 1u64..100_000, d in 10.0f64..1e5) {
            let l = InterferometerLayout::figure_one(lab_shell(), Length::new(16.2).unwrap(), Length::new(d).unwrap()).unwrap();
            let sw = l.swapped();
            let a = run_pulse(&l, &MirrorSchedule::standard(&l, n).unwrap(), &green(), PhaseKind::Classical, &k()).unwrap();
            let b = run_pulse(&sw, &MirrorSchedule::standard(&sw, n).unwrap(), &green(), PhaseKind::Classical, &k()).unwrap();
            prop_assert_eq!(b.net_phase, -a.net_phase);
            prop_assert_eq!(b.shell_arm, Arm::Lower);
        }

        #[test]
        fn fringe_follows_sin_squared(n in 1u64..1_000_000) {
            let l = matched(lab_shell());
            let out = run_pulse(&l, &MirrorSchedule::standard(&l, n).unwrap(), &green(), PhaseKind::Classical, &k()).unwrap();
            for p in fringe_sweep(&out, 97) {
                let want = ((out.net_phase + p.delta) / 2.0).sin().powi(2);
                prop_assert!((p.dark - want).abs() < 1e-12);
            }
        }
    }
}
