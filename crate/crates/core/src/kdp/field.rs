//! Lattice evolution of the Schrödinger-form Maxwell field and its
//! diagnostics.
//!
//! The state is the 10-component ψ of [`super::algebra`] on a periodic grid.
//! Time evolution is
//!
//! ```text
//! ∂_t ψ_F = c β̃_i ∂_i ψ_F - iΩ ψ_F                 (F = first six slots)
//! ∂_t ψ_A = c(∇ψ_9 - m ψ_E) - iΩ_A ψ_A               (A = slots 6..9)
//! ∂_t ψ_9 = -iΩ_A ψ_9
//! ```
//!
//! with `Ω = H_int/ħ`. The first line is the Schrödinger form on the γ
//! sector. The second carries the potentials along so that `H = curl A`
//! keeps holding (it is the E-row of the covariant equation); the last
//! fixes the gauge freedom of `A0`. `Ω_A` is `0` for
//! [`PotentialCoupling::DynamicalSector`] and `Ω` for
//! [`PotentialCoupling::Uniform`].
//!
//! Reductions: every residual is a max-norm, which is order independent.
//! `total_s0` and overlaps are summed sequentially in site order, so every
//! diagnostic is bit-reproducible.

use std::io::{self, BufRead, Write};

use nalgebra::SMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::algebra::{build_matrices, pack_psi, unpack_psi, FieldVector, Fields, Mat10, A0_SLOT, DYNAMICAL};
use super::spectral::{
    central_difference, spectral_derivative, spectral_laplacian, wavenumbers, Fft3, Grid,
};
use crate::error::{Error, Result};
use crate::units::{Length, PhysConstants, Quantity, Time};

type Mat6 = SMatrix<Complex64, 6, 6>;
type Site = [Complex64; 10];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Courant bound `c·dt/spacing` for the RK4 finite-difference integrator.
pub const CFL_LIMIT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Integrator {
    #[default]
    SpectralExact,
    Rk4FiniteDifference,
}

/// Which slots the constant potential multiplies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PotentialCoupling {
    /// Only the six γ = 1 slots, as in `iħ∂_t(γψ) = (H0 + H_int)(γψ)`.
    #[default]
    DynamicalSector,
    /// All ten slots. Keeps `H = curl A` exact when `H_int ≠ 0`.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Representation {
    /// Positive-frequency complex fields `E ∝ exp(i(k·x - ωt))`.
    #[default]
    AnalyticSignal,
    /// Real fields `E ∝ cos(k·x - ωt)`.
    Real,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DerivativeScheme {
    #[default]
    Spectral,
    CentralDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub dt: Time,
    pub integrator: Integrator,
    /// Constant interaction energy `H_int` in joules.
    pub potential: f64,
    pub steps: u64,
    pub coupling: PotentialCoupling,
}

impl EvolutionConfig {
    pub fn new(dt: Time, integrator: Integrator) -> Self {
        Self {
            dt,
            integrator,
            potential: 0.0,
            steps: 1,
            coupling: PotentialCoupling::default(),
        }
    }

    pub fn with_potential(mut self, potential: f64) -> Self {
        self.potential = potential;
        self
    }

    pub fn with_steps(mut self, steps: u64) -> Self {
        self.steps = steps;
        self
    }

    pub fn with_coupling(mut self, coupling: PotentialCoupling) -> Self {
        self.coupling = coupling;
        self
    }

    pub fn validate(&self, state: &LatticeState) -> Result<()> {
        if self.dt.value() <= 0.0 {
            return Err(Error::invalid("time step", self.dt.value(), "must be > 0"));
        }
        if !self.potential.is_finite() {
            return Err(Error::invalid("potential", self.potential, "must be finite"));
        }
        if self.integrator == Integrator::Rk4FiniteDifference {
            let courant = state.consts.c * self.dt.value() / state.spacing.value();
            if courant > CFL_LIMIT {
                return Err(Error::Cfl {
                    courant,
                    limit: CFL_LIMIT,
                });
            }
        }
        Ok(())
    }
}

/// ψ sampled on a periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeState {
    pub grid: Grid,
    pub spacing: Length,
    pub time: Time,
    pub mass_param: f64,
    pub consts: PhysConstants,
    psi: Vec<Site>,
}

impl LatticeState {
    pub fn zero(grid: Grid, spacing: Length, mass_param: f64, consts: PhysConstants) -> Result<Self> {
        grid.validate()?;
        if spacing.value() <= 0.0 {
            return Err(Error::invalid("grid spacing", spacing.value(), "must be > 0"));
        }
        FieldVector::zero(mass_param)?;
        Ok(Self {
            grid,
            spacing,
            time: Time::ZERO,
            mass_param,
            consts,
            psi: vec![[ZERO; 10]; grid.len()],
        })
    }

    /// Sample `fields(x)` at every site position `x = index·spacing`.
    pub fn from_fields(
        grid: Grid,
        spacing: Length,
        mass_param: f64,
        consts: PhysConstants,
        fields: impl Fn([f64; 3]) -> Fields,
    ) -> Result<Self> {
        let mut state = Self::zero(grid, spacing, mass_param, consts)?;
        for site in 0..grid.len() {
            let x = state.position(site);
            state.psi[site] = pack_psi(&fields(x), mass_param)?.components;
        }
        Ok(state)
    }

    pub fn position(&self, site: usize) -> [f64; 3] {
        self.grid.coords(site).map(|i| i as f64 * self.spacing.value())
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    pub fn site(&self, site: usize) -> FieldVector {
        FieldVector {
            components: self.psi[site],
            mass_param: self.mass_param,
        }
    }

    pub fn set_site(&mut self, site: usize, v: &FieldVector) -> Result<()> {
        if v.mass_param != self.mass_param {
            return Err(Error::Inconsistent(format!(
                "site mass parameter {} differs from lattice mass parameter {}",
                v.mass_param, self.mass_param
            )));
        }
        self.psi[site] = v.components;
        Ok(())
    }

    pub fn fields(&self, site: usize) -> Fields {
        unpack_psi(&self.site(site))
    }

    pub fn sites(&self) -> &[Site] {
        &self.psi
    }

    pub fn component(&self, k: usize) -> Vec<Complex64> {
        self.psi.iter().map(|s| s[k]).collect()
    }

    fn set_component(&mut self, k: usize, values: &[Complex64]) {
        for (s, v) in self.psi.iter_mut().zip(values) {
            s[k] = *v;
        }
    }

    pub fn check_compatible(&self, other: &LatticeState) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "shapes {:?} and {:?}",
                self.grid.shape, other.grid.shape
            )));
        }
        if self.spacing != other.spacing {
            return Err(Error::GridMismatch(format!(
                "spacings {} and {}",
                self.spacing, other.spacing
            )));
        }
        if self.mass_param != other.mass_param {
            return Err(Error::GridMismatch(format!(
                "mass parameters {} and {}",
                self.mass_param, other.mass_param
            )));
        }
        Ok(())
    }

    fn volume_element(&self) -> f64 {
        self.spacing.value().powi(self.grid.dims() as i32)
    }
}

/// Monochromatic plane wave used to seed the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneWave {
    /// Wave vector in rad/m.
    pub k: [f64; 3],
    /// Electric field vector; its norm is the amplitude.
    pub polarization: [f64; 3],
    pub representation: Representation,
}

impl PlaneWave {
    pub fn new(k: [f64; 3], polarization: [f64; 3]) -> Self {
        Self {
            k,
            polarization,
            representation: Representation::AnalyticSignal,
        }
    }

    pub fn real(mut self) -> Self {
        self.representation = Representation::Real;
        self
    }

    /// Wave vector with integer mode numbers `n` on `grid`.
    pub fn mode(grid: Grid, spacing: Length, n: [i64; 3], polarization: [f64; 3]) -> Self {
        let k = std::array::from_fn(|a| {
            std::f64::consts::TAU * n[a] as f64 / (grid.shape[a] as f64 * spacing.value())
        });
        Self::new(k, polarization)
    }

    pub fn angular_frequency(&self, consts: &PhysConstants) -> f64 {
        consts.c * norm3(self.k)
    }
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn cross_c(a: [Complex64; 3], b: [Complex64; 3]) -> [Complex64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

const COMMENSURATE_TOL: f64 = 1e-9;
const TRANSVERSE_TOL: f64 = 1e-12;

/// Transverse plane wave with `H = k̂ × E`, `A = i k × H / k²`, `A0 = 0`.
pub fn init_plane_wave(
    wave: &PlaneWave,
    grid: Grid,
    spacing: Length,
    mass_param: f64,
    consts: PhysConstants,
) -> Result<LatticeState> {
    grid.validate()?;
    for axis in 0..3 {
        let n_sites = grid.shape[axis];
        let mode = wave.k[axis] * n_sites as f64 * spacing.value() / std::f64::consts::TAU;
        let bad = !wave.k[axis].is_finite()
            || (mode - mode.round()).abs() > COMMENSURATE_TOL
            || (n_sites == 1 && wave.k[axis] != 0.0)
            || (n_sites > 1 && 2 * mode.round().abs() as usize >= n_sites);
        if bad {
            return Err(Error::NonCommensurate {
                axis,
                value: wave.k[axis],
            });
        }
    }
    let k = wave.k;
    let e = wave.polarization;
    let knorm = norm3(k);
    let enorm = norm3(e);
    if enorm > 0.0 {
        if knorm == 0.0 {
            return Err(Error::NotTransverse(f64::NAN));
        }
        let cosine = (k[0] * e[0] + k[1] * e[1] + k[2] * e[2]).abs() / (knorm * enorm);
        if cosine > TRANSVERSE_TOL {
            return Err(Error::NotTransverse(cosine));
        }
    }
    if enorm == 0.0 {
        return LatticeState::zero(grid, spacing, mass_param, consts);
    }
    let khat = k.map(|v| v / knorm);
    let h = cross(khat, e);
    // A = i k × H / k²: real amplitude `a_re` multiplying i·exp(i k·x).
    let a_dir = cross(k, h).map(|v| v / (knorm * knorm));
    let rep = wave.representation;
    LatticeState::from_fields(grid, spacing, mass_param, consts, move |x| {
        let arg = k[0] * x[0] + k[1] * x[1] + k[2] * x[2];
        let w = Complex64::from_polar(1.0, arg);
        let (wf, wa) = match rep {
            Representation::AnalyticSignal => (w, I * w),
            Representation::Real => (Complex64::from(w.re), Complex64::from((I * w).re)),
        };
        Fields {
            e: e.map(|v| wf * v),
            h: h.map(|v| wf * v),
            a: a_dir.map(|v| wa * v),
            a0: ZERO,
        }
    })
}

/// Complex `(e^w - 1)` without cancellation for small `w`.
fn expm1_c(w: Complex64) -> Complex64 {
    let half = (w.im * 0.5).sin();
    Complex64::new(
        w.re.exp_m1() * w.im.cos() - 2.0 * half * half,
        w.re.exp() * w.im.sin(),
    )
}

/// `∫_0^dt e^{zs} ds`.
fn phi(z: Complex64, dt: f64) -> Complex64 {
    if z == ZERO {
        Complex64::from(dt)
    } else {
        expm1_c(z * dt) / z
    }
}

fn beta_tilde_blocks() -> [Mat6; 3] {
    let set = build_matrices();
    std::array::from_fn(|i| set.beta_tilde[i].fixed_view::<6, 6>(0, 0).into_owned())
}

/// Exact one-step propagator of a single Fourier mode with derivative
/// symbol `i·k`.
fn mode_propagator(
    k: [f64; 3],
    bt: &[Mat6; 3],
    c: f64,
    m: f64,
    dt: f64,
    omega_f: f64,
    omega_a: f64,
) -> Mat10 {
    let mut g = Mat6::zeros();
    for i in 0..3 {
        g += bt[i] * (I * (c * k[i]));
    }
    let w = c * norm3(k);
    let id = Mat6::identity();
    let projectors: Vec<(Complex64, Mat6)> = if w == 0.0 {
        vec![(ZERO, id)]
    } else {
        let g2 = g * g;
        let w2 = w * w;
        vec![
            (ZERO, id + g2 / Complex64::from(w2)),
            (I * w, (-g2 - g * (I * w)) / Complex64::from(2.0 * w2)),
            (-I * w, (-g2 + g * (I * w)) / Complex64::from(2.0 * w2)),
        ]
    };
    let rot_f = Complex64::from_polar(1.0, -omega_f * dt);
    let rot_a = Complex64::from_polar(1.0, -omega_a * dt);

    let mut u = Mat10::zeros();
    let mut uff = Mat6::zeros();
    let mut uaf = SMatrix::<Complex64, 3, 6>::zeros();
    for (lambda, p) in &projectors {
        uff += p * ((lambda * dt).exp() * rot_f);
        let z = lambda - I * omega_f + I * omega_a;
        let weight = -c * m * rot_a * phi(z, dt);
        uaf += p.fixed_view::<3, 6>(0, 0) * weight;
    }
    u.fixed_view_mut::<6, 6>(0, 0).copy_from(&uff);
    u.fixed_view_mut::<3, 6>(6, 0).copy_from(&uaf);
    for j in 0..3 {
        u[(6 + j, 6 + j)] = rot_a;
        u[(6 + j, A0_SLOT)] = rot_a * dt * c * I * k[j];
    }
    u[(A0_SLOT, A0_SLOT)] = rot_a;
    u
}

enum Kernel {
    Spectral(Vec<Mat10>),
    Rk4(Box<[Mat6; 3]>),
}

/// Reusable stepper for one configuration and lattice.
pub struct Evolver {
    config: EvolutionConfig,
    grid: Grid,
    spacing: Length,
    mass_param: f64,
    consts: PhysConstants,
    fft: Fft3,
    omega_f: f64,
    omega_a: f64,
    kernel: Kernel,
}

impl Evolver {
    pub fn new(state: &LatticeState, config: EvolutionConfig) -> Result<Self> {
        config.validate(state)?;
        let omega_f = config.potential / state.consts.hbar;
        let omega_a = match config.coupling {
            PotentialCoupling::DynamicalSector => 0.0,
            PotentialCoupling::Uniform => omega_f,
        };
        let bt = beta_tilde_blocks();
        let grid = state.grid;
        let kernel = match config.integrator {
            Integrator::SpectralExact => {
                let ks: Vec<Vec<f64>> = (0..3)
                    .map(|a| wavenumbers(grid.shape[a], state.spacing.value()))
                    .collect();
                let mats = (0..grid.len())
                    .map(|site| {
                        let c = grid.coords(site);
                        let k = [ks[0][c[0]], ks[1][c[1]], ks[2][c[2]]];
                        mode_propagator(
                            k,
                            &bt,
                            state.consts.c,
                            state.mass_param,
                            config.dt.value(),
                            omega_f,
                            omega_a,
                        )
                    })
                    .collect();
                Kernel::Spectral(mats)
            }
            Integrator::Rk4FiniteDifference => Kernel::Rk4(Box::new(bt)),
        };
        Ok(Self {
            config,
            grid,
            spacing: state.spacing,
            mass_param: state.mass_param,
            consts: state.consts,
            fft: Fft3::new(grid),
            omega_f,
            omega_a,
            kernel,
        })
    }

    pub fn config(&self) -> &EvolutionConfig {
        &self.config
    }

    pub fn step(&self, state: &mut LatticeState) -> Result<()> {
        if state.grid != self.grid
            || state.spacing != self.spacing
            || state.mass_param != self.mass_param
        {
            return Err(Error::GridMismatch("state does not match the evolver lattice".into()));
        }
        match &self.kernel {
            Kernel::Spectral(mats) => self.step_spectral(state, mats),
            Kernel::Rk4(bt) => self.step_rk4(state, bt),
        }
        state.time = Time::new(state.time.value() + self.config.dt.value())?;
        Ok(())
    }

    fn step_spectral(&self, state: &mut LatticeState, mats: &[Mat10]) {
        let mut modes: Vec<Vec<Complex64>> = (0..10)
            .map(|k| {
                let mut buf = state.component(k);
                self.fft.forward(&mut buf);
                buf
            })
            .collect();
        for (site, u) in mats.iter().enumerate() {
            let v = nalgebra::SVector::<Complex64, 10>::from_fn(|r, _| modes[r][site]);
            let out = u * v;
            for (r, m) in modes.iter_mut().enumerate() {
                m[site] = out[r];
            }
        }
        for (k, mut buf) in modes.into_iter().enumerate() {
            self.fft.inverse(&mut buf);
            state.set_component(k, &buf);
        }
    }

    fn rhs(&self, psi: &[Site], bt: &[Mat6; 3]) -> Vec<Site> {
        let c = self.consts.c;
        let m = self.mass_param;
        let h = self.spacing.value();
        let comp = |k: usize| -> Vec<Complex64> { psi.iter().map(|s| s[k]).collect() };
        let mut out: Vec<Site> = psi
            .iter()
            .map(|s| {
                let mut d = [ZERO; 10];
                for k in 0..DYNAMICAL {
                    d[k] = -I * self.omega_f * s[k];
                }
                for j in 0..3 {
                    d[6 + j] = -c * m * s[j] - I * self.omega_a * s[6 + j];
                }
                d[A0_SLOT] = -I * self.omega_a * s[A0_SLOT];
                d
            })
            .collect();
        let a0 = comp(A0_SLOT);
        for axis in self.grid.active_axes() {
            let derivs: Vec<Vec<Complex64>> = (0..DYNAMICAL)
                .map(|k| central_difference(self.grid, &comp(k), axis, h))
                .collect();
            let b = &bt[axis];
            for (site, d) in out.iter_mut().enumerate() {
                for r in 0..DYNAMICAL {
                    let mut acc = ZERO;
                    for (col, dv) in derivs.iter().enumerate() {
                        let coef = b[(r, col)];
                        if coef != ZERO {
                            acc += coef * dv[site];
                        }
                    }
                    d[r] += c * acc;
                }
            }
            let da0 = central_difference(self.grid, &a0, axis, h);
            for (site, d) in out.iter_mut().enumerate() {
                d[6 + axis] += c * da0[site];
            }
        }
        out
    }

    fn step_rk4(&self, state: &mut LatticeState, bt: &[Mat6; 3]) {
        let dt = self.config.dt.value();
        let axpy = |base: &[Site], k: &[Site], a: f64| -> Vec<Site> {
            base.iter()
                .zip(k)
                .map(|(b, d)| std::array::from_fn(|i| b[i] + d[i] * a))
                .collect()
        };
        let y = state.psi.clone();
        let k1 = self.rhs(&y, bt);
        let k2 = self.rhs(&axpy(&y, &k1, dt / 2.0), bt);
        let k3 = self.rhs(&axpy(&y, &k2, dt / 2.0), bt);
        let k4 = self.rhs(&axpy(&y, &k3, dt), bt);
        for (site, s) in state.psi.iter_mut().enumerate() {
            for i in 0..10 {
                s[i] += (k1[site][i] + (k2[site][i] + k3[site][i]) * 2.0 + k4[site][i]) * (dt / 6.0);
            }
        }
    }

    /// Run `config.steps` steps, calling `observe` after each one.
    pub fn run(
        &self,
        state: &mut LatticeState,
        mut observe: impl FnMut(u64, &LatticeState),
    ) -> Result<()> {
        for n in 1..=self.config.steps {
            self.step(state)?;
            observe(n, state);
        }
        Ok(())
    }
}

/// One step of `config` applied to a copy of `state`.
pub fn step(state: &LatticeState, config: &EvolutionConfig) -> Result<LatticeState> {
    let mut next = state.clone();
    Evolver::new(state, *config)?.step(&mut next)?;
    Ok(next)
}

/// `config.steps` steps applied to a copy of `state`.
pub fn evolve(state: &LatticeState, config: &EvolutionConfig) -> Result<LatticeState> {
    let mut next = state.clone();
    Evolver::new(state, *config)?.run(&mut next, |_, _| {})?;
    Ok(next)
}

fn derivative(fft: &Fft3, grid: Grid, field: &[Complex64], axis: usize, h: f64, scheme: DerivativeScheme) -> Vec<Complex64> {
    match scheme {
        DerivativeScheme::Spectral => spectral_derivative(fft, field, axis, h),
        DerivativeScheme::CentralDifference => central_difference(grid, field, axis, h),
    }
}

/// Row weights that turn each row of the constraint into field units:
/// rows 0..6 scale as `sqrt(m)`, rows 6..10 as `1/sqrt(m)`.
fn row_scale(m: f64, row: usize) -> f64 {
    if row < DYNAMICAL {
        1.0 / m.sqrt()
    } else {
        m.sqrt()
    }
}

/// Per-site `i β_i β_0² ∂^i ψ + m(1 - β_0²)γψ`, rows rescaled to field units.
pub fn constraint_field(state: &LatticeState) -> Vec<Site> {
    let set = build_matrices();
    let b0sq = set.beta[0] * set.beta[0];
    let grid = state.grid;
    let fft = Fft3::new(grid);
    let h = state.spacing.value();
    let m = state.mass_param;
    let mass_term = (Mat10::identity() - b0sq) * set.gamma * Complex64::from(m);
    let mut out: Vec<Site> = state
        .psi
        .iter()
        .map(|s| {
            let v = nalgebra::SVector::<Complex64, 10>::from_column_slice(s);
            let r = mass_term * v;
            std::array::from_fn(|i| r[i])
        })
        .collect();
    for axis in grid.active_axes() {
        // ∂^i = -∂_i
        let op = set.beta[axis + 1] * b0sq * (-I);
        let derivs: Vec<Vec<Complex64>> = (0..10)
            .map(|k| spectral_derivative(&fft, &state.component(k), axis, h))
            .collect();
        for (site, o) in out.iter_mut().enumerate() {
            let v = nalgebra::SVector::<Complex64, 10>::from_fn(|r, _| derivs[r][site]);
            let r = op * v;
            for i in 0..10 {
                o[i] += r[i];
            }
        }
    }
    for o in &mut out {
        for (i, z) in o.iter_mut().enumerate() {
            *z *= row_scale(m, i);
        }
    }
    out
}

/// Max-norm of the constraint over the grid, equal to
/// `max(|div E|, |H - curl A|)` with spectral derivatives.
pub fn constraint_residual(state: &LatticeState) -> f64 {
    max_norm(&constraint_field(state))
}

fn max_norm(v: &[Site]) -> f64 {
    v.iter()
        .flat_map(|s| s.iter())
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Max-norm of `i β_0 ∂_t ψ / c - i β_i ∂_i ψ + mγψ` at the middle state,
/// with a centred time difference.
pub fn covariant_residual(states: [&LatticeState; 3], dt: Time) -> Result<f64> {
    states[0].check_compatible(states[1])?;
    states[1].check_compatible(states[2])?;
    let mid = states[1];
    let set = build_matrices();
    let c = mid.consts.c;
    let m = mid.mass_param;
    let fft = Fft3::new(mid.grid);
    let h = mid.spacing.value();
    let inv = 1.0 / (2.0 * dt.value() * c);
    let mut out: Vec<Site> = (0..mid.len())
        .map(|site| {
            let dpsi = nalgebra::SVector::<Complex64, 10>::from_fn(|r, _| {
                (states[2].psi[site][r] - states[0].psi[site][r]) * inv
            });
            let v = nalgebra::SVector::<Complex64, 10>::from_column_slice(&mid.psi[site]);
            let r = set.beta[0] * dpsi * I + set.gamma * v * Complex64::from(m);
            std::array::from_fn(|i| r[i])
        })
        .collect();
    for axis in mid.grid.active_axes() {
        let derivs: Vec<Vec<Complex64>> = (0..10)
            .map(|k| spectral_derivative(&fft, &mid.component(k), axis, h))
            .collect();
        let op = set.beta[axis + 1] * (-I);
        for (site, o) in out.iter_mut().enumerate() {
            let v = nalgebra::SVector::<Complex64, 10>::from_fn(|r, _| derivs[r][site]);
            let r = op * v;
            for i in 0..10 {
                o[i] += r[i];
            }
        }
    }
    for o in &mut out {
        for (i, z) in o.iter_mut().enumerate() {
            *z *= row_scale(m, i);
        }
    }
    Ok(max_norm(&out))
}

/// Residuals of `curl H = (1/c)∂_t E` and `curl E = -(1/c)∂_t H`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxwellResidual {
    pub curl_e: f64,
    pub curl_h: f64,
}

impl MaxwellResidual {
    pub fn max(&self) -> f64 {
        self.curl_e.max(self.curl_h)
    }
}

pub fn maxwell_residual(s0: &LatticeState, s1: &LatticeState, dt: Time) -> Result<MaxwellResidual> {
    maxwell_residual_with(s0, s1, dt, DerivativeScheme::Spectral)
}

/// Centred-in-time residual of the curl pair, evaluated at the midpoint.
pub fn maxwell_residual_with(
    s0: &LatticeState,
    s1: &LatticeState,
    dt: Time,
    scheme: DerivativeScheme,
) -> Result<MaxwellResidual> {
    s0.check_compatible(s1)?;
    if dt.value() <= 0.0 {
        return Err(Error::invalid("time step", dt.value(), "must be > 0"));
    }
    let grid = s0.grid;
    let fft = Fft3::new(grid);
    let h = s0.spacing.value();
    let c = s0.consts.c;
    let f0: Vec<Fields> = (0..s0.len()).map(|i| s0.fields(i)).collect();
    let f1: Vec<Fields> = (0..s1.len()).map(|i| s1.fields(i)).collect();
    let mid_e = |j: usize| -> Vec<Complex64> { f0.iter().zip(&f1).map(|(a, b)| (a.e[j] + b.e[j]) * 0.5).collect() };
    let mid_h = |j: usize| -> Vec<Complex64> { f0.iter().zip(&f1).map(|(a, b)| (a.h[j] + b.h[j]) * 0.5).collect() };
    let curl = |get: &dyn Fn(usize) -> Vec<Complex64>| -> Vec<[Complex64; 3]> {
        let mut d = vec![vec![vec![ZERO; grid.len()]; 3]; 3];
        for (comp, row) in d.iter_mut().enumerate() {
            let f = get(comp);
            for axis in grid.active_axes() {
                row[axis] = derivative(&fft, grid, &f, axis, h, scheme);
            }
        }
        // d[comp][axis] = ∂_axis F_comp
        (0..grid.len())
            .map(|s| {
                [
                    d[2][1][s] - d[1][2][s],
                    d[0][2][s] - d[2][0][s],
                    d[1][0][s] - d[0][1][s],
                ]
            })
            .collect()
    };
    let curl_h = curl(&mid_h);
    let curl_e = curl(&mid_e);
    let inv = 1.0 / (c * dt.value());
    let mut res = MaxwellResidual {
        curl_e: 0.0,
        curl_h: 0.0,
    };
    for s in 0..grid.len() {
        for j in 0..3 {
            let de = (f1[s].e[j] - f0[s].e[j]) * inv;
            let dh = (f1[s].h[j] - f0[s].h[j]) * inv;
            res.curl_h = res.curl_h.max((curl_h[s][j] - de).norm());
            res.curl_e = res.curl_e.max((curl_e[s][j] + dh).norm());
        }
    }
    Ok(res)
}

/// Max-norm of `(ψ2 - 2ψ1 + ψ0)/dt² - c²∇²ψ1` on the γ sector.
pub fn dalembert_residual(states: [&LatticeState; 3], dt: Time) -> Result<f64> {
    states[0].check_compatible(states[1])?;
    states[1].check_compatible(states[2])?;
    let mid = states[1];
    let fft = Fft3::new(mid.grid);
    let c2 = mid.consts.c2();
    let inv = 1.0 / (dt.value() * dt.value());
    let mut res: f64 = 0.0;
    for k in 0..DYNAMICAL {
        let lap = spectral_laplacian(&fft, &mid.component(k), mid.spacing.value());
        for site in 0..mid.len() {
            let d2 = (states[2].psi[site][k] - mid.psi[site][k] * 2.0 + states[0].psi[site][k]) * inv;
            let r = (d2 - lap[site] * c2) * row_scale(mid.mass_param, k);
            res = res.max(r.norm());
        }
    }
    Ok(res)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurrentDiagnostic {
    /// `½(|E|² + |H|²)` per site.
    pub s0: Vec<f64>,
    /// `Re(E × conj(H))` per site.
    pub flux: Vec<[f64; 3]>,
    /// `Σ s0 · spacing^dims`.
    pub total_s0: f64,
}

pub fn current(state: &LatticeState) -> CurrentDiagnostic {
    let mut s0 = Vec::with_capacity(state.len());
    let mut flux = Vec::with_capacity(state.len());
    let mut total = 0.0;
    for site in 0..state.len() {
        let f = state.fields(site);
        let e2: f64 = f.e.iter().map(|z| z.norm_sqr()).sum();
        let h2: f64 = f.h.iter().map(|z| z.norm_sqr()).sum();
        let density = 0.5 * (e2 + h2);
        let p = cross_c(f.e, f.h.map(|z| z.conj()));
        s0.push(density);
        flux.push(p.map(|z| z.re));
        total += density;
    }
    CurrentDiagnostic {
        s0,
        flux,
        total_s0: total * state.volume_element(),
    }
}

/// `ψ → ψ + (1 - γ)χ` at every site.
pub fn apply_gauge(state: &LatticeState, chi: &LatticeState) -> Result<LatticeState> {
    state.check_compatible(chi)?;
    let mut out = state.clone();
    for (s, x) in out.psi.iter_mut().zip(&chi.psi) {
        for k in DYNAMICAL..10 {
            s[k] += x[k];
        }
    }
    Ok(out)
}

/// `Σ conj(a)·b` over the γ sector.
pub fn overlap(a: &LatticeState, b: &LatticeState) -> Result<Complex64> {
    a.check_compatible(b)?;
    let mut acc = ZERO;
    for (x, y) in a.psi.iter().zip(&b.psi) {
        for k in 0..DYNAMICAL {
            acc += x[k].conj() * y[k];
        }
    }
    Ok(acc)
}

/// Phase `θ` with `b ≈ a·exp(-iθ)`, i.e. `-arg⟨a|b⟩`, in (-π, π].
pub fn relative_phase(a: &LatticeState, b: &LatticeState) -> Result<f64> {
    Ok(-overlap(a, b)?.arg())
}

/// Unwraps successive [`relative_phase`] samples into a continuous phase.
#[derive(Debug, Clone, Copy, Default)]
pub struct PhaseTracker {
    last: Option<f64>,
    total: f64,
}

impl PhaseTracker {
    pub fn push(&mut self, wrapped: f64) -> f64 {
        use std::f64::consts::{PI, TAU};
        match self.last {
            None => self.total = wrapped,
            Some(prev) => {
                let mut d = wrapped - prev;
                while d > PI {
                    d -= TAU;
                }
                while d <= -PI {
                    d += TAU;
                }
                self.total += d;
            }
        }
        self.last = Some(wrapped);
        self.total
    }
}

/// Max difference of unpacked `(E, H)` after evolving the same physical
/// plane wave packed with `m1` and with `m2`, relative to the largest field
/// value seen.
pub fn mass_independence_check(
    wave: &PlaneWave,
    grid: Grid,
    spacing: Length,
    m1: f64,
    m2: f64,
    config: &EvolutionConfig,
    consts: PhysConstants,
) -> Result<f64> {
    let mut a = init_plane_wave(wave, grid, spacing, m1, consts)?;
    let mut b = init_plane_wave(wave, grid, spacing, m2, consts)?;
    let ea = Evolver::new(&a, *config)?;
    let eb = Evolver::new(&b, *config)?;
    let compare = |a: &LatticeState, b: &LatticeState| -> (f64, f64) {
        let mut diff: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for s in 0..a.len() {
            let fa = a.fields(s);
            let fb = b.fields(s);
            for j in 0..3 {
                diff = diff.max((fa.e[j] - fb.e[j]).norm()).max((fa.h[j] - fb.h[j]).norm());
                scale = scale.max(fa.e[j].norm()).max(fa.h[j].norm());
            }
        }
        (diff, scale)
    };
    let (mut worst, mut scale) = compare(&a, &b);
    for _ in 0..config.steps {
        ea.step(&mut a)?;
        eb.step(&mut b)?;
        let (d, s) = compare(&a, &b);
        worst = worst.max(d);
        scale = scale.max(s);
    }
    Ok(if scale == 0.0 { worst } else { worst / scale })
}

const SNAPSHOT_MAGIC: &str = "# kdp-snapshot";

/// Text snapshot: one header line, then `site re0 im0 ... re9 im9` per site.
pub fn write_snapshot<W: Write>(state: &LatticeState, mut out: W) -> io::Result<()> {
    let [nx, ny, nz] = state.grid.shape;
    writeln!(
        out,
        "{SNAPSHOT_MAGIC} shape={nx},{ny},{nz} spacing={:e} time={:e} mass={:e} g={:e} c={:e} hbar={:e}",
        state.spacing.value(),
        state.time.value(),
        state.mass_param,
        state.consts.g,
        state.consts.c,
        state.consts.hbar
    )?;
    for (i, s) in state.psi.iter().enumerate() {
        write!(out, "{i}")?;
        for z in s {
            write!(out, " {:e} {:e}", z.re, z.im)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn read_snapshot<R: BufRead>(input: R) -> Result<LatticeState> {
    let bad = |msg: String| Error::Inconsistent(format!("snapshot: {msg}"));
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| bad("empty input".into()))?
        .map_err(|e| bad(e.to_string()))?;
    let rest = header
        .strip_prefix(SNAPSHOT_MAGIC)
        .ok_or_else(|| bad("missing header".into()))?;
    let mut shape = None;
    let mut num = std::collections::HashMap::new();
    for kv in rest.split_whitespace() {
        let (key, value) = kv.split_once('=').ok_or_else(|| bad(format!("bad field `{kv}`")))?;
        if key == "shape" {
            let parts: Vec<usize> = value
                .split(',')
                .map(|p| p.parse().map_err(|_| bad(format!("bad shape `{value}`"))))
                .collect::<Result<_>>()?;
            if parts.len() != 3 {
                return Err(bad(format!("bad shape `{value}`")));
            }
            shape = Some([parts[0], parts[1], parts[2]]);
        } else {
            let v: f64 = value.parse().map_err(|_| bad(format!("bad number `{value}`")))?;
            num.insert(key.to_string(), v);
        }
    }
    let get = |k: &str| num.get(k).copied().ok_or_else(|| bad(format!("missing `{k}`")));
    let grid = Grid {
        shape: shape.ok_or_else(|| bad("missing shape".into()))?,
    };
    let consts = PhysConstants::new(get("g")?, get("c")?, get("hbar")?)?;
    let mut state = LatticeState::zero(grid, Length::new(get("spacing")?)?, get("mass")?, consts)?;
    state.time = Time::new(get("time")?)?;
    let mut seen = 0;
    for line in lines {
        let line = line.map_err(|e| bad(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let site: usize = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(format!("bad site line `{line}`")))?;
        if site >= state.len() {
            return Err(bad(format!("site {site} out of range")));
        }
        let vals: Vec<f64> = it
            .map(|s| s.parse().map_err(|_| bad(format!("bad number `{s}`"))))
            .collect::<Result<_>>()?;
        if vals.len() != 20 {
            return Err(bad(format!("site {site} has {} numbers, expected 20", vals.len())));
        }
        state.psi[site] = std::array::from_fn(|k| Complex64::new(vals[2 * k], vals[2 * k + 1]));
        seen += 1;
    }
    if seen != state.len() {
        return Err(bad(format!("expected {} sites, read {seen}", state.len())));
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn consts() -> PhysConstants {
        crate::units::default_constants()
    }

    fn lattice_1d(n: usize) -> (Grid, Length) {
        (Grid::one_d(n), Length::new(1.0 / n as f64).unwrap())
    }

    fn wave_1d(n: usize, mode: i64) -> (LatticeState, PlaneWave) {
        let (grid, h) = lattice_1d(n);
        let w = PlaneWave::mode(grid, h, [mode, 0, 0], [0.0, 1.0, 0.0]);
        (init_plane_wave(&w, grid, h, 1.0, consts()).unwrap(), w)
    }

    fn max_diff(a: &LatticeState, b: &LatticeState) -> f64 {
        a.psi
            .iter()
            .zip(&b.psi)
            .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).norm()))
            .fold(0.0, f64::max)
    }

    fn max_abs(a: &LatticeState) -> f64 {
        a.psi.iter().flat_map(|x| x.iter()).map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn plane_wave_fields() {
        let (s, _) = wave_1d(64, 3);
        for site in 0..s.len() {
            let f = s.fields(site);
            assert!(f.e[0].norm() == 0.0 && f.e[2].norm() == 0.0);
            assert!((f.e[1].norm() - 1.0).abs() < 1e-15);
            assert!((f.h[2] - f.e[1]).norm() < 1e-15);
        }
        assert!(constraint_residual(&s) < 1e-12);
    }

    #[test]
    fn plane_wave_rejections() {
        let (grid, h) = lattice_1d(64);
        let par = PlaneWave::mode(grid, h, [3, 0, 0], [1.0, 0.0, 0.0]);
        assert!(matches!(
            init_plane_wave(&par, grid, h, 1.0, consts()),
            Err(Error::NotTransverse(_))
        ));
        let off = PlaneWave::new([TAU * 3.5, 0.0, 0.0], [0.0, 1.0, 0.0]);
        assert!(matches!(
            init_plane_wave(&off, grid, h, 1.0, consts()),
            Err(Error::NonCommensurate { axis: 0, .. })
        ));
        let inactive = PlaneWave::new([TAU, TAU, 0.0], [0.0, 0.0, 1.0]);
        assert!(matches!(
            init_plane_wave(&inactive, grid, h, 1.0, consts()),
            Err(Error::NonCommensurate { axis: 1, .. })
        ));
    }

    #[test]
    fn zero_amplitude_gives_zero_diagnostics() {
        let (grid, h) = lattice_1d(32);
        let w = PlaneWave::mode(grid, h, [2, 0, 0], [0.0; 3]);
        let s = init_plane_wave(&w, grid, h, 1.0, consts()).unwrap();
        assert_eq!(max_abs(&s), 0.0);
        assert_eq!(constraint_residual(&s), 0.0);
        let cur = current(&s);
        assert_eq!(cur.total_s0, 0.0);
        let cfg = EvolutionConfig::new(Time::new(1e-10).unwrap(), Integrator::SpectralExact);
        let next = step(&s, &cfg).unwrap();
        assert_eq!(max_abs(&next), 0.0);
        let m = maxwell_residual(&s, &next, cfg.dt).unwrap();
        assert_eq!(m.max(), 0.0);
        assert_eq!(dalembert_residual([&s, &next, &next], cfg.dt).unwrap(), 0.0);
    }

    #[test]
    fn full_period_returns_to_start() {
        let (s, w) = wave_1d(256, 5);
        let period = TAU / w.angular_frequency(&consts());
        let steps = 64;
        let cfg = EvolutionConfig::new(Time::new(period / steps as f64).unwrap(), Integrator::SpectralExact)
            .with_steps(steps);
        let end = evolve(&s, &cfg).unwrap();
        assert!(max_diff(&s, &end) / max_abs(&s) < 1e-12, "{}", max_diff(&s, &end));
    }

    #[test]
    fn constant_potential_is_a_global_phase() {
        let (s, _) = wave_1d(256, 4);
        let hint = -1e-30;
        let dt = 1e-11;
        let free = EvolutionConfig::new(Time::new(dt).unwrap(), Integrator::SpectralExact).with_steps(200);
        let pot = free.with_potential(hint);
        let a = evolve(&s, &free).unwrap();
        let b = evolve(&s, &pot).unwrap();
        let t = b.time.value();
        let rot = Complex64::from_polar(1.0, -hint * t / consts().hbar);
        let mut err: f64 = 0.0;
        for site in 0..s.len() {
            for k in 0..DYNAMICAL {
                err = err.max((a.psi[site][k] * rot - b.psi[site][k]).norm());
            }
        }
        assert!(err / max_abs(&a) < 1e-10, "{err}");
        let measured = relative_phase(&a, &b).unwrap();
        let expected = hint * t / consts().hbar;
        let wrapped = expected - TAU * (expected / TAU).round();
        assert!((measured - wrapped).abs() < 1e-10);
    }

    #[test]
    fn uniform_coupling_keeps_h_equal_curl_a() {
        let (s, _) = wave_1d(128, 3);
        let cfg = EvolutionConfig::new(Time::new(1e-11).unwrap(), Integrator::SpectralExact)
            .with_steps(100)
            .with_potential(-1e-30)
            .with_coupling(PotentialCoupling::Uniform);
        let end = evolve(&s, &cfg).unwrap();
        assert!(constraint_residual(&end) < 1e-10);
        // The literal coupling lets A drift out of step with H.
        let literal = evolve(&s, &cfg.with_coupling(PotentialCoupling::DynamicalSector)).unwrap();
        assert!(constraint_residual(&literal) > 1e-6);
    }

    #[test]
    fn constraint_detects_spike() {
        let (mut s, _) = wave_1d(32, 2);
        let mut v = s.site(0);
        v.components[0] += Complex64::from(1.0);
        s.set_site(0, &v).unwrap();
        // Oracle: |∂_x δ| from an explicit sum over the DFT modes.
        let n = 32usize;
        let h = 1.0 / n as f64;
        let mut oracle: f64 = 0.0;
        for j in 0..n {
            let mut d = ZERO;
            for q in 0..n {
                let f = if q == n / 2 { 0.0 } else if q < n / 2 { q as f64 } else { q as f64 - n as f64 };
                let k = TAU * f / (n as f64 * h);
                d += I * k * Complex64::from_polar(1.0, TAU * (q * j) as f64 / n as f64) / n as f64;
            }
            oracle = oracle.max(d.norm());
        }
        let r = constraint_residual(&s);
        assert!(r > 0.0);
        assert!((r - oracle).abs() / oracle < 1e-9, "{r} vs {oracle}");
    }

    #[test]
    fn constraint_survives_long_spectral_run() {
        let (s, w) = wave_1d(256, 7);
        let dt = 0.37 * TAU / w.angular_frequency(&consts());
        let cfg = EvolutionConfig::new(Time::new(dt).unwrap(), Integrator::SpectralExact).with_steps(1000);
        let end = evolve(&s, &cfg).unwrap();
        assert!(constraint_residual(&end) < 1e-10, "{}", constraint_residual(&end));
    }

    #[test]
    fn covariant_equation_holds_along_evolution() {
        let (s, w) = wave_1d(128, 3);
        let period = TAU / w.angular_frequency(&consts());
        let res = |steps: u32| {
            let dt = period / steps as f64;
            let cfg = EvolutionConfig::new(Time::new(dt).unwrap(), Integrator::SpectralExact);
            let s1 = step(&s, &cfg).unwrap();
            let s2 = step(&s1, &cfg).unwrap();
            covariant_residual([&s, &s1, &s2], cfg.dt).unwrap()
        };
        let r1 = res(400);
        let r2 = res(800);
        assert!((r1 / r2 - 4.0).abs() < 0.2, "{r1} {r2}");
    }

    #[test]
    fn maxwell_residual_is_second_order_in_dt() {
        let (s, w) = wave_1d(128, 3);
        let period = TAU / w.angular_frequency(&consts());
        let res = |steps: u32| {
            let dt = Time::new(period / steps as f64).unwrap();
            let cfg = EvolutionConfig::new(dt, Integrator::SpectralExact);
            maxwell_residual(&s, &step(&s, &cfg).unwrap(), dt).unwrap().max()
        };
        let slope = (res(200) / res(400)).log2();
        assert!((slope - 2.0).abs() < 0.2, "{slope}");
    }

    #[test]
    fn static_uniform_e_field() {
        let (grid, h) = lattice_1d(16);
        let s = LatticeState::from_fields(grid, h, 1.0, consts(), |_| {
            Fields::real([0.0, 2.0, 0.0], [0.0; 3], [0.0; 3], 0.0)
        })
        .unwrap();
        assert_eq!(constraint_residual(&s), 0.0);
        let dt = Time::new(1e-10).unwrap();
        let next = step(&s, &EvolutionConfig::new(dt, Integrator::SpectralExact)).unwrap();
        let r = maxwell_residual(&s, &next, dt).unwrap();
        assert_eq!(r.curl_e, 0.0);
        for site in 0..next.len() {
            assert_eq!(next.fields(site).h, [ZERO; 3]);
        }
    }

    #[test]
    fn rk4_rejects_large_courant() {
        let (s, _) = wave_1d(32, 1);
        let dt = 0.6 * s.spacing.value() / consts().c;
        let cfg = EvolutionConfig::new(Time::new(dt).unwrap(), Integrator::Rk4FiniteDifference);
        assert!(matches!(step(&s, &cfg), Err(Error::Cfl { .. })));
        let cfg = EvolutionConfig::new(Time::new(dt).unwrap(), Integrator::SpectralExact);
        assert!(step(&s, &cfg).is_ok());
    }

    #[test]
    fn rk4_spatial_error_is_second_order() {
        // Same physical wave on two grids; the spectral Maxwell residual of
        // the finite-difference solution measures its stencil error.
        let res = |n: usize| {
            let grid = Grid::one_d(n);
            let h = Length::new(1.0 / n as f64).unwrap();
            let w = PlaneWave::mode(grid, h, [2, 0, 0], [0.0, 0.0, 1.0]);
            let s = init_plane_wave(&w, grid, h, 1.0, consts()).unwrap();
            let dt = Time::new(0.02 * h.value() / consts().c).unwrap();
            let cfg = EvolutionConfig::new(dt, Integrator::Rk4FiniteDifference);
            let next = step(&s, &cfg).unwrap();
            maxwell_residual(&s, &next, dt).unwrap().max()
        };
        let ratio = res(32) / res(64);
        assert!((ratio - 4.0).abs() < 0.4, "{ratio}");
    }

    #[test]
    fn dalembert_second_order_and_linear() {
        let (s, w) = wave_1d(128, 3);
        let (grid, h) = lattice_1d(128);
        let w2 = PlaneWave::mode(grid, h, [3, 0, 0], [0.0, 0.0, 0.5]);
        let sup = {
            let b = init_plane_wave(&w2, grid, h, 1.0, consts()).unwrap();
            let mut out = s.clone();
            for (x, y) in out.psi.iter_mut().zip(&b.psi) {
                for k in 0..10 {
                    x[k] += y[k];
                }
            }
            out
        };
        let period = TAU / w.angular_frequency(&consts());
        let res = |init: &LatticeState, steps: u32| {
            let dt = Time::new(period / steps as f64).unwrap();
            let cfg = EvolutionConfig::new(dt, Integrator::SpectralExact);
            let s1 = step(init, &cfg).unwrap();
            let s2 = step(&s1, &cfg).unwrap();
            dalembert_residual([init, &s1, &s2], dt).unwrap()
        };
        let slope = (res(&s, 100) / res(&s, 200)).log2();
        assert!((slope - 2.0).abs() < 0.2, "{slope}");
        // Same wave number, amplitudes add up to 1.5 along different axes.
        let ratio = res(&sup, 100) / res(&s, 100);
        assert!(ratio > 0.5 && ratio < 2.0, "{ratio}");
    }

    #[test]
    fn dispersion_matches_c_k() {
        let (grid, h) = lattice_1d(256);
        for mode in [1, 5, 17, 60, 127] {
            let w = PlaneWave::mode(grid, h, [mode, 0, 0], [0.0, 1.0, 0.0]);
            let s = init_plane_wave(&w, grid, h, 1.0, consts()).unwrap();
            let omega = w.angular_frequency(&consts());
            let dt = 0.3 / omega;
            let cfg = EvolutionConfig::new(Time::new(dt).unwrap(), Integrator::SpectralExact);
            let next = step(&s, &cfg).unwrap();
            let measured = relative_phase(&s, &next).unwrap() / dt;
            assert!((measured - omega).abs() / omega < 1e-10, "mode {mode}");
        }
    }

    #[test]
    fn current_of_plane_wave() {
        let (s, _) = wave_1d(64, 3);
        let cur = current(&s);
        for (d, f) in cur.s0.iter().zip(&cur.flux) {
            assert!((d - 1.0).abs() < 1e-14);
            assert!((f[0] - 1.0).abs() < 1e-14 && f[1].abs() < 1e-14 && f[2].abs() < 1e-14);
        }
        assert!((cur.total_s0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn total_s0_conserved() {
        let (s, w) = wave_1d(256, 9);
        let dt = 0.21 * TAU / w.angular_frequency(&consts());
        for potential in [0.0, -3e-25] {
            let cfg = EvolutionConfig::new(Time::new(dt).unwrap(), Integrator::SpectralExact)
                .with_steps(1000)
                .with_potential(potential);
            let e0 = current(&s).total_s0;
            let e1 = current(&evolve(&s, &cfg).unwrap()).total_s0;
            assert!((e1 - e0).abs() / e0 < 1e-10);
        }
    }

    #[test]
    fn gauge_leaves_gamma_sector_alone() {
        let (s, _) = wave_1d(32, 2);
        let zero = LatticeState::zero(s.grid, s.spacing, 1.0, consts()).unwrap();
        assert_eq!(apply_gauge(&s, &zero).unwrap(), s);
        let chi = LatticeState::from_fields(s.grid, s.spacing, 1.0, consts(), |x| {
            Fields::real([9.0; 3], [4.0; 3], [x[0].sin(), 1.0, -2.0], x[0].cos())
        })
        .unwrap();
        let g = apply_gauge(&s, &chi).unwrap();
        for site in 0..s.len() {
            assert_eq!(g.psi[site][..DYNAMICAL], s.psi[site][..DYNAMICAL]);
        }
        assert_eq!(current(&g), current(&s));
        let other = LatticeState::zero(Grid::one_d(16), s.spacing, 1.0, consts()).unwrap();
        assert!(apply_gauge(&s, &other).is_err());
    }

    #[test]
    fn mass_parameter_does_not_enter_em_dynamics() {
        let (grid, h) = lattice_1d(128);
        let w = PlaneWave::mode(grid, h, [3, 0, 0], [0.0, 1.0, 0.0]);
        let cfg = EvolutionConfig::new(Time::new(1e-10).unwrap(), Integrator::SpectralExact).with_steps(100);
        assert_eq!(mass_independence_check(&w, grid, h, 1.0, 1.0, &cfg, consts()).unwrap(), 0.0);
        assert!(mass_independence_check(&w, grid, h, 1.0, 2.0, &cfg, consts()).unwrap() < 1e-12);
        let omega = w.angular_frequency(&consts());
        let m_photon = crate::phase::photon_mass_parameter(
            &consts(),
            crate::units::Frequency::new(omega).unwrap(),
        )
        .unwrap()
        .value();
        assert!(mass_independence_check(&w, grid, h, m_photon, 1.0, &cfg, consts()).unwrap() < 1e-12);
    }

    #[test]
    fn three_d_smoke() {
        let grid = Grid::cube(16);
        let h = Length::new(1.0 / 16.0).unwrap();
        let w = PlaneWave::mode(grid, h, [1, 2, 0], [0.0, 0.0, 1.0]);
        let s = init_plane_wave(&w, grid, h, 1.0, consts()).unwrap();
        assert!(constraint_residual(&s) < 1e-12 * norm3(w.k));
        let period = TAU / w.angular_frequency(&consts());
        let cfg = EvolutionConfig::new(Time::new(period / 8.0).unwrap(), Integrator::SpectralExact).with_steps(8);
        let end = evolve(&s, &cfg).unwrap();
        assert!(max_diff(&s, &end) < 1e-12);
    }

    #[test]
    fn snapshot_round_trip() {
        let (s, _) = wave_1d(16, 1);
        let cfg = EvolutionConfig::new(Time::new(1e-10).unwrap(), Integrator::SpectralExact);
        let s = step(&s, &cfg).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&s, &mut buf).unwrap();
        let back = read_snapshot(io::Cursor::new(buf)).unwrap();
        assert_eq!(back, s);
        assert!(read_snapshot(io::Cursor::new(b"0 1 2\n".to_vec())).is_err());
    }

    #[test]
    fn phase_tracker_unwraps() {
        let mut t = PhaseTracker::default();
        let mut last = 0.0;
        for n in 0..50 {
            let true_phase = 0.4 * n as f64;
            let wrapped = true_phase - TAU * (true_phase / TAU).round();
            last = t.push(wrapped);
            assert!((last - true_phase).abs() < 1e-12);
        }
        assert!(last > TAU);
    }
}
