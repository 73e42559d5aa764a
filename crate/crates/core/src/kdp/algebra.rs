//! The 10-dimensional Kemmer-Duffin-Petiau representation.
//!
//! Component layout of ψ (all divided by `sqrt(m)`):
//!
//! | index | 0..3 | 3..6 | 6..9  | 9     |
//! |-------|------|------|-------|-------|
//! | value | -E   | H    | -m·A  | m·A0  |
//!
//! The β matrices are the tensor representation `ψ ~ (F_μν, A_μ)` rotated
//! by a diagonal phase so that, on this layout,
//!
//! - `∂_t(γψ) = -c·β̃_i ∂^i (γψ)` is the curl pair `∂_t E = c curl H`,
//!   `∂_t H = -c curl E`,
//! - `i β_i β_0² ∂^i ψ + m(1 - β_0²)γψ = 0` is `div E = 0`, `H = curl A`,
//! - `i β_μ ∂^μ ψ + mγψ = 0` additionally gives `E = -(1/c)∂_t A - ∇A0`.
//!
//! with `∂^0 = (1/c)∂_t`, `∂^i = -∂_i`. The potential slots are normalised
//! so that the `A → F` coupling carries no `ħ`; `H = curl A` holds in the
//! same units as the fields. Every entry is `0` or `±i`, so all algebraic
//! identities below hold exactly in floating point.

use std::fmt::Write as _;
use std::io;

use nalgebra::SMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Mat10 = SMatrix<Complex64, 10, 10>;
pub type Vec3c = [Complex64; 3];

pub const E_SLOTS: std::ops::Range<usize> = 0..3;
pub const H_SLOTS: std::ops::Range<usize> = 3..6;
pub const A_SLOTS: std::ops::Range<usize> = 6..9;
pub const A0_SLOT: usize = 9;
/// Number of dynamical (γ = 1) components.
pub const DYNAMICAL: usize = 6;

/// Minkowski metric, signature (+,-,-,-).
pub const METRIC: [f64; 4] = [1.0, -1.0, -1.0, -1.0];

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn levi_civita(a: usize, b: usize, c: usize) -> f64 {
    match (a, b, c) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdpMatrixSet {
    pub beta: [Mat10; 4],
    pub gamma: Mat10,
    /// `β̃_i = β_0 β_i - β_i β_0`, i = 1..3.
    pub beta_tilde: [Mat10; 3],
    pub metric: [f64; 4],
}

/// Build β_0..β_3, γ and β̃_i for the field layout above.
pub fn build_matrices() -> KdpMatrixSet {
    let mut beta = [Mat10::zeros(); 4];

    // β_0 couples E_j to A_j.
    for j in 0..3 {
        beta[0][(j, 6 + j)] = -I;
        beta[0][(6 + j, j)] = I;
    }
    // β_a couples E_a to A0 and H to A through ε_abc.
    for a in 0..3 {
        let b_a = &mut beta[a + 1];
        b_a[(a, A0_SLOT)] = -I;
        b_a[(A0_SLOT, a)] = -I;
        for b in 0..3 {
            for c in 0..3 {
                let eps = levi_civita(a, b, c);
                if eps != 0.0 {
                    b_a[(3 + b, 6 + c)] = -I * eps;
                    b_a[(6 + c, 3 + b)] = -I * eps;
                }
            }
        }
    }

    let mut gamma = Mat10::zeros();
    for k in 0..DYNAMICAL {
        gamma[(k, k)] = Complex64::new(1.0, 0.0);
    }

    let beta_tilde = std::array::from_fn(|i| {
        beta[0] * beta[i + 1] - beta[i + 1] * beta[0]
    });

    KdpMatrixSet {
        beta,
        gamma,
        beta_tilde,
        metric: METRIC,
    }
}

fn max_abs(m: &Mat10) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Max-norm of `β_μβ_νβ_λ + β_λβ_νβ_μ - β_μ g_νλ - β_λ g_νμ` over all 64 triples.
pub fn algebra_residual(set: &KdpMatrixSet) -> f64 {
    let g = |a: usize, b: usize| if a == b { set.metric[a] } else { 0.0 };
    let b = &set.beta;
    let mut worst = 0.0f64;
    for mu in 0..4 {
        for nu in 0..4 {
            for la in 0..4 {
                let lhs = b[mu] * b[nu] * b[la] + b[la] * b[nu] * b[mu];
                let rhs = b[mu] * Complex64::from(g(nu, la)) + b[la] * Complex64::from(g(nu, mu));
                worst = worst.max(max_abs(&(lhs - rhs)));
            }
        }
    }
    worst
}

/// Max-norm of `γβ_μ + β_μγ - β_μ` over μ.
pub fn gamma_relation_residual(set: &KdpMatrixSet) -> f64 {
    set.beta
        .iter()
        .map(|b| max_abs(&(set.gamma * b + b * set.gamma - b)))
        .fold(0.0, f64::max)
}

/// Max-norm of `γ² - γ` and of any off-diagonal entry of γ.
pub fn gamma_projector_residual(set: &KdpMatrixSet) -> f64 {
    let idem = max_abs(&(set.gamma * set.gamma - set.gamma));
    let mut off = 0.0f64;
    for r in 0..10 {
        for c in 0..10 {
            if r != c {
                off = off.max(set.gamma[(r, c)].norm());
            }
        }
    }
    idem.max(off)
}

/// Max-norm of `β̃_i - (β_0β_i - β_iβ_0)`.
pub fn beta_tilde_residual(set: &KdpMatrixSet) -> f64 {
    (0..3)
        .map(|i| {
            let b = &set.beta;
            max_abs(&(set.beta_tilde[i] - (b[0] * b[i + 1] - b[i + 1] * b[0])))
        })
        .fold(0.0, f64::max)
}

/// Write every matrix as rows of `re,im` pairs, one matrix per block.
pub fn write_matrices<W: io::Write>(set: &KdpMatrixSet, mut out: W) -> io::Result<()> {
    let named = set
        .beta
        .iter()
        .enumerate()
        .map(|(k, m)| (format!("beta{k}"), m))
        .chain(std::iter::once(("gamma".to_string(), &set.gamma)))
        .chain(
            set.beta_tilde
                .iter()
                .enumerate()
                .map(|(k, m)| (format!("beta_tilde{}", k + 1), m)),
        );
    for (name, m) in named {
        writeln!(out, "# {name}")?;
        for r in 0..10 {
            let mut line = String::new();
            for c in 0..10 {
                if c > 0 {
                    line.push(' ');
                }
                let z = m[(r, c)];
                write!(line, "{},{}", z.re, z.im).expect("string write");
            }
            writeln!(out, "{line}")?;
        }
    }
    Ok(())
}

/// One site of ψ together with its mass parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldVector {
    pub components: [Complex64; 10],
    pub mass_param: f64,
}

/// Physical content of a [`FieldVector`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Fields {
    pub e: Vec3c,
    pub h: Vec3c,
    pub a: Vec3c,
    pub a0: Complex64,
}

impl Fields {
    pub fn real(e: [f64; 3], h: [f64; 3], a: [f64; 3], a0: f64) -> Self {
        let c = |v: [f64; 3]| v.map(Complex64::from);
        Self {
            e: c(e),
            h: c(h),
            a: c(a),
            a0: a0.into(),
        }
    }
}

fn check_mass(m: f64) -> Result<()> {
    if !(m.is_finite() && m > 0.0) {
        return Err(Error::invalid("mass parameter", m, "must be finite and > 0"));
    }
    Ok(())
}

pub fn pack_psi(fields: &Fields, m: f64) -> Result<FieldVector> {
    check_mass(m)?;
    let s = 1.0 / m.sqrt();
    let mut c = [ZERO; 10];
    for j in 0..3 {
        c[j] = -fields.e[j] * s;
        c[3 + j] = fields.h[j] * s;
        c[6 + j] = -fields.a[j] * (m * s);
    }
    c[A0_SLOT] = fields.a0 * (m * s);
    Ok(FieldVector {
        components: c,
        mass_param: m,
    })
}

pub fn unpack_psi(psi: &FieldVector) -> Fields {
    let m = psi.mass_param;
    let r = m.sqrt();
    let c = &psi.components;
    let mut f = Fields::default();
    for j in 0..3 {
        f.e[j] = -c[j] * r;
        f.h[j] = c[3 + j] * r;
        f.a[j] = -c[6 + j] * (r / m);
    }
    f.a0 = c[A0_SLOT] * (r / m);
    f
}

impl FieldVector {
    pub fn zero(mass_param: f64) -> Result<Self> {
        check_mass(mass_param)?;
        Ok(Self {
            components: [ZERO; 10],
            mass_param,
        })
    }

    /// `γψ`: the first six components, the rest zeroed.
    pub fn gamma_projected(&self) -> Self {
        let mut out = *self;
        for z in &mut out.components[DYNAMICAL..] {
            *z = ZERO;
        }
        out
    }
}

/// `ψ → ψ + (1 - γ)χ`: only the potential slots move.
pub fn gauge_shift(psi: &FieldVector, chi: &FieldVector) -> Result<FieldVector> {
    if psi.mass_param != chi.mass_param {
        return Err(Error::Inconsistent(format!(
            "gauge function mass parameter {} differs from field mass parameter {}",
            chi.mass_param, psi.mass_param
        )));
    }
    let mut out = *psi;
    for k in DYNAMICAL..10 {
        out.components[k] += chi.components[k];
    }
    Ok(out)
}
