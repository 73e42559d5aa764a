//! Periodic FFT and derivative helpers for up to three axes.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Lattice shape; inactive axes have extent 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Grid {
    pub shape: [usize; 3],
}

/// Smallest extent accepted along an active axis.
pub const MIN_EXTENT: usize = 8;

impl Grid {
    pub fn one_d(n: usize) -> Self {
        Self { shape: [n, 1, 1] }
    }

    pub fn cube(n: usize) -> Self {
        Self { shape: [n, n, n] }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_active(&self, axis: usize) -> bool {
        self.shape[axis] > 1
    }

    pub fn active_axes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..3).filter(|&a| self.is_active(a))
    }

    pub fn dims(&self) -> usize {
        self.active_axes().count()
    }

    pub fn index(&self, i: [usize; 3]) -> usize {
        i[0] + self.shape[0] * (i[1] + self.shape[1] * i[2])
    }

    pub fn coords(&self, site: usize) -> [usize; 3] {
        let nx = self.shape[0];
        let ny = self.shape[1];
        [site % nx, (site / nx) % ny, site / (nx * ny)]
    }

    pub fn validate(&self) -> crate::Result<()> {
        if self.dims() == 0 {
            return Err(crate::Error::GridMismatch("grid has no active axis".into()));
        }
        for a in self.active_axes() {
            if self.shape[a] < MIN_EXTENT {
                return Err(crate::Error::GridMismatch(format!(
                    "axis {a} has {} sites, need at least {MIN_EXTENT}",
                    self.shape[a]
                )));
            }
        }
        Ok(())
    }
}

/// Angular wavenumbers of the DFT bins along one axis. The Nyquist bin of an
/// even-length axis maps to 0 so odd derivatives stay real.
pub fn wavenumbers(n: usize, spacing: f64) -> Vec<f64> {
    let len = n as f64 * spacing;
    (0..n)
        .map(|i| {
            if n > 1 && n.is_multiple_of(2) && i == n / 2 {
                0.0
            } else if i <= n / 2 {
                TAU * i as f64 / len
            } else {
                TAU * (i as f64 - n as f64) / len
            }
        })
        .collect()
}

/// Wave numbers squared for the Laplacian; keeps the Nyquist bin.
pub fn wavenumbers_sq(n: usize, spacing: f64) -> Vec<f64> {
    let len = n as f64 * spacing;
    (0..n)
        .map(|i| {
            let f = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
            let k = TAU * f / len;
            k * k
        })
        .collect()
}

pub struct Fft3 {
    grid: Grid,
    forward: [Option<Arc<dyn Fft<f64>>>; 3],
    inverse: [Option<Arc<dyn Fft<f64>>>; 3],
}

impl Fft3 {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        let forward = std::array::from_fn(|a| {
            grid.is_active(a).then(|| planner.plan_fft_forward(grid.shape[a]))
        });
        let inverse = std::array::from_fn(|a| {
            grid.is_active(a).then(|| planner.plan_fft_inverse(grid.shape[a]))
        });
        Self {
            grid,
            forward,
            inverse,
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.transform(buf, &self.forward);
    }

    /// Inverse transform including the `1/N` normalisation.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.transform(buf, &self.inverse);
        let scale = 1.0 / self.grid.len() as f64;
        for z in buf.iter_mut() {
            *z *= scale;
        }
    }

    fn transform(&self, buf: &mut [Complex64], plans: &[Option<Arc<dyn Fft<f64>>>; 3]) {
        assert_eq!(buf.len(), self.grid.len());
        let [nx, ny, nz] = self.grid.shape;
        if let Some(p) = &plans[0] {
            for line in buf.chunks_exact_mut(nx) {
                p.process(line);
            }
        }
        let mut scratch = Vec::new();
        for axis in 1..3 {
            let Some(p) = &plans[axis] else { continue };
            let n = self.grid.shape[axis];
            scratch.resize(n, Complex64::new(0.0, 0.0));
            let stride = if axis == 1 { nx } else { nx * ny };
            let outer = if axis == 1 { nz } else { 1 };
            let inner_count = if axis == 1 { nx } else { nx * ny };
            for o in 0..outer {
                for inner in 0..inner_count {
                    let base = o * nx * ny + inner;
                    for (j, s) in scratch.iter_mut().enumerate() {
                        *s = buf[base + j * stride];
                    }
                    p.process(&mut scratch);
                    for (j, s) in scratch.iter().enumerate() {
                        buf[base + j * stride] = *s;
                    }
                }
            }
            let _ = nz;
        }
    }
}

/// Spectral `∂/∂x_axis` of a periodic field.
pub fn spectral_derivative(fft: &Fft3, field: &[Complex64], axis: usize, spacing: f64) -> Vec<Complex64> {
    let grid = fft.grid();
    let mut buf = field.to_vec();
    if !grid.is_active(axis) {
        return vec![Complex64::new(0.0, 0.0); field.len()];
    }
    fft.forward(&mut buf);
    let k = wavenumbers(grid.shape[axis], spacing);
    for (site, z) in buf.iter_mut().enumerate() {
        let c = grid.coords(site);
        *z *= Complex64::new(0.0, k[c[axis]]);
    }
    fft.inverse(&mut buf);
    buf
}

/// Spectral Laplacian of a periodic field.
pub fn spectral_laplacian(fft: &Fft3, field: &[Complex64], spacing: f64) -> Vec<Complex64> {
    let grid = fft.grid();
    let mut buf = field.to_vec();
    fft.forward(&mut buf);
    let k2: Vec<Vec<f64>> = (0..3).map(|a| wavenumbers_sq(grid.shape[a], spacing)).collect();
    for (site, z) in buf.iter_mut().enumerate() {
        let c = grid.coords(site);
        *z *= -(k2[0][c[0]] + k2[1][c[1]] + k2[2][c[2]]);
    }
    fft.inverse(&mut buf);
    buf
}

/// Second-order centred difference `(f[i+1] - f[i-1]) / 2h` along `axis`.
pub fn central_difference(grid: Grid, field: &[Complex64], axis: usize, spacing: f64) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); field.len()];
    if !grid.is_active(axis) {
        return out;
    }
    let n = grid.shape[axis];
    let inv = 1.0 / (2.0 * spacing);
    for (site, o) in out.iter_mut().enumerate() {
        let mut c = grid.coords(site);
        let i = c[axis];
        c[axis] = (i + 1) % n;
        let plus = field[grid.index(c)];
        c[axis] = (i + n - 1) % n;
        let minus = field[grid.index(c)];
        *o = (plus - minus) * inv;
    }
    out
}
