//! Periodic horizontal grid and Fourier operators.
//!
//! Fields are stored row-major with the `y` index fastest: `f[i * ny + j]`
//! is the sample at `(x_i, y_j) = (i Lx / Nx, j Ly / Ny)`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Periodic box `[0, Lx) x [0, Ly)` sampled on `Nx x Ny` points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        for (name, n) in [("Nx", nx), ("Ny", ny)] {
            if n < 8 || !n.is_power_of_two() {
                return Err(Error::Grid(format!("{name} = {n} must be a power of two >= 8")));
            }
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(Error::Grid(format!("box lengths must be positive, got Lx = {lx}, Ly = {ly}")));
        }
        Ok(Grid { nx, ny, lx, ly })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    /// Area element of one grid cell.
    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.dy()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }

    /// Sample `f(x, y)` on the grid.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.nx {
            for j in 0..self.ny {
                out.push(f(self.x(i), self.y(j)));
            }
        }
        out
    }

    /// Discrete L2 norm over the box.
    pub fn l2(&self, f: &[f64]) -> f64 {
        (f.iter().map(|v| v * v).sum::<f64>() * self.cell_area()).sqrt()
    }

    /// L2 norm of a vector field given by its components.
    pub fn l2_vec(&self, comps: &[&[f64]]) -> f64 {
        let mut s = 0.0;
        for c in comps {
            s += c.iter().map(|v| v * v).sum::<f64>();
        }
        (s * self.cell_area()).sqrt()
    }

    pub fn linf(&self, f: &[f64]) -> f64 {
        f.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() / f.len() as f64
    }

    /// Inner product with the cell-area weight.
    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * self.cell_area()
    }
}

/// Signed integer frequency of FFT bin `m` out of `n`.
fn freq(m: usize, n: usize) -> i64 {
    if m < n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

/// FFT plans, wavenumbers and the dealiasing mask for one grid.
#[derive(Clone)]
pub struct Spectral {
    pub grid: Grid,
    fx: Arc<dyn Fft<f64>>,
    ix: Arc<dyn Fft<f64>>,
    fy: Arc<dyn Fft<f64>>,
    iy: Arc<dyn Fft<f64>>,
    /// Wavenumbers used for first derivatives (Nyquist set to zero).
    kx1: Vec<f64>,
    ky1: Vec<f64>,
    /// Wavenumbers used for second derivatives.
    kx2: Vec<f64>,
    ky2: Vec<f64>,
    keep: Vec<bool>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::<f64>::new();
        let fx = planner.plan_fft_forward(grid.nx);
        let ix = planner.plan_fft_inverse(grid.nx);
        let fy = planner.plan_fft_forward(grid.ny);
        let iy = planner.plan_fft_inverse(grid.ny);
        let wav = |n: usize, l: f64, first: bool| -> Vec<f64> {
            (0..n)
                .map(|m| {
                    let f = freq(m, n);
                    if first && m == n / 2 {
                        0.0
                    } else {
                        2.0 * PI * f as f64 / l
                    }
                })
                .collect()
        };
        let kx1 = wav(grid.nx, grid.lx, true);
        let ky1 = wav(grid.ny, grid.ly, true);
        let kx2 = wav(grid.nx, grid.lx, false);
        let ky2 = wav(grid.ny, grid.ly, false);
        let mut keep = vec![false; grid.len()];
        for i in 0..grid.nx {
            for j in 0..grid.ny {
                let a = freq(i, grid.nx).unsigned_abs() as usize;
                let b = freq(j, grid.ny).unsigned_abs() as usize;
                keep[grid.index(i, j)] = 3 * a < grid.nx && 3 * b < grid.ny;
            }
        }
        Spectral { grid, fx, ix, fy, iy, kx1, ky1, kx2, ky2, keep }
    }

    fn transform(&self, data: &mut [Complex64], fx: &Arc<dyn Fft<f64>>, fy: &Arc<dyn Fft<f64>>) {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        for row in data.chunks_mut(ny) {
            fy.process(row);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); nx];
        for j in 0..ny {
            for i in 0..nx {
                col[i] = data[i * ny + j];
            }
            fx.process(&mut col);
            for i in 0..nx {
                data[i * ny + j] = col[i];
            }
        }
    }

    /// In-place forward transform.
    pub fn forward_c(&self, data: &mut [Complex64]) {
        self.transform(data, &self.fx, &self.fy);
    }

    /// In-place normalized inverse transform.
    pub fn inverse_c(&self, data: &mut [Complex64]) {
        self.transform(data, &self.ix, &self.iy);
        let s = 1.0 / self.grid.len() as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }

    pub fn forward(&self, f: &[f64]) -> Vec<Complex64> {
        let mut c: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward_c(&mut c);
        c
    }

    /// Inverse transform keeping the real part.
    pub fn inverse(&self, mut c: Vec<Complex64>) -> Vec<f64> {
        self.inverse_c(&mut c);
        c.into_iter().map(|v| v.re).collect()
    }

    fn apply(&self, c: &mut [Complex64], symbol: impl Fn(usize, usize) -> Complex64) {
        let ny = self.grid.ny;
        for (n, v) in c.iter_mut().enumerate() {
            *v *= symbol(n / ny, n % ny);
        }
    }

    /// Apply a Fourier multiplier to a real field.
    pub fn multiplier(&self, f: &[f64], symbol: impl Fn(usize, usize) -> Complex64) -> Vec<f64> {
        let mut c = self.forward(f);
        self.apply(&mut c, symbol);
        self.inverse(c)
    }

    /// Apply a Fourier multiplier to a complex field.
    pub fn multiplier_c(&self, f: &[Complex64], symbol: impl Fn(usize, usize) -> Complex64) -> Vec<Complex64> {
        let mut c = f.to_vec();
        self.forward_c(&mut c);
        self.apply(&mut c, symbol);
        self.inverse_c(&mut c);
        c
    }

    pub fn dx(&self, f: &[f64]) -> Vec<f64> {
        self.multiplier(f, |i, _| Complex64::new(0.0, self.kx1[i]))
    }

    pub fn dy(&self, f: &[f64]) -> Vec<f64> {
        self.multiplier(f, |_, j| Complex64::new(0.0, self.ky1[j]))
    }

    pub fn dxx(&self, f: &[f64]) -> Vec<f64> {
        self.multiplier(f, |i, _| Complex64::new(-self.kx2[i] * self.kx2[i], 0.0))
    }

    pub fn dyy(&self, f: &[f64]) -> Vec<f64> {
        self.multiplier(f, |_, j| Complex64::new(-self.ky2[j] * self.ky2[j], 0.0))
    }

    pub fn dxy(&self, f: &[f64]) -> Vec<f64> {
        self.multiplier(f, |i, j| Complex64::new(-self.kx1[i] * self.ky1[j], 0.0))
    }

    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        self.multiplier(f, |i, j| Complex64::new(-(self.kx2[i].powi(2) + self.ky2[j].powi(2)), 0.0))
    }

    /// Inverse Laplacian with the zero mode set to zero.
    pub fn inv_laplacian(&self, f: &[f64]) -> Vec<f64> {
        self.multiplier(f, |i, j| {
            let k2 = self.kx2[i].powi(2) + self.ky2[j].powi(2);
            if k2 == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(-1.0 / k2, 0.0)
            }
        })
    }

    pub fn dx_c(&self, f: &[Complex64]) -> Vec<Complex64> {
        self.multiplier_c(f, |i, _| Complex64::new(0.0, self.kx1[i]))
    }

    pub fn dy_c(&self, f: &[Complex64]) -> Vec<Complex64> {
        self.multiplier_c(f, |_, j| Complex64::new(0.0, self.ky1[j]))
    }

    pub fn laplacian_c(&self, f: &[Complex64]) -> Vec<Complex64> {
        self.multiplier_c(f, |i, j| Complex64::new(-(self.kx2[i].powi(2) + self.ky2[j].powi(2)), 0.0))
    }

    /// Gradient, Laplacian and first derivatives of a complex field in one pass.
    pub fn derivs_c(&self, f: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>, Vec<Complex64>) {
        let mut hat = f.to_vec();
        self.forward_c(&mut hat);
        let ny = self.grid.ny;
        let mut gx = hat.clone();
        let mut gy = hat.clone();
        let mut lap = hat;
        for n in 0..gx.len() {
            let (i, j) = (n / ny, n % ny);
            gx[n] *= Complex64::new(0.0, self.kx1[i]);
            gy[n] *= Complex64::new(0.0, self.ky1[j]);
            lap[n] *= -(self.kx2[i].powi(2) + self.ky2[j].powi(2));
        }
        self.inverse_c(&mut gx);
        self.inverse_c(&mut gy);
        self.inverse_c(&mut lap);
        (gx, gy, lap)
    }

    /// Zero every mode outside the 2/3-rule band.
    pub fn dealias(&self, f: &[f64]) -> Vec<f64> {
        let mut c = self.forward(f);
        for (v, &k) in c.iter_mut().zip(&self.keep) {
            if !k {
                *v = Complex64::new(0.0, 0.0);
            }
        }
        self.inverse(c)
    }

    /// Leray projection of `(u, v)` onto divergence-free fields; the mean is kept.
    pub fn leray(&self, u: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        self.leray_filtered(u, v, false)
    }

    /// Leray projection optionally followed by 2/3-rule truncation.
    pub fn leray_filtered(&self, u: &[f64], v: &[f64], dealias: bool) -> (Vec<f64>, Vec<f64>) {
        let mut a = self.forward(u);
        let mut b = self.forward(v);
        let ny = self.grid.ny;
        for n in 0..a.len() {
            let (i, j) = (n / ny, n % ny);
            if dealias && !self.keep[n] {
                a[n] = Complex64::new(0.0, 0.0);
                b[n] = Complex64::new(0.0, 0.0);
                continue;
            }
            let (kx, ky) = (self.kx1[i], self.ky1[j]);
            let k2 = kx * kx + ky * ky;
            if k2 > 0.0 {
                let dot = (a[n] * kx + b[n] * ky) / k2;
                a[n] -= dot * kx;
                b[n] -= dot * ky;
            }
        }
        (self.inverse(a), self.inverse(b))
    }

    /// Spectral divergence of `(u, v)`.
    pub fn divergence(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let a = self.dx(u);
        let b = self.dy(v);
        a.iter().zip(&b).map(|(x, y)| x + y).collect()
    }

    /// Vertical vorticity `-dy u + dx v`.
    pub fn curl(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let a = self.dy(u);
        let b = self.dx(v);
        b.iter().zip(&a).map(|(x, y)| x - y).collect()
    }

    /// True when the mode `(i, j)` survives the 2/3 rule.
    pub fn kept(&self, n: usize) -> bool {
        self.keep[n]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize) -> Spectral {
        Spectral::new(Grid::new(n, n, 2.0 * PI, 2.0 * PI).unwrap())
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(100, 64, 1.0, 1.0).is_err());
        assert!(Grid::new(4, 64, 1.0, 1.0).is_err());
        assert!(Grid::new(64, 64, -1.0, 1.0).is_err());
    }

    #[test]
    fn derivatives_of_trig_modes() {
        let s = spec(32);
        let f = s.grid.sample(|x, y| (2.0 * x).sin() * (3.0 * y).cos());
        let fx = s.dx(&f);
        let ex = s.grid.sample(|x, y| 2.0 * (2.0 * x).cos() * (3.0 * y).cos());
        let lap = s.laplacian(&f);
        for n in 0..f.len() {
            assert!((fx[n] - ex[n]).abs() < 1e-12);
            assert!((lap[n] + 13.0 * f[n]).abs() < 1e-11);
        }
        let back = s.inv_laplacian(&lap);
        for n in 0..f.len() {
            assert!((back[n] - f[n]).abs() < 1e-12);
        }
    }

    #[test]
    fn leray_kills_gradients() {
        let s = spec(32);
        let phi = s.grid.sample(|x, y| (x + 2.0 * y).sin());
        let (u, v) = s.leray(&s.dx(&phi), &s.dy(&phi));
        assert!(s.grid.linf(&u) < 1e-12 && s.grid.linf(&v) < 1e-12);
    }
}
