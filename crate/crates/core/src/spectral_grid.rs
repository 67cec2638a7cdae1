//! Uniform periodic grid and the Fourier machinery built on it.
//!
//! Coefficient convention: for samples `f_m = f(x_min + m dx)` the forward
//! transform is `c_j = (1/n) sum_m f_m exp(-2 pi i j m / n)` and the inverse is
//! the plain sum `f_m = sum_j c_j exp(2 pi i j m / n)`, so the round trip is the
//! identity map. With this scaling Parseval reads
//! `dx * sum_m |f_m|^2 = length * sum_j |c_j|^2`.
//!
//! Coefficients are stored in FFT order: index `m < n/2` holds wavenumber
//! `2 pi m / length`, index `m >= n/2` holds `2 pi (m - n) / length`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Highest derivative order the spectral operators accept.
pub const MAX_DERIVATIVE_ORDER: usize = 8;

struct GridInner {
    x_min: f64,
    x_max: f64,
    n: usize,
    dx: f64,
    wavenumbers: Vec<f64>,
    keep: Vec<bool>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Uniform periodic grid on `[x_min, x_max)` with `n` samples.
///
/// Cloning is cheap; FFT plans and the wavenumber table are shared.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::GridSize(n));
        }
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(Error::DegenerateInterval { x_min, x_max });
        }
        let length = x_max - x_min;
        let dx = length / n as f64;
        let wavenumbers = (0..n)
            .map(|m| {
                let j = if m < n / 2 { m as f64 } else { m as f64 - n as f64 };
                2.0 * PI * j / length
            })
            .collect();
        // 2/3 rule: keep |j| <= n/3
        let cut = n / 3;
        let keep = (0..n)
            .map(|m| {
                let j = if m < n / 2 { m } else { n - m };
                j <= cut
            })
            .collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        Ok(Self {
            inner: Arc::new(GridInner {
                x_min,
                x_max,
                n,
                dx,
                wavenumbers,
                keep,
                forward,
                inverse,
            }),
        })
    }

    pub fn x_min(&self) -> f64 {
        self.inner.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.inner.x_max
    }

    pub fn n(&self) -> usize {
        self.inner.n
    }

    pub fn dx(&self) -> f64 {
        self.inner.dx
    }

    pub fn length(&self) -> f64 {
        self.inner.x_max - self.inner.x_min
    }

    /// Sample point `x_j = x_min + j dx`.
    pub fn x(&self, j: usize) -> f64 {
        self.inner.x_min + j as f64 * self.inner.dx
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n()).map(move |j| self.x(j))
    }

    /// Wavenumbers in FFT storage order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.inner.wavenumbers
    }

    /// Largest resolved |k| (the Nyquist wavenumber).
    pub fn k_max(&self) -> f64 {
        PI / self.inner.dx
    }

    /// Largest |k| that survives the 2/3-rule mask.
    pub fn k_dealiased(&self) -> f64 {
        2.0 * PI * (self.n() / 3) as f64 / self.length()
    }

    /// Periodic trapezoid rule, `dx * sum(samples)`.
    pub fn integrate(&self, samples: &[f64]) -> f64 {
        debug_assert_eq!(samples.len(), self.n());
        self.inner.dx * samples.iter().sum::<f64>()
    }

    /// Same as [`Grid::integrate`] for a closure evaluated at every sample index.
    pub fn integrate_with(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.inner.dx * (0..self.n()).map(f).sum::<f64>()
    }

    pub(crate) fn fft_forward(&self, buf: &mut [Complex64]) {
        self.inner.forward.process(buf);
        let scale = 1.0 / self.n() as f64;
        for c in buf.iter_mut() {
            *c *= scale;
        }
    }

    pub(crate) fn fft_inverse(&self, buf: &mut [Complex64]) {
        self.inner.inverse.process(buf);
    }

    /// Zero every coefficient removed by the 2/3 rule.
    pub fn dealias(&self, coeffs: &mut [Complex64]) {
        for (c, &keep) in coeffs.iter_mut().zip(&self.inner.keep) {
            if !keep {
                *c = Complex64::new(0.0, 0.0);
            }
        }
    }

    fn same_as(&self, other: &Grid) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner) || self == other
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.inner.x_min == other.inner.x_min && self.inner.x_max == other.inner.x_max && self.inner.n == other.inner.n
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("x_min", &self.inner.x_min)
            .field("x_max", &self.inner.x_max)
            .field("n", &self.inner.n)
            .finish()
    }
}

/// Complex samples of a function on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<Complex64>,
}

impl Field {
    pub fn new(grid: &Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::LengthMismatch {
                expected: grid.n(),
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    pub(crate) fn from_raw(grid: &Grid, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.n());
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::from_raw(grid, vec![Complex64::new(0.0, 0.0); grid.n()])
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> Complex64) -> Self {
        Self::from_raw(grid, grid.points().map(f).collect())
    }

    pub fn from_real_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self::from_raw(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise map that also receives the sample position.
    pub fn map_with_x(&self, f: impl Fn(f64, Complex64) -> Complex64) -> Self {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(j, &v)| f(self.grid.x(j), v))
            .collect();
        Self::from_raw(&self.grid, values)
    }

    pub fn scale(&self, a: Complex64) -> Self {
        self.map(|v| v * a)
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: Complex64, other: &Field) -> Result<Self> {
        self.check_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&u, &v)| u + a * v)
            .collect();
        Ok(Self::from_raw(&self.grid, values))
    }

    pub fn sub(&self, other: &Field) -> Result<Self> {
        self.axpy(Complex64::new(-1.0, 0.0), other)
    }

    pub fn abs_sq(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// `integral |u|^2 dx` by the periodic trapezoid rule.
    pub fn l2_norm_sq(&self) -> f64 {
        self.grid.integrate_with(|j| self.values[j].norm_sqr())
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    /// Squared unweighted Sobolev norm `sum_{j<=order} ||d^j u||^2`.
    pub fn sobolev_norm_sq(&self, order: usize) -> Result<f64> {
        if order > MAX_DERIVATIVE_ORDER {
            return Err(Error::DerivativeOrder {
                order,
                max: MAX_DERIVATIVE_ORDER,
            });
        }
        let spec = self.to_spectral();
        let len = self.grid.length();
        // Parseval, exact for the discrete pair
        let total = spec
            .coeffs
            .iter()
            .zip(self.grid.wavenumbers())
            .map(|(c, &k)| {
                let k2 = k * k;
                let mut weight = 0.0;
                let mut p = 1.0;
                for _ in 0..=order {
                    weight += p;
                    p *= k2;
                }
                weight * c.norm_sqr()
            })
            .sum::<f64>();
        Ok(len * total)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest modulus among the two boundary samples.
    pub fn edge_magnitude(&self) -> f64 {
        let n = self.values.len();
        self.values[0].norm().max(self.values[n - 1].norm())
    }

    /// Edge magnitude relative to the field maximum (0 for the zero field).
    pub fn edge_ratio(&self) -> f64 {
        let max = self.max_abs();
        if max == 0.0 {
            0.0
        } else {
            self.edge_magnitude() / max
        }
    }

    /// Largest pointwise modulus of `self - other`.
    pub fn max_diff(&self, other: &Field) -> Result<f64> {
        self.check_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub fn to_spectral(&self) -> SpectralField {
        let mut coeffs = self.values.clone();
        self.grid.fft_forward(&mut coeffs);
        SpectralField {
            grid: self.grid.clone(),
            coeffs,
        }
    }

    /// Multiply every Fourier coefficient by `multiplier(k)`.
    pub fn apply_multiplier(&self, multiplier: impl Fn(f64) -> Complex64) -> Field {
        let mut spec = self.to_spectral();
        spec.apply_multiplier(multiplier);
        spec.to_field()
    }

    /// `d^order u` by multiplication with `(ik)^order`.
    pub fn derivative(&self, order: usize) -> Result<Field> {
        if order > MAX_DERIVATIVE_ORDER {
            return Err(Error::DerivativeOrder {
                order,
                max: MAX_DERIVATIVE_ORDER,
            });
        }
        if order == 0 {
            return Ok(self.clone());
        }
        Ok(self.apply_multiplier(|k| ik_pow(k, order)))
    }

    /// All derivatives `u, u_1, ..., u_order` from one forward transform.
    pub fn derivatives(&self, order: usize) -> Result<Vec<Field>> {
        if order > MAX_DERIVATIVE_ORDER {
            return Err(Error::DerivativeOrder {
                order,
                max: MAX_DERIVATIVE_ORDER,
            });
        }
        let spec = self.to_spectral();
        Ok((0..=order)
            .map(|j| {
                if j == 0 {
                    self.clone()
                } else {
                    let mut s = spec.clone();
                    s.apply_multiplier(|k| ik_pow(k, j));
                    s.to_field()
                }
            })
            .collect())
    }

    /// `(I - d^2)^{-1} u`: every coefficient divided by `1 + k^2`.
    pub fn helmholtz_smooth(&self) -> Field {
        self.apply_multiplier(|k| Complex64::new(1.0 / (1.0 + k * k), 0.0))
    }

    /// `(I - d^2) u`, the inverse of [`Field::helmholtz_smooth`].
    pub fn helmholtz_unsmooth(&self) -> Field {
        self.apply_multiplier(|k| Complex64::new(1.0 + k * k, 0.0))
    }

    /// Periodic shift approximating `u(x - a)`.
    pub fn translate(&self, a: f64) -> Field {
        self.apply_multiplier(|k| Complex64::from_polar(1.0, -k * a))
    }

    /// Keep only the modes that survive the 2/3 rule.
    pub fn dealiased(&self) -> Field {
        let mut spec = self.to_spectral();
        self.grid.dealias(&mut spec.coeffs);
        spec.to_field()
    }

    pub(crate) fn check_grid(&self, other: &Field) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// `(ik)^order`.
pub fn ik_pow(k: f64, order: usize) -> Complex64 {
    let mag = k.powi(order as i32);
    match order % 4 {
        0 => Complex64::new(mag, 0.0),
        1 => Complex64::new(0.0, mag),
        2 => Complex64::new(-mag, 0.0),
        _ => Complex64::new(0.0, -mag),
    }
}

/// Fourier coefficients of a [`Field`] in FFT order.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: &Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.n() {
            return Err(Error::LengthMismatch {
                expected: grid.n(),
                got: coeffs.len(),
            });
        }
        Ok(Self {
            grid: grid.clone(),
            coeffs,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn apply_multiplier(&mut self, multiplier: impl Fn(f64) -> Complex64) {
        for (c, &k) in self.coeffs.iter_mut().zip(self.grid.wavenumbers()) {
            *c *= multiplier(k);
        }
    }

    /// `length * sum |c_j|^2`, equal to `integral |f|^2` under this convention.
    pub fn energy(&self) -> f64 {
        self.grid.length() * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    pub fn to_field(&self) -> Field {
        let mut values = self.coeffs.clone();
        self.grid.fft_inverse(&mut values);
        Field::from_raw(&self.grid, values)
    }
}

/// Dealiased pointwise product of several fields.
///
/// Every factor is truncated by the 2/3 mask before multiplying and the
/// product is truncated again afterwards.
pub fn dealiased_product(factors: &[&Field]) -> Result<Field> {
    let first = factors
        .first()
        .ok_or_else(|| Error::Precondition("empty product".into()))?;
    let grid = first.grid().clone();
    let mut acc = vec![Complex64::new(1.0, 0.0); grid.n()];
    for f in factors {
        first.check_grid(f)?;
        let d = f.dealiased();
        for (a, v) in acc.iter_mut().zip(d.values()) {
            *a *= v;
        }
    }
    Ok(Field::from_raw(&grid, acc).dealiased())
}
