//! Coefficients, right-hand side and gauge transformation.
//!
//! Solved for the time derivative the equation reads
//!
//! ```text
//! u_t = i w u_xx - b u_xxx + N(u),
//! N(u) = i g |u|^2 u - d |u|^2 u_x - e u^2 conj(u)_x
//! ```
//!
//! with `w = dispersion`, `b = third_order`, `g = cubic`, `d = steepening`
//! and `e = conj_steepening`. The cubic-only case (`d = e = 0`) is the base
//! problem whose L2 norm is conserved.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral_grid::{Field, Grid};

/// The five real coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquationParams {
    /// Coefficient of `u_xx`.
    pub dispersion: f64,
    /// Coefficient of `i u_xxx`; never zero.
    pub third_order: f64,
    /// Coefficient of `|u|^2 u`.
    pub cubic: f64,
    /// Coefficient of `i |u|^2 u_x`.
    pub steepening: f64,
    /// Coefficient of `i u^2 conj(u)_x`.
    pub conj_steepening: f64,
}

impl EquationParams {
    pub fn new(dispersion: f64, third_order: f64, cubic: f64, steepening: f64, conj_steepening: f64) -> Result<Self> {
        let all = [dispersion, third_order, cubic, steepening, conj_steepening];
        if let Some(index) = all.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if third_order == 0.0 {
            return Err(Error::ZeroBeta);
        }
        Ok(Self {
            dispersion,
            third_order,
            cubic,
            steepening,
            conj_steepening,
        })
    }

    /// Cubic-only equation with unit nonlinearity.
    pub fn base(dispersion: f64, third_order: f64) -> Result<Self> {
        Self::new(dispersion, third_order, 1.0, 0.0, 0.0)
    }

    /// No derivative nonlinearities.
    pub fn is_cubic_only(&self) -> bool {
        self.steepening == 0.0 && self.conj_steepening == 0.0
    }

    pub fn is_linear(&self) -> bool {
        self.is_cubic_only() && self.cubic == 0.0
    }

    /// `|w| < 3 b`.
    pub fn smoothing_condition(&self) -> bool {
        self.dispersion.abs() < 3.0 * self.third_order
    }

    /// Error unless [`EquationParams::smoothing_condition`] holds.
    pub fn require_smoothing_condition(&self) -> Result<()> {
        if self.smoothing_condition() {
            Ok(())
        } else {
            Err(Error::SmoothingCondition {
                omega: self.dispersion,
                beta: self.third_order,
            })
        }
    }

    pub fn without_nonlinearity(&self) -> Self {
        Self {
            cubic: 0.0,
            steepening: 0.0,
            conj_steepening: 0.0,
            ..*self
        }
    }
}

/// Rate `m(k) = i (b k^3 - w k^2)` of the linear flow on `e^{ikx}`.
pub fn dispersion_multiplier(k: f64, p: &EquationParams) -> Complex64 {
    Complex64::new(0.0, k * k * (p.third_order * k - p.dispersion))
}

/// Spectral coefficients of the dealiased `N(u)` from those of `u`.
pub(crate) fn nonlinear_spectral(grid: &Grid, coeffs: &[Complex64], p: &EquationParams) -> Vec<Complex64> {
    let i = Complex64::new(0.0, 1.0);
    let mut trunc = coeffs.to_vec();
    grid.dealias(&mut trunc);
    let mut u = trunc.clone();
    grid.fft_inverse(&mut u);
    let mut out: Vec<Complex64> = if p.is_cubic_only() {
        u.iter().map(|&v| i * p.cubic * v.norm_sqr() * v).collect()
    } else {
        let mut ux: Vec<Complex64> = trunc
            .iter()
            .zip(grid.wavenumbers())
            .map(|(c, &k)| c * Complex64::new(0.0, k))
            .collect();
        grid.fft_inverse(&mut ux);
        u.iter()
            .zip(&ux)
            .map(|(&v, &vx)| {
                let m = v.norm_sqr();
                i * p.cubic * m * v - p.steepening * m * vx - p.conj_steepening * v * v * vx.conj()
            })
            .collect()
    };
    grid.fft_forward(&mut out);
    grid.dealias(&mut out);
    out
}

/// Dealiased `N(u)`.
pub fn nonlinear_term(u: &Field, p: &EquationParams) -> Field {
    let spec = u.to_spectral();
    let mut coeffs = nonlinear_spectral(u.grid(), spec.coeffs(), p);
    u.grid().fft_inverse(&mut coeffs);
    Field::from_raw(u.grid(), coeffs)
}

/// `u_t` for the state `u`.
pub fn full_rhs(u: &Field, p: &EquationParams) -> Field {
    let grid = u.grid();
    let spec = u.to_spectral();
    let mut out = nonlinear_spectral(grid, spec.coeffs(), p);
    for ((o, c), &k) in out.iter_mut().zip(spec.coeffs()).zip(grid.wavenumbers()) {
        *o += dispersion_multiplier(k, p) * c;
    }
    grid.fft_inverse(&mut out);
    Field::from_raw(grid, out)
}

/// Shift speed, modulation wavenumber and phase rate of the gauge map
/// `u(x, t) = e^{i d2 x + i d3 t} v(x - d1 t, t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaugeCoeffs {
    /// `d1 = w^2 / (3 b)`.
    pub drift: f64,
    /// `d2 = w / (3 b)`.
    pub wavenumber: f64,
    /// `d3 = -2 w^3 / (27 b^2)`.
    pub phase_rate: f64,
}

pub fn gauge_coeffs(p: &EquationParams) -> Result<GaugeCoeffs> {
    let (w, b) = (p.dispersion, p.third_order);
    if b == 0.0 {
        return Err(Error::ZeroBeta);
    }
    Ok(GaugeCoeffs {
        drift: w * w / (3.0 * b),
        wavenumber: w / (3.0 * b),
        phase_rate: -2.0 * w * w * w / (27.0 * b * b),
    })
}

/// Tolerance on `d2 L / 2 pi` being an integer.
pub const GAUGE_TOLERANCE: f64 = 1e-9;

fn check_gauge_grid(grid: &Grid, g: &GaugeCoeffs) -> Result<()> {
    if g.wavenumber == 0.0 {
        return Ok(());
    }
    let turns = g.wavenumber * grid.length() / (2.0 * PI);
    if (turns - turns.round()).abs() > GAUGE_TOLERANCE {
        return Err(Error::GaugeIncompatible {
            length: grid.length(),
            d2: g.wavenumber,
            required: 2.0 * PI / g.wavenumber.abs(),
        });
    }
    Ok(())
}

fn modulate(f: &Field, wavenumber: f64, phase: f64) -> Field {
    f.map_with_x(|x, v| v * Complex64::from_polar(1.0, wavenumber * x + phase))
}

/// `v -> u`: shift by `d1 t`, then multiply by `e^{i d2 x + i d3 t}`.
pub fn gauge_forward(v: &Field, p: &EquationParams, t: f64) -> Result<Field> {
    let g = gauge_coeffs(p)?;
    check_gauge_grid(v.grid(), &g)?;
    if p.dispersion == 0.0 {
        return Ok(v.clone());
    }
    Ok(modulate(&v.translate(g.drift * t), g.wavenumber, g.phase_rate * t))
}

/// Exact inverse of [`gauge_forward`].
pub fn gauge_inverse(u: &Field, p: &EquationParams, t: f64) -> Result<Field> {
    let g = gauge_coeffs(p)?;
    check_gauge_grid(u.grid(), &g)?;
    if p.dispersion == 0.0 {
        return Ok(u.clone());
    }
    Ok(modulate(u, -g.wavenumber, -g.phase_rate * t).translate(-g.drift * t))
}

/// Coefficients of the equation satisfied by the gauged field `v`: no
/// second-order term and cubic coefficient `g + (e - d) w / (3 b)`.
pub fn transformed_params(p: &EquationParams) -> Result<EquationParams> {
    let g = gauge_coeffs(p)?;
    Ok(EquationParams {
        dispersion: 0.0,
        cubic: p.cubic + (p.conj_steepening - p.steepening) * g.wavenumber,
        ..*p
    })
}

/// Competing candidate for the gauged cubic coefficient,
/// `g + (e d - w d) / (3 b)`. Kept only so the gauge experiment can test it
/// against [`transformed_params`].
pub fn alternative_transformed_params(p: &EquationParams) -> Result<EquationParams> {
    if p.third_order == 0.0 {
        return Err(Error::ZeroBeta);
    }
    let three_b = 3.0 * p.third_order;
    Ok(EquationParams {
        dispersion: 0.0,
        cubic: p.cubic + p.conj_steepening * p.steepening / three_b - p.dispersion * p.steepening / three_b,
        ..*p
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(w: f64, b: f64, g: f64, d: f64, e: f64) -> EquationParams {
        EquationParams::new(w, b, g, d, e).unwrap()
    }

    #[test]
    fn rejects_zero_third_order() {
        assert_eq!(EquationParams::new(1.0, 0.0, 1.0, 0.0, 0.0), Err(Error::ZeroBeta));
        assert!(EquationParams::new(f64::NAN, 1.0, 1.0, 0.0, 0.0).is_err());
        assert!(params(2.9, 1.0, 1.0, 0.0, 0.0).smoothing_condition());
        assert!(!params(3.0, 1.0, 1.0, 0.0, 0.0).smoothing_condition());
        assert!(!params(1.0, -1.0, 1.0, 0.0, 0.0).smoothing_condition());
    }

    #[test]
    fn multiplier_examples() {
        let p = params(0.0, 1.0, 1.0, 0.0, 0.0);
        assert_eq!(dispersion_multiplier(0.0, &p), Complex64::new(0.0, 0.0));
        assert_eq!(dispersion_multiplier(2.0, &p), Complex64::new(0.0, 8.0));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = params(1.3, -0.7, 1.0, 0.0, 0.0);
        for _ in 0..100 {
            let k: f64 = rng.gen_range(-100.0..100.0);
            assert_eq!(dispersion_multiplier(k, &p).re, 0.0);
        }
    }

    #[test]
    fn multiplier_matches_linear_rhs() {
        let grid = Grid::new(0.0, 2.0 * PI, 64).unwrap();
        let p = params(1.5, 0.8, 0.0, 0.0, 0.0);
        let k = 3.0;
        let u = Field::from_fn(&grid, |x| Complex64::from_polar(1.0, k * x));
        let rhs = full_rhs(&u, &p);
        let expected = u.scale(dispersion_multiplier(k, &p));
        let diff = rhs.max_diff(&expected).unwrap();
        // roundoff in high modes is amplified by |m(k)| ~ 3e4 at the grid edge
        assert!(diff < 1e-9, "{diff}");
        // direct evaluation of i w u_xx - b u_xxx
        let direct = u
            .derivative(2)
            .unwrap()
            .scale(Complex64::new(0.0, p.dispersion))
            .axpy(Complex64::new(-p.third_order, 0.0), &u.derivative(3).unwrap())
            .unwrap();
        assert!(rhs.max_diff(&direct).unwrap() < 1e-9);
    }

    #[test]
    fn nonlinear_examples() {
        let grid = Grid::new(-10.0, 10.0, 64).unwrap();
        let p = params(1.0, 1.0, 1.0, 0.0, 0.0);
        assert_eq!(nonlinear_term(&Field::zeros(&grid), &p).max_abs(), 0.0);
        let c = Complex64::new(0.6, -0.8);
        let u = Field::from_fn(&grid, |_| c);
        let expected = Complex64::new(0.0, 1.0) * c.norm_sqr() * c;
        for v in nonlinear_term(&u, &p).values() {
            assert!((v - expected).norm() < 1e-14);
        }
    }

    #[test]
    fn nonlinear_plane_wave_closed_form() {
        let grid = Grid::new(0.0, 2.0 * PI, 64).unwrap();
        let (g, d, e) = (0.7, -1.3, 2.1);
        let p = params(0.4, 1.0, g, d, e);
        let a = Complex64::new(0.3, 0.5);
        let k = 4.0;
        let u = Field::from_fn(&grid, |x| a * Complex64::from_polar(1.0, k * x));
        let m = a.norm_sqr();
        let i = Complex64::new(0.0, 1.0);
        // hand expansion: u^2 conj(u)_x = -ik |A|^2 A e^{ikx}
        let factor = i * g * m - d * m * i * k - e * m * (-i * k);
        let n = nonlinear_term(&u, &p);
        for (j, v) in n.values().iter().enumerate() {
            let expected = a * factor * Complex64::from_polar(1.0, k * grid.x(j));
            assert!((v - expected).norm() < 1e-13, "{v} vs {expected}");
        }
    }

    #[test]
    fn cubic_only_nonlinearity_is_a_rotation_rate() {
        let grid = Grid::new(-20.0, 20.0, 512).unwrap();
        let p = params(1.0, 1.0, 1.0, 0.0, 0.0);
        let u = Field::from_fn(&grid, |x| Complex64::new(1.0 / x.cosh(), 0.2 * (-x * x).exp()));
        let n = nonlinear_term(&u, &p);
        let dealiased = u.dealiased();
        for (a, b) in n.values().iter().zip(dealiased.values()) {
            // the product is truncated again, so only the resolved part is exact
            assert!((a * b.conj()).re.abs() < 1e-10);
        }
    }

    #[test]
    fn conjugation_symmetry() {
        // for even real u the cubic-only rhs satisfies rhs(x) = -conj(rhs(-x))
        let grid = Grid::new(-20.0, 20.0, 256).unwrap();
        let p = params(1.0, 1.0, 1.0, 0.0, 0.0);
        let u = Field::from_real_fn(&grid, |x| 1.0 / x.cosh());
        let rhs = full_rhs(&u, &p);
        let n = grid.n();
        let v = rhs.values();
        for j in 1..n {
            let mirror = v[n - j];
            assert!((v[j] + mirror.conj()).norm() < 1e-12, "j = {j}");
        }
        assert_eq!(full_rhs(&Field::zeros(&grid), &p).max_abs(), 0.0);
    }

    #[test]
    fn gauge_coeff_examples() {
        let g = gauge_coeffs(&params(3.0, 1.0, 1.0, 0.0, 0.0)).unwrap();
        assert_eq!((g.drift, g.wavenumber, g.phase_rate), (3.0, 1.0, -2.0));
        let g = gauge_coeffs(&params(0.0, 1.0, 1.0, 0.0, 0.0)).unwrap();
        assert_eq!((g.drift, g.wavenumber, g.phase_rate), (0.0, 0.0, 0.0));
        let g = gauge_coeffs(&params(3.0, -1.0, 1.0, 0.0, 0.0)).unwrap();
        assert_eq!((g.drift, g.wavenumber, g.phase_rate), (-3.0, -1.0, -2.0));
    }

    fn random_field(grid: &Grid, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // smooth random data: a few random low modes under a gaussian
        let modes: Vec<(f64, Complex64)> = (0..6)
            .map(|_| {
                (
                    rng.gen_range(-3.0..3.0),
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                )
            })
            .collect();
        Field::from_fn(grid, |x| {
            let env = (-x * x / 8.0).exp();
            modes.iter().map(|(k, a)| a * Complex64::from_polar(env, k * x)).sum()
        })
    }

    #[test]
    fn gauge_round_trip_and_isometry() {
        let grid = Grid::new(-8.0 * PI, 8.0 * PI, 256).unwrap();
        let p = params(3.0, 1.0, 1.0, 0.0, 0.0);
        for seed in 0..5 {
            let v = random_field(&grid, seed);
            let u = gauge_forward(&v, &p, 0.37).unwrap();
            let back = gauge_inverse(&u, &p, 0.37).unwrap();
            assert!(back.max_diff(&v).unwrap() < 1e-10);
            assert_relative_eq!(u.l2_norm(), v.l2_norm(), max_relative = 1e-10);
        }
    }

    #[test]
    fn gauge_initial_modulation() {
        let grid = Grid::new(-8.0 * PI, 8.0 * PI, 128).unwrap();
        let p = params(3.0, 1.0, 1.0, 0.0, 0.0);
        let v = random_field(&grid, 11);
        let u = gauge_forward(&v, &p, 0.0).unwrap();
        for (j, (a, b)) in u.values().iter().zip(v.values()).enumerate() {
            let expected = b * Complex64::from_polar(1.0, grid.x(j));
            assert!((a - expected).norm() < 1e-12);
        }
        let id = params(0.0, 1.0, 1.0, 0.0, 0.0);
        assert_eq!(gauge_forward(&v, &id, 1.3).unwrap(), v);
        assert_eq!(gauge_inverse(&v, &id, 1.3).unwrap(), v);
    }

    #[test]
    fn gauge_rejects_incompatible_length() {
        let grid = Grid::new(-50.0, 50.0, 128).unwrap();
        let p = params(3.0, 1.0, 1.0, 0.0, 0.0);
        let err = gauge_forward(&Field::zeros(&grid), &p, 0.0).unwrap_err();
        match err {
            Error::GaugeIncompatible { required, .. } => assert_relative_eq!(required, 2.0 * PI),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gauge_conjugates_linear_flow() {
        // e^{m(k) t} on u equals the gauge image of e^{i b k^3 t} on v
        let grid = Grid::new(-8.0 * PI, 8.0 * PI, 256).unwrap();
        let p = params(3.0, 1.0, 0.0, 0.0, 0.0);
        let q = transformed_params(&p).unwrap();
        let t = 0.3;
        let v0 = random_field(&grid, 3);
        let u0 = gauge_forward(&v0, &p, 0.0).unwrap();
        let u_t = u0.apply_multiplier(|k| (dispersion_multiplier(k, &p) * t).exp());
        let v_t = v0.apply_multiplier(|k| (dispersion_multiplier(k, &q) * t).exp());
        let mapped = gauge_forward(&v_t, &p, t).unwrap();
        assert!(mapped.max_diff(&u_t).unwrap() < 1e-10);
    }

    #[test]
    fn transformed_params_examples() {
        let p = params(2.0, 1.5, 0.8, 0.0, 0.0);
        let q = transformed_params(&p).unwrap();
        assert_eq!((q.dispersion, q.cubic, q.third_order), (0.0, 0.8, 1.5));
        let p = params(2.0, 1.5, 0.8, 0.4, 0.4);
        assert_eq!(transformed_params(&p).unwrap().cubic, 0.8);
        let p = params(3.0, 1.0, 1.0, 2.0, 0.0);
        assert_relative_eq!(transformed_params(&p).unwrap().cubic, -1.0, epsilon = 1e-15);
        // idempotent once the second-order term is gone
        let q = transformed_params(&params(3.0, 1.0, 1.0, 0.5, 1.0)).unwrap();
        assert_eq!(transformed_params(&q).unwrap(), q);
    }

    #[test]
    fn candidate_formulas_differ_only_with_conjugate_steepening() {
        let p = params(3.0, 1.0, 1.0, 2.0, 0.0);
        assert_relative_eq!(
            alternative_transformed_params(&p).unwrap().cubic,
            transformed_params(&p).unwrap().cubic,
            epsilon = 1e-15
        );
        let p = params(3.0, 1.0, 1.0, 0.5, 1.0);
        assert_relative_eq!(transformed_params(&p).unwrap().cubic, 1.5, epsilon = 1e-15);
        assert_relative_eq!(
            alternative_transformed_params(&p).unwrap().cubic,
            2.0 / 3.0,
            epsilon = 1e-15
        );
    }
}
