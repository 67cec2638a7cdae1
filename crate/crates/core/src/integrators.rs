//! Fixed-step time integration.
//!
//! * [`strang_step`]: half nonlinear step, exact linear step, half nonlinear
//!   step. For cubic-only coefficients the nonlinear half step is the exact
//!   pointwise rotation `u e^{i g |u|^2 dt/2}`.
//! * [`if_rk4_step`]: classical RK4 on `w = e^{-m(k) t} u_hat`.
//! * [`picard_solve`]: the iteration on the smoothed variable
//!   `v = (I - d^2) u`, where every iterate solves a linear equation whose
//!   coefficients are frozen at the previous iterate.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hnls_model::{dispersion_multiplier, nonlinear_spectral, nonlinear_term, EquationParams};
use crate::spectral_grid::{Field, Grid};

/// Largest `dt * |lambda|` for which RK4 is stable on the imaginary axis.
pub const RK4_STABILITY: f64 = 2.7;

/// Largest admissible ratio of edge magnitude to field maximum.
pub const BOUNDARY_GUARD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Strang,
    IfRk4,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Strang => "strang",
            Scheme::IfRk4 => "ifrk4",
        }
    }
}

/// Stored states of one run, uniformly spaced by `dt * stride` except
/// possibly the last.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Field>,
    pub params: EquationParams,
    pub scheme: Scheme,
    pub dt: f64,
    pub stride: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn initial(&self) -> &Field {
        &self.states[0]
    }

    pub fn last(&self) -> &Field {
        self.states.last().expect("trajectory holds at least one state")
    }

    pub fn grid(&self) -> &Grid {
        self.initial().grid()
    }

    /// Spacing between consecutive stored samples.
    pub fn sample_spacing(&self) -> f64 {
        self.dt * self.stride as f64
    }
}

/// Bound on `dt` for the explicit nonlinear stages at state `u`.
///
/// The nonlinear rates are estimated by `3 |u|^2_max (|g| + (|d| + |e|) k)`
/// with `k` the largest retained wavenumber.
pub fn stability_bound(u: &Field, p: &EquationParams) -> f64 {
    let m = u.max_abs().powi(2);
    let rate = 3.0 * m * (p.cubic.abs() + (p.steepening.abs() + p.conj_steepening.abs()) * u.grid().k_dealiased());
    if rate == 0.0 {
        f64::INFINITY
    } else {
        RK4_STABILITY / rate
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::TimeGrid(format!("time step must be positive, got {dt}")))
    }
}

fn linear_factors(grid: &Grid, p: &EquationParams, dt: f64) -> Vec<Complex64> {
    grid.wavenumbers()
        .iter()
        .map(|&k| (dispersion_multiplier(k, p) * dt).exp())
        .collect()
}

/// Reusable fixed-`dt` stepper with cached propagators.
struct Stepper {
    grid: Grid,
    params: EquationParams,
    scheme: Scheme,
    dt: f64,
    half: Vec<Complex64>,
    full: Vec<Complex64>,
}

impl Stepper {
    fn new(grid: &Grid, params: EquationParams, scheme: Scheme, dt: f64) -> Self {
        Self {
            grid: grid.clone(),
            params,
            scheme,
            dt,
            half: linear_factors(grid, &params, 0.5 * dt),
            full: linear_factors(grid, &params, dt),
        }
    }

    fn step(&self, u: &Field) -> Result<Field> {
        match self.scheme {
            Scheme::Strang => Ok(self.strang(u)),
            Scheme::IfRk4 => {
                let bound = stability_bound(u, &self.params);
                if self.dt > bound {
                    return Err(Error::Stability { dt: self.dt, bound });
                }
                Ok(self.if_rk4(u))
            }
        }
    }

    fn nonlinear_half(&self, u: &Field) -> Field {
        let h = 0.5 * self.dt;
        let p = &self.params;
        if p.is_cubic_only() {
            let g = p.cubic * h;
            return u.map(|v| v * Complex64::from_polar(1.0, g * v.norm_sqr()));
        }
        let k1 = nonlinear_term(u, p);
        let u2 = u.axpy((0.5 * h).into(), &k1).expect("same grid");
        let k2 = nonlinear_term(&u2, p);
        let u3 = u.axpy((0.5 * h).into(), &k2).expect("same grid");
        let k3 = nonlinear_term(&u3, p);
        let u4 = u.axpy(h.into(), &k3).expect("same grid");
        let k4 = nonlinear_term(&u4, p);
        let mut out = u.clone();
        for (j, o) in out.values_mut().iter_mut().enumerate() {
            *o += h / 6.0 * (k1.values()[j] + 2.0 * k2.values()[j] + 2.0 * k3.values()[j] + k4.values()[j]);
        }
        out
    }

    fn strang(&self, u: &Field) -> Field {
        let a = self.nonlinear_half(u);
        let mut spec = a.to_spectral();
        for (c, e) in spec.coeffs_mut().iter_mut().zip(&self.full) {
            *c *= e;
        }
        self.nonlinear_half(&spec.to_field())
    }

    fn if_rk4(&self, u: &Field) -> Field {
        let g = &self.grid;
        let p = &self.params;
        let dt = self.dt;
        let u_hat = u.to_spectral().coeffs().to_vec();
        let nl =
            |c: &[Complex64]| -> Vec<Complex64> { nonlinear_spectral(g, c, p).into_iter().map(|v| v * dt).collect() };
        let (e, e2) = (&self.half, &self.full);
        let a = nl(&u_hat);
        let stage: Vec<Complex64> = (0..u_hat.len()).map(|j| e[j] * (u_hat[j] + 0.5 * a[j])).collect();
        let b = nl(&stage);
        let stage: Vec<Complex64> = (0..u_hat.len()).map(|j| e[j] * u_hat[j] + 0.5 * b[j]).collect();
        let c = nl(&stage);
        let stage: Vec<Complex64> = (0..u_hat.len()).map(|j| e2[j] * u_hat[j] + e[j] * c[j]).collect();
        let d = nl(&stage);
        let mut out: Vec<Complex64> = (0..u_hat.len())
            .map(|j| e2[j] * u_hat[j] + (e2[j] * a[j] + 2.0 * e[j] * (b[j] + c[j]) + d[j]) / 6.0)
            .collect();
        g.fft_inverse(&mut out);
        Field::from_raw(g, out)
    }
}

pub fn strang_step(u: &Field, dt: f64, p: &EquationParams) -> Result<Field> {
    check_dt(dt)?;
    Stepper::new(u.grid(), *p, Scheme::Strang, dt).step(u)
}

/// One integrating-factor RK4 step; fails when `dt` exceeds
/// [`stability_bound`] at `u`.
pub fn if_rk4_step(u: &Field, dt: f64, p: &EquationParams) -> Result<Field> {
    check_dt(dt)?;
    Stepper::new(u.grid(), *p, Scheme::IfRk4, dt).step(u)
}

/// Number of steps `T / dt`, which must be an integer to within `1e-9`.
pub fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    check_dt(dt)?;
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::TimeGrid(format!("final time must be positive, got {t_end}")));
    }
    let ratio = t_end / dt;
    let steps = ratio.round();
    if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::TimeGrid(format!(
            "T / dt = {ratio} is not an integer (T = {t_end}, dt = {dt})"
        )));
    }
    Ok(steps as usize)
}

fn guard(u: &Field, time: f64, limit: Option<f64>) -> Result<()> {
    if !u.is_finite() {
        return Err(Error::Blowup { time });
    }
    if let Some(limit) = limit {
        let ratio = u.edge_ratio();
        if ratio > limit {
            return Err(Error::BoundaryGuard { time, ratio, limit });
        }
    }
    Ok(())
}

/// Steps `u0` to `t_end`, storing every `stride`-th state and the final one.
/// The boundary guard ([`BOUNDARY_GUARD`]) is checked at every stored state.
pub fn evolve(
    u0: &Field,
    t_end: f64,
    dt: f64,
    scheme: Scheme,
    p: &EquationParams,
    stride: usize,
) -> Result<Trajectory> {
    evolve_with_guard(u0, t_end, dt, scheme, p, stride, Some(BOUNDARY_GUARD))
}

/// [`evolve`] with an explicit guard level; `None` only checks finiteness.
pub fn evolve_with_guard(
    u0: &Field,
    t_end: f64,
    dt: f64,
    scheme: Scheme,
    p: &EquationParams,
    stride: usize,
    guard_limit: Option<f64>,
) -> Result<Trajectory> {
    let steps = step_count(t_end, dt)?;
    if stride == 0 {
        return Err(Error::TimeGrid("stride must be at least 1".into()));
    }
    guard(u0, 0.0, guard_limit)?;
    let stepper = Stepper::new(u0.grid(), *p, scheme, dt);
    let mut times = vec![0.0];
    let mut states = vec![u0.clone()];
    let mut u = u0.clone();
    for n in 1..=steps {
        u = stepper.step(&u)?;
        let t = n as f64 * dt;
        if !u.is_finite() {
            return Err(Error::Blowup { time: t });
        }
        if n % stride == 0 || n == steps {
            guard(&u, t, guard_limit)?;
            times.push(t);
            states.push(u.clone());
        }
    }
    Ok(Trajectory {
        times,
        states,
        params: *p,
        scheme,
        dt,
        stride,
    })
}

/// Delta history of [`picard_solve`].
#[derive(Debug, Clone)]
pub struct PicardHistory {
    /// `v^(n)(T)` for `n = 0, 1, ...`.
    pub iterates: Vec<Field>,
    /// `sup_t ||v^(n)(t) - v^(n-1)(t)||_{H^1}`.
    pub deltas: Vec<f64>,
    pub converged: bool,
}

/// Frozen coefficients `s = |Lz|^2`, `s_x`, `s_xx` at one time node.
#[derive(Debug, Clone)]
struct Coefficients {
    s: Vec<Complex64>,
    s1: Vec<Complex64>,
    s2: Vec<Complex64>,
}

impl Coefficients {
    fn from_source(z: &Field) -> Result<Self> {
        let lz = z.helmholtz_smooth();
        let s = crate::spectral_grid::dealiased_product(&[&lz, &lz.conj()])?;
        let d = s.derivatives(2)?;
        let mut it = d.into_iter().map(Field::into_values);
        Ok(Self {
            s: it.next().expect("order 0"),
            s1: it.next().expect("order 1"),
            s2: it.next().expect("order 2"),
        })
    }

    fn midpoint(&self, other: &Self) -> Self {
        let avg = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
        Self {
            s: avg(&self.s, &other.s),
            s1: avg(&self.s1, &other.s1),
            s2: avg(&self.s2, &other.s2),
        }
    }
}

/// `-i g b(z, v)` in spectral form, with
/// `b = s_xx Lv + 2 s_x (Lv)_x + s (Lv)_xx - s Lv` and `L = (I - d^2)^{-1}`.
fn picard_forcing(grid: &Grid, coef: &Coefficients, v_hat: &[Complex64], cubic: f64, dt: f64) -> Vec<Complex64> {
    let ks = grid.wavenumbers();
    let mut lv: Vec<Complex64> = v_hat.iter().zip(ks).map(|(c, &k)| c / (1.0 + k * k)).collect();
    grid.dealias(&mut lv);
    let mut lv1: Vec<Complex64> = lv.iter().zip(ks).map(|(c, &k)| c * Complex64::new(0.0, k)).collect();
    let mut lv2: Vec<Complex64> = lv.iter().zip(ks).map(|(c, &k)| -c * k * k).collect();
    grid.fft_inverse(&mut lv);
    grid.fft_inverse(&mut lv1);
    grid.fft_inverse(&mut lv2);
    let scale = Complex64::new(0.0, -cubic * dt);
    let mut out: Vec<Complex64> = (0..grid.n())
        .map(|j| {
            let b = coef.s2[j] * lv[j] + 2.0 * coef.s1[j] * lv1[j] + coef.s[j] * lv2[j] - coef.s[j] * lv[j];
            scale * b
        })
        .collect();
    grid.fft_forward(&mut out);
    grid.dealias(&mut out);
    out
}

/// One application of the iteration map: integrates the linear equation
///
/// ```text
/// v_t = b L v_5 - i w L v_4 - b L v_3 + i w L v_2 - i g b(z, v)
/// ```
///
/// from `v0` across the time nodes of `z` (spacing `dt`). The
/// constant-coefficient part has multiplier `m(k)` and is handled as an
/// integrating factor; the coefficients of `b` are taken at the nodes and
/// averaged between them for the RK4 midpoint stages.
pub fn picard_apply_z(z: &[Field], v0: &Field, dt: f64, p: &EquationParams) -> Result<Vec<Field>> {
    check_dt(dt)?;
    if z.is_empty() {
        return Err(Error::Precondition(
            "coefficient source must cover at least t = 0".into(),
        ));
    }
    for zi in z {
        v0.check_grid(zi)?;
    }
    let grid = v0.grid().clone();
    let ks = grid.wavenumbers();
    let e: Vec<Complex64> = ks
        .iter()
        .map(|&k| (dispersion_multiplier(k, p) * 0.5 * dt).exp())
        .collect();
    let e2: Vec<Complex64> = e.iter().map(|x| x * x).collect();
    let coefs = z.iter().map(Coefficients::from_source).collect::<Result<Vec<_>>>()?;
    let mut v_hat = v0.to_spectral().coeffs().to_vec();
    let mut out = Vec::with_capacity(z.len());
    out.push(v0.clone());
    let n = grid.n();
    for step in 0..z.len() - 1 {
        let (c0, c1) = (&coefs[step], &coefs[step + 1]);
        let cm = c0.midpoint(c1);
        let f = |c: &Coefficients, x: &[Complex64]| picard_forcing(&grid, c, x, p.cubic, dt);
        let a = f(c0, &v_hat);
        let s: Vec<Complex64> = (0..n).map(|j| e[j] * (v_hat[j] + 0.5 * a[j])).collect();
        let b = f(&cm, &s);
        let s: Vec<Complex64> = (0..n).map(|j| e[j] * v_hat[j] + 0.5 * b[j]).collect();
        let c = f(&cm, &s);
        let s: Vec<Complex64> = (0..n).map(|j| e2[j] * v_hat[j] + e[j] * c[j]).collect();
        let d = f(c1, &s);
        v_hat = (0..n)
            .map(|j| e2[j] * v_hat[j] + (e2[j] * a[j] + 2.0 * e[j] * (b[j] + c[j]) + d[j]) / 6.0)
            .collect();
        let mut phys = v_hat.clone();
        grid.fft_inverse(&mut phys);
        let field = Field::from_raw(&grid, phys);
        if !field.is_finite() {
            return Err(Error::Blowup {
                time: (step + 1) as f64 * dt,
            });
        }
        out.push(field);
    }
    Ok(out)
}

fn sup_h1_distance(a: &[Field], b: &[Field]) -> Result<f64> {
    let mut sup = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        sup = sup.max(x.sub(y)?.sobolev_norm_sq(1)?.sqrt());
    }
    Ok(sup)
}

/// Picard iteration for the cubic-only equation up to `t_end`.
///
/// The zeroth iterate is `v^(0)(t) = (I - d^2) u0` at every time node. Each
/// further iterate is [`picard_apply_z`] of its predecessor. Returns
/// `u = L v(T)` from the last iterate.
pub fn picard_solve(
    u0: &Field,
    t_end: f64,
    dt: f64,
    p: &EquationParams,
    max_iter: usize,
    tol: f64,
) -> Result<(Field, PicardHistory)> {
    if !p.is_cubic_only() {
        return Err(Error::Precondition(
            "the smoothed-variable iteration is defined for cubic-only coefficients".into(),
        ));
    }
    if max_iter == 0 {
        return Err(Error::Precondition("max_iter must be at least 1".into()));
    }
    let steps = step_count(t_end, dt)?;
    let v0 = u0.helmholtz_unsmooth();
    let mut current = vec![v0.clone(); steps + 1];
    let mut history = PicardHistory {
        iterates: vec![v0.clone()],
        deltas: Vec::new(),
        converged: false,
    };
    for _ in 0..max_iter {
        let next = picard_apply_z(&current, &v0, dt, p)?;
        let delta = sup_h1_distance(&next, &current)?;
        history.iterates.push(next.last().expect("nonempty").clone());
        history.deltas.push(delta);
        current = next;
        if delta <= tol {
            history.converged = true;
            break;
        }
    }
    let u = history.iterates.last().expect("nonempty").helmholtz_smooth();
    Ok((u, history))
}
