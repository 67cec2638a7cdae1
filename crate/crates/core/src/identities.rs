//! Residuals of conservation laws and energy identities along a trajectory.
//!
//! Time derivatives of integral quantities are centered differences at the
//! interior stored times, so every check except [`l2_drift`] and
//! [`local_smoothing_integral`] needs a trajectory stored with stride 1.
//!
//! For `w = d^a u` and a weight `xi` the cubic-only equation gives the exact
//! balance
//!
//! ```text
//! d/dt int xi |w|^2 - b int xi''' |w|^2 + 3 b int xi' |w'|^2 - int xi_t |w|^2
//!     + NL = 2 w Im int xi' conj(w) w'
//! NL = 2 g sum_{m=0}^{a-1} C(a, m) Im int xi (|u|^2)_{a-m} u_m conj(w)
//! ```
//!
//! which [`weighted_identity_residual`] evaluates term by term and
//! [`inequality_check`] regroups into the four-term inequality.

use num_rational::Ratio;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integrators::Trajectory;
use crate::spectral_grid::{Field, Grid, MAX_DERIVATIVE_ORDER};
use crate::weights::{binomial, Weight, WeightTable};

use num_complex::Complex64;

/// Default refinement of the quadrature grid used for weighted integrals.
///
/// Weights such as `1 + exp(-1/x)` vary on scales far below the grid
/// spacing, so weighted integrals are evaluated on the trigonometric
/// interpolant of the field sampled this many times more finely.
pub const WEIGHT_OVERSAMPLING: usize = 8;

/// Trigonometric interpolation onto a refined grid.
#[derive(Debug, Clone)]
pub struct Oversampler {
    fine: Grid,
    coarse_n: usize,
}

impl Oversampler {
    pub fn new(coarse: &Grid, factor: usize) -> Result<Self> {
        if factor == 0 || !factor.is_power_of_two() {
            return Err(Error::Precondition(format!(
                "oversampling factor must be a power of two, got {factor}"
            )));
        }
        Ok(Self {
            fine: Grid::new(coarse.x_min(), coarse.x_max(), coarse.n() * factor)?,
            coarse_n: coarse.n(),
        })
    }

    pub fn fine(&self) -> &Grid {
        &self.fine
    }

    /// Fine samples of `u, u_1, ..., u_order`.
    pub fn derivatives(&self, u: &Field, order: usize) -> Vec<Vec<Complex64>> {
        let spec = u.to_spectral();
        let n = self.coarse_n;
        let nf = self.fine.n();
        let ks = u.grid().wavenumbers();
        (0..=order)
            .map(|d| {
                let mut buf = vec![Complex64::new(0.0, 0.0); nf];
                for (j, c) in spec.coeffs().iter().enumerate() {
                    let target = if j < n / 2 { j } else { nf - (n - j) };
                    buf[target] = c * crate::spectral_grid::ik_pow(ks[j], d);
                }
                self.fine.fft_inverse(&mut buf);
                buf
            })
            .collect()
    }
}

/// Denominator floor for relative residuals.
pub const RELATIVE_FLOOR: f64 = 1e-14;

/// Largest derivative order `a` accepted by the weighted checks.
pub const MAX_ALPHA: usize = 3;

/// Residual time series of one identity.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub name: String,
    pub times: Vec<f64>,
    /// Signed residuals.
    pub residuals: Vec<f64>,
    /// Magnitude of the largest constituent term at each time.
    pub scale: Vec<f64>,
    /// `|residual| / max(scale, RELATIVE_FLOOR)`.
    pub relative: Vec<f64>,
}

impl IdentityReport {
    fn new(name: &str, times: Vec<f64>, residuals: Vec<f64>, scale: Vec<f64>) -> Self {
        let relative = residuals
            .iter()
            .zip(&scale)
            .map(|(r, s)| r.abs() / s.max(RELATIVE_FLOOR))
            .collect();
        Self {
            name: name.to_string(),
            times,
            residuals,
            scale,
            relative,
        }
    }

    pub fn max_relative(&self) -> f64 {
        self.relative.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_abs_residual(&self) -> f64 {
        self.residuals.iter().map(|r| r.abs()).fold(0.0, f64::max)
    }
}

fn require_cubic_only(traj: &Trajectory) -> Result<()> {
    if traj.params.is_cubic_only() {
        Ok(())
    } else {
        Err(Error::Precondition(
            "identity holds for cubic-only coefficients only".into(),
        ))
    }
}

fn require_unit_stride(traj: &Trajectory) -> Result<()> {
    if traj.stride != 1 {
        return Err(Error::Precondition(format!(
            "centered time differences need stride 1, trajectory has stride {}",
            traj.stride
        )));
    }
    if traj.len() < 3 {
        return Err(Error::Precondition(
            "centered time differences need at least three stored states".into(),
        ));
    }
    Ok(())
}

fn require_alpha(alpha: usize) -> Result<()> {
    if (1..=MAX_ALPHA).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "derivative order a = {alpha} outside 1..={MAX_ALPHA}"
        )))
    }
}

/// `(values[j+1] - values[j-1]) / (2 h)` for interior `j`.
fn centered(values: &[f64], j: usize, h: f64) -> f64 {
    (values[j + 1] - values[j - 1]) / (2.0 * h)
}

/// `||u(t)||^2 - ||u0||^2`, relative to `||u0||^2`.
pub fn l2_drift(traj: &Trajectory) -> Result<IdentityReport> {
    require_cubic_only(traj)?;
    let m0 = traj.initial().l2_norm_sq();
    let residuals: Vec<f64> = traj.states.iter().map(|u| u.l2_norm_sq() - m0).collect();
    let scale = vec![m0; residuals.len()];
    Ok(IdentityReport::new("l2_drift", traj.times.clone(), residuals, scale))
}

/// `2 g Im int u^2 conj(u_x)^2`.
pub fn e2_integral(u: &Field, cubic: f64) -> Result<f64> {
    let ux = u.derivative(1)?;
    let g = u.grid();
    Ok(2.0 * cubic * g.integrate_with(|j| (u.values()[j] * u.values()[j] * ux.values()[j].conj().powi(2)).im))
}

/// `-2 g Im int |u|^2 u conj(u_xx)`.
pub fn e3_integral(u: &Field, cubic: f64) -> Result<f64> {
    let uxx = u.derivative(2)?;
    let g = u.grid();
    Ok(-2.0
        * cubic
        * g.integrate_with(|j| {
            let v = u.values()[j];
            (v.norm_sqr() * v * uxx.values()[j].conj()).im
        }))
}

fn energy_residual(
    traj: &Trajectory,
    name: &str,
    integral: impl Fn(&Field, f64) -> Result<f64> + Sync,
) -> Result<IdentityReport> {
    require_cubic_only(traj)?;
    require_unit_stride(traj)?;
    let g = traj.params.cubic;
    let energy: Vec<f64> = traj
        .states
        .par_iter()
        .map(|u| u.derivative(1).map(|d| d.l2_norm_sq()))
        .collect::<Result<_>>()?;
    let interior: Vec<usize> = (1..traj.len() - 1).collect();
    let rows: Vec<(f64, f64)> = interior
        .par_iter()
        .map(|&j| {
            let de = centered(&energy, j, traj.dt);
            let term = integral(&traj.states[j], g)?;
            Ok((de + term, de.abs().max(term.abs())))
        })
        .collect::<Result<_>>()?;
    let times = interior.iter().map(|&j| traj.times[j]).collect();
    let (residuals, scale) = rows.into_iter().unzip();
    Ok(IdentityReport::new(name, times, residuals, scale))
}

/// `d/dt ||u_x||^2 + 2 g Im int u^2 conj(u_x)^2` at interior times.
pub fn e2_residual(traj: &Trajectory) -> Result<IdentityReport> {
    energy_residual(traj, "e2", e2_integral)
}

/// `d/dt ||u_x||^2 - 2 g Im int |u|^2 u conj(u_xx)` at interior times.
pub fn e3_residual(traj: &Trajectory) -> Result<IdentityReport> {
    energy_residual(traj, "e3", e3_integral)
}

/// Samples of `u_0 ..= u_order` and `(|u|^2)_0 ..= (|u|^2)_order`, the
/// latter by the Leibniz rule.
struct Jets {
    u: Vec<Vec<Complex64>>,
    mod_sq: Vec<Vec<Complex64>>,
}

impl Jets {
    fn new(over: &Oversampler, u: &Field, order: usize) -> Self {
        let u = over.derivatives(u, order);
        let n = u[0].len();
        let mod_sq = (0..=order)
            .map(|j| {
                (0..n)
                    .map(|x| (0..=j).map(|k| binomial(j, k) * u[j - k][x] * u[k][x].conj()).sum())
                    .collect()
            })
            .collect();
        Self { u, mod_sq }
    }
}

/// `2 g sum_{m=0}^{a-1} C(a, m) Im int xi (|u|^2)_{a-m} u_m conj(u_a)`.
fn nonlinear_sum(grid: &Grid, jets: &Jets, alpha: usize, xi: &[f64], cubic: f64) -> f64 {
    let ua = &jets.u[alpha];
    let mut total = 0.0;
    for m in 0..alpha {
        let s = &jets.mod_sq[alpha - m];
        let um = &jets.u[m];
        total += binomial(alpha, m) * grid.integrate_with(|j| xi[j] * (s[j] * um[j] * ua[j].conj()).im);
    }
    2.0 * cubic * total
}

/// Term-by-term values of the weighted balance at one interior time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedTerms {
    pub time: f64,
    /// `d/dt int xi |u_a|^2`.
    pub rate: f64,
    /// `-b int xi''' |u_a|^2`.
    pub third: f64,
    /// `3 b int xi' |u_{a+1}|^2`.
    pub gradient: f64,
    /// `-int xi_t |u_a|^2`.
    pub time_weight: f64,
    /// Exact nonlinear sum `NL`.
    pub nonlinear: f64,
    /// `2 w Im int xi' conj(u_a) u_{a+1}`.
    pub rhs: f64,
    /// `int xi |u_a|^2`, kept for the inequality.
    pub mass: f64,
    /// `int xi' |u_a|^2`.
    pub slope_mass: f64,
    /// `sup |u|^2`.
    pub sup_sq: f64,
}

impl WeightedTerms {
    pub fn lhs(&self) -> f64 {
        self.rate + self.third + self.gradient + self.time_weight + self.nonlinear
    }

    pub fn residual(&self) -> f64 {
        self.lhs() - self.rhs
    }

    pub fn scale(&self) -> f64 {
        [
            self.rate,
            self.third,
            self.gradient,
            self.time_weight,
            self.nonlinear,
            self.rhs,
        ]
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max)
    }
}

fn weighted_mass_series(traj: &Trajectory, alpha: usize, w: &WeightTable, over: &Oversampler) -> Result<Vec<f64>> {
    let fine = over.fine();
    Ok(traj
        .states
        .par_iter()
        .zip(traj.times.par_iter())
        .map(|(u, &t)| {
            let ua = over.derivatives(u, alpha).pop().expect("order alpha");
            let xi = w.sample(t, 0);
            fine.integrate_with(|j| xi[j] * ua[j].norm_sqr())
        })
        .collect())
}

fn terms_at(
    traj: &Trajectory,
    alpha: usize,
    w: &WeightTable,
    over: &Oversampler,
    mass: &[f64],
    j: usize,
) -> Result<(WeightedTerms, Jets)> {
    let p = &traj.params;
    let grid = over.fine();
    let t = traj.times[j];
    let u = &traj.states[j];
    let jets = Jets::new(over, u, alpha + 1);
    let xi = w.sample(t, 0);
    let xi1 = w.sample(t, 1);
    let xi3 = w.sample(t, 3);
    let xit = w.sample_dt(t);
    let ua = &jets.u[alpha];
    let ua1 = &jets.u[alpha + 1];
    let b = p.third_order;
    let sq = |i: usize| ua[i].norm_sqr();
    let terms = WeightedTerms {
        time: t,
        rate: centered(mass, j, traj.dt),
        third: -b * grid.integrate_with(|i| xi3[i] * sq(i)),
        gradient: 3.0 * b * grid.integrate_with(|i| xi1[i] * ua1[i].norm_sqr()),
        time_weight: -grid.integrate_with(|i| xit[i] * sq(i)),
        nonlinear: nonlinear_sum(grid, &jets, alpha, &xi, p.cubic),
        rhs: 2.0 * p.dispersion * grid.integrate_with(|i| xi1[i] * (ua[i].conj() * ua1[i]).im),
        mass: mass[j],
        slope_mass: grid.integrate_with(|i| xi1[i] * sq(i)),
        sup_sq: u.max_abs().powi(2),
    };
    Ok((terms, jets))
}

/// The weighted balance evaluated at every interior stored time.
pub fn weighted_terms(traj: &Trajectory, alpha: usize, w: &Weight) -> Result<Vec<WeightedTerms>> {
    weighted_terms_with(traj, alpha, w, WEIGHT_OVERSAMPLING)
}

/// [`weighted_terms`] with an explicit quadrature refinement factor.
pub fn weighted_terms_with(
    traj: &Trajectory,
    alpha: usize,
    w: &Weight,
    oversampling: usize,
) -> Result<Vec<WeightedTerms>> {
    require_cubic_only(traj)?;
    require_unit_stride(traj)?;
    require_alpha(alpha)?;
    let over = Oversampler::new(traj.grid(), oversampling)?;
    let table = w.tabulate(over.fine());
    let mass = weighted_mass_series(traj, alpha, &table, &over)?;
    (1..traj.len() - 1)
        .into_par_iter()
        .map(|j| terms_at(traj, alpha, &table, &over, &mass, j).map(|r| r.0))
        .collect()
}

fn report_from_terms(alpha: usize, terms: &[WeightedTerms]) -> IdentityReport {
    IdentityReport::new(
        &format!("weighted_a{alpha}"),
        terms.iter().map(|t| t.time).collect(),
        terms.iter().map(WeightedTerms::residual).collect(),
        terms.iter().map(WeightedTerms::scale).collect(),
    )
}

/// Residual `LHS - RHS` of the weighted balance.
pub fn weighted_identity_residual(traj: &Trajectory, alpha: usize, w: &Weight) -> Result<IdentityReport> {
    Ok(report_from_terms(alpha, &weighted_terms(traj, alpha, w)?))
}

/// [`weighted_identity_residual`] with an explicit quadrature refinement.
pub fn weighted_identity_residual_with(
    traj: &Trajectory,
    alpha: usize,
    w: &Weight,
    oversampling: usize,
) -> Result<IdentityReport> {
    Ok(report_from_terms(
        alpha,
        &weighted_terms_with(traj, alpha, w, oversampling)?,
    ))
}

/// The four terms of the main inequality at one time.
///
/// `r` is the exact remainder `NL + c0 int xi |u_a|^2`: the nonlinear sum
/// with the `c0` part that the zeroth-order coefficient absorbs added back.
/// With this choice `A + B + C + R` equals
/// `2 w Im int xi' conj(w) w' - |w| int xi' (|w|^2 + |w'|^2) <= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityTerms {
    pub alpha: usize,
    pub time: f64,
    /// `d/dt int xi |u_a|^2`.
    pub a: f64,
    /// `int (3 b - |w|) xi' |u_{a+1}|^2`.
    pub b: f64,
    /// `-int (xi_t + b xi''' + |w| xi' + c0 xi) |u_a|^2`.
    pub c: f64,
    pub r: f64,
    /// Lower bound of `r` built from absolute values only.
    pub r_bounded: f64,
}

impl InequalityTerms {
    pub fn lhs(&self) -> f64 {
        self.a + self.b + self.c + self.r
    }

    pub fn scale(&self) -> f64 {
        [self.a, self.b, self.c, self.r]
            .iter()
            .map(|v| v.abs())
            .fold(0.0, f64::max)
    }
}

/// ```text
/// c0 int xi |u_a|^2 - 2 ||u||_inf sum_k C(a,k) int xi |u_{a-k}| |u_k| |u_a|
///     - 2 sum_{m=1}^{a-1} C(a,m) int xi |(|u|^2)_{a-m}| |u_m| |u_a|
/// ```
///
/// with `|g|` on the nonlinear parts.
fn bounded_remainder(grid: &Grid, jets: &Jets, alpha: usize, xi: &[f64], cubic: f64, c0: f64, mass: f64) -> f64 {
    let abs: Vec<Vec<f64>> = jets.u.iter().map(|f| f.iter().map(|v| v.norm()).collect()).collect();
    let sup = c0.sqrt();
    let ua = &abs[alpha];
    let mut first = 0.0;
    for k in 0..=alpha {
        let (p, q) = (&abs[alpha - k], &abs[k]);
        first += binomial(alpha, k) * grid.integrate_with(|j| xi[j] * p[j] * q[j] * ua[j]);
    }
    let mut second = 0.0;
    for m in 1..alpha {
        let s = &jets.mod_sq[alpha - m];
        let um = &abs[m];
        second += binomial(alpha, m) * grid.integrate_with(|j| xi[j] * s[j].norm() * um[j] * ua[j]);
    }
    c0 * mass - 2.0 * cubic.abs() * (sup * first + second)
}

fn require_nondecreasing(w: &WeightTable, times: &[f64]) -> Result<()> {
    for &t in times {
        if let Some((i, d)) = w.sample(t, 1).into_iter().enumerate().find(|(_, d)| *d < 0.0) {
            return Err(Error::InvalidWeight(format!(
                "weight decreases at sample {i}, t = {t} (slope {d})"
            )));
        }
    }
    Ok(())
}

/// Main-inequality terms at the interior stored time closest to `t`.
pub fn inequality_check(traj: &Trajectory, alpha: usize, w: &Weight, t: f64) -> Result<InequalityTerms> {
    traj.params.require_smoothing_condition()?;
    require_cubic_only(traj)?;
    require_unit_stride(traj)?;
    require_alpha(alpha)?;
    let j = traj
        .times
        .iter()
        .enumerate()
        .skip(1)
        .take(traj.len() - 2)
        .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
        .map(|(j, _)| j)
        .expect("at least one interior time");
    let over = Oversampler::new(traj.grid(), WEIGHT_OVERSAMPLING)?;
    let table = w.tabulate(over.fine());
    require_nondecreasing(&table, &[traj.times[j]])?;
    let mass = weighted_mass_series(traj, alpha, &table, &over)?;
    inequality_at(traj, alpha, &table, &over, &mass, j)
}

fn inequality_at(
    traj: &Trajectory,
    alpha: usize,
    w: &WeightTable,
    over: &Oversampler,
    mass: &[f64],
    j: usize,
) -> Result<InequalityTerms> {
    let (terms, jets) = terms_at(traj, alpha, w, over, mass, j)?;
    Ok(inequality_from_terms(traj, alpha, w, over, &terms, &jets))
}

fn inequality_from_terms(
    traj: &Trajectory,
    alpha: usize,
    w: &WeightTable,
    over: &Oversampler,
    terms: &WeightedTerms,
    jets: &Jets,
) -> InequalityTerms {
    let p = &traj.params;
    let grid = over.fine();
    let absw = p.dispersion.abs();
    let b_coef = 3.0 * p.third_order - absw;
    let c0 = terms.sup_sq;
    let xi = w.sample(terms.time, 0);
    InequalityTerms {
        alpha,
        time: terms.time,
        a: terms.rate,
        b: b_coef / (3.0 * p.third_order) * terms.gradient,
        c: terms.time_weight + terms.third - absw * terms.slope_mass - c0 * terms.mass,
        r: terms.nonlinear + c0 * terms.mass,
        r_bounded: bounded_remainder(grid, jets, alpha, &xi, p.cubic, c0, terms.mass),
    }
}

/// [`inequality_check`] at every interior stored time.
pub fn inequality_series(traj: &Trajectory, alpha: usize, w: &Weight) -> Result<Vec<InequalityTerms>> {
    Ok(balance_series(traj, alpha, w, WEIGHT_OVERSAMPLING)?
        .into_iter()
        .map(|(_, l)| l)
        .collect())
}

/// Weighted balance and main-inequality terms from one pass over the
/// trajectory, at every interior stored time.
pub fn balance_series(
    traj: &Trajectory,
    alpha: usize,
    w: &Weight,
    oversampling: usize,
) -> Result<Vec<(WeightedTerms, InequalityTerms)>> {
    traj.params.require_smoothing_condition()?;
    require_cubic_only(traj)?;
    require_unit_stride(traj)?;
    require_alpha(alpha)?;
    let over = Oversampler::new(traj.grid(), oversampling)?;
    let table = w.tabulate(over.fine());
    require_nondecreasing(&table, &[traj.times[traj.len() - 2]])?;
    let mass = weighted_mass_series(traj, alpha, &table, &over)?;
    (1..traj.len() - 1)
        .into_par_iter()
        .map(|j| {
            let (terms, jets) = terms_at(traj, alpha, &table, &over, &mass, j)?;
            let bound = inequality_from_terms(traj, alpha, &table, &over, &terms, &jets);
            Ok((terms, bound))
        })
        .collect()
}

/// Relative residual report of the weighted balance from [`balance_series`] output.
pub fn balance_report(alpha: usize, series: &[(WeightedTerms, InequalityTerms)]) -> IdentityReport {
    let terms: Vec<WeightedTerms> = series.iter().map(|s| s.0).collect();
    report_from_terms(alpha, &terms)
}

/// Running trapezoid sums of `int eta |d^{L+1} u|^2 dx` over the stored
/// times; the last entry is the full time integral.
pub fn local_smoothing_partials(traj: &Trajectory, l: usize, eta: &Weight) -> Result<Vec<f64>> {
    if l + 1 > MAX_DERIVATIVE_ORDER {
        return Err(Error::DerivativeOrder {
            order: l + 1,
            max: MAX_DERIVATIVE_ORDER,
        });
    }
    let grid = traj.grid().clone();
    let density: Vec<f64> = traj
        .states
        .par_iter()
        .zip(traj.times.par_iter())
        .map(|(u, &t)| {
            let d = u.derivative(l + 1)?;
            let e = eta.sample(&grid, t, 0);
            Ok(grid.integrate_with(|j| e[j] * d.values()[j].norm_sqr()))
        })
        .collect::<Result<_>>()?;
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(density.len());
    out.push(0.0);
    for j in 1..density.len() {
        acc += 0.5 * (traj.times[j] - traj.times[j - 1]) * (density[j] + density[j - 1]);
        out.push(acc);
    }
    Ok(out)
}

/// `int_0^T int eta |d^{L+1} u|^2 dx dt` by the trapezoid rule in time.
pub fn local_smoothing_integral(traj: &Trajectory, l: usize, eta: &Weight) -> Result<f64> {
    Ok(*local_smoothing_partials(traj, l, eta)?
        .last()
        .expect("trajectory is nonempty"))
}

pub type Rational = Ratio<i64>;

fn pos(v: i64) -> Rational {
    Rational::from_integer(v.max(0))
}

/// Exponents `(M, T)` of the weight bookkeeping for a remainder term
/// `u_{nu1} conj(u_{nu2}) conj(u_a)`.
pub fn exponent_bookkeeping(alpha: i64, nu1: i64, nu2: i64, l: i64) -> Result<(Rational, Rational)> {
    if !(1 <= nu1 && nu1 <= nu2 && nu2 <= alpha) {
        return Err(Error::Precondition(format!(
            "need 1 <= nu1 <= nu2 <= a, got nu1 = {nu1}, nu2 = {nu2}, a = {alpha}"
        )));
    }
    if nu1 + nu2 != alpha {
        return Err(Error::Precondition(format!(
            "need nu1 + nu2 = a, got {nu1} + {nu2} != {alpha}"
        )));
    }
    if !(4 <= alpha && alpha <= l + 2) {
        return Err(Error::Precondition(format!(
            "need 4 <= a <= L + 2, got a = {alpha}, L = {l}"
        )));
    }
    let half = Rational::new(1, 2);
    let m = Rational::from_integer(alpha - 3) - half * pos(nu1 - 2) - half * pos(nu2 - 4) - half * pos(alpha - 4);
    let lr = Rational::from_integer(l);
    let t = Rational::from_integer(l - alpha + 3)
        - half * (lr - pos(alpha - 3))
        - half * (lr - pos(nu2 - 3))
        - half * (lr - pos(nu1 - 2));
    Ok((m, t))
}

/// One admissible bookkeeping case.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BookkeepingCase {
    pub alpha: i64,
    pub nu1: i64,
    pub nu2: i64,
    pub l: i64,
    pub m: Rational,
    pub t: Rational,
    /// `nu1 >= 2`, `nu2 >= 4` and `a >= 4`: no positive part clips.
    pub unclipped: bool,
}

/// Every admissible `(a, nu1, nu2, L)` with `2 <= L <= max_l`.
pub fn bookkeeping_sweep(max_l: i64) -> Vec<BookkeepingCase> {
    let mut out = Vec::new();
    for l in 2..=max_l {
        for alpha in 4..=l + 2 {
            for nu1 in 1..=alpha / 2 {
                let nu2 = alpha - nu1;
                let (m, t) = exponent_bookkeeping(alpha, nu1, nu2, l).expect("admissible by construction");
                out.push(BookkeepingCase {
                    alpha,
                    nu1,
                    nu2,
                    l,
                    m,
                    t,
                    unclipped: nu1 >= 2 && nu2 >= 4 && alpha >= 4,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hnls_model::EquationParams;
    use crate::integrators::{evolve, Scheme};
    use crate::weights::{canonical_weight, example_weight, WeightSpec};
    use approx::assert_relative_eq;

    fn sech(x: f64) -> f64 {
        1.0 / x.cosh()
    }

    fn short_run(stride: usize) -> Trajectory {
        let grid = Grid::new(-40.0, 40.0, 256).unwrap();
        let u0 = Field::from_real_fn(&grid, sech);
        evolve(
            &u0,
            0.02,
            1e-3,
            Scheme::Strang,
            &EquationParams::base(1.0, 1.0).unwrap(),
            stride,
        )
        .unwrap()
    }

    fn frozen(u: Field, count: usize, p: EquationParams) -> Trajectory {
        Trajectory {
            times: (0..count).map(|j| j as f64 * 0.01).collect(),
            states: vec![u; count],
            params: p,
            scheme: Scheme::Strang,
            dt: 0.01,
            stride: 1,
        }
    }

    #[test]
    fn zero_field_reports_vanish() {
        let grid = Grid::new(-10.0, 10.0, 64).unwrap();
        let traj = frozen(Field::zeros(&grid), 4, EquationParams::base(1.0, 1.0).unwrap());
        assert_eq!(l2_drift(&traj).unwrap().max_abs_residual(), 0.0);
        assert_eq!(e2_residual(&traj).unwrap().max_abs_residual(), 0.0);
        assert_eq!(e3_residual(&traj).unwrap().max_abs_residual(), 0.0);
        let w = example_weight();
        assert_eq!(
            weighted_identity_residual(&traj, 2, &w).unwrap().max_abs_residual(),
            0.0
        );
        let l = inequality_check(&traj, 1, &w, 0.01).unwrap();
        assert_eq!((l.a, l.b, l.c, l.r), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(local_smoothing_integral(&traj, 2, &w).unwrap(), 0.0);
    }

    #[test]
    fn stride_and_alpha_preconditions() {
        let traj = short_run(2);
        assert!(e2_residual(&traj).is_err());
        assert!(weighted_identity_residual(&traj, 1, &example_weight()).is_err());
        let traj = short_run(1);
        assert!(weighted_identity_residual(&traj, 0, &example_weight()).is_err());
        assert!(weighted_identity_residual(&traj, 4, &example_weight()).is_err());
        assert!(local_smoothing_integral(&traj, 8, &example_weight()).is_err());
        let mut bad = traj.clone();
        bad.params = EquationParams::base(3.0, 1.0).unwrap();
        assert!(matches!(
            inequality_check(&bad, 1, &example_weight(), 0.01),
            Err(Error::SmoothingCondition { .. })
        ));
    }

    #[test]
    fn integral_terms_vanish_for_real_fields_and_plane_waves() {
        let grid = Grid::new(-20.0, 20.0, 256).unwrap();
        let u = Field::from_real_fn(&grid, sech);
        assert!(e2_integral(&u, 1.0).unwrap().abs() < 1e-15);
        assert!(e3_integral(&u, 1.0).unwrap().abs() < 1e-15);
        let k = 2.0 * std::f64::consts::PI * 3.0 / 40.0;
        let a = Complex64::new(0.4, -0.3);
        let u = Field::from_fn(&grid, |x| a * Complex64::from_polar(1.0, k * x));
        assert!(e2_integral(&u, 1.0).unwrap().abs() < 1e-13);
        assert!(e3_integral(&u, 1.0).unwrap().abs() < 1e-13);
    }

    #[test]
    fn e2_and_e3_integrals_agree() {
        let grid = Grid::new(-30.0, 30.0, 512).unwrap();
        let u = Field::from_fn(&grid, |x| {
            Complex64::new(sech(x), 0.5 * sech(x - 1.0)) * Complex64::from_polar(1.0, 0.7 * x)
        });
        let a = e2_integral(&u, 1.0).unwrap();
        let b = e3_integral(&u, 1.0).unwrap();
        assert!(a.abs() > 1e-2);
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn unit_weight_a1_matches_e2() {
        let traj = short_run(1);
        let one = canonical_weight(WeightSpec::new(0.0, 0, 0).unwrap()).unwrap();
        let w = weighted_identity_residual(&traj, 1, &one).unwrap();
        let e = e2_residual(&traj).unwrap();
        for (a, b) in w.residuals.iter().zip(&e.residuals) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn inequality_sum_equals_absorbed_identity() {
        let traj = short_run(1);
        let w = example_weight();
        for alpha in 1..=2 {
            let terms = weighted_terms(&traj, alpha, &w).unwrap();
            let bound = inequality_series(&traj, alpha, &w).unwrap();
            for (t, l) in terms.iter().zip(&bound) {
                let absw = traj.params.dispersion.abs();
                let expected = t.lhs() - absw * (t.slope_mass + t.gradient / (3.0 * traj.params.third_order));
                assert_relative_eq!(l.lhs(), expected, epsilon = 1e-12 * l.scale().max(1.0));
                assert!(l.r_bounded <= l.r + 1e-14);
                // B recomputed from its definition
                let over = Oversampler::new(traj.grid(), WEIGHT_OVERSAMPLING).unwrap();
                let j = traj.times.iter().position(|&s| s == l.time).unwrap();
                let d = over.derivatives(&traj.states[j], alpha + 1).pop().unwrap();
                let xi1 = w.sample(over.fine(), l.time, 1);
                let b = (3.0 - 1.0) * over.fine().integrate_with(|i| xi1[i] * d[i].norm_sqr());
                assert_relative_eq!(l.b, b, max_relative = 1e-12);
                assert!(l.b >= 0.0);
            }
        }
    }

    #[test]
    fn oversampler_interpolates_band_limited_fields() {
        let grid = Grid::new(-20.0, 20.0, 256).unwrap();
        let u = Field::from_fn(&grid, |x| Complex64::new(sech(x), 0.3 * sech(x - 2.0)));
        let over = Oversampler::new(&grid, 4).unwrap();
        let fine = over.derivatives(&u, 1);
        let coarse_d = u.derivative(1).unwrap();
        for j in 0..grid.n() {
            assert!((fine[0][4 * j] - u.values()[j]).norm() < 1e-13);
            assert!((fine[1][4 * j] - coarse_d.values()[j]).norm() < 1e-12);
        }
        for (j, x) in over.fine().points().enumerate().step_by(7) {
            assert!((fine[0][j].re - sech(x)).abs() < 1e-8, "x = {x}");
        }
        assert!(Oversampler::new(&grid, 3).is_err());
    }

    #[test]
    fn smoothing_integral_plane_wave() {
        let grid = Grid::new(0.0, 2.0 * std::f64::consts::PI, 64).unwrap();
        let k = 3.0;
        let a = 0.5;
        let u = Field::from_fn(&grid, |x| Complex64::from_polar(a, k * x));
        let traj = frozen(u, 11, EquationParams::base(0.0, 1.0).unwrap().without_nonlinearity());
        let eta = canonical_weight(WeightSpec::new(0.0, 0, 0).unwrap()).unwrap();
        for l in 0..4 {
            let v = local_smoothing_integral(&traj, l, &eta).unwrap();
            let expected = k.powi(2 * (l as i32 + 1)) * a * a * 2.0 * std::f64::consts::PI * 0.1;
            assert_relative_eq!(v, expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn bookkeeping_examples() {
        let (m, t) = exponent_bookkeeping(6, 2, 4, 6).unwrap();
        assert_eq!(m * 2, Rational::from_integer(4));
        assert_eq!(t * 2, Rational::from_integer(-8));
        assert!(exponent_bookkeeping(6, 3, 2, 6).is_err());
        assert!(exponent_bookkeeping(6, 2, 3, 6).is_err());
        assert!(exponent_bookkeeping(3, 1, 2, 6).is_err());
        assert!(exponent_bookkeeping(9, 4, 5, 6).is_err());
    }

    #[test]
    fn bookkeeping_sweep_unclipped_cases() {
        let cases = bookkeeping_sweep(10);
        assert!(!cases.is_empty());
        for c in cases.iter().filter(|c| c.unclipped) {
            assert_eq!(c.m * 2, Rational::from_integer(4), "{c:?}");
            assert_eq!(c.t * 2, Rational::from_integer(-(c.l + 2)), "{c:?}");
        }
        assert!(cases.iter().any(|c| !c.unclipped));
    }
}
