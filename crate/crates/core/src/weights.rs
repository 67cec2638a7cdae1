//! Weight functions of class `W_{sigma,i,k}` and weighted Sobolev diagnostics.
//!
//! A weight is always separable, `xi(x, t) = t^k h(x)`, with the spatial
//! profile `h` supplied together with its first five derivatives. Every
//! profile used here (canonical, the bump-free example, antiderivatives of
//! either) has that form, and the time derivative follows analytically as
//! `k t^(k-1) h(x)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::spectral_grid::{Field, Grid, MAX_DERIVATIVE_ORDER};

/// Number of spatial derivatives a profile supplies beyond the value itself.
pub const WEIGHT_DERIVATIVES: usize = 5;

/// `[h, h', h'', h''', h'''', h''''']` at one point.
pub type Jet = [f64; WEIGHT_DERIVATIVES + 1];

/// Class parameters: exponential rate on the left, polynomial power on the
/// right, power of `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightSpec {
    pub sigma: f64,
    pub i: u32,
    pub k: u32,
}

impl WeightSpec {
    pub fn new(sigma: f64, i: u32, k: u32) -> Result<Self> {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::InvalidWeight(format!(
                "sigma must be finite and non-negative, got {sigma}"
            )));
        }
        Ok(Self { sigma, i, k })
    }
}

impl fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "W({}, {}, {})", self.sigma, self.i, self.k)
    }
}

/// Spatial profile of a weight.
pub trait Profile: Send + Sync + fmt::Debug {
    fn jet(&self, x: f64) -> Jet;
}

/// A sampled-on-demand weight `xi(x, t) = t^k h(x)`.
#[derive(Clone, Debug)]
pub struct Weight {
    spec: WeightSpec,
    profile: Arc<dyn Profile>,
}

impl Weight {
    pub fn from_profile(spec: WeightSpec, profile: Arc<dyn Profile>) -> Self {
        Self { spec, profile }
    }

    pub fn spec(&self) -> WeightSpec {
        self.spec
    }

    pub fn profile(&self) -> &Arc<dyn Profile> {
        &self.profile
    }

    fn time_factor(&self, t: f64) -> f64 {
        t.powi(self.spec.k as i32)
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        self.time_factor(t) * self.profile.jet(x)[0]
    }

    /// `d^j xi / dx^j` for `j <= 5`.
    pub fn d_eval(&self, x: f64, t: f64, j: usize) -> f64 {
        assert!(j <= WEIGHT_DERIVATIVES, "weight derivative order {j} > 5");
        self.time_factor(t) * self.profile.jet(x)[j]
    }

    pub fn dt_eval(&self, x: f64, t: f64) -> f64 {
        match self.spec.k {
            0 => 0.0,
            k => k as f64 * t.powi(k as i32 - 1) * self.profile.jet(x)[0],
        }
    }

    /// Full spatial jet of `xi(., t)` at `x`.
    pub fn jet(&self, x: f64, t: f64) -> Jet {
        let s = self.time_factor(t);
        self.profile.jet(x).map(|v| s * v)
    }

    /// Samples of `d^j xi(., t)` on the grid points.
    pub fn sample(&self, grid: &Grid, t: f64, j: usize) -> Vec<f64> {
        grid.points().map(|x| self.d_eval(x, t, j)).collect()
    }

    pub fn sample_dt(&self, grid: &Grid, t: f64) -> Vec<f64> {
        grid.points().map(|x| self.dt_eval(x, t)).collect()
    }

    /// Profile jets on the grid points, reusable for every time.
    pub fn tabulate(&self, grid: &Grid) -> WeightTable {
        WeightTable {
            spec: self.spec,
            jets: grid.points().map(|x| self.profile.jet(x)).collect(),
        }
    }
}

/// Grid samples of a weight's spatial profile.
#[derive(Debug, Clone)]
pub struct WeightTable {
    spec: WeightSpec,
    jets: Vec<Jet>,
}

impl WeightTable {
    /// Same values as [`Weight::sample`].
    pub fn sample(&self, t: f64, j: usize) -> Vec<f64> {
        assert!(j <= WEIGHT_DERIVATIVES, "weight derivative order {j} > 5");
        let s = t.powi(self.spec.k as i32);
        self.jets.iter().map(|jet| s * jet[j]).collect()
    }

    pub fn sample_dt(&self, t: f64) -> Vec<f64> {
        let k = self.spec.k;
        let s = if k == 0 { 0.0 } else { k as f64 * t.powi(k as i32 - 1) };
        self.jets.iter().map(|jet| s * jet[0]).collect()
    }
}

/// Smooth weight equal to 1 for `x <= 0` and `1 + exp(-1/x)` for `x > 0`.
#[derive(Debug, Clone)]
pub struct ExampleProfile {
    // P_j with d^j exp(-1/x) = exp(-1/x) P_j(1/x); coefficients low to high
    polys: Vec<Vec<f64>>,
}

impl ExampleProfile {
    pub fn new() -> Self {
        let mut polys = vec![vec![1.0]];
        for n in 0..WEIGHT_DERIVATIVES {
            // P_{n+1}(y) = y^2 (P_n(y) - P_n'(y))
            let p = &polys[n];
            let mut diff = p.clone();
            for (d, c) in p.iter().enumerate().skip(1) {
                diff[d - 1] -= d as f64 * c;
            }
            let mut next = vec![0.0, 0.0];
            next.extend(diff);
            polys.push(next);
        }
        Self { polys }
    }
}

impl Default for ExampleProfile {
    fn default() -> Self {
        Self::new()
    }
}

impl Profile for ExampleProfile {
    fn jet(&self, x: f64) -> Jet {
        let mut out = [0.0; WEIGHT_DERIVATIVES + 1];
        out[0] = 1.0;
        if x <= 0.0 {
            return out;
        }
        let y = 1.0 / x;
        if y > 700.0 {
            // exp(-y) underflows long before the polynomial matters
            return out;
        }
        let e = (-y).exp();
        for (j, p) in self.polys.iter().enumerate() {
            let poly = p.iter().rev().fold(0.0, |acc, c| acc * y + c);
            out[j] += e * poly;
        }
        out
    }
}

/// The weight `1 + exp(-1/x)` (and 1 for `x <= 0`), treated as a member of
/// `W_{0,0,0}`: it is bounded above and below, so it cannot carry a positive
/// polynomial power on the right.
pub fn example_weight() -> Weight {
    Weight::from_profile(WeightSpec { sigma: 0.0, i: 0, k: 0 }, Arc::new(ExampleProfile::new()))
}

/// Jet in `s` of the transition `S(s) = f(s) / (f(s) + f(1 - s))` with
/// `f(s) = exp(-1/s)`: zero for `s <= 0`, one for `s >= 1`, smooth, and
/// every derivative vanishes at both ends.
fn transition_jet(bump: &ExampleProfile, s: f64) -> Jet {
    let mut out = [0.0; WEIGHT_DERIVATIVES + 1];
    if s <= 0.0 {
        return out;
    }
    if s >= 1.0 {
        out[0] = 1.0;
        return out;
    }
    let mut a = bump.jet(s);
    a[0] -= 1.0;
    let mut g = bump.jet(1.0 - s);
    g[0] -= 1.0;
    let mut b = a;
    for (j, bj) in b.iter_mut().enumerate() {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        *bj += sign * g[j];
    }
    // q b = a, differentiated n times
    for n in 0..=WEIGHT_DERIVATIVES {
        let mut acc = a[n];
        for m in 0..n {
            acc -= binomial(n, m) * out[m] * b[n - m];
        }
        out[n] = acc / b[0];
    }
    out
}

/// Canonical profile: `exp(sigma x)` for `x <= -1`, `c_R (kappa + x)^i` for
/// `x >= 1`, and `l + S (r - l)` in between with a flat-ended smooth
/// transition `S`, so the profile is smooth across the seams.
///
/// With `kappa = 2` and `c_R = exp(sigma)` the right branch dominates the
/// left one on `[-1, 1]`, which makes the blend nondecreasing.
#[derive(Debug, Clone)]
pub struct CanonicalProfile {
    sigma: f64,
    power: u32,
    kappa: f64,
    c_right: f64,
    bump: ExampleProfile,
}

impl CanonicalProfile {
    pub fn new(spec: WeightSpec) -> Self {
        Self {
            sigma: spec.sigma,
            power: spec.i,
            kappa: 2.0,
            c_right: spec.sigma.exp(),
            bump: ExampleProfile::new(),
        }
    }

    fn left(&self, x: f64) -> Jet {
        let e = (self.sigma * x).exp();
        let mut out = [0.0; WEIGHT_DERIVATIVES + 1];
        let mut p = 1.0;
        for o in out.iter_mut() {
            *o = e * p;
            p *= self.sigma;
        }
        out
    }

    fn right(&self, x: f64) -> Jet {
        let base = self.kappa + x;
        let mut out = [0.0; WEIGHT_DERIVATIVES + 1];
        let mut coeff = self.c_right;
        for (j, o) in out.iter_mut().enumerate() {
            let j = j as u32;
            if j > self.power {
                break;
            }
            *o = coeff * base.powi((self.power - j) as i32);
            coeff *= (self.power - j) as f64;
        }
        out
    }
}

impl Profile for CanonicalProfile {
    fn jet(&self, x: f64) -> Jet {
        if x <= -1.0 {
            return self.left(x);
        }
        if x >= 1.0 {
            return self.right(x);
        }
        let l = self.left(x);
        let r = self.right(x);
        let s = (x + 1.0) / 2.0;
        let sj = transition_jet(&self.bump, s);
        let mut out = l;
        // h = l + S((x + 1) / 2) (r - l)
        for n in 0..=WEIGHT_DERIVATIVES {
            let mut acc = 0.0;
            for m in 0..=n {
                let ds = sj[m] * 0.5f64.powi(m as i32);
                acc += binomial(n, m) * ds * (r[n - m] - l[n - m]);
            }
            out[n] += acc;
        }
        out
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut acc = 1.0;
    for j in 0..k {
        acc = acc * (n - j) as f64 / (j + 1) as f64;
    }
    acc
}

/// Smooth monotone member of `W_{sigma,i,k}`; see [`CanonicalProfile`].
pub fn canonical_weight(spec: WeightSpec) -> Result<Weight> {
    let spec = WeightSpec::new(spec.sigma, spec.i, spec.k)?;
    Ok(Weight::from_profile(spec, Arc::new(CanonicalProfile::new(spec))))
}

// 8-point Gauss-Legendre nodes and weights on [-1, 1]
const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

fn gauss_legendre(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    GL_NODES
        .iter()
        .zip(GL_WEIGHTS)
        .map(|(&z, w)| w * f(mid + half * z))
        .sum::<f64>()
        * half
}

/// Profile of `xi = (1 / (3 beta - |omega|)) * integral_{-inf}^x eta`.
///
/// The integral is tabulated on knots `anchor + m * KNOT_SPACING` with
/// Gauss-Legendre panels. Left of the anchor:
/// * `sigma > 0`: `eta` is a pure exponential there, so the tail is
///   `eta(x) / sigma` in closed form;
/// * `sigma = 0`: the tail up to the anchor is replaced by the finite
///   constant `eta(anchor) * 1` (one unit of length), which keeps `xi`
///   positive on `[anchor - 1, inf)`.
#[derive(Debug)]
pub struct AntiderivativeProfile {
    eta: Arc<dyn Profile>,
    scale: f64,
    sigma: f64,
    anchor: f64,
    table: Vec<f64>,
}

const KNOT_SPACING: f64 = 1.0 / 32.0;

impl AntiderivativeProfile {
    fn eta_value(&self, x: f64) -> f64 {
        self.eta.jet(x)[0]
    }

    fn integral(&self, x: f64) -> f64 {
        if self.sigma > 0.0 && x <= self.anchor {
            return self.scale * self.eta_value(x) / self.sigma;
        }
        let f = |y: f64| self.eta_value(y);
        let rel = (x - self.anchor) / KNOT_SPACING;
        let last = self.table.len() - 1;
        let m = if rel <= 0.0 {
            0
        } else {
            (rel.floor() as usize).min(last)
        };
        let knot = self.anchor + m as f64 * KNOT_SPACING;
        let span = x - knot;
        let panels = ((span.abs() / KNOT_SPACING).ceil() as usize).max(1);
        let h = span / panels as f64;
        let mut acc = self.table[m];
        for p in 0..panels {
            let a = knot + p as f64 * h;
            acc += self.scale * gauss_legendre(&f, a, a + h);
        }
        acc
    }
}

impl Profile for AntiderivativeProfile {
    fn jet(&self, x: f64) -> Jet {
        let e = self.eta.jet(x);
        let mut out = [0.0; WEIGHT_DERIVATIVES + 1];
        out[0] = self.integral(x);
        for j in 1..=WEIGHT_DERIVATIVES {
            out[j] = self.scale * e[j - 1];
        }
        out
    }
}

/// Builds `xi` with `(3 beta - |omega|) d xi = eta`, tabulated on
/// `[span.0, span.1]`. The result lives in the class with `i` raised by one.
pub fn weight_from_eta(eta: &Weight, omega: f64, beta: f64, span: (f64, f64)) -> Result<Weight> {
    let gap = 3.0 * beta - omega.abs();
    if !(gap > 0.0) {
        return Err(Error::SmoothingCondition { omega, beta });
    }
    let (anchor, end) = span;
    if !(end > anchor) {
        return Err(Error::DegenerateInterval {
            x_min: anchor,
            x_max: end,
        });
    }
    let spec = eta.spec();
    if spec.sigma > 0.0 && anchor > -1.0 {
        return Err(Error::InvalidWeight(format!(
            "closed-form left tail needs the anchor in the exponential branch (x <= -1), got {anchor}"
        )));
    }
    let scale = 1.0 / gap;
    let eta_profile = eta.profile().clone();
    let knots = ((end - anchor) / KNOT_SPACING).ceil() as usize + 1;
    let eta_at_anchor = eta_profile.jet(anchor)[0];
    let tail = if spec.sigma > 0.0 {
        scale * eta_at_anchor / spec.sigma
    } else {
        scale * eta_at_anchor
    };
    let f = |y: f64| eta_profile.jet(y)[0];
    let mut table = Vec::with_capacity(knots);
    table.push(tail);
    for m in 1..knots {
        let a = anchor + (m - 1) as f64 * KNOT_SPACING;
        let prev = table[m - 1];
        table.push(prev + scale * gauss_legendre(&f, a, a + KNOT_SPACING));
    }
    let profile = AntiderivativeProfile {
        eta: eta_profile,
        scale,
        sigma: spec.sigma,
        anchor,
        table,
    };
    Ok(Weight::from_profile(
        WeightSpec {
            sigma: spec.sigma,
            i: spec.i + 1,
            k: spec.k,
        },
        Arc::new(profile),
    ))
}

/// Constants of the class conditions measured on a sampled box.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassConstants {
    /// inf / sup of `t^-k e^(-sigma x) xi` over sampled `x < -1`; `None`
    /// when the box does not reach that region.
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    /// inf / sup of `t^-k x^-i xi` over sampled `x > 1`.
    pub c3: Option<f64>,
    pub c4: Option<f64>,
    /// sup of `(t |d_t xi| + |d^j xi|) / xi`, `j = 1..=5`.
    pub c5: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassCondition {
    Positivity,
    Monotonicity,
    LeftExponential,
    RightPolynomial,
    DerivativeRatio,
}

impl fmt::Display for ClassCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Positivity => "positivity",
            Self::Monotonicity => "monotonicity (d xi >= 0)",
            Self::LeftExponential => "left exponential bounds",
            Self::RightPolynomial => "right polynomial bounds",
            Self::DerivativeRatio => "derivative ratio bound",
        };
        f.write_str(s)
    }
}

/// Failed class check with the point that witnesses it.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassViolation {
    pub condition: ClassCondition,
    pub x: f64,
    pub t: f64,
    pub value: f64,
}

impl fmt::Display for ClassViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} violated at x = {}, t = {} (value {})",
            self.condition, self.x, self.t, self.value
        )
    }
}

impl std::error::Error for ClassViolation {}

/// Number of time samples used by [`verify_weight_class`].
pub const CLASS_TIME_SAMPLES: usize = 9;

/// Measures the class constants of `w` on the grid points and
/// [`CLASS_TIME_SAMPLES`] evenly spaced times in `t_range`.
pub fn verify_weight_class(
    w: &Weight,
    t_range: (f64, f64),
    grid: &Grid,
) -> std::result::Result<ClassConstants, ClassViolation> {
    let (t_lo, t_hi) = t_range;
    assert!(
        t_lo > 0.0 && t_hi >= t_lo,
        "time range must lie in (0, T], got {t_range:?}"
    );
    let spec = w.spec();
    let mut left: Option<(f64, f64)> = None;
    let mut right: Option<(f64, f64)> = None;
    let mut c5 = 0.0f64;
    let fold = |acc: &mut Option<(f64, f64)>, v: f64| {
        *acc = Some(match *acc {
            None => (v, v),
            Some((lo, hi)) => (lo.min(v), hi.max(v)),
        });
    };
    for step in 0..CLASS_TIME_SAMPLES {
        let t = if CLASS_TIME_SAMPLES == 1 {
            t_lo
        } else {
            t_lo + (t_hi - t_lo) * step as f64 / (CLASS_TIME_SAMPLES - 1) as f64
        };
        let tk = t.powi(spec.k as i32);
        for x in grid.points() {
            let jet = w.jet(x, t);
            let xi = jet[0];
            if !(xi > 0.0) {
                return Err(ClassViolation {
                    condition: ClassCondition::Positivity,
                    x,
                    t,
                    value: xi,
                });
            }
            if jet[1] < -1e-14 * xi {
                return Err(ClassViolation {
                    condition: ClassCondition::Monotonicity,
                    x,
                    t,
                    value: jet[1],
                });
            }
            if x < -1.0 {
                fold(&mut left, xi / tk * (-spec.sigma * x).exp());
            } else if x > 1.0 {
                fold(&mut right, xi / tk / x.powi(spec.i as i32));
            }
            let dt_term = t * w.dt_eval(x, t).abs();
            for d in jet.iter().skip(1) {
                let ratio = (dt_term + d.abs()) / xi;
                if !ratio.is_finite() {
                    return Err(ClassViolation {
                        condition: ClassCondition::DerivativeRatio,
                        x,
                        t,
                        value: ratio,
                    });
                }
                c5 = c5.max(ratio);
            }
        }
    }
    for (bounds, condition) in [
        (left, ClassCondition::LeftExponential),
        (right, ClassCondition::RightPolynomial),
    ] {
        if let Some((lo, hi)) = bounds {
            if !(lo > 0.0) || !hi.is_finite() {
                return Err(ClassViolation {
                    condition,
                    x: f64::NAN,
                    t: f64::NAN,
                    value: if lo > 0.0 { hi } else { lo },
                });
            }
        }
    }
    Ok(ClassConstants {
        c1: left.map(|b| b.0),
        c2: left.map(|b| b.1),
        c3: right.map(|b| b.0),
        c4: right.map(|b| b.1),
        c5,
    })
}

/// Weighted Sobolev norm report: `value = sum_j integral |d^j u|^2 xi dx`.
///
/// `value` is the squared norm; `per_derivative[j]` holds the `j`-th summand.
#[derive(Debug, Clone, PartialEq)]
pub struct NormReport {
    pub order: usize,
    pub value: f64,
    pub per_derivative: Vec<f64>,
}

pub fn weighted_norm(u: &Field, order: usize, w: &Weight, t: f64) -> Result<NormReport> {
    let xi = w.sample(u.grid(), t, 0);
    weighted_norm_with_samples(u, order, &xi)
}

/// [`weighted_norm`] with pre-sampled weight values.
pub fn weighted_norm_with_samples(u: &Field, order: usize, xi: &[f64]) -> Result<NormReport> {
    if order > MAX_DERIVATIVE_ORDER {
        return Err(Error::DerivativeOrder {
            order,
            max: MAX_DERIVATIVE_ORDER,
        });
    }
    let grid = u.grid();
    let per_derivative: Vec<f64> = u
        .derivatives(order)?
        .iter()
        .map(|d| grid.integrate_with(|j| d.values()[j].norm_sqr() * xi[j]))
        .collect();
    Ok(NormReport {
        order,
        value: per_derivative.iter().sum(),
        per_derivative,
    })
}

/// Weighted sup bound: `sup xi |u|^2` against `integral (|u|^2 + |u_x|^2) xi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupBound {
    pub sup: f64,
    pub integral: f64,
    pub ratio: f64,
}

pub fn sup_bound_ratio(u: &Field, w: &Weight, t: f64) -> Result<SupBound> {
    let grid = u.grid();
    let xi = w.sample(grid, t, 0);
    let ux = u.derivative(1)?;
    let sup = u
        .values()
        .iter()
        .zip(&xi)
        .map(|(v, s)| s * v.norm_sqr())
        .fold(0.0, f64::max);
    if sup == 0.0 {
        return Err(Error::ZeroField);
    }
    let integral = grid.integrate_with(|j| (u.values()[j].norm_sqr() + ux.values()[j].norm_sqr()) * xi[j]);
    Ok(SupBound {
        sup,
        integral,
        ratio: sup / integral,
    })
}

/// `L^p` norm by grid quadrature; `p = inf` gives the grid maximum.
pub fn lp_norm(u: &Field, p: f64) -> f64 {
    if p.is_infinite() {
        return u.max_abs();
    }
    u.grid().integrate_with(|j| u.values()[j].norm().powf(p)).powf(1.0 / p)
}

/// Interpolation exponent `a` of the Gagliardo-Nirenberg inequality in one
/// dimension, `1/p = j + a (1/r - m) + (1 - a)/q`, restricted to `[j/m, 1]`.
pub fn gn_exponent(j: usize, m: usize, p: f64, q: f64, r: f64) -> Result<f64> {
    if j > m {
        return Err(Error::Exponents(format!("need j <= m, got j = {j}, m = {m}")));
    }
    for (name, v) in [("q", q), ("r", r)] {
        if !(v >= 1.0) {
            return Err(Error::Exponents(format!("{name} = {v} must lie in [1, inf]")));
        }
    }
    if !(p > 0.0) {
        return Err(Error::Exponents(format!("p = {p} must be positive")));
    }
    let (ip, iq, ir) = (1.0 / p, 1.0 / q, 1.0 / r);
    let lower = if m == 0 { 0.0 } else { j as f64 / m as f64 };
    let num = ip - j as f64 - iq;
    let den = ir - m as f64 - iq;
    const TOL: f64 = 1e-12;
    let a = if den.abs() < TOL {
        if num.abs() < TOL {
            lower
        } else {
            return Err(Error::Exponents(format!(
                "no exponent a satisfies the scaling relation (p = {p}, q = {q}, r = {r})"
            )));
        }
    } else {
        num / den
    };
    if a < lower - TOL || a > 1.0 + TOL {
        return Err(Error::Exponents(format!("scaling gives a = {a}, outside [{lower}, 1]")));
    }
    Ok(a.clamp(lower, 1.0))
}

/// `||d^j u||_p / (||d^m u||_r^a ||u||_q^(1-a))` with `a` from [`gn_exponent`].
pub fn gn_ratio(u: &Field, j: usize, m: usize, p: f64, q: f64, r: f64) -> Result<f64> {
    let a = gn_exponent(j, m, p, q, r)?;
    let dj = u.derivative(j)?;
    let dm = u.derivative(m)?;
    let num = lp_norm(&dj, p);
    let base = lp_norm(u, q);
    if base == 0.0 {
        return Err(Error::ZeroField);
    }
    let top = lp_norm(&dm, r);
    Ok(num / (top.powf(a) * base.powf(1.0 - a)))
}
