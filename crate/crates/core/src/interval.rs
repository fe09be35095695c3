//! Exact laws of one-dimensional Brownian motion killed on leaving an interval.
//!
//! Everything is evaluated on the unit interval `(0, 1)` and mapped back by
//! Brownian scaling: for an interval of width `w`, positions are rescaled by
//! `w` and times by `w^2`.
//!
//! Two series representations are available for every quantity. The image
//! series (sums of Gaussian tails over reflected starting points) converges
//! quickly for small times, the spectral series (sine eigenfunction
//! expansion) for large times. Both are truncated with an explicit bound on
//! the neglected tail.

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;

use crate::error::{Error, Result};

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;
const MAX_TERMS: usize = 200_000;

/// An open interval `(lo, hi)` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Domain(format!("invalid interval ({lo}, {hi})")));
        }
        Ok(Interval { lo, hi })
    }

    /// The symmetric interval `(-r, r)`.
    pub fn symmetric(r: f64) -> Result<Self> {
        Interval::new(-r, r)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn half_width(&self) -> f64 {
        0.5 * self.width()
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    pub fn contains_closed(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    /// Distance from `x` to the nearer endpoint.
    pub fn distance_to_boundary(&self, x: f64) -> f64 {
        (x - self.lo).min(self.hi - x)
    }

    pub fn endpoint(&self, side: Side) -> f64 {
        match side {
            Side::Lo => self.lo,
            Side::Hi => self.hi,
        }
    }

    pub(crate) fn to_unit(&self, x: f64) -> f64 {
        (x - self.lo) / self.width()
    }

    pub(crate) fn time_to_unit(&self, t: f64) -> f64 {
        t / (self.width() * self.width())
    }

    /// Maps a unit-interval position back, keeping the result strictly inside.
    pub(crate) fn from_unit_interior(&self, y: f64) -> f64 {
        let v = self.lo + self.width() * y;
        if v <= self.lo {
            next_up(self.lo)
        } else if v >= self.hi {
            next_down(self.hi)
        } else {
            v
        }
    }
}

/// Which endpoint a path leaves through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Lo,
    Hi,
}

/// Series representation selector, exposed for cross-checking.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Series {
    /// Method of images; preferred for small times.
    Images,
    /// Sine eigenfunction expansion; preferred for large times.
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelAccuracy {
    /// Absolute bound on every truncated series tail.
    pub eps_series: f64,
    /// Tolerance of the inverse-CDF root finder.
    pub eps_invert: f64,
    /// `t / width^2` below which the image series is used.
    pub t_switch_scale: f64,
}

impl Default for KernelAccuracy {
    fn default() -> Self {
        KernelAccuracy {
            eps_series: 1e-13,
            eps_invert: 1e-12,
            t_switch_scale: 0.5,
        }
    }
}

impl KernelAccuracy {
    pub fn validate(&self) -> Result<()> {
        if self.eps_series > 0.0 && self.eps_invert > 0.0 && self.t_switch_scale > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!(
                "non-positive kernel accuracy {self:?}"
            )))
        }
    }
}

/// Laplace transform `E[exp(-beta * eta)]` of the exit time from `iv` started at `x`.
///
/// With `c` the midpoint, `a` the half-width and `k = sqrt(2 beta)` this is
/// `cosh(k (x - c)) / cosh(k a)`, evaluated without overflow.
pub fn exit_laplace(beta: f64, x: f64, iv: &Interval) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("rate must be positive, got {beta}")));
    }
    if !iv.contains_closed(x) {
        return Err(Error::Domain(format!("{x} outside [{}, {}]", iv.lo, iv.hi)));
    }
    if x == iv.lo || x == iv.hi {
        return Ok(1.0);
    }
    let k = (2.0 * beta).sqrt();
    let a = iv.half_width();
    let y = (x - iv.midpoint()).abs().min(a);
    let v = (k * (y - a)).exp() * (1.0 + (-2.0 * k * y).exp()) / (1.0 + (-2.0 * k * a).exp());
    Ok(v.min(1.0))
}

/// Kernel evaluator carrying its accuracy settings.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IntervalKernels {
    pub accuracy: KernelAccuracy,
}

impl IntervalKernels {
    pub fn new(accuracy: KernelAccuracy) -> Result<Self> {
        accuracy.validate()?;
        Ok(IntervalKernels { accuracy })
    }

    fn eps(&self) -> f64 {
        self.accuracy.eps_series
    }

    fn series_for(&self, t_unit: f64) -> Series {
        if t_unit <= self.accuracy.t_switch_scale {
            Series::Images
        } else {
            Series::Spectral
        }
    }

    /// `P(eta <= t)` for the path started at `x`.
    pub fn exit_time_cdf(&self, t: f64, x: f64, iv: &Interval) -> Result<f64> {
        check_time(t)?;
        check_interior(x, iv)?;
        let tu = iv.time_to_unit(t);
        Ok(self.unit_exit_cdf(tu, iv.to_unit(x), self.series_for(tu)))
    }

    /// Same as [`exit_time_cdf`](Self::exit_time_cdf) with an explicit series choice.
    pub fn exit_time_cdf_with(&self, t: f64, x: f64, iv: &Interval, series: Series) -> Result<f64> {
        check_time(t)?;
        check_interior(x, iv)?;
        Ok(self.unit_exit_cdf(iv.time_to_unit(t), iv.to_unit(x), series))
    }

    /// `P(eta > t)`.
    pub fn survival(&self, t: f64, x: f64, iv: &Interval) -> Result<f64> {
        check_time(t)?;
        check_interior(x, iv)?;
        let tu = iv.time_to_unit(t);
        Ok(self.unit_survival(tu, iv.to_unit(x), self.series_for(tu)))
    }

    /// Draws the exit time and the side through which the path leaves.
    pub fn sample_exit<R: Rng + ?Sized>(
        &self,
        x: f64,
        iv: &Interval,
        rng: &mut R,
    ) -> Result<(f64, Side)> {
        check_interior(x, iv)?;
        let xu = iv.to_unit(x);
        let side = if rng.gen::<f64>() < xu {
            Side::Hi
        } else {
            Side::Lo
        };
        let u = open01(rng);
        let t = self.invert_side_time(u, xu, side)?;
        Ok((t * iv.width() * iv.width(), side))
    }

    /// Draws the exit time alone (side marginalised).
    pub fn sample_exit_time<R: Rng + ?Sized>(
        &self,
        x: f64,
        iv: &Interval,
        rng: &mut R,
    ) -> Result<f64> {
        self.sample_exit(x, iv, rng).map(|(t, _)| t)
    }

    /// Draws `X_t` conditioned on the path not having left `iv` by time `t`.
    pub fn sample_position_given_survival<R: Rng + ?Sized>(
        &self,
        t: f64,
        x: f64,
        iv: &Interval,
        rng: &mut R,
    ) -> Result<f64> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Domain(format!(
                "conditioning time must be positive, got {t}"
            )));
        }
        check_interior(x, iv)?;
        let y =
            self.unit_position_given_survival(iv.time_to_unit(t), iv.to_unit(x), open01(rng))?;
        Ok(iv.from_unit_interior(y))
    }

    /// CDF of `X_t` given survival, evaluated at `y` (used by tests and diagnostics).
    pub fn position_cdf_given_survival(
        &self,
        t: f64,
        x: f64,
        y: f64,
        iv: &Interval,
    ) -> Result<f64> {
        check_time(t)?;
        check_interior(x, iv)?;
        let tu = iv.time_to_unit(t);
        let xu = iv.to_unit(x);
        let yu = iv.to_unit(y).clamp(0.0, 1.0);
        let series = self.series_for(tu);
        let total = self.position_mass(tu, xu, 1.0, series).0;
        if total < self.eps() {
            return Err(Error::ConditioningTooRare { survival: total });
        }
        Ok((self.position_mass(tu, xu, yu, series).0 / total).clamp(0.0, 1.0))
    }

    // ---- unit-interval internals -------------------------------------------

    pub(crate) fn unit_exit_cdf(&self, t: f64, x: f64, series: Series) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match series {
            Series::Images => {
                let (g_hi, _) = images_side(t, x, self.eps());
                let (g_lo, _) = images_side(t, 1.0 - x, self.eps());
                (g_hi + g_lo).clamp(0.0, 1.0)
            }
            Series::Spectral => (1.0 - self.unit_survival(t, x, Series::Spectral)).clamp(0.0, 1.0),
        }
    }

    pub(crate) fn unit_survival(&self, t: f64, x: f64, series: Series) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        match series {
            Series::Images => 1.0 - self.unit_exit_cdf(t, x, Series::Images),
            Series::Spectral => {
                let (q_hi, _) = spectral_side(t, x, self.eps());
                let (q_lo, _) = spectral_side(t, 1.0 - x, self.eps());
                (q_hi + q_lo).clamp(0.0, 1.0)
            }
        }
    }

    /// Whether the path leaving through `side` (probability `side_prob`) with
    /// uniform `u` has done so by unit time `t`, i.e. `u * side_prob <= G_side(t)`.
    pub(crate) fn exits_by(&self, t: f64, x: f64, side: Side, u: f64) -> bool {
        let xs = side_start(x, side);
        match self.series_for(t) {
            Series::Images => u * xs <= images_side(t, xs, self.eps()).0,
            Series::Spectral => (1.0 - u) * xs >= spectral_side(t, xs, self.eps()).0,
        }
    }

    /// Unit time at which the joint law `G_side` reaches `u * P(side)`.
    pub(crate) fn invert_side_time(&self, u: f64, x: f64, side: Side) -> Result<f64> {
        let xs = side_start(x, side);
        let eps = self.eps();
        let switch = self.accuracy.t_switch_scale;
        let target_lo = u * xs;
        let target_hi = (1.0 - u) * xs;
        // f(s) with t = exp(s); increasing in s.
        let f = |s: f64| -> (f64, f64) {
            let t = s.exp();
            if t <= switch {
                let (g, dens) = images_side(t, xs, eps);
                (g - target_lo, dens * t)
            } else {
                let (q, dens) = spectral_side(t, xs, eps);
                (target_hi - q, dens * t)
            }
        };
        let a0 = (1.0 - xs).max(f64::MIN_POSITIVE);
        let mut lo = (a0 * a0 * 1e-2).max(1e-300).ln();
        while f(lo).0 > 0.0 {
            lo -= 2.0;
            if lo < -690.0 {
                return Ok(lo.exp());
            }
        }
        let mut hi = lo.max(-2.0) + 1.0;
        while f(hi).0 < 0.0 {
            hi += 1.0;
            if hi > 10.0 {
                // Beyond unit time e^10 the remaining mass is below 1e-900.
                return Ok(hi.exp());
            }
        }
        let s = safe_newton(f, lo, hi, 0.5 * (lo + hi), self.accuracy.eps_invert)?;
        Ok(s.exp())
    }

    pub(crate) fn unit_position_given_survival(&self, t: f64, x: f64, u: f64) -> Result<f64> {
        let series = self.series_for(t);
        let (total, _) = self.position_mass(t, x, 1.0, series);
        if !(total >= self.eps()) {
            return Err(Error::ConditioningTooRare { survival: total });
        }
        let target = u * total;
        let f = |y: f64| {
            let (m, dens) = self.position_mass(t, x, y, series);
            (m - target, dens)
        };
        let guess = (x + t.sqrt() * (u - 0.5) * SQRT_2PI).clamp(1e-3, 1.0 - 1e-3);
        safe_newton(f, 0.0, 1.0, guess, self.accuracy.eps_invert)
    }

    /// Killed mass `P(X_t <= y, eta > t)` and its density in `y`.
    fn position_mass(&self, t: f64, x: f64, y: f64, series: Series) -> (f64, f64) {
        match series {
            Series::Images => images_position(t, x, y, self.eps()),
            Series::Spectral => spectral_position(t, x, y, self.eps()),
        }
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && !t.is_nan() {
        Ok(())
    } else {
        Err(Error::Domain(format!("time must be non-negative, got {t}")))
    }
}

fn check_interior(x: f64, iv: &Interval) -> Result<()> {
    if iv.contains(x) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{x} not inside ({}, {})",
            iv.lo, iv.hi
        )))
    }
}

/// Start position seen from the side: leaving through `Lo` from `x` is
/// leaving through `Hi` from `1 - x`.
fn side_start(x: f64, side: Side) -> f64 {
    match side {
        Side::Hi => x,
        Side::Lo => 1.0 - x,
    }
}

pub(crate) fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return u;
        }
    }
}

pub(crate) fn norm_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / SQRT_2)
}

fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / SQRT_2PI
}

/// `Phi(b) - Phi(a)` for `a <= b`, accurate in both tails.
fn gauss_mass(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        norm_sf(a) - norm_sf(b)
    } else if b <= 0.0 {
        norm_sf(-b) - norm_sf(-a)
    } else {
        1.0 - norm_sf(b) - norm_sf(-a)
    }
}

/// Joint law of leaving through 1 before 0, image form: returns
/// `(G(t), g(t))` with `G(t) = P(eta <= t, exit at 1)` and `g = G'`.
///
/// `G(t) = 2 sum_j (-1)^j Phi_bar(a_j / sqrt t)` with
/// `a = 1-x, 1+x, 3-x, 3+x, ...`; an alternating series with decreasing
/// terms, so the first neglected term bounds the tail.
fn images_side(t: f64, x: f64, eps: f64) -> (f64, f64) {
    let st = t.sqrt();
    let dens_scale = 1.0 / (SQRT_2PI * t * st);
    let mut cdf = 0.0;
    let mut dens = 0.0;
    for j in 0..MAX_TERMS {
        let k = (j / 2) as f64;
        let a = if j % 2 == 0 {
            2.0 * k + 1.0 - x
        } else {
            2.0 * k + 1.0 + x
        };
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let z = a / st;
        let c = 2.0 * norm_sf(z);
        let d = a * dens_scale * (-0.5 * z * z).exp();
        cdf += sign * c;
        dens += sign * d;
        if j >= 1 && z > 1.0 && c < eps && d < eps {
            break;
        }
    }
    (cdf.max(0.0), dens.max(0.0))
}

/// Spectral form of the same joint law: returns `(Q(t), g(t))` with
/// `Q(t) = x - G(t) = P(eta > t, exit at 1)`.
fn spectral_side(t: f64, x: f64, eps: f64) -> (f64, f64) {
    let c = 0.5 * PI * PI * t;
    let mut q = 0.0;
    let mut dens = 0.0;
    for n in 1..MAX_TERMS {
        let nf = n as f64;
        let e = (-c * nf * nf).exp();
        let s = (nf * PI * x).sin();
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        q += sign * 2.0 / (nf * PI) * s * e;
        dens += sign * nf * PI * s * e;
        // Ratio of consecutive term bounds, used for a geometric tail bound.
        let ratio = (nf + 2.0) / (nf + 1.0) * (-c * (2.0 * nf + 3.0)).exp();
        let next = (nf + 1.0) * PI * (-c * (nf + 1.0) * (nf + 1.0)).exp();
        if ratio < 1.0 && next / (1.0 - ratio) < eps {
            break;
        }
        if e == 0.0 {
            break;
        }
    }
    (q.max(0.0), dens.max(0.0))
}

/// Killed transition mass `P(X_t <= y, eta > t)` and density, image form.
fn images_position(t: f64, x: f64, y: f64, eps: f64) -> (f64, f64) {
    let st = t.sqrt();
    let term = |k: f64| -> (f64, f64) {
        let m = gauss_mass((2.0 * k - x) / st, (y - x + 2.0 * k) / st)
            - gauss_mass((x + 2.0 * k) / st, (y + x + 2.0 * k) / st);
        let d = (norm_pdf((y - x + 2.0 * k) / st) - norm_pdf((y + x + 2.0 * k) / st)) / st;
        (m, d)
    };
    let (mut mass, mut dens) = term(0.0);
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        let (m1, d1) = term(kf);
        let (m2, d2) = term(-kf);
        mass += m1 + m2;
        dens += d1 + d2;
        let z = 2.0 * kf / st;
        if 4.0 * norm_sf(z) < eps && 4.0 * norm_pdf(z) / st < eps {
            break;
        }
    }
    (mass.max(0.0), dens.max(0.0))
}

/// Killed transition mass and density, spectral form.
fn spectral_position(t: f64, x: f64, y: f64, eps: f64) -> (f64, f64) {
    let c = 0.5 * PI * PI * t;
    let mut mass = 0.0;
    let mut dens = 0.0;
    for n in 1..MAX_TERMS {
        let nf = n as f64;
        let e = (-c * nf * nf).exp();
        let sx = (nf * PI * x).sin();
        mass += 2.0 / (nf * PI) * sx * (1.0 - (nf * PI * y).cos()) * e;
        dens += 2.0 * sx * (nf * PI * y).sin() * e;
        let ratio = (-c * (2.0 * nf + 3.0)).exp();
        let next = 2.0 * (-c * (nf + 1.0) * (nf + 1.0)).exp();
        if ratio < 1.0 && next / (1.0 - ratio) < eps {
            break;
        }
        if e == 0.0 {
            break;
        }
    }
    (mass.max(0.0), dens.max(0.0))
}

/// Safeguarded Newton iteration for an increasing function on `[lo, hi]`
/// with `f(lo) <= 0 <= f(hi)`. Falls back to bisection whenever the Newton
/// step leaves the bracket or stalls.
pub(crate) fn safe_newton<F>(f: F, mut lo: f64, mut hi: f64, guess: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> (f64, f64),
{
    let mut x = guess.clamp(lo, hi);
    let mut dx_old = hi - lo;
    let mut dx = dx_old;
    let (mut fx, mut dfx) = f(x);
    for _ in 0..300 {
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton_ok = dfx > 0.0 && {
            let nx = x - fx / dfx;
            nx > lo && nx < hi && (2.0 * fx).abs() <= (dx_old * dfx).abs()
        };
        dx_old = dx;
        if newton_ok {
            dx = fx / dfx;
            x -= dx;
        } else {
            dx = 0.5 * (hi - lo);
            x = lo + dx;
        }
        if dx.abs() <= tol * (1.0 + x.abs()) || hi - lo <= tol * (1.0 + x.abs()) {
            return Ok(x);
        }
        let r = f(x);
        fx = r.0;
        dfx = r.1;
    }
    Err(Error::NewtonDiverged(300))
}

fn next_up(v: f64) -> f64 {
    if v.is_nan() || v == f64::INFINITY {
        return v;
    }
    if v == 0.0 {
        return f64::from_bits(1);
    }
    let bits = v.to_bits();
    f64::from_bits(if v > 0.0 { bits + 1 } else { bits - 1 })
}

fn next_down(v: f64) -> f64 {
    -next_up(-v)
}
