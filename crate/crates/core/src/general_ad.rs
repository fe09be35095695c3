//! Euler discretisation of the automatic-differentiation weight for a general
//! diffusion `dX = mu(X) dt + sigma(X) dW` on a rectangle.
//!
//! Along the path the tangent process `Y` (the derivative of the flow in its
//! starting point) is propagated with the same increments, and the weight
//! `int_0^zeta theta (sigma^{-1} Y)^T dW` is accumulated with
//! `theta_s(r, y) = 1 / (d(y)^2 (s - r))`, `d` the distance to the boundary and
//! `zeta` the time at which `int theta dr` reaches one.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::rect::{RectSampler, Rectangle};

type VecFn = Arc<dyn Fn(&[f64], &mut DVector<f64>) + Send + Sync>;
type MatFn = Arc<dyn Fn(&[f64], &mut DMatrix<f64>) + Send + Sync>;
type ColJacFn = Arc<dyn Fn(&[f64], usize, &mut DMatrix<f64>) + Send + Sync>;

/// Drift, diffusion matrix and their Jacobians. `dsigma(x, i, out)` writes the
/// Jacobian of the `i`-th column of `sigma`.
#[derive(Clone)]
pub struct DiffusionSpec {
    dim: usize,
    mu: VecFn,
    sigma: MatFn,
    dmu: MatFn,
    dsigma: ColJacFn,
    brownian: bool,
}

impl fmt::Debug for DiffusionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffusionSpec")
            .field("dim", &self.dim)
            .field("brownian", &self.brownian)
            .finish()
    }
}

impl DiffusionSpec {
    pub fn new<M, S, DM, DS>(dim: usize, mu: M, sigma: S, dmu: DM, dsigma: DS) -> Result<Self>
    where
        M: Fn(&[f64], &mut DVector<f64>) + Send + Sync + 'static,
        S: Fn(&[f64], &mut DMatrix<f64>) + Send + Sync + 'static,
        DM: Fn(&[f64], &mut DMatrix<f64>) + Send + Sync + 'static,
        DS: Fn(&[f64], usize, &mut DMatrix<f64>) + Send + Sync + 'static,
    {
        if dim == 0 {
            return Err(Error::InvalidSpec(
                "diffusion dimension must be positive".into(),
            ));
        }
        Ok(DiffusionSpec {
            dim,
            mu: Arc::new(mu),
            sigma: Arc::new(sigma),
            dmu: Arc::new(dmu),
            dsigma: Arc::new(dsigma),
            brownian: false,
        })
    }

    /// Standard Brownian motion: `mu = 0`, `sigma = I`.
    pub fn brownian(dim: usize) -> Result<Self> {
        let mut spec = DiffusionSpec::new(
            dim,
            |_, out| out.fill(0.0),
            |_, out| out.fill_with_identity(),
            |_, out| out.fill(0.0),
            |_, _, out| out.fill(0.0),
        )?;
        spec.brownian = true;
        Ok(spec)
    }

    /// Linear drift `mu(x) = A x` with constant `sigma`.
    pub fn linear(a: DMatrix<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        let d = a.nrows();
        if !a.is_square() || sigma.shape() != (d, d) {
            return Err(Error::InvalidSpec(
                "drift and diffusion matrices must be square of equal size".into(),
            ));
        }
        if sigma.clone().try_inverse().is_none() {
            return Err(Error::InvalidSpec("diffusion matrix is singular".into()));
        }
        let a2 = a.clone();
        DiffusionSpec::new(
            d,
            move |x, out| out.gemv(1.0, &a, &DVector::from_column_slice(x), 0.0),
            move |_, out| out.copy_from(&sigma),
            move |_, out| out.copy_from(&a2),
            |_, _, out| out.fill(0.0),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_brownian(&self) -> bool {
        self.brownian
    }
}

/// Euler step size, horizon `T` of the weight clock and a step cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerConfig {
    pub dt: f64,
    pub horizon: f64,
    /// Largest clock increment `theta * h` allowed in one step.
    pub max_clock_step: f64,
    pub max_steps: usize,
}

impl EulerConfig {
    pub fn new(dt: f64, horizon: f64) -> Result<Self> {
        let cfg = EulerConfig {
            dt,
            horizon,
            max_clock_step: 0.05,
            max_steps: 50_000_000,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0
            && self.horizon > 0.0
            && self.max_clock_step > 0.0
            && self.max_clock_step <= 0.1)
        {
            return Err(Error::InvalidSpec(format!(
                "bad Euler configuration {self:?}"
            )));
        }
        Ok(())
    }
}

/// Reusable buffers for [`step_with_tangent`].
#[derive(Debug, Clone)]
pub struct TangentStepper {
    mu: DVector<f64>,
    sig: DMatrix<f64>,
    dmu: DMatrix<f64>,
    dsig: DMatrix<f64>,
    y_next: DMatrix<f64>,
    dw: DVector<f64>,
}

impl TangentStepper {
    pub fn new(dim: usize) -> Self {
        TangentStepper {
            mu: DVector::zeros(dim),
            sig: DMatrix::zeros(dim, dim),
            dmu: DMatrix::zeros(dim, dim),
            dsig: DMatrix::zeros(dim, dim),
            y_next: DMatrix::zeros(dim, dim),
            dw: DVector::zeros(dim),
        }
    }

    /// Draws `dW ~ N(0, dt I)` and advances `(x, y)`; returns `dW`.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        spec: &DiffusionSpec,
        x: &mut DVector<f64>,
        y: &mut DMatrix<f64>,
        dt: f64,
        rng: &mut R,
    ) -> &DVector<f64> {
        let sd = dt.sqrt();
        for v in self.dw.iter_mut() {
            *v = sd * rng.sample::<f64, _>(StandardNormal);
        }
        self.advance(spec, x, y, dt);
        &self.dw
    }

    /// Advances with the increment already stored in `self.dw`.
    fn advance(
        &mut self,
        spec: &DiffusionSpec,
        x: &mut DVector<f64>,
        y: &mut DMatrix<f64>,
        dt: f64,
    ) {
        if spec.brownian {
            *x += &self.dw;
            return;
        }
        let xs = x.as_slice();
        (spec.mu)(xs, &mut self.mu);
        (spec.sigma)(xs, &mut self.sig);
        (spec.dmu)(xs, &mut self.dmu);
        self.y_next.copy_from(y);
        self.y_next.gemm(dt, &self.dmu, y, 1.0);
        for i in 0..spec.dim {
            (spec.dsigma)(xs, i, &mut self.dsig);
            self.y_next.gemm(self.dw[i], &self.dsig, y, 1.0);
        }
        std::mem::swap(y, &mut self.y_next);
        x.axpy(dt, &self.mu, 1.0);
        x.gemv(1.0, &self.sig, &self.dw, 1.0);
    }
}

/// One Euler step of `X` and its tangent process `Y` with a shared increment.
pub fn step_with_tangent<R: Rng + ?Sized>(
    x: &DVector<f64>,
    y: &DMatrix<f64>,
    spec: &DiffusionSpec,
    dt: f64,
    rng: &mut R,
) -> (DVector<f64>, DMatrix<f64>, DVector<f64>) {
    let mut stepper = TangentStepper::new(spec.dim);
    let (mut x, mut y) = (x.clone(), y.clone());
    let dw = stepper.step(spec, &mut x, &mut y, dt, rng).clone();
    (x, y, dw)
}

/// Which derivative the weight serves: the exit functional (clock horizon
/// `T`) or the killed semigroup at time `s` (horizon `s ^ T`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightTarget {
    Boundary,
    Interior(f64),
}

/// Result of one weighted path segment `[0, zeta]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdPath {
    pub weight: DVector<f64>,
    pub zeta: f64,
    /// `int_0^zeta theta dr`; one unless the path left the domain first.
    pub clock: f64,
    /// `int_0^zeta theta^2 dr`.
    pub theta_sq: f64,
    /// Position at `zeta`.
    pub x_zeta: DVector<f64>,
    /// The discretised path left the domain before the clock reached one.
    pub exited_before_clock: bool,
    pub steps: usize,
}

/// Simulates `(X, Y)` from `x` until the weight clock reaches one.
///
/// The step is `min(dt, max_clock_step / theta, (d / 8 |sigma|)^2)` and the
/// final step is shortened so the clock lands exactly on one.
pub fn sample_ad_weight<R: Rng + ?Sized>(
    x: &[f64],
    spec: &DiffusionSpec,
    rect: &Rectangle,
    target: WeightTarget,
    config: &EulerConfig,
    rng: &mut R,
) -> Result<AdPath> {
    config.validate()?;
    if x.len() != spec.dim || rect.dim() != spec.dim {
        return Err(Error::Domain(
            "diffusion, domain and start point dimensions differ".into(),
        ));
    }
    if !rect.contains(x) {
        return Err(Error::DegenerateStart(x.to_vec()));
    }
    let s = match target {
        WeightTarget::Boundary => config.horizon,
        WeightTarget::Interior(s) if s > 0.0 => s.min(config.horizon),
        WeightTarget::Interior(s) => {
            return Err(Error::Domain(format!(
                "weight time must be positive, got {s}"
            )))
        }
    };
    let d = spec.dim;
    let mut stepper = TangentStepper::new(d);
    let mut xv = DVector::from_column_slice(x);
    let mut y = DMatrix::<f64>::identity(d, d);
    let mut sig_inv = DMatrix::<f64>::zeros(d, d);
    let mut m = DMatrix::<f64>::zeros(d, d);
    let mut weight = DVector::<f64>::zeros(d);
    let (mut r, mut clock, mut theta_sq) = (0.0f64, 0.0f64, 0.0f64);
    let mut exited = false;
    let mut steps = 0usize;

    loop {
        let dist = rect.distance_to_boundary(xv.as_slice());
        if dist <= 0.0 {
            exited = true;
            break;
        }
        if steps >= config.max_steps {
            return Err(Error::ClockUnderResolved { time: r, clock });
        }
        (spec.sigma)(xv.as_slice(), &mut sig_inv);
        let sig_norm = sig_inv.norm();
        if !sig_inv.try_inverse_mut() {
            return Err(Error::InvalidSpec(format!(
                "diffusion matrix singular at {:?}",
                xv.as_slice()
            )));
        }
        let theta = 1.0 / (dist * dist * (s - r));
        let spatial = (dist / (8.0 * sig_norm)).powi(2);
        let mut h = config.dt.min(config.max_clock_step / theta).min(spatial);
        let last = clock + theta * h >= 1.0;
        if last {
            h = (1.0 - clock) / theta;
        }
        let sd = h.sqrt();
        for v in stepper.dw.iter_mut() {
            *v = sd * rng.sample::<f64, _>(StandardNormal);
        }
        m.gemm(1.0, &sig_inv, &y, 0.0);
        weight.gemv_tr(theta, &m, &stepper.dw, 1.0);
        theta_sq += theta * theta * h;
        clock += theta * h;
        stepper.advance(spec, &mut xv, &mut y, h);
        r += h;
        steps += 1;
        if last {
            clock = clock.max(1.0);
            break;
        }
    }
    if clock > 1.1 {
        return Err(Error::ClockUnderResolved { time: r, clock });
    }
    Ok(AdPath {
        weight,
        zeta: r,
        clock,
        theta_sq,
        x_zeta: xv,
        exited_before_clock: exited,
        steps,
    })
}

fn project_into(x: &mut DVector<f64>, rect: &Rectangle) {
    for (j, iv) in rect.axes().iter().enumerate() {
        x[j] = x[j].clamp(iv.lo(), iv.hi());
    }
}

/// Exit time and position after the weighted segment: exact for Brownian
/// motion (restarting from `X_zeta`), Euler with step `dt` otherwise.
pub fn complete_exit<R: Rng + ?Sized>(
    path: &AdPath,
    spec: &DiffusionSpec,
    rect: &Rectangle,
    config: &EulerConfig,
    rng: &mut R,
) -> Result<(f64, Vec<f64>)> {
    let mut x = path.x_zeta.clone();
    if !rect.contains(x.as_slice()) {
        project_into(&mut x, rect);
        return Ok((path.zeta, x.as_slice().to_vec()));
    }
    if spec.brownian {
        let exit = RectSampler::default().sample_exit(x.as_slice(), rect, rng)?;
        return Ok((path.zeta + exit.time, exit.pos));
    }
    let mut stepper = TangentStepper::new(spec.dim);
    let mut y = DMatrix::identity(spec.dim, spec.dim);
    let mut t = path.zeta;
    for _ in 0..config.max_steps {
        stepper.step(spec, &mut x, &mut y, config.dt, rng);
        t += config.dt;
        if !rect.contains(x.as_slice()) {
            project_into(&mut x, rect);
            return Ok((t, x.as_slice().to_vec()));
        }
    }
    Err(Error::ClockUnderResolved {
        time: t,
        clock: path.clock,
    })
}

/// Position at time `t >= zeta` of the path killed on leaving `rect`
/// (`None` if it left first).
pub fn complete_killed_at<R: Rng + ?Sized>(
    path: &AdPath,
    t: f64,
    spec: &DiffusionSpec,
    rect: &Rectangle,
    config: &EulerConfig,
    rng: &mut R,
) -> Result<Option<Vec<f64>>> {
    if path.exited_before_clock {
        return Ok(None);
    }
    let mut x = path.x_zeta.clone();
    if spec.brownian {
        return RectSampler::default().sample_killed_at(t - path.zeta, x.as_slice(), rect, rng);
    }
    let mut stepper = TangentStepper::new(spec.dim);
    let mut y = DMatrix::identity(spec.dim, spec.dim);
    let mut now = path.zeta;
    while now < t {
        let h = config.dt.min(t - now);
        stepper.step(spec, &mut x, &mut y, h, rng);
        now += h;
        if !rect.contains(x.as_slice()) {
            return Ok(None);
        }
    }
    Ok(Some(x.as_slice().to_vec()))
}

/// Lifetime distribution `rho` of a particle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LifetimeLaw {
    /// `rate e^{-rate t}`
    Exponential(f64),
    /// Gamma with shape 1/2: `sqrt(rate / (pi t)) e^{-rate t}`
    HalfGamma(f64),
    /// `rate / (2 sqrt t) e^{-rate sqrt t}`
    SqrtExponential(f64),
}

impl LifetimeLaw {
    fn rate(&self) -> f64 {
        match *self {
            LifetimeLaw::Exponential(b)
            | LifetimeLaw::HalfGamma(b)
            | LifetimeLaw::SqrtExponential(b) => b,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let b = self.rate();
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "lifetime rate must be positive, got {b}"
            )));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            LifetimeLaw::Exponential(b) => rng.sample::<f64, _>(Exp1) / b,
            LifetimeLaw::HalfGamma(b) => {
                let z: f64 = rng.sample(StandardNormal);
                0.5 * z * z / b
            }
            LifetimeLaw::SqrtExponential(b) => {
                let e: f64 = rng.sample(Exp1);
                (e / b).powi(2)
            }
        }
    }

    pub fn density(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match *self {
            LifetimeLaw::Exponential(b) => b * (-b * t).exp(),
            LifetimeLaw::HalfGamma(b) => (b / (PI * t)).sqrt() * (-b * t).exp(),
            LifetimeLaw::SqrtExponential(b) => b / (2.0 * t.sqrt()) * (-b * t.sqrt()).exp(),
        }
    }

    /// `P(tau > t)`
    pub fn survival(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        match *self {
            LifetimeLaw::Exponential(b) => (-b * t).exp(),
            LifetimeLaw::HalfGamma(b) => libm::erfc((b * t).sqrt()),
            LifetimeLaw::SqrtExponential(b) => (-b * t.sqrt()).exp(),
        }
    }

    /// `beta e^{-beta t} / rho(t)`, the factor of a particle dying at `t`.
    pub fn interior_factor(&self, beta: f64, t: f64) -> f64 {
        beta * (-beta * t).exp() / self.density(t)
    }

    /// `e^{-beta t} / P(tau > t)`, the factor of a particle exiting at `t`.
    pub fn boundary_factor(&self, beta: f64, t: f64) -> f64 {
        match *self {
            LifetimeLaw::Exponential(b) => ((b - beta) * t).exp(),
            _ => (-beta * t).exp() / self.survival(t),
        }
    }
}

/// One sample of `e^{-beta eta} h(X_eta) W_boundary`, whose mean is the
/// gradient of `x -> E[e^{-beta eta} h(X_eta)]`. Returns `(value, gradient)`.
pub fn boundary_weight_sample<R: Rng + ?Sized>(
    x: &[f64],
    spec: &DiffusionSpec,
    rect: &Rectangle,
    beta: f64,
    h: &Field,
    config: &EulerConfig,
    rng: &mut R,
) -> Result<(f64, DVector<f64>)> {
    let path = sample_ad_weight(x, spec, rect, WeightTarget::Boundary, config, rng)?;
    let (eta, pos) = complete_exit(&path, spec, rect, config, rng)?;
    let v = (-beta * eta).exp() * h.eval(&pos);
    Ok((v, path.weight * v))
}

/// One sample of `e^{-beta tau} g(X_tau) 1{tau < eta} / rho(tau)` with
/// `tau ~ law`, and of the same times `W_interior(tau)`. The means are
/// `E[int_0^eta e^{-beta s} g(X_s) ds]` and its gradient.
pub fn interior_weight_sample<R: Rng + ?Sized>(
    x: &[f64],
    spec: &DiffusionSpec,
    rect: &Rectangle,
    beta: f64,
    g: &Field,
    law: LifetimeLaw,
    config: &EulerConfig,
    rng: &mut R,
) -> Result<(f64, DVector<f64>)> {
    law.validate()?;
    let tau = law.sample(rng).max(f64::MIN_POSITIVE);
    let path = sample_ad_weight(x, spec, rect, WeightTarget::Interior(tau), config, rng)?;
    match complete_killed_at(&path, tau, spec, rect, config, rng)? {
        Some(pos) => {
            let v = law.interior_factor(beta, tau) / beta * g.eval(&pos);
            Ok((v, path.weight * v))
        }
        None => Ok((0.0, DVector::zeros(spec.dim))),
    }
}
