//! Validity checks for the branching representation: almost-sure extinction,
//! the dominating Galton-Watson law, the generating-function threshold
//! `gamma`, the integrability constant `C_0`, admissible radius searches and
//! supersolution residuals.

use rayon::prelude::*;

use crate::branching::derivative_weight;
use crate::error::{Error, Result};
use crate::estimator::{Moments, Z99};
use crate::field::Field;
use crate::interval::{exit_laplace, safe_newton};
use crate::problem::{NonlinearityTerm, ProblemSpec};
use crate::rect::{RectSampler, Rectangle};
use crate::rng::SampleStream;

/// `beta (sum |l| p_l - 1) - lambda_1 / 2` for the cube `(-r, r)^d`, with
/// `lambda_1 = d pi^2 / (4 r^2)`. Non-positive values certify extinction.
pub fn extinction_margin(beta: f64, terms: &[NonlinearityTerm], d: usize, r: f64) -> Result<f64> {
    extinction_margin_rect(beta, terms, &Rectangle::cube(d, r)?)
}

/// Cube-only variant taking the domain directly.
pub fn extinction_margin_rect(
    beta: f64,
    terms: &[NonlinearityTerm],
    rect: &Rectangle,
) -> Result<f64> {
    if !rect.is_cubic() {
        return Err(Error::UnsupportedDomain(format!(
            "extinction criterion needs a cube; per-axis eigenvalue sum is {}",
            rect.lambda1()
        )));
    }
    Ok(extinction_margin_any(beta, terms, rect))
}

/// Same criterion with `lambda_1 = sum_j pi^2 / w_j^2` for any rectangle.
pub fn extinction_margin_any(beta: f64, terms: &[NonlinearityTerm], rect: &Rectangle) -> f64 {
    beta * (mean_offspring(terms) - 1.0) - 0.5 * rect.lambda1()
}

/// Largest `r` with a non-positive margin on `(-r, r)^d`; `None` when every
/// radius qualifies.
pub fn extinction_radius(beta: f64, terms: &[NonlinearityTerm], d: usize) -> Option<f64> {
    let excess = mean_offspring(terms) - 1.0;
    (excess > 0.0).then(|| std::f64::consts::PI * (d as f64 / (8.0 * beta * excess)).sqrt())
}

fn mean_offspring(terms: &[NonlinearityTerm]) -> f64 {
    terms.iter().map(|t| t.l.total() as f64 * t.p).sum()
}

/// Offspring-count distribution `k -> P(|l| = k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OffspringLaw {
    probs: Vec<f64>,
}

impl OffspringLaw {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let total: f64 = probs.iter().sum();
        if probs.iter().any(|&p| !(p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSpec(format!(
                "offspring law {probs:?} is not a distribution"
            )));
        }
        Ok(OffspringLaw { probs })
    }

    pub fn from_terms(terms: &[NonlinearityTerm]) -> Result<Self> {
        let max = terms.iter().map(|t| t.l.total()).max().unwrap_or(0);
        let mut probs = vec![0.0; max + 1];
        for t in terms {
            probs[t.l.total()] += t.p;
        }
        OffspringLaw::new(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `p~_0 = 1 - delta + delta p_0`, `p~_k = delta p_k`.
    pub fn dominating(&self, delta: f64) -> OffspringLaw {
        let mut probs: Vec<f64> = self.probs.iter().map(|p| delta * p).collect();
        probs[0] += 1.0 - delta;
        OffspringLaw { probs }
    }

    pub fn pgf(&self, s: f64) -> f64 {
        self.probs.iter().rev().fold(0.0, |acc, &p| acc * s + p)
    }

    pub fn pgf_prime(&self, s: f64) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, &p)| acc * s + k as f64 * p)
    }

    pub fn pgf_second(&self, s: f64) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .skip(2)
            .rev()
            .fold(0.0, |acc, (k, &p)| acc * s + (k * (k - 1)) as f64 * p)
    }

    pub fn mean(&self) -> f64 {
        self.pgf_prime(1.0)
    }

    fn degree(&self) -> usize {
        self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }
}

/// Threshold `gamma = s* / f~(s*)` where `s* f~'(s*) = f~(s*)` for the law
/// dominated at level `delta`. Returns `(gamma, s*)`; when `f~` is affine
/// there is no root and `gamma = 1 / f~'` (infinite for pure death), with
/// `s* = inf`.
pub fn gamma_threshold(law: &OffspringLaw, delta: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::Domain(format!(
            "delta must lie in [0, 1], got {delta}"
        )));
    }
    let dom = law.dominating(delta);
    let mean = dom.mean();
    if mean >= 1.0 {
        return Err(Error::Supercritical(mean));
    }
    if dom.degree() < 2 {
        let slope = dom.pgf_prime(0.0);
        let gamma = if slope > 0.0 {
            1.0 / slope
        } else {
            f64::INFINITY
        };
        return Ok((gamma, f64::INFINITY));
    }
    // g(s) = s f~'(s) - f~(s) is increasing with g(1) = mean - 1 < 0.
    let g = |s: f64| (s * dom.pgf_prime(s) - dom.pgf(s), s * dom.pgf_second(s));
    let mut hi = 2.0;
    while g(hi).0 <= 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::NewtonDiverged(0));
        }
    }
    let lo = if hi > 2.0 { 0.5 * hi } else { 1.0 };
    let s = safe_newton(g, lo, hi, 0.5 * (lo + hi), 1e-15)?;
    Ok((s / dom.pgf(s), s))
}

/// Exit times of Brownian motion started at the centre of a reference
/// rectangle. By Brownian scaling the exit time from the rectangle scaled
/// by `k` about the centre is `k^2` times these draws, so one sample serves
/// a whole family of radii.
#[derive(Debug, Clone)]
pub struct ExitTimeSample {
    etas: Vec<f64>,
}

impl ExitTimeSample {
    pub fn new(rect: &Rectangle, n: u64, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSpec(format!(
                "need at least 2 exit samples, got {n}"
            )));
        }
        let sampler = RectSampler::default();
        let center = rect.center();
        let etas = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = SampleStream::new(seed, i).root_rng();
                sampler.sample_exit_time(&center, rect, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ExitTimeSample { etas })
    }

    pub fn len(&self) -> usize {
        self.etas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.etas.is_empty()
    }

    /// Estimate and standard error of `E[exp(-beta k^2 eta)]`.
    pub fn laplace(&self, beta: f64, scale: f64) -> (f64, f64) {
        let rate = beta * scale * scale;
        let m = self.etas.iter().fold(Moments::default(), |mut m, &t| {
            m.push((-rate * t).exp());
            m
        });
        (m.mean, m.std() / (m.n as f64).sqrt())
    }
}

/// `delta = 1 - inf_x E[exp(-beta eta^x)]` with its Monte Carlo standard error
/// (zero when exact).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaEstimate {
    pub delta: f64,
    pub std_error: f64,
}

/// The infimum is attained at the centre of any rectangle: the Laplace
/// transform is symmetric in each coordinate and, being 1 on the boundary,
/// nondecreasing away from the centre along every axis.
pub fn compute_delta(
    beta: f64,
    rect: &Rectangle,
    mc_samples: u64,
    seed: u64,
) -> Result<DeltaEstimate> {
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("rate must be positive, got {beta}")));
    }
    if rect.dim() == 1 {
        let iv = rect.axis(0);
        return Ok(DeltaEstimate {
            delta: 1.0 - exit_laplace(beta, iv.midpoint(), iv)?,
            std_error: 0.0,
        });
    }
    let sample = ExitTimeSample::new(rect, mc_samples, seed)?;
    let (m, se) = sample.laplace(beta, 1.0);
    Ok(DeltaEstimate {
        delta: 1.0 - m,
        std_error: se,
    })
}

/// `sup |b_i(x) W(x, y)|` over the interval, maximised with the constant 1.
pub fn gradient_constant(spec: &ProblemSpec) -> Result<f64> {
    if spec.b.is_empty() {
        return Ok(1.0);
    }
    if spec.dim() != 1 {
        return Err(Error::GradientUnsupported(spec.dim()));
    }
    let iv = *spec.rect.axis(0);
    let sup_for = |b: &Field, n: usize| {
        (1..n)
            .map(|j| {
                let x = iv.lo() + iv.width() * j as f64 / n as f64;
                let w = derivative_weight(spec.beta, &iv, x, iv.hi())
                    .abs()
                    .max(derivative_weight(spec.beta, &iv, x, iv.lo()).abs());
                (b.eval(&[x]) * w).abs()
            })
            .fold(0.0, f64::max)
    };
    let mut c1 = 1.0f64;
    for b in &spec.b {
        let mut n = 1024;
        let mut prev = sup_for(b, n);
        loop {
            n *= 2;
            let next = sup_for(b, n);
            if (next - prev).abs() <= 1e-6 * next.max(1.0) || n >= 1 << 22 {
                c1 = c1.max(next);
                break;
            }
            prev = next;
        }
    }
    Ok(c1)
}

/// `C_0 = max(||h||, sup_l ||c_l|| / p_l)` over the closed domain, multiplied
/// by the gradient constant when the problem has gradient marks.
pub fn compute_c0(spec: &ProblemSpec) -> Result<f64> {
    let h = spec.h.sup_abs(&spec.rect);
    let c = spec
        .terms
        .iter()
        .map(|t| t.c.sup_abs(&spec.rect) / t.p)
        .fold(0.0, f64::max);
    Ok(h.max(c) * gradient_constant(spec)?)
}

/// How `delta` is obtained.
#[derive(Debug, Clone)]
pub enum DeltaMethod {
    /// Closed form; one-dimensional domains only.
    Exact,
    /// Fresh Monte Carlo at the centre.
    MonteCarlo { samples: u64, seed: u64 },
    /// Reuse exit times sampled on a reference rectangle scaled by `scale`.
    Scaled {
        sample: std::sync::Arc<ExitTimeSample>,
        scale: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    pub lambda1: f64,
    pub extinction_margin: f64,
    pub delta: f64,
    pub delta_std_error: f64,
    /// Mean of the dominating offspring law.
    pub dominating_mean: f64,
    /// `None` when the dominating law is not subcritical.
    pub gamma: Option<f64>,
    pub s_star: Option<f64>,
    pub c0: f64,
    pub q: f64,
    pub admissible: bool,
}

/// Evaluates every threshold quantity. With a Monte Carlo `delta`, `gamma`
/// is computed at `delta + 2.576 se`, which can only lower it.
pub fn threshold_report(
    spec: &ProblemSpec,
    q: f64,
    method: &DeltaMethod,
) -> Result<ThresholdReport> {
    spec.validate()?;
    if !(q >= 1.0) {
        return Err(Error::Domain(format!(
            "moment order must be at least 1, got {q}"
        )));
    }
    let est = match method {
        DeltaMethod::Exact => {
            if spec.dim() != 1 {
                return Err(Error::UnsupportedDomain("exact delta needs d = 1".into()));
            }
            compute_delta(spec.beta, &spec.rect, 0, 0)?
        }
        DeltaMethod::MonteCarlo { samples, seed } => {
            compute_delta(spec.beta, &spec.rect, *samples, *seed)?
        }
        DeltaMethod::Scaled { sample, scale } => {
            let (m, se) = sample.laplace(spec.beta, *scale);
            DeltaEstimate {
                delta: 1.0 - m,
                std_error: se,
            }
        }
    };
    let law = OffspringLaw::from_terms(&spec.terms)?;
    let conservative = (est.delta + Z99 * est.std_error).clamp(0.0, 1.0);
    let dominating_mean = law.dominating(conservative).mean();
    let (gamma, s_star) = match gamma_threshold(&law, conservative) {
        Ok((g, s)) => (Some(g), Some(s)),
        Err(Error::Supercritical(_)) => (None, None),
        Err(e) => return Err(e),
    };
    let c0 = compute_c0(spec)?;
    let admissible = gamma.is_some_and(|g| c0.powf(q) <= g);
    Ok(ThresholdReport {
        lambda1: spec.rect.lambda1(),
        extinction_margin: extinction_margin_any(spec.beta, &spec.terms, &spec.rect),
        delta: est.delta,
        delta_std_error: est.std_error,
        dominating_mean,
        gamma,
        s_star,
        c0,
        q,
        admissible,
    })
}

/// Problems indexed by a size parameter `r`, with a `delta` rule for each.
pub trait RadiusFamily: Sync {
    fn spec(&self, r: f64) -> Result<ProblemSpec>;
    fn delta_method(&self, r: f64) -> DeltaMethod;
}

/// Cube family `(-r, r)^d` built by `build`. In d = 1 `delta` is exact;
/// otherwise it comes from one exit-time sample on `(-1, 1)^d`, rescaled.
pub struct CubeFamily<F> {
    build: F,
    sample: Option<std::sync::Arc<ExitTimeSample>>,
}

impl<F> CubeFamily<F>
where
    F: Fn(f64) -> Result<ProblemSpec> + Sync,
{
    pub fn new(d: usize, build: F, mc_samples: u64, seed: u64) -> Result<Self> {
        let sample = if d == 1 {
            None
        } else {
            Some(std::sync::Arc::new(ExitTimeSample::new(
                &Rectangle::cube(d, 1.0)?,
                mc_samples,
                seed,
            )?))
        };
        Ok(CubeFamily { build, sample })
    }
}

impl<F> RadiusFamily for CubeFamily<F>
where
    F: Fn(f64) -> Result<ProblemSpec> + Sync,
{
    fn spec(&self, r: f64) -> Result<ProblemSpec> {
        (self.build)(r)
    }

    fn delta_method(&self, r: f64) -> DeltaMethod {
        match &self.sample {
            None => DeltaMethod::Exact,
            Some(s) => DeltaMethod::Scaled {
                sample: s.clone(),
                scale: r,
            },
        }
    }
}

fn admissible_at<Fam: RadiusFamily + ?Sized>(family: &Fam, r: f64, q: f64) -> Result<bool> {
    let spec = family.spec(r)?;
    Ok(threshold_report(&spec, q, &family.delta_method(r))?.admissible)
}

/// Largest admissible `r` in `[lo, hi]`, by bisection to width `tol`.
pub fn admissible_radius<Fam: RadiusFamily + ?Sized>(
    family: &Fam,
    q: f64,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<f64> {
    if !(0.0 < lo && lo < hi && tol > 0.0) {
        return Err(Error::Domain(format!(
            "bad search range [{lo}, {hi}] / tol {tol}"
        )));
    }
    if !admissible_at(family, lo, q)? {
        return Err(Error::NeverAdmissible { lo, hi });
    }
    if admissible_at(family, hi, q)? {
        return Err(Error::AlwaysAdmissible { lo, hi });
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > tol {
        let m = 0.5 * (a + b);
        if admissible_at(family, m, q)? {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(a)
}

/// Worst values of the supersolution inequalities on a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupersolutionCheck {
    /// `max [ (1/2) Laplacian v + beta (sum_l |c_l|^q / p_l^{q-1} v^{|l|} - v) ]`; must be `<= 0`.
    pub max_residual: f64,
    /// `min (v - |h|^q)` on the boundary; must be `>= 0`.
    pub min_boundary_slack: f64,
}

impl SupersolutionCheck {
    pub fn holds(&self, tol: f64) -> bool {
        self.max_residual <= tol && self.min_boundary_slack >= -tol
    }
}

/// Grid check of a supersolution candidate `v` (with analytic Laplacian).
pub fn supersolution_residual(
    v: &Field,
    spec: &ProblemSpec,
    q: f64,
    grid_n: usize,
) -> Result<SupersolutionCheck> {
    spec.validate()?;
    if spec.marks() > 0 {
        return Err(Error::InvalidSpec(
            "supersolution check covers problems without gradient terms".into(),
        ));
    }
    if grid_n < 2 {
        return Err(Error::Domain(
            "grid needs at least 2 points per axis".into(),
        ));
    }
    let rect = &spec.rect;
    let d = rect.dim();
    let per_axis = grid_n
        .min((2_000_000f64.powf(1.0 / d as f64)) as usize)
        .max(2);

    let residual = |x: &[f64]| -> Result<f64> {
        let lap = v.laplacian(x).ok_or_else(|| {
            Error::InvalidSpec(format!("candidate {} has no analytic Laplacian", v.name()))
        })?;
        let vx = v.eval(x);
        let nl: f64 = spec
            .terms
            .iter()
            .map(|t| t.c.eval(x).abs().powf(q) / t.p.powf(q - 1.0) * vx.powi(t.l.total() as i32))
            .sum();
        Ok(0.5 * lap + spec.beta * (nl - vx))
    };

    let mut max_residual = f64::NEG_INFINITY;
    let mut min_slack = f64::INFINITY;
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0; d];
    let total = (per_axis + 1).pow(d as u32);
    for _ in 0..total {
        let mut on_boundary = false;
        for j in 0..d {
            let iv = rect.axis(j);
            x[j] = iv.lo() + iv.width() * idx[j] as f64 / per_axis as f64;
            if idx[j] == 0 || idx[j] == per_axis {
                on_boundary = true;
                x[j] = if idx[j] == 0 { iv.lo() } else { iv.hi() };
            }
        }
        if on_boundary {
            if v.eval(&x) < 0.0 {
                return Err(Error::InvalidSpec(format!(
                    "candidate {} is negative at {x:?}",
                    v.name()
                )));
            }
            min_slack = min_slack.min(v.eval(&x) - spec.h.eval(&x).abs().powf(q));
        } else {
            if v.eval(&x) < 0.0 {
                return Err(Error::InvalidSpec(format!(
                    "candidate {} is negative at {x:?}",
                    v.name()
                )));
            }
            max_residual = max_residual.max(residual(&x)?);
        }
        for j in 0..d {
            idx[j] += 1;
            if idx[j] <= per_axis {
                break;
            }
            idx[j] = 0;
        }
    }
    Ok(SupersolutionCheck {
        max_residual,
        min_boundary_slack: min_slack,
    })
}

/// Largest `r` in `[lo, hi]` for which `v` passes [`supersolution_residual`]
/// on the problem built at `r`, by bisection to width `tol`.
pub fn supersolution_radius<F>(
    build: F,
    v: &Field,
    q: f64,
    grid_n: usize,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<f64>
where
    F: Fn(f64) -> Result<ProblemSpec>,
{
    let ok = |r: f64| -> Result<bool> {
        Ok(supersolution_residual(v, &build(r)?, q, grid_n)?.holds(1e-12))
    };
    if !ok(lo)? {
        return Err(Error::NeverAdmissible { lo, hi });
    }
    if ok(hi)? {
        return Err(Error::AlwaysAdmissible { lo, hi });
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > tol {
        let m = 0.5 * (a + b);
        if ok(m)? {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(a)
}

/// Fraction of `n` trees that finish within the budget, used to check
/// extinction empirically.
pub fn extinction_frequency(spec: &ProblemSpec, x: &[f64], n: u64, seed: u64) -> Result<f64> {
    let engine = crate::branching::BranchingEngine::new(spec)?;
    let finished = (0..n)
        .into_par_iter()
        .map(|i| match engine.simulate(x, SampleStream::new(seed, i)) {
            Ok(_) => Ok(1u64),
            Err(Error::BudgetExceeded(_)) => Ok(0),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<u64>();
    Ok(finished as f64 / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Profile;
    use crate::problem::{example_sech, example_tan2, example_tan_sum, linear_1d};
    use std::f64::consts::{PI, SQRT_2};

    #[test]
    fn extinction_margins() {
        let spec = example_sech(1.0).unwrap();
        let r = PI / 8f64.sqrt();
        assert!(extinction_margin(1.0, &spec.terms, 1, r).unwrap().abs() < 1e-14);
        let m = extinction_margin(1.0, &spec.terms, 1, 1.1).unwrap();
        assert!((m - (1.0 - PI * PI / (8.0 * 1.21))).abs() < 1e-14);
        assert!((extinction_radius(1.0, &spec.terms, 1).unwrap() - r).abs() < 1e-14);
        let death = vec![NonlinearityTerm::scalar(0, 1.0, 1.0)];
        let m = extinction_margin(2.0, &death, 3, 0.7).unwrap();
        assert!((m - (-2.0 - 3.0 * PI * PI / (8.0 * 0.49))).abs() < 1e-12);
        assert_eq!(extinction_radius(2.0, &death, 3), None);
        let rect = Rectangle::new(vec![
            crate::interval::Interval::new(0.0, 1.0).unwrap(),
            crate::interval::Interval::new(0.0, 2.0).unwrap(),
        ])
        .unwrap();
        assert!(matches!(
            extinction_margin_rect(1.0, &spec.terms, &rect),
            Err(Error::UnsupportedDomain(_))
        ));
        // tan sum problem: extinct for r <= pi/4 in any dimension.
        for d in [2, 4] {
            let spec = example_tan_sum(d, 0.3).unwrap();
            assert!(
                (extinction_radius(spec.beta, &spec.terms, d).unwrap() - PI / 4.0).abs() < 1e-14
            );
        }
    }

    #[test]
    fn delta_closed_form_and_limits() {
        let d = compute_delta(1.0, &Rectangle::cube(1, 0.31).unwrap(), 0, 0).unwrap();
        assert!((d.delta - (1.0 - 1.0 / (SQRT_2 * 0.31).cosh())).abs() < 1e-15);
        assert!((d.delta - 0.0887).abs() < 5e-4);
        let tiny = compute_delta(1.0, &Rectangle::cube(1, 1e-6).unwrap(), 0, 0).unwrap();
        assert!(tiny.delta < 1e-11);
        let mut prev = 0.0;
        for k in 1..20 {
            let r = 0.05 * k as f64;
            for beta in [0.5, 1.0, 2.0] {
                let dl = compute_delta(beta, &Rectangle::cube(1, r).unwrap(), 0, 0)
                    .unwrap()
                    .delta;
                let dh = compute_delta(beta * 1.5, &Rectangle::cube(1, r).unwrap(), 0, 0)
                    .unwrap()
                    .delta;
                assert!(dh >= dl);
            }
            let d = compute_delta(1.0, &Rectangle::cube(1, r).unwrap(), 0, 0)
                .unwrap()
                .delta;
            assert!(d >= prev);
            prev = d;
        }
    }

    #[test]
    fn center_minimises_laplace_on_boxes() {
        let sampler = RectSampler::default();
        let rect = Rectangle::new(vec![
            crate::interval::Interval::new(-0.3, 0.5).unwrap(),
            crate::interval::Interval::new(0.0, 0.4).unwrap(),
        ])
        .unwrap();
        let est = |x: &[f64], seed| {
            let mut m = Moments::default();
            for i in 0..40_000 {
                let mut rng = SampleStream::new(seed, i).root_rng();
                m.push((-2.0 * sampler.sample_exit_time(x, &rect, &mut rng).unwrap()).exp());
            }
            (m.mean, m.std() / (m.n as f64).sqrt())
        };
        let (c, cs) = est(&rect.center(), 1);
        for x in [[0.0, 0.2], [0.1, 0.1], [0.3, 0.3], [-0.2, 0.25]] {
            let (v, vs) = est(&x, 2);
            assert!(
                v > c - 3.0 * (cs * cs + vs * vs).sqrt(),
                "{x:?}: {v} vs centre {c}"
            );
        }
    }

    #[test]
    fn gamma_closed_forms() {
        let two = OffspringLaw::new(vec![0.25, 0.0, 0.75]).unwrap();
        let triple = OffspringLaw::new(vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        for delta in [0.01, 0.0887, 0.2, 0.3] {
            let dom = two.dominating(delta);
            let p2 = dom.probs()[2];
            let (g, _) = gamma_threshold(&two, delta).unwrap();
            assert!((g - 1.0 / (4.0 * p2 * (1.0 - p2)).sqrt()).abs() < 1e-10 * g);
            let p0 = 1.0 - delta;
            let (g, s) = gamma_threshold(&triple, delta).unwrap();
            assert!(
                (g - (4.0 / (27.0 * p0 * p0 * (1.0 - p0))).cbrt()).abs() < 1e-10 * g,
                "{delta}"
            );
            let dom = triple.dominating(delta);
            assert!((s * dom.pgf_prime(s) - dom.pgf(s)).abs() < 1e-10 * dom.pgf(s));
        }
        let (g, _) = gamma_threshold(&two, 0.0887).unwrap();
        assert!((g - 2.007).abs() < 1e-3, "{g}");
        let (g, _) = gamma_threshold(&two, 1.0 - 1.0 / (SQRT_2 * 0.31).cosh()).unwrap();
        assert!((g - 2.0037).abs() < 1e-4, "{g}");
    }

    #[test]
    fn gamma_grows_as_delta_shrinks() {
        let law = OffspringLaw::new(vec![0.25, 0.0, 0.75]).unwrap();
        let mut prev = 0.0;
        for k in 1..10 {
            let (g, _) = gamma_threshold(&law, 10f64.powi(-k)).unwrap();
            assert!(g > prev);
            prev = g;
        }
        assert!(prev > 1e3);
        let mut last = f64::INFINITY;
        for k in 1..60 {
            let (g, _) = gamma_threshold(&law, 0.01 * k as f64).unwrap();
            assert!(g <= last);
            last = g;
        }
    }

    #[test]
    fn gamma_special_cases() {
        let law = OffspringLaw::new(vec![0.2, 0.3, 0.5]).unwrap();
        assert!(matches!(
            gamma_threshold(&law, 1.0),
            Err(Error::Supercritical(_))
        ));
        let linear = OffspringLaw::new(vec![0.5, 0.5]).unwrap();
        let (g, s) = gamma_threshold(&linear, 0.4).unwrap();
        assert!((g - 1.0 / 0.2).abs() < 1e-14);
        assert!(s.is_infinite());
        let death = OffspringLaw::new(vec![1.0]).unwrap();
        assert!(gamma_threshold(&death, 0.4).unwrap().0.is_infinite());
    }

    #[test]
    fn c0_values() {
        let spec = example_tan2(0.31).unwrap();
        assert!((compute_c0(&spec).unwrap() - 2.0).abs() < 1e-15);
        let spec = example_tan2(0.7).unwrap();
        assert!((compute_c0(&spec).unwrap() - (1.0 + 2.0 * 0.7f64.tan().powi(2))).abs() < 1e-12);
        let spec = example_sech(0.3).unwrap();
        assert!((compute_c0(&spec).unwrap() - SQRT_2).abs() < 1e-15);
        let mut ones = linear_1d(1.0, 0.5, Field::constant(1.0)).unwrap();
        ones.terms = vec![
            NonlinearityTerm::scalar(1, 0.3, 0.3),
            NonlinearityTerm::scalar(2, 0.7, 0.7),
        ];
        assert_eq!(compute_c0(&ones).unwrap(), 1.0);
    }

    #[test]
    fn gradient_constant_is_finite_for_vanishing_direction() {
        let base = linear_1d(1.0, 0.5, Field::constant(1.0)).unwrap();
        let b = Field::bump(0.5, &base.rect);
        let mut spec = base.with_gradient_terms(vec![b]);
        spec.terms = vec![
            NonlinearityTerm::new(
                crate::problem::MultiIndex::new(vec![0, 0]).unwrap(),
                Field::constant(0.0),
                0.5,
            ),
            NonlinearityTerm::new(
                crate::problem::MultiIndex::new(vec![0, 1]).unwrap(),
                Field::constant(0.1),
                0.5,
            ),
        ];
        let c1 = gradient_constant(&spec).unwrap();
        // Near a wall b ~ 2 (x - lo) and W ~ 1 / (x - lo).
        assert!((c1 - 2.0).abs() < 1e-3, "{c1}");
    }

    #[test]
    fn admissible_radius_one_dimensional() {
        let fam = CubeFamily::new(1, example_tan2, 0, 0).unwrap();
        let r1 = admissible_radius(&fam, 1.0, 0.05, 1.0, 1e-6).unwrap();
        assert!((r1 - 0.31).abs() < 5e-3, "{r1}");
        let r2 = admissible_radius(&fam, 2.0, 0.05, 1.0, 1e-6).unwrap();
        assert!((r2 - 0.146).abs() < 5e-3, "{r2}");
        assert!(matches!(
            admissible_radius(&fam, 1.0, 0.5, 1.0, 1e-3),
            Err(Error::NeverAdmissible { .. })
        ));
        assert!(matches!(
            admissible_radius(&fam, 1.0, 0.01, 0.02, 1e-3),
            Err(Error::AlwaysAdmissible { .. })
        ));
    }

    #[test]
    fn supersolution_examples() {
        let spec = example_sech(0.3).unwrap();
        let exact = Field::ridge("cosh_sech", Profile::Sech(SQRT_2));
        let chk = supersolution_residual(&exact, &spec, 1.0, 400).unwrap();
        assert!(chk.max_residual.abs() < 1e-12 && chk.min_boundary_slack.abs() < 1e-12);

        let cosv = Field::ridge("cos_super(6)", Profile::CosSuper(6.0));
        let chk = supersolution_residual(&cosv, &spec, 2.0, 400).unwrap();
        assert!(chk.holds(1e-12));
        let r = supersolution_radius(example_sech, &cosv, 2.0, 200, 0.1, 0.6, 1e-7).unwrap();
        assert!((r - 0.338).abs() < 5e-3, "{r}");

        // Constant candidate: sum |c_l| ||h||^l <= ||h||.
        let mut lin = linear_1d(1.0, 0.4, Field::constant(0.8)).unwrap();
        lin.terms = vec![
            NonlinearityTerm::scalar(0, 0.1, 0.5),
            NonlinearityTerm::scalar(2, 0.5, 0.5),
        ];
        let chk = supersolution_residual(&Field::constant(0.8), &lin, 1.0, 50).unwrap();
        assert!(0.1 + 0.5 * 0.64 <= 0.8);
        assert!(chk.holds(1e-12));
    }

    #[test]
    fn subcritical_dominating_law_means_extinction() {
        // tan2 problem at r = 0.14: dominating mean = 1.5 delta << 1.
        let spec = example_tan2(0.14).unwrap();
        let rep = threshold_report(&spec, 1.0, &DeltaMethod::Exact).unwrap();
        assert!(rep.dominating_mean <= 1.0);
        let mut budgeted = spec.clone();
        budgeted.budget.max_particles = 100_000;
        assert_eq!(
            extinction_frequency(&budgeted, &[0.0], 20_000, 5).unwrap(),
            1.0
        );
    }
}
