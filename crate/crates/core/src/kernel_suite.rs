//! Self-checks of the interval and rectangle samplers, shared by the test
//! suite and the `kernel-test` command.

use rand::Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::estimator::Moments;
use crate::interval::{exit_laplace, Interval, IntervalKernels, Series};
use crate::rect::{RectSampler, Rectangle};
use crate::rng::{seeded, SampleStream};

#[derive(Debug, Clone, PartialEq)]
pub struct KernelCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> KernelCheck {
    KernelCheck {
        name,
        passed,
        detail,
    }
}

/// Max gap between the image and spectral exit-time CDFs over 100 random
/// `(t, x)` on the unit interval.
pub fn dual_series(seed: u64) -> Result<KernelCheck> {
    let k = IntervalKernels::default();
    let iv = Interval::new(0.0, 1.0)?;
    let mut rng = seeded(seed);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let t = 0.05 + 1.95 * rng.gen::<f64>();
        let x = 0.001 + 0.998 * rng.gen::<f64>();
        let a = k.exit_time_cdf_with(t, x, &iv, Series::Images)?;
        let b = k.exit_time_cdf_with(t, x, &iv, Series::Spectral)?;
        worst = worst.max((a - b).abs());
    }
    Ok(check(
        "dual-series agreement",
        worst < 1e-10,
        format!("max images/spectral gap {worst:.3e}"),
    ))
}

/// The exit-time CDF is nondecreasing on geometric time grids.
pub fn monotone_cdf() -> Result<KernelCheck> {
    let k = IntervalKernels::default();
    let iv = Interval::new(-1.0, 1.0)?;
    let mut worst = 0.0f64;
    for &x in &[-0.9, -0.3, 0.0, 0.55, 0.99] {
        let mut prev = 0.0;
        for i in 0..400 {
            let t = 1e-4 * 1.03f64.powi(i);
            let c = k.exit_time_cdf(t, x, &iv)?;
            worst = worst.max(prev - c);
            prev = c;
        }
    }
    Ok(check(
        "cdf monotone in t",
        worst <= 1e-15,
        format!("largest decrease {worst:.3e}"),
    ))
}

/// CDFs on `(lo, hi)` equal the unit-interval CDF at `t / width^2`.
pub fn scaling_covariance() -> Result<KernelCheck> {
    let k = IntervalKernels::default();
    let unit = Interval::new(0.0, 1.0)?;
    let iv = Interval::new(-0.7, 2.3)?;
    let mut worst = 0.0f64;
    for i in 1..50 {
        let t = 0.05 * i as f64;
        for &u in &[0.1, 0.5, 0.83] {
            let a = k.exit_time_cdf(t * 9.0, -0.7 + 3.0 * u, &iv)?;
            let b = k.exit_time_cdf(t, u, &unit)?;
            worst = worst.max((a - b).abs());
        }
    }
    Ok(check(
        "Brownian scaling covariance",
        worst < 1e-12,
        format!("max gap {worst:.3e}"),
    ))
}

/// Monte Carlo mean of `exp(-eta)` from `0` on `(-1, 1)` against the closed form.
pub fn laplace_consistency(seed: u64, n: u64) -> Result<KernelCheck> {
    let k = IntervalKernels::default();
    let iv = Interval::new(-1.0, 1.0)?;
    let draws = (0..n)
        .into_par_iter()
        .map(|i| {
            k.sample_exit_time(0.0, &iv, &mut SampleStream::new(seed, i).root_rng())
                .map(|t| (-t).exp())
        })
        .collect::<Result<Vec<_>>>()?;
    let m = draws.iter().fold(Moments::default(), |mut m, &v| {
        m.push(v);
        m
    });
    let exact = exit_laplace(1.0, 0.0, &iv)?;
    let se = m.std() / (m.n as f64).sqrt();
    let z = (m.mean - exact) / se;
    Ok(check(
        "Laplace transform consistency",
        z.abs() < 3.0,
        format!("MC {:.6} vs {exact:.6} ({z:+.2} se)", m.mean),
    ))
}

/// Empirical `P(eta > 0.1)` on a square against the product of the 1D survivals.
pub fn product_survival(seed: u64, n: u64) -> Result<KernelCheck> {
    let k = IntervalKernels::default();
    let sampler = RectSampler::new(k);
    let rect = Rectangle::cube(2, 0.5)?;
    let x = [0.1, -0.2];
    let t = 0.1;
    let survived = (0..n)
        .into_par_iter()
        .map(|i| {
            sampler
                .sample_exit_time(&x, &rect, &mut SampleStream::new(seed, i).root_rng())
                .map(|eta| u64::from(eta > t))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<u64>();
    let p = k.survival(t, x[0], rect.axis(0))? * k.survival(t, x[1], rect.axis(1))?;
    let f = survived as f64 / n as f64;
    let se = (p * (1.0 - p) / n as f64).sqrt();
    let z = (f - p) / se;
    Ok(check(
        "product survival law (d = 2)",
        z.abs() < 3.0,
        format!("MC {f:.5} vs {p:.5} ({z:+.2} se)"),
    ))
}

/// Runs every check with `mc_samples` draws for the statistical ones.
pub fn run_kernel_suite(seed: u64, mc_samples: u64) -> Result<Vec<KernelCheck>> {
    Ok(vec![
        dual_series(seed)?,
        monotone_cdf()?,
        scaling_covariance()?,
        laplace_consistency(seed, mc_samples)?,
        product_survival(seed.wrapping_add(1), mc_samples)?,
    ])
}
