//! Independent reference values: a finite-difference two-point BVP solver,
//! the closed-form solution of the linear killed problem on an interval, and
//! a brute-force Euler simulation of the exit law.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::interval::{Interval, Side};
use crate::rng::SampleStream;

const MAX_NEWTON: usize = 100;

/// Grid solution of `u''/2 + f(x, u) = 0` on `[-r, r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BvpSolution {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Max absolute residual of the discrete equations
    /// `u_{i+1} - 2 u_i + u_{i-1} + 2 dx^2 f(x_i, u_i)`.
    pub residual: f64,
    pub iterations: usize,
}

impl BvpSolution {
    /// Linear interpolation of the grid values.
    pub fn value_at(&self, x: f64) -> f64 {
        let n = self.grid.len() - 1;
        let (lo, hi) = (self.grid[0], self.grid[n]);
        let s = ((x - lo) / (hi - lo) * n as f64).clamp(0.0, n as f64);
        let i = (s.floor() as usize).min(n - 1);
        let w = s - i as f64;
        (1.0 - w) * self.values[i] + w * self.values[i + 1]
    }
}

/// Solves `u''/2 + f(x, u) = 0` on `(-r, r)` with `u(-r) = h_lo`, `u(r) = h_hi`
/// by second-order finite differences on `grid_n` cells and damped Newton,
/// starting from the linear interpolant of the boundary data.
pub fn solve_bvp_1d<F>(f: F, h_lo: f64, h_hi: f64, r: f64, grid_n: usize) -> Result<BvpSolution>
where
    F: Fn(f64, f64) -> f64,
{
    if !(r > 0.0) || grid_n < 2 || !h_lo.is_finite() || !h_hi.is_finite() {
        return Err(Error::Domain(format!(
            "bad BVP setup: r = {r}, grid_n = {grid_n}, h = ({h_lo}, {h_hi})"
        )));
    }
    let n = grid_n;
    let dx = 2.0 * r / n as f64;
    let dx2 = dx * dx;
    let grid: Vec<f64> = (0..=n).map(|i| -r + dx * i as f64).collect();
    let mut u: Vec<f64> = grid
        .iter()
        .map(|&x| h_lo + (h_hi - h_lo) * (x + r) / (2.0 * r))
        .collect();

    let residual = |u: &[f64], out: &mut Vec<f64>| {
        out.clear();
        out.extend((1..n).map(|i| u[i + 1] - 2.0 * u[i] + u[i - 1] + 2.0 * dx2 * f(grid[i], u[i])));
    };
    let norm = |g: &[f64]| g.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let mut g = Vec::with_capacity(n);
    residual(&u, &mut g);
    let mut res = norm(&g);
    let mut diag = vec![0.0; n - 1];
    let mut trial = u.clone();
    for it in 0..MAX_NEWTON {
        for i in 1..n {
            let ui = u[i];
            let e = 1e-7 * (1.0 + ui.abs());
            let fu = (f(grid[i], ui + e) - f(grid[i], ui - e)) / (2.0 * e);
            diag[i - 1] = -2.0 + 2.0 * dx2 * fu;
        }
        let step = thomas_unit_offdiag(&diag, &g)?;
        let size = norm(&step);
        let mut lambda = 1.0;
        loop {
            for i in 1..n {
                trial[i] = u[i] - lambda * step[i - 1];
            }
            let mut gt = Vec::with_capacity(n);
            residual(&trial, &mut gt);
            let rt = norm(&gt);
            if rt.is_finite() && (rt < res || rt < 1e-12 || lambda < 1e-4) {
                std::mem::swap(&mut u, &mut trial);
                g = gt;
                res = rt;
                break;
            }
            lambda *= 0.5;
        }
        if !res.is_finite() {
            break;
        }
        if lambda == 1.0 && size < 1e-14 * (1.0 + norm(&u)) {
            return Ok(BvpSolution {
                grid,
                values: u,
                residual: res,
                iterations: it + 1,
            });
        }
    }
    Err(Error::NewtonDiverged(MAX_NEWTON))
}

/// Solves `A y = g` for tridiagonal `A` with the given diagonal and unit
/// off-diagonals.
fn thomas_unit_offdiag(diag: &[f64], g: &[f64]) -> Result<Vec<f64>> {
    let m = diag.len();
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    let mut denom = diag[0];
    for i in 0..m {
        if i > 0 {
            denom = diag[i] - c[i - 1];
        }
        if denom.abs() < 1e-300 {
            return Err(Error::NewtonDiverged(0));
        }
        c[i] = 1.0 / denom;
        d[i] = (g[i] - if i > 0 { d[i - 1] } else { 0.0 }) / denom;
    }
    for i in (0..m.saturating_sub(1)).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

/// `sinh(a) / sinh(b)` for `0 <= a <= b`, `b > 0`, without overflow.
fn sinh_ratio(a: f64, b: f64) -> f64 {
    (a - b).exp() * (-(-2.0 * a).exp_m1()) / (-(-2.0 * b).exp_m1())
}

/// `cosh(a) / sinh(b)` for `a, b >= 0`, `b > 0`, without overflow.
fn cosh_sinh_ratio(a: f64, b: f64) -> f64 {
    (a - b).exp() * (1.0 + (-2.0 * a).exp()) / (-(-2.0 * b).exp_m1())
}

/// `phi(x) = E[exp(-beta eta) h(B_eta)]` on `(-r, r)` and its derivative:
/// `phi = H(x, r) h_hi + H(x, -r) h_lo` with
/// `H(x, y) = sinh(k (x + y)) / sinh(2 k y)`, `k = sqrt(2 beta)`.
pub fn closed_phi(x: f64, beta: f64, r: f64, h_lo: f64, h_hi: f64) -> Result<(f64, f64)> {
    if !(beta > 0.0 && r > 0.0) {
        return Err(Error::Domain(format!(
            "need beta > 0 and r > 0, got {beta}, {r}"
        )));
    }
    if !(x.abs() <= r) {
        return Err(Error::Domain(format!("{x} outside [-{r}, {r}]")));
    }
    let k = (2.0 * beta).sqrt();
    let (a_hi, a_lo, b) = (k * (x + r), k * (r - x), 2.0 * k * r);
    let phi = sinh_ratio(a_hi, b) * h_hi + sinh_ratio(a_lo, b) * h_lo;
    let dphi = k * (cosh_sinh_ratio(a_hi, b) * h_hi - cosh_sinh_ratio(a_lo, b) * h_lo);
    Ok((phi, dphi))
}

/// Empirical exit law from Euler paths.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalExit {
    /// Sorted exit times of paths that left before the horizon.
    pub times: Vec<f64>,
    pub n: usize,
    pub exits_hi: usize,
    /// Paths still inside at the horizon.
    pub censored: usize,
}

impl EmpiricalExit {
    /// Empirical `P(eta <= t)`.
    pub fn cdf(&self, t: f64) -> f64 {
        self.times.partition_point(|&s| s <= t) as f64 / self.n as f64
    }

    /// Dvoretzky-Kiefer-Wolfowitz half-width at confidence `1 - alpha`.
    pub fn dkw_band(&self, alpha: f64) -> f64 {
        ((2.0 / alpha).ln() / (2.0 * self.n as f64)).sqrt()
    }

    pub fn hi_fraction(&self) -> f64 {
        self.exits_hi as f64 / self.n as f64
    }
}

/// Simulates `n` Euler paths of standard Brownian motion from `x` with step
/// `dt`, recording the first grid time outside `iv` (horizon `max_steps * dt`).
pub fn euler_exit_mc(
    x: f64,
    iv: &Interval,
    dt: f64,
    n: usize,
    max_steps: usize,
    seed: u64,
) -> Result<EmpiricalExit> {
    if !iv.contains(x) {
        return Err(Error::DegenerateStart(vec![x]));
    }
    if !(dt > 0.0) || n == 0 {
        return Err(Error::Domain(format!(
            "need dt > 0 and n > 0, got {dt}, {n}"
        )));
    }
    let sd = dt.sqrt();
    let paths: Vec<Option<(f64, Side)>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = SampleStream::new(seed, i).root_rng();
            let mut pos = x;
            for step in 1..=max_steps {
                let z: f64 = rng.sample(StandardNormal);
                pos += sd * z;
                if pos >= iv.hi() {
                    return Some((step as f64 * dt, Side::Hi));
                }
                if pos <= iv.lo() {
                    return Some((step as f64 * dt, Side::Lo));
                }
            }
            None
        })
        .collect();
    let mut times = Vec::with_capacity(n);
    let mut exits_hi = 0;
    for (t, side) in paths.iter().flatten() {
        times.push(*t);
        if *side == Side::Hi {
            exits_hi += 1;
        }
    }
    times.sort_by(f64::total_cmp);
    let censored = n - times.len();
    Ok(EmpiricalExit {
        times,
        n,
        exits_hi,
        censored,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval::{exit_laplace, IntervalKernels};
    use std::f64::consts::SQRT_2;

    fn sech_rhs(_: f64, u: f64) -> f64 {
        0.5 * u * u * u + 0.5 * u - u
    }

    fn tan2_rhs(_: f64, u: f64) -> f64 {
        0.5 - 1.5 * u * u - u
    }

    #[test]
    fn bvp_reproduces_known_solutions() {
        let h = SQRT_2 / 0.3f64.cosh();
        let sol = solve_bvp_1d(sech_rhs, h, h, 0.3, 4000).unwrap();
        assert!(sol.residual < 1e-9);
        assert!(
            (sol.value_at(0.0) - SQRT_2).abs() < 1e-8,
            "{}",
            sol.value_at(0.0) - SQRT_2
        );
        assert!((sol.value_at(-0.2) - SQRT_2 / 0.2f64.cosh()).abs() < 1e-8);

        let h = 1.0 + 2.0 * 0.14f64.tan().powi(2);
        let sol = solve_bvp_1d(tan2_rhs, h, h, 0.14, 4000).unwrap();
        assert!((sol.value_at(0.0) - 1.0).abs() < 1e-8);
        assert!((sol.value_at(-0.1) - (1.0 + 2.0 * 0.1f64.tan().powi(2))).abs() < 1e-8);
    }

    #[test]
    fn bvp_self_convergence() {
        let h = SQRT_2 / 0.3f64.cosh();
        let a = solve_bvp_1d(sech_rhs, h, h, 0.3, 4000)
            .unwrap()
            .value_at(0.0);
        let b = solve_bvp_1d(sech_rhs, h, h, 0.3, 8000)
            .unwrap()
            .value_at(0.0);
        assert!((a - b).abs() < 1e-8);
    }

    #[test]
    fn bvp_harmonic_and_asymmetric() {
        let sol = solve_bvp_1d(|_, _| 0.0, 2.5, 2.5, 1.0, 50).unwrap();
        assert!(sol.values.iter().all(|v| (v - 2.5).abs() < 1e-13));
        // Linear killed problem: u''/2 - u = 0 matches the closed form.
        let sol = solve_bvp_1d(|_, u| -u, 0.3, 1.7, 0.8, 4000).unwrap();
        for x in [-0.5, 0.0, 0.6] {
            assert!((sol.value_at(x) - closed_phi(x, 1.0, 0.8, 0.3, 1.7).unwrap().0).abs() < 1e-7);
        }
    }

    #[test]
    fn bvp_errors() {
        assert!(matches!(
            solve_bvp_1d(|_, _| 0.0, 1.0, 1.0, -1.0, 10),
            Err(Error::Domain(_))
        ));
        // u''/2 + exp(u) ... with huge data has no nearby solution.
        assert!(matches!(
            solve_bvp_1d(|_, u: f64| 50.0 * u.exp(), 0.0, 0.0, 1.0, 200),
            Err(Error::NewtonDiverged(_))
        ));
    }

    #[test]
    fn closed_phi_values() {
        let (p, dp) = closed_phi(0.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!((p - 1.0 / SQRT_2.cosh()).abs() < 1e-15);
        assert!(
            (p - exit_laplace(1.0, 0.0, &Interval::symmetric(1.0).unwrap()).unwrap()).abs() < 1e-15
        );
        assert!((p - 0.45911).abs() < 5e-5);
        assert!(dp.abs() < 1e-15);
        assert!((closed_phi(0.7, 2.0, 0.7, -3.0, 5.0).unwrap().0 - 5.0).abs() < 1e-14);
        assert!((closed_phi(-0.7, 2.0, 0.7, -3.0, 5.0).unwrap().0 + 3.0).abs() < 1e-14);
        assert!(closed_phi(1.1, 1.0, 1.0, 0.0, 0.0).is_err());
        // No overflow for wide intervals.
        let (p, _) = closed_phi(0.0, 50.0, 100.0, 1.0, 1.0).unwrap();
        assert!(p.is_finite() && p >= 0.0);
    }

    #[test]
    fn closed_phi_solves_the_ode() {
        let mut rng = crate::rng::seeded(3);
        for _ in 0..100 {
            let beta = rng.gen_range(0.1..3.0);
            let r = rng.gen_range(0.2..2.0);
            let x = rng.gen_range(-0.9..0.9) * r;
            let (hl, hh) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let (p, dp) = closed_phi(x, beta, r, hl, hh).unwrap();
            // phi'' = 2 beta phi is analytic; check with the derivative of dphi.
            let e = 1e-5;
            let d2 = (closed_phi(x + e, beta, r, hl, hh).unwrap().1
                - closed_phi(x - e, beta, r, hl, hh).unwrap().1)
                / (2.0 * e);
            let scale = 1.0 + p.abs() + dp.abs();
            assert!((0.5 * d2 - beta * p).abs() < 1e-6 * scale);
            let fd = (closed_phi(x + e, beta, r, hl, hh).unwrap().0
                - closed_phi(x - e, beta, r, hl, hh).unwrap().0)
                / (2.0 * e);
            assert!((fd - dp).abs() < 1e-7 * scale);
        }
    }

    #[test]
    fn euler_exit_agrees_with_series() {
        let iv = Interval::symmetric(0.1).unwrap();
        let dt = 1e-6;
        let emp = euler_exit_mc(0.0, &iv, dt, 20_000, 1_000_000, 4).unwrap();
        assert_eq!(emp.censored, 0);
        let k = IntervalKernels::default();
        // Discrete monitoring shifts exits later by about 0.5826 sqrt(dt).
        let slack = 2.0 * 0.5826 * dt.sqrt() / iv.half_width();
        let band = emp.dkw_band(1e-3) + slack;
        for j in 1..40 {
            let t = 0.0005 * j as f64;
            let diff = (emp.cdf(t) - k.exit_time_cdf(t, 0.0, &iv).unwrap()).abs();
            assert!(diff < band, "t={t}: {diff} vs {band}");
        }
        let f = emp.hi_fraction();
        assert!((f - 0.5).abs() < 3.0 * (0.25 / emp.n as f64).sqrt());
    }

    #[test]
    fn euler_exit_scaling() {
        let dt = 4e-6;
        let a = euler_exit_mc(
            0.0,
            &Interval::symmetric(0.05).unwrap(),
            dt,
            10_000,
            1_000_000,
            1,
        )
        .unwrap();
        let b = euler_exit_mc(
            0.0,
            &Interval::symmetric(0.1).unwrap(),
            4.0 * dt,
            10_000,
            1_000_000,
            2,
        )
        .unwrap();
        let band = a.dkw_band(1e-3) + b.dkw_band(1e-3);
        for j in 1..30 {
            let t = 0.0002 * j as f64;
            assert!((a.cdf(t) - b.cdf(4.0 * t)).abs() < band);
        }
    }
}
