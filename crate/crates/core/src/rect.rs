//! Exact arrival sampling for Brownian motion on an axis-aligned rectangle.
//!
//! The coordinates of a d-dimensional Brownian motion are independent, and
//! the exit time from a box is the minimum of the per-axis exit times. Given
//! which axis leaves first and when, every other axis is only constrained by
//! having survived until then, so its position is drawn from the
//! survival-conditioned law of its own interval.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::interval::{open01, Interval, IntervalKernels, Side};

/// Product of intervals, one per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Rectangle {
    axes: Vec<Interval>,
}

impl Rectangle {
    pub fn new(axes: Vec<Interval>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::Domain("rectangle needs at least one axis".into()));
        }
        Ok(Rectangle { axes })
    }

    /// The cube `(-r, r)^d`.
    pub fn cube(d: usize, r: f64) -> Result<Self> {
        Rectangle::new(vec![Interval::symmetric(r)?; d.max(1)]).and_then(|rect| {
            if d == 0 {
                Err(Error::Domain("dimension must be at least 1".into()))
            } else {
                Ok(rect)
            }
        })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Interval] {
        &self.axes
    }

    pub fn axis(&self, j: usize) -> &Interval {
        &self.axes[j]
    }

    pub fn center(&self) -> Vec<f64> {
        self.axes.iter().map(Interval::midpoint).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && self.axes.iter().zip(x).all(|(iv, &v)| iv.contains(v))
    }

    pub fn contains_closed(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && self
                .axes
                .iter()
                .zip(x)
                .all(|(iv, &v)| iv.contains_closed(v))
    }

    /// Euclidean distance to the boundary from an interior point (min over faces).
    pub fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        self.axes
            .iter()
            .zip(x)
            .map(|(iv, &v)| iv.distance_to_boundary(v))
            .fold(f64::INFINITY, f64::min)
    }

    /// `Some(r)` when the rectangle is `(-r, r)^d`.
    pub fn cube_half_width(&self) -> Option<f64> {
        let r = self.axes[0].hi();
        self.axes
            .iter()
            .all(|iv| iv.lo() == -r && iv.hi() == r)
            .then_some(r)
    }

    /// Whether every axis has the same width (a translated cube).
    pub fn is_cubic(&self) -> bool {
        let w = self.axes[0].width();
        self.axes
            .iter()
            .all(|iv| (iv.width() - w).abs() <= 1e-14 * w)
    }

    /// First Dirichlet eigenvalue of `-Laplacian`: `sum_j pi^2 / w_j^2`.
    pub fn lambda1(&self) -> f64 {
        self.axes
            .iter()
            .map(|iv| PI * PI / (iv.width() * iv.width()))
            .sum()
    }

    /// Same rectangle with every axis rescaled about the origin.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let axes = self
            .axes
            .iter()
            .map(|iv| Interval::new(iv.lo() * factor, iv.hi() * factor))
            .collect::<Result<Vec<_>>>()?;
        Rectangle::new(axes)
    }
}

/// Outcome of one particle lifetime.
#[derive(Debug, Clone, PartialEq)]
pub struct Arrival {
    /// Time elapsed since birth.
    pub dt: f64,
    pub pos: Vec<f64>,
    /// `true` when the particle was absorbed at the boundary.
    pub exited: bool,
}

/// Exit data of Brownian motion from a rectangle (no lifetime clock).
#[derive(Debug, Clone, PartialEq)]
pub struct RectExit {
    pub time: f64,
    pub pos: Vec<f64>,
    pub axis: usize,
    pub side: Side,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RectSampler {
    pub kernels: IntervalKernels,
}

impl RectSampler {
    pub fn new(kernels: IntervalKernels) -> Self {
        RectSampler { kernels }
    }

    fn check_start(x: &[f64], rect: &Rectangle) -> Result<()> {
        if x.len() != rect.dim() {
            return Err(Error::Domain(format!(
                "position has {} coordinates, rectangle has {}",
                x.len(),
                rect.dim()
            )));
        }
        if !rect.contains(x) {
            return Err(Error::DegenerateStart(x.to_vec()));
        }
        Ok(())
    }

    /// Samples `min(tau, eta)` with `tau ~ Exp(clock_rate)` and the position there.
    ///
    /// Each axis draws its exit side and the uniform that fixes its exit time,
    /// but the inverse CDF is only evaluated for axes whose exit time falls
    /// before `tau`; the remaining exit times are never needed because only
    /// the event `{eta_j > t}` enters the construction.
    pub fn sample_arrival<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        rect: &Rectangle,
        clock_rate: f64,
        rng: &mut R,
    ) -> Result<Arrival> {
        Self::check_start(x, rect)?;
        if !(clock_rate > 0.0 && clock_rate.is_finite()) {
            return Err(Error::Domain(format!(
                "clock rate must be positive, got {clock_rate}"
            )));
        }
        let tau = -open01(rng).ln() / clock_rate;

        let mut first: Option<(f64, usize, Side)> = None;
        for (j, iv) in rect.axes.iter().enumerate() {
            let xu = iv.to_unit(x[j]);
            let side = if rng.gen::<f64>() < xu {
                Side::Hi
            } else {
                Side::Lo
            };
            let u = open01(rng);
            if self.kernels.exits_by(iv.time_to_unit(tau), xu, side, u) {
                let eta = self.kernels.invert_side_time(u, xu, side)? * iv.width() * iv.width();
                let eta = eta.min(tau);
                if first.map_or(true, |(best, _, _)| eta < best) {
                    first = Some((eta, j, side));
                }
            }
        }

        match first {
            Some((eta, axis, side)) => {
                let pos = self.positions_at(x, rect, eta, Some((axis, side)), rng)?;
                Ok(Arrival {
                    dt: eta,
                    pos,
                    exited: true,
                })
            }
            None => {
                let pos = self.positions_at(x, rect, tau, None, rng)?;
                Ok(Arrival {
                    dt: tau,
                    pos,
                    exited: false,
                })
            }
        }
    }

    /// Samples the exit time and exit position of Brownian motion from `rect`.
    pub fn sample_exit<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        rect: &Rectangle,
        rng: &mut R,
    ) -> Result<RectExit> {
        Self::check_start(x, rect)?;
        let mut best: Option<(f64, usize, Side)> = None;
        for (j, iv) in rect.axes.iter().enumerate() {
            let (eta, side) = self.kernels.sample_exit(x[j], iv, rng)?;
            if best.map_or(true, |(b, _, _)| eta < b) {
                best = Some((eta, j, side));
            }
        }
        let (time, axis, side) = best.expect("rectangle has at least one axis");
        let pos = self.positions_at(x, rect, time, Some((axis, side)), rng)?;
        Ok(RectExit {
            time,
            pos,
            axis,
            side,
        })
    }

    /// Exit time alone; cheaper than [`sample_exit`](Self::sample_exit).
    pub fn sample_exit_time<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        rect: &Rectangle,
        rng: &mut R,
    ) -> Result<f64> {
        Self::check_start(x, rect)?;
        let mut best = f64::INFINITY;
        for (j, iv) in rect.axes.iter().enumerate() {
            best = best.min(self.kernels.sample_exit_time(x[j], iv, rng)?);
        }
        Ok(best)
    }

    /// Samples the killed motion at a fixed time `t`: `None` if it left `rect`
    /// before `t`, otherwise the position at `t`.
    pub fn sample_killed_at<R: Rng + ?Sized>(
        &self,
        t: f64,
        x: &[f64],
        rect: &Rectangle,
        rng: &mut R,
    ) -> Result<Option<Vec<f64>>> {
        Self::check_start(x, rect)?;
        if t <= 0.0 {
            return Ok(Some(x.to_vec()));
        }
        for (j, iv) in rect.axes.iter().enumerate() {
            if rng.gen::<f64>() >= self.kernels.survival(t, x[j], iv)? {
                return Ok(None);
            }
        }
        self.positions_at(x, rect, t, None, rng).map(Some)
    }

    /// Positions at time `t`: the exiting axis (if any) sits on its endpoint,
    /// every other axis is drawn given survival up to `t`.
    fn positions_at<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        rect: &Rectangle,
        t: f64,
        exit: Option<(usize, Side)>,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        rect.axes
            .iter()
            .enumerate()
            .map(|(j, iv)| match exit {
                Some((axis, side)) if axis == j => Ok(iv.endpoint(side)),
                _ if t <= 0.0 => Ok(x[j]),
                _ => self
                    .kernels
                    .sample_position_given_survival(t, x[j], iv, rng),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval::exit_laplace;
    use crate::rng::seeded;

    /// Upper tail of the chi-square law with 3 degrees of freedom.
    fn chi2_3_sf(x: f64) -> f64 {
        2.0 * crate::interval::norm_sf(x.sqrt()) + (2.0 * x / PI).sqrt() * (-0.5 * x).exp()
    }

    #[test]
    fn exited_frequency_matches_laplace_transform_1d() {
        let s = RectSampler::default();
        let rect = Rectangle::cube(1, 1.0).unwrap();
        let mut rng = seeded(21);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| {
                s.sample_arrival(&[0.0], &rect, 1.0, &mut rng)
                    .unwrap()
                    .exited
            })
            .count();
        let p = exit_laplace(1.0, 0.0, rect.axis(0)).unwrap();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        let f = hits as f64 / n as f64;
        assert!((f - p).abs() < 3.5 * se, "{f} vs {p}");
    }

    #[test]
    fn square_exit_faces_are_symmetric() {
        let s = RectSampler::default();
        let rect = Rectangle::cube(2, 0.5).unwrap();
        let mut rng = seeded(3);
        let n = 40_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            let e = s.sample_exit(&[0.0, 0.0], &rect, &mut rng).unwrap();
            counts[2 * e.axis + usize::from(e.side == Side::Hi)] += 1;
        }
        let expected = n as f64 / 4.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2_3_sf(chi2) > 0.001, "{counts:?}");
    }

    #[test]
    fn survival_is_product_of_axis_survivals() {
        let s = RectSampler::default();
        let rect = Rectangle::new(vec![
            Interval::new(-0.5, 0.5).unwrap(),
            Interval::new(0.0, 0.8).unwrap(),
        ])
        .unwrap();
        let x = [0.1, 0.3];
        let t = 0.1;
        let p: f64 = rect
            .axes()
            .iter()
            .zip(&x)
            .map(|(iv, &v)| s.kernels.survival(t, v, iv).unwrap())
            .product();
        let mut rng = seeded(17);
        let n = 100_000;
        let alive = (0..n)
            .filter(|_| s.sample_exit_time(&x, &rect, &mut rng).unwrap() > t)
            .count();
        let f = alive as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((f - p).abs() < 3.5 * se, "{f} vs {p}");
    }

    #[test]
    fn boundary_exactness_and_interior_strictness() {
        let s = RectSampler::default();
        let rect = Rectangle::new(vec![
            Interval::new(-0.3, 0.7).unwrap(),
            Interval::new(1.0, 1.25).unwrap(),
        ])
        .unwrap();
        let mut rng = seeded(8);
        for _ in 0..5_000 {
            let a = s.sample_arrival(&[0.1, 1.2], &rect, 3.0, &mut rng).unwrap();
            let on_face = rect
                .axes()
                .iter()
                .zip(&a.pos)
                .filter(|(iv, &v)| v == iv.lo() || v == iv.hi())
                .count();
            if a.exited {
                assert_eq!(on_face, 1, "{a:?}");
                assert!(rect.contains_closed(&a.pos));
            } else {
                assert_eq!(on_face, 0);
                assert!(rect.contains(&a.pos));
            }
            assert!(a.dt > 0.0);
        }
    }

    #[test]
    fn rejects_boundary_start() {
        let s = RectSampler::default();
        let rect = Rectangle::cube(2, 1.0).unwrap();
        let mut rng = seeded(1);
        let err = s
            .sample_arrival(&[1.0, 0.0], &rect, 1.0, &mut rng)
            .unwrap_err();
        assert!(matches!(err, Error::DegenerateStart(_)));
        assert!(s.sample_arrival(&[0.0], &rect, 1.0, &mut rng).is_err());
    }

    #[test]
    fn exchangeable_coordinates() {
        let s = RectSampler::default();
        let a = Rectangle::new(vec![
            Interval::new(0.0, 1.0).unwrap(),
            Interval::new(0.0, 2.0).unwrap(),
        ])
        .unwrap();
        let b = Rectangle::new(vec![
            Interval::new(0.0, 2.0).unwrap(),
            Interval::new(0.0, 1.0).unwrap(),
        ])
        .unwrap();
        let n = 20_000;
        let stats = |rect: &Rectangle, x: [f64; 2], axis: usize, seed| {
            let mut rng = seeded(seed);
            let mut m = 0.0;
            let mut m2 = 0.0;
            for _ in 0..n {
                let arr = s.sample_arrival(&x, rect, 1.0, &mut rng).unwrap();
                let v = arr.pos[axis];
                m += v;
                m2 += v * v;
            }
            let mean = m / n as f64;
            (mean, (m2 / n as f64 - mean * mean) / n as f64)
        };
        let (ma, va) = stats(&a, [0.3, 1.5], 1, 1);
        let (mb, vb) = stats(&b, [1.5, 0.3], 0, 2);
        assert!((ma - mb).abs() < 4.0 * (va + vb).sqrt(), "{ma} vs {mb}");
    }

    #[test]
    fn lambda1_and_cube_detection() {
        let c = Rectangle::cube(3, 0.5).unwrap();
        assert!((c.lambda1() - 3.0 * PI * PI / (4.0 * 0.25)).abs() < 1e-12);
        assert_eq!(c.cube_half_width(), Some(0.5));
        let r = Rectangle::new(vec![
            Interval::new(0.0, 1.0).unwrap(),
            Interval::new(0.0, 2.0).unwrap(),
        ])
        .unwrap();
        assert_eq!(r.cube_half_width(), None);
        assert!(!r.is_cubic());
        assert!(Rectangle::cube(0, 1.0).is_err());
    }
}
