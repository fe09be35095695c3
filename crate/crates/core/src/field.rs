//! Scalar fields on the closed domain: coefficients `c_l`, directions `b_i`,
//! boundary data, exact solutions and supersolution candidates.
//!
//! Built-in fields are ridge functions `g(x_1 + ... + x_d)` with analytic
//! derivatives, so their gradient, Laplacian and sup-norm over a rectangle
//! are exact. User fields are plain closures; their sup-norm falls back to
//! a refined grid search.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rect::Rectangle;

type Closure = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// One-variable profile `g` of a ridge field `g(sum x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    /// `a / cosh(s)`
    Sech(f64),
    /// `tan(s)`
    Tan,
    /// `1 + 2 tan^2(s)`
    OnePlusTwoTan2,
    /// `sqrt(1 + lambda) cos(sqrt(lambda) s)`
    CosSuper(f64),
}

impl Profile {
    /// `(g, g', g'')` at `s`.
    pub fn eval(&self, s: f64) -> (f64, f64, f64) {
        match *self {
            Profile::Sech(a) => {
                let sech = 1.0 / s.cosh();
                let t = s.tanh();
                (a * sech, -a * sech * t, a * sech * (t * t - sech * sech))
            }
            Profile::Tan => {
                let t = s.tan();
                let sec2 = 1.0 + t * t;
                (t, sec2, 2.0 * t * sec2)
            }
            Profile::OnePlusTwoTan2 => {
                let t = s.tan();
                let sec2 = 1.0 + t * t;
                (
                    1.0 + 2.0 * t * t,
                    4.0 * t * sec2,
                    4.0 * sec2 * (sec2 + 2.0 * t * t),
                )
            }
            Profile::CosSuper(lambda) => {
                let a = (1.0 + lambda).sqrt();
                let k = lambda.sqrt();
                let (sn, cs) = (k * s).sin_cos();
                (a * cs, -a * k * sn, -a * lambda * cs)
            }
        }
    }

    /// `sup |g|` on `[a, b]`.
    fn sup_abs(&self, a: f64, b: f64) -> f64 {
        let min_abs = if a <= 0.0 && b >= 0.0 {
            0.0
        } else {
            a.abs().min(b.abs())
        };
        let max_abs = a.abs().max(b.abs());
        match *self {
            Profile::Sech(amp) => amp.abs() / min_abs.cosh(),
            Profile::Tan | Profile::OnePlusTwoTan2 => {
                if max_abs >= std::f64::consts::FRAC_PI_2 {
                    return f64::INFINITY;
                }
                let t = max_abs.tan();
                match self {
                    Profile::Tan => t,
                    _ => 1.0 + 2.0 * t * t,
                }
            }
            Profile::CosSuper(lambda) => {
                let k = lambda.sqrt();
                let amp = (1.0 + lambda).sqrt();
                // |cos| is maximal at the multiple of pi/k closest to the range.
                let n_lo = (k * a / std::f64::consts::PI).ceil();
                if n_lo * std::f64::consts::PI <= k * b {
                    amp
                } else {
                    amp * (k * a).cos().abs().max((k * b).cos().abs())
                }
            }
        }
    }
}

#[derive(Clone)]
enum Kind {
    Constant(f64),
    Ridge(Profile),
    /// `scale * prod_j (x_j - lo_j)(hi_j - x_j) / (w_j / 2)^2`, vanishing on the boundary.
    Bump {
        scale: f64,
        rect: Rectangle,
    },
    Custom(Closure),
}

/// A named scalar field.
#[derive(Clone)]
pub struct Field {
    name: String,
    kind: Kind,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Field").field(&self.name).finish()
    }
}

impl Field {
    pub fn constant(v: f64) -> Self {
        Field {
            name: format!("{v}"),
            kind: Kind::Constant(v),
        }
    }

    pub fn ridge(name: impl Into<String>, profile: Profile) -> Self {
        Field {
            name: name.into(),
            kind: Kind::Ridge(profile),
        }
    }

    pub fn bump(scale: f64, rect: &Rectangle) -> Self {
        Field {
            name: format!("bump({scale})"),
            kind: Kind::Bump {
                scale,
                rect: rect.clone(),
            },
        }
    }

    pub fn custom<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Field {
            name: name.into(),
            kind: Kind::Custom(Arc::new(f)),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self.kind {
            Kind::Constant(v) => Some(v),
            _ => None,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.kind {
            Kind::Constant(v) => *v,
            Kind::Ridge(p) => p.eval(x.iter().sum()).0,
            Kind::Bump { scale, rect } => {
                scale
                    * rect
                        .axes()
                        .iter()
                        .zip(x)
                        .map(|(iv, &v)| {
                            (v - iv.lo()) * (iv.hi() - v) / (iv.half_width() * iv.half_width())
                        })
                        .product::<f64>()
            }
            Kind::Custom(f) => f(x),
        }
    }

    /// `df/dx_j`, when known analytically.
    pub fn partial(&self, x: &[f64], j: usize) -> Option<f64> {
        match &self.kind {
            Kind::Constant(_) => Some(0.0),
            Kind::Ridge(p) => Some(p.eval(x.iter().sum()).1),
            Kind::Bump { scale, rect } => Some(
                scale
                    * rect
                        .axes()
                        .iter()
                        .zip(x)
                        .enumerate()
                        .map(|(k, (iv, &v))| {
                            let h2 = iv.half_width() * iv.half_width();
                            if k == j {
                                (iv.lo() + iv.hi() - 2.0 * v) / h2
                            } else {
                                (v - iv.lo()) * (iv.hi() - v) / h2
                            }
                        })
                        .product::<f64>(),
            ),
            Kind::Custom(_) => None,
        }
    }

    /// Laplacian, when known analytically.
    pub fn laplacian(&self, x: &[f64]) -> Option<f64> {
        match &self.kind {
            Kind::Constant(_) => Some(0.0),
            Kind::Ridge(p) => Some(x.len() as f64 * p.eval(x.iter().sum()).2),
            Kind::Bump { scale, rect } => {
                let factors: Vec<(f64, f64)> = rect
                    .axes()
                    .iter()
                    .zip(x)
                    .map(|(iv, &v)| {
                        let h2 = iv.half_width() * iv.half_width();
                        ((v - iv.lo()) * (iv.hi() - v) / h2, -2.0 / h2)
                    })
                    .collect();
                let total: f64 = (0..factors.len())
                    .map(|j| {
                        factors
                            .iter()
                            .enumerate()
                            .map(|(k, &(f, f2))| if k == j { f2 } else { f })
                            .product::<f64>()
                    })
                    .sum();
                Some(scale * total)
            }
            Kind::Custom(_) => None,
        }
    }

    /// `sup |f|` over the closed rectangle.
    pub fn sup_abs(&self, rect: &Rectangle) -> f64 {
        match &self.kind {
            Kind::Constant(v) => v.abs(),
            Kind::Ridge(p) => {
                let a: f64 = rect.axes().iter().map(|iv| iv.lo()).sum();
                let b: f64 = rect.axes().iter().map(|iv| iv.hi()).sum();
                p.sup_abs(a, b)
            }
            Kind::Bump { scale, rect: own } if own == rect => scale.abs(),
            Kind::Bump { .. } => grid_sup(&|x| self.eval(x), rect),
            Kind::Custom(f) => grid_sup(f.as_ref(), rect),
        }
    }

    /// `sup |f|` over the boundary of the rectangle.
    pub fn sup_abs_boundary(&self, rect: &Rectangle) -> f64 {
        match &self.kind {
            Kind::Ridge(p) if rect.dim() == 1 => {
                let iv = rect.axis(0);
                p.eval(iv.lo()).0.abs().max(p.eval(iv.hi()).0.abs())
            }
            Kind::Bump { rect: own, .. } if own == rect => 0.0,
            // d >= 2: the coordinate sum takes all its values on the boundary.
            _ => self.sup_abs(rect),
        }
    }
}

/// Grid search for `sup |f|` with refinement until two levels agree to 1e-6.
fn grid_sup(f: &(dyn Fn(&[f64]) -> f64 + Send + Sync), rect: &Rectangle) -> f64 {
    let d = rect.dim();
    let max_points: usize = 2_000_000;
    let mut n = 8usize;
    let mut prev = f64::NAN;
    loop {
        let total = (n + 1).checked_pow(d as u32).unwrap_or(usize::MAX);
        let mut best = 0.0f64;
        let mut idx = vec![0usize; d];
        let mut x = vec![0.0; d];
        for _ in 0..total.min(max_points) {
            for j in 0..d {
                let iv = rect.axis(j);
                x[j] = iv.lo() + iv.width() * idx[j] as f64 / n as f64;
            }
            best = best.max(f(&x).abs());
            for j in 0..d {
                idx[j] += 1;
                if idx[j] <= n {
                    break;
                }
                idx[j] = 0;
            }
        }
        if (best - prev).abs() <= 1e-6 * best.max(1.0) || total >= max_points / 2 {
            return best;
        }
        prev = best;
        n *= 2;
    }
}

/// Name-to-field lookup for configuration files.
///
/// Accepted forms: a number (`"0.5"`), a built-in name (`cosh_sech`,
/// `tan_sum`, `one_plus_2tan2`, `zero`, `one`), a parameterised built-in
/// (`const(2.5)`, `sech(1.5)`, `cos_super(6)`, `bump(1)`), or any name added
/// with [`register`](Self::register).
#[derive(Clone, Default)]
pub struct Registry {
    user: HashMap<String, Field>,
}

impl fmt::Debug for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut names: Vec<_> = self.user.keys().collect();
        names.sort();
        f.debug_struct("Registry").field("user", &names).finish()
    }
}

pub const BUILTIN_NAMES: &[&str] = &[
    "cosh_sech",
    "tan_sum",
    "one_plus_2tan2",
    "zero",
    "one",
    "const(v)",
    "sech(a)",
    "cos_super(lambda)",
    "bump(scale)",
];

impl Registry {
    pub fn new() -> Self {
        Registry::default()
    }

    pub fn register<F>(&mut self, name: &str, f: F)
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        self.user.insert(name.to_string(), Field::custom(name, f));
    }

    pub fn register_field(&mut self, name: &str, field: Field) {
        self.user.insert(name.to_string(), field);
    }

    /// Resolves `name` on `rect` (the domain matters only for `bump`).
    pub fn resolve(&self, name: &str, rect: &Rectangle) -> Result<Field> {
        let name = name.trim();
        if let Ok(v) = name.parse::<f64>() {
            return if v.is_finite() {
                Ok(Field::constant(v))
            } else {
                Err(Error::UnknownFunction(name.into()))
            };
        }
        if let Some(f) = self.user.get(name) {
            return Ok(f.clone());
        }
        let (head, arg) = match name.split_once('(') {
            Some((h, rest)) => {
                let inner = rest
                    .strip_suffix(')')
                    .ok_or_else(|| Error::UnknownFunction(name.into()))?;
                let v: f64 = inner
                    .trim()
                    .parse()
                    .map_err(|_| Error::UnknownFunction(name.into()))?;
                (h.trim(), Some(v))
            }
            None => (name, None),
        };
        let field = match (head, arg) {
            ("cosh_sech", None) => {
                Field::ridge("cosh_sech", Profile::Sech(std::f64::consts::SQRT_2))
            }
            ("tan_sum", None) => Field::ridge("tan_sum", Profile::Tan),
            ("one_plus_2tan2", None) => Field::ridge("one_plus_2tan2", Profile::OnePlusTwoTan2),
            ("zero", None) => Field::constant(0.0),
            ("one", None) => Field::constant(1.0),
            ("const", Some(v)) => Field::constant(v),
            ("sech", Some(a)) => Field::ridge(name, Profile::Sech(a)),
            ("cos_super", Some(l)) if l > 0.0 => Field::ridge(name, Profile::CosSuper(l)),
            ("bump", Some(s)) => Field::bump(s, rect),
            _ => return Err(Error::UnknownFunction(name.into())),
        };
        Ok(field)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval::Interval;

    fn line(r: f64) -> Rectangle {
        Rectangle::cube(1, r).unwrap()
    }

    #[test]
    fn profile_derivatives_match_finite_differences() {
        let profiles = [
            Profile::Sech(1.3),
            Profile::Tan,
            Profile::OnePlusTwoTan2,
            Profile::CosSuper(6.0),
        ];
        let h = 1e-4;
        for p in profiles {
            for &s in &[-0.7, -0.1, 0.0, 0.35, 0.9] {
                let (_, d1, d2) = p.eval(s);
                let (fp, _, _) = p.eval(s + h);
                let (fm, _, _) = p.eval(s - h);
                let (f0, _, _) = p.eval(s);
                assert!(
                    ((fp - fm) / (2.0 * h) - d1).abs() < 1e-6 * (1.0 + d1.abs()),
                    "{p:?} {s}"
                );
                assert!(
                    ((fp - 2.0 * f0 + fm) / (h * h) - d2).abs() < 1e-4 * (1.0 + d2.abs()),
                    "{p:?} {s}"
                );
            }
        }
    }

    #[test]
    fn analytic_sup_norms() {
        let reg = Registry::new();
        let h = reg.resolve("cosh_sech", &line(0.3)).unwrap();
        assert!((h.sup_abs(&line(0.3)) - std::f64::consts::SQRT_2).abs() < 1e-15);
        assert!(
            (h.sup_abs_boundary(&line(0.3)) - std::f64::consts::SQRT_2 / 0.3f64.cosh()).abs()
                < 1e-15
        );
        let t = reg.resolve("tan_sum", &line(0.3)).unwrap();
        let sq = Rectangle::cube(2, 0.2).unwrap();
        assert!((t.sup_abs(&sq) - 0.4f64.tan()).abs() < 1e-15);
        let g = reg.resolve("one_plus_2tan2", &line(0.31)).unwrap();
        assert!((g.sup_abs(&line(0.31)) - (1.0 + 2.0 * 0.31f64.tan().powi(2))).abs() < 1e-15);
        let big = Rectangle::cube(2, 0.8).unwrap();
        assert!(t.sup_abs(&big).is_infinite());
    }

    #[test]
    fn grid_fallback_agrees_with_analytic() {
        let rect = Rectangle::new(vec![
            Interval::new(-0.2, 0.5).unwrap(),
            Interval::new(0.1, 0.3).unwrap(),
        ])
        .unwrap();
        let custom = Field::custom("c", |x: &[f64]| (x[0] + x[1]).tan());
        let analytic = Field::ridge("t", Profile::Tan);
        assert!((custom.sup_abs(&rect) - analytic.sup_abs(&rect)).abs() < 1e-6);
        let cs = Field::ridge("c", Profile::CosSuper(6.0));
        let cs_custom = Field::custom("c", move |x: &[f64]| Profile::CosSuper(6.0).eval(x[0]).0);
        for r in [0.2, 0.338, 1.0, 2.0] {
            let l = line(r);
            assert!((cs.sup_abs(&l) - cs_custom.sup_abs(&l)).abs() < 1e-6, "{r}");
        }
    }

    #[test]
    fn bump_vanishes_on_boundary_and_has_exact_laplacian() {
        let rect = Rectangle::new(vec![
            Interval::new(-0.3, 0.5).unwrap(),
            Interval::new(0.0, 1.0).unwrap(),
        ])
        .unwrap();
        let b = Registry::new().resolve("bump(2)", &rect).unwrap();
        assert_eq!(b.eval(&[-0.3, 0.4]), 0.0);
        assert_eq!(b.eval(&[0.2, 1.0]), 0.0);
        assert!((b.eval(&rect.center()) - 2.0).abs() < 1e-14);
        let x = [0.1, 0.3];
        let h = 1e-4;
        let mut fd = 0.0;
        for j in 0..2 {
            let mut p = x;
            let mut m = x;
            p[j] += h;
            m[j] -= h;
            fd += (b.eval(&p) - 2.0 * b.eval(&x) + b.eval(&m)) / (h * h);
        }
        assert!((fd - b.laplacian(&x).unwrap()).abs() < 1e-5);
        assert_eq!(b.sup_abs_boundary(&rect), 0.0);
    }

    #[test]
    fn partials_match_finite_differences() {
        let rect = Rectangle::new(vec![
            Interval::new(-0.3, 0.5).unwrap(),
            Interval::new(0.0, 1.0).unwrap(),
        ])
        .unwrap();
        let reg = Registry::new();
        let x = [0.1, 0.3];
        let h = 1e-6;
        for name in ["bump(2)", "tan_sum", "cosh_sech", "const(3)"] {
            let f = reg.resolve(name, &rect).unwrap();
            for j in 0..2 {
                let mut p = x;
                let mut m = x;
                p[j] += h;
                m[j] -= h;
                let fd = (f.eval(&p) - f.eval(&m)) / (2.0 * h);
                assert!((fd - f.partial(&x, j).unwrap()).abs() < 1e-6, "{name} {j}");
            }
        }
        assert!(Field::custom("c", |x: &[f64]| x[0])
            .partial(&x, 0)
            .is_none());
    }

    #[test]
    fn resolve_forms() {
        let mut reg = Registry::new();
        let rect = line(1.0);
        assert_eq!(
            reg.resolve("0.25", &rect).unwrap().as_constant(),
            Some(0.25)
        );
        assert_eq!(
            reg.resolve("const(-1.5)", &rect).unwrap().as_constant(),
            Some(-1.5)
        );
        assert_eq!(reg.resolve("one", &rect).unwrap().as_constant(), Some(1.0));
        assert!(matches!(
            reg.resolve("nope", &rect),
            Err(Error::UnknownFunction(_))
        ));
        assert!(reg.resolve("sech(", &rect).is_err());
        assert!(reg.resolve("inf", &rect).is_err());
        reg.register("square", |x: &[f64]| x[0] * x[0]);
        assert_eq!(reg.resolve("square", &rect).unwrap().eval(&[3.0]), 9.0);
    }
}
