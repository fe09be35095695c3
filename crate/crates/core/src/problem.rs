//! Problem definition: `L u + beta (f(u, Du) - u) = 0` on a rectangle with
//! `u = h` on the boundary, where `f(x, y, z) = sum_l c_l(x) y^{l_0} prod_i (b_i(x) z)^{l_i}`.

use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::field::{Field, Profile};
use crate::interval::KernelAccuracy;
use crate::rect::Rectangle;

/// Exponent vector `l = (l_0, ..., l_m)` of one monomial; also the offspring
/// counts per mark of a branching event.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(counts: Vec<u32>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidSpec(
                "multi-index needs at least one entry".into(),
            ));
        }
        Ok(MultiIndex(counts))
    }

    /// `l = (k)`: a power of `u` with no gradient factors.
    pub fn scalar(k: u32) -> Self {
        MultiIndex(vec![k])
    }

    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    /// `|l|`
    pub fn total(&self) -> usize {
        self.0.iter().map(|&c| c as usize).sum()
    }

    /// Number of gradient marks `m`.
    pub fn marks(&self) -> usize {
        self.0.len() - 1
    }

    /// Marks of the offspring in birth order: `l_0` zeros, then `l_1` ones, ...
    pub fn offspring_marks(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .flat_map(|(mark, &c)| std::iter::repeat(mark).take(c as usize))
    }
}

#[derive(Debug, Clone)]
pub struct NonlinearityTerm {
    pub l: MultiIndex,
    pub c: Field,
    /// Branching probability `p_l`.
    pub p: f64,
}

impl NonlinearityTerm {
    pub fn new(l: MultiIndex, c: Field, p: f64) -> Self {
        NonlinearityTerm { l, c, p }
    }

    pub fn scalar(k: u32, c: f64, p: f64) -> Self {
        NonlinearityTerm::new(MultiIndex::scalar(k), Field::constant(c), p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParticleBudget {
    pub max_particles: usize,
    pub max_generations: usize,
}

impl Default for ParticleBudget {
    fn default() -> Self {
        ParticleBudget {
            max_particles: 1_000_000,
            max_generations: 10_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub beta: f64,
    pub rect: Rectangle,
    pub terms: Vec<NonlinearityTerm>,
    /// Gradient directions `b_1, ..., b_m` (scalars, since gradients need d = 1).
    pub b: Vec<Field>,
    pub h: Field,
    pub budget: ParticleBudget,
    pub accuracy: KernelAccuracy,
    /// Known solution, used only for reporting errors.
    pub exact: Option<Field>,
}

impl ProblemSpec {
    pub fn new(beta: f64, rect: Rectangle, terms: Vec<NonlinearityTerm>, h: Field) -> Self {
        ProblemSpec {
            beta,
            rect,
            terms,
            b: Vec::new(),
            h,
            budget: ParticleBudget::default(),
            accuracy: KernelAccuracy::default(),
            exact: None,
        }
    }

    pub fn with_exact(mut self, exact: Field) -> Self {
        self.exact = Some(exact);
        self
    }

    pub fn with_gradient_terms(mut self, b: Vec<Field>) -> Self {
        self.b = b;
        self
    }

    pub fn with_budget(mut self, budget: ParticleBudget) -> Self {
        self.budget = budget;
        self
    }

    /// Same problem on another domain.
    pub fn with_rect(mut self, rect: Rectangle) -> Self {
        self.rect = rect;
        self
    }

    pub fn dim(&self) -> usize {
        self.rect.dim()
    }

    /// Number of gradient marks `m`.
    pub fn marks(&self) -> usize {
        self.b.len()
    }

    /// Offspring generating function `sum_l p_l s^{|l|}`.
    pub fn offspring_pgf(&self, s: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.p * s.powi(t.l.total() as i32))
            .sum()
    }

    /// Mean offspring count `sum_l |l| p_l`.
    pub fn mean_offspring(&self) -> f64 {
        self.terms.iter().map(|t| t.l.total() as f64 * t.p).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        self.accuracy.validate()?;
        if self.terms.is_empty() {
            return Err(Error::InvalidSpec(
                "at least one nonlinearity term is required".into(),
            ));
        }
        let m = self.marks();
        let mut total_p = 0.0;
        for (k, t) in self.terms.iter().enumerate() {
            if !(t.p > 0.0 && t.p <= 1.0) {
                return Err(Error::InvalidSpec(format!(
                    "term {k}: probability {} not in (0, 1]",
                    t.p
                )));
            }
            if t.l.marks() != m {
                return Err(Error::InvalidSpec(format!(
                    "term {k}: multi-index has {} entries, expected {}",
                    t.l.counts().len(),
                    m + 1
                )));
            }
            if self.terms[..k].iter().any(|o| o.l == t.l) {
                return Err(Error::InvalidSpec(format!(
                    "term {k}: duplicate multi-index {:?}",
                    t.l.counts()
                )));
            }
            total_p += t.p;
        }
        if (total_p - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSpec(format!(
                "branching probabilities sum to {total_p}, not 1"
            )));
        }
        if m > 0 {
            if self.dim() != 1 {
                return Err(Error::GradientUnsupported(self.dim()));
            }
            let iv = self.rect.axis(0);
            for (i, b) in self.b.iter().enumerate() {
                for end in [iv.lo(), iv.hi()] {
                    if b.eval(&[end]).abs() > 1e-12 {
                        return Err(Error::InvalidSpec(format!(
                            "gradient direction b_{} = {} does not vanish at {end}",
                            i + 1,
                            b.name()
                        )));
                    }
                }
            }
        }
        if self.budget.max_particles == 0 || self.budget.max_generations == 0 {
            return Err(Error::InvalidSpec(
                "particle budget must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// `u'' - u + u^3 = 0` on `(-r, r)`, written with `beta = 1`,
/// `f(u) = u/2 + u^3/2`, `p_1 = p_3 = 1/2`; solution `sqrt(2)/cosh(x)`.
pub fn example_sech(r: f64) -> Result<ProblemSpec> {
    let sech = Field::ridge("cosh_sech", Profile::Sech(SQRT_2));
    Ok(ProblemSpec::new(
        1.0,
        Rectangle::cube(1, r)?,
        vec![
            NonlinearityTerm::scalar(1, 0.5, 0.5),
            NonlinearityTerm::scalar(3, 0.5, 0.5),
        ],
        sech.clone(),
    )
    .with_exact(sech))
}

/// `u''/2 + 1/2 - 3u^2/2 - u = 0` on `(-r, r)` with `beta = 1`,
/// `p_0 = 0.25`, `p_2 = 0.75`; solution `1 + 2 tan^2(x)`.
pub fn example_tan2(r: f64) -> Result<ProblemSpec> {
    let g = Field::ridge("one_plus_2tan2", Profile::OnePlusTwoTan2);
    Ok(ProblemSpec::new(
        1.0,
        Rectangle::cube(1, r)?,
        vec![
            NonlinearityTerm::scalar(0, 0.5, 0.25),
            NonlinearityTerm::scalar(2, -1.5, 0.75),
        ],
        g.clone(),
    )
    .with_exact(g))
}

/// `Laplacian u = 2d (u^3 + u)` on `(-r, r)^d` with `beta = d`, `p_3 = 1`,
/// `c_3 = -1`; solution `tan(x_1 + ... + x_d)`.
pub fn example_tan_sum(d: usize, r: f64) -> Result<ProblemSpec> {
    let t = Field::ridge("tan_sum", Profile::Tan);
    Ok(ProblemSpec::new(
        d as f64,
        Rectangle::cube(d, r)?,
        vec![NonlinearityTerm::scalar(3, -1.0, 1.0)],
        t.clone(),
    )
    .with_exact(t))
}

/// Linear problem `u''/2 - beta u = 0` on `(-r, r)` with boundary data `h`.
pub fn linear_1d(beta: f64, r: f64, h: Field) -> Result<ProblemSpec> {
    Ok(ProblemSpec::new(
        beta,
        Rectangle::cube(1, r)?,
        vec![NonlinearityTerm::scalar(0, 0.0, 1.0)],
        h,
    ))
}
