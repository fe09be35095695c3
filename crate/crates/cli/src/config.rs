//! TOML run configuration.

use std::path::Path;

use branchpde::{
    Field, Interval, MultiIndex, NonlinearityTerm, ParticleBudget, ProblemSpec, Rectangle, Registry,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// A coefficient given either as a number or as a registry name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Number(f64),
    Name(String),
}

impl Coefficient {
    fn resolve(&self, registry: &Registry, rect: &Rectangle) -> CliResult<Field> {
        match self {
            Coefficient::Number(v) if v.is_finite() => Ok(Field::constant(*v)),
            Coefficient::Number(v) => Err(CliError::Invalid(format!("non-finite coefficient {v}"))),
            Coefficient::Name(n) => Ok(registry.resolve(n, rect)?),
        }
    }
}

/// An evaluation point: a bare number in one dimension, a list otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Point {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Point {
    pub fn coords(&self) -> Vec<f64> {
        match self {
            Point::Scalar(v) => vec![*v],
            Point::Vector(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    #[serde(alias = "markdown")]
    #[value(alias = "markdown")]
    Md,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub beta: f64,
    /// Cube `(-r, r)^dim`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    /// Explicit `[lo, hi]` per axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub l: Vec<u32>,
    pub c: Coefficient,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    pub h: Coefficient,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<String>,
    /// Gradient directions `b_1, ..., b_m`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub b: Vec<Coefficient>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub x: Vec<Point>,
    pub n: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_particles: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_generations: Option<usize>,
}

fn default_q() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Search range for the admissible radius.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_hi: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Exit-time samples used for `delta` when `dim > 1`.
    #[serde(default = "default_delta_samples")]
    pub delta_samples: u64,
    /// Candidate supersolution, by registry name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supersolution: Option<String>,
}

fn default_tol() -> f64 {
    1e-3
}

fn default_delta_samples() -> u64 {
    200_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainConfig,
    pub nonlinearity: Vec<TermConfig>,
    pub boundary: BoundaryConfig,
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisConfig>,
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Invalid(e.to_string()))
    }

    /// Structural checks that need no registry lookups.
    fn check(&self) -> CliResult<()> {
        let invalid = |m: String| Err(CliError::Invalid(m));
        if self.run.n < 2 {
            return invalid(format!("run.n must be at least 2, got {}", self.run.n));
        }
        if self.run.x.is_empty() {
            return invalid("run.x must list at least one point".into());
        }
        if self.nonlinearity.is_empty() {
            return invalid("at least one [[nonlinearity]] term is required".into());
        }
        let d = self.dim()?;
        for (i, p) in self.run.x.iter().enumerate() {
            let len = p.coords().len();
            if len != d {
                return invalid(format!("run.x[{i}] has {len} coordinates, domain has {d}"));
            }
        }
        for (i, t) in self.nonlinearity.iter().enumerate() {
            if t.l.len() != 1 + self.boundary.b.len() {
                return invalid(format!(
                    "nonlinearity[{i}].l has {} entries, expected {} (1 + number of boundary.b)",
                    t.l.len(),
                    1 + self.boundary.b.len()
                ));
            }
        }
        if let Some(a) = &self.analysis {
            if a.r_lo.is_some() != a.r_hi.is_some() {
                return invalid("analysis.r_lo and analysis.r_hi go together".into());
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> CliResult<usize> {
        match (&self.domain.dim, &self.domain.r, &self.domain.bounds) {
            (Some(d), Some(_), None) => Ok(*d),
            (None, None, Some(b)) => Ok(b.len()),
            _ => Err(CliError::Invalid(
                "domain needs either `dim` and `r`, or `bounds`".into(),
            )),
        }
    }

    /// Half-width of the cube, when the domain is given by `dim` and `r`.
    pub fn cube_radius(&self) -> Option<f64> {
        self.domain.dim.and(self.domain.r)
    }

    pub fn rect(&self) -> CliResult<Rectangle> {
        match (&self.domain.dim, &self.domain.r, &self.domain.bounds) {
            (Some(d), Some(r), None) => Ok(Rectangle::cube(*d, *r)?),
            (None, None, Some(b)) => {
                let axes = b
                    .iter()
                    .map(|&[lo, hi]| Interval::new(lo, hi))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Rectangle::new(axes)?)
            }
            _ => Err(CliError::Invalid(
                "domain needs either `dim` and `r`, or `bounds`".into(),
            )),
        }
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        self.run.x.iter().map(Point::coords).collect()
    }

    /// Builds and validates the problem on `rect`.
    pub fn spec_on(&self, rect: Rectangle, registry: &Registry) -> CliResult<ProblemSpec> {
        let terms = self
            .nonlinearity
            .iter()
            .map(|t| {
                Ok(NonlinearityTerm::new(
                    MultiIndex::new(t.l.clone())?,
                    t.c.resolve(registry, &rect)?,
                    t.p,
                ))
            })
            .collect::<CliResult<Vec<_>>>()?;
        let h = self.boundary.h.resolve(registry, &rect)?;
        let b = self
            .boundary
            .b
            .iter()
            .map(|c| c.resolve(registry, &rect))
            .collect::<CliResult<Vec<_>>>()?;
        let mut budget = ParticleBudget::default();
        if let Some(m) = self.run.max_particles {
            budget.max_particles = m;
        }
        if let Some(m) = self.run.max_generations {
            budget.max_generations = m;
        }
        let mut spec = ProblemSpec::new(self.domain.beta, rect.clone(), terms, h)
            .with_gradient_terms(b)
            .with_budget(budget);
        if let Some(name) = &self.boundary.exact {
            spec = spec.with_exact(registry.resolve(name, &rect)?);
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn spec(&self, registry: &Registry) -> CliResult<ProblemSpec> {
        let spec = self.spec_on(self.rect()?, registry)?;
        for (i, x) in self.points().iter().enumerate() {
            if !spec.rect.contains(x) {
                return Err(CliError::Invalid(format!(
                    "run.x[{i}] = {x:?} is not inside the domain"
                )));
            }
        }
        Ok(spec)
    }

    /// The same problem on the cube of half-width `r`.
    pub fn spec_with_radius(&self, r: f64, registry: &Registry) -> CliResult<ProblemSpec> {
        let d = self
            .domain
            .dim
            .ok_or_else(|| CliError::Invalid("radius search needs `domain.dim`".into()))?;
        self.spec_on(Rectangle::cube(d, r)?, registry)
    }
}
