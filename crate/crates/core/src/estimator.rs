//! Monte Carlo aggregation of tree samples.
//!
//! Sample `i` of a run with seed `s` always uses the random stream `(s, i)`,
//! and samples are grouped into fixed chunks whose moment summaries are
//! merged in chunk order, so results do not depend on the number of worker
//! threads.

use std::time::Instant;

use rayon::prelude::*;

use crate::branching::{derivative_weight, BranchingEngine, TreeOutcome};
use crate::error::{Error, Result};
use crate::problem::ProblemSpec;
use crate::rng::SampleStream;

/// Two-sided 99% standard normal quantile.
pub const Z99: f64 = 2.576;

const CHUNK: u64 = 1024;

/// Streaming mean and centered second moment.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }

    /// Combines two disjoint summaries.
    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.n as f64 * other.n as f64 / n as f64);
        self.n = n;
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    pub fn std(&self) -> f64 {
        self.variance().sqrt()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Diagnostics {
    pub mean_tree_size: f64,
    pub max_tree_size: usize,
    pub max_generation: usize,
    /// Trees stopped by the particle budget (a run with any is aborted, so
    /// completed results always report 0).
    pub budget_hits: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorResult {
    pub mean: f64,
    pub std: f64,
    pub ci99: (f64, f64),
    pub n: u64,
    /// Wall-clock seconds.
    pub elapsed: f64,
    pub diagnostics: Diagnostics,
}

impl EstimatorResult {
    fn from_moments(m: &Moments, elapsed: f64, diagnostics: Diagnostics) -> Self {
        let std = m.std();
        let half = Z99 * std / (m.n as f64).sqrt();
        EstimatorResult {
            mean: m.mean,
            std,
            ci99: (m.mean - half, m.mean + half),
            n: m.n,
            elapsed,
            diagnostics,
        }
    }

    pub fn std_error(&self) -> f64 {
        self.std / (self.n as f64).sqrt()
    }

    /// `std / mean`, or `None` when the 99% interval contains zero.
    pub fn std_over_mean(&self) -> Option<f64> {
        if self.ci99.0 <= 0.0 && self.ci99.1 >= 0.0 {
            None
        } else {
            Some(self.std / self.mean)
        }
    }

    /// `|mean - exact| / |exact|`, or `None` when the exact value is zero.
    pub fn relative_error(&self, exact: f64) -> Option<f64> {
        (exact != 0.0).then(|| (self.mean - exact).abs() / exact.abs())
    }

    pub fn ci_contains(&self, v: f64) -> bool {
        self.ci99.0 <= v && v <= self.ci99.1
    }

    /// Whether the two 99% intervals intersect.
    pub fn ci_overlaps(&self, other: &EstimatorResult) -> bool {
        self.ci99.0 <= other.ci99.1 && other.ci99.0 <= self.ci99.1
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Chunk {
    moments: Moments,
    particles: u64,
    max_tree: usize,
    max_gen: usize,
}

/// Runs `n` trees at `x` and aggregates `score(tree)`.
pub fn estimate_with<F>(
    spec: &ProblemSpec,
    x: &[f64],
    n: u64,
    seed: u64,
    score: F,
) -> Result<EstimatorResult>
where
    F: Fn(&TreeOutcome) -> f64 + Sync,
{
    if n < 2 {
        return Err(Error::InvalidSpec(format!(
            "need at least 2 samples, got {n}"
        )));
    }
    let engine = BranchingEngine::new(spec)?;
    if !spec.rect.contains(x) {
        return Err(Error::DegenerateStart(x.to_vec()));
    }
    let start = Instant::now();
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Result<Chunk>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = Chunk::default();
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let tree = engine.simulate(x, SampleStream::new(seed, i))?;
                let v = score(&tree);
                if !v.is_finite() {
                    return Err(Error::NonFinite { index: i, value: v });
                }
                acc.moments.push(v);
                acc.particles += tree.particles as u64;
                acc.max_tree = acc.max_tree.max(tree.particles);
                acc.max_gen = acc.max_gen.max(tree.generations);
            }
            Ok(acc)
        })
        .collect();
    let mut total = Chunk::default();
    for part in parts {
        let part = part?;
        total.moments.merge(&part.moments);
        total.particles += part.particles;
        total.max_tree = total.max_tree.max(part.max_tree);
        total.max_gen = total.max_gen.max(part.max_gen);
    }
    let diagnostics = Diagnostics {
        mean_tree_size: total.particles as f64 / n as f64,
        max_tree_size: total.max_tree,
        max_generation: total.max_gen,
        budget_hits: 0,
    };
    Ok(EstimatorResult::from_moments(
        &total.moments,
        start.elapsed().as_secs_f64(),
        diagnostics,
    ))
}

/// Estimates `u(x) = E[psi^x]`.
pub fn estimate_value(spec: &ProblemSpec, x: &[f64], n: u64, seed: u64) -> Result<EstimatorResult> {
    estimate_with(spec, x, n, seed, |t| t.psi)
}

/// Estimates `u'(x) = E[psi^x W(x, X_root)]` on a one-dimensional domain.
pub fn estimate_gradient_1d(
    spec: &ProblemSpec,
    x: &[f64],
    n: u64,
    seed: u64,
) -> Result<EstimatorResult> {
    if spec.dim() != 1 {
        return Err(Error::GradientUnsupported(spec.dim()));
    }
    let iv = *spec.rect.axis(0);
    let beta = spec.beta;
    let x0 = x[0];
    estimate_with(spec, x, n, seed, move |t| {
        t.psi * derivative_weight(beta, &iv, x0, t.root.pos[0])
    })
}
