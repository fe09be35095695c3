//! Simulation of one marked branching Brownian tree with absorption.
//!
//! Every particle runs until `min(Exp(beta) clock, exit time)`. An absorbed
//! particle contributes `h` at its exit point, a branching particle
//! contributes `c_l / p_l` at its death point and spawns `|l|` children
//! there. Particles with a gradient mark `i > 0` also carry
//! `b_i(birth) * W(birth, death)`, with `W` the one-dimensional derivative
//! weight of [`derivative_weight`].

use rand::Rng;

use crate::error::{BudgetKind, Error, Result};
use crate::interval::{Interval, IntervalKernels};
use crate::problem::{MultiIndex, NonlinearityTerm, ProblemSpec};
use crate::rect::{Arrival, RectSampler};
use crate::rng::{LabelKey, SampleStream};

/// Draws a term index with probability `p_l`.
pub fn sample_term<R: Rng + ?Sized>(terms: &[NonlinearityTerm], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, t) in terms.iter().enumerate() {
        acc += t.p;
        if u < acc {
            return k;
        }
    }
    terms.len() - 1
}

/// Draws an offspring multi-index `l` with probability `p_l`.
pub fn sample_offspring<'a, R: Rng + ?Sized>(
    terms: &'a [NonlinearityTerm],
    rng: &mut R,
) -> &'a MultiIndex {
    &terms[sample_term(terms, rng)].l
}

/// Derivative weight for Brownian motion on an interval killed at rate `beta`:
/// `sqrt(2 beta) / tanh(sqrt(2 beta) (x - lo))` when `y > x`,
/// `sqrt(2 beta) / tanh(sqrt(2 beta) (x - hi))` otherwise.
pub fn derivative_weight(beta: f64, iv: &Interval, x: f64, y: f64) -> f64 {
    let k = (2.0 * beta).sqrt();
    if y > x {
        k / (k * (x - iv.lo())).tanh()
    } else {
        k / (k * (x - iv.hi())).tanh()
    }
}

/// Result of one tree.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeOutcome {
    pub psi: f64,
    /// Arrival of the root particle.
    pub root: Arrival,
    pub particles: usize,
    /// Deepest generation reached (root = 0).
    pub generations: usize,
}

struct Node {
    pos: Vec<f64>,
    mark: usize,
    label: LabelKey,
    generation: usize,
}

/// Tree simulator bound to a validated problem.
#[derive(Debug, Clone)]
pub struct BranchingEngine<'a> {
    spec: &'a ProblemSpec,
    sampler: RectSampler,
}

impl<'a> BranchingEngine<'a> {
    pub fn new(spec: &'a ProblemSpec) -> Result<Self> {
        spec.validate()?;
        let sampler = RectSampler::new(IntervalKernels::new(spec.accuracy)?);
        Ok(BranchingEngine { spec, sampler })
    }

    pub fn spec(&self) -> &ProblemSpec {
        self.spec
    }

    /// Simulates the tree rooted at `x`; all randomness comes from `stream`.
    pub fn simulate(&self, x: &[f64], stream: SampleStream) -> Result<TreeOutcome> {
        let spec = self.spec;
        if !spec.rect.contains(x) {
            return Err(Error::DegenerateStart(x.to_vec()));
        }
        let budget = spec.budget;
        let mut stack = vec![Node {
            pos: x.to_vec(),
            mark: 0,
            label: LabelKey::root(),
            generation: 0,
        }];
        let mut psi = 1.0;
        let mut particles = 1usize;
        let mut generations = 0usize;
        let mut root = None;

        while let Some(node) = stack.pop() {
            let mut rng = stream.rng(node.label);
            let arr = self
                .sampler
                .sample_arrival(&node.pos, &spec.rect, spec.beta, &mut rng)?;
            let mut factor = if arr.exited {
                spec.h.eval(&arr.pos)
            } else {
                let k = sample_term(&spec.terms, &mut rng);
                let term = &spec.terms[k];
                let children = term.l.total();
                if children > 0 {
                    if node.generation + 1 > budget.max_generations {
                        return Err(Error::BudgetExceeded(BudgetKind::Generations(
                            budget.max_generations,
                        )));
                    }
                    particles += children;
                    if particles > budget.max_particles {
                        return Err(Error::BudgetExceeded(BudgetKind::Particles(
                            budget.max_particles,
                        )));
                    }
                    generations = generations.max(node.generation + 1);
                    for (i, mark) in term.l.offspring_marks().enumerate() {
                        stack.push(Node {
                            pos: arr.pos.clone(),
                            mark,
                            label: node.label.child(i),
                            generation: node.generation + 1,
                        });
                    }
                }
                term.c.eval(&arr.pos) / term.p
            };
            if node.mark > 0 {
                let iv = spec.rect.axis(0);
                factor *= spec.b[node.mark - 1].eval(&node.pos)
                    * derivative_weight(spec.beta, iv, node.pos[0], arr.pos[0]);
            }
            psi *= factor;
            if root.is_none() {
                root = Some(arr);
            }
        }

        Ok(TreeOutcome {
            psi,
            root: root.expect("root particle is always simulated"),
            particles,
            generations,
        })
    }
}

/// One sample of the estimator at `x`.
pub fn simulate_psi(x: &[f64], spec: &ProblemSpec, stream: SampleStream) -> Result<f64> {
    BranchingEngine::new(spec)?
        .simulate(x, stream)
        .map(|t| t.psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Field;
    use crate::problem::{example_sech, example_tan2, linear_1d, ParticleBudget};
    use crate::rng::seeded;

    #[test]
    fn single_term_is_always_drawn() {
        let terms = vec![NonlinearityTerm::scalar(2, 1.0, 1.0)];
        let mut rng = seeded(1);
        for _ in 0..100 {
            assert_eq!(sample_offspring(&terms, &mut rng).total(), 2);
        }
    }

    #[test]
    fn offspring_frequencies() {
        let spec = example_sech(0.3).unwrap();
        let mut rng = seeded(2);
        let n = 200_000;
        let ones = (0..n)
            .filter(|_| sample_offspring(&spec.terms, &mut rng).total() == 1)
            .count();
        let f = ones as f64 / n as f64;
        assert!((f - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt());

        let spec = example_tan2(0.1).unwrap();
        let total: usize = (0..n)
            .map(|_| sample_offspring(&spec.terms, &mut rng).total())
            .sum();
        let mean = total as f64 / n as f64;
        // variance of |l| is 4 * 0.75 - 1.5^2 = 0.75
        assert!((mean - 1.5).abs() < 3.0 * (0.75 / n as f64).sqrt());
    }

    #[test]
    fn derivative_weight_is_log_derivative_of_harmonic_measure() {
        let beta: f64 = 1.3;
        let iv = Interval::new(-0.4, 0.6).unwrap();
        let k = (2.0 * beta).sqrt();
        // Probability-weighted exits: E[e^{-beta eta}; hi] = sinh(k (x - lo)) / sinh(k w).
        let up = |x: f64| (k * (x - iv.lo())).sinh();
        let down = |x: f64| (k * (iv.hi() - x)).sinh();
        let x = 0.1;
        let h = 1e-6;
        let dlog_up = (up(x + h).ln() - up(x - h).ln()) / (2.0 * h);
        let dlog_down = (down(x + h).ln() - down(x - h).ln()) / (2.0 * h);
        assert!((derivative_weight(beta, &iv, x, 0.6) - dlog_up).abs() < 1e-6);
        assert!((derivative_weight(beta, &iv, x, -0.4) - dlog_down).abs() < 1e-6);
    }

    #[test]
    fn unit_factors_give_unit_psi() {
        let spec = linear_1d(1.0, 0.5, Field::constant(1.0)).unwrap();
        let mut spec = spec;
        spec.terms = vec![
            NonlinearityTerm::scalar(2, 0.5, 0.5),
            NonlinearityTerm::scalar(0, 0.5, 0.5),
        ];
        let engine = BranchingEngine::new(&spec).unwrap();
        for i in 0..500 {
            let t = engine.simulate(&[0.1], SampleStream::new(4, i)).unwrap();
            assert_eq!(t.psi, 1.0);
        }
    }

    #[test]
    fn deterministic_given_stream() {
        let spec = example_sech(0.5).unwrap();
        let engine = BranchingEngine::new(&spec).unwrap();
        for i in 0..200 {
            let a = engine.simulate(&[0.0], SampleStream::new(9, i)).unwrap();
            let b = engine.simulate(&[0.0], SampleStream::new(9, i)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn budget_errors() {
        let mut spec = example_sech(1.0).unwrap();
        spec.terms = vec![NonlinearityTerm::scalar(3, 1.0, 1.0)];
        spec.budget = ParticleBudget {
            max_particles: 50,
            max_generations: 10_000,
        };
        let engine = BranchingEngine::new(&spec).unwrap();
        let hit = (0..200).any(|i| {
            matches!(
                engine.simulate(&[0.0], SampleStream::new(1, i)),
                Err(Error::BudgetExceeded(BudgetKind::Particles(50)))
            )
        });
        assert!(hit);

        spec.terms = vec![NonlinearityTerm::scalar(1, 1.0, 1.0)];
        spec.budget = ParticleBudget {
            max_particles: 1_000_000,
            max_generations: 3,
        };
        let engine = BranchingEngine::new(&spec).unwrap();
        let hit = (0..200).any(|i| {
            matches!(
                engine.simulate(&[0.0], SampleStream::new(1, i)),
                Err(Error::BudgetExceeded(BudgetKind::Generations(3)))
            )
        });
        assert!(hit);
    }

    #[test]
    fn rejects_boundary_start() {
        let spec = example_sech(0.3).unwrap();
        assert!(matches!(
            simulate_psi(&[0.3], &spec, SampleStream::new(0, 0)),
            Err(Error::DegenerateStart(_))
        ));
    }
}
