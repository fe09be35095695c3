//! Monte Carlo solver for semi-linear elliptic PDEs with Dirichlet data on
//! axis-aligned rectangles, based on branching Brownian motion with
//! absorption at the boundary.

pub mod analysis;
pub mod branching;
pub mod error;
pub mod estimator;
pub mod field;
pub mod general_ad;
pub mod interval;
pub mod kernel_suite;
pub mod oracles;
pub mod problem;
pub mod rect;
pub mod rng;

pub use analysis::{
    admissible_radius, compute_c0, compute_delta, extinction_margin, extinction_radius,
    gamma_threshold, supersolution_residual, CubeFamily, DeltaMethod, OffspringLaw,
    ThresholdReport,
};
pub use branching::{
    derivative_weight, sample_offspring, simulate_psi, BranchingEngine, TreeOutcome,
};
pub use error::{BudgetKind, Error, Result};
pub use estimator::{
    estimate_gradient_1d, estimate_value, estimate_with, EstimatorResult, Moments,
};
pub use field::{Field, Profile, Registry};
pub use general_ad::{
    boundary_weight_sample, interior_weight_sample, sample_ad_weight, step_with_tangent, AdPath,
    DiffusionSpec, EulerConfig, LifetimeLaw, WeightTarget,
};
pub use interval::{exit_laplace, Interval, IntervalKernels, KernelAccuracy, Series, Side};
pub use kernel_suite::{run_kernel_suite, KernelCheck};
pub use oracles::{closed_phi, euler_exit_mc, solve_bvp_1d, BvpSolution, EmpiricalExit};
pub use problem::{MultiIndex, NonlinearityTerm, ParticleBudget, ProblemSpec};
pub use rect::{Arrival, RectExit, RectSampler, Rectangle};
