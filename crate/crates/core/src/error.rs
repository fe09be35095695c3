use thiserror::Error;

/// Which particle budget a tree ran out of.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BudgetKind {
    Particles(usize),
    Generations(usize),
}

impl std::fmt::Display for BudgetKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BudgetKind::Particles(n) => write!(f, "more than {n} particles"),
            BudgetKind::Generations(n) => write!(f, "more than {n} generations"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid problem: {0}")]
    InvalidSpec(String),
    #[error("conditioning event too rare: survival probability {survival:e}")]
    ConditioningTooRare { survival: f64 },
    #[error("particle started on the boundary at {0:?}")]
    DegenerateStart(Vec<f64>),
    #[error("branching tree exceeded its budget: {0}")]
    BudgetExceeded(BudgetKind),
    #[error("non-finite estimator sample {value} at sample {index}")]
    NonFinite { index: u64, value: f64 },
    #[error("gradient estimator needs a one-dimensional domain, got d = {0}")]
    GradientUnsupported(usize),
    #[error("unsupported domain: {0}")]
    UnsupportedDomain(String),
    #[error("dominating branching process is not subcritical (mean offspring {0})")]
    Supercritical(f64),
    #[error("no admissible radius in [{lo}, {hi}]")]
    NeverAdmissible { lo: f64, hi: f64 },
    #[error("every radius in [{lo}, {hi}] is admissible")]
    AlwaysAdmissible { lo: f64, hi: f64 },
    #[error("Newton iteration did not converge after {0} iterations")]
    NewtonDiverged(usize),
    #[error("weight clock under-resolved at time {time} (accumulated {clock})")]
    ClockUnderResolved { time: f64, clock: f64 },
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
