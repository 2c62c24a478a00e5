use thiserror::Error;

/// Shape and argument errors raised while building or combining games and policies.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Failures of the one-step equilibrium solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("payoff entry at index {index} is not finite")]
    NonFinite { index: usize },
    #[error("payoff tensors have inconsistent shapes: {0}")]
    Shape(String),
    #[error("game exceeds the support-enumeration size guard: {0}")]
    SizeGuard(String),
    #[error("linear program is infeasible (phase-one objective {0:e})")]
    Infeasible(f64),
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("tolerance {tol:e} not met after {iterations} iterations (best residual {residual:e})")]
    ToleranceNotMet {
        tol: f64,
        residual: f64,
        iterations: usize,
        best: Option<Box<crate::matrix_equilibrium::EquilibriumCertificate>>,
    },
    #[error("no equilibrium found by support enumeration within tolerance {0:e}")]
    NoSolution(f64),
}

/// Errors surfaced by the learning algorithms.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgoError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("equilibrium solver failed at step {h}, state {s}: {source}")]
    Solver {
        h: usize,
        s: usize,
        #[source]
        source: SolverError,
    },
    #[error("table budget exceeded: {cells} cells requested, budget is {budget}")]
    Budget { cells: usize, budget: usize },
}
