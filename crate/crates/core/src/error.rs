use thiserror::Error;

/// Errors surfaced by the solvers, model builders and generators.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    Dimension {
        expected: usize,
        got: usize,
        context: String,
    },
    #[error("row {row} has no nonzero coefficient and cannot be satisfied")]
    EmptyRow { row: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid tolerances: {0}")]
    InvalidTolerances(String),
    #[error("simplex made no progress within {iterations} iterations")]
    NumericalFailure { iterations: usize },
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("warm start violates constraint {row} `{name}` by {violation:.3e}")]
    WarmStartInfeasible {
        row: usize,
        name: String,
        violation: f64,
    },
    #[error("row {row} of decision-maker {k} is identically zero")]
    ZeroRow { k: usize, row: usize },
    #[error("feasible region is unbounded along direction {direction:?}")]
    UnboundedRegion { direction: Vec<f64> },
    #[error("too few points for clustering: {points} distinct points, {clusters} clusters")]
    TooFewPoints { points: usize, clusters: usize },
    #[error("big-M constant {name} must be positive, got {value}")]
    BadBigM { name: String, value: f64 },
    #[error("assignment variable u[{k},{l}] = {value} is not binary")]
    FractionalAssignment { k: usize, l: usize, value: f64 },
    #[error("instance exceeds brute-force size guard: {0}")]
    SizeGuard(String),
    #[error("generator failed after {attempts} attempts: {reason}")]
    GeneratorFailed { attempts: usize, reason: String },
    #[error("no feasible solution found: {0}")]
    NoSolution(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
