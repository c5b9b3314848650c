use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the numerical building blocks.
///
/// Solver-level failures that carry partial reports live next to their
/// solvers (see [`crate::fixed_point::SolveError`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("multiplier output is not real: imaginary residue {residue:e} exceeds {threshold:e}")]
    SymmetryViolation { residue: f64, threshold: f64 },

    #[error("rescaled support {needed} exceeds grid half-width {available}")]
    DomainOverflow { needed: f64, available: f64 },

    #[error("finite-difference estimate is not finite at |xi| = {xi:e} (step {step:e})")]
    StepSize { xi: f64, step: f64 },

    #[error("iteration did not converge after {iterations} iterations (last change {last_change:e})")]
    Convergence { iterations: usize, last_change: f64 },

    #[error("iterate collapsed to zero after {iterations} iterations")]
    Collapse { iterations: usize },

    #[error("Krylov iteration stagnated at relative residual {residual:e} after {iterations} iterations")]
    Stagnation { iterations: usize, residual: f64 },

    #[error("Krylov iteration reached {iterations} iterations at relative residual {residual:e}")]
    MaxIterations { iterations: usize, residual: f64 },

    #[error("right-hand side is not radially symmetric (defect {defect:e})")]
    NotRadial { defect: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("malformed field dump: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
