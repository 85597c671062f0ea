//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Evaluation requested outside the admissible domain (e.g. a slope at
    /// or beyond the gradient blow-up radius).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),

    /// IEEE evaluation produced a NaN or infinity.
    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("convergence error: {0}")]
    Convergence(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// No (delta, nu) pair validated the sampled growth inequalities.
    #[error("growth not observed: {0}")]
    GrowthNotObserved(String),

    /// The strict-dominance requirement on the growth constants failed.
    #[error("constants error: {0}")]
    Constants(String),

    #[error("level set empty: {0}")]
    LevelSetEmpty(String),

    #[error("penalty not converged: {0}")]
    PenaltyNotConverged(String),

    /// A scenario-specific hypothesis check failed; the message names it.
    #[error("check failed: {0}")]
    CheckFailed(String),

    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
