use thiserror::Error;

/// Errors produced by the solvers, certifiers, and I/O layer.
#[derive(Debug, Error)]
pub enum Error {
    /// Input data outside the admissible domain (non-finite entries,
    /// negative weights, non-SPD operators, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Structurally inconsistent arguments (dimension or endpoint mismatch).
    #[error("argument error: {0}")]
    Argument(String),

    /// An iterative kernel hit its iteration cap before reaching tolerance.
    #[error("{op} did not converge after {iterations} iterations (residual {residual:.3e})")]
    Numerical {
        op: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// A time step of an incremental solve failed to reach its inclusion
    /// tolerance; carries the step index and time.
    #[error("step {step} (t = {time:.6e}) failed: residual {residual:.3e}")]
    StepFailure {
        step: usize,
        time: f64,
        residual: f64,
    },

    /// A mathematical invariant that must hold by construction was violated,
    /// which indicates a solver bug rather than bad data.
    #[error("invariant violation: {0}")]
    Invariant(String),

    /// Configuration rejected by schema validation; `path` names the field.
    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
