use alloc::boxed::Box;
use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ZslError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("out of bounds: {0}")]
    Bounds(String),
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("degenerate vector at column {column}: {context}")]
    DegenerateVector { column: usize, context: &'static str },
    #[error("degenerate landmark for class {class}: class mean has zero norm")]
    DegenerateLandmark { class: u32 },
    #[error("usage: {0}")]
    Usage(String),
    #[error("optimisation diverged at iteration {iteration} (cost {cost})")]
    Diverged { iteration: usize, cost: f64 },
    #[error("eigensolver failed to converge for eigenvalue {index}")]
    NoConvergence { index: usize },
    #[error("candidate `{name}`: {source}")]
    Candidate { name: String, source: Box<ZslError> },
}

impl ZslError {
    /// Short machine-readable category, stable across releases.
    pub fn category(&self) -> &'static str {
        match self {
            ZslError::InvalidInput(_) => "invalid-input",
            ZslError::Shape(_) => "shape",
            ZslError::Bounds(_) => "bounds",
            ZslError::NotPositiveDefinite { .. } => "definiteness",
            ZslError::DegenerateVector { .. } => "degenerate-vector",
            ZslError::DegenerateLandmark { .. } => "degenerate-landmark",
            ZslError::Usage(_) => "usage",
            ZslError::Diverged { .. } => "divergence",
            ZslError::NoConvergence { .. } => "no-convergence",
            ZslError::Candidate { source, .. } => source.category(),
        }
    }
}

pub type Result<T> = core::result::Result<T, ZslError>;
