use thiserror::Error;

/// Errors shared by every stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("generation failed after {attempts} attempts at stage {stage}")]
    GenerationFailed { stage: usize, attempts: usize },
    #[error("mesh too coarse: {0}")]
    MeshTooCoarse(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("eigensolver did not converge after {iterations} iterations (max residual {max_residual:e})")]
    Convergence {
        iterations: usize,
        max_residual: f64,
        partial_values: Vec<f64>,
        partial_residuals: Vec<f64>,
    },
    #[error("eigenvalue {index} is not simple (relative gap {gap:e})")]
    DegenerateEigenvalue { index: usize, gap: f64 },
    #[error("outside the domain of definition: {0}")]
    Domain(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Stage name used by the CLI when reporting numerical failures.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical(_) | Error::Convergence { .. } | Error::DegenerateEigenvalue { .. }
        )
    }
}
