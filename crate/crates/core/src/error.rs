use thiserror::Error;

pub type Result<T, E = GpError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GpError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch { context: &'static str, expected: usize, found: usize },

    /// Cholesky factorization failed even after the bounded jitter retries.
    #[error("covariance is not positive definite (smallest pivot {min_pivot:e})")]
    SingularCovariance { min_pivot: f64 },

    #[error("linear map is rank deficient (smallest pivot {min_pivot:e})")]
    RankDeficient { min_pivot: f64 },

    #[error("insufficient data: {found} points, need at least {required}")]
    InsufficientData { found: usize, required: usize },

    #[error("all {0} partitions failed to evaluate")]
    AllPartitionsFailed(usize),

    #[error("training outputs have zero variance; standardized loss undefined")]
    DegenerateBaseline,

    #[error("optimization failed: {0}")]
    OptimizationFailed(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("empty data: {0}")]
    EmptyData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl GpError {
    pub(crate) fn singular(f: crate::linalg::FactorFailure) -> Self {
        GpError::SingularCovariance { min_pivot: f.min_pivot }
    }

    /// Errors that signal a numerically pathological evaluation point rather
    /// than a usage mistake.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            GpError::SingularCovariance { .. }
                | GpError::RankDeficient { .. }
                | GpError::AllPartitionsFailed(_)
                | GpError::OptimizationFailed(_)
                | GpError::DegenerateBaseline
        )
    }
}

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(GpError::DimensionMismatch { context, expected, found })
    }
}
