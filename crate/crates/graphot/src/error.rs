use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphotError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("size mismatch: {context} (expected {expected}, got {got})")]
    SizeMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("graph is disconnected; one component is {component:?} ({size} of {n} nodes)")]
    Disconnected {
        component: Vec<usize>,
        size: usize,
        n: usize,
    },

    #[error("C_theta integral diverges for this interpolation (condition 6 fails)")]
    CThetaInfinite,

    #[error("distance is infinite: {0}")]
    DistanceInfinite(String),

    #[error("interpolation evaluated at negative input ({r}, {s})")]
    NegativeInput { r: f64, s: f64 },

    #[error("measures are not mass-balanced: {lhs} vs {rhs}")]
    UnbalancedMasses { lhs: f64, rhs: f64 },

    #[error("bottleneck distance needs equal-cardinality uniform supports ({0})")]
    CardinalityMismatch(String),

    #[error("iterative method failed to converge: {0}")]
    NoConvergence(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, GraphotError>;
