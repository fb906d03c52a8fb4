use thiserror::Error;

pub type Result<T, E = SnmError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SnmError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{moment} of the volume law is infinite for these parameters")]
    InfiniteMoment { moment: &'static str },

    #[error("quadrature did not converge: value {value:e}, estimated error {error:e}, requested {requested:e}")]
    Quadrature { value: f64, error: f64, requested: f64 },

    #[error("root finding failed: {0}")]
    RootFinding(String),

    #[error("content {0} has no class assignment but a class filter is active")]
    UnknownContentClass(u64),

    #[error("node {0} is not a leaf of the topology")]
    NotALeaf(u32),

    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("target hit ratio {target} is unreachable; asymptotic hit ratio is {asymptote}")]
    UnreachableTarget { target: f64, asymptote: f64 },

    #[error("malformed trace at line {line}: {reason}")]
    TraceFormat { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl SnmError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        SnmError::InvalidParameter(msg.into())
    }

    /// Numerical failures (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            SnmError::Quadrature { .. } | SnmError::RootFinding(_) | SnmError::InfiniteMoment { .. }
        )
    }
}
