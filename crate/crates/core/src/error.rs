use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("input does not conform to block spec: {0}")]
    NonConforming(String),

    #[error("initial point is infeasible (distance to feasible set {distance:.3e})")]
    Infeasible { distance: f64 },

    #[error("symmetric eigensolver did not converge after {sweeps} sweeps (off-diagonal residual {residual:.3e})")]
    EigenNoConvergence { sweeps: usize, residual: f64 },

    #[error("cost returned non-finite value {value} at input {input:?}")]
    NonFiniteCost { value: f64, input: Vec<f64> },

    #[error("Riccati recursion did not converge after {iterations} iterations (residual {residual:.3e})")]
    DareNoConvergence { iterations: usize, residual: f64 },

    #[error("QP is infeasible")]
    QpInfeasible,

    #[error(
        "QP solver did not converge after {iterations} iterations (KKT residual {residual:.3e})"
    )]
    QpNoConvergence { iterations: usize, residual: f64 },

    #[error("reduced Hessian is not positive definite; check weight block {block}")]
    NotPositiveDefinite { block: &'static str },

    #[error("run with seed {seed} failed: {source}")]
    SeedFailed {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
