use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point outside the domain of `{id}`: {reason}")]
    OutsideDomain { id: String, reason: String },

    #[error("unknown curvature function id `{0}`")]
    UnknownFunction(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("horo-convexity lost at cell {cell} (tau = {tau}): kappa = {kappa:e}")]
    HoroConvexityLost { cell: usize, tau: f64, kappa: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("time {t} is at or beyond the maximal existence time {t_max}")]
    BeyondMaximalTime { t: f64, t_max: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
