use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("integration diverged: non-finite state after t = {last_valid_time}")]
    Divergence { last_valid_time: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("defective system: eigenvalues {first} and {second} coincide within {tol:e}")]
    Defective { first: String, second: String, tol: f64 },

    #[error("eigenvalue {index} is zero; direction {index} is already a conservation law")]
    ConservationDirection { index: usize },

    #[error("point {point:?} is singular for coordinate {coordinate}")]
    SingularPoint { coordinate: usize, point: Vec<f64> },

    #[error("eigenvalue is zero: the eigenfunction is a conservation law and induces no time mapping")]
    ConservationLaw,

    #[error("reference state {0:?} lies on the zero set of the eigenfunction")]
    OriginOnZeroSet(Vec<f64>),

    #[error("illegal action: weights sum to {sum}, not 1")]
    IllegalAction { sum: f64 },

    #[error("time mappings do not share an origin")]
    OriginMismatch,

    #[error("branch guard violated at {point:?}: product of time mappings has negative real part")]
    BranchGuard { point: Vec<f64> },

    #[error("every probe point was skipped; nothing to report")]
    EmptyReport,

    #[error("no grid point lies inside the chart domain")]
    EmptyGrid,

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    TrainingDivergence { epoch: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown system `{0}`")]
    UnknownSystem(String),

    #[error("system `{0}` has no registered analytic chart")]
    NoAnalyticChart(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
