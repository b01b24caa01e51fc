use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),

    #[error("invalid search grid: {0}")]
    InvalidGrid(String),

    #[error("invalid receiver array: {0}")]
    InvalidArray(String),

    #[error("invalid location (range {range} m, depth {depth} m): {reason}")]
    InvalidLocation {
        range: f64,
        depth: f64,
        reason: &'static str,
    },

    #[error("no propagating modes at {frequency_hz} Hz")]
    DegenerateModes { frequency_hz: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("projection needs 1 <= M <= N, got M = {m}, N = {n}")]
    InvalidProjection { m: usize, n: usize },

    #[error("zero-norm replica at grid index {index}")]
    ZeroNorm { index: usize },

    #[error("reference vector has zero norm")]
    ZeroVector,

    #[error(
        "incoherent compressive MFP with M = 1 is ill-defined: \
         the objective does not depend on the candidate location"
    )]
    DegenerateIncoherent,

    #[error("loaded covariance matrix is singular")]
    SingularCovariance,

    #[error("every grid location is unusable")]
    NoUsableLocation,

    #[error("exclusion ellipse covers the whole search grid")]
    EmptyExclusionComplement,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cache format error: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad inputs rather than numerical breakdown.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidEnvironment(_)
                | Error::InvalidGrid(_)
                | Error::InvalidArray(_)
                | Error::InvalidLocation { .. }
                | Error::InvalidProjection { .. }
                | Error::DegenerateIncoherent
                | Error::InvalidParameter(_)
                | Error::DimensionMismatch { .. }
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}
