use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An operation was called on data that breaks its precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("symbol is not finite at frequency {frequency:?}")]
    NonFiniteSymbol { frequency: Vec<f64> },

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("margin {margin} is not resolved along axis {axis}: need N >= {min_points}")]
    Unresolved {
        axis: usize,
        margin: f64,
        min_points: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("solution blew up at t = {t}")]
    BlowUp {
        t: f64,
        /// Last checkpoint that was finite, if any.
        last_good: Option<Box<crate::propagators::Trajectory>>,
    },

    #[error("observability failure at this resolution: {0}")]
    ObservabilityFailure(String),

    #[error("fixed-point iteration diverged after {sweeps} sweeps")]
    Divergence {
        sweeps: usize,
        update_norms: Vec<f64>,
    },

    #[error("data too large for the local theory: |u0|_H^s = {norm} exceeds delta = {delta}")]
    DataTooLarge { norm: f64, delta: f64 },

    #[error("{half} half of the exact-control problem failed: {source}")]
    HalfFailed {
        half: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("band limit {band} aliases on axis {axis} with {points} points")]
    Aliasing {
        axis: usize,
        band: usize,
        points: usize,
    },

    #[error("bad field dump: {0}")]
    Format(String),

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
