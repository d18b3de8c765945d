use thiserror::Error;

/// Errors produced by every fitting, forecasting and I/O routine in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("insufficient data: need {needed} observations, have {available}")]
    InsufficientData { needed: usize, available: usize },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("entity `{0}` has no series")]
    MissingEntity(String),

    #[error("optimizer did not converge after {iterations} iterations (best {best:?}, objective {objective:e})")]
    NoConvergence {
        iterations: usize,
        best: Vec<f64>,
        objective: f64,
    },

    #[error("value {value} lies below the tail threshold x_min = {x_min}")]
    BelowTail { value: f64, x_min: f64 },

    #[error("peak state cannot be trained: {0}")]
    UntrainablePeakState(String),

    #[error("{file}:{row}: {message}")]
    Parse {
        file: String,
        row: usize,
        message: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Short machine-readable tag for the variant, used in CLI error objects.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::DegenerateSample(_) => "degenerate_sample",
            Error::MissingEntity(_) => "missing_entity",
            Error::NoConvergence { .. } => "no_convergence",
            Error::BelowTail { .. } => "below_tail",
            Error::UntrainablePeakState(_) => "untrainable_peak_state",
            Error::Parse { .. } => "parse",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
