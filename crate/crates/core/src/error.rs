use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("cause index {cause} out of range 1..={k}")]
    CauseOutOfRange { cause: usize, k: usize },

    #[error("number of causes differs between groups ({left} vs {right})")]
    CauseCountMismatch { left: usize, right: usize },

    #[error("time horizon must be positive, got {0}")]
    InvalidHorizon(f64),

    #[error("invalid censoring specification: {0}")]
    InvalidCensoring(String),

    #[error("cohort is empty")]
    EmptyCohort,

    #[error("cohort has zero total observed time")]
    ZeroTotalTime,

    #[error("invalid observation: {0}")]
    InvalidObservation(String),

    #[error("log-likelihood undefined: {0}")]
    ZeroRateWithEvents(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("constrained fit failed{}: {reason}", replicate.map(|r| format!(" (replicate {r})")).unwrap_or_default())]
    ConstrainedFitFailed {
        replicate: Option<usize>,
        reason: String,
    },

    #[error("study aborted: {failures} of {n_sim} replicates failed (first: replicate {first_index}: {first_reason})")]
    StudyAborted {
        failures: usize,
        n_sim: usize,
        first_index: usize,
        first_reason: String,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Numerical failures as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ConstrainedFitFailed { .. } | Error::StudyAborted { .. }
        )
    }
}
