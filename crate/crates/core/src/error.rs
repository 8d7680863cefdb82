use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Structural CSV problem (unbalanced quoting, wrong field count, bad UTF-8).
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    /// A cell, column or period that violates a data invariant. `row` is the
    /// 1-based data row (header excluded).
    #[error("validation error{}{}: {message}",
        row.map(|r| format!(" at row {r}")).unwrap_or_default(),
        column.as_ref().map(|c| format!(", column \"{c}\"")).unwrap_or_default())]
    Validation {
        row: Option<usize>,
        column: Option<String>,
        message: String,
    },

    #[error("time index {t} out of range: minimum valid index is {min}, maximum is {max}")]
    OutOfRange { t: usize, min: usize, max: usize },

    #[error("panel shorter than window: {periods} periods, window length {k}")]
    PanelShorterThanWindow { periods: usize, k: usize },

    #[error("invalid window length {0}: must be at least 2")]
    InvalidWindow(usize),

    #[error("column index {index} out of range for {n} columns")]
    IndexOutOfRange { index: usize, n: usize },

    #[error(
        "{n} columns exceeds the materialization limit of {limit}; \
         use the indicator engine, which never builds the full matrix"
    )]
    Capacity { n: usize, limit: usize },

    #[error("invalid engine configuration: {0}")]
    Config(String),

    #[error("non-finite value {value} in input row at column {column}")]
    NonFinite { column: usize, value: f64 },

    #[error("empty series")]
    EmptySeries,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("time axes differ at index {index}")]
    AxisMismatch { index: usize },

    #[error("instance too large for exhaustive search: {size} assignments exceeds {limit}")]
    TooLarge { size: f64, limit: u64 },

    #[error("unknown process id \"{0}\"")]
    UnknownProcess(String),

    #[error("unknown format \"{0}\"")]
    UnknownFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(row: Option<usize>, column: Option<&str>, message: impl Into<String>) -> Self {
        Error::Validation {
            row,
            column: column.map(str::to_owned),
            message: message.into(),
        }
    }

    pub(crate) fn from_csv(err: csv::Error) -> Self {
        let line = err.position().map(|p| p.line()).unwrap_or(0);
        let message = err.to_string();
        match err.into_kind() {
            csv::ErrorKind::Io(e) => Error::Io(e),
            _ => Error::Parse { line, message },
        }
    }
}
