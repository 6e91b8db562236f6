use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{path}: malformed CSV: {message}")]
    MalformedCsv { path: PathBuf, message: String },

    #[error("{path}: missing values on {}", dates.join(", "))]
    MissingValues { path: PathBuf, dates: Vec<String> },

    #[error("{path}: dates are not contiguous months ({before} is followed by {after})")]
    DateGap { path: PathBuf, before: String, after: String },

    #[error("joined dataset has {rows} rows; at least {min} are required")]
    TooFewRows { rows: usize, min: usize },

    #[error("variable `{0}` appears in more than one input")]
    DuplicateVariable(String),

    #[error("variable `{0}` not found in the dataset")]
    UnknownVariable(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("network access is disabled; download the CSV files and use `ingest`")]
    NetworkDisabled,

    #[error("unknown FRED series `{0}`")]
    UnknownSeries(String),

    #[error("HTTP request for {url} failed: {message}")]
    Http { url: String, message: String },

    #[error("stage `{stage}` failed: {source}")]
    Stage { stage: String, source: tsecon::Error },

    #[error("{0}")]
    Serialize(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
