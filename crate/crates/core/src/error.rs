use thiserror::Error;

/// Errors surfaced by the simulator library.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("config field `{path}`: {message}")]
    ConfigField { path: String, message: String },

    #[error("unknown override key `{0}`")]
    UnknownOverride(String),

    #[error("grid too small: {needed} distinct stationary cells needed, {available} available")]
    GridTooSmall { needed: u64, available: u64 },

    #[error("invalid matrix set: {0}")]
    InvalidMatrices(String),

    #[error("unknown period index {0}")]
    UnknownPeriod(usize),

    #[error("node {0} has no work cell")]
    NoWorkCell(u32),

    #[error("activity log line {line}: {message}")]
    ActivityLog { line: u64, message: String },

    #[error("csv line {line}: {message}")]
    CsvRecord { line: u64, message: String },

    #[error("coverage gap for individual `{individual}` between {from} and {to}")]
    CoverageGap {
        individual: String,
        from: String,
        to: String,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl SimError {
    /// True for errors caused by user input (bad config, bad file contents)
    /// rather than by the runtime environment.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, SimError::Io(_))
    }
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
