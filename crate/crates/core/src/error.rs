use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("no strong signals selected")]
    NoStrongSignals,

    #[error("degenerate variance: residual of the underfitted model is exactly zero")]
    DegenerateVariance,

    /// One of the Gram blocks used by the weight statistic is rank deficient.
    #[error("singular restricted design: {block} is rank deficient")]
    SingularDesign { block: &'static str },

    #[error("insufficient weak set: p2 = {p2} (need at least 3)")]
    InsufficientWeakSet { p2: usize },

    #[error("unbounded shrink factor: W_n = 0 for variant {variant}")]
    UnboundedShrinkFactor { variant: String },

    #[error("degenerate PE: prediction error is numerically zero for {estimator}")]
    DegeneratePredictionError { estimator: String },

    #[error("{failed} of {total} jobs failed (more than 10%); first reason: {first_reason}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        first_reason: String,
    },

    #[error("missing values at {}", format_cells(.cells))]
    MissingValues { cells: Vec<(usize, String)> },

    #[error("parse error at line {line}, column '{column}': {message}")]
    Parse {
        line: usize,
        column: String,
        message: String,
    },

    #[error("config error{}: {message}", key_suffix(.key))]
    Config { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn key_suffix(key: &str) -> String {
    if key.is_empty() {
        String::new()
    } else {
        format!(" at '{key}'")
    }
}

fn format_cells(cells: &[(usize, String)]) -> String {
    let shown: Vec<String> = cells
        .iter()
        .take(20)
        .map(|(line, col)| format!("line {line} column '{col}'"))
        .collect();
    if cells.len() > shown.len() {
        format!("{} (and {} more)", shown.join(", "), cells.len() - shown.len())
    } else {
        shown.join(", ")
    }
}

impl Error {
    /// Short machine-readable tag used in structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::InvalidDataset(_) => "invalid_dataset",
            Error::NoStrongSignals => "no_strong_signals",
            Error::DegenerateVariance => "degenerate_variance",
            Error::SingularDesign { .. } => "singular_design",
            Error::InsufficientWeakSet { .. } => "insufficient_weak_set",
            Error::UnboundedShrinkFactor { .. } => "unbounded_shrink_factor",
            Error::DegeneratePredictionError { .. } => "degenerate_pe",
            Error::TooManyFailures { .. } => "too_many_failures",
            Error::MissingValues { .. } => "missing_values",
            Error::Parse { .. } => "parse",
            Error::Config { .. } => "config",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }

    /// Whether the error stems from user input (configuration or data files)
    /// rather than from a failed computation.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_)
                | Error::InvalidDataset(_)
                | Error::MissingValues { .. }
                | Error::Parse { .. }
                | Error::Config { .. }
                | Error::Io(_)
                | Error::Csv(_)
        )
    }
}
