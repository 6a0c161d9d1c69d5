use thiserror::Error;

/// Errors raised by the library and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameters, grid mismatches and malformed config files.
    #[error("configuration error: {0}")]
    Config(String),

    /// An interval or point fell outside the grid domain.
    #[error("interval [{a}, {b}] is outside the domain [{lo}, {hi}]")]
    Domain { a: f64, b: f64, lo: f64, hi: f64 },

    /// Config file parse failure with its 1-based line number.
    #[error("config line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A NaN or infinity was produced somewhere in the pipeline.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Prefixes a configuration message with `ctx`; other variants pass
    /// through unchanged.
    pub(crate) fn context(self, ctx: &str) -> Self {
        match self {
            Error::Config(m) => Error::Config(format!("{ctx}: {m}")),
            other => other,
        }
    }

    /// Process exit code for the CLI: 2 for configuration problems, 3 for
    /// numerical failures, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain { .. } | Error::Parse { .. } => 2,
            Error::Numerical(_) => 3,
            Error::Io(_) | Error::Csv(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
