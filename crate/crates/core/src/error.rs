use thiserror::Error;

/// Crate-wide error type. Variants map one-to-one onto the failure
/// categories surfaced by the CLI (`dimension`, `parameter`, `parse`,
/// `config`, `descriptor`, `io`).
#[derive(Error, Debug)]
pub enum Error {
    /// Shape mismatch, empty matrix, or an index outside a matrix/vector.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// A value outside its legal range (k = 0, epsilon < 0, cast > peers, ...).
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Malformed input data; `line` is 1-based within the offending file.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Inconsistent run configuration (duplicate doc ids across peers, ...).
    #[error("config error: {0}")]
    Config(String),

    /// A descriptor that failed validation at publish time.
    #[error("descriptor rejected: {0}")]
    Descriptor(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable one-word category used by the CLI for machine-parsable output.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::Parameter(_) => "parameter",
            Error::Parse { .. } => "parse",
            Error::Config(_) => "config",
            Error::Descriptor(_) => "descriptor",
            Error::Io(_) => "io",
        }
    }
}
