use thiserror::Error;

/// Coarse error class. The CLI maps each class to a distinct exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    DegenerateRun,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected dim={expected}, got dim={got}")]
    Dimension { expected: usize, got: usize },

    #[error("non-finite coordinate at position {position}")]
    NonFinite { position: usize },

    #[error("point has no coordinates")]
    EmptyPoint,

    #[error("constraint violated: gamma + 4(1 + 4(beta + gamma)) = {lhs} exceeds gamma * beta = {rhs}")]
    Constraint { lhs: f64, rhs: f64 },

    #[error("{name} out of range: {reason}")]
    Range { name: &'static str, reason: String },

    #[error("stream length n is required for chunked input")]
    MissingStreamLength,

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: u64,
        column: usize,
        message: String,
    },

    #[error("encoding error at row {row}, column {column}: cell {cell:?} is not a single character")]
    Encoding { row: u64, column: usize, cell: String },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("corrupt report: {0}")]
    Report(String),

    #[error("need at least {needed} points, got {available}")]
    InsufficientData { needed: usize, available: usize },

    #[error("closest pair among the first {points} points has zero distance; lower bound would be 0")]
    DegenerateLowerBound { points: usize },

    #[error("phase {phase} read no new points")]
    Progress { phase: u32 },
}

impl Error {
    pub(crate) fn range(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Range {
            name,
            reason: reason.into(),
        }
    }

    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "DimensionError",
            Error::NonFinite { .. } => "NonFiniteError",
            Error::EmptyPoint => "EmptyPointError",
            Error::Constraint { .. } => "ConstraintError",
            Error::Range { .. } => "RangeError",
            Error::MissingStreamLength => "MissingStreamLengthError",
            Error::Parse { .. } => "ParseError",
            Error::Encoding { .. } => "EncodingError",
            Error::Shape(_) => "ShapeError",
            Error::Io(_) => "IoError",
            Error::Report(_) => "ReportError",
            Error::InsufficientData { .. } => "InsufficientDataError",
            Error::DegenerateLowerBound { .. } => "DegenerateLowerBoundError",
            Error::Progress { .. } => "ProgressError",
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Constraint { .. } | Error::Range { .. } | Error::MissingStreamLength => {
                ErrorClass::Config
            }
            Error::DegenerateLowerBound { .. } | Error::Progress { .. } => ErrorClass::DegenerateRun,
            _ => ErrorClass::Data,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
