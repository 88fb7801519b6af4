use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("no marks")]
    NoMarks,

    #[error("expected exactly {expected} marks, got {got}")]
    PanelSize { expected: usize, got: usize },

    #[error("tolerance must be positive, got {0}")]
    NonPositiveTolerance(f64),

    #[error("no control score for performance `{0}`")]
    MissingControlScore(String),

    #[error("no sigma model for scope `{0}`")]
    MissingModel(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("fitted gamma {gamma} sits on the search bracket boundary")]
    GammaAtBoundary { gamma: f64 },

    #[error("judge has no evaluations")]
    NoEvaluations,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid ranking: {0}")]
    InvalidRanking(String),

    #[error("invalid ranking parameters: {0}")]
    InvalidParams(String),

    #[error("unknown parameter set `{0}`")]
    UnknownParameterSet(String),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("{0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        let line = e.position().map(|p| p.line()).unwrap_or(0);
        Error::Parse { line, message: e.to_string() }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
