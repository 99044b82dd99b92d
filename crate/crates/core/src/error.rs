use std::fmt;

/// Errors raised by the pseudonymization and evaluation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("no voiced frames in contour{}", fmt_id(.0))]
    NoVoicedFrames(Option<String>),

    #[error("source log-F0 std is zero but target std is {target_std}; scale ratio undefined")]
    DegenerateSourceStats { target_std: f64 },

    #[error("cannot aggregate statistics over an empty speaker set")]
    EmptySpeakerSet,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("zero-norm vector cannot be normalized or compared")]
    ZeroVector,

    #[error("no pool speakers left after gender filtering")]
    EmptyAfterFilter,

    #[error("pool too small for speaker '{speaker}': need {needed}, have {available}")]
    PoolTooSmall {
        speaker: String,
        needed: usize,
        available: usize,
    },

    #[error("score population '{0}' is empty")]
    EmptyPopulation(&'static str),

    #[error("PLDA scorer selected but no PLDA model is attached to the pool")]
    MissingPldaModel,

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown id '{0}'")]
    UnknownId(String),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("{path}: {source}")]
    InFile {
        path: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn fmt_id(id: &Option<String>) -> String {
    id.as_ref().map(|s| format!(" '{s}'")).unwrap_or_default()
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    DimensionMismatch,
    InvalidValue,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParseErrorKind::Syntax => "syntax error",
            ParseErrorKind::DimensionMismatch => "dimension mismatch",
            ParseErrorKind::InvalidValue => "invalid value",
        })
    }
}

/// A parse failure pinned to the first offending line (1-based) and byte column (1-based).
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, column {column}: {kind}: {message}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(kind: ParseErrorKind, line: usize, column: usize, message: impl Into<String>) -> Self {
        Self {
            kind,
            line,
            column,
            message: message.into(),
        }
    }
}
