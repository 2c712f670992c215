use thiserror::Error;

/// Errors raised by the averaging toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("trials have unequal lengths ({expected} vs {found} at trial {trial})")]
    RaggedTrials {
        trial: usize,
        expected: usize,
        found: usize,
    },
    #[error("non-finite sample in trial {trial} at index {index}")]
    NonFinite { trial: usize, index: usize },
    #[error("bad sampling rate {0} Hz")]
    BadRate(f64),
    #[error("bad epoch: {0}")]
    BadEpoch(String),
    #[error("unsupported unit {0:?}, only \"microvolt\" is accepted")]
    BadUnits(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("path index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("invalid path: {0}")]
    BadPath(String),
    #[error("bad filter band: {0}")]
    BadBand(String),
    #[error("bad resampling factor {up}/{down}")]
    BadFactor { up: usize, down: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("bad fold count k={k} for {count} trials")]
    BadK { k: usize, count: usize },
    #[error("component window {lo_s}..{hi_s} s contains no post-stimulus samples")]
    EmptyWindow { lo_s: f64, hi_s: f64 },
    #[error("bad spec: {0}")]
    BadSpec(String),
    #[error("class {0:?} has no training samples")]
    DegenerateClass(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable identifier, used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::RaggedTrials { .. } => "RaggedTrials",
            Error::NonFinite { .. } => "NonFinite",
            Error::BadRate(_) => "BadRate",
            Error::BadEpoch(_) => "BadEpoch",
            Error::BadUnits(_) => "BadUnits",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::IndexOutOfRange(_) => "IndexOutOfRange",
            Error::BadPath(_) => "BadPath",
            Error::BadBand(_) => "BadBand",
            Error::BadFactor { .. } => "BadFactor",
            Error::Empty(_) => "Empty",
            Error::BadK { .. } => "BadK",
            Error::EmptyWindow { .. } => "EmptyWindow",
            Error::BadSpec(_) => "BadSpec",
            Error::DegenerateClass(_) => "DegenerateClass",
            Error::Parse(_) => "Parse",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
