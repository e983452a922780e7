use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure category, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix must have at least one row and one column")]
    EmptyMatrix,

    #[error("non-finite matrix entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("mode index {index} out of range for a {modes}-mode network")]
    ModeOutOfRange { index: usize, modes: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("nonphysical network: {0}")]
    Nonphysical(String),

    #[error("matrix is rank deficient: singular value {value:e} is below tolerance {tolerance:e}")]
    RankDeficient { value: f64, tolerance: f64 },

    #[error(
        "degenerate gauge reference: element ({row}, {col}) has modulus {modulus:e}; \
         relabel modes so the reference input and output couple to every mode"
    )]
    DegenerateReference {
        row: usize,
        col: usize,
        modulus: f64,
    },

    #[error("sinusoid fit is degenerate: {0}")]
    DegenerateFit(String),

    #[error(
        "reference channel shows no fringe for input pair (0, {input_mode}) \
         (amplitude {amplitude:e}); relabel modes so the reference output couples to both inputs"
    )]
    FlatReference { input_mode: usize, amplitude: f64 },

    #[error("configuration {index}: {source}")]
    Configuration {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::RankDeficient { .. }
            | Error::DegenerateReference { .. }
            | Error::DegenerateFit(_)
            | Error::FlatReference { .. } => ErrorKind::Numerical,
            Error::Io(_) => ErrorKind::Io,
            Error::Configuration { source, .. } => source.kind(),
            _ => ErrorKind::Validation,
        }
    }

    pub(crate) fn in_configuration(self, index: usize) -> Self {
        Error::Configuration {
            index,
            source: Box::new(self),
        }
    }
}
