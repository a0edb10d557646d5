use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by front-ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed WAV in `{chunk}` chunk: {reason}")]
    WavParse { chunk: String, reason: String },

    #[error("unsupported WAV format: {0}")]
    UnsupportedFormat(String),

    #[error("recording has no samples")]
    EmptySamples,

    #[error("manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },

    #[error("duplicate recording id `{0}`")]
    DuplicateId(String),

    #[error("recording `{id}`: cannot read {path}: {source}")]
    MissingFile {
        id: String,
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("recording `{id}`: sample rate {found} Hz differs from dataset rate {expected} Hz")]
    MixedSampleRates { id: String, expected: f64, found: f64 },

    #[error("recording `{id}` at ({x_cm}, {y_cm}) cm is off the {spacing_cm} cm lattice")]
    OffLattice {
        id: String,
        x_cm: f64,
        y_cm: f64,
        spacing_cm: f64,
    },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("no spectral bins left in band [{fmin_hz}, {fmax_hz}] Hz")]
    EmptyBand { fmin_hz: f64, fmax_hz: f64 },

    #[error("flat spectrum{}: recording carries no spectral mass", .id.as_deref().map(|i| format!(" in `{i}`")).unwrap_or_default())]
    FlatSpectrum { id: Option<String> },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("input contains non-finite values")]
    NonFinite,

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("labels contain a single cluster")]
    SingleCluster,

    #[error("points `{first}` and `{second}` fall into the same grid cell")]
    CellCollision { first: String, second: String },

    #[error("recording `{id}`: {source}")]
    InRecording {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{stage} stage: {source}")]
    InStage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Attaches the id of the recording being processed.
    pub fn in_recording(self, id: impl Into<String>) -> Self {
        Error::InRecording {
            id: id.into(),
            source: Box::new(self),
        }
    }

    /// Attaches the pipeline stage that failed.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::InStage {
            stage,
            source: Box::new(self),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InRecording { source, .. } | Error::InStage { source, .. } => source.class(),
            Error::InvalidArgument(_) => ErrorClass::Usage,
            Error::Numeric(_) | Error::NonFinite => ErrorClass::Numeric,
            _ => ErrorClass::Data,
        }
    }
}
