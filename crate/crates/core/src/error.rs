use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-reconstructing window/hop pair: {0}")]
    NonReconstructing(String),

    #[error("zero-energy source (index {0})")]
    ZeroEnergySource(usize),

    #[error("position outside room: {0}")]
    OutsideRoom(String),

    #[error("empty attention: mask weights sum to zero")]
    EmptyAttention,

    #[error("empty frame range {start}..{end} (of {frames} frames)")]
    EmptyRange {
        start: usize,
        end: usize,
        frames: usize,
    },

    #[error("all-zero spatial power spectrum")]
    ZeroSpectrum,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("sample rate mismatch: expected {expected} Hz, file has {found} Hz")]
    SampleRate { expected: u32, found: u32 },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("wav: {0}")]
    Wav(#[from] hound::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short stable identifier, used for CLI error prefixes and FFI status mapping.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InsufficientSamples { .. } => "insufficient-samples",
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::ShapeMismatch(_) => "shape-mismatch",
            Error::NonReconstructing(_) => "non-reconstructing",
            Error::ZeroEnergySource(_) => "zero-energy-source",
            Error::OutsideRoom(_) => "outside-room",
            Error::EmptyAttention => "empty-attention",
            Error::EmptyRange { .. } => "empty-range",
            Error::ZeroSpectrum => "zero-spectrum",
            Error::EmptyInput(_) => "empty-input",
            Error::SampleRate { .. } => "sample-rate",
            Error::Config(_) => "config",
            Error::File { .. } | Error::Io(_) => "io",
            Error::Wav(_) => "wav",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }
}
