use std::path::PathBuf;

use crate::train::TrainHistory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}: {reason}")]
    Diverged {
        epoch: usize,
        reason: String,
        history: TrainHistory,
    },

    #[error("split `{split}` is empty or shorter than {min_len} samples")]
    EmptySplit { split: &'static str, min_len: usize },

    #[error(transparent)]
    ModelFile(#[from] ModelFileError),

    #[error(transparent)]
    Wav(#[from] WavError),

    #[error("malformed {what}: {detail}")]
    Parse { what: &'static str, detail: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True when the failure is numeric (divergence or a non-finite value)
    /// rather than bad input or I/O.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_) | Error::Diverged { .. } | Error::ModelFile(ModelFileError::NonFiniteWeight { .. })
        )
    }
}

/// Failures while decoding a serialized model.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelFileError {
    #[error("bad magic bytes (not an LSTMAMP1 model file)")]
    BadMagic,
    #[error("unsupported model format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("model file truncated: need {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("model file has {0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("model file header describes an invalid configuration: {0}")]
    InvalidHeader(String),
    #[error("non-finite weight at {path}")]
    NonFiniteWeight { path: String },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WavError {
    #[error("malformed WAV header: {0}")]
    MalformedHeader(String),
    #[error("unsupported WAV codec (format tag {format_tag:#06x}, {bits_per_sample} bits)")]
    UnsupportedCodec { format_tag: u16, bits_per_sample: u16 },
}
