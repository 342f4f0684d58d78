use alloc::string::String;

/// Errors produced by the core processing chain.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("malformed WAV header: {0}")]
    MalformedHeader(&'static str),
    #[error("truncated WAV data: expected {expected} bytes, found {found}")]
    TruncatedData { expected: usize, found: usize },
    #[error("unsupported WAV encoding (format tag {0:#06x}); only integer PCM is accepted")]
    UnsupportedEncoding(u16),
    #[error("unsupported bit depth {0}")]
    UnsupportedBitDepth(u16),
    #[error("WAV data chunk is empty")]
    EmptyData,

    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("FFT size {0} is not a positive power of two")]
    NotPowerOfTwo(usize),

    #[error("non-finite gradient encountered")]
    NonFiniteGradient,
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("forward cache missing; run forward in train mode first")]
    MissingCache,

    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("class {0:?} has fewer than two entries")]
    ClassTooSmall(String),
    #[error("duplicate path {0:?}")]
    DuplicatePath(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
