use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library reports.
///
/// Variants are grouped so the CLI can map them onto distinct exit codes:
/// file problems, invalid arguments, and numerically degenerate inputs.
#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),

    #[error("malformed WAV header in {}: {reason}", path.display())]
    MalformedWav { path: PathBuf, reason: String },

    #[error("unsupported WAV codec in {}: {reason}", path.display())]
    UnsupportedCodec { path: PathBuf, reason: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{clipped} samples exceeded [-1, 1] and were clipped while writing pcm16")]
    SampleOverflow { clipped: usize },

    #[error("invalid audio buffer: {0}")]
    InvalidBuffer(String),

    #[error("invalid STFT configuration: {0}")]
    InvalidStft(String),

    #[error("signal of {len} samples is shorter than one {fft_size}-sample frame")]
    SignalTooShort { len: usize, fft_size: usize },

    #[error("only {frames} analysis frames remain, at least {required} are needed")]
    InsufficientFrames { frames: usize, required: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("sample rate mismatch: {0} Hz vs {1} Hz")]
    SampleRateMismatch(u32, u32),

    #[error("invalid filterbank: {0}")]
    InvalidFilterbank(String),

    #[error("mel band {band} is too narrow to contain an FFT bin")]
    BandTooNarrow { band: usize },

    #[error("sample rate {0} Hz is too low for the requested bands")]
    SampleRateTooLow(u32),

    #[error("degenerate decomposition: {0}")]
    DegenerateDecomposition(String),

    #[error("invalid weights input: {0}")]
    InvalidWeights(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("silent reference: {0}")]
    SilentReference(String),

    #[error("invalid alignment: {0}")]
    InvalidAlignment(String),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by the numbers themselves rather than by
    /// files or arguments.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::DegenerateDecomposition(_)
                | Error::SilentReference(_)
                | Error::InsufficientFrames { .. }
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::FileNotFound(_)
                | Error::MalformedWav { .. }
                | Error::UnsupportedCodec { .. }
                | Error::Io(_)
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}
