//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RetinaError {
    #[error("invalid fixed-point format: total_bits={total_bits}, frac_bits={frac_bits}")]
    InvalidFormat { total_bits: u32, frac_bits: u32 },

    #[error("exp table input must be non-negative, got {value}")]
    NegativeExpInput { value: f64 },

    #[error("geometry mismatch: expected {expected_width}x{expected_height}, got {width}x{height}")]
    GeometryMismatch {
        expected_width: usize,
        expected_height: usize,
        width: usize,
        height: usize,
    },

    #[error("frame {width}x{height} is smaller than the {kernel}x{kernel} kernel")]
    FrameTooSmall {
        width: usize,
        height: usize,
        kernel: usize,
    },

    #[error("kernel size must be 3 or 5, got {0}")]
    InvalidKernelSize(usize),

    #[error("gaussian kernel degenerates at this precision (sigma_px={sigma_px})")]
    DegenerateKernel { sigma_px: f64 },

    #[error("invalid stimulus: {0}")]
    InvalidStimulus(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported pixel depth: {0} bits")]
    UnsupportedDepth(u32),

    #[error("truncated stream: expected {expected} bytes, found {actual}")]
    TruncatedStream { expected: usize, actual: usize },

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("config: {0}")]
    Config(String),

    #[error("reference trace is constant; variance explained is undefined")]
    ConstantReference,

    #[error("trace has zero variance; cross-correlation is undefined")]
    ZeroVariance,

    #[error("trace lengths differ: {a} vs {b}")]
    TraceLengthMismatch { a: usize, b: usize },

    #[error("max_lag {max_lag} must be below half the trace length {len}")]
    LagOutOfRange { max_lag: usize, len: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
