//! Error type shared by the whole crate.

use core::fmt;

/// Errors reported by signal generation, fitting, denoising, and the AMP loop.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// A parameter is outside its documented range.
    InvalidParameter(&'static str),
    /// Vector lengths do not agree.
    ShapeMismatch { expected: usize, actual: usize },
    /// The input sequence is shorter than the operation requires.
    InputTooShort { len: usize, min: usize },
    /// The input contains NaN or infinite entries.
    NonFiniteInput(&'static str),
    /// SNR is undefined because the measurement noise variance is zero.
    InfiniteSnr,
    /// SDR is undefined because the reference signal has zero energy.
    ZeroSignalEnergy,
    /// A mixture density was evaluated exactly at a zero-variance component's
    /// mean; convolve with a positive-variance channel first.
    DeltaDensity,
    /// Every mixture component was annihilated during fitting.
    DegenerateFit,
    /// A numerical estimate came out non-finite.
    Numerical(&'static str),
    /// AMP produced non-finite values at the given iteration.
    Divergence { iteration: usize },
    /// Sliding-window half-width exceeds the enumeration limit.
    WindowTooWide { k: usize, max: usize },
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
            CoreError::ShapeMismatch { expected, actual } => {
                write!(f, "shape mismatch: expected length {expected}, got {actual}")
            }
            CoreError::InputTooShort { len, min } => {
                write!(f, "input too short: length {len}, need at least {min}")
            }
            CoreError::NonFiniteInput(what) => write!(f, "non-finite input: {what}"),
            CoreError::InfiniteSnr => write!(f, "SNR is infinite (zero noise variance)"),
            CoreError::ZeroSignalEnergy => write!(f, "SDR undefined for zero-energy signal"),
            CoreError::DeltaDensity => {
                write!(f, "density evaluated at a zero-variance component mean")
            }
            CoreError::DegenerateFit => write!(f, "all mixture components were removed"),
            CoreError::Numerical(what) => write!(f, "numerical failure: {what}"),
            CoreError::Divergence { iteration } => {
                write!(f, "AMP diverged at iteration {iteration}")
            }
            CoreError::WindowTooWide { k, max } => {
                write!(f, "window half-width {k} exceeds limit {max}")
            }
        }
    }
}

impl core::error::Error for CoreError {}

pub type Result<T> = core::result::Result<T, CoreError>;
