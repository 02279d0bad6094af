use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("signal has no samples")]
    EmptySignal,
    #[error("sample {0} is not finite")]
    NonFiniteSample(usize),
    #[error("sample rate must be positive, got {0}")]
    NonPositiveRate(f64),
    #[error("normalized frequency {0} outside [0, 0.5]")]
    FrequencyOutOfRange(f64),
    #[error("invalid spectrum grid: {0}")]
    InvalidGrid(String),
    #[error("invalid SROI: {0}")]
    InvalidSroi(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("central frequency {0} gives real AR(2) roots (no oscillation)")]
    DegenerateFrequency(f64),
    #[error("coefficients have no interior spectral peak (arccos argument {0})")]
    NoSpectralPeak(f64),
    #[error("AR(4) pole radius 1 - exp(-tau) must be positive (tau = {0})")]
    NonPositiveRho(f64),

    #[error("spectrum region of interest does not intersect the frequency grid")]
    EmptySroi,
    #[error("windowed target spectrum is identically zero")]
    ZeroTarget,

    #[error("cannot split {n_samples} samples into {segments} segments")]
    TooManySegments { n_samples: usize, segments: usize },
    #[error("{0} outside the model's domain")]
    OutOfRange(String),

    #[error("window of {window} samples exceeds signal length {n_samples}")]
    WindowTooLong { window: usize, n_samples: usize },
    #[error(
        "wavelet support of {support} samples at scale {scale} exceeds signal length {n_samples}"
    )]
    ScaleTooLarge {
        scale: f64,
        support: usize,
        n_samples: usize,
    },

    #[error("condition `{0}` has no frames")]
    MissingCondition(&'static str),
    #[error("neighborhood holds {0} samples; at least 4 are needed")]
    NeighborhoodTooShort(usize),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error(
        "timestamps are not uniformly sampled (step {step} at row {row}, expected {expected})"
    )]
    NonUniformSampling {
        row: usize,
        step: f64,
        expected: f64,
    },
    #[error("unknown channel `{0}`")]
    UnknownChannel(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
