//! Time-varying spectrum estimation with dyadic aggregated autoregressive
//! (DASAR) models.
//!
//! A signal is split into `2^i` segments at each level `i = 0..=L`. Every
//! segment is summarised by a handful of second-order autoregressive
//! stochastic oscillators (SAR components), found greedily inside a
//! spectrum region of interest (SROI). The levels are blended with a
//! frequency-dependent weight function to give a spectrum that can be
//! evaluated at any time and frequency.
//!
//! The crate also ships the STFT spectrogram and Morlet scalogram used as
//! baselines, synthetic signal generators, bootstrap condition contrasts and
//! plain-text I/O for all of the above.
//!
//! Frequencies are normalized (cycles per sample, `0..=0.5`) everywhere
//! internally; Hz only appears at I/O boundaries and in [`TfrMatrix`] axes.

// `!(x > 0.0)` is used on purpose so NaN fails validation; indexed loops
// over parallel columns read better than zipped iterators.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod baseline;
pub mod dasar;
mod error;
pub mod estimator;
pub mod io;
pub mod sar;
pub mod types;

pub use analysis::{
    bootstrap_contrast, decorrelation_length, standardize_tfr, task_locked_session, Condition,
    ConditionMask, ContrastResult, Decorrelation, Schedule, SessionConfig,
};
pub use baseline::{
    generate_chirp, morlet_kernel, morlet_scalogram, stft_spectrogram, MorletConfig, StftConfig,
    WindowKind,
};
pub use dasar::{
    component_tracks, dyadic_segments, evaluate_spectrum, fit_dasar, level_weight, render_tfr,
    ComponentTrack, DasarModel, WeightScheme,
};
pub use error::{Error, Result};
pub use estimator::{estimate_asar, EstimatorConfig};
pub use io::ChannelSelector;
pub use sar::{
    ar4_coeffs, asar_spectrum, sar_coeffs, sar_peak_frequency, sar_spectrum, simulate_asar,
    simulate_sar, ArCoefficients,
};
pub use types::{
    validate_signal, AsarFit, IterationTrace, NormalizedFrequency, SarComponent, Signal,
    SpectrumGrid, Sroi, TfrMatrix, TfrMethod,
};
