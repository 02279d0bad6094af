//! Shared domain types.

use std::fmt;

use crate::error::{Error, Result};

/// A uniformly sampled, real-valued record.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    sample_rate_hz: f64,
    start_time_s: f64,
}

impl Signal {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        Self::with_start(samples, sample_rate_hz, 0.0)
    }

    pub fn with_start(samples: Vec<f64>, sample_rate_hz: f64, start_time_s: f64) -> Result<Self> {
        if !(sample_rate_hz > 0.0) || !sample_rate_hz.is_finite() {
            return Err(Error::NonPositiveRate(sample_rate_hz));
        }
        if samples.is_empty() {
            return Err(Error::EmptySignal);
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteSample(i));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
            start_time_s,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn start_time_s(&self) -> f64 {
        self.start_time_s
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// Sub-record over `range` (sample indices), keeping absolute time.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Signal> {
        let start = self.start_time_s + range.start as f64 / self.sample_rate_hz;
        Signal::with_start(self.samples[range].to_vec(), self.sample_rate_hz, start)
    }

    pub fn normalized(&self, f_hz: f64) -> Result<NormalizedFrequency> {
        NormalizedFrequency::from_hz(f_hz, self.sample_rate_hz)
    }
}

/// Builds a [`Signal`] at time origin zero.
pub fn validate_signal(raw: &[f64], rate: f64) -> Result<Signal> {
    Signal::new(raw.to_vec(), rate)
}

/// Frequency in cycles per sample, restricted to the one-sided band `[0, 1/2]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct NormalizedFrequency(f64);

impl NormalizedFrequency {
    pub const NYQUIST: NormalizedFrequency = NormalizedFrequency(0.5);

    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=0.5).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::FrequencyOutOfRange(value))
        }
    }

    pub fn from_hz(f_hz: f64, sample_rate_hz: f64) -> Result<Self> {
        if !(sample_rate_hz > 0.0) {
            return Err(Error::NonPositiveRate(sample_rate_hz));
        }
        Self::new(f_hz / sample_rate_hz)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn to_hz(self, sample_rate_hz: f64) -> f64 {
        self.0 * sample_rate_hz
    }
}

impl fmt::Display for NormalizedFrequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// One-sided spectrum sampled on a strictly increasing normalized grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumGrid {
    freqs: Vec<f64>,
    power: Vec<f64>,
}

impl SpectrumGrid {
    pub fn new(freqs: Vec<f64>, power: Vec<f64>) -> Result<Self> {
        if freqs.len() != power.len() {
            return Err(Error::InvalidGrid(format!(
                "{} frequencies but {} power values",
                freqs.len(),
                power.len()
            )));
        }
        if let Some(&f) = freqs.iter().find(|f| !(0.0..=0.5).contains(*f)) {
            return Err(Error::FrequencyOutOfRange(f));
        }
        if freqs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(
                "frequencies not strictly increasing".into(),
            ));
        }
        if let Some(p) = power.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InvalidGrid(format!(
                "power value {p} is not finite and >= 0"
            )));
        }
        Ok(Self { freqs, power })
    }

    /// Internal constructor for grids whose invariants hold by construction.
    pub(crate) fn from_parts(freqs: Vec<f64>, power: Vec<f64>) -> Self {
        debug_assert_eq!(freqs.len(), power.len());
        Self { freqs, power }
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn power(&self) -> &[f64] {
        &self.power
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn total_power(&self) -> f64 {
        self.power.iter().sum()
    }

    pub fn with_power(&self, power: Vec<f64>) -> Result<Self> {
        Self::new(self.freqs.clone(), power)
    }
}

/// Spectrum region of interest: sorted, disjoint, closed intervals inside `[0, 1/2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sroi {
    intervals: Vec<(f64, f64)>,
}

impl Sroi {
    /// The whole one-sided band.
    pub fn full() -> Self {
        Self {
            intervals: vec![(0.0, 0.5)],
        }
    }

    pub fn empty() -> Self {
        Self { intervals: vec![] }
    }

    /// Merges overlapping input intervals. Every interval must satisfy
    /// `0 <= lo <= hi <= 0.5`.
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        for &(lo, hi) in &intervals {
            if !(0.0..=0.5).contains(&lo) || !(0.0..=0.5).contains(&hi) || lo > hi {
                return Err(Error::InvalidSroi(format!(
                    "[{lo}, {hi}] not inside [0, 0.5]"
                )));
            }
        }
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(intervals.len());
        for (lo, hi) in intervals {
            match merged.last_mut() {
                Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        Ok(Self { intervals: merged })
    }

    pub fn from_hz(lo_hz: f64, hi_hz: f64, sample_rate_hz: f64) -> Result<Self> {
        let lo = NormalizedFrequency::from_hz(lo_hz, sample_rate_hz)?;
        let hi = NormalizedFrequency::from_hz(hi_hz, sample_rate_hz)?;
        Self::new(vec![(lo.value(), hi.value())])
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|(lo, hi)| hi - lo).sum()
    }

    pub fn contains(&self, omega: f64) -> bool {
        self.intervals
            .iter()
            .any(|&(lo, hi)| lo <= omega && omega <= hi)
    }

    /// Upper edge of the region, if any.
    pub fn upper(&self) -> Option<f64> {
        self.intervals.last().map(|iv| iv.1)
    }

    /// Set difference with `[lo, hi]`. Pieces of zero length are dropped, so
    /// every remaining interval has positive measure.
    pub fn remove(&self, lo: f64, hi: f64) -> Sroi {
        let mut out = Vec::with_capacity(self.intervals.len() + 1);
        for &(a, b) in &self.intervals {
            if hi < a || lo > b {
                out.push((a, b));
                continue;
            }
            if a < lo {
                out.push((a, lo));
            }
            if hi < b {
                out.push((hi, b));
            }
        }
        Sroi { intervals: out }
    }
}

/// One stochastic oscillator: central frequency, randomness and weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SarComponent {
    /// Central frequency parameter, cycles per sample.
    pub omega_star: f64,
    /// Randomness; large values give a sharp oscillator.
    pub tau: f64,
    /// Innovation variance, used as the component weight.
    pub sigma2: f64,
}

impl SarComponent {
    pub fn new(omega_star: f64, tau: f64, sigma2: f64) -> Result<Self> {
        NormalizedFrequency::new(omega_star)?;
        if !tau.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "tau must be finite, got {tau}"
            )));
        }
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "sigma2 must be >= 0, got {sigma2}"
            )));
        }
        Ok(Self {
            omega_star,
            tau,
            sigma2,
        })
    }
}

/// Snapshot of the greedy estimator after one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationTrace {
    pub residual_energy: f64,
    pub sroi_measure: f64,
}

/// Result of fitting an ASAR(K) model on one stationary segment.
#[derive(Debug, Clone, PartialEq)]
pub struct AsarFit {
    /// Components in extraction order.
    pub components: Vec<SarComponent>,
    /// Sum of the positive residual spectrum after the last update.
    pub residual_energy: f64,
    /// The smoothed input spectrum.
    pub grid: SpectrumGrid,
    pub sroi_final: Sroi,
    /// Entry 0 is the state before the first iteration.
    pub trace: Vec<IterationTrace>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TfrMethod {
    Dasar,
    Stft,
    Wavelet,
}

impl TfrMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            TfrMethod::Dasar => "dasar",
            TfrMethod::Stft => "stft",
            TfrMethod::Wavelet => "wavelet",
        }
    }
}

impl std::str::FromStr for TfrMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dasar" => Ok(TfrMethod::Dasar),
            "stft" => Ok(TfrMethod::Stft),
            "wavelet" => Ok(TfrMethod::Wavelet),
            other => Err(Error::InvalidConfig(format!("unknown method `{other}`"))),
        }
    }
}

/// Time x frequency power matrix, row-major by time.
#[derive(Debug, Clone, PartialEq)]
pub struct TfrMatrix {
    times_s: Vec<f64>,
    freqs_hz: Vec<f64>,
    power: Vec<f64>,
    method: TfrMethod,
}

impl TfrMatrix {
    pub fn new(
        times_s: Vec<f64>,
        freqs_hz: Vec<f64>,
        power: Vec<f64>,
        method: TfrMethod,
    ) -> Result<Self> {
        if power.len() != times_s.len() * freqs_hz.len() {
            return Err(Error::InvalidGrid(format!(
                "{} values for a {}x{} matrix",
                power.len(),
                times_s.len(),
                freqs_hz.len()
            )));
        }
        if times_s.windows(2).any(|w| w[1] <= w[0]) || freqs_hz.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(
                "axes must be strictly increasing".into(),
            ));
        }
        if power.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidGrid("non-finite power value".into()));
        }
        Ok(Self {
            times_s,
            freqs_hz,
            power,
            method,
        })
    }

    pub fn times_s(&self) -> &[f64] {
        &self.times_s
    }

    pub fn freqs_hz(&self) -> &[f64] {
        &self.freqs_hz
    }

    pub fn method(&self) -> TfrMethod {
        self.method
    }

    pub fn n_times(&self) -> usize {
        self.times_s.len()
    }

    pub fn n_freqs(&self) -> usize {
        self.freqs_hz.len()
    }

    /// Flat row-major values.
    pub fn values(&self) -> &[f64] {
        &self.power
    }

    pub fn get(&self, time_idx: usize, freq_idx: usize) -> f64 {
        self.power[time_idx * self.freqs_hz.len() + freq_idx]
    }

    pub fn row(&self, time_idx: usize) -> &[f64] {
        let nf = self.freqs_hz.len();
        &self.power[time_idx * nf..(time_idx + 1) * nf]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.power.chunks(self.freqs_hz.len().max(1))
    }

    /// Same matrix with new values; dimensions must match.
    pub fn with_values(&self, power: Vec<f64>) -> Result<Self> {
        Self::new(
            self.times_s.clone(),
            self.freqs_hz.clone(),
            power,
            self.method,
        )
    }

    /// Restriction to frequencies in `[lo_hz, hi_hz]`.
    pub fn band(&self, lo_hz: f64, hi_hz: f64) -> TfrMatrix {
        let keep: Vec<usize> = (0..self.freqs_hz.len())
            .filter(|&j| self.freqs_hz[j] >= lo_hz && self.freqs_hz[j] <= hi_hz)
            .collect();
        let freqs = keep.iter().map(|&j| self.freqs_hz[j]).collect();
        let power = self
            .rows()
            .flat_map(|row| keep.iter().map(move |&j| row[j]))
            .collect();
        TfrMatrix {
            times_s: self.times_s.clone(),
            freqs_hz: freqs,
            power,
            method: self.method,
        }
    }
}
