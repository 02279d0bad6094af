//! Reference time-frequency representations and the synthetic chirp.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::types::{Signal, TfrMatrix, TfrMethod};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WindowKind {
    Hann,
    /// Gaussian taper with standard deviation in samples.
    Gaussian {
        sigma_samples: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StftConfig {
    pub window_len: usize,
    pub hop: usize,
    pub window: WindowKind,
}

impl StftConfig {
    /// Hann, one-second window, 75% overlap.
    pub fn for_rate(sample_rate_hz: f64) -> Self {
        let window_len = (sample_rate_hz.round() as usize).max(4);
        Self {
            window_len,
            hop: (window_len / 4).max(1),
            window: WindowKind::Hann,
        }
    }

    /// Window samples scaled to unit L2 norm.
    pub fn window_samples(&self) -> Vec<f64> {
        let n = self.window_len;
        let mut w: Vec<f64> = match self.window {
            // periodic Hann
            WindowKind::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
            WindowKind::Gaussian { sigma_samples } => {
                let c = (n as f64 - 1.0) / 2.0;
                (0..n)
                    .map(|i| (-0.5 * ((i as f64 - c) / sigma_samples).powi(2)).exp())
                    .collect()
            }
        };
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            w.iter_mut().for_each(|v| *v /= norm);
        }
        w
    }
}

/// `|V_g(τ, f)|²` on frames `[k hop, k hop + window_len)`.
///
/// Frames lie fully inside the record and are stamped at their centre.
/// Power is `|X_k|² / fs` with an L2-normalized window, so unit-variance
/// white noise averages `1 / fs` per bin.
pub fn stft_spectrogram(signal: &Signal, config: &StftConfig) -> Result<TfrMatrix> {
    let n = signal.len();
    let w_len = config.window_len;
    if w_len == 0 || config.hop == 0 || config.hop > w_len {
        return Err(Error::InvalidConfig(format!(
            "need 0 < hop <= window_len, got hop {} window {}",
            config.hop, w_len
        )));
    }
    if w_len > n {
        return Err(Error::WindowTooLong {
            window: w_len,
            n_samples: n,
        });
    }
    if let WindowKind::Gaussian { sigma_samples } = config.window {
        if !(sigma_samples > 0.0) {
            return Err(Error::InvalidConfig(
                "Gaussian window width must be positive".into(),
            ));
        }
    }
    let fs = signal.sample_rate_hz();
    let window = config.window_samples();
    let fft = FftPlanner::new().plan_fft_forward(w_len);
    let n_frames = (n - w_len) / config.hop + 1;
    let n_bins = w_len / 2 + 1;
    let x = signal.samples();

    let mut power = Vec::with_capacity(n_frames * n_bins);
    let mut times = Vec::with_capacity(n_frames);
    let mut buf = vec![Complex::new(0.0, 0.0); w_len];
    for k in 0..n_frames {
        let start = k * config.hop;
        for (i, b) in buf.iter_mut().enumerate() {
            *b = Complex::new(x[start + i] * window[i], 0.0);
        }
        fft.process(&mut buf);
        power.extend(buf[..n_bins].iter().map(|c| c.norm_sqr() / fs));
        times.push(signal.start_time_s() + (start as f64 + w_len as f64 / 2.0) / fs);
    }
    let freqs = (0..n_bins).map(|b| b as f64 * fs / w_len as f64).collect();
    TfrMatrix::new(times, freqs, power, TfrMethod::Stft)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MorletConfig {
    /// Carrier parameter trading time for frequency resolution.
    pub sigma: f64,
    /// Scales in samples, strictly increasing.
    pub scales: Vec<f64>,
    /// Output every `hop`-th sample.
    pub hop: usize,
}

impl MorletConfig {
    /// Scales whose pseudo-frequencies are `n` log-spaced values from
    /// `f_lo_hz` to `f_hi_hz`.
    pub fn for_band(sigma: f64, f_lo_hz: f64, f_hi_hz: f64, n: usize, sample_rate_hz: f64) -> Self {
        let mut scales: Vec<f64> = (0..n)
            .map(|i| {
                let frac = if n > 1 {
                    i as f64 / (n - 1) as f64
                } else {
                    0.0
                };
                let f = f_lo_hz * (f_hi_hz / f_lo_hz).powf(frac);
                scale_for_frequency(sigma, f, sample_rate_hz)
            })
            .collect();
        scales.sort_by(f64::total_cmp);
        scales.dedup();
        Self {
            sigma,
            scales,
            hop: 1,
        }
    }
}

/// `σ fs / (2π scale)`.
pub fn pseudo_frequency(sigma: f64, scale: f64, sample_rate_hz: f64) -> f64 {
    sigma / (2.0 * PI * scale) * sample_rate_hz
}

pub fn scale_for_frequency(sigma: f64, f_hz: f64, sample_rate_hz: f64) -> f64 {
    sigma * sample_rate_hz / (2.0 * PI * f_hz)
}

/// `1 / sqrt(1 + e^{-σ²} - 2 e^{-3σ²/4})`.
pub fn morlet_normalization(sigma: f64) -> f64 {
    1.0 / (1.0 + (-sigma * sigma).exp() - 2.0 * (-0.75 * sigma * sigma).exp()).sqrt()
}

/// Half-width in samples of the kernel support at `scale` (five standard deviations).
pub fn morlet_half_support(scale: f64) -> usize {
    (5.0 * scale).ceil() as usize
}

/// Complex Morlet kernel `c₀ π^{-1/4} e^{-u²/2} (e^{iσu} - e^{-σ²/2})` with
/// `u = t / scale`, sampled at integer `t` in `[-5 scale, 5 scale]` and
/// scaled by `1 / sqrt(scale)`.
pub fn morlet_kernel(sigma: f64, scale: f64) -> Result<Vec<Complex<f64>>> {
    if !(sigma > 0.0) || !(scale > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "sigma and scale must be positive (sigma {sigma}, scale {scale})"
        )));
    }
    let c0 = morlet_normalization(sigma);
    let amp = c0 * PI.powf(-0.25) / scale.sqrt();
    let offset = (-0.5 * sigma * sigma).exp();
    let h = morlet_half_support(scale) as i64;
    Ok((-h..=h)
        .map(|t| {
            let u = t as f64 / scale;
            let env = amp * (-0.5 * u * u).exp();
            let carrier = Complex::from_polar(1.0, sigma * u) - offset;
            carrier * env
        })
        .collect())
}

/// Squared modulus of the signal correlated with each scaled kernel.
///
/// Columns are ordered by increasing pseudo-frequency. Edges are
/// zero-extended.
pub fn morlet_scalogram(signal: &Signal, config: &MorletConfig) -> Result<TfrMatrix> {
    if !(config.sigma > 0.0) {
        return Err(Error::InvalidConfig("Morlet sigma must be positive".into()));
    }
    if config.scales.is_empty() || config.scales.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig(
            "scales must be non-empty and strictly increasing".into(),
        ));
    }
    if config.hop == 0 {
        return Err(Error::InvalidConfig("hop must be >= 1".into()));
    }
    let n = signal.len();
    let fs = signal.sample_rate_hz();
    let largest = *config.scales.last().unwrap();
    let support = 2 * morlet_half_support(largest) + 1;
    if support > n {
        return Err(Error::ScaleTooLarge {
            scale: largest,
            support,
            n_samples: n,
        });
    }

    let nfft = (n + support).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(nfft);
    let inv = planner.plan_fft_inverse(nfft);
    let mut sig_spec: Vec<Complex<f64>> = signal
        .samples()
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(nfft)
        .collect();
    fwd.process(&mut sig_spec);

    let out_idx: Vec<usize> = (0..n).step_by(config.hop).collect();
    // one row per scale, largest scale (lowest frequency) first
    let mut by_scale: Vec<Vec<f64>> = Vec::with_capacity(config.scales.len());
    for &scale in config.scales.iter().rev() {
        let kernel = morlet_kernel(config.sigma, scale)?;
        let h = morlet_half_support(scale);
        // W(t) = Σ_k x(t + k) conj(ψ(k)): correlate by convolving with the
        // time-reversed conjugate kernel
        let mut ker = vec![Complex::new(0.0, 0.0); nfft];
        for (j, v) in kernel.iter().enumerate() {
            ker[(2 * h - j) % nfft] = v.conj();
        }
        fwd.process(&mut ker);
        for (k, s) in ker.iter_mut().zip(&sig_spec) {
            *k *= s;
        }
        inv.process(&mut ker);
        let norm = 1.0 / nfft as f64;
        by_scale.push(
            out_idx
                .iter()
                .map(|&t| (ker[t + h] * norm).norm_sqr())
                .collect(),
        );
    }

    let n_scales = by_scale.len();
    let mut power = Vec::with_capacity(out_idx.len() * n_scales);
    for ti in 0..out_idx.len() {
        power.extend(by_scale.iter().map(|row| row[ti]));
    }
    let freqs = config
        .scales
        .iter()
        .rev()
        .map(|&s| pseudo_frequency(config.sigma, s, fs))
        .collect();
    let times = out_idx
        .iter()
        .map(|&t| signal.start_time_s() + t as f64 / fs)
        .collect();
    TfrMatrix::new(times, freqs, power, TfrMethod::Wavelet)
}

/// `5 sin(8πt) + 5 sin(8πt(1 + 0.01t)) + noise_scale ε(t)`, `ε` standard normal.
pub fn chirp_with_noise(
    duration_s: f64,
    rate_hz: f64,
    noise_scale: f64,
    seed: u64,
) -> Result<Signal> {
    if !(duration_s > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "duration must be positive, got {duration_s}"
        )));
    }
    if !(rate_hz > 0.0) {
        return Err(Error::NonPositiveRate(rate_hz));
    }
    let n = (duration_s * rate_hz).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n)
        .map(|k| {
            let t = k as f64 / rate_hz;
            let eps: f64 = StandardNormal.sample(&mut rng);
            5.0 * (8.0 * PI * t).sin()
                + 5.0 * (8.0 * PI * t * (1.0 + 0.01 * t)).sin()
                + noise_scale * eps
        })
        .collect();
    Signal::new(samples, rate_hz)
}

/// The synthetic chirp with half-unit Gaussian noise.
pub fn generate_chirp(duration_s: f64, rate_hz: f64, seed: u64) -> Result<Signal> {
    chirp_with_noise(duration_s, rate_hz, 0.5, seed)
}

/// Instantaneous frequencies (Hz) of the two chirp components at time `t_s`:
/// the fixed tone and the linear sweep.
pub fn chirp_instantaneous_frequencies(t_s: f64) -> (f64, f64) {
    (4.0, 4.0 + 0.08 * t_s)
}
