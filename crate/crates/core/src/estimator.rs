//! Greedy ASAR(K) estimation on a single stationary segment.
//!
//! Starting from a smoothed periodogram, each iteration picks the strongest
//! frequency left in the spectrum region of interest (SROI), fits a SAR
//! component to a Gaussian-windowed neighbourhood of that frequency, removes
//! the fitted spectrum from the residual (positive part) and cuts a band of
//! width `Δf` out of the SROI. Iteration stops when the residual energy drops
//! below `ε*`, the SROI is exhausted, or `K` components have been found.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::sar::SarShape;
use crate::types::{AsarFit, IterationTrace, SarComponent, Signal, SpectrumGrid, Sroi};

/// Search bracket for the randomness parameter.
pub const TAU_BRACKET: (f64, f64) = (-5.0, 12.0);
const TAU_SCAN_POINTS: usize = 64;
const TAU_TOLERANCE: f64 = 1e-4;
/// Components weaker than this fraction of the peak input power are dropped.
const NEGLIGIBLE_WEIGHT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    /// Minimum separation between oscillators (normalized frequency).
    pub delta_f: f64,
    pub max_components: usize,
    /// Stop once the residual spectrum sums below this value.
    pub epsilon_star: f64,
    pub sroi0: Sroi,
    /// Zero-padding multiple applied on top of the next power of two.
    pub pad_factor: usize,
    /// Median filter width in bins (odd).
    pub median_width: usize,
}

impl EstimatorConfig {
    pub fn new(delta_f: f64, max_components: usize) -> Self {
        Self {
            delta_f,
            max_components,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_f > 0.0 && self.delta_f <= 0.5) {
            return Err(Error::InvalidConfig(format!(
                "delta_f must be in (0, 0.5], got {}",
                self.delta_f
            )));
        }
        if self.max_components == 0 {
            return Err(Error::InvalidConfig("max_components must be >= 1".into()));
        }
        if !(self.epsilon_star >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon_star must be >= 0, got {}",
                self.epsilon_star
            )));
        }
        if self.pad_factor == 0 {
            return Err(Error::InvalidConfig("pad_factor must be >= 1".into()));
        }
        if self.median_width.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "median_width must be odd, got {}",
                self.median_width
            )));
        }
        Ok(())
    }
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            delta_f: 0.01,
            max_components: 5,
            epsilon_star: 0.0,
            sroi0: Sroi::full(),
            pad_factor: 4,
            median_width: 5,
        }
    }
}

/// Median-filtered periodogram of the zero-padded, mean-removed signal.
///
/// Power is `|X(k)|² / (n fs)` on the one-sided grid `k / nfft`,
/// `nfft = pad_factor * next_pow2(n)`.
pub fn smoothed_fft_spectrum(
    signal: &Signal,
    pad_factor: usize,
    median_width: usize,
) -> Result<SpectrumGrid> {
    if pad_factor == 0 {
        return Err(Error::InvalidConfig("pad_factor must be >= 1".into()));
    }
    if median_width.is_multiple_of(2) {
        return Err(Error::InvalidConfig("median_width must be odd".into()));
    }
    let x = signal.samples();
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let nfft = pad_factor * n.next_power_of_two();

    let mut buf: Vec<Complex<f64>> = x
        .iter()
        .map(|&v| Complex::new(v - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(nfft)
        .collect();
    FftPlanner::new().plan_fft_forward(nfft).process(&mut buf);

    let scale = 1.0 / (n as f64 * signal.sample_rate_hz());
    let half = nfft / 2;
    let raw: Vec<f64> = buf[..=half].iter().map(|c| c.norm_sqr() * scale).collect();
    let freqs = (0..=half).map(|k| k as f64 / nfft as f64).collect();
    Ok(SpectrumGrid::from_parts(
        freqs,
        median_filter(&raw, median_width),
    ))
}

/// Centered running median with edge replication.
pub(crate) fn median_filter(x: &[f64], width: usize) -> Vec<f64> {
    if width <= 1 || x.is_empty() {
        return x.to_vec();
    }
    let h = width / 2;
    let last = x.len() - 1;
    let mut window = vec![0.0; width];
    (0..x.len())
        .map(|i| {
            for (j, w) in window.iter_mut().enumerate() {
                let idx = (i + j).saturating_sub(h).min(last);
                *w = x[idx];
            }
            window.sort_unstable_by(f64::total_cmp);
            window[h]
        })
        .collect()
}

/// Grid index of the largest power inside `sroi`; ties go to the lower frequency.
fn dominant_index(spectrum: &SpectrumGrid, sroi: &Sroi) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, (&w, &p)) in spectrum.freqs().iter().zip(spectrum.power()).enumerate() {
        if !sroi.contains(w) {
            continue;
        }
        if best.is_none_or(|(_, bp)| p > bp) {
            best = Some((i, p));
        }
    }
    best.map(|(i, _)| i).ok_or(Error::EmptySroi)
}

/// Frequency of maximal power within `sroi`.
pub fn dominant_frequency(spectrum: &SpectrumGrid, sroi: &Sroi) -> Result<f64> {
    dominant_index(spectrum, sroi).map(|i| spectrum.freqs()[i])
}

/// Gaussian neighbourhood `exp(-((ω-ω*)/Δf)²)` normalized to sum to one on `freqs`.
pub fn gaussian_window(freqs: &[f64], omega_star: f64, delta_f: f64) -> Vec<f64> {
    let mut w: Vec<f64> = freqs
        .iter()
        .map(|&f| (-((f - omega_star) / delta_f).powi(2)).exp())
        .collect();
    let total: f64 = w.iter().sum();
    if total > 0.0 {
        w.iter_mut().for_each(|v| *v /= total);
    }
    w
}

/// Precomputed trigonometric tables for evaluating SAR shapes on a grid.
struct TrigGrid {
    c1: Vec<f64>,
    s1: Vec<f64>,
    c2: Vec<f64>,
    s2: Vec<f64>,
}

impl TrigGrid {
    fn new(freqs: &[f64]) -> Self {
        let n = freqs.len();
        let mut t = TrigGrid {
            c1: Vec::with_capacity(n),
            s1: Vec::with_capacity(n),
            c2: Vec::with_capacity(n),
            s2: Vec::with_capacity(n),
        };
        for &f in freqs {
            let th = 2.0 * PI * f;
            t.c1.push(th.cos());
            t.s1.push(th.sin());
            t.c2.push((2.0 * th).cos());
            t.s2.push((2.0 * th).sin());
        }
        t
    }

    fn unit(&self, shape: &SarShape, i: usize) -> f64 {
        shape.unit_value_trig(self.c1[i], self.s1[i], self.c2[i], self.s2[i])
    }
}

/// Least-squares fit of `σ² u(τ)` to the windowed target at fixed `τ`.
/// Returns `(loss, σ²)`.
fn profile_loss(target: &[f64], trig: &TrigGrid, omega_star: f64, tau: f64) -> (f64, f64) {
    let Ok(shape) = SarShape::new(omega_star, tau) else {
        return (f64::INFINITY, 0.0);
    };
    let (mut gu, mut uu, mut gg) = (0.0, 0.0, 0.0);
    for (i, &g) in target.iter().enumerate() {
        let u = trig.unit(&shape, i);
        gu += g * u;
        uu += u * u;
        gg += g * g;
    }
    let sigma2 = (gu / uu).max(0.0);
    // Σ (g - σ² u)² expanded
    let loss = (gg - 2.0 * sigma2 * gu + sigma2 * sigma2 * uu).max(0.0);
    (loss, sigma2)
}

/// Golden-section minimisation of `f` on `[lo, hi]`.
pub(crate) fn golden_section<F: FnMut(f64) -> f64>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        x1
    } else {
        x2
    }
}

/// Fits `(τ, σ²)` at fixed `omega_star` by minimising
/// `Σ_ω (S(ω) B(ω; ω*) - σ² u(ω; ω*, τ))²`, where `B` is the normalized
/// [`gaussian_window`] and `u` the unit-variance SAR spectrum.
///
/// The SAR side is not windowed, so `σ²` is measured against the windowed
/// target and carries the window's normalization.
pub fn fit_local_sar(
    spectrum: &SpectrumGrid,
    omega_star: f64,
    delta_f: f64,
) -> Result<SarComponent> {
    if !(delta_f > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "delta_f must be positive, got {delta_f}"
        )));
    }
    let freqs = spectrum.freqs();
    match (freqs.first(), freqs.last()) {
        (Some(&lo), Some(&hi)) if omega_star >= lo && omega_star <= hi => {}
        _ => return Err(Error::FrequencyOutOfRange(omega_star)),
    }
    let window = gaussian_window(freqs, omega_star, delta_f);
    let target: Vec<f64> = spectrum
        .power()
        .iter()
        .zip(&window)
        .map(|(s, b)| s * b)
        .collect();
    if target.iter().all(|&g| g == 0.0) {
        return Err(Error::ZeroTarget);
    }
    let trig = TrigGrid::new(freqs);
    let loss = |tau: f64| profile_loss(&target, &trig, omega_star, tau).0;

    // coarse scan to pick the basin, then refine inside the neighbouring cells
    let (lo, hi) = TAU_BRACKET;
    let step = (hi - lo) / (TAU_SCAN_POINTS - 1) as f64;
    let best = (0..TAU_SCAN_POINTS)
        .map(|i| (i, loss(lo + step * i as f64)))
        .fold(
            (0, f64::INFINITY),
            |b, (i, l)| if l < b.1 { (i, l) } else { b },
        )
        .0;
    let left = lo + step * best.saturating_sub(1) as f64;
    let right = lo + step * (best + 1).min(TAU_SCAN_POINTS - 1) as f64;
    let tau = golden_section(loss, left, right, TAU_TOLERANCE);

    let (_, sigma2) = profile_loss(&target, &trig, omega_star, tau);
    SarComponent::new(omega_star, tau, sigma2)
}

/// Positive part of `spectrum - S_sar(component)`.
pub fn residual_update(spectrum: &SpectrumGrid, component: &SarComponent) -> Result<SpectrumGrid> {
    if component.sigma2 == 0.0 {
        return Ok(spectrum.clone());
    }
    let shape = SarShape::new(component.omega_star, component.tau)?;
    let power = spectrum
        .freqs()
        .iter()
        .zip(spectrum.power())
        .map(|(&w, &s)| (s - component.sigma2 * shape.unit_value(w)).max(0.0))
        .collect();
    Ok(SpectrumGrid::from_parts(spectrum.freqs().to_vec(), power))
}

/// Removes `[ω* - Δf/2, ω* + Δf/2]` from the region.
pub fn sroi_update(sroi: &Sroi, omega_star: f64, delta_f: f64) -> Sroi {
    let h = delta_f / 2.0;
    sroi.remove((omega_star - h).max(0.0), (omega_star + h).min(0.5))
}

/// Greedy ASAR(K) fit of one segment.
pub fn estimate_asar(signal: &Signal, config: &EstimatorConfig) -> Result<AsarFit> {
    config.validate()?;
    if signal.len() < 8 {
        return Err(Error::InvalidConfig(format!(
            "segment has {} samples; at least 8 are needed",
            signal.len()
        )));
    }
    let grid = smoothed_fft_spectrum(signal, config.pad_factor, config.median_width)?;
    let floor = NEGLIGIBLE_WEIGHT * grid.power().iter().cloned().fold(0.0, f64::max);

    let mut residual = grid.clone();
    let mut sroi = config.sroi0.clone();
    let mut components = Vec::new();
    let mut trace = vec![IterationTrace {
        residual_energy: residual.total_power(),
        sroi_measure: sroi.measure(),
    }];

    while components.len() < config.max_components && residual.total_power() >= config.epsilon_star
    {
        let idx = match dominant_index(&residual, &sroi) {
            Ok(i) => i,
            Err(Error::EmptySroi) => break,
            Err(e) => return Err(e),
        };
        let omega_star = residual.freqs()[idx];
        let fitted = match fit_local_sar(&residual, omega_star, config.delta_f) {
            Ok(c) => Some(c),
            Err(Error::ZeroTarget) => None,
            // band-edge picks have real AR(2) roots; nothing to fit there
            Err(Error::DegenerateFrequency(_)) => None,
            Err(e) => return Err(e),
        };
        sroi = sroi_update(&sroi, omega_star, config.delta_f);
        if let Some(c) = fitted.filter(|c| c.sigma2 > floor) {
            residual = residual_update(&residual, &c)?;
            components.push(c);
        }
        trace.push(IterationTrace {
            residual_energy: residual.total_power(),
            sroi_measure: sroi.measure(),
        });
    }

    Ok(AsarFit {
        components,
        residual_energy: residual.total_power(),
        grid,
        sroi_final: sroi,
        trace,
    })
}
