//! Second-order autoregressive (SAR) oscillators and their aggregates.
//!
//! A SAR process `x(t) = φ1 x(t-1) + φ2 x(t-2) + ε(t)` is parametrised here
//! by a central frequency `ω*` and a randomness `τ`:
//!
//! ```text
//! a  = 1 / (1 + exp(-τ))
//! φ1 = 2 a cos(2π ω*)
//! φ2 = -a²
//! ```
//!
//! so the poles sit at radius `a` and angle `±2π ω*`. For finite `τ` the
//! spectral maximum is close to, but not exactly at, `ω*`; use
//! [`sar_peak_frequency`] for the exact location.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::types::{NormalizedFrequency, SarComponent, Signal, SpectrumGrid};

/// Tolerance for clamping the arccos argument in [`sar_peak_frequency`].
const ARCCOS_SLACK: f64 = 1e-9;

/// Upper bound on simulator burn-in, reached only for near-unit-root poles.
const MAX_BURN_IN: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
pub struct ArCoefficients {
    phi: Vec<f64>,
}

impl ArCoefficients {
    pub fn new(phi: Vec<f64>) -> Result<Self> {
        if phi.len() != 2 && phi.len() != 4 {
            return Err(Error::InvalidConfig(format!(
                "AR order must be 2 or 4, got {}",
                phi.len()
            )));
        }
        if phi.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidConfig("non-finite AR coefficient".into()));
        }
        Ok(Self { phi })
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn order(&self) -> usize {
        self.phi.len()
    }

    /// `φ1² + 4φ2` for order-2 models; negative means complex poles.
    pub fn discriminant(&self) -> Option<f64> {
        match self.phi.as_slice() {
            [p1, p2] => Some(p1 * p1 + 4.0 * p2),
            _ => None,
        }
    }

    /// `|1 - Σ φ_l e^{-2πi l ω}|²`.
    pub fn transfer_denominator(&self, omega: f64) -> f64 {
        let (mut re, mut im) = (1.0, 0.0);
        for (l, p) in self.phi.iter().enumerate() {
            let theta = 2.0 * PI * (l + 1) as f64 * omega;
            re -= p * theta.cos();
            im += p * theta.sin();
        }
        re * re + im * im
    }
}

fn logistic(tau: f64) -> f64 {
    1.0 / (1.0 + (-tau).exp())
}

/// AR(2) coefficients for central frequency `omega_star` and randomness `tau`.
pub fn sar_coeffs(omega_star: f64, tau: f64) -> Result<ArCoefficients> {
    NormalizedFrequency::new(omega_star)?;
    let a = logistic(tau);
    let phi1 = 2.0 * a * (2.0 * PI * omega_star).cos();
    let phi2 = -a * a;
    if !(phi1 * phi1 + 4.0 * phi2 < 0.0) {
        return Err(Error::DegenerateFrequency(omega_star));
    }
    Ok(ArCoefficients {
        phi: vec![phi1, phi2],
    })
}

/// Location of the single spectral maximum of an AR(2) model with complex poles.
pub fn sar_peak_frequency(coeffs: &ArCoefficients) -> Result<f64> {
    let [phi1, phi2] = coeffs.phi() else {
        return Err(Error::InvalidConfig(
            "peak formula needs an AR(2) model".into(),
        ));
    };
    let (phi1, phi2) = (*phi1, *phi2);
    if phi2 == 0.0 {
        return Err(Error::NoSpectralPeak(f64::NAN));
    }
    let arg = phi1 * (phi2 - 1.0) / (4.0 * phi2);
    if !(phi1 * phi1 + 4.0 * phi2 < 0.0) || arg.abs() > 1.0 + ARCCOS_SLACK || !arg.is_finite() {
        return Err(Error::NoSpectralPeak(arg));
    }
    Ok(arg.clamp(-1.0, 1.0).acos() / (2.0 * PI))
}

/// Closed-form SAR spectrum `σ² / |1 - φ1 e^{-2πiω} - φ2 e^{-4πiω}|²`.
pub fn sar_spectrum(component: &SarComponent, freqs: &[f64]) -> Result<SpectrumGrid> {
    let shape = SarShape::new(component.omega_star, component.tau)?;
    let power = freqs
        .iter()
        .map(|&w| component.sigma2 * shape.unit_value(w))
        .collect();
    SpectrumGrid::new(freqs.to_vec(), power)
}

/// Sum of the component spectra on `freqs`.
pub fn asar_spectrum(components: &[SarComponent], freqs: &[f64]) -> Result<SpectrumGrid> {
    let mut power = vec![0.0; freqs.len()];
    for c in components {
        let shape = SarShape::new(c.omega_star, c.tau)?;
        for (p, &w) in power.iter_mut().zip(freqs) {
            *p += c.sigma2 * shape.unit_value(w);
        }
    }
    SpectrumGrid::new(freqs.to_vec(), power)
}

/// Spectrum of a set of components at a single frequency.
pub(crate) fn asar_value(components: &[SarComponent], omega: f64) -> f64 {
    components
        .iter()
        .filter_map(|c| {
            SarShape::new(c.omega_star, c.tau)
                .ok()
                .map(|s| c.sigma2 * s.unit_value(omega))
        })
        .sum()
}

/// Unit-variance SAR spectrum for fixed coefficients.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SarShape {
    phi1: f64,
    phi2: f64,
}

impl SarShape {
    pub(crate) fn new(omega_star: f64, tau: f64) -> Result<Self> {
        let c = sar_coeffs(omega_star, tau)?;
        Ok(Self {
            phi1: c.phi[0],
            phi2: c.phi[1],
        })
    }

    pub(crate) fn unit_value(&self, omega: f64) -> f64 {
        let t = 2.0 * PI * omega;
        self.unit_value_trig(t.cos(), t.sin(), (2.0 * t).cos(), (2.0 * t).sin())
    }

    /// Same as `unit_value`, from precomputed `cos θ, sin θ, cos 2θ, sin 2θ`.
    #[inline]
    pub(crate) fn unit_value_trig(&self, c1: f64, s1: f64, c2: f64, s2: f64) -> f64 {
        let re = 1.0 - self.phi1 * c1 - self.phi2 * c2;
        let im = self.phi1 * s1 + self.phi2 * s2;
        1.0 / (re * re + im * im)
    }
}

/// AR(4) single-resonator coefficients with `ρ = 1 - exp(-τ)`.
///
/// The cosine takes `omega_star` directly (no `2π` factor), unlike the AR(2)
/// parametrisation, and `omega_star` is therefore not range-checked. This
/// variant is provided for reference and is not used by the estimator.
pub fn ar4_coeffs(omega_star: f64, tau: f64) -> Result<ArCoefficients> {
    let rho = 1.0 - (-tau).exp();
    if !(rho > 0.0) {
        return Err(Error::NonPositiveRho(tau));
    }
    let c = omega_star.cos();
    let phi = vec![
        4.0 / rho * c,
        2.0 / (rho * rho) * (1.0 - 2.0 * c * c - 2.0),
        4.0 / (rho * rho) * c,
        -1.0 / rho.powi(4),
    ];
    ArCoefficients::new(phi)
}

/// Number of discarded start-up samples for pole radius `radius`.
fn burn_in(radius: f64) -> usize {
    let gap = 1.0 - radius.abs();
    if gap <= 0.0 {
        return MAX_BURN_IN;
    }
    let settle = (1.0 / gap).ceil();
    if settle >= (MAX_BURN_IN / 10) as f64 {
        MAX_BURN_IN
    } else {
        10 * (settle as usize).max(1)
    }
}

/// Draws `n` samples of a SAR process with Gaussian innovations at unit
/// sample rate. Deterministic in `seed`.
pub fn simulate_sar(component: &SarComponent, n: usize, seed: u64) -> Result<Signal> {
    if n < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 samples, got {n}"
        )));
    }
    let coeffs = sar_coeffs(component.omega_star, component.tau)?;
    let (phi1, phi2) = (coeffs.phi[0], coeffs.phi[1]);
    let burn = burn_in((-phi2).sqrt());
    let noise = Normal::new(0.0, component.sigma2.sqrt())
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let (mut x1, mut x2) = (0.0, 0.0);
    let mut out = Vec::with_capacity(n);
    for i in 0..burn + n {
        let x = phi1 * x1 + phi2 * x2 + noise.sample(&mut rng);
        x2 = x1;
        x1 = x;
        if i >= burn {
            out.push(x);
        }
    }
    Signal::new(out, 1.0)
}

/// Seed used for component `index` by [`simulate_asar`] (splitmix64 mix).
pub fn component_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sum of independent [`simulate_sar`] draws, component `k` seeded with
/// [`component_seed`]`(seed, k)`.
pub fn simulate_asar(components: &[SarComponent], n: usize, seed: u64) -> Result<Signal> {
    if n < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 samples, got {n}"
        )));
    }
    let mut acc = vec![0.0; n];
    for (k, c) in components.iter().enumerate() {
        let part = simulate_sar(c, n, component_seed(seed, k))?;
        for (a, x) in acc.iter_mut().zip(part.samples()) {
            *a += x;
        }
    }
    Signal::new(acc, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(n: usize) -> Vec<f64> {
        (0..=n).map(|i| 0.5 * i as f64 / n as f64).collect()
    }

    fn argmax(v: &[f64]) -> usize {
        v.iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &x)| {
                if x > best.1 {
                    (i, x)
                } else {
                    best
                }
            })
            .0
    }

    #[test]
    fn coeffs_quarter_frequency() {
        let c = sar_coeffs(0.25, 50.0).unwrap();
        assert!(c.phi()[0].abs() < 1e-12);
        assert!((c.phi()[1] + 1.0).abs() < 1e-12);

        let c = sar_coeffs(0.25, 0.0).unwrap();
        assert!(c.phi()[0].abs() < 1e-15);
        assert_eq!(c.phi()[1], -0.25);
    }

    #[test]
    fn coeffs_have_complex_roots() {
        let c = sar_coeffs(0.1, 2.0).unwrap();
        assert!(c.discriminant().unwrap() < 0.0);
    }

    #[test]
    fn coeffs_degenerate_at_band_edges() {
        assert!(matches!(
            sar_coeffs(0.0, 3.0),
            Err(Error::DegenerateFrequency(_))
        ));
        assert!(matches!(
            sar_coeffs(0.5, 3.0),
            Err(Error::DegenerateFrequency(_))
        ));
    }

    #[test]
    fn peak_frequency_examples() {
        let c = ArCoefficients::new(vec![0.0, -1.0]).unwrap();
        assert!((sar_peak_frequency(&c).unwrap() - 0.25).abs() < 1e-15);

        let c = ArCoefficients::new(vec![1.0, -0.5]).unwrap();
        let peak = sar_peak_frequency(&c).unwrap();
        assert!((peak - 0.75f64.acos() / (2.0 * PI)).abs() < 1e-15);
        assert!((peak - 0.11502).abs() < 1e-5);
        // dense-grid argmax of the closed form
        let n = 200_000;
        let g = grid(n);
        let vals: Vec<f64> = g.iter().map(|&w| 1.0 / c.transfer_denominator(w)).collect();
        assert!((g[argmax(&vals)] - peak).abs() <= 0.5 / n as f64);

        let c = ArCoefficients::new(vec![1.9, -0.5]).unwrap();
        assert!(matches!(
            sar_peak_frequency(&c),
            Err(Error::NoSpectralPeak(_))
        ));
    }

    #[test]
    fn spectrum_direct_values() {
        // phi = (0, -1) is the limit tau -> inf at omega* = 1/4
        let c = SarComponent::new(0.25, 50.0, 1.0).unwrap();
        let s = sar_spectrum(&c, &[0.0]).unwrap();
        assert!((s.power()[0] - 0.25).abs() < 1e-12);

        let zero = SarComponent::new(0.1, 3.0, 0.0).unwrap();
        assert!(sar_spectrum(&zero, &grid(50))
            .unwrap()
            .power()
            .iter()
            .all(|&p| p == 0.0));
    }

    #[test]
    fn spectrum_argmax_matches_peak_formula() {
        let c = SarComponent::new(0.1, 3.0, 1.0).unwrap();
        let g = grid(10_000);
        let s = sar_spectrum(&c, &g).unwrap();
        let peak = sar_peak_frequency(&sar_coeffs(0.1, 3.0).unwrap()).unwrap();
        let step = g[1] - g[0];
        assert!((g[argmax(s.power())] - peak).abs() <= step);
    }

    #[test]
    fn ar4_examples() {
        // cos(omega*) = 0 and rho = 1/2
        let tau = -(0.5f64).ln();
        let c = ar4_coeffs(PI / 2.0, tau).unwrap();
        let expected = [0.0, -8.0, 0.0, -16.0];
        for (got, want) in c.phi().iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        let c = ar4_coeffs(0.1, 1.0).unwrap();
        assert_eq!(c.order(), 4);
        assert!(c.phi().iter().all(|p| p.is_finite()));
        assert!(matches!(
            ar4_coeffs(0.1, 0.0),
            Err(Error::NonPositiveRho(_))
        ));
        assert!(matches!(
            ar4_coeffs(0.1, -1.0),
            Err(Error::NonPositiveRho(_))
        ));
    }

    #[test]
    fn asar_empty_and_singleton() {
        let g = grid(100);
        assert!(asar_spectrum(&[], &g)
            .unwrap()
            .power()
            .iter()
            .all(|&p| p == 0.0));
        let c = SarComponent::new(0.2, 2.0, 1.5).unwrap();
        assert_eq!(
            asar_spectrum(&[c], &g).unwrap(),
            sar_spectrum(&c, &g).unwrap()
        );
    }

    #[test]
    fn asar_two_separated_peaks() {
        let n = 20_000;
        let g = grid(n);
        let comps = [
            SarComponent::new(0.08, 5.0, 1.0).unwrap(),
            SarComponent::new(0.3, 5.0, 1.0).unwrap(),
        ];
        let s = asar_spectrum(&comps, &g).unwrap();
        let p = s.power();
        let maxima: Vec<f64> = (1..p.len() - 1)
            .filter(|&i| p[i] > p[i - 1] && p[i] > p[i + 1])
            .map(|i| g[i])
            .collect();
        assert_eq!(maxima.len(), 2, "{maxima:?}");
        let step = g[1] - g[0];
        for (m, c) in maxima.iter().zip(&comps) {
            // the exact peak sits within a small offset of omega* at tau = 5
            let peak = sar_peak_frequency(&sar_coeffs(c.omega_star, c.tau).unwrap()).unwrap();
            assert!((m - peak).abs() <= step / 2.0 + 1e-12);
            assert!((m - c.omega_star).abs() < 2e-3);
        }
    }

    #[test]
    fn simulate_zero_variance_is_zero() {
        let c = SarComponent::new(0.1, 3.0, 0.0).unwrap();
        let s = simulate_sar(&c, 100, 1).unwrap();
        assert!(s.samples().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn simulate_is_deterministic() {
        let c = SarComponent::new(0.1, 3.0, 1.0).unwrap();
        assert_eq!(
            simulate_sar(&c, 500, 9).unwrap(),
            simulate_sar(&c, 500, 9).unwrap()
        );
        assert_ne!(
            simulate_sar(&c, 500, 9).unwrap(),
            simulate_sar(&c, 500, 10).unwrap()
        );
    }

    #[test]
    fn simulate_asar_composition() {
        let a = SarComponent::new(0.1, 3.0, 1.0).unwrap();
        let b = SarComponent::new(0.3, 3.0, 2.0).unwrap();
        let single = simulate_asar(&[a], 256, 4).unwrap();
        assert_eq!(single, simulate_sar(&a, 256, component_seed(4, 0)).unwrap());

        let muted = SarComponent { sigma2: 0.0, ..a };
        let pair = simulate_asar(&[muted, b], 256, 4).unwrap();
        assert_eq!(pair, simulate_sar(&b, 256, component_seed(4, 1)).unwrap());
    }

    #[test]
    fn burn_in_rule() {
        assert_eq!(burn_in(0.0), 10);
        assert_eq!(burn_in(0.5), 20);
        assert_eq!(burn_in(0.99), 1000);
        assert_eq!(burn_in(1.0), MAX_BURN_IN);
    }

    proptest! {
        #[test]
        fn reparametrization_is_oscillatory(w in 1e-3f64..0.499, tau in -10.0f64..50.0) {
            let c = sar_coeffs(w, tau).unwrap();
            prop_assert!(c.discriminant().unwrap() < 0.0);
        }

        #[test]
        fn spectrum_positive(w in 1e-3f64..0.499, tau in -5.0f64..12.0, s2 in 1e-6f64..10.0) {
            let c = SarComponent::new(w, tau, s2).unwrap();
            let s = sar_spectrum(&c, &grid(256)).unwrap();
            prop_assert!(s.power().iter().all(|&p| p > 0.0));
        }

        #[test]
        fn aggregation_is_linear(
            a in (0.01f64..0.49, -2.0f64..8.0, 0.0f64..3.0),
            b in (0.01f64..0.49, -2.0f64..8.0, 0.0f64..3.0),
        ) {
            let ca = SarComponent::new(a.0, a.1, a.2).unwrap();
            let cb = SarComponent::new(b.0, b.1, b.2).unwrap();
            let g = grid(128);
            let both = asar_spectrum(&[ca, cb], &g).unwrap();
            let sa = asar_spectrum(&[ca], &g).unwrap();
            let sb = asar_spectrum(&[cb], &g).unwrap();
            for i in 0..g.len() {
                let sum = sa.power()[i] + sb.power()[i];
                prop_assert!((both.power()[i] - sum).abs() <= 1e-12 * sum.max(1.0));
            }
        }
    }

    #[test]
    fn peak_converges_to_central_frequency_at_large_tau() {
        let n = 10_000;
        let g = grid(n);
        let step = g[1] - g[0];
        for &w in &[0.05, 0.13, 0.27, 0.41] {
            let c = SarComponent::new(w, 12.0, 1.0).unwrap();
            let s = sar_spectrum(&c, &g).unwrap();
            assert!((g[argmax(s.power())] - w).abs() <= step);
        }
        // small tau: the grid argmax follows the exact peak formula, not omega*
        for &(w, tau) in &[(0.1, 0.5), (0.2, 1.0), (0.35, 1.5)] {
            let c = SarComponent::new(w, tau, 1.0).unwrap();
            let s = sar_spectrum(&c, &g).unwrap();
            let peak = sar_peak_frequency(&sar_coeffs(w, tau).unwrap()).unwrap();
            assert!((g[argmax(s.power())] - peak).abs() <= step);
        }
    }
}
