//! Dyadic aggregation of per-segment ASAR fits.
//!
//! Level `i` splits the record into `2^i` contiguous segments and fits an
//! ASAR model on each. The time-varying spectrum is
//!
//! ```text
//! S(t, ω) = Σ_{i=0..L} ρ(i, ω) S⁽ⁱ⁾(t, ω)
//! ```
//!
//! where `S⁽ⁱ⁾(t, ·)` is the ASAR spectrum of the level-`i` segment holding
//! `t` and `ρ` is a non-negative weight summing to one over levels.

use std::ops::Range;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{estimate_asar, EstimatorConfig};
use crate::sar::asar_value;
use crate::types::{AsarFit, Signal, TfrMatrix, TfrMethod};

/// Level weighting `ρ(i, ω)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum WeightScheme {
    /// `1 / (L + 1)` at every level.
    #[default]
    Uniform,
    /// Each frequency is owned by exactly one level, octave by octave below
    /// `omega_max`: the shortest segments (level `L`) take the top octave
    /// `[ω_max/2, ω_max]`, level `L-1` the next one down, and so on. Level 0
    /// (the whole record) takes everything below `ω_max / 2^L`, and level `L`
    /// also owns frequencies above `ω_max`.
    DyadicBand { omega_max: f64 },
}

/// `ρ(level, ω)` for a model with levels `0..=max_level`.
pub fn level_weight(scheme: &WeightScheme, level: usize, omega: f64, max_level: usize) -> f64 {
    if level > max_level {
        return 0.0;
    }
    match *scheme {
        WeightScheme::Uniform => 1.0 / (max_level + 1) as f64,
        WeightScheme::DyadicBand { omega_max } => {
            if band_owner(omega, omega_max, max_level) == level {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Level owning `omega` under the dyadic band map.
fn band_owner(omega: f64, omega_max: f64, max_level: usize) -> usize {
    if omega >= omega_max / 2.0 || omega_max <= 0.0 {
        return max_level;
    }
    // octave index counted down from the top: 0 for [ω_max/2, ω_max), 1 below, ...
    let mut octave = 0;
    let mut edge = omega_max / 2.0;
    while omega < edge && octave < max_level {
        edge /= 2.0;
        octave += 1;
    }
    max_level - octave
}

/// `2^level` contiguous index ranges tiling `0..n_samples`, boundary `j` at
/// `⌊j n / 2^level⌋`.
pub fn dyadic_segments(n_samples: usize, level: usize) -> Result<Vec<Range<usize>>> {
    let count = 1usize
        .checked_shl(level as u32)
        .filter(|&c| c <= n_samples)
        .ok_or(Error::TooManySegments {
            n_samples,
            segments: 1usize.checked_shl(level as u32).unwrap_or(usize::MAX),
        })?;
    let bound = |j: usize| ((j as u128 * n_samples as u128) / count as u128) as usize;
    Ok((0..count).map(|j| bound(j)..bound(j + 1)).collect())
}

/// A fitted DASAR(L, K) model.
#[derive(Debug, Clone, PartialEq)]
pub struct DasarModel {
    /// `levels[i]` holds the `2^i` fits of level `i`, in time order.
    pub levels: Vec<Vec<AsarFit>>,
    pub segments: Vec<Vec<Range<usize>>>,
    pub signal_len: usize,
    pub sample_rate_hz: f64,
    pub start_time_s: f64,
    pub weight_scheme: WeightScheme,
    pub config: EstimatorConfig,
}

impl DasarModel {
    pub fn max_level(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn duration_s(&self) -> f64 {
        self.signal_len as f64 / self.sample_rate_hz
    }

    /// Index of the level-`level` segment containing relative time `t_s`,
    /// with `[start, end)` spans.
    pub fn segment_at(&self, level: usize, t_s: f64) -> Result<usize> {
        if !(t_s >= 0.0 && t_s < self.duration_s()) {
            return Err(Error::OutOfRange(format!("time {t_s} s")));
        }
        let segs = self
            .segments
            .get(level)
            .ok_or_else(|| Error::OutOfRange(format!("level {level}")))?;
        let rate = self.sample_rate_hz;
        let idx = segs.partition_point(|r| r.start as f64 / rate <= t_s);
        Ok(idx.saturating_sub(1))
    }

    /// `[start, end)` of a segment in relative seconds.
    pub fn segment_span_s(&self, level: usize, segment: usize) -> (f64, f64) {
        let r = &self.segments[level][segment];
        (
            r.start as f64 / self.sample_rate_hz,
            r.end as f64 / self.sample_rate_hz,
        )
    }

    /// Spectrum at relative time `t_s` and normalized frequency `omega`.
    pub fn evaluate_normalized(&self, t_s: f64, omega: f64) -> Result<f64> {
        if !(0.0..=0.5).contains(&omega) {
            return Err(Error::OutOfRange(format!("normalized frequency {omega}")));
        }
        let big_l = self.max_level();
        let mut total = 0.0;
        for level in 0..=big_l {
            let rho = level_weight(&self.weight_scheme, level, omega, big_l);
            if rho == 0.0 {
                continue;
            }
            let seg = self.segment_at(level, t_s)?;
            total += rho * asar_value(&self.levels[level][seg].components, omega);
        }
        Ok(total)
    }

    /// Per-segment ν diagnostic at `level`: mean absolute gap between the
    /// model spectrum and that segment's smoothed periodogram.
    pub fn approximation_error(&self, level: usize) -> Result<Vec<f64>> {
        let fits = self
            .levels
            .get(level)
            .ok_or_else(|| Error::OutOfRange(format!("level {level}")))?;
        fits.iter()
            .enumerate()
            .map(|(j, fit)| {
                let (t0, _) = self.segment_span_s(level, j);
                let mut acc = 0.0;
                for (&w, &p) in fit.grid.freqs().iter().zip(fit.grid.power()) {
                    acc += (self.evaluate_normalized(t0, w)? - p).abs();
                }
                Ok(acc / fit.grid.len().max(1) as f64)
            })
            .collect()
    }
}

/// Fits ASAR models on every segment of levels `0..=levels`.
///
/// Segments are fitted in parallel; results are assembled by `(level, segment)`.
pub fn fit_dasar(
    signal: &Signal,
    levels: usize,
    config: &EstimatorConfig,
    weights: WeightScheme,
) -> Result<DasarModel> {
    config.validate()?;
    let n = signal.len();
    let deepest = 1usize.checked_shl(levels as u32).unwrap_or(usize::MAX);
    if deepest.saturating_mul(8) > n {
        return Err(Error::TooManySegments {
            n_samples: n,
            segments: deepest,
        });
    }
    let segments: Vec<Vec<Range<usize>>> = (0..=levels)
        .map(|i| dyadic_segments(n, i))
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, Range<usize>)> = segments
        .iter()
        .enumerate()
        .flat_map(|(i, segs)| segs.iter().cloned().map(move |r| (i, r)))
        .collect();
    let fits: Vec<AsarFit> = jobs
        .into_par_iter()
        .map(|(_, r)| estimate_asar(&signal.slice(r)?, config))
        .collect::<Result<_>>()?;

    let mut it = fits.into_iter();
    let levels_out = segments
        .iter()
        .map(|segs| it.by_ref().take(segs.len()).collect())
        .collect();

    Ok(DasarModel {
        levels: levels_out,
        segments,
        signal_len: n,
        sample_rate_hz: signal.sample_rate_hz(),
        start_time_s: signal.start_time_s(),
        weight_scheme: weights,
        config: config.clone(),
    })
}

/// `S(t, f)` at relative time `t_s` (seconds since the record start) and `f_hz`.
pub fn evaluate_spectrum(model: &DasarModel, t_s: f64, f_hz: f64) -> Result<f64> {
    let nyquist = model.sample_rate_hz / 2.0;
    if !(0.0..=nyquist).contains(&f_hz) {
        return Err(Error::OutOfRange(format!("frequency {f_hz} Hz")));
    }
    model.evaluate_normalized(t_s, f_hz / model.sample_rate_hz)
}

/// Samples the model at relative times `0, step, 2 step, ...` below the
/// record length and at `freq_grid_hz`. Output times are absolute.
pub fn render_tfr(model: &DasarModel, time_step_s: f64, freq_grid_hz: &[f64]) -> Result<TfrMatrix> {
    if !(time_step_s > 0.0) {
        return Err(Error::OutOfRange(format!("time step {time_step_s} s")));
    }
    let duration = model.duration_s();
    let times: Vec<f64> = (0..)
        .map(|k| k as f64 * time_step_s)
        .take_while(|&t| t < duration)
        .collect();
    let mut power = Vec::with_capacity(times.len() * freq_grid_hz.len());
    for &t in &times {
        for &f in freq_grid_hz {
            power.push(evaluate_spectrum(model, t, f)?);
        }
    }
    TfrMatrix::new(
        times.iter().map(|t| t + model.start_time_s).collect(),
        freq_grid_hz.to_vec(),
        power,
        TfrMethod::Dasar,
    )
}

/// One fitted oscillator on one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentTrack {
    pub level: usize,
    pub segment_index: usize,
    /// `[start, end)` in absolute seconds.
    pub time_span_s: (f64, f64),
    pub omega_star_hz: f64,
    pub tau: f64,
    pub sigma2: f64,
}

/// Flattens the fits of `level`, sorted by time then by decreasing weight.
pub fn component_tracks(model: &DasarModel, level: usize) -> Result<Vec<ComponentTrack>> {
    let fits = model
        .levels
        .get(level)
        .ok_or_else(|| Error::OutOfRange(format!("level {level}")))?;
    let mut rows = Vec::new();
    for (j, fit) in fits.iter().enumerate() {
        let (t0, t1) = model.segment_span_s(level, j);
        let mut seg: Vec<ComponentTrack> = fit
            .components
            .iter()
            .map(|c| ComponentTrack {
                level,
                segment_index: j,
                time_span_s: (t0 + model.start_time_s, t1 + model.start_time_s),
                omega_star_hz: c.omega_star * model.sample_rate_hz,
                tau: c.tau,
                sigma2: c.sigma2,
            })
            .collect();
        seg.sort_by(|a, b| b.sigma2.total_cmp(&a.sigma2));
        rows.extend(seg);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sar::{asar_spectrum, simulate_sar};
    use crate::types::{SarComponent, Sroi};
    use proptest::prelude::*;

    #[test]
    fn segments_examples() {
        let s = dyadic_segments(1024, 3).unwrap();
        assert_eq!(s.len(), 8);
        assert!(s.iter().all(|r| r.len() == 128));
        assert_eq!(dyadic_segments(10, 0).unwrap(), vec![0..10]);
        let s = dyadic_segments(10, 2).unwrap();
        assert_eq!(s, vec![0..2, 2..5, 5..7, 7..10]);
        assert!(matches!(
            dyadic_segments(3, 2),
            Err(Error::TooManySegments { .. })
        ));
    }

    #[test]
    fn uniform_weights() {
        for i in 0..=4 {
            assert_eq!(level_weight(&WeightScheme::Uniform, i, 0.13, 4), 0.2);
        }
    }

    #[test]
    fn dyadic_band_owners() {
        let s = WeightScheme::DyadicBand { omega_max: 0.4 };
        // top octave goes to the shortest segments
        assert_eq!(level_weight(&s, 3, 0.39, 3), 1.0);
        assert_eq!(level_weight(&s, 0, 0.39, 3), 0.0);
        assert_eq!(level_weight(&s, 3, 0.2, 3), 1.0);
        assert_eq!(level_weight(&s, 2, 0.15, 3), 1.0);
        assert_eq!(level_weight(&s, 1, 0.07, 3), 1.0);
        // below ω_max / 2^L everything belongs to the whole-record level
        assert_eq!(level_weight(&s, 0, 0.049, 3), 1.0);
        assert_eq!(level_weight(&s, 0, 0.0, 3), 1.0);
        assert_eq!(level_weight(&s, 3, 0.5, 3), 1.0);
        assert_eq!(level_weight(&s, 0, 0.3, 0), 1.0);
    }

    proptest! {
        #[test]
        fn weights_sum_to_one(omega in 0.0f64..=0.5, big_l in 0usize..8, omax in 0.01f64..0.5) {
            for scheme in [WeightScheme::Uniform, WeightScheme::DyadicBand { omega_max: omax }] {
                let total: f64 = (0..=big_l).map(|i| level_weight(&scheme, i, omega, big_l)).sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
                prop_assert!((0..=big_l).all(|i| level_weight(&scheme, i, omega, big_l) >= 0.0));
            }
        }

        #[test]
        fn segments_tile(n in 1usize..5000, level in 0usize..10) {
            prop_assume!((1usize << level) <= n);
            let segs = dyadic_segments(n, level).unwrap();
            prop_assert_eq!(segs.len(), 1 << level);
            prop_assert_eq!(segs[0].start, 0);
            prop_assert_eq!(segs.last().unwrap().end, n);
            for w in segs.windows(2) {
                prop_assert_eq!(w[0].end, w[1].start);
            }
            let (lo, hi) = segs.iter().fold((usize::MAX, 0), |(a, b), r| (a.min(r.len()), b.max(r.len())));
            prop_assert!(hi - lo <= 1);
        }
    }

    fn stationary_model(levels: usize, weights: WeightScheme) -> DasarModel {
        let c = SarComponent::new(0.15, 4.0, 1.0).unwrap();
        let x = simulate_sar(&c, 1 << 13, 5).unwrap();
        let x = Signal::new(x.into_samples(), 100.0).unwrap();
        fit_dasar(&x, levels, &EstimatorConfig::new(0.02, 2), weights).unwrap()
    }

    #[test]
    fn stationary_signal_is_consistent_across_segments() {
        let m = stationary_model(2, WeightScheme::Uniform);
        let leads: Vec<f64> = m
            .levels
            .iter()
            .flatten()
            .map(|f| f.components[0].omega_star)
            .collect();
        assert_eq!(leads.len(), 7);
        for a in &leads {
            for b in &leads {
                assert!((a - b).abs() < 0.02, "{leads:?}");
            }
        }
        for level in &m.levels {
            let mean = level
                .iter()
                .map(|f| f.components[0].omega_star)
                .sum::<f64>()
                / level.len() as f64;
            let var = level
                .iter()
                .map(|f| (f.components[0].omega_star - mean).powi(2))
                .sum::<f64>()
                / level.len() as f64;
            assert!(var.sqrt() < 0.02);
        }
    }

    #[test]
    fn level_zero_model_is_single_fit() {
        let m = stationary_model(0, WeightScheme::Uniform);
        assert_eq!(m.levels.len(), 1);
        assert_eq!(m.levels[0].len(), 1);
        let fit = &m.levels[0][0];
        let f_hz = 13.0;
        let direct = asar_spectrum(&fit.components, &[f_hz / 100.0])
            .unwrap()
            .power()[0];
        let v = evaluate_spectrum(&m, 10.0, f_hz).unwrap();
        assert!((v - direct).abs() <= 1e-12 * direct.max(1e-300));

        let tracks = component_tracks(&m, 0).unwrap();
        assert_eq!(tracks.len(), fit.components.len());
        assert!(tracks
            .iter()
            .all(|t| t.time_span_s == (0.0, m.duration_s())));
    }

    #[test]
    fn evaluation_equal_levels_and_linearity() {
        let mut m = stationary_model(2, WeightScheme::Uniform);
        let shared = m.levels[0][0].clone();
        for level in m.levels.iter_mut() {
            for fit in level.iter_mut() {
                *fit = shared.clone();
            }
        }
        let single = asar_spectrum(&shared.components, &[0.15]).unwrap().power()[0];
        let v = evaluate_spectrum(&m, 30.0, 15.0).unwrap();
        assert!((v - single).abs() <= 1e-12 * single);

        // doubling every weight doubles the evaluated spectrum
        let mut doubled = m.clone();
        for fit in doubled.levels.iter_mut().flatten() {
            for c in fit.components.iter_mut() {
                c.sigma2 *= 2.0;
            }
        }
        let v2 = evaluate_spectrum(&doubled, 30.0, 15.0).unwrap();
        assert!((v2 - 2.0 * v).abs() <= 1e-12 * v2);
    }

    #[test]
    fn segment_boundary_belongs_to_the_right() {
        let m = stationary_model(2, WeightScheme::Uniform);
        let (start, _) = m.segment_span_s(2, 1);
        assert_eq!(m.segment_at(2, start).unwrap(), 1);
        assert_eq!(m.segment_at(2, start - 1e-9).unwrap(), 0);
        assert!(matches!(
            m.segment_at(2, m.duration_s()),
            Err(Error::OutOfRange(_))
        ));
        assert!(matches!(
            evaluate_spectrum(&m, -0.1, 1.0),
            Err(Error::OutOfRange(_))
        ));
        assert!(matches!(
            evaluate_spectrum(&m, 0.0, 60.0),
            Err(Error::OutOfRange(_))
        ));
    }

    #[test]
    fn render_single_cell_and_piecewise_constant() {
        let m = stationary_model(2, WeightScheme::DyadicBand { omega_max: 0.5 });
        let one = render_tfr(&m, 1000.0, &[15.0]).unwrap();
        assert_eq!((one.n_times(), one.n_freqs()), (1, 1));
        assert_eq!(one.get(0, 0), evaluate_spectrum(&m, 0.0, 15.0).unwrap());

        let fine = render_tfr(&m, 0.5, &[15.0]).unwrap();
        let (s0, e0) = m.segment_span_s(2, 0);
        let inside: Vec<f64> = fine
            .times_s()
            .iter()
            .zip(fine.values())
            .filter(|(t, _)| **t >= s0 && **t < e0)
            .map(|(_, v)| *v)
            .collect();
        assert!(inside.len() > 2);
        assert!(inside.iter().all(|v| *v == inside[0]));
    }

    #[test]
    fn zero_signal_has_no_tracks() {
        let x = Signal::new(vec![0.0; 512], 10.0).unwrap();
        let m = fit_dasar(&x, 2, &EstimatorConfig::new(0.02, 3), WeightScheme::Uniform).unwrap();
        for level in 0..=2 {
            assert!(component_tracks(&m, level).unwrap().is_empty());
        }
    }

    #[test]
    fn too_many_levels_rejected() {
        let x = Signal::new(vec![1.0; 64], 10.0).unwrap();
        let cfg = EstimatorConfig::new(0.02, 3);
        assert!(fit_dasar(&x, 3, &cfg, WeightScheme::Uniform).is_ok());
        assert!(matches!(
            fit_dasar(&x, 4, &cfg, WeightScheme::Uniform),
            Err(Error::TooManySegments { .. })
        ));
    }

    #[test]
    fn tracks_sorted_by_time_then_weight() {
        let mut m = stationary_model(2, WeightScheme::Uniform);
        m.config.sroi0 = Sroi::full();
        let tracks = component_tracks(&m, 2).unwrap();
        for w in tracks.windows(2) {
            assert!(w[0].time_span_s.0 <= w[1].time_span_s.0);
            if w[0].segment_index == w[1].segment_index {
                assert!(w[0].sigma2 >= w[1].sigma2);
            }
        }
        let spans: Vec<_> = (0..4).map(|j| m.segment_span_s(2, j)).collect();
        for w in spans.windows(2) {
            assert_eq!(w[0].1, w[1].0);
        }
        assert_eq!(spans[0].0, 0.0);
        assert_eq!(spans[3].1, m.duration_s());
    }
}
