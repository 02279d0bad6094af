//! Condition contrasts on time-frequency matrices and the local-stationarity check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sar::{component_seed, simulate_asar, simulate_sar};
use crate::types::{NormalizedFrequency, SarComponent, Signal, TfrMatrix};

/// Subtracts the global mean and divides by the global standard deviation.
/// A constant matrix maps to zeros.
pub fn standardize_tfr(tfr: &TfrMatrix) -> Result<TfrMatrix> {
    let v = tfr.values();
    if v.is_empty() {
        return Err(Error::InvalidGrid(
            "cannot standardize an empty matrix".into(),
        ));
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    let out = if sd > 0.0 && sd.is_finite() {
        v.iter().map(|x| (x - mean) / sd).collect()
    } else {
        vec![0.0; v.len()]
    };
    tfr.with_values(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Condition {
    Task,
    Baseline,
    Ignore,
}

impl std::str::FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "task" => Ok(Condition::Task),
            "baseline" => Ok(Condition::Baseline),
            "ignore" => Ok(Condition::Ignore),
            other => Err(Error::InvalidConfig(format!(
                "unknown condition label `{other}`"
            ))),
        }
    }
}

/// Per-frame condition labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionMask {
    pub labels: Vec<Condition>,
}

impl ConditionMask {
    pub fn new(labels: Vec<Condition>) -> Self {
        Self { labels }
    }

    /// Labels frames by the `[start_s, end_s)` interval containing their time
    /// stamp; frames outside every interval are ignored.
    pub fn from_schedule(times_s: &[f64], schedule: &[(f64, f64, Condition)]) -> Self {
        let labels = times_s
            .iter()
            .map(|&t| {
                schedule
                    .iter()
                    .find(|(a, b, _)| t >= *a && t < *b)
                    .map_or(Condition::Ignore, |iv| iv.2)
            })
            .collect();
        Self { labels }
    }

    fn frames(&self, which: Condition) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, c)| **c == which)
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastResult {
    pub freqs_hz: Vec<f64>,
    pub mean_task: Vec<f64>,
    pub mean_baseline: Vec<f64>,
    /// Mean over replicates of the resampled difference.
    pub boot_mean_diff: Vec<f64>,
    /// Replicate standard deviation of the difference.
    pub boot_se_diff: Vec<f64>,
    pub diff_ci_low: Vec<f64>,
    pub diff_ci_high: Vec<f64>,
    pub n_boot: usize,
    pub seed: u64,
}

impl ContrastResult {
    pub fn mean_diff(&self) -> Vec<f64> {
        self.mean_task
            .iter()
            .zip(&self.mean_baseline)
            .map(|(a, b)| a - b)
            .collect()
    }
}

fn column_means(tfr: &TfrMatrix, frames: impl Iterator<Item = usize>) -> Vec<f64> {
    let mut acc = vec![0.0; tfr.n_freqs()];
    let mut count = 0usize;
    for i in frames {
        for (a, v) in acc.iter_mut().zip(tfr.row(i)) {
            *a += v;
        }
        count += 1;
    }
    acc.iter_mut().for_each(|a| *a /= count as f64);
    acc
}

/// Linear-interpolated quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Frame-level bootstrap of the task-minus-baseline mean spectrum with
/// 2.5% / 97.5% percentile intervals. Replicate `r` draws from its own
/// stream derived from `seed`, so results do not depend on scheduling.
pub fn bootstrap_contrast(
    tfr: &TfrMatrix,
    mask: &ConditionMask,
    n_boot: usize,
    seed: u64,
) -> Result<ContrastResult> {
    if mask.labels.len() != tfr.n_times() {
        return Err(Error::InvalidConfig(format!(
            "mask has {} labels for {} frames",
            mask.labels.len(),
            tfr.n_times()
        )));
    }
    if n_boot < 100 {
        return Err(Error::InvalidConfig(format!(
            "n_boot must be >= 100, got {n_boot}"
        )));
    }
    let task = mask.frames(Condition::Task);
    let base = mask.frames(Condition::Baseline);
    if task.is_empty() {
        return Err(Error::MissingCondition("task"));
    }
    if base.is_empty() {
        return Err(Error::MissingCondition("baseline"));
    }

    let mean_task = column_means(tfr, task.iter().copied());
    let mean_baseline = column_means(tfr, base.iter().copied());

    let replicates: Vec<Vec<f64>> = (0..n_boot)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(component_seed(seed, r));
            let t = column_means(
                tfr,
                (0..task.len()).map(|_| task[rng.random_range(0..task.len())]),
            );
            let b = column_means(
                tfr,
                (0..base.len()).map(|_| base[rng.random_range(0..base.len())]),
            );
            t.iter().zip(&b).map(|(x, y)| x - y).collect()
        })
        .collect();

    let nf = tfr.n_freqs();
    let mut lo = Vec::with_capacity(nf);
    let mut hi = Vec::with_capacity(nf);
    let mut mean = Vec::with_capacity(nf);
    let mut se = Vec::with_capacity(nf);
    let mut column = vec![0.0; n_boot];
    for j in 0..nf {
        for (c, rep) in column.iter_mut().zip(&replicates) {
            *c = rep[j];
        }
        let m = column.iter().sum::<f64>() / n_boot as f64;
        let v = column.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n_boot - 1) as f64;
        column.sort_unstable_by(f64::total_cmp);
        lo.push(quantile_sorted(&column, 0.025));
        hi.push(quantile_sorted(&column, 0.975));
        mean.push(m);
        se.push(v.sqrt());
    }

    Ok(ContrastResult {
        freqs_hz: tfr.freqs_hz().to_vec(),
        mean_task,
        mean_baseline,
        boot_mean_diff: mean,
        boot_se_diff: se,
        diff_ci_low: lo,
        diff_ci_high: hi,
        n_boot,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decorrelation {
    /// Smallest lag beyond which every tested autocovariance stays within
    /// `ε C(0)`, in seconds.
    pub length_s: f64,
    pub lag_samples: usize,
    pub neighborhood_samples: usize,
    /// `d < l / 2`.
    pub locally_stationary: bool,
}

/// Decorrelation length of `signal` in the neighbourhood of length
/// `neighborhood_s` centred at `t_star_s` (absolute time).
///
/// Uses the biased (divide-by-N) autocovariance of the demeaned window and
/// tests lags up to half the window. If the covariance never settles below
/// `ε C(0)`, the length is one past the largest tested lag.
pub fn decorrelation_length(
    signal: &Signal,
    t_star_s: f64,
    neighborhood_s: f64,
    epsilon: f64,
) -> Result<Decorrelation> {
    let fs = signal.sample_rate_hz();
    let rel = t_star_s - signal.start_time_s();
    let a = ((rel - neighborhood_s / 2.0) * fs).round();
    let b = ((rel + neighborhood_s / 2.0) * fs).round();
    if !(a >= 0.0 && b <= signal.len() as f64 && a <= b) {
        return Err(Error::OutOfRange(format!(
            "neighborhood of {neighborhood_s} s around {t_star_s} s"
        )));
    }
    let x = &signal.samples()[a as usize..b as usize];
    let m = x.len();
    if m < 4 {
        return Err(Error::NeighborhoodTooShort(m));
    }
    let mean = x.iter().sum::<f64>() / m as f64;
    let y: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let acov = |k: usize| {
        y[..m - k]
            .iter()
            .zip(&y[k..])
            .map(|(p, q)| p * q)
            .sum::<f64>()
            / m as f64
    };

    let c0 = acov(0);
    let max_lag = m / 2;
    let threshold = epsilon * c0;
    let lag = (0..=max_lag)
        .rev()
        .find(|&k| acov(k).abs() > threshold)
        .map_or(0, |k| k + 1);
    Ok(Decorrelation {
        length_s: lag as f64 / fs,
        lag_samples: lag,
        neighborhood_samples: m,
        locally_stationary: 2 * lag < m,
    })
}

/// Parameters of a synthetic block-design recording.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    /// Centre frequency of the oscillator present only during task blocks.
    pub task_hz: f64,
    /// Length of each task or baseline block; blocks alternate starting with baseline.
    pub block_s: f64,
    /// Variance of the task oscillator relative to each background component.
    pub task_gain: f64,
}

impl SessionConfig {
    pub fn new(duration_s: f64, sample_rate_hz: f64) -> Self {
        SessionConfig {
            duration_s,
            sample_rate_hz,
            task_hz: 6.0,
            block_s: 7.0,
            task_gain: 1.0,
        }
    }
}

/// `(start_s, end_s, label)` blocks of a recording session.
pub type Schedule = Vec<(f64, f64, Condition)>;

/// Background of a broad low-frequency and a narrow alpha-like oscillator,
/// plus an oscillator at `task_hz` gated on during task blocks. Returns the
/// signal and its `(start_s, end_s, label)` schedule.
pub fn task_locked_session(config: &SessionConfig, seed: u64) -> Result<(Signal, Schedule)> {
    let fs = config.sample_rate_hz;
    if !(fs > 0.0) {
        return Err(Error::NonPositiveRate(fs));
    }
    if !(config.block_s > 0.0 && config.duration_s >= config.block_s) {
        return Err(Error::InvalidConfig(format!(
            "block {} s must be positive and fit in {} s",
            config.block_s, config.duration_s
        )));
    }
    let n = (config.duration_s * fs).round() as usize;
    let norm = |hz: f64| NormalizedFrequency::from_hz(hz, fs).map(|f| f.value());
    let background = [
        SarComponent::new(norm(1.5)?, 0.5, 1.0)?,
        SarComponent::new(norm(10.0)?, 3.0, 1.0)?,
    ];
    let bg = simulate_asar(&background, n, component_seed(seed, 0))?;
    let task = SarComponent::new(norm(config.task_hz)?, 4.0, config.task_gain)?;
    let osc = simulate_sar(&task, n, component_seed(seed, 1))?;

    let block = (config.block_s * fs).round() as usize;
    let x = (0..n)
        .map(|k| {
            let on = (k / block) % 2 == 1;
            bg.samples()[k] + if on { osc.samples()[k] } else { 0.0 }
        })
        .collect();
    let schedule = (0..n.div_ceil(block))
        .map(|b| {
            let t0 = (b * block) as f64 / fs;
            let t1 = (((b + 1) * block).min(n)) as f64 / fs;
            let label = if b % 2 == 1 {
                Condition::Task
            } else {
                Condition::Baseline
            };
            (t0, t1, label)
        })
        .collect();
    Ok((Signal::new(x, fs)?, schedule))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::TfrMethod;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn matrix(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> TfrMatrix {
        let v = (0..rows * cols).map(|i| f(i / cols, i % cols)).collect();
        TfrMatrix::new(
            (0..rows).map(|i| i as f64).collect(),
            (0..cols).map(|j| 1.0 + j as f64).collect(),
            v,
            TfrMethod::Stft,
        )
        .unwrap()
    }

    fn noise_matrix(
        rows: usize,
        cols: usize,
        seed: u64,
        offset: impl Fn(usize) -> f64,
    ) -> TfrMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draws: Vec<f64> = (0..rows * cols)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        matrix(rows, cols, |i, j| draws[i * cols + j] + offset(i))
    }

    fn alternating(rows: usize) -> ConditionMask {
        ConditionMask::new(
            (0..rows)
                .map(|i| {
                    if (i / 10) % 2 == 0 {
                        Condition::Task
                    } else {
                        Condition::Baseline
                    }
                })
                .collect(),
        )
    }

    #[test]
    fn standardize_cases() {
        let c = matrix(3, 4, |_, _| 7.0);
        assert!(standardize_tfr(&c)
            .unwrap()
            .values()
            .iter()
            .all(|&v| v == 0.0));

        let m = matrix(5, 6, |i, j| (i * 7 + j * 3) as f64 % 5.0 + 0.1 * j as f64);
        let s = standardize_tfr(&m).unwrap();
        let n = s.values().len() as f64;
        let mean = s.values().iter().sum::<f64>() / n;
        let sd = (s.values().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 1e-9 && (sd - 1.0).abs() < 1e-9);

        let affine = m
            .with_values(m.values().iter().map(|v| 3.0 * v - 2.0).collect())
            .unwrap();
        for (a, b) in standardize_tfr(&affine)
            .unwrap()
            .values()
            .iter()
            .zip(s.values())
        {
            assert!((a - b).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn standardize_idempotent(vals in proptest::collection::vec(-1e3f64..1e3, 12)) {
            let m = matrix(3, 4, |i, j| vals[i * 4 + j]);
            let once = standardize_tfr(&m).unwrap();
            let twice = standardize_tfr(&once).unwrap();
            for (a, b) in once.values().iter().zip(twice.values()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn null_contrast_covers_zero() {
        let m = noise_matrix(400, 40, 3, |_| 0.0);
        let r = bootstrap_contrast(&m, &alternating(400), 500, 1).unwrap();
        let covered = (0..40)
            .filter(|&j| r.diff_ci_low[j] <= 0.0 && r.diff_ci_high[j] >= 0.0)
            .count();
        assert!(covered as f64 >= 0.9 * 40.0, "{covered}");
        assert!(r
            .diff_ci_low
            .iter()
            .zip(&r.diff_ci_high)
            .all(|(a, b)| a <= b));
    }

    #[test]
    fn planted_offset_excludes_zero() {
        let mask = alternating(400);
        let m = noise_matrix(400, 40, 4, |i| if (i / 10) % 2 == 0 { 1.0 } else { 0.0 });
        let r = bootstrap_contrast(&m, &mask, 500, 1).unwrap();
        assert!(r.diff_ci_low.iter().all(|&lo| lo > 0.0));
    }

    #[test]
    fn contrast_deterministic_and_antisymmetric() {
        let m = noise_matrix(120, 8, 5, |_| 0.0);
        let mask = alternating(120);
        let a = bootstrap_contrast(&m, &mask, 100, 42).unwrap();
        assert_eq!(a, bootstrap_contrast(&m, &mask, 100, 42).unwrap());

        let swapped = ConditionMask::new(
            mask.labels
                .iter()
                .map(|c| match c {
                    Condition::Task => Condition::Baseline,
                    Condition::Baseline => Condition::Task,
                    Condition::Ignore => Condition::Ignore,
                })
                .collect(),
        );
        let b = bootstrap_contrast(&m, &swapped, 100, 42).unwrap();
        for (x, y) in a.mean_diff().iter().zip(b.mean_diff()) {
            assert_eq!(*x, -y);
        }
    }

    #[test]
    fn bootstrap_mean_tracks_plain_mean() {
        let m = noise_matrix(200, 10, 6, |_| 0.0);
        let r = bootstrap_contrast(&m, &alternating(200), 4000, 9).unwrap();
        let plain = r.mean_diff();
        for j in 0..10 {
            // SE of the replicate average is se / sqrt(n_boot)
            let tol = 3.0 * r.boot_se_diff[j] / (4000f64).sqrt();
            assert!((r.boot_mean_diff[j] - plain[j]).abs() < tol.max(1e-12));
        }
    }

    #[test]
    fn contrast_errors() {
        let m = noise_matrix(20, 3, 7, |_| 0.0);
        let only_task = ConditionMask::new(vec![Condition::Task; 20]);
        assert!(matches!(
            bootstrap_contrast(&m, &only_task, 100, 1),
            Err(Error::MissingCondition("baseline"))
        ));
        assert!(bootstrap_contrast(&m, &alternating(20), 99, 1).is_err());
        assert!(bootstrap_contrast(&m, &alternating(19), 100, 1).is_err());
    }

    #[test]
    fn schedule_labels_frames() {
        let times = [0.5, 1.5, 7.0, 13.9, 14.0, 30.0];
        let sched = [
            (0.0, 7.0, Condition::Task),
            (7.0, 14.0, Condition::Baseline),
        ];
        let m = ConditionMask::from_schedule(&times, &sched);
        use Condition::*;
        assert_eq!(
            m.labels,
            vec![Task, Task, Baseline, Baseline, Ignore, Ignore]
        );
    }

    #[test]
    fn decorrelation_white_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x: Vec<f64> = (0..4000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let s = Signal::new(x, 100.0).unwrap();
        let d = decorrelation_length(&s, 20.0, 20.0, 0.2).unwrap();
        assert_eq!(d.lag_samples, 1);
        assert!((d.length_s - 0.01).abs() < 1e-12);
        assert!(d.locally_stationary);
    }

    #[test]
    fn decorrelation_slow_sinusoid_fails_check() {
        // period 30 s, neighborhood 10 s: the covariance never decays
        let fs = 50.0;
        let x: Vec<f64> = (0..3000)
            .map(|k| (2.0 * std::f64::consts::PI * k as f64 / fs / 30.0).sin())
            .collect();
        let s = Signal::new(x, fs).unwrap();
        let d = decorrelation_length(&s, 30.0, 10.0, 0.05).unwrap();
        assert!(!d.locally_stationary);
    }

    #[test]
    fn decorrelation_trivial_threshold_and_errors() {
        let s = Signal::new((0..100).map(|k| (k as f64 * 0.3).sin()).collect(), 10.0).unwrap();
        let d = decorrelation_length(&s, 5.0, 6.0, 1.0).unwrap();
        assert_eq!(d.lag_samples, 0);
        assert!(matches!(
            decorrelation_length(&s, 5.0, 0.2, 0.1),
            Err(Error::NeighborhoodTooShort(_))
        ));
        assert!(matches!(
            decorrelation_length(&s, 1.0, 6.0, 0.1),
            Err(Error::OutOfRange(_))
        ));
    }

    #[test]
    fn session_schedule_covers_record() {
        let cfg = SessionConfig::new(30.0, 50.0);
        let (sig, sched) = task_locked_session(&cfg, 2).unwrap();
        assert_eq!(sig.len(), 1500);
        assert_eq!(sched.len(), 5);
        assert_eq!(sched[0], (0.0, 7.0, Condition::Baseline));
        assert_eq!(sched[1].2, Condition::Task);
        assert_eq!(sched[4].1, 30.0);
        let (again, _) = task_locked_session(&cfg, 2).unwrap();
        assert_eq!(sig, again);
    }
}
