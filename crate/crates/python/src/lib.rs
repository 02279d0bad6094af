//! Python bindings. Frequencies passed to `SarComponent` and
//! `estimate_asar` are normalized (cycles per sample); everything that
//! takes a sample rate works in Hz.

use dasar as dc;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: dc::Error) -> PyErr {
    match e {
        dc::Error::Io { .. } => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for dc::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

#[pyclass(name = "Signal", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySignal {
    inner: dc::Signal,
}

#[pymethods]
impl PySignal {
    #[new]
    #[pyo3(signature = (samples, sample_rate_hz, start_time_s = 0.0))]
    fn new(samples: Vec<f64>, sample_rate_hz: f64, start_time_s: f64) -> PyResult<Self> {
        let inner = dc::Signal::with_start(samples, sample_rate_hz, start_time_s).py()?;
        Ok(Self { inner })
    }

    #[getter]
    fn samples(&self) -> Vec<f64> {
        self.inner.samples().to_vec()
    }

    #[getter]
    fn sample_rate_hz(&self) -> f64 {
        self.inner.sample_rate_hz()
    }

    #[getter]
    fn start_time_s(&self) -> f64 {
        self.inner.start_time_s()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Signal(n={}, sample_rate_hz={}, start_time_s={})",
            self.inner.len(),
            self.inner.sample_rate_hz(),
            self.inner.start_time_s()
        )
    }
}

#[pyclass(name = "SarComponent", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySarComponent {
    inner: dc::SarComponent,
}

#[pymethods]
impl PySarComponent {
    #[new]
    fn new(omega_star: f64, tau: f64, sigma2: f64) -> PyResult<Self> {
        let inner = dc::SarComponent::new(omega_star, tau, sigma2).py()?;
        Ok(Self { inner })
    }

    #[getter]
    fn omega_star(&self) -> f64 {
        self.inner.omega_star
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.inner.tau
    }

    #[getter]
    fn sigma2(&self) -> f64 {
        self.inner.sigma2
    }

    /// Closed-form power at normalized frequencies.
    fn spectrum(&self, freqs: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(dc::sar_spectrum(&self.inner, &freqs).py()?.power().to_vec())
    }

    /// AR(2) coefficients `[phi1, phi2]`.
    fn coefficients(&self) -> PyResult<Vec<f64>> {
        Ok(dc::sar_coeffs(self.inner.omega_star, self.inner.tau)
            .py()?
            .phi()
            .to_vec())
    }

    fn peak_frequency(&self) -> PyResult<f64> {
        let c = dc::sar_coeffs(self.inner.omega_star, self.inner.tau).py()?;
        dc::sar_peak_frequency(&c).py()
    }

    fn __repr__(&self) -> String {
        format!(
            "SarComponent(omega_star={}, tau={}, sigma2={})",
            self.inner.omega_star, self.inner.tau, self.inner.sigma2
        )
    }
}

#[pyclass(name = "AsarFit", frozen)]
struct PyAsarFit {
    inner: dc::AsarFit,
}

#[pymethods]
impl PyAsarFit {
    #[getter]
    fn components(&self) -> Vec<PySarComponent> {
        self.inner
            .components
            .iter()
            .map(|c| PySarComponent { inner: *c })
            .collect()
    }

    #[getter]
    fn residual_energy(&self) -> f64 {
        self.inner.residual_energy
    }

    /// `(residual_energy, sroi_measure)` per iteration, starting with the initial state.
    #[getter]
    fn trace(&self) -> Vec<(f64, f64)> {
        self.inner
            .trace
            .iter()
            .map(|t| (t.residual_energy, t.sroi_measure))
            .collect()
    }

    /// Smoothed input spectrum as `(freqs, power)`.
    #[getter]
    fn spectrum(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.inner.grid.freqs().to_vec(),
            self.inner.grid.power().to_vec(),
        )
    }
}

#[pyclass(name = "TfrMatrix", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTfrMatrix {
    inner: dc::TfrMatrix,
}

#[pymethods]
impl PyTfrMatrix {
    #[getter]
    fn times_s(&self) -> Vec<f64> {
        self.inner.times_s().to_vec()
    }

    #[getter]
    fn freqs_hz(&self) -> Vec<f64> {
        self.inner.freqs_hz().to_vec()
    }

    #[getter]
    fn method(&self) -> &'static str {
        self.inner.method().as_str()
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.inner.n_times(), self.inner.n_freqs())
    }

    /// Row-major power, one list per time stamp.
    fn to_list(&self) -> Vec<Vec<f64>> {
        self.inner.rows().map(<[f64]>::to_vec).collect()
    }

    fn standardized(&self) -> PyResult<Self> {
        Ok(Self {
            inner: dc::standardize_tfr(&self.inner).py()?,
        })
    }

    fn band(&self, lo_hz: f64, hi_hz: f64) -> Self {
        Self {
            inner: self.inner.band(lo_hz, hi_hz),
        }
    }

    fn save(&self, path: &str) -> PyResult<()> {
        dc::io::write_tfr(&self.inner, path).py()
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: dc::io::read_tfr(path).py()?,
        })
    }
}

type TrackRow = (usize, usize, f64, f64, f64, f64, f64);

#[pyclass(name = "DasarModel", frozen)]
struct PyDasarModel {
    inner: dc::DasarModel,
}

#[pymethods]
impl PyDasarModel {
    #[getter]
    fn levels(&self) -> usize {
        self.inner.max_level()
    }

    /// Power at `t_s` seconds after the record start and `f_hz`.
    fn spectrum(&self, t_s: f64, f_hz: f64) -> PyResult<f64> {
        dc::evaluate_spectrum(&self.inner, t_s, f_hz).py()
    }

    fn render(&self, step_s: f64, freqs_hz: Vec<f64>) -> PyResult<PyTfrMatrix> {
        Ok(PyTfrMatrix {
            inner: dc::render_tfr(&self.inner, step_s, &freqs_hz).py()?,
        })
    }

    /// Rows of `(level, segment, t_start_s, t_end_s, omega_star_hz, tau, sigma2)`.
    fn tracks(&self, level: usize) -> PyResult<Vec<TrackRow>> {
        Ok(dc::component_tracks(&self.inner, level)
            .py()?
            .into_iter()
            .map(|t| {
                (
                    t.level,
                    t.segment_index,
                    t.time_span_s.0,
                    t.time_span_s.1,
                    t.omega_star_hz,
                    t.tau,
                    t.sigma2,
                )
            })
            .collect())
    }
}

#[pyclass(name = "ContrastResult", frozen, get_all)]
struct PyContrastResult {
    freqs_hz: Vec<f64>,
    mean_task: Vec<f64>,
    mean_baseline: Vec<f64>,
    mean_diff: Vec<f64>,
    ci_low: Vec<f64>,
    ci_high: Vec<f64>,
    n_boot: usize,
    seed: u64,
}

fn estimator_config(
    delta_f: f64,
    k: usize,
    epsilon: f64,
    sroi: Option<(f64, f64)>,
    pad: usize,
    median: usize,
) -> PyResult<dc::EstimatorConfig> {
    let sroi0 = match sroi {
        Some((lo, hi)) => dc::Sroi::new(vec![(lo, hi)]).py()?,
        None => dc::Sroi::full(),
    };
    Ok(dc::EstimatorConfig {
        delta_f,
        max_components: k,
        epsilon_star: epsilon,
        sroi0,
        pad_factor: pad,
        median_width: median,
    })
}

#[pyfunction]
fn simulate_sar(component: &PySarComponent, n: usize, seed: u64) -> PyResult<PySignal> {
    Ok(PySignal {
        inner: dc::simulate_sar(&component.inner, n, seed).py()?,
    })
}

#[pyfunction]
fn simulate_asar(
    components: Vec<PyRef<'_, PySarComponent>>,
    n: usize,
    seed: u64,
) -> PyResult<PySignal> {
    let cs: Vec<dc::SarComponent> = components.iter().map(|c| c.inner).collect();
    Ok(PySignal {
        inner: dc::simulate_asar(&cs, n, seed).py()?,
    })
}

#[pyfunction]
#[pyo3(signature = (duration_s, sample_rate_hz, seed = 0, noise = 0.5))]
fn generate_chirp(
    duration_s: f64,
    sample_rate_hz: f64,
    seed: u64,
    noise: f64,
) -> PyResult<PySignal> {
    Ok(PySignal {
        inner: dc::baseline::chirp_with_noise(duration_s, sample_rate_hz, noise, seed).py()?,
    })
}

/// Greedy oscillator decomposition of one segment; `delta_f` and `sroi` are normalized.
#[pyfunction]
#[pyo3(signature = (signal, delta_f = 0.01, k = 5, epsilon = 0.0, sroi = None, pad = 4, median = 5))]
fn estimate_asar(
    signal: &PySignal,
    delta_f: f64,
    k: usize,
    epsilon: f64,
    sroi: Option<(f64, f64)>,
    pad: usize,
    median: usize,
) -> PyResult<PyAsarFit> {
    let cfg = estimator_config(delta_f, k, epsilon, sroi, pad, median)?;
    Ok(PyAsarFit {
        inner: dc::estimate_asar(&signal.inner, &cfg).py()?,
    })
}

/// DASAR fit with the SROI and `delta_f_hz` in Hz. `weights` is
/// `"uniform"` or `"dyadic"` (octave bands below the SROI upper edge).
#[pyfunction]
#[pyo3(signature = (
    signal, levels, k = 5, delta_f_hz = None, sroi_hz = None,
    epsilon = 0.0, weights = "uniform", pad = 4, median = 5
))]
#[allow(clippy::too_many_arguments)]
fn fit_dasar(
    signal: &PySignal,
    levels: usize,
    k: usize,
    delta_f_hz: Option<f64>,
    sroi_hz: Option<(f64, f64)>,
    epsilon: f64,
    weights: &str,
    pad: usize,
    median: usize,
) -> PyResult<PyDasarModel> {
    let fs = signal.inner.sample_rate_hz();
    let (lo, hi) = sroi_hz.unwrap_or((0.0, fs / 2.0));
    let delta_f = delta_f_hz.map_or(0.01, |d| d / fs);
    let cfg = estimator_config(delta_f, k, epsilon, Some((lo / fs, hi / fs)), pad, median)?;
    let scheme = match weights {
        "uniform" => dc::WeightScheme::Uniform,
        "dyadic" => dc::WeightScheme::DyadicBand { omega_max: hi / fs },
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown weight scheme `{other}`"
            )))
        }
    };
    Ok(PyDasarModel {
        inner: dc::fit_dasar(&signal.inner, levels, &cfg, scheme).py()?,
    })
}

/// Hann-window spectrogram; `hop_s` defaults to a quarter window.
#[pyfunction]
#[pyo3(signature = (signal, window_s = 1.0, hop_s = None))]
fn stft(signal: &PySignal, window_s: f64, hop_s: Option<f64>) -> PyResult<PyTfrMatrix> {
    let fs = signal.inner.sample_rate_hz();
    let window_len = (window_s * fs).round().max(1.0) as usize;
    let hop = hop_s.map_or((window_len / 4).max(1), |h| {
        (h * fs).round().max(1.0) as usize
    });
    let cfg = dc::StftConfig {
        window_len,
        hop,
        window: dc::WindowKind::Hann,
    };
    Ok(PyTfrMatrix {
        inner: dc::stft_spectrogram(&signal.inner, &cfg).py()?,
    })
}

/// Morlet scalogram at `n` log-spaced pseudo-frequencies in `[f_lo_hz, f_hi_hz]`.
#[pyfunction]
#[pyo3(signature = (signal, f_lo_hz, f_hi_hz, n, sigma = 6.0, hop = 1))]
fn morlet(
    signal: &PySignal,
    f_lo_hz: f64,
    f_hi_hz: f64,
    n: usize,
    sigma: f64,
    hop: usize,
) -> PyResult<PyTfrMatrix> {
    let mut cfg =
        dc::MorletConfig::for_band(sigma, f_lo_hz, f_hi_hz, n, signal.inner.sample_rate_hz());
    cfg.hop = hop;
    Ok(PyTfrMatrix {
        inner: dc::morlet_scalogram(&signal.inner, &cfg).py()?,
    })
}

/// `labels` holds one of `"task"`, `"baseline"`, `"ignore"` per time frame.
#[pyfunction]
#[pyo3(signature = (tfr, labels, n_boot = 1000, seed = 0))]
fn bootstrap_contrast(
    tfr: &PyTfrMatrix,
    labels: Vec<String>,
    n_boot: usize,
    seed: u64,
) -> PyResult<PyContrastResult> {
    let labels = labels
        .iter()
        .map(|l| l.parse::<dc::Condition>())
        .collect::<dc::Result<Vec<_>>>()
        .py()?;
    let r =
        dc::bootstrap_contrast(&tfr.inner, &dc::ConditionMask::new(labels), n_boot, seed).py()?;
    Ok(PyContrastResult {
        mean_diff: r.mean_diff(),
        freqs_hz: r.freqs_hz,
        mean_task: r.mean_task,
        mean_baseline: r.mean_baseline,
        ci_low: r.diff_ci_low,
        ci_high: r.diff_ci_high,
        n_boot: r.n_boot,
        seed: r.seed,
    })
}

/// Returns `(length_s, lag_samples, locally_stationary)`.
#[pyfunction]
fn decorrelation_length(
    signal: &PySignal,
    t_star_s: f64,
    neighborhood_s: f64,
    epsilon: f64,
) -> PyResult<(f64, usize, bool)> {
    let d = dc::decorrelation_length(&signal.inner, t_star_s, neighborhood_s, epsilon).py()?;
    Ok((d.length_s, d.lag_samples, d.locally_stationary))
}

/// Level weight for normalized frequency `omega`.
#[pyfunction]
#[pyo3(signature = (level, omega, max_level, omega_max = None))]
fn level_weight(level: usize, omega: f64, max_level: usize, omega_max: Option<f64>) -> f64 {
    let scheme = match omega_max {
        Some(omega_max) => dc::WeightScheme::DyadicBand { omega_max },
        None => dc::WeightScheme::Uniform,
    };
    dc::level_weight(&scheme, level, omega, max_level)
}

#[pyfunction]
#[pyo3(signature = (path, channel = "0", rate = None))]
fn read_signal(path: &str, channel: &str, rate: Option<f64>) -> PyResult<PySignal> {
    let selector: dc::ChannelSelector = channel.parse().expect("infallible");
    Ok(PySignal {
        inner: dc::io::read_signal(path, &selector, rate).py()?,
    })
}

#[pymodule]
fn pydasar(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySignal>()?;
    m.add_class::<PySarComponent>()?;
    m.add_class::<PyAsarFit>()?;
    m.add_class::<PyTfrMatrix>()?;
    m.add_class::<PyDasarModel>()?;
    m.add_class::<PyContrastResult>()?;
    m.add_function(wrap_pyfunction!(simulate_sar, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_asar, m)?)?;
    m.add_function(wrap_pyfunction!(generate_chirp, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_asar, m)?)?;
    m.add_function(wrap_pyfunction!(fit_dasar, m)?)?;
    m.add_function(wrap_pyfunction!(stft, m)?)?;
    m.add_function(wrap_pyfunction!(morlet, m)?)?;
    m.add_function(wrap_pyfunction!(bootstrap_contrast, m)?)?;
    m.add_function(wrap_pyfunction!(decorrelation_length, m)?)?;
    m.add_function(wrap_pyfunction!(level_weight, m)?)?;
    m.add_function(wrap_pyfunction!(read_signal, m)?)?;
    Ok(())
}
