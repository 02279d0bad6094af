use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dasar::baseline::chirp_with_noise;
use dasar::io::{
    read_schedule, read_signal, read_tfr, sibling, write_contrast, write_model_summary,
    write_schedule, write_signal, write_tfr, write_tracks,
};
use dasar::{
    bootstrap_contrast, component_tracks, decorrelation_length, fit_dasar, morlet_scalogram,
    render_tfr, standardize_tfr, stft_spectrogram, task_locked_session, ChannelSelector,
    ConditionMask, Error, EstimatorConfig, MorletConfig, SessionConfig, Signal, Sroi, StftConfig,
    WeightScheme, WindowKind,
};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "dasar",
    version,
    about = "Time-varying spectra with dyadic aggregated SAR models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate synthetic recordings.
    #[command(subcommand)]
    Synth(Synth),
    /// Fit a DASAR model and write summary, tracks and a rendered TFR.
    Fit(FitArgs),
    /// Compute an STFT spectrogram or Morlet scalogram.
    #[command(subcommand)]
    Baseline(Baseline),
    /// Bootstrap task-minus-baseline contrast of a TFR matrix.
    Contrast(ContrastArgs),
    /// Local decorrelation length and stationarity check.
    Diagnose(DiagnoseArgs),
}

#[derive(Subcommand, Debug)]
enum Synth {
    /// Two-tone chirp: a fixed 4 Hz tone plus a tone sweeping up from 4 Hz.
    Chirp {
        #[arg(long, default_value_t = 60.0)]
        duration: f64,
        #[arg(long, default_value_t = 100.0)]
        rate: f64,
        /// Standard deviation multiplier of the additive Gaussian noise.
        #[arg(long, default_value_t = 0.5)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Block-design recording with an oscillator present only in task blocks.
    Session {
        #[arg(long, default_value_t = 280.0)]
        duration: f64,
        #[arg(long, default_value_t = 100.0)]
        rate: f64,
        /// Frequency of the task-locked oscillator in Hz.
        #[arg(long, default_value_t = 6.0)]
        task_hz: f64,
        /// Block length in seconds.
        #[arg(long, default_value_t = 7.0)]
        block: f64,
        #[arg(long, default_value_t = 1.0)]
        task_gain: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: PathBuf,
        /// Where to write the `start_s,end_s,label` schedule.
        #[arg(long)]
        schedule: PathBuf,
    },
}

#[derive(Args, Debug)]
struct InputArgs {
    input: PathBuf,
    /// Sample rate in Hz; required when the file has no time column.
    #[arg(long)]
    rate: Option<f64>,
    /// Channel name or zero-based index.
    #[arg(long, default_value = "0")]
    channel: ChannelSelector,
}

impl InputArgs {
    fn load(&self) -> Result<Signal, Error> {
        read_signal(&self.input, &self.channel, self.rate)
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Weights {
    Uniform,
    Dyadic,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Spectrum region of interest in Hz.
    #[arg(long, value_parser = parse_range)]
    sroi: Option<(f64, f64)>,
    /// Minimum oscillator separation in Hz (default 0.01 × rate).
    #[arg(long)]
    delta_f: Option<f64>,
    #[arg(long, default_value_t = 3)]
    levels: usize,
    /// Maximum number of oscillators per segment.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Residual energy at which the greedy search stops.
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    #[arg(long, value_enum, default_value_t = Weights::Uniform)]
    weights: Weights,
    #[arg(long, default_value_t = 4)]
    pad: usize,
    #[arg(long, default_value_t = 5)]
    median: usize,
    /// Time step of the rendered TFR in seconds.
    #[arg(long, default_value_t = 0.1)]
    step: f64,
    /// Rendered frequency grid `LO:HI:N` in Hz (default: the SROI at 0.1 Hz spacing).
    #[arg(long, value_parser = parse_grid)]
    grid: Option<(f64, f64, usize)>,
    /// Output prefix; writes `<out>_summary.csv`, `<out>_tracks.csv` and `<out>_tfr.csv`.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Baseline {
    /// Short-time Fourier transform spectrogram.
    Stft {
        #[command(flatten)]
        input: InputArgs,
        /// Window length in seconds.
        #[arg(long, default_value_t = 1.0)]
        window: f64,
        /// Hop in seconds (default a quarter window).
        #[arg(long)]
        hop: Option<f64>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Morlet wavelet scalogram.
    Wavelet {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 6.0)]
        morlet_sigma: f64,
        /// Pseudo-frequencies `LO:HI:N` in Hz, log-spaced.
        #[arg(long, value_parser = parse_grid, default_value = "1:20:40")]
        scales: (f64, f64, usize),
        /// Output time step in seconds (default every sample).
        #[arg(long)]
        hop: Option<f64>,
        #[arg(short, long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct ContrastArgs {
    /// TFR matrix written by `fit` or `baseline`.
    tfr: PathBuf,
    /// `start_s,end_s,label` file with labels `task` and `baseline`.
    #[arg(long)]
    schedule: PathBuf,
    #[arg(long, default_value_t = 1000)]
    n_boot: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Skip whole-session standardization.
    #[arg(long)]
    raw: bool,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Centre of the neighbourhood in seconds.
    #[arg(long)]
    at: f64,
    /// Neighbourhood length in seconds.
    #[arg(long)]
    neighborhood: f64,
    /// Autocovariance threshold relative to the variance.
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Optional CSV copy of the report.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected LOW:HIGH, got `{s}`"))?;
    let lo: f64 = a.trim().parse().map_err(|_| format!("bad number `{a}`"))?;
    let hi: f64 = b.trim().parse().map_err(|_| format!("bad number `{b}`"))?;
    if !(lo >= 0.0 && hi > lo) {
        return Err(format!("need 0 <= LOW < HIGH, got {lo}:{hi}"));
    }
    Ok((lo, hi))
}

fn parse_grid(s: &str) -> Result<(f64, f64, usize), String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, n] = parts[..] else {
        return Err(format!("expected LO:HI:N, got `{s}`"));
    };
    let (lo, hi) = parse_range(&format!("{a}:{b}"))?;
    let n: usize = n.trim().parse().map_err(|_| format!("bad count `{n}`"))?;
    if n < 2 {
        return Err("grid needs at least 2 points".into());
    }
    Ok((lo, hi, n))
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

fn seconds_to_samples(seconds: f64, rate: f64, what: &str) -> Result<usize, Error> {
    let n = (seconds * rate).round();
    if n.is_nan() || n < 1.0 {
        return Err(Error::InvalidConfig(format!(
            "{what} of {seconds} s is under one sample"
        )));
    }
    Ok(n as usize)
}

fn run_synth(cmd: Synth) -> Result<(), Error> {
    match cmd {
        Synth::Chirp {
            duration,
            rate,
            noise,
            seed,
            out,
        } => {
            let sig = chirp_with_noise(duration, rate, noise, seed)?;
            write_signal(&sig, "x", out)
        }
        Synth::Session {
            duration,
            rate,
            task_hz,
            block,
            task_gain,
            seed,
            out,
            schedule,
        } => {
            let cfg = SessionConfig {
                duration_s: duration,
                sample_rate_hz: rate,
                task_hz,
                block_s: block,
                task_gain,
            };
            let (sig, sched) = task_locked_session(&cfg, seed)?;
            write_signal(&sig, "x", out)?;
            write_schedule(&sched, schedule)
        }
    }
}

fn run_fit(args: FitArgs) -> Result<(), Error> {
    let sig = args.input.load()?;
    let fs = sig.sample_rate_hz();
    let nyquist = fs / 2.0;
    let (lo, hi) = args.sroi.unwrap_or((0.0, nyquist));
    if hi > nyquist {
        return Err(Error::InvalidConfig(format!(
            "SROI upper edge {hi} Hz exceeds Nyquist {nyquist} Hz"
        )));
    }
    let sroi = Sroi::from_hz(lo, hi, fs)?;
    let config = EstimatorConfig {
        delta_f: args.delta_f.map_or(0.01, |d| d / fs),
        max_components: args.k,
        epsilon_star: args.epsilon,
        sroi0: sroi,
        pad_factor: args.pad,
        median_width: args.median,
    };
    let weights = match args.weights {
        Weights::Uniform => WeightScheme::Uniform,
        Weights::Dyadic => WeightScheme::DyadicBand { omega_max: hi / fs },
    };
    let model = fit_dasar(&sig, args.levels, &config, weights)?;

    let freqs = match args.grid {
        Some((a, b, n)) => linspace(a, b.min(nyquist), n),
        None => {
            let n = (((hi - lo) / 0.1).round() as usize + 1).max(2);
            linspace(lo, hi, n)
        }
    };
    let tfr = render_tfr(&model, args.step, &freqs)?;

    let tracks = component_tracks(&model, model.max_level())?;
    write_model_summary(&model, sibling(&args.out, "summary.csv"))?;
    write_tracks(&tracks, sibling(&args.out, "tracks.csv"))?;
    write_tfr(&tfr, sibling(&args.out, "tfr.csv"))
}

fn run_baseline(cmd: Baseline) -> Result<(), Error> {
    match cmd {
        Baseline::Stft {
            input,
            window,
            hop,
            out,
        } => {
            let sig = input.load()?;
            let fs = sig.sample_rate_hz();
            let window_len = seconds_to_samples(window, fs, "window")?;
            let hop = match hop {
                Some(h) => seconds_to_samples(h, fs, "hop")?,
                None => (window_len / 4).max(1),
            };
            let cfg = StftConfig {
                window_len,
                hop,
                window: WindowKind::Hann,
            };
            write_tfr(&stft_spectrogram(&sig, &cfg)?, out)
        }
        Baseline::Wavelet {
            input,
            morlet_sigma,
            scales: (lo, hi, n),
            hop,
            out,
        } => {
            let sig = input.load()?;
            let fs = sig.sample_rate_hz();
            let mut cfg = MorletConfig::for_band(morlet_sigma, lo, hi, n, fs);
            if let Some(h) = hop {
                cfg.hop = seconds_to_samples(h, fs, "hop")?;
            }
            write_tfr(&morlet_scalogram(&sig, &cfg)?, out)
        }
    }
}

fn run_contrast(args: ContrastArgs) -> Result<(), Error> {
    let tfr = read_tfr(&args.tfr)?;
    let sched = read_schedule(&args.schedule)?;
    let tfr = if args.raw {
        tfr
    } else {
        standardize_tfr(&tfr)?
    };
    let mask = ConditionMask::from_schedule(tfr.times_s(), &sched);
    let res = bootstrap_contrast(&tfr, &mask, args.n_boot, args.seed)?;
    write_contrast(&res, args.out)
}

fn run_diagnose(args: DiagnoseArgs) -> Result<(), Error> {
    let sig = args.input.load()?;
    let d = decorrelation_length(&sig, args.at, args.neighborhood, args.epsilon)?;
    let report = format!(
        "t_star_s,neighborhood_s,epsilon,lag_samples,length_s,locally_stationary\n{},{},{},{},{},{}\n",
        args.at,
        args.neighborhood,
        args.epsilon,
        d.lag_samples,
        d.length_s,
        d.locally_stationary
    );
    print!("{report}");
    if let Some(path) = args.out {
        std::fs::write(&path, report).map_err(|source| Error::Io { path, source })?;
    }
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidConfig(_) | Error::InvalidSroi(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Synth(cmd) => run_synth(cmd),
        Command::Fit(args) => run_fit(args),
        Command::Baseline(cmd) => run_baseline(cmd),
        Command::Contrast(args) => run_contrast(args),
        Command::Diagnose(args) => run_diagnose(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
