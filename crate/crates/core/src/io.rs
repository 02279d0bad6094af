//! Plain-text file formats.
//!
//! Every file written here starts with a `# dasar <kind> v1` comment line,
//! followed by a comma-separated header row and data rows. Readers skip
//! blank lines and lines starting with `#`. Floats are written with Rust's
//! shortest round-trip formatting, so write/read is lossless.

use std::fs;
use std::path::{Path, PathBuf};

use csv::{ReaderBuilder, StringRecord, Trim, WriterBuilder};

use crate::analysis::{Condition, ContrastResult};
use crate::dasar::{ComponentTrack, DasarModel};
use crate::error::{Error, Result};
use crate::types::{Signal, TfrMatrix, TfrMethod};

pub const FORMAT_VERSION: u32 = 1;

/// Relative tolerance on timestamp steps when checking uniform sampling.
const JITTER_TOLERANCE: f64 = 1e-6;

const TIME_COLUMNS: [&str; 4] = ["t", "time", "time_s", "seconds"];

/// Channel selection by zero-based index (time column excluded) or header name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChannelSelector {
    Index(usize),
    Name(String),
}

impl Default for ChannelSelector {
    fn default() -> Self {
        ChannelSelector::Index(0)
    }
}

impl std::str::FromStr for ChannelSelector {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => ChannelSelector::Index(i),
            Err(_) => ChannelSelector::Name(s.to_string()),
        })
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_error(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Comma unless the first data line uses tabs or semicolons instead.
fn sniff_delimiter(text: &str) -> u8 {
    let first = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .unwrap_or("");
    if first.contains(',') {
        b','
    } else if first.contains('\t') {
        b'\t'
    } else if first.contains(';') {
        b';'
    } else {
        b','
    }
}

/// Non-comment records with their 1-based line numbers.
fn read_records(path: &Path) -> Result<Vec<(usize, StringRecord)>> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let mut reader = ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(Trim::All)
        .flexible(true)
        .delimiter(sniff_delimiter(&text))
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_error(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        out.push((line, rec));
    }
    Ok(out)
}

fn parse_floats<'a>(
    path: &Path,
    line: usize,
    fields: impl IntoIterator<Item = &'a str>,
) -> Result<Vec<f64>> {
    fields
        .into_iter()
        .map(|f| {
            f.parse::<f64>()
                .map_err(|_| parse_error(path, line, format!("`{f}` is not a number")))
        })
        .collect()
}

/// Comment lines followed by CSV rows.
struct TableWriter {
    inner: csv::Writer<Vec<u8>>,
}

impl TableWriter {
    fn new(comments: &[String]) -> Self {
        let mut buf = Vec::new();
        for c in comments {
            buf.extend_from_slice(format!("# {c}\n").as_bytes());
        }
        let inner = WriterBuilder::new().flexible(true).from_writer(buf);
        TableWriter { inner }
    }

    fn kind(kind: &str) -> Self {
        Self::new(&[format!("dasar {kind} v{FORMAT_VERSION}")])
    }

    fn row<I, T>(&mut self, fields: I)
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u8]>,
    {
        // writes into a Vec cannot fail
        self.inner.write_record(fields).expect("in-memory write");
    }

    fn finish(self, path: &Path) -> Result<()> {
        let bytes = self.inner.into_inner().expect("in-memory flush");
        fs::write(path, bytes).map_err(|e| io_error(path, e))
    }
}

/// Reads one channel from a comma, tab or semicolon separated text file.
///
/// The first row is a header if any field is non-numeric. A leading column
/// named `t`, `time`, `time_s` or `seconds` holds timestamps, which set the
/// sample rate and start time and must be uniform. Without a header the
/// first column is taken as time unless `rate_override` is given, in which
/// case every column is a channel. `rate_override` always wins over the
/// timestamp-derived rate.
pub fn read_signal(
    path: impl AsRef<Path>,
    channel: &ChannelSelector,
    rate_override: Option<f64>,
) -> Result<Signal> {
    let path = path.as_ref();
    let records = read_records(path)?;
    let Some((first_line, first)) = records.first() else {
        return Err(Error::EmptySignal);
    };
    let header: Option<Vec<String>> = first
        .iter()
        .any(|f| f.parse::<f64>().is_err())
        .then(|| first.iter().map(str::to_string).collect());
    let body = &records[usize::from(header.is_some())..];

    let has_time = match &header {
        Some(h) => TIME_COLUMNS.contains(&h[0].to_ascii_lowercase().as_str()),
        None => rate_override.is_none(),
    };
    if !has_time && rate_override.is_none() {
        return Err(parse_error(
            path,
            *first_line,
            "no time column; a sample rate must be supplied",
        ));
    }

    let offset = usize::from(has_time);
    let unknown = || match channel {
        ChannelSelector::Index(i) => Error::UnknownChannel(i.to_string()),
        ChannelSelector::Name(n) => Error::UnknownChannel(n.clone()),
    };
    let col = match channel {
        ChannelSelector::Index(i) => i + offset,
        ChannelSelector::Name(name) => header
            .as_ref()
            .and_then(|h| h.iter().skip(offset).position(|c| c == name))
            .map(|i| i + offset)
            .ok_or_else(unknown)?,
    };

    let mut times = Vec::new();
    let mut values = Vec::new();
    let width = body.first().map_or(0, |(_, r)| r.len());
    for (line, rec) in body {
        if rec.len() != width {
            return Err(parse_error(
                path,
                *line,
                format!("expected {width} fields, found {}", rec.len()),
            ));
        }
        let row = parse_floats(path, *line, rec.iter())?;
        if col >= row.len() {
            return Err(unknown());
        }
        if has_time {
            times.push(row[0]);
        }
        values.push(row[col]);
    }
    if values.is_empty() {
        return Err(Error::EmptySignal);
    }

    let mut start = 0.0;
    let mut rate = rate_override;
    if has_time {
        start = times[0];
        if times.len() >= 2 {
            let expected = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
            if !(expected > 0.0) {
                return Err(Error::NonUniformSampling {
                    row: 1,
                    step: expected,
                    expected,
                });
            }
            for (i, w) in times.windows(2).enumerate() {
                let step = w[1] - w[0];
                if (step - expected).abs() > JITTER_TOLERANCE * expected {
                    return Err(Error::NonUniformSampling {
                        row: i + 1,
                        step,
                        expected,
                    });
                }
            }
            rate = rate.or(Some(1.0 / expected));
        }
    }
    let rate = rate.ok_or_else(|| {
        parse_error(
            path,
            *first_line,
            "a single timestamp cannot define a sample rate",
        )
    })?;
    Signal::with_start(values, rate, start)
}

/// Writes `t,<name>` rows.
pub fn write_signal(signal: &Signal, name: &str, path: impl AsRef<Path>) -> Result<()> {
    let mut w = TableWriter::kind("signal");
    w.row(["t", name]);
    let fs = signal.sample_rate_hz();
    for (k, v) in signal.samples().iter().enumerate() {
        let t = signal.start_time_s() + k as f64 / fs;
        w.row([t.to_string(), v.to_string()]);
    }
    w.finish(path.as_ref())
}

/// Header `time_s,<f1>,<f2>,...` then one row per time stamp.
pub fn write_tfr(matrix: &TfrMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut w = TableWriter::new(&[format!(
        "dasar tfr v{FORMAT_VERSION} method={}",
        matrix.method().as_str()
    )]);
    w.row(
        std::iter::once("time_s".to_string()).chain(matrix.freqs_hz().iter().map(f64::to_string)),
    );
    for (t, row) in matrix.times_s().iter().zip(matrix.rows()) {
        w.row(std::iter::once(t).chain(row).map(f64::to_string));
    }
    w.finish(path.as_ref())
}

pub fn read_tfr(path: impl AsRef<Path>) -> Result<TfrMatrix> {
    let path = path.as_ref();
    let first = fs::read_to_string(path)
        .map_err(|e| io_error(path, e))?
        .lines()
        .next()
        .unwrap_or("")
        .to_string();
    let method = match first.split("method=").nth(1) {
        Some(m) => m.trim().parse::<TfrMethod>()?,
        None => TfrMethod::Dasar,
    };
    let records = read_records(path)?;
    let Some((hline, header)) = records.first() else {
        return Err(parse_error(path, 1, "missing header"));
    };
    if header.get(0) != Some("time_s") {
        return Err(parse_error(path, *hline, "header must start with `time_s`"));
    }
    let freqs = parse_floats(path, *hline, header.iter().skip(1))?;
    let mut times = Vec::new();
    let mut power = Vec::new();
    for (line, rec) in &records[1..] {
        if rec.len() != freqs.len() + 1 {
            return Err(parse_error(path, *line, "row length does not match header"));
        }
        let row = parse_floats(path, *line, rec.iter())?;
        times.push(row[0]);
        power.extend_from_slice(&row[1..]);
    }
    TfrMatrix::new(times, freqs, power, method)
}

pub const TRACK_COLUMNS: [&str; 7] = [
    "level",
    "segment",
    "t_start_s",
    "t_end_s",
    "omega_star_hz",
    "tau",
    "sigma2",
];

pub fn write_tracks(tracks: &[ComponentTrack], path: impl AsRef<Path>) -> Result<()> {
    let mut w = TableWriter::kind("tracks");
    w.row(TRACK_COLUMNS);
    for t in tracks {
        w.row([
            t.level.to_string(),
            t.segment_index.to_string(),
            t.time_span_s.0.to_string(),
            t.time_span_s.1.to_string(),
            t.omega_star_hz.to_string(),
            t.tau.to_string(),
            t.sigma2.to_string(),
        ]);
    }
    w.finish(path.as_ref())
}

pub fn read_tracks(path: impl AsRef<Path>) -> Result<Vec<ComponentTrack>> {
    let path = path.as_ref();
    let records = read_records(path)?;
    match records.first() {
        Some((_, h)) if h.iter().eq(TRACK_COLUMNS) => {}
        Some((line, _)) => return Err(parse_error(path, *line, "unexpected track header")),
        None => return Err(parse_error(path, 1, "missing header")),
    }
    records[1..]
        .iter()
        .map(|(line, rec)| {
            if rec.len() != TRACK_COLUMNS.len() {
                return Err(parse_error(path, *line, "expected 7 fields"));
            }
            let int = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| parse_error(path, *line, format!("`{s}` is not an integer")))
            };
            let v = parse_floats(path, *line, rec.iter().skip(2))?;
            Ok(ComponentTrack {
                level: int(&rec[0])?,
                segment_index: int(&rec[1])?,
                time_span_s: (v[0], v[1]),
                omega_star_hz: v[2],
                tau: v[3],
                sigma2: v[4],
            })
        })
        .collect()
}

/// One row per (level, segment): component count and residual energy.
pub fn write_model_summary(model: &DasarModel, path: impl AsRef<Path>) -> Result<()> {
    let mut w = TableWriter::new(&[
        format!("dasar model v{FORMAT_VERSION}"),
        format!(
            "levels={} max_components={} delta_f={} sample_rate_hz={} n_samples={}",
            model.max_level(),
            model.config.max_components,
            model.config.delta_f,
            model.sample_rate_hz,
            model.signal_len
        ),
    ]);
    w.row([
        "level",
        "segment",
        "t_start_s",
        "t_end_s",
        "n_components",
        "residual_energy",
    ]);
    for (i, fits) in model.levels.iter().enumerate() {
        for (j, fit) in fits.iter().enumerate() {
            let (a, b) = model.segment_span_s(i, j);
            w.row([
                i.to_string(),
                j.to_string(),
                (a + model.start_time_s).to_string(),
                (b + model.start_time_s).to_string(),
                fit.components.len().to_string(),
                fit.residual_energy.to_string(),
            ]);
        }
    }
    w.finish(path.as_ref())
}

pub fn write_contrast(result: &ContrastResult, path: impl AsRef<Path>) -> Result<()> {
    let mut w = TableWriter::new(&[
        format!("dasar contrast v{FORMAT_VERSION}"),
        format!("n_boot={} seed={}", result.n_boot, result.seed),
    ]);
    w.row([
        "freq_hz",
        "mean_task",
        "mean_baseline",
        "diff",
        "ci_low",
        "ci_high",
    ]);
    let diff = result.mean_diff();
    for j in 0..result.freqs_hz.len() {
        w.row(
            [
                result.freqs_hz[j],
                result.mean_task[j],
                result.mean_baseline[j],
                diff[j],
                result.diff_ci_low[j],
                result.diff_ci_high[j],
            ]
            .map(|v| v.to_string()),
        );
    }
    w.finish(path.as_ref())
}

/// Rows of `start_s,end_s,label` with labels `task` or `baseline`; an
/// optional header row is skipped.
pub fn read_schedule(path: impl AsRef<Path>) -> Result<Vec<(f64, f64, Condition)>> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for (i, (line, rec)) in read_records(path)?.iter().enumerate() {
        if rec.len() != 3 {
            return Err(parse_error(path, *line, "expected start_s,end_s,label"));
        }
        let (Ok(a), Ok(b)) = (rec[0].parse::<f64>(), rec[1].parse::<f64>()) else {
            if i == 0 {
                continue;
            }
            return Err(parse_error(path, *line, "interval bounds must be numbers"));
        };
        let label: Condition = rec[2]
            .parse()
            .map_err(|e: Error| parse_error(path, *line, e.to_string()))?;
        if !(b > a) {
            return Err(parse_error(path, *line, "interval end must exceed start"));
        }
        out.push((a, b, label));
    }
    Ok(out)
}

pub fn write_schedule(schedule: &[(f64, f64, Condition)], path: impl AsRef<Path>) -> Result<()> {
    let mut w = TableWriter::kind("schedule");
    w.row(["start_s", "end_s", "label"]);
    for (a, b, c) in schedule {
        let label = match c {
            Condition::Task => "task",
            Condition::Baseline => "baseline",
            Condition::Ignore => "ignore",
        };
        w.row([a.to_string(), b.to_string(), label.to_string()]);
    }
    w.finish(path.as_ref())
}

/// `<prefix>_<suffix>` next to `prefix`.
pub fn sibling(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(format!("_{suffix}"));
    prefix.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::Condition;
    use proptest::prelude::*;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn reads_time_indexed_file() {
        let dir = tmp();
        let p = dir.path().join("sig.csv");
        let mut text = String::from("t,x\n");
        for k in 0..50 {
            text.push_str(&format!("{},{}\n", k as f64 / 100.0, k as f64 * 0.5));
        }
        fs::write(&p, text).unwrap();
        let s = read_signal(&p, &ChannelSelector::Name("x".into()), None).unwrap();
        assert_eq!(s.len(), 50);
        assert!((s.sample_rate_hz() - 100.0).abs() < 1e-9);
        assert_eq!(s.samples()[3], 1.5);
    }

    #[test]
    fn reads_headerless_with_rate() {
        let dir = tmp();
        let p = dir.path().join("raw.tsv");
        fs::write(&p, "1\t10\n2\t20\n\n3\t30\n").unwrap();
        let s = read_signal(&p, &ChannelSelector::Index(1), Some(4.0)).unwrap();
        assert_eq!(s.samples(), &[10.0, 20.0, 30.0]);
        assert_eq!(s.sample_rate_hz(), 4.0);
        // without a rate the first column is time
        let s = read_signal(&p, &ChannelSelector::Index(0), None).unwrap();
        assert_eq!(s.samples(), &[10.0, 20.0, 30.0]);
        assert_eq!(s.sample_rate_hz(), 1.0);
        assert_eq!(s.start_time_s(), 1.0);
    }

    #[test]
    fn signal_errors() {
        let dir = tmp();
        let p = dir.path().join("j.csv");
        fs::write(&p, "t,x\n0,1\n0.01,2\n0.0205,3\n0.03,4\n").unwrap();
        assert!(matches!(
            read_signal(&p, &ChannelSelector::default(), None),
            Err(Error::NonUniformSampling { .. })
        ));
        fs::write(&p, "t,x\n0,1\n0.01,2\n").unwrap();
        assert!(matches!(
            read_signal(&p, &ChannelSelector::Name("y".into()), None),
            Err(Error::UnknownChannel(_))
        ));
        assert!(matches!(
            read_signal(&p, &ChannelSelector::Index(3), None),
            Err(Error::UnknownChannel(_))
        ));
        fs::write(&p, "t,x\n0,1\n0.01,abc\n").unwrap();
        assert!(matches!(
            read_signal(&p, &ChannelSelector::default(), None),
            Err(Error::Parse { line: 3, .. })
        ));
        fs::write(&p, "a,b\n0,1\n").unwrap();
        assert!(read_signal(&p, &ChannelSelector::default(), None).is_err());
        assert!(matches!(
            read_signal(
                dir.path().join("missing.csv"),
                &ChannelSelector::default(),
                None
            ),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn tfr_one_cell_file() {
        let dir = tmp();
        let p = dir.path().join("m.csv");
        let m = TfrMatrix::new(vec![0.5], vec![4.0], vec![2.25], TfrMethod::Dasar).unwrap();
        write_tfr(&m, &p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 2);
        assert_eq!(read_tfr(&p).unwrap(), m);
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let m = TfrMatrix::new(vec![0.0], vec![1.0], vec![1.0], TfrMethod::Stft).unwrap();
        assert!(matches!(
            write_tfr(&m, "/nonexistent-dir/x/y.csv"),
            Err(Error::Io { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn tfr_round_trip(
            rows in 1usize..6,
            cols in 1usize..6,
            seed in proptest::collection::vec(0.0f64..1e6, 36),
        ) {
            let dir = tmp();
            let p = dir.path().join("m.csv");
            let m = TfrMatrix::new(
                (0..rows).map(|i| 0.1 * i as f64 + 1.0 / 3.0).collect(),
                (0..cols).map(|j| 0.7 * j as f64 + 0.05).collect(),
                (0..rows * cols).map(|i| seed[i] / 7.0).collect(),
                TfrMethod::Wavelet,
            ).unwrap();
            write_tfr(&m, &p).unwrap();
            prop_assert_eq!(read_tfr(&p).unwrap(), m);
        }
    }

    #[test]
    fn tracks_round_trip_and_empty() {
        let dir = tmp();
        let p = dir.path().join("t.csv");
        write_tracks(&[], &p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().nth(1), Some(TRACK_COLUMNS.join(",").as_str()));
        assert_eq!(text.lines().count(), 2);
        assert!(read_tracks(&p).unwrap().is_empty());

        let rows = vec![
            ComponentTrack {
                level: 5,
                segment_index: 3,
                time_span_s: (5.625, 7.5),
                omega_star_hz: 4.00390625,
                tau: 3.25,
                sigma2: 1e-7 / 3.0,
            },
            ComponentTrack {
                level: 5,
                segment_index: 4,
                time_span_s: (7.5, 9.375),
                omega_star_hz: 4.6,
                tau: -0.25,
                sigma2: 0.0,
            },
        ];
        write_tracks(&rows, &p).unwrap();
        assert_eq!(read_tracks(&p).unwrap(), rows);
    }

    #[test]
    fn schedule_round_trip() {
        let dir = tmp();
        let p = dir.path().join("s.csv");
        let sched = vec![
            (0.0, 7.0, Condition::Task),
            (7.0, 14.0, Condition::Baseline),
        ];
        write_schedule(&sched, &p).unwrap();
        assert_eq!(read_schedule(&p).unwrap(), sched);
        fs::write(&p, "0,7,rest\n").unwrap();
        assert!(read_schedule(&p).is_err());
    }

    #[test]
    fn sibling_paths() {
        assert_eq!(
            sibling(Path::new("out/run"), "tfr.csv"),
            PathBuf::from("out/run_tfr.csv")
        );
    }
}
