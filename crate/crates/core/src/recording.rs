//! Demonstration data model, time synchronization and the on-disk archive.
//!
//! Raw sensor streams arrive with their own clocks and rates. [`synchronize`]
//! resamples them onto one uniform grid covering only the interval where every
//! stream has data, producing a [`Recording`]. Recordings persist as a
//! directory archive:
//!
//! ```text
//! <archive>/manifest.json
//! <archive>/streams/<name>.csv     header `t,c0,c1,...`
//! ```
//!
//! Floats are written in shortest round-trip form so `read_archive(write_archive(r)) == r`
//! bit for bit.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default resampling period for demonstrations.
pub const DEFAULT_DT: f64 = 0.01;

/// Units tag marking a 4-component `(w, x, y, z)` unit quaternion stream.
pub const QUATERNION_UNITS: &str = "quat";

/// Archive format version understood by this crate.
pub const ARCHIVE_VERSION: &str = "1";

const QUAT_NORM_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum RecordingError {
    #[error("no streams to synchronize")]
    EmptyStreams,
    #[error("resampling period must be positive and finite, got {0}")]
    InvalidDt(f64),
    #[error("stream `{stream}`: {reason}")]
    MalformedStream { stream: String, reason: String },
    #[error("stream `{stream}`: timestamps not strictly increasing at index {index}")]
    NonIncreasing { stream: String, index: usize },
    #[error("no temporal overlap between streams")]
    NoOverlap,
    #[error("common overlap of {overlap} s is shorter than two periods of {dt} s")]
    OverlapTooShort { overlap: f64, dt: f64 },
    #[error("archive manifest missing at {0}")]
    MissingManifest(PathBuf),
    #[error("unsupported archive version \"{0}\"")]
    UnsupportedVersion(String),
    #[error("stream `{stream}`: {reason}")]
    Mismatch { stream: String, reason: String },
    #[error("recording is invalid: {0}")]
    Invalid(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("manifest parse error: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T, E = RecordingError> = std::result::Result<T, E>;

/// A timestamped stream as captured, before synchronization.
#[derive(Debug, Clone, PartialEq)]
pub struct RawStream {
    pub name: String,
    pub units: String,
    pub timestamps: Vec<f64>,
    pub samples: Vec<Vec<f64>>,
}

impl RawStream {
    pub fn new(name: impl Into<String>, units: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            units: units.into(),
            timestamps: Vec::new(),
            samples: Vec::new(),
        }
    }

    pub fn push(&mut self, t: f64, sample: Vec<f64>) {
        self.timestamps.push(t);
        self.samples.push(sample);
    }

    fn check(&self) -> Result<usize> {
        let malformed = |reason: String| RecordingError::MalformedStream {
            stream: self.name.clone(),
            reason,
        };
        if self.timestamps.len() != self.samples.len() {
            return Err(malformed(format!(
                "{} timestamps but {} samples",
                self.timestamps.len(),
                self.samples.len()
            )));
        }
        if self.timestamps.is_empty() {
            return Err(malformed("stream is empty".into()));
        }
        let dims = self.samples[0].len();
        if dims == 0 {
            return Err(malformed("zero-dimensional samples".into()));
        }
        if let Some(i) = self.samples.iter().position(|s| s.len() != dims) {
            return Err(malformed(format!(
                "sample {i} has {} components, expected {dims}",
                self.samples[i].len()
            )));
        }
        for (i, w) in self.timestamps.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(RecordingError::NonIncreasing {
                    stream: self.name.clone(),
                    index: i + 1,
                });
            }
        }
        if self.timestamps.iter().any(|t| !t.is_finite()) {
            return Err(malformed("non-finite timestamp".into()));
        }
        Ok(dims)
    }
}

/// A uniform-rate channel inside a [`Recording`], stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Stream {
    pub name: String,
    pub units: String,
    pub dims: usize,
    pub data: Vec<f64>,
}

impl Stream {
    pub fn from_rows(name: impl Into<String>, units: impl Into<String>, rows: &[Vec<f64>]) -> Self {
        let dims = rows.first().map_or(0, Vec::len);
        Self {
            name: name.into(),
            units: units.into(),
            dims,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    /// Number of complete rows held.
    pub fn frames(&self) -> usize {
        if self.dims == 0 {
            0
        } else {
            self.data.len() / self.dims
        }
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.dims..(k + 1) * self.dims]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dims.max(1))
    }

    pub fn is_quaternion(&self) -> bool {
        self.units == QUATERNION_UNITS
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Scripted,
    Teleop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub task: String,
    pub created: String,
    pub source: Source,
}

impl Metadata {
    pub fn new(task: impl Into<String>, source: Source) -> Self {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            task: task.into(),
            created: format!("unix:{secs}"),
            source,
        }
    }
}

/// Time-synchronized demonstration: every stream sampled at `t0 + k·dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub dt: f64,
    pub t0: f64,
    pub frames: usize,
    pub streams: Vec<Stream>,
    pub metadata: Metadata,
}

impl Recording {
    /// Builds a recording and rejects it if [`validate`] reports anything.
    pub fn new(dt: f64, t0: f64, frames: usize, streams: Vec<Stream>, metadata: Metadata) -> Result<Self> {
        let rec = Self {
            dt,
            t0,
            frames,
            streams,
            metadata,
        };
        match validate(&rec).first() {
            None => Ok(rec),
            Some(d) => Err(RecordingError::Invalid(d.to_string())),
        }
    }

    /// Grid time of frame `k`: `k·dt` first, then `t0` added.
    pub fn time(&self, k: usize) -> f64 {
        grid_time(self.t0, self.dt, k)
    }

    pub fn duration(&self) -> f64 {
        (self.frames.saturating_sub(1)) as f64 * self.dt
    }

    pub fn stream(&self, name: &str) -> Option<&Stream> {
        self.streams.iter().find(|s| s.name == name)
    }
}

fn grid_time(t0: f64, dt: f64, k: usize) -> f64 {
    let offset = k as f64 * dt;
    t0 + offset
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    PositiveDt,
    MinFrames,
    FrameCount,
    UniformDimension,
    UniqueName,
    Finite,
    UnitQuaternion,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::PositiveDt => "dt must be positive and finite",
            Rule::MinFrames => "at least two frames required",
            Rule::FrameCount => "stream frame count must equal recording frames",
            Rule::UniformDimension => "stream dimension must be positive",
            Rule::UniqueName => "stream names must be unique",
            Rule::Finite => "samples must be finite",
            Rule::UnitQuaternion => "quaternion must have unit norm",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub stream: Option<String>,
    pub frame: Option<usize>,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(s) = &self.stream {
            write!(f, "stream `{s}`")?;
        } else {
            write!(f, "recording")?;
        }
        if let Some(k) = self.frame {
            write!(f, " frame {k}")?;
        }
        write!(f, ": {} ({})", self.rule, self.detail)
    }
}

/// Checks every [`Recording`] invariant. Empty output means the recording is valid.
pub fn validate(rec: &Recording) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let global = |rule, detail: String| Diagnostic {
        stream: None,
        frame: None,
        rule,
        detail,
    };
    if !(rec.dt > 0.0 && rec.dt.is_finite()) {
        out.push(global(Rule::PositiveDt, format!("dt = {}", rec.dt)));
    }
    if rec.frames < 2 {
        out.push(global(Rule::MinFrames, format!("frames = {}", rec.frames)));
    }
    for (i, s) in rec.streams.iter().enumerate() {
        let diag = |frame, rule, detail: String| Diagnostic {
            stream: Some(s.name.clone()),
            frame,
            rule,
            detail,
        };
        if rec.streams[..i].iter().any(|o| o.name == s.name) {
            out.push(diag(None, Rule::UniqueName, "duplicate name".into()));
        }
        if s.dims == 0 {
            out.push(diag(None, Rule::UniformDimension, "dims = 0".into()));
            continue;
        }
        if s.data.len() != rec.frames * s.dims {
            out.push(diag(
                None,
                Rule::FrameCount,
                format!(
                    "{} values hold {} frames of {} dims, expected {} frames",
                    s.data.len(),
                    s.data.len() as f64 / s.dims as f64,
                    s.dims,
                    rec.frames
                ),
            ));
        }
        for (k, row) in s.rows().enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                out.push(diag(Some(k), Rule::Finite, format!("{row:?}")));
            } else if s.is_quaternion() {
                let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                if s.dims != 4 || (norm - 1.0).abs() > QUAT_NORM_TOL {
                    out.push(diag(Some(k), Rule::UnitQuaternion, format!("norm = {norm}")));
                }
            }
        }
    }
    out
}

/// Resamples raw streams onto the common grid `t0 + k·dt`, where `t0` is the
/// latest stream start and the grid stops at the earliest stream end.
///
/// Components are interpolated linearly. Quaternion streams use normalized
/// linear interpolation after aligning hemispheres.
pub fn synchronize(raw: &[RawStream], dt: f64, metadata: Metadata) -> Result<Recording> {
    if raw.is_empty() {
        return Err(RecordingError::EmptyStreams);
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(RecordingError::InvalidDt(dt));
    }
    let dims: Vec<usize> = raw.iter().map(RawStream::check).collect::<Result<_>>()?;
    let t0 = raw
        .iter()
        .map(|s| s.timestamps[0])
        .fold(f64::NEG_INFINITY, f64::max);
    let t_end = raw
        .iter()
        .map(|s| *s.timestamps.last().unwrap())
        .fold(f64::INFINITY, f64::min);
    if t_end < t0 {
        return Err(RecordingError::NoOverlap);
    }
    let overlap = t_end - t0;
    // relative slack so an overlap of exactly n·dt yields n+1 frames
    let span = overlap / dt * (1.0 + 1e-12) + 1e-9;
    if span < 2.0 {
        return Err(RecordingError::OverlapTooShort { overlap, dt });
    }
    let frames = span.floor() as usize + 1;

    let streams = raw
        .iter()
        .zip(dims)
        .map(|(s, dims)| {
            let quat = s.units == QUATERNION_UNITS;
            let mut data = Vec::with_capacity(frames * dims);
            for k in 0..frames {
                let t = grid_time(t0, dt, k);
                data.extend(sample_at(s, t, quat));
            }
            Stream {
                name: s.name.clone(),
                units: s.units.clone(),
                dims,
                data,
            }
        })
        .collect();

    Ok(Recording {
        dt,
        t0,
        frames,
        streams,
        metadata,
    })
}

/// Piecewise-linear evaluation, clamped to the stream's end points.
fn sample_at(s: &RawStream, t: f64, quat: bool) -> Vec<f64> {
    let ts = &s.timestamps;
    // first index with timestamp > t
    let hi = ts.partition_point(|&x| x <= t);
    if hi == 0 {
        return s.samples[0].clone();
    }
    if hi == ts.len() {
        return s.samples[ts.len() - 1].clone();
    }
    let lo = hi - 1;
    let w = (t - ts[lo]) / (ts[hi] - ts[lo]);
    let a = &s.samples[lo];
    if w == 0.0 {
        return a.clone();
    }
    let b = &s.samples[hi];
    if !quat {
        return a.iter().zip(b).map(|(&a, &b)| a + w * (b - a)).collect();
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let sign = if dot < 0.0 { -1.0 } else { 1.0 };
    let mut q: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(&a, &b)| a + w * (sign * b - a))
        .collect();
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    q.iter_mut().for_each(|v| *v /= n);
    q
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    version: String,
    dt: f64,
    frames: usize,
    t0: f64,
    streams: Vec<ManifestStream>,
    metadata: Metadata,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ManifestStream {
    name: String,
    dims: usize,
    units: String,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RecordingError + '_ {
    move |source| RecordingError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> RecordingError + '_ {
    move |source| RecordingError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn stream_file(root: &Path, name: &str) -> PathBuf {
    root.join("streams").join(format!("{name}.csv"))
}

fn check_stream_name(name: &str) -> Result<()> {
    let ok = !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
    if ok {
        Ok(())
    } else {
        Err(RecordingError::Mismatch {
            stream: name.to_string(),
            reason: "stream names may only contain [A-Za-z0-9_-]".into(),
        })
    }
}

/// Writes `rec` as a directory archive at `path`, creating it if needed.
pub fn write_archive(rec: &Recording, path: &Path) -> Result<()> {
    if let Some(d) = validate(rec).first() {
        return Err(RecordingError::Invalid(d.to_string()));
    }
    for s in &rec.streams {
        check_stream_name(&s.name)?;
    }
    let streams_dir = path.join("streams");
    fs::create_dir_all(&streams_dir).map_err(io_err(&streams_dir))?;

    for s in &rec.streams {
        let file = stream_file(path, &s.name);
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&file)
            .map_err(csv_err(&file))?;
        let mut header = vec!["t".to_string()];
        header.extend((0..s.dims).map(|i| format!("c{i}")));
        w.write_record(&header).map_err(csv_err(&file))?;
        let mut row = Vec::with_capacity(s.dims + 1);
        for k in 0..rec.frames {
            row.clear();
            row.push(rec.time(k));
            row.extend_from_slice(s.row(k));
            w.serialize(&row).map_err(csv_err(&file))?;
        }
        w.flush().map_err(io_err(&file))?;
    }

    let manifest = Manifest {
        version: ARCHIVE_VERSION.to_string(),
        dt: rec.dt,
        frames: rec.frames,
        t0: rec.t0,
        streams: rec
            .streams
            .iter()
            .map(|s| ManifestStream {
                name: s.name.clone(),
                dims: s.dims,
                units: s.units.clone(),
            })
            .collect(),
        metadata: rec.metadata.clone(),
    };
    let file = path.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(&file, text + "\n").map_err(io_err(&file))
}

/// Reads and validates a directory archive written by [`write_archive`].
pub fn read_archive(path: &Path) -> Result<Recording> {
    let manifest_path = path.join("manifest.json");
    if !manifest_path.is_file() {
        return Err(RecordingError::MissingManifest(manifest_path));
    }
    let text = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    match value.get("version") {
        Some(serde_json::Value::String(v)) if v == ARCHIVE_VERSION => {}
        Some(serde_json::Value::String(v)) => return Err(RecordingError::UnsupportedVersion(v.clone())),
        Some(other) => return Err(RecordingError::UnsupportedVersion(other.to_string())),
        None => return Err(RecordingError::UnsupportedVersion("<missing>".into())),
    }
    let manifest: Manifest = serde_json::from_value(value)?;

    let mut streams = Vec::with_capacity(manifest.streams.len());
    for ms in &manifest.streams {
        check_stream_name(&ms.name)?;
        let mismatch = |reason: String| RecordingError::Mismatch {
            stream: ms.name.clone(),
            reason,
        };
        let file = stream_file(path, &ms.name);
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(&file)
            .map_err(csv_err(&file))?;
        let header = r.headers().map_err(csv_err(&file))?.clone();
        let expected: Vec<String> = std::iter::once("t".to_string())
            .chain((0..ms.dims).map(|i| format!("c{i}")))
            .collect();
        if header.iter().ne(expected.iter().map(String::as_str)) {
            return Err(mismatch(format!(
                "header {:?} does not match {} declared dims",
                header.iter().collect::<Vec<_>>(),
                ms.dims
            )));
        }
        let mut data = Vec::with_capacity(manifest.frames * ms.dims);
        let mut rows = 0usize;
        for rec in r.records() {
            let rec = rec.map_err(csv_err(&file))?;
            if rec.len() != ms.dims + 1 {
                return Err(mismatch(format!(
                    "row {rows} has {} columns, expected {}",
                    rec.len(),
                    ms.dims + 1
                )));
            }
            for (j, field) in rec.iter().enumerate().skip(1) {
                let v: f64 = field
                    .parse()
                    .map_err(|_| mismatch(format!("row {rows} column {j}: not a number: {field:?}")))?;
                data.push(v);
            }
            rows += 1;
        }
        if rows != manifest.frames {
            return Err(mismatch(format!(
                "manifest declares {} frames but file has {rows} rows",
                manifest.frames
            )));
        }
        streams.push(Stream {
            name: ms.name.clone(),
            units: ms.units.clone(),
            dims: ms.dims,
            data,
        });
    }

    Recording::new(manifest.dt, manifest.t0, manifest.frames, streams, manifest.metadata)
}
