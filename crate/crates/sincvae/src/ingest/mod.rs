//! Dataset loaders: EDF recordings, plain-text single-channel segments,
//! seizure annotation CSVs, and a synthetic generator.

mod edf;
mod synth;

pub use edf::{read_edf, read_edf_header, write_edf, write_edf_with_header, EdfHeader,
              EdfSignal, EdfWriteOptions};
pub use synth::{synth_generate, BurstSpec, SynthSpec};

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::signal::TimeSeriesRecording;
use crate::tensor::Real;

/// Sampling rate of the plain-text single-channel corpus.
pub const BONN_SAMPLING_RATE: f64 = 173.61;

/// Read a directory of single-channel plain-text segments: one integer
/// sample per line, one file per segment. Files are taken in name order.
pub fn read_bonn(dir: &Path) -> Result<Vec<TimeSeriesRecording>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<std::path::PathBuf> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Error::Malformed(format!(
            "{}: no segment files found",
            dir.display()
        )));
    }
    let mut out = Vec::with_capacity(files.len());
    for path in files {
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut samples: Vec<Real> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                // tolerate a trailing blank line, nothing else
                if text.lines().skip(lineno + 1).any(|l| !l.trim().is_empty()) {
                    return Err(Error::Malformed(format!(
                        "{}:{}: blank line inside segment",
                        path.display(),
                        lineno + 1
                    )));
                }
                continue;
            }
            let v: i64 = line.parse().map_err(|_| {
                Error::Malformed(format!(
                    "{}:{}: expected an integer sample, got {line:?}",
                    path.display(),
                    lineno + 1
                ))
            })?;
            samples.push(v as Real);
        }
        if samples.is_empty() {
            return Err(Error::Malformed(format!(
                "{}: empty segment file",
                path.display()
            )));
        }
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        out.push(TimeSeriesRecording::single_channel(
            samples,
            BONN_SAMPLING_RATE,
            stem,
        )?);
    }
    Ok(out)
}

/// Seizure intervals for one track, in seconds from track start,
/// half-open `[start, end)`, sorted and non-overlapping.
#[derive(Clone, Debug, PartialEq)]
pub struct SeizureAnnotation {
    pub track_id: String,
    pub intervals: Vec<(f64, f64)>,
}

/// Read a `track_id,start_s,end_s` CSV into per-track annotations.
/// Tracks come back in id order with intervals sorted by onset.
pub fn read_annotations(path: &Path) -> Result<Vec<SeizureAnnotation>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        None => return Ok(Vec::new()),
        Some((_, header)) => {
            if header.trim() != "track_id,start_s,end_s" {
                return Err(Error::Malformed(format!(
                    "{}: expected header track_id,start_s,end_s, got {header:?}",
                    path.display()
                )));
            }
        }
    }
    let mut by_track: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for (lineno, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let (track, start, end) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some(t), Some(s), Some(e), None) => (t.trim(), s.trim(), e.trim()),
            _ => {
                return Err(Error::Malformed(format!(
                    "{}:{}: expected 3 comma-separated fields, got {line:?}",
                    path.display(),
                    lineno + 1
                )))
            }
        };
        if track.is_empty() {
            return Err(Error::Malformed(format!(
                "{}:{}: empty track id",
                path.display(),
                lineno + 1
            )));
        }
        let parse = |what: &str, s: &str| -> Result<f64> {
            let v: f64 = s.parse().map_err(|_| {
                Error::Malformed(format!(
                    "{}:{}: {what} is not a number: {s:?}",
                    path.display(),
                    lineno + 1
                ))
            })?;
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Malformed(format!(
                    "{}:{}: {what} must be finite and non-negative, got {s}",
                    path.display(),
                    lineno + 1
                )));
            }
            Ok(v)
        };
        let start = parse("start_s", start)?;
        let end = parse("end_s", end)?;
        if end <= start {
            return Err(Error::Malformed(format!(
                "{}:{}: interval end {end} not after start {start}",
                path.display(),
                lineno + 1
            )));
        }
        by_track.entry(track.to_string()).or_default().push((start, end));
    }
    let mut out = Vec::with_capacity(by_track.len());
    for (track_id, mut intervals) in by_track {
        intervals.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        for w in intervals.windows(2) {
            if w[1].0 < w[0].1 {
                return Err(Error::Malformed(format!(
                    "{}: track {track_id:?} has overlapping intervals \
                     [{}, {}) and [{}, {})",
                    path.display(),
                    w[0].0,
                    w[0].1,
                    w[1].0,
                    w[1].1
                )));
            }
        }
        out.push(SeizureAnnotation { track_id, intervals });
    }
    Ok(out)
}

pub fn write_annotations(path: &Path, annotations: &[SeizureAnnotation]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let mut emit = |s: String| w.write_all(s.as_bytes()).map_err(|e| Error::io(path, e));
    emit("track_id,start_s,end_s\n".into())?;
    for ann in annotations {
        for &(s, e) in &ann.intervals {
            emit(format!("{},{s},{e}\n", ann.track_id))?;
        }
    }
    Ok(())
}
