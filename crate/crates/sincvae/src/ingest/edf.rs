//! EDF reader and writer.
//!
//! The container is a 256-byte fixed header, 256 bytes of per-signal
//! header fields (grouped field-by-field, not signal-by-signal), and
//! then `record_count` data records of little-endian i16 samples.
//! Physical values are recovered with the declared affine map
//! `(digital - digital_min) * (physical_max - physical_min) /
//! (digital_max - digital_min) + physical_min`.
//!
//! The writer emits canonical field formatting, so decode-encode is a
//! fixed point after one cycle: re-encoding a file we wrote reproduces
//! it byte for byte. EDF+ discontinuous recordings (`EDF+D`) and
//! unknown-length files (record count -1) are rejected outright.

use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::signal::TimeSeriesRecording;
use crate::tensor::Real;

const DIG_MIN: i32 = -32768;
const DIG_MAX: i32 = 32767;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EdfSignal {
    pub label: String,
    pub transducer: String,
    pub physical_dimension: String,
    pub physical_min: f64,
    pub physical_max: f64,
    pub digital_min: i32,
    pub digital_max: i32,
    pub prefiltering: String,
    pub samples_per_record: usize,
    pub reserved: String,
}

impl EdfSignal {
    pub fn sampling_rate(&self, record_duration_s: f64) -> f64 {
        self.samples_per_record as f64 / record_duration_s
    }

    fn decode(&self, digital: i16) -> f64 {
        let span_d = (self.digital_max - self.digital_min) as f64;
        let span_p = self.physical_max - self.physical_min;
        (digital as f64 - self.digital_min as f64) * span_p / span_d + self.physical_min
    }

    fn encode(&self, physical: f64) -> i16 {
        let span_d = (self.digital_max - self.digital_min) as f64;
        let span_p = self.physical_max - self.physical_min;
        let d = (physical - self.physical_min) * span_d / span_p + self.digital_min as f64;
        d.round().clamp(self.digital_min as f64, self.digital_max as f64) as i16
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EdfHeader {
    pub version: String,
    pub patient_id: String,
    pub recording_id: String,
    pub start_date: String,
    pub start_time: String,
    pub header_bytes: usize,
    pub reserved: String,
    pub record_count: usize,
    pub record_duration_s: f64,
    pub signals: Vec<EdfSignal>,
}

impl EdfHeader {
    pub fn samples_per_record_total(&self) -> usize {
        self.signals.iter().map(|s| s.samples_per_record).sum()
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "version {:?}  patient {:?}  recording {:?}\n",
            self.version, self.patient_id, self.recording_id
        ));
        out.push_str(&format!(
            "start {} {}  records {} x {} s  signals {}\n",
            self.start_date,
            self.start_time,
            self.record_count,
            self.record_duration_s,
            self.signals.len()
        ));
        out.push_str(&format!(
            "{:<16} {:>10} {:>12} {:>12} {:>8} {:>8} {:>8}\n",
            "label", "samples/rec", "phys min", "phys max", "dig min", "dig max", "rate"
        ));
        for s in &self.signals {
            out.push_str(&format!(
                "{:<16} {:>10} {:>12} {:>12} {:>8} {:>8} {:>8}\n",
                s.label,
                s.samples_per_record,
                s.physical_min,
                s.physical_max,
                s.digital_min,
                s.digital_max,
                s.sampling_rate(self.record_duration_s)
            ));
        }
        out
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn field(&mut self, n: usize, what: &str) -> Result<String> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Malformed(format!(
                "{}: truncated EDF: header field {what} runs past end of file",
                self.path.display()
            )));
        }
        let raw = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        if !raw.is_ascii() {
            return Err(Error::Malformed(format!(
                "{}: non-ASCII bytes in EDF header field {what}",
                self.path.display()
            )));
        }
        Ok(std::str::from_utf8(raw).expect("ascii").trim().to_string())
    }

    fn int(&mut self, n: usize, what: &str) -> Result<i64> {
        let s = self.field(n, what)?;
        s.parse().map_err(|_| {
            Error::Malformed(format!(
                "{}: EDF field {what} is not an integer: {s:?}",
                self.path.display()
            ))
        })
    }

    fn float(&mut self, n: usize, what: &str) -> Result<f64> {
        let s = self.field(n, what)?;
        let v: f64 = s.parse().map_err(|_| {
            Error::Malformed(format!(
                "{}: EDF field {what} is not a number: {s:?}",
                self.path.display()
            ))
        })?;
        if !v.is_finite() {
            return Err(Error::Malformed(format!(
                "{}: EDF field {what} is not finite",
                self.path.display()
            )));
        }
        Ok(v)
    }
}

fn parse_header(buf: &[u8], path: &Path) -> Result<EdfHeader> {
    if buf.len() < 256 {
        return Err(Error::Malformed(format!(
            "{}: truncated EDF: {} bytes is shorter than the 256-byte header",
            path.display(),
            buf.len()
        )));
    }
    let mut c = Cursor { buf, pos: 0, path };
    let version = c.field(8, "version")?;
    let patient_id = c.field(80, "patient id")?;
    let recording_id = c.field(80, "recording id")?;
    let start_date = c.field(8, "start date")?;
    let start_time = c.field(8, "start time")?;
    let header_bytes = c.int(8, "header bytes")?;
    let reserved = c.field(44, "reserved")?;
    let record_count = c.int(8, "record count")?;
    let record_duration_s = c.float(8, "record duration")?;
    let signal_count = c.int(4, "signal count")?;

    if reserved.starts_with("EDF+D") {
        return Err(Error::Malformed(format!(
            "{}: discontinuous EDF+ (EDF+D) is unsupported",
            path.display()
        )));
    }
    if signal_count < 1 {
        return Err(Error::Malformed(format!(
            "{}: EDF declares {signal_count} signals",
            path.display()
        )));
    }
    let ns = signal_count as usize;
    let expected_header = 256 + 256 * ns;
    if header_bytes != expected_header as i64 {
        return Err(Error::Malformed(format!(
            "{}: header arithmetic mismatch: declares {header_bytes} header bytes, \
             256 + 256 x {ns} signals = {expected_header}",
            path.display()
        )));
    }
    if record_count == -1 {
        return Err(Error::Malformed(format!(
            "{}: unknown-length EDF (record count -1) is unsupported",
            path.display()
        )));
    }
    if record_count == 0 {
        return Err(Error::Malformed(format!(
            "{}: empty EDF: record count 0",
            path.display()
        )));
    }
    if record_count < 0 {
        return Err(Error::Malformed(format!(
            "{}: invalid EDF record count {record_count}",
            path.display()
        )));
    }
    if !(record_duration_s > 0.0) {
        return Err(Error::Malformed(format!(
            "{}: EDF record duration must be positive, got {record_duration_s}",
            path.display()
        )));
    }
    if buf.len() < expected_header {
        return Err(Error::Malformed(format!(
            "{}: truncated EDF: signal header needs {expected_header} bytes, file has {}",
            path.display(),
            buf.len()
        )));
    }

    // signal header fields are grouped per field, not per signal
    let mut labels = Vec::with_capacity(ns);
    for i in 0..ns {
        labels.push(c.field(16, &format!("label[{i}]"))?);
    }
    let mut transducers = Vec::with_capacity(ns);
    for i in 0..ns {
        transducers.push(c.field(80, &format!("transducer[{i}]"))?);
    }
    let mut dims = Vec::with_capacity(ns);
    for i in 0..ns {
        dims.push(c.field(8, &format!("physical dimension[{i}]"))?);
    }
    let mut pmins = Vec::with_capacity(ns);
    for i in 0..ns {
        pmins.push(c.float(8, &format!("physical min[{i}]"))?);
    }
    let mut pmaxs = Vec::with_capacity(ns);
    for i in 0..ns {
        pmaxs.push(c.float(8, &format!("physical max[{i}]"))?);
    }
    let mut dmins = Vec::with_capacity(ns);
    for i in 0..ns {
        dmins.push(c.int(8, &format!("digital min[{i}]"))?);
    }
    let mut dmaxs = Vec::with_capacity(ns);
    for i in 0..ns {
        dmaxs.push(c.int(8, &format!("digital max[{i}]"))?);
    }
    let mut prefilters = Vec::with_capacity(ns);
    for i in 0..ns {
        prefilters.push(c.field(80, &format!("prefiltering[{i}]"))?);
    }
    let mut sprs = Vec::with_capacity(ns);
    for i in 0..ns {
        sprs.push(c.int(8, &format!("samples per record[{i}]"))?);
    }
    let mut reserveds = Vec::with_capacity(ns);
    for i in 0..ns {
        reserveds.push(c.field(32, &format!("signal reserved[{i}]"))?);
    }

    let mut signals = Vec::with_capacity(ns);
    for i in 0..ns {
        if dmaxs[i] <= dmins[i] {
            return Err(Error::Malformed(format!(
                "{}: signal {i} digital range [{}, {}] is not increasing",
                path.display(),
                dmins[i],
                dmaxs[i]
            )));
        }
        if dmins[i] < DIG_MIN as i64 || dmaxs[i] > DIG_MAX as i64 {
            return Err(Error::Malformed(format!(
                "{}: signal {i} digital range [{}, {}] exceeds 16 bits",
                path.display(),
                dmins[i],
                dmaxs[i]
            )));
        }
        if pmaxs[i] == pmins[i] {
            return Err(Error::Malformed(format!(
                "{}: signal {i} has an empty physical range ({} to {})",
                path.display(),
                pmins[i],
                pmaxs[i]
            )));
        }
        if sprs[i] < 1 {
            return Err(Error::Malformed(format!(
                "{}: signal {i} declares {} samples per record",
                path.display(),
                sprs[i]
            )));
        }
        signals.push(EdfSignal {
            label: labels[i].clone(),
            transducer: transducers[i].clone(),
            physical_dimension: dims[i].clone(),
            physical_min: pmins[i],
            physical_max: pmaxs[i],
            digital_min: dmins[i] as i32,
            digital_max: dmaxs[i] as i32,
            prefiltering: prefilters[i].clone(),
            samples_per_record: sprs[i] as usize,
            reserved: reserveds[i].clone(),
        });
    }

    Ok(EdfHeader {
        version,
        patient_id,
        recording_id,
        start_date,
        start_time,
        header_bytes: expected_header,
        reserved,
        record_count: record_count as usize,
        record_duration_s,
        signals,
    })
}

pub fn read_edf_header(path: &Path) -> Result<EdfHeader> {
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_header(&buf, path)
}

/// Read an EDF file into a recording, optionally keeping only the
/// named channels (all selected channels must share one sampling rate).
pub fn read_edf(path: &Path, channels: Option<&[String]>) -> Result<TimeSeriesRecording> {
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let header = parse_header(&buf, path)?;

    let picked: Vec<usize> = match channels {
        None => (0..header.signals.len()).collect(),
        Some(names) => {
            let mut idx = Vec::with_capacity(names.len());
            for name in names {
                let i = header
                    .signals
                    .iter()
                    .position(|s| s.label == *name)
                    .ok_or_else(|| {
                        Error::Config(format!(
                            "{}: channel {name:?} not present in EDF",
                            path.display()
                        ))
                    })?;
                idx.push(i);
            }
            idx
        }
    };
    if picked.is_empty() {
        return Err(Error::Config(format!(
            "{}: no channels selected",
            path.display()
        )));
    }
    let spr = header.signals[picked[0]].samples_per_record;
    for &i in &picked {
        if header.signals[i].samples_per_record != spr {
            return Err(Error::Config(format!(
                "{}: selected channels mix sampling rates ({} vs {} samples per record)",
                path.display(),
                spr,
                header.signals[i].samples_per_record
            )));
        }
    }

    let record_bytes = 2 * header.samples_per_record_total();
    let expected = header.header_bytes + header.record_count * record_bytes;
    if buf.len() < expected {
        return Err(Error::Malformed(format!(
            "{}: truncated EDF: expected {expected} bytes, found {}",
            path.display(),
            buf.len()
        )));
    }
    if buf.len() > expected {
        return Err(Error::Malformed(format!(
            "{}: {} trailing bytes after the last EDF record",
            path.display(),
            buf.len() - expected
        )));
    }

    let mut out: Vec<Vec<Real>> =
        vec![Vec::with_capacity(header.record_count * spr); picked.len()];
    for r in 0..header.record_count {
        let mut offset = header.header_bytes + r * record_bytes;
        // walk all signals to keep offsets right, copy only the picked
        for (i, sig) in header.signals.iter().enumerate() {
            if let Some(slot) = picked.iter().position(|&p| p == i) {
                for k in 0..sig.samples_per_record {
                    let lo = offset + 2 * k;
                    let digital = i16::from_le_bytes([buf[lo], buf[lo + 1]]);
                    out[slot].push(sig.decode(digital) as Real);
                }
            }
            offset += 2 * sig.samples_per_record;
        }
    }

    let names: Vec<String> = picked
        .iter()
        .map(|&i| header.signals[i].label.clone())
        .collect();
    let fs = spr as f64 / header.record_duration_s;
    let source = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    TimeSeriesRecording::new(out, fs, names, source)
}

#[derive(Clone, Debug)]
pub struct EdfWriteOptions {
    pub physical_min: f64,
    pub physical_max: f64,
    pub record_duration_s: f64,
    pub patient_id: String,
    pub recording_id: String,
    pub start_date: String,
    pub start_time: String,
}

impl Default for EdfWriteOptions {
    fn default() -> Self {
        Self {
            physical_min: -1000.0,
            physical_max: 1000.0,
            record_duration_s: 1.0,
            patient_id: "X X X X".into(),
            recording_id: "Startdate X X X X".into(),
            start_date: "01.01.00".into(),
            start_time: "00.00.00".into(),
        }
    }
}

impl EdfWriteOptions {
    /// Physical range spanning the recording, padded outward by one
    /// unit so every sample is strictly inside it.
    pub fn covering(rec: &TimeSeriesRecording) -> Self {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for ch in rec.channels() {
            for &v in ch {
                lo = lo.min(v as f64);
                hi = hi.max(v as f64);
            }
        }
        Self {
            physical_min: lo.floor() - 1.0,
            physical_max: hi.ceil() + 1.0,
            ..Self::default()
        }
    }
}

/// Canonical numeric rendering for 8-byte header fields: integers
/// print without a decimal point so rewrites stay byte-stable.
fn fmt_num(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e8 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

fn padded(s: &str, width: usize, what: &str) -> Result<Vec<u8>> {
    if !s.is_ascii() {
        return Err(Error::Config(format!("EDF field {what} must be ASCII: {s:?}")));
    }
    if s.len() > width {
        return Err(Error::Config(format!(
            "EDF field {what} is {} bytes, limit {width}: {s:?}",
            s.len()
        )));
    }
    let mut out = s.as_bytes().to_vec();
    out.resize(width, b' ');
    Ok(out)
}

pub fn write_edf(path: &Path, rec: &TimeSeriesRecording, opts: &EdfWriteOptions) -> Result<()> {
    if !(opts.physical_max > opts.physical_min)
        || !opts.physical_min.is_finite()
        || !opts.physical_max.is_finite()
    {
        return Err(Error::Config(format!(
            "EDF physical range [{}, {}] is not increasing",
            opts.physical_min, opts.physical_max
        )));
    }
    if !(opts.record_duration_s > 0.0) {
        return Err(Error::Config(format!(
            "EDF record duration must be positive, got {}",
            opts.record_duration_s
        )));
    }
    let spr_f = rec.sampling_rate() * opts.record_duration_s;
    let spr = spr_f.round();
    if (spr_f - spr).abs() > 1e-9 || spr < 1.0 {
        return Err(Error::Config(format!(
            "record duration {} s at {} Hz gives a non-integral {} samples per record",
            opts.record_duration_s,
            rec.sampling_rate(),
            spr_f
        )));
    }
    let spr = spr as usize;
    let n = rec.samples_per_channel();
    if n == 0 || n % spr != 0 {
        return Err(Error::Config(format!(
            "{n} samples per channel do not divide into {spr}-sample records"
        )));
    }
    let record_count = n / spr;

    for (ch, name) in rec.channels().iter().zip(rec.channel_names()) {
        for (i, &v) in ch.iter().enumerate() {
            let v = v as f64;
            if v < opts.physical_min || v > opts.physical_max {
                return Err(Error::Config(format!(
                    "channel {name:?} sample {i} ({v}) is outside the declared \
                     physical range [{}, {}]",
                    opts.physical_min, opts.physical_max
                )));
            }
        }
    }

    let signals: Vec<EdfSignal> = rec
        .channel_names()
        .iter()
        .map(|label| EdfSignal {
            label: label.clone(),
            transducer: String::new(),
            physical_dimension: "uV".into(),
            physical_min: opts.physical_min,
            physical_max: opts.physical_max,
            digital_min: DIG_MIN,
            digital_max: DIG_MAX,
            prefiltering: String::new(),
            samples_per_record: spr,
            reserved: String::new(),
        })
        .collect();
    let header = EdfHeader {
        version: "0".into(),
        patient_id: opts.patient_id.clone(),
        recording_id: opts.recording_id.clone(),
        start_date: opts.start_date.clone(),
        start_time: opts.start_time.clone(),
        header_bytes: 256 + 256 * signals.len(),
        reserved: String::new(),
        record_count,
        record_duration_s: opts.record_duration_s,
        signals,
    };
    write_edf_with_header(path, &header, rec)
}

/// Write a recording under an explicit header — the rewrite half of the
/// decode-encode fixed point. The header must agree with the recording.
pub fn write_edf_with_header(
    path: &Path,
    header: &EdfHeader,
    rec: &TimeSeriesRecording,
) -> Result<()> {
    if header.signals.len() != rec.channel_count() {
        return Err(Error::Config(format!(
            "EDF header declares {} signals for {} channels",
            header.signals.len(),
            rec.channel_count()
        )));
    }
    let n = rec.samples_per_channel();
    for sig in &header.signals {
        if sig.samples_per_record * header.record_count != n {
            return Err(Error::Config(format!(
                "signal {:?}: {} records x {} samples != {} channel samples",
                sig.label, header.record_count, sig.samples_per_record, n
            )));
        }
        if sig.digital_max <= sig.digital_min {
            return Err(Error::Config(format!(
                "signal {:?} digital range is not increasing",
                sig.label
            )));
        }
    }

    let mut bytes = Vec::with_capacity(header.header_bytes + 2 * n * header.signals.len());
    bytes.extend(padded(&header.version, 8, "version")?);
    bytes.extend(padded(&header.patient_id, 80, "patient id")?);
    bytes.extend(padded(&header.recording_id, 80, "recording id")?);
    bytes.extend(padded(&header.start_date, 8, "start date")?);
    bytes.extend(padded(&header.start_time, 8, "start time")?);
    bytes.extend(padded(&header.header_bytes.to_string(), 8, "header bytes")?);
    bytes.extend(padded(&header.reserved, 44, "reserved")?);
    bytes.extend(padded(&header.record_count.to_string(), 8, "record count")?);
    bytes.extend(padded(&fmt_num(header.record_duration_s), 8, "record duration")?);
    bytes.extend(padded(&header.signals.len().to_string(), 4, "signal count")?);
    for s in &header.signals {
        bytes.extend(padded(&s.label, 16, "label")?);
    }
    for s in &header.signals {
        bytes.extend(padded(&s.transducer, 80, "transducer")?);
    }
    for s in &header.signals {
        bytes.extend(padded(&s.physical_dimension, 8, "physical dimension")?);
    }
    for s in &header.signals {
        bytes.extend(padded(&fmt_num(s.physical_min), 8, "physical min")?);
    }
    for s in &header.signals {
        bytes.extend(padded(&fmt_num(s.physical_max), 8, "physical max")?);
    }
    for s in &header.signals {
        bytes.extend(padded(&s.digital_min.to_string(), 8, "digital min")?);
    }
    for s in &header.signals {
        bytes.extend(padded(&s.digital_max.to_string(), 8, "digital max")?);
    }
    for s in &header.signals {
        bytes.extend(padded(&s.prefiltering, 80, "prefiltering")?);
    }
    for s in &header.signals {
        bytes.extend(padded(&s.samples_per_record.to_string(), 8, "samples per record")?);
    }
    for s in &header.signals {
        bytes.extend(padded(&s.reserved, 32, "signal reserved")?);
    }
    debug_assert_eq!(bytes.len(), header.header_bytes);

    for r in 0..header.record_count {
        for (sig, ch) in header.signals.iter().zip(rec.channels()) {
            let start = r * sig.samples_per_record;
            for k in 0..sig.samples_per_record {
                let d = sig.encode(ch[start + k] as f64);
                bytes.extend_from_slice(&d.to_le_bytes());
            }
        }
    }

    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    w.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    Ok(())
}
