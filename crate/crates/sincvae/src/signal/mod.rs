//! Preprocessing: windowing, z-score normalization, and the fixed
//! zero-phase FIR pre-filters applied before model input.
//!
//! All operations are pure given explicit stats/seeds and safe to run
//! in parallel across recordings.

mod svws;

pub use svws::{read_svws, write_svws};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// Multichannel sampled signal in physical units.
#[derive(Clone, Debug)]
pub struct TimeSeriesRecording {
    channels: Vec<Vec<Real>>,
    sampling_rate: f64,
    channel_names: Vec<String>,
    source_id: String,
}

impl TimeSeriesRecording {
    pub fn new(
        channels: Vec<Vec<Real>>,
        sampling_rate: f64,
        channel_names: Vec<String>,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        if !(sampling_rate > 0.0) {
            return Err(Error::Config(format!(
                "recording: sampling_rate must be positive, got {sampling_rate}"
            )));
        }
        if channels.is_empty() {
            return Err(Error::Config("recording: no channels".into()));
        }
        let len = channels[0].len();
        if channels.iter().any(|c| c.len() != len) {
            return Err(Error::Config(
                "recording: channels have unequal lengths".into(),
            ));
        }
        if channel_names.len() != channels.len() {
            return Err(Error::Config(format!(
                "recording: {} channel names for {} channels",
                channel_names.len(),
                channels.len()
            )));
        }
        if channels.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(
                "recording: non-finite sample value".into(),
            ));
        }
        Ok(Self { channels, sampling_rate, channel_names, source_id: source_id.into() })
    }

    /// Single unnamed channel; convenience for tests and Bonn segments.
    pub fn single_channel(
        samples: Vec<Real>,
        sampling_rate: f64,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        Self::new(vec![samples], sampling_rate, vec!["ch0".into()], source_id)
    }

    pub fn channels(&self) -> &[Vec<Real>] {
        &self.channels
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn samples_per_channel(&self) -> usize {
        self.channels[0].len()
    }

    pub fn sampling_rate(&self) -> f64 {
        self.sampling_rate
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples_per_channel() as f64 / self.sampling_rate
    }

    /// Keep only the named channels, in the order given.
    pub fn select_channels(&self, names: &[String]) -> Result<Self> {
        let mut channels = Vec::with_capacity(names.len());
        for name in names {
            let idx = self
                .channel_names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| {
                    Error::Config(format!(
                        "recording {}: no channel named {name:?}",
                        self.source_id
                    ))
                })?;
            channels.push(self.channels[idx].clone());
        }
        Self::new(channels, self.sampling_rate, names.to_vec(), self.source_id.clone())
    }
}

/// Per-window ground-truth label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    NonSeizure,
    Seizure,
}

impl Label {
    pub fn to_byte(self) -> u8 {
        match self {
            Label::NonSeizure => 0,
            Label::Seizure => 1,
        }
    }

    pub fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(Label::NonSeizure),
            1 => Ok(Label::Seizure),
            _ => Err(Error::Malformed(format!("invalid label byte {b}"))),
        }
    }
}

/// Brain-activity phase tag relative to annotated seizure intervals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Interictal,
    Preictal,
    Ictal,
    Postictal,
}

impl Phase {
    pub fn to_byte(self) -> u8 {
        match self {
            Phase::Interictal => 0,
            Phase::Preictal => 1,
            Phase::Ictal => 2,
            Phase::Postictal => 3,
        }
    }

    pub fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(Phase::Interictal),
            1 => Ok(Phase::Preictal),
            2 => Ok(Phase::Ictal),
            3 => Ok(Phase::Postictal),
            _ => Err(Error::Malformed(format!("invalid phase byte {b}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Phase::Interictal => "interictal",
            Phase::Preictal => "preictal",
            Phase::Ictal => "ictal",
            Phase::Postictal => "postictal",
        }
    }
}

/// Fixed-length windows cut from one or more recordings: the model's
/// unit of input. Data layout is `[count, channels, window_len]`.
#[derive(Clone, Debug)]
pub struct WindowSet {
    data: Tensor,
    sampling_rate: f64,
    start_times: Vec<f64>,
    labels: Option<Vec<Label>>,
    phases: Option<Vec<Phase>>,
}

impl WindowSet {
    pub fn from_parts(
        data: Tensor,
        sampling_rate: f64,
        start_times: Vec<f64>,
        labels: Option<Vec<Label>>,
        phases: Option<Vec<Phase>>,
    ) -> Result<Self> {
        if data.rank() != 3 {
            return Err(Error::Config(format!(
                "window set: data must be [count, channels, window_len], got {:?}",
                data.shape()
            )));
        }
        let count = data.shape()[0];
        if start_times.len() != count {
            return Err(Error::Config(format!(
                "window set: {} start times for {count} windows",
                start_times.len()
            )));
        }
        if start_times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Config(
                "window set: start times must be non-decreasing".into(),
            ));
        }
        if let Some(l) = &labels {
            if l.len() != count {
                return Err(Error::Config(format!(
                    "window set: {} labels for {count} windows",
                    l.len()
                )));
            }
        }
        if let Some(p) = &phases {
            if p.len() != count {
                return Err(Error::Config(format!(
                    "window set: {} phase tags for {count} windows",
                    p.len()
                )));
            }
        }
        if !(sampling_rate > 0.0) {
            return Err(Error::Config(format!(
                "window set: sampling_rate must be positive, got {sampling_rate}"
            )));
        }
        Ok(Self { data, sampling_rate, start_times, labels, phases })
    }

    pub fn count(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn channel_count(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn window_len(&self) -> usize {
        self.data.shape()[2]
    }

    pub fn data(&self) -> &Tensor {
        &self.data
    }

    pub fn sampling_rate(&self) -> f64 {
        self.sampling_rate
    }

    pub fn start_times(&self) -> &[f64] {
        &self.start_times
    }

    pub fn labels(&self) -> Option<&[Label]> {
        self.labels.as_deref()
    }

    pub fn phases(&self) -> Option<&[Phase]> {
        self.phases.as_deref()
    }

    /// Flat `[channels, window_len]` view of window `i`.
    pub fn window(&self, i: usize) -> &[Real] {
        let row = self.channel_count() * self.window_len();
        &self.data.data()[i * row..(i + 1) * row]
    }

    pub fn set_labels(&mut self, labels: Vec<Label>) -> Result<()> {
        if labels.len() != self.count() {
            return Err(Error::Config(format!(
                "window set: {} labels for {} windows",
                labels.len(),
                self.count()
            )));
        }
        self.labels = Some(labels);
        Ok(())
    }

    pub fn set_phases(&mut self, phases: Vec<Phase>) -> Result<()> {
        if phases.len() != self.count() {
            return Err(Error::Config(format!(
                "window set: {} phase tags for {} windows",
                phases.len(),
                self.count()
            )));
        }
        self.phases = Some(phases);
        Ok(())
    }

    /// Stamp every window with the same label.
    pub fn with_label(mut self, label: Label) -> Self {
        self.labels = Some(vec![label; self.count()]);
        self
    }

    /// New set holding the windows at `indices`, which must be strictly
    /// increasing (preserves the start-time invariant).
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(
                "window subset: indices must be strictly increasing".into(),
            ));
        }
        if let Some(&last) = indices.last() {
            if last >= self.count() {
                return Err(Error::Config(format!(
                    "window subset: index {last} out of range for {} windows",
                    self.count()
                )));
            }
        }
        let row = self.channel_count() * self.window_len();
        let mut data = Vec::with_capacity(indices.len() * row);
        for &i in indices {
            data.extend_from_slice(self.window(i));
        }
        Ok(Self {
            data: Tensor::new(
                vec![indices.len(), self.channel_count(), self.window_len()],
                data,
            )?,
            sampling_rate: self.sampling_rate,
            start_times: indices.iter().map(|&i| self.start_times[i]).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
            phases: self
                .phases
                .as_ref()
                .map(|p| indices.iter().map(|&i| p[i]).collect()),
        })
    }

    /// Concatenate sets from separate tracks. Start times of each
    /// subsequent set are rebased past the previous set's span so the
    /// non-decreasing invariant holds across track boundaries.
    pub fn concat(sets: &[WindowSet]) -> Result<WindowSet> {
        let first = sets
            .first()
            .ok_or_else(|| Error::Config("window concat: no sets".into()))?;
        let (c, l, fs) = (first.channel_count(), first.window_len(), first.sampling_rate);
        let has_labels = first.labels.is_some();
        let has_phases = first.phases.is_some();
        let mut data = Vec::new();
        let mut starts = Vec::new();
        let mut labels = has_labels.then(Vec::new);
        let mut phases = has_phases.then(Vec::new);
        let mut offset = 0.0f64;
        for set in sets {
            if set.channel_count() != c || set.window_len() != l {
                return Err(Error::shape(
                    "window concat",
                    &[c, l],
                    &[set.channel_count(), set.window_len()],
                ));
            }
            if set.sampling_rate != fs {
                return Err(Error::Config(format!(
                    "window concat: sampling rates differ ({} vs {})",
                    fs, set.sampling_rate
                )));
            }
            if (set.labels.is_some(), set.phases.is_some()) != (has_labels, has_phases) {
                return Err(Error::Config(
                    "window concat: label/phase presence differs across sets".into(),
                ));
            }
            data.extend_from_slice(set.data.data());
            starts.extend(set.start_times.iter().map(|t| t + offset));
            if let (Some(acc), Some(l)) = (labels.as_mut(), set.labels.as_ref()) {
                acc.extend_from_slice(l);
            }
            if let (Some(acc), Some(p)) = (phases.as_mut(), set.phases.as_ref()) {
                acc.extend_from_slice(p);
            }
            if let Some(&last) = set.start_times.last() {
                offset += last + set.window_len() as f64 / fs;
            }
        }
        let count = starts.len();
        WindowSet::from_parts(
            Tensor::new(vec![count, c, l], data)?,
            fs,
            starts,
            labels,
            phases,
        )
    }
}

/// Cut a recording into fixed-length windows.
///
/// `window_len = floor(window_seconds × f_s)`; the stride defaults to
/// the window length (non-overlapping); a trailing partial window is
/// dropped. A recording shorter than one window yields an empty set.
pub fn segment_windows(
    rec: &TimeSeriesRecording,
    window_seconds: f64,
    stride_seconds: Option<f64>,
) -> Result<WindowSet> {
    if !(window_seconds > 0.0) {
        return Err(Error::Config(format!(
            "segment_windows: window_seconds must be positive, got {window_seconds}"
        )));
    }
    let fs = rec.sampling_rate;
    let window_len = (window_seconds * fs).floor() as usize;
    if window_len == 0 {
        return Err(Error::Config(format!(
            "segment_windows: window of {window_seconds} s is shorter than one sample at {fs} Hz"
        )));
    }
    let stride = match stride_seconds {
        Some(s) if s > 0.0 => (s * fs).floor() as usize,
        Some(s) => {
            return Err(Error::Config(format!(
                "segment_windows: stride_seconds must be positive, got {s}"
            )))
        }
        None => window_len,
    };
    if stride == 0 {
        return Err(Error::Config(
            "segment_windows: stride shorter than one sample".into(),
        ));
    }

    let total = rec.samples_per_channel();
    let channels = rec.channel_count();
    let mut data = Vec::new();
    let mut starts = Vec::new();
    let mut s = 0usize;
    while s + window_len <= total {
        for ch in &rec.channels {
            data.extend_from_slice(&ch[s..s + window_len]);
        }
        starts.push(s as f64 / fs);
        s += stride;
    }
    let count = starts.len();
    WindowSet::from_parts(
        Tensor::new(vec![count, channels, window_len], data)?,
        fs,
        starts,
        None,
        None,
    )
}

/// Per-channel normalization statistics, fit on training data only and
/// reused verbatim for validation/test (no leakage).
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ChannelStats {
    /// Population mean/std per channel over all windows and samples.
    pub fn fit(ws: &WindowSet) -> Self {
        let (count, channels, len) = (ws.count(), ws.channel_count(), ws.window_len());
        let mut mean = vec![0.0f64; channels];
        let mut std = vec![0.0f64; channels];
        let n = (count * len) as f64;
        if n == 0.0 {
            return Self { mean, std };
        }
        let data = ws.data.data();
        for w in 0..count {
            for c in 0..channels {
                let off = (w * channels + c) * len;
                for &v in &data[off..off + len] {
                    mean[c] += v as f64;
                }
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        for w in 0..count {
            for c in 0..channels {
                let off = (w * channels + c) * len;
                for &v in &data[off..off + len] {
                    let d = v as f64 - mean[c];
                    std[c] += d * d;
                }
            }
        }
        for s in &mut std {
            *s = (*s / n).sqrt();
        }
        Self { mean, std }
    }

    pub fn fit_recording(rec: &TimeSeriesRecording) -> Self {
        let mut mean = Vec::with_capacity(rec.channel_count());
        let mut std = Vec::with_capacity(rec.channel_count());
        for ch in &rec.channels {
            let n = ch.len() as f64;
            let m = ch.iter().map(|&v| v as f64).sum::<f64>() / n;
            let v = ch.iter().map(|&v| (v as f64 - m) * (v as f64 - m)).sum::<f64>() / n;
            mean.push(m);
            std.push(v.sqrt());
        }
        Self { mean, std }
    }
}

/// Degenerate channels (std below this) z-score to all zeros.
const STD_FLOOR: f64 = 1e-12;

/// Apply stored per-channel statistics: `(x − mean)/std`.
pub fn zscore_windows(ws: &WindowSet, stats: &ChannelStats) -> Result<WindowSet> {
    let channels = ws.channel_count();
    if stats.mean.len() != channels || stats.std.len() != channels {
        return Err(Error::Config(format!(
            "zscore: stats cover {} channels, window set has {channels}",
            stats.mean.len()
        )));
    }
    let (count, len) = (ws.count(), ws.window_len());
    let mut out = ws.clone();
    let data = out.data.data_mut();
    for w in 0..count {
        for c in 0..channels {
            let scale = if stats.std[c] < STD_FLOOR { 0.0 } else { 1.0 / stats.std[c] };
            let off = (w * channels + c) * len;
            for v in &mut data[off..off + len] {
                *v = ((*v as f64 - stats.mean[c]) * scale) as Real;
            }
        }
    }
    Ok(out)
}

pub fn zscore_recording(
    rec: &TimeSeriesRecording,
    stats: &ChannelStats,
) -> Result<TimeSeriesRecording> {
    if stats.mean.len() != rec.channel_count() {
        return Err(Error::Config(format!(
            "zscore: stats cover {} channels, recording has {}",
            stats.mean.len(),
            rec.channel_count()
        )));
    }
    let channels = rec
        .channels
        .iter()
        .zip(stats.mean.iter().zip(&stats.std))
        .map(|(ch, (&m, &s))| {
            let scale = if s < STD_FLOOR { 0.0 } else { 1.0 / s };
            ch.iter().map(|&v| ((v as f64 - m) * scale) as Real).collect()
        })
        .collect();
    TimeSeriesRecording::new(
        channels,
        rec.sampling_rate,
        rec.channel_names.clone(),
        rec.source_id.clone(),
    )
}

/// Fixed pre-filter family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FirKind {
    Lowpass { cutoff_hz: f64 },
    Bandpass { low_hz: f64, high_hz: f64 },
}

/// Hamming-windowed-sinc FIR taps (odd `taps`, symmetric window over
/// `taps − 1`). Lowpass is normalized to unit DC gain; bandpass to unit
/// gain at the arithmetic band center.
pub fn fir_kernel(kind: FirKind, taps: usize, fs: f64) -> Result<Vec<f64>> {
    if taps < 3 || taps % 2 == 0 {
        return Err(Error::Config(format!(
            "fir_kernel: taps must be odd and ≥ 3, got {taps}"
        )));
    }
    let nyquist = fs / 2.0;
    let half = (taps - 1) as f64 / 2.0;
    let m = (taps - 1) as f64;
    // Truncated ideal lowpass with normalized cutoff x = 2 fc / fs.
    let lowpass = |fc: f64, i: usize| -> f64 {
        let n = i as f64 - half;
        let x = 2.0 * fc / fs;
        if n == 0.0 {
            x
        } else {
            (std::f64::consts::PI * x * n).sin() / (std::f64::consts::PI * n)
        }
    };
    let window =
        |i: usize| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / m).cos();
    match kind {
        FirKind::Lowpass { cutoff_hz } => {
            if !(cutoff_hz > 0.0 && cutoff_hz < nyquist) {
                return Err(Error::Config(format!(
                    "fir_kernel: lowpass cutoff {cutoff_hz} Hz outside (0, {nyquist}) at fs = {fs}"
                )));
            }
            let mut h: Vec<f64> = (0..taps).map(|i| lowpass(cutoff_hz, i) * window(i)).collect();
            let sum: f64 = h.iter().sum();
            for v in &mut h {
                *v /= sum;
            }
            Ok(h)
        }
        FirKind::Bandpass { low_hz, high_hz } => {
            if !(low_hz > 0.0 && low_hz < high_hz && high_hz < nyquist) {
                return Err(Error::Config(format!(
                    "fir_kernel: bandpass ({low_hz}, {high_hz}) Hz must satisfy 0 < low < high < {nyquist} at fs = {fs}"
                )));
            }
            let mut h: Vec<f64> = (0..taps)
                .map(|i| (lowpass(high_hz, i) - lowpass(low_hz, i)) * window(i))
                .collect();
            let center = (low_hz + high_hz) / 2.0;
            let (mut re, mut im) = (0.0f64, 0.0f64);
            for (i, &v) in h.iter().enumerate() {
                let phi = 2.0 * std::f64::consts::PI * center / fs * i as f64;
                re += v * phi.cos();
                im -= v * phi.sin();
            }
            let gain = re.hypot(im);
            for v in &mut h {
                *v /= gain;
            }
            Ok(h)
        }
    }
}

/// `y[i] = Σ_m h[m] · x[i + half − m]`, zero outside `x` ("same" mode).
fn conv_same(x: &[f64], h: &[f64]) -> Vec<f64> {
    let half = h.len() / 2;
    let mut y = vec![0.0f64; x.len()];
    for (i, out) in y.iter_mut().enumerate() {
        let j = i + half;
        let m_lo = (j + 1).saturating_sub(x.len());
        let m_hi = h.len().min(j + 1);
        let mut acc = 0.0;
        for m in m_lo..m_hi {
            acc += h[m] * x[j - m];
        }
        *out = acc;
    }
    y
}

/// Forward-backward pass with odd-reflection padding; output length
/// equals input length and group delay cancels exactly.
pub(crate) fn filtfilt(x: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    if x.len() < 2 {
        return Err(Error::Config(format!(
            "fir_filter: channel of {} samples is too short to pad",
            x.len()
        )));
    }
    let pad = (3 * h.len()).min(x.len() - 1);
    let n = x.len();
    let mut ext = Vec::with_capacity(n + 2 * pad);
    for i in (1..=pad).rev() {
        ext.push(2.0 * x[0] - x[i]);
    }
    ext.extend_from_slice(x);
    for i in 0..pad {
        ext.push(2.0 * x[n - 1] - x[n - 2 - i]);
    }
    let mut y = conv_same(&ext, h);
    y.reverse();
    let mut y = conv_same(&y, h);
    y.reverse();
    Ok(y[pad..pad + n].to_vec())
}

/// Zero-phase filter a recording with a Hamming-windowed-sinc FIR
/// (applied forward and backward).
pub fn fir_filter(
    rec: &TimeSeriesRecording,
    kind: FirKind,
    taps: usize,
) -> Result<TimeSeriesRecording> {
    let h = fir_kernel(kind, taps, rec.sampling_rate)?;
    let mut channels = Vec::with_capacity(rec.channel_count());
    for ch in &rec.channels {
        let x: Vec<f64> = ch.iter().map(|&v| v as f64).collect();
        let y = filtfilt(&x, &h)?;
        channels.push(y.into_iter().map(|v| v as Real).collect());
    }
    TimeSeriesRecording::new(
        channels,
        rec.sampling_rate,
        rec.channel_names.clone(),
        rec.source_id.clone(),
    )
}

/// Hold out the final `fraction` of segments, in order (no shuffling),
/// so windows from one segment never straddle the split.
pub fn split_bonn<T>(segments: Vec<T>, fraction: f64) -> Result<(Vec<T>, Vec<T>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!(
            "split_bonn: fraction must be in (0, 1), got {fraction}"
        )));
    }
    let mut train = segments;
    let heldout = (train.len() as f64 * fraction).round() as usize;
    let test = train.split_off(train.len() - heldout);
    Ok((train, test))
}

/// Draw `60 × minutes` windows uniformly without replacement; returns
/// `(test, remaining_pool)`. Deterministic per seed.
pub fn sample_test_minutes(
    pool: &WindowSet,
    minutes: usize,
    seed: u64,
) -> Result<(WindowSet, WindowSet)> {
    let need = 60 * minutes;
    let n = pool.count();
    if n < need {
        return Err(Error::Config(format!(
            "sample_test_minutes: need {need} windows for {minutes} minutes, pool has {n}"
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Partial Fisher-Yates: the first `need` slots end up a uniform
    // without-replacement draw.
    for i in 0..need {
        let j = rng.gen_range(i..n);
        indices.swap(i, j);
    }
    let mut selected = indices[..need].to_vec();
    let mut rest = indices[need..].to_vec();
    selected.sort_unstable();
    rest.sort_unstable();
    Ok((pool.subset(&selected)?, pool.subset(&rest)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_recording(len: usize, fs: f64) -> TimeSeriesRecording {
        let samples = (0..len).map(|i| i as Real).collect();
        TimeSeriesRecording::single_channel(samples, fs, "ramp").unwrap()
    }

    #[test]
    fn bonn_segment_geometry() {
        let rec = ramp_recording(4097, 173.61);
        let ws = segment_windows(&rec, 1.0, None).unwrap();
        assert_eq!(ws.count(), 23);
        assert_eq!(ws.window_len(), 173);
        assert_eq!(ws.channel_count(), 1);
        assert!(ws.start_times().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn trailing_partial_window_dropped() {
        let rec = ramp_recording(10, 1.0);
        let ws = segment_windows(&rec, 3.0, None).unwrap();
        assert_eq!(ws.count(), 3);
        assert_eq!(ws.window(2), &[6.0, 7.0, 8.0]);
    }

    #[test]
    fn short_recording_yields_empty_set() {
        let rec = ramp_recording(5, 1.0);
        let ws = segment_windows(&rec, 10.0, None).unwrap();
        assert_eq!(ws.count(), 0);
    }

    #[test]
    fn windowing_then_concat_reproduces_series() {
        let rec = ramp_recording(103, 10.0);
        let ws = segment_windows(&rec, 2.5, None).unwrap();
        assert_eq!(ws.window_len(), 25);
        assert_eq!(ws.count(), 4);
        let rebuilt: Vec<Real> = (0..ws.count()).flat_map(|i| ws.window(i).to_vec()).collect();
        assert_eq!(&rebuilt[..], &rec.channels()[0][..100]);
    }

    #[test]
    fn overlapping_stride_supported() {
        let rec = ramp_recording(10, 1.0);
        let ws = segment_windows(&rec, 4.0, Some(2.0)).unwrap();
        assert_eq!(ws.count(), 4);
        assert_eq!(ws.window(1), &[2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn zscore_reference_values() {
        let data = Tensor::new(vec![1, 1, 3], vec![1.0, 2.0, 3.0]).unwrap();
        let ws = WindowSet::from_parts(data, 1.0, vec![0.0], None, None).unwrap();
        let stats = ChannelStats::fit(&ws);
        assert!((stats.mean[0] - 2.0).abs() < 1e-12);
        assert!((stats.std[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        let z = zscore_windows(&ws, &stats).unwrap();
        let want = 1.2247448713915889;
        assert!((z.window(0)[0] as f64 + want).abs() < 1e-9);
        assert!((z.window(0)[1] as f64).abs() < 1e-12);
        assert!((z.window(0)[2] as f64 - want).abs() < 1e-9);
    }

    #[test]
    fn constant_channel_maps_to_zeros() {
        let data = Tensor::new(vec![2, 1, 3], vec![4.0; 6]).unwrap();
        let ws = WindowSet::from_parts(data, 1.0, vec![0.0, 3.0], None, None).unwrap();
        let stats = ChannelStats::fit(&ws);
        let z = zscore_windows(&ws, &stats).unwrap();
        assert!(z.data().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zscored_data_is_standardized() {
        let mut state = 0x2468_ace1_u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 6.0 - 1.0
        };
        let data: Vec<Real> = (0..2 * 2 * 50).map(|_| next() as Real).collect();
        let ws = WindowSet::from_parts(
            Tensor::new(vec![2, 2, 50], data).unwrap(),
            1.0,
            vec![0.0, 50.0],
            None,
            None,
        )
        .unwrap();
        let stats = ChannelStats::fit(&ws);
        let z = zscore_windows(&ws, &stats).unwrap();
        let check = ChannelStats::fit(&z);
        for c in 0..2 {
            assert!(check.mean[c].abs() < 1e-9, "mean[{c}] = {}", check.mean[c]);
            assert!((check.std[c] - 1.0).abs() < 1e-9, "std[{c}] = {}", check.std[c]);
        }
        // Applying train stats elsewhere does not mutate them.
        let again = zscore_windows(&ws, &stats).unwrap();
        assert_eq!(z.data(), again.data());
    }

    fn tone(freq: f64, fs: f64, seconds: f64) -> Vec<Real> {
        let n = (fs * seconds) as usize;
        (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / fs).sin() as Real)
            .collect()
    }

    fn mid_rms(x: &[Real]) -> f64 {
        let seg = &x[x.len() / 4..3 * x.len() / 4];
        (seg.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>() / seg.len() as f64).sqrt()
    }

    #[test]
    fn lowpass_preserves_dc() {
        let rec =
            TimeSeriesRecording::single_channel(vec![1.0; 1024], 173.61, "dc").unwrap();
        let out = fir_filter(&rec, FirKind::Lowpass { cutoff_hz: 40.0 }, 255).unwrap();
        let worst = out.channels()[0]
            .iter()
            .map(|&v| (v as f64 - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-3, "worst DC deviation {worst}");
    }

    #[test]
    fn lowpass_attenuates_out_of_band_tone() {
        let fs = 173.61;
        let rec = TimeSeriesRecording::single_channel(tone(60.0, fs, 8.0), fs, "t60").unwrap();
        let out = fir_filter(&rec, FirKind::Lowpass { cutoff_hz: 40.0 }, 255).unwrap();
        let db = 20.0 * (mid_rms(&out.channels()[0]) / mid_rms(&rec.channels()[0])).log10();
        assert!(db <= -20.0, "60 Hz attenuation only {db:.1} dB");
    }

    #[test]
    fn bandpass_preserves_in_band_tone() {
        let fs = 256.0;
        let rec = TimeSeriesRecording::single_channel(tone(10.0, fs, 8.0), fs, "t10").unwrap();
        let out = fir_filter(
            &rec,
            FirKind::Bandpass { low_hz: 0.5, high_hz: 25.0 },
            255,
        )
        .unwrap();
        let db = 20.0 * (mid_rms(&out.channels()[0]) / mid_rms(&rec.channels()[0])).log10();
        assert!(db.abs() <= 1.0, "10 Hz gain {db:.3} dB");
    }

    #[test]
    fn zero_phase_no_group_delay() {
        let fs = 256.0;
        let x = tone(10.0, fs, 4.0);
        let rec = TimeSeriesRecording::single_channel(x.clone(), fs, "t10").unwrap();
        let out = fir_filter(
            &rec,
            FirKind::Bandpass { low_hz: 0.5, high_hz: 25.0 },
            255,
        )
        .unwrap();
        let y = &out.channels()[0];
        // Cross-correlation over lags −10..=10; zero-phase puts the peak at 0.
        let mut best = (0i64, f64::MIN);
        for lag in -10i64..=10 {
            let mut acc = 0.0;
            for i in 0..x.len() {
                let j = i as i64 + lag;
                if j >= 0 && (j as usize) < y.len() {
                    acc += x[i] as f64 * y[j as usize] as f64;
                }
            }
            if acc > best.1 {
                best = (lag, acc);
            }
        }
        assert_eq!(best.0, 0, "correlation peak at lag {}", best.0);
    }

    #[test]
    fn fir_rejects_bad_parameters() {
        let rec = ramp_recording(512, 173.61);
        assert!(fir_filter(&rec, FirKind::Lowpass { cutoff_hz: 86.805 }, 255).is_err());
        assert!(fir_filter(&rec, FirKind::Lowpass { cutoff_hz: 40.0 }, 254).is_err());
        let rec2 = ramp_recording(512, 256.0);
        assert!(
            fir_filter(&rec2, FirKind::Bandpass { low_hz: 0.5, high_hz: 128.0 }, 255).is_err()
        );
        assert!(
            fir_filter(&rec2, FirKind::Bandpass { low_hz: 25.0, high_hz: 0.5 }, 255).is_err()
        );
    }

    #[test]
    fn split_bonn_final_fraction() {
        let segments: Vec<usize> = (0..100).collect();
        let (train, test) = split_bonn(segments, 0.2).unwrap();
        assert_eq!(train.len(), 80);
        assert_eq!(test.len(), 20);
        assert_eq!(train[79], 79);
        assert_eq!(test[0], 80);
        assert!(split_bonn(vec![1, 2, 3], 0.0).is_err());
        assert!(split_bonn(vec![1, 2, 3], 1.0).is_err());
    }

    fn indexed_pool(n: usize) -> WindowSet {
        let data: Vec<Real> = (0..n).map(|i| i as Real).collect();
        WindowSet::from_parts(
            Tensor::new(vec![n, 1, 1], data).unwrap(),
            1.0,
            (0..n).map(|i| i as f64).collect(),
            None,
            None,
        )
        .unwrap()
        .with_label(Label::NonSeizure)
    }

    #[test]
    fn sample_test_minutes_counts_and_determinism() {
        let pool = indexed_pool(700);
        let (test, rest) = sample_test_minutes(&pool, 10, 7).unwrap();
        assert_eq!(test.count(), 600);
        assert_eq!(rest.count(), 100);
        let (test2, _) = sample_test_minutes(&pool, 10, 7).unwrap();
        assert_eq!(test.data(), test2.data());
        let (test3, _) = sample_test_minutes(&pool, 10, 8).unwrap();
        assert_ne!(test.data(), test3.data());

        // Disjoint cover: test + rest hold each original window once.
        let mut seen: Vec<i64> = test
            .data()
            .data()
            .iter()
            .chain(rest.data().data())
            .map(|&v| v as i64)
            .collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..700).collect::<Vec<i64>>());
        assert_eq!(test.labels().unwrap().len(), 600);
    }

    #[test]
    fn sample_test_minutes_insufficient_pool() {
        let pool = indexed_pool(500);
        let err = sample_test_minutes(&pool, 10, 7).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("600") && msg.contains("500"), "{msg}");
    }

    #[test]
    fn concat_rebases_start_times() {
        let a = indexed_pool(3);
        let b = indexed_pool(2);
        let merged = WindowSet::concat(&[a, b]).unwrap();
        assert_eq!(merged.count(), 5);
        assert!(merged.start_times().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn select_channels_by_name() {
        let rec = TimeSeriesRecording::new(
            vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]],
            1.0,
            vec!["a".into(), "b".into(), "c".into()],
            "multi",
        )
        .unwrap();
        let sel = rec.select_channels(&["c".into(), "a".into()]).unwrap();
        assert_eq!(sel.channels()[0], vec![5.0, 6.0]);
        assert_eq!(sel.channels()[1], vec![1.0, 2.0]);
        assert!(rec.select_channels(&["nope".into()]).is_err());
    }
}
