//! Synthetic EEG-like recordings with planted seizure bursts.
//!
//! Background is band-limited Gaussian noise plus optional sinusoids.
//! Each burst adds band-limited noise whose amplitude is calibrated so
//! the in-burst RMS is `gain` times the background RMS: if the burst
//! has RMS `a` on top of independent background with RMS `r`, the sum
//! has RMS sqrt(r^2 + a^2), so `a = r * sqrt(gain^2 - 1)`.
//!
//! Burst onsets are snapped to whole seconds, so second-aligned windows
//! are unambiguously inside or outside every burst.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::SeizureAnnotation;
use crate::signal::{filtfilt, fir_kernel, FirKind, TimeSeriesRecording};
use crate::tensor::Real;
use crate::vae::standard_normal;

const FIR_TAPS: usize = 101;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BurstSpec {
    /// Number of bursts, one per equal slot of the recording.
    pub count: usize,
    /// Burst length in seconds.
    pub duration_s: f64,
    /// Target in-burst RMS as a multiple of the background RMS.
    pub gain: f64,
    /// Burst band edges in Hz.
    pub low_hz: f64,
    pub high_hz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub duration_s: f64,
    pub channels: usize,
    pub sampling_rate: f64,
    pub background_low_hz: f64,
    pub background_high_hz: f64,
    /// Deterministic sinusoids added to every channel.
    pub sine_hzs: Vec<f64>,
    pub sine_amp: f64,
    pub bursts: BurstSpec,
    pub seed: u64,
    pub track_id: String,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            duration_s: 120.0,
            channels: 1,
            sampling_rate: 128.0,
            background_low_hz: 0.5,
            background_high_hz: 25.0,
            sine_hzs: vec![10.0],
            sine_amp: 0.5,
            bursts: BurstSpec {
                count: 4,
                duration_s: 4.0,
                gain: 3.0,
                low_hz: 2.0,
                high_hz: 20.0,
            },
            seed: 0,
            track_id: "synthetic".into(),
        }
    }
}

fn check_band(low: f64, high: f64, nyquist: f64, what: &str) -> Result<()> {
    if !(low > 0.0 && high > low && high < nyquist) {
        return Err(Error::Config(format!(
            "{what} band [{low}, {high}] Hz must satisfy 0 < low < high < {nyquist} (Nyquist)"
        )));
    }
    Ok(())
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0) {
            return Err(Error::Config(format!(
                "duration must be positive, got {}",
                self.duration_s
            )));
        }
        if self.channels == 0 {
            return Err(Error::Config("at least one channel required".into()));
        }
        if !(self.sampling_rate > 0.0) {
            return Err(Error::Config(format!(
                "sampling rate must be positive, got {}",
                self.sampling_rate
            )));
        }
        let nyquist = self.sampling_rate / 2.0;
        check_band(
            self.background_low_hz,
            self.background_high_hz,
            nyquist,
            "background",
        )?;
        for &f in &self.sine_hzs {
            if !(f > 0.0 && f < nyquist) {
                return Err(Error::Config(format!(
                    "sine frequency {f} Hz is outside (0, {nyquist})"
                )));
            }
        }
        if self.sine_amp < 0.0 {
            return Err(Error::Config(format!(
                "sine amplitude must be non-negative, got {}",
                self.sine_amp
            )));
        }
        if self.bursts.count > 0 {
            check_band(self.bursts.low_hz, self.bursts.high_hz, nyquist, "burst")?;
            if !(self.bursts.gain > 1.0) {
                return Err(Error::Config(format!(
                    "burst gain must exceed 1, got {}",
                    self.bursts.gain
                )));
            }
            if !(self.bursts.duration_s > 0.0) {
                return Err(Error::Config(format!(
                    "burst duration must be positive, got {}",
                    self.bursts.duration_s
                )));
            }
            let slot = self.duration_s / self.bursts.count as f64;
            if self.bursts.duration_s + 2.0 > slot {
                return Err(Error::Config(format!(
                    "{} bursts of {} s need {} s slots plus 1 s margins; duration {} s \
                     gives {} s slots",
                    self.bursts.count,
                    self.bursts.duration_s,
                    self.bursts.duration_s + 2.0,
                    self.duration_s,
                    slot
                )));
            }
        }
        Ok(())
    }
}

fn rms(x: &[f64]) -> f64 {
    let s: f64 = x.iter().map(|&v| v * v).sum();
    (s / x.len() as f64).sqrt()
}

/// Generate a recording plus the ground-truth burst intervals.
pub fn synth_generate(spec: &SynthSpec) -> Result<(TimeSeriesRecording, SeizureAnnotation)> {
    spec.validate()?;
    let fs = spec.sampling_rate;
    let n = (spec.duration_s * fs).round() as usize;
    if n == 0 {
        return Err(Error::Config("duration rounds to zero samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let bg_kernel = fir_kernel(
        FirKind::Bandpass {
            low_hz: spec.background_low_hz,
            high_hz: spec.background_high_hz,
        },
        FIR_TAPS,
        fs,
    )?;

    // burst schedule first so its RNG draws don't depend on channel count
    let mut intervals: Vec<(f64, f64)> = Vec::with_capacity(spec.bursts.count);
    if spec.bursts.count > 0 {
        let slot = spec.duration_s / spec.bursts.count as f64;
        for b in 0..spec.bursts.count {
            let slack = slot - 2.0 - spec.bursts.duration_s;
            let u: f64 = rng.gen();
            // whole-second onsets keep second-aligned labels unambiguous
            let start = (b as f64 * slot + 1.0 + u * slack).floor();
            intervals.push((start, start + spec.bursts.duration_s));
        }
    }

    let burst_kernel = if spec.bursts.count > 0 {
        Some(fir_kernel(
            FirKind::Bandpass {
                low_hz: spec.bursts.low_hz,
                high_hz: spec.bursts.high_hz,
            },
            FIR_TAPS,
            fs,
        )?)
    } else {
        None
    };

    let mut channels: Vec<Vec<Real>> = Vec::with_capacity(spec.channels);
    for _ in 0..spec.channels {
        let white: Vec<f64> = standard_normal(&mut rng, n).iter().map(|&v| v as f64).collect();
        let mut ch = filtfilt(&white, &bg_kernel)?;
        for &f in &spec.sine_hzs {
            let phase: f64 = rng.gen::<f64>() * 2.0 * std::f64::consts::PI;
            for (i, v) in ch.iter_mut().enumerate() {
                *v += spec.sine_amp * (2.0 * std::f64::consts::PI * f * i as f64 / fs + phase).sin();
            }
        }
        let background_rms = rms(&ch);
        if let Some(kernel) = &burst_kernel {
            let amp = background_rms * (spec.bursts.gain * spec.bursts.gain - 1.0).sqrt();
            for &(start_s, end_s) in &intervals {
                let lo = (start_s * fs).round() as usize;
                let hi = ((end_s * fs).round() as usize).min(n);
                let white: Vec<f64> =
                    standard_normal(&mut rng, hi - lo).iter().map(|&v| v as f64).collect();
                let mut seg = filtfilt(&white, kernel)?;
                let seg_rms = rms(&seg);
                for v in &mut seg {
                    *v = *v / seg_rms * amp;
                }
                for (k, v) in seg.iter().enumerate() {
                    ch[lo + k] += *v;
                }
            }
        }
        channels.push(ch.into_iter().map(|v| v as Real).collect());
    }

    let names = (0..spec.channels).map(|i| format!("ch{i}")).collect();
    let rec = TimeSeriesRecording::new(channels, fs, names, spec.track_id.clone())?;
    let ann = SeizureAnnotation {
        track_id: spec.track_id.clone(),
        intervals,
    };
    Ok((rec, ann))
}
