//! Parametrized sinc bandpass filterbank: kernel synthesis from
//! learnable cutoff frequencies, Hamming windowing, and the analytic
//! gradient used by the graph's kernel-synthesis op.
//!
//! A filter is the difference of two windowed sinc lowpass kernels,
//!
//! ```text
//! g[n] = ( 2·f2·sinc(2π·f2·n/fs) − 2·f1·sinc(2π·f1·n/fs) ) · w[n]
//! ```
//!
//! with `sinc(x) = sin(x)/x`, `sinc(0) = 1`, and raw learnable reals
//! `(f1, f2)` mapped to valid band edges by [`effective_cutoffs`].
//! Kernel math always runs in `f64`, regardless of the crate-wide
//! compute type.

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// Maps raw learnable reals to ordered nonnegative band edges:
/// `f1_abs = |f1|`, `f2_abs = f1_abs + |f2 − f1|`, so that
/// `0 ≤ f1_abs ≤ f2_abs` holds for any input.
pub fn effective_cutoffs(f1: f64, f2: f64) -> (f64, f64) {
    let f1_abs = f1.abs();
    (f1_abs, f1_abs + (f2 - f1).abs())
}

/// Hamming window, `w[n] = 0.54 − 0.46·cos(2πn/L)` for `n = 0..L`.
pub fn hamming_window(len: usize) -> Vec<Real> {
    assert!(len >= 1, "hamming_window: len must be >= 1");
    (0..len)
        .map(|n| {
            let w = 0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos();
            w as Real
        })
        .collect()
}

/// Window used for kernel synthesis: the same Hamming taper evaluated
/// at half-sample offsets, `0.54 − 0.46·cos(2π(i+0.5)/L)`, so its peak
/// (exactly 1) lands on the center tap of an odd-length kernel and the
/// taper is exactly even around it.
fn centered_hamming_f64(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| {
            0.54 - 0.46 * (2.0 * std::f64::consts::PI * (i as f64 + 0.5) / len as f64).cos()
        })
        .collect()
}

fn check_kernel_len(len: usize) -> Result<()> {
    if len < 3 || len % 2 == 0 {
        return Err(Error::Config(format!(
            "sinc kernel length must be odd and >= 3, got {len}"
        )));
    }
    Ok(())
}

/// `2f·sinc(2πf·t)` with the exact `t = 0` limit `2f`.
fn scaled_sinc(f: f64, t: f64) -> f64 {
    if t == 0.0 {
        2.0 * f
    } else {
        (2.0 * std::f64::consts::PI * f * t).sin() / (std::f64::consts::PI * t)
    }
}

/// Synthesizes one windowed bandpass kernel of odd length `len` at
/// sampling rate `fs` from raw cutoffs `(f1, f2)`. Taps are exactly
/// even-symmetric: each mirrored pair is computed once.
pub fn sinc_kernel(f1: f64, f2: f64, len: usize, fs: f64) -> Result<Vec<Real>> {
    check_kernel_len(len)?;
    if fs <= 0.0 {
        return Err(Error::Config(format!("sampling rate must be positive, got {fs}")));
    }
    let (f1a, f2a) = effective_cutoffs(f1, f2);
    let window = centered_hamming_f64(len);
    let center = (len - 1) / 2;
    let mut taps = vec![0.0 as Real; len];
    for i in 0..=center {
        let t = (i as f64 - center as f64) / fs;
        let v = (scaled_sinc(f2a, t) - scaled_sinc(f1a, t)) * window[i];
        taps[i] = v as Real;
        taps[len - 1 - i] = v as Real;
    }
    Ok(taps)
}

/// Stacks per-filter kernels into a `[filter_count, len]` tensor.
pub fn kernel_bank(f1s: &[Real], f2s: &[Real], len: usize, fs: f64) -> Result<Tensor> {
    if f1s.len() != f2s.len() {
        return Err(Error::shape("kernel_bank cutoffs", &[f1s.len()], &[f2s.len()]));
    }
    let mut data = Vec::with_capacity(f1s.len() * len);
    for (&f1, &f2) in f1s.iter().zip(f2s) {
        data.extend(sinc_kernel(f1 as f64, f2 as f64, len, fs)?);
    }
    Tensor::new(vec![f1s.len(), len], data)
}

/// Backpropagates kernel-tap gradients to the raw cutoffs.
///
/// With `u(f, t) = 2f·sinc(2πf·t)`, the tap derivative is uniform in
/// `t` (including the center): `∂u/∂f = 2·cos(2πf·t)`. Chaining
/// through the cutoff adjustment uses `sgn` with `sgn(0) = 0`.
pub fn kernel_bank_grad(
    f1s: &[Real],
    f2s: &[Real],
    len: usize,
    fs: f64,
    d_taps: &[Real],
) -> (Vec<Real>, Vec<Real>) {
    let count = f1s.len();
    debug_assert_eq!(d_taps.len(), count * len);
    let window = centered_hamming_f64(len);
    let center = (len - 1) / 2;
    let mut df1 = vec![0.0 as Real; count];
    let mut df2 = vec![0.0 as Real; count];
    for fi in 0..count {
        let (f1, f2) = (f1s[fi] as f64, f2s[fi] as f64);
        let (f1a, f2a) = effective_cutoffs(f1, f2);
        let g = &d_taps[fi * len..(fi + 1) * len];
        let mut d_f1a = 0.0f64;
        let mut d_f2a = 0.0f64;
        for i in 0..=center {
            let t = (i as f64 - center as f64) / fs;
            // Mirrored taps share one derivative value; the center
            // contributes once.
            let gsum = if i == center {
                g[i] as f64
            } else {
                g[i] as f64 + g[len - 1 - i] as f64
            };
            let tau = 2.0 * std::f64::consts::PI * t;
            d_f2a += gsum * 2.0 * (f2a * tau).cos() * window[i];
            d_f1a -= gsum * 2.0 * (f1a * tau).cos() * window[i];
        }
        let sgn = |x: f64| {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            }
        };
        let s1 = sgn(f1);
        let sd = sgn(f2 - f1);
        df1[fi] = (d_f1a * s1 + d_f2a * (s1 - sd)) as Real;
        df2[fi] = (d_f2a * sd) as Real;
    }
    (df1, df2)
}

/// Draws `filter_count` cutoff pairs uniformly from `[0, fs/2]` and
/// orders each pair so the stored `f1 ≤ f2`. Deterministic given the
/// caller's seeded RNG.
pub fn init_cutoffs(filter_count: usize, fs: f64, rng: &mut impl Rng) -> (Vec<Real>, Vec<Real>) {
    let half = fs / 2.0;
    let mut f1s = Vec::with_capacity(filter_count);
    let mut f2s = Vec::with_capacity(filter_count);
    for _ in 0..filter_count {
        let a: f64 = rng.gen_range(0.0..=half);
        let b: f64 = rng.gen_range(0.0..=half);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        f1s.push(lo as Real);
        f2s.push(hi as Real);
    }
    (f1s, f2s)
}

/// Effective `(index, f1_abs, f2_abs)` rows for reporting/CSV export.
pub fn cutoff_table(f1s: &[Real], f2s: &[Real]) -> Vec<(usize, f64, f64)> {
    f1s.iter()
        .zip(f2s)
        .enumerate()
        .map(|(i, (&a, &b))| {
            let (lo, hi) = effective_cutoffs(a as f64, b as f64);
            (i, lo, hi)
        })
        .collect()
}

/// Filters whose effective upper edge exceeds Nyquist, as
/// `(filter_index, f2_abs)`. Training keeps bands below Nyquist on its
/// own; this exists so callers can warn instead of clamping.
pub fn nyquist_violations(f1s: &[Real], f2s: &[Real], fs: f64) -> Vec<(usize, f64)> {
    cutoff_table(f1s, f2s)
        .into_iter()
        .filter(|&(_, _, hi)| hi > fs / 2.0)
        .map(|(i, _, hi)| (i, hi))
        .collect()
}

/// Magnitude of the discrete-time Fourier response of `taps` at each
/// requested frequency (Hz).
pub fn frequency_response(taps: &[Real], fs: f64, freqs: &[f64]) -> Vec<f64> {
    freqs
        .iter()
        .map(|&f| {
            let omega = 2.0 * std::f64::consts::PI * f / fs;
            let (mut re, mut im) = (0.0f64, 0.0f64);
            for (n, &tap) in taps.iter().enumerate() {
                let phase = omega * n as f64;
                re += tap as f64 * phase.cos();
                im -= tap as f64 * phase.sin();
            }
            (re * re + im * im).sqrt()
        })
        .collect()
}

/// Frequency (Hz) of maximum magnitude response on an `nfft`-point
/// half-spectrum grid `k·fs/nfft, k = 0..=nfft/2`, plus that magnitude.
pub fn peak_response(taps: &[Real], fs: f64, nfft: usize) -> (f64, f64) {
    let freqs: Vec<f64> = (0..=nfft / 2).map(|k| k as f64 * fs / nfft as f64).collect();
    let mags = frequency_response(taps, fs, &freqs);
    let (mut best_k, mut best_m) = (0usize, f64::MIN);
    for (k, &m) in mags.iter().enumerate() {
        if m > best_m {
            best_m = m;
            best_k = k;
        }
    }
    (freqs[best_k], best_m)
}
