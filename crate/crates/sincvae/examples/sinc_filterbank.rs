//! Inspect a bank of windowed-sinc bandpass kernels: effective cutoffs,
//! spectral peak, and rejection at DC and twice the upper edge.

use sincvae::sinc::{effective_cutoffs, frequency_response, kernel_bank, peak_response};
use sincvae::tensor::Real;

fn main() -> sincvae::Result<()> {
    let fs = 256.0;
    let len = 101;
    let nfft = 4096;

    // raw learnable cutoffs as a trainer might leave them: ordered,
    // swapped, and negative — the layer reads all three the same way
    let f1s: Vec<Real> = vec![8.0, 30.0, -12.0];
    let f2s: Vec<Real> = vec![24.0, 14.0, 20.0];
    let bank = kernel_bank(&f1s, &f2s, len, fs)?;
    println!("bank shape {:?}", bank.shape());

    for (i, (&f1, &f2)) in f1s.iter().zip(&f2s).enumerate() {
        let (lo, hi) = effective_cutoffs(f1 as f64, f2 as f64);
        let taps = &bank.data()[i * len..(i + 1) * len];
        let (peak_f, peak_m) = peak_response(taps, fs, nfft);
        let probes = [0.0, 2.0 * hi];
        let mags = frequency_response(taps, fs, &probes);
        let db = |m: f64| 20.0 * (m / peak_m).log10();
        println!(
            "kernel {i}: raw ({f1:>6.1}, {f2:>6.1}) -> band [{lo:.1}, {hi:.1}] Hz; \
             peak at {peak_f:.2} Hz; DC {:.1} dB, {:.0} Hz {:.1} dB",
            db(mags[0]),
            probes[1],
            db(mags[1]),
        );
        assert!(peak_f >= lo - fs / nfft as f64 && peak_f <= hi + fs / nfft as f64);
    }

    // symmetry: odd-length kernels are exactly even around the center tap
    let taps = &bank.data()[..len];
    for j in 0..len / 2 {
        assert_eq!(taps[j], taps[len - 1 - j]);
    }
    println!("kernels are exactly symmetric (linear phase)");
    Ok(())
}
