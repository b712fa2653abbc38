//! Write a recording as EDF, print its header, and confirm the
//! quantization error bound and byte-exact rewrite.

use sincvae::ingest::{read_edf, read_edf_header, write_edf, EdfWriteOptions};
use sincvae::signal::TimeSeriesRecording;
use sincvae::tensor::Real;

fn main() -> sincvae::Result<()> {
    let fs = 256.0;
    let n = 1024; // 4 s, so 4 one-second data records
    let two_pi = 2.0 * std::f64::consts::PI;
    let chans: Vec<Vec<Real>> = vec![
        (0..n).map(|i| (100.0 * (two_pi * 7.0 * i as f64 / fs).sin()) as Real).collect(),
        (0..n).map(|i| (40.0 * (two_pi * 19.0 * i as f64 / fs).cos()) as Real).collect(),
    ];
    let rec = TimeSeriesRecording::new(
        chans,
        fs,
        vec!["EEG Fp1".into(), "EEG Fp2".into()],
        "edfdemo",
    )?;

    let dir = std::env::temp_dir().join("sincvae_edf_example");
    std::fs::create_dir_all(&dir).map_err(|e| sincvae::Error::io(&dir, e))?;
    let path = dir.join("demo.edf");
    let opts = EdfWriteOptions::covering(&rec);
    write_edf(&path, &rec, &opts)?;

    let header = read_edf_header(&path)?;
    print!("{}", header.render_text());

    // 16-bit quantization over the covering physical range
    let back = read_edf(&path, None)?;
    let lsb = (opts.physical_max - opts.physical_min) / 65535.0;
    let mut worst = 0.0f64;
    for (a, b) in rec.channels().iter().zip(back.channels()) {
        for (&x, &y) in a.iter().zip(b) {
            worst = worst.max((x as f64 - y as f64).abs());
        }
    }
    println!("worst decode error {worst:.3e} (half LSB is {:.3e})", lsb / 2.0);
    assert!(worst <= lsb / 2.0 + 1e-12);

    // reading a file and writing it again reproduces it byte for byte
    let copy = dir.join("copy.edf");
    write_edf(&copy, &back, &opts)?;
    let original = std::fs::read(&path).map_err(|e| sincvae::Error::io(&path, e))?;
    let rewritten = std::fs::read(&copy).map_err(|e| sincvae::Error::io(&copy, e))?;
    assert_eq!(original, rewritten);
    println!("rewrite is byte-identical ({} bytes)", original.len());

    // selecting one channel by label
    let one = read_edf(&path, Some(&["EEG Fp2".to_string()]))?;
    println!("selected {:?}: {} channel(s)", one.channel_names(), one.channel_count());
    Ok(())
}
