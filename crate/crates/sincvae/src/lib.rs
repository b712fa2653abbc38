//! Semi-supervised anomaly detection for physiological time series.
//!
//! A 1-D convolutional variational autoencoder whose first encoder
//! layer can be a learnable bank of windowed-sinc bandpass filters.
//! The model trains on normal data only and flags windows whose
//! reconstruction error exceeds a validation-derived threshold.
//! Around the model: preprocessing (FIR filters, windowing, z-score),
//! dataset adapters (EDF, plain-text segment sets, a seeded synthetic
//! generator), detection metrics with seizure-phase analysis, and a
//! statistical grid-search selection pipeline.
//!
//! Everything is deterministic given a seed, down to bit-identical
//! artifacts on re-runs.
//!
//! The `examples/` directory is the front door — one runnable program
//! per capability:
//!
//! | example | shows |
//! |---|---|
//! | `autodiff_basics` | tensors, graphs, gradients, Adam |
//! | `sinc_filterbank` | kernel synthesis and band analysis |
//! | `preprocess_filters` | zero-phase FIR filtering, windowing, z-score |
//! | `train_synthetic` | training a model on generated data |
//! | `detect_anomalies` | scoring, thresholds, detection metrics |
//! | `phase_analysis` | per-phase anomaly rates around seizure events |
//! | `model_selection` | grid expansion and statistical selection |
//! | `edf_roundtrip` | EDF write/read fidelity |
//!
//! Run one with `cargo run --example <name>`.
//!
//! The same pipeline is scriptable through the `sincvae` binary
//! (`preprocess`, `train`, `score`, `eval`, `select`, `synth`,
//! `edf-info`); see `sincvae --help`.

pub mod cli;
pub mod detector;
pub mod error;
pub mod ingest;
pub mod selection;
pub mod signal;
pub mod sinc;
pub mod stats;
pub mod tensor;
pub mod vae;

pub use error::{Error, Result};
