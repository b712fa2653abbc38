//! Semi-supervised detection: train on burst-free data, score a mixed
//! track, and compare the three threshold policies.

use sincvae::detector::{evaluate, ThresholdPolicy};
use sincvae::ingest::{synth_generate, BurstSpec, SynthSpec};
use sincvae::signal::{segment_windows, zscore_windows, ChannelStats, Label};
use sincvae::vae::{
    reconstruct_mse, train, Activation, TrainConfig, VaeArchitecture, Variant,
};

fn main() -> sincvae::Result<()> {
    let base = SynthSpec {
        sine_hzs: vec![],
        ..SynthSpec::default()
    };
    let normal = SynthSpec {
        duration_s: 240.0,
        bursts: BurstSpec { count: 0, ..base.bursts },
        seed: 31,
        ..base.clone()
    };
    let mixed = SynthSpec {
        duration_s: 120.0,
        bursts: BurstSpec { count: 6, duration_s: 6.0, gain: 3.0, ..base.bursts },
        seed: 32,
        ..base
    };
    let (train_rec, _) = synth_generate(&normal)?;
    let (test_rec, ann) = synth_generate(&mixed)?;

    let train_raw = segment_windows(&train_rec, 1.0, None)?;
    let stats = ChannelStats::fit(&train_raw);
    let train_ws = zscore_windows(&train_raw, &stats)?;
    let test_ws = zscore_windows(&segment_windows(&test_rec, 1.0, None)?, &stats)?;

    // a window is anomalous when it overlaps any annotated interval
    let labels: Vec<Label> = test_ws
        .start_times()
        .iter()
        .map(|&t| {
            let overlaps = ann
                .intervals
                .iter()
                .any(|&(a, b)| t < b && a < t + 1.0);
            if overlaps { Label::Seizure } else { Label::NonSeizure }
        })
        .collect();

    let arch = VaeArchitecture {
        variant: Variant::Sinc,
        filter_count: 4,
        kernel_length: 17,
        activation: Activation::Identity,
        latent_dim: 8,
        conv_blocks: 2,
        channels: 8,
        input_channels: 1,
        window_len: test_ws.window_len(),
        sampling_rate: test_ws.sampling_rate(),
    };
    let cfg = TrainConfig { max_epochs: 25, patience: 8, batch_size: 32, seed: 33, ..TrainConfig::default() };
    let model = train(&train_ws, &cfg, &arch)?;
    let scores = reconstruct_mse(&model, test_ws.data())?;

    // t1 flags anything worse than the worst validation window;
    // t2 tolerates the top 5% of validation scores; nearest-rank is the
    // textbook percentile variant
    for policy in [
        ThresholdPolicy::MaxValidation,
        ThresholdPolicy::Percentile(95.0),
        ThresholdPolicy::NearestRank(95.0),
    ] {
        let report = evaluate(&scores, &labels, &model.val_scores, policy)?;
        let m = &report.metrics;
        println!(
            "{:<22} thr {:.4}  precision {:.3}  recall {:.3}  f1 {:.3}  fpr {:.3}",
            report.policy, report.threshold, m.precision, m.recall, m.f1, m.false_positive_rate
        );
    }
    Ok(())
}
