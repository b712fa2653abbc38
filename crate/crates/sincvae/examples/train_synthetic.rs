//! Train a small sinc-front-end VAE on synthetic background activity,
//! checkpoint it, and reload the checkpoint bit-exactly.

use sincvae::ingest::{synth_generate, BurstSpec, SynthSpec};
use sincvae::signal::{segment_windows, zscore_windows, ChannelStats};
use sincvae::vae::{
    load_checkpoint, save_checkpoint, train, Activation, TrainConfig, VaeArchitecture, Variant,
};

fn main() -> sincvae::Result<()> {
    // burst-free track: everything the model sees is "normal"
    let spec = SynthSpec {
        duration_s: 120.0,
        bursts: BurstSpec { count: 0, ..SynthSpec::default().bursts },
        seed: 3,
        ..SynthSpec::default()
    };
    let (rec, _) = synth_generate(&spec)?;
    let raw = segment_windows(&rec, 1.0, None)?;
    let stats = ChannelStats::fit(&raw);
    let windows = zscore_windows(&raw, &stats)?;

    let arch = VaeArchitecture {
        variant: Variant::Sinc,
        filter_count: 4,
        kernel_length: 17,
        activation: Activation::Identity,
        latent_dim: 8,
        conv_blocks: 2,
        channels: 8,
        input_channels: windows.channel_count(),
        window_len: windows.window_len(),
        sampling_rate: windows.sampling_rate(),
    };
    let cfg = TrainConfig {
        max_epochs: 10,
        patience: 5,
        batch_size: 32,
        seed: 9,
        ..TrainConfig::default()
    };
    let mut model = train(&windows, &cfg, &arch)?;
    model.norm_stats = Some(stats);
    for row in &model.history {
        println!(
            "epoch {:>2}: train {:.5}  val {:.5} (recon {:.5} + kl {:.5})",
            row.epoch, row.train_loss, row.val_loss, row.val_recon, row.val_kl
        );
    }

    let dir = std::env::temp_dir().join("sincvae_train_example");
    std::fs::create_dir_all(&dir).map_err(|e| sincvae::Error::io(&dir, e))?;
    let path = dir.join("model.svae");
    save_checkpoint(&path, &model)?;
    let back = load_checkpoint(&path)?;
    for (i, (name, t)) in model.params.iter().enumerate() {
        assert_eq!(back.params.name_at(i), name);
        assert_eq!(back.params.tensor_at(i).data(), t.data());
    }
    assert_eq!(back.val_scores, model.val_scores);
    println!(
        "checkpoint {} reloads bit-exactly ({} parameter tensors, {} validation scores)",
        path.display(),
        model.params.len(),
        model.val_scores.len()
    );
    Ok(())
}
